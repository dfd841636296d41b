from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing import List, Optional


class CostAssumptions(BaseModel):
    """Unit prices and operating parameters of a UAV survey mission.

    Prices vary greatly with the operation location, so every value can be
    overridden from a flat JSON file. Unknown keys are rejected.
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    # Fixed, per pilot / per drone
    part107_fee: float = Field(150.0, ge=0, description="$ per pilot, remote pilot certificate")
    training: float = Field(300.0, ge=0, description="$ per pilot")
    registration: float = Field(5.0, ge=0, description="$ per drone-year")
    airfare: float = Field(2000.0, ge=0, description="$ per pilot")

    # Transportation
    car_rental: float = Field(1700.0, ge=0, description="$ per month")
    car_insurance: float = Field(400.0, ge=0, description="$ per month")
    fuel_price: float = Field(3.0, ge=0, description="$ per gallon")
    translator: float = Field(0.0, ge=0, description="$ per day, 0 in the US")
    comm_radius_km: float = Field(7.0, gt=0, description="Drone-controller communication radius")
    km_per_gallon: float = Field(40.0, gt=0)

    # Labor
    wage: float = Field(40.0, ge=0, description="$ per hour")
    benefits: float = Field(20.0, ge=0, description="$ per hour")
    paid_hours_per_day: float = Field(8.0, ge=0)
    hotel: float = Field(125.0, ge=0, description="$ per night")

    # Equipment
    drone_price: float = Field(27000.0, ge=0)
    camera_price: float = Field(0.0, ge=0)
    battery_bundle: float = Field(3000.0, ge=0, description="Batteries for a full day of flying, per drone")
    storage_price: float = Field(130.0, ge=0, description="$ per storage unit")
    storage_unit_bytes: float = Field(5e12, gt=0, description="Capacity of one storage unit")
    channels: int = Field(4, ge=1, description="RGB plus one GIS channel")
    bytes_per_channel: int = Field(1, ge=1)

    # Operations
    drone_lifetime_h: float = Field(800.0, gt=0, description="Flight hours before replacement")
    flight_hours_per_day: float = Field(6.0, ge=0)
    workdays_per_week: float = Field(5.0, gt=0, le=7)
    sunny_fraction: float = Field(0.8, gt=0, le=1)
    max_mission_days: float = Field(90.0, gt=0, description="Longest engagement of one pilot")
    coverage_per_flight_hour_km2_at_ref: float = Field(
        0.293, ge=0, description="km² imaged per flight hour at ref_gsd_m"
    )
    ref_gsd_m: float = Field(0.03, gt=0)

    # Multiply human cost by the pilot count as well as by pilot-days
    literal_human_formula: bool = False

    @property
    def car_daily(self) -> float:
        return (self.car_rental + self.car_insurance) / 30.0

    @property
    def daily_rate(self) -> float:
        """Human cost of one pilot-day"""
        return (
            (self.wage + self.benefits) * self.paid_hours_per_day
            + self.hotel
            + self.car_daily
            + self.translator
        )

    @property
    def drone_bundle(self) -> float:
        return self.drone_price + self.camera_price + self.battery_bundle


class MissionSpec(BaseModel):
    """Area to survey and the resolution to survey it at"""
    model_config = ConfigDict(frozen=True)

    area_km2: float = Field(..., gt=0)
    gsd_m: float = Field(..., gt=0)
    region_label: Optional[str] = None


class CostBreakdown(BaseModel):
    """Itemized mission cost"""
    area_km2: float
    gsd_m: float
    day_tot: float = Field(..., description="Total pilot-days of engagement")
    n_pilots: int
    fixed: float
    human: float
    drone: float
    fuel: float
    storage: float
    total: float
    unit_cost: float = Field(..., description="$ per km²")
    hotel_share: float

    @model_validator(mode="after")
    def check_total(self):
        parts = self.fixed + self.human + self.drone + self.fuel + self.storage
        if abs(parts - self.total) > 1e-6 * max(1.0, abs(self.total)):
            raise ValueError("total must equal the sum of the categories")
        return self


class Platform(BaseModel):
    """Quoted imagery price of a comparison platform"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str = Field(..., min_length=1)
    gsd_m: float = Field(..., gt=0)
    unit_cost_usd_km2: float = Field(..., gt=0)


class PlatformComparisonRow(BaseModel):
    name: str
    gsd_m: float
    unit_cost_usd_km2: float
    uav_unit_cost_usd_km2: float
    break_even_area_km2: Optional[float] = Field(
        None, description="Smallest area where the UAV is no dearer; None means never"
    )


class PlatformComparison(BaseModel):
    mission: MissionSpec
    uav_unit_cost_usd_km2: float
    rows: List[PlatformComparisonRow]

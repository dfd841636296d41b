"""UAV survey mission cost model and platform comparison"""
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union
import json
import logging
import math

from pydantic import TypeAdapter, ValidationError

from app.config import settings
from app.schemas.cost import (
    CostAssumptions,
    CostBreakdown,
    MissionSpec,
    Platform,
    PlatformComparison,
    PlatformComparisonRow,
)
from app.services.exceptions import (
    ArgumentError,
    FormatError,
    IoError,
    describe_validation_error,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

DAYS_PER_WEEK = 7.0
# Calendar days paid per working day; fixed by the model whatever workdays_per_week says
WEEKEND_FACTOR = 7.0 / 5.0
BREAK_EVEN_BOUNDS_KM2 = (1e-2, 1e7)


def _read_json(path: PathLike):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise IoError(f"Cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: malformed JSON ({e})") from e


def load_assumptions(path: Optional[PathLike] = None) -> Tuple[CostAssumptions, str]:
    """Load assumptions from ``path``, else SHS_ASSUMPTIONS, else the built-in defaults.

    Returns the assumptions and where they came from.
    """
    source = path or settings.SHS_ASSUMPTIONS
    if not source:
        logger.info("No assumptions file given; using built-in defaults")
        return CostAssumptions(), "defaults"
    try:
        return CostAssumptions.model_validate(_read_json(source)), str(source)
    except ValidationError as e:
        raise FormatError(f"{source}: {describe_validation_error(e)}") from e


def load_platforms(path: PathLike) -> List[Platform]:
    try:
        return TypeAdapter(List[Platform]).validate_python(_read_json(path))
    except ValidationError as e:
        raise FormatError(f"{path}: {describe_validation_error(e)}") from e


def area_per_day(gsd_m: float, a: CostAssumptions) -> float:
    """km² imaged per flying day; coverage scales linearly with GSD"""
    if gsd_m <= 0:
        raise ArgumentError(f"GSD must be positive, got {gsd_m}")
    return a.coverage_per_flight_hour_km2_at_ref * (gsd_m / a.ref_gsd_m) * a.flight_hours_per_day


def mission_days(mission: MissionSpec, a: CostAssumptions) -> float:
    """Total pilot-days, paying weekends and waiting out bad weather"""
    per_day = area_per_day(mission.gsd_m, a)
    if per_day <= 0:
        raise ArgumentError("Daily coverage is zero; the mission can never finish")
    return mission.area_km2 / per_day * WEEKEND_FACTOR / a.sunny_fraction


def pilots_required(day_tot: float, a: CostAssumptions) -> int:
    if day_tot < 0:
        raise ArgumentError("Mission days cannot be negative")
    if day_tot == 0:
        return 0
    return max(1, math.ceil(day_tot / a.max_mission_days))


def fixed_cost(n_pilots: int, a: CostAssumptions) -> float:
    if n_pilots < 0:
        raise ArgumentError("Pilot count cannot be negative")
    return (a.airfare + a.training + a.part107_fee + a.registration) * n_pilots


def human_cost(day_tot: float, a: CostAssumptions, n_pilots: Optional[int] = None) -> float:
    """Wages, benefits, hotel, car and translator per pilot-day.

    ``day_tot`` already counts pilot-days. ``literal_human_formula`` multiplies
    by the pilot count again.
    """
    if day_tot < 0:
        raise ArgumentError("Mission days cannot be negative")
    cost = a.daily_rate * day_tot
    if a.literal_human_formula:
        cost *= pilots_required(day_tot, a) if n_pilots is None else n_pilots
    return cost


def flight_hours(day_tot: float, a: CostAssumptions) -> float:
    """Hours actually flown over ``day_tot`` calendar pilot-days"""
    return day_tot * (a.workdays_per_week / DAYS_PER_WEEK) * a.sunny_fraction * a.flight_hours_per_day


def drone_cost(day_tot: float, a: CostAssumptions) -> float:
    """Drone, camera and batteries amortized over flight hours"""
    return a.drone_bundle / a.drone_lifetime_h * flight_hours(day_tot, a)


def fuel_cost(mission: MissionSpec, a: CostAssumptions) -> float:
    # Area over twice the communication radius, as the driving distance in km
    return a.fuel_price * (mission.area_km2 / (2.0 * a.comm_radius_km)) / a.km_per_gallon


def storage_bytes(mission: MissionSpec, a: CostAssumptions) -> float:
    pixels = mission.area_km2 * 1e6 / (mission.gsd_m * mission.gsd_m)
    return a.channels * a.bytes_per_channel * pixels


def storage_cost(mission: MissionSpec, a: CostAssumptions) -> float:
    units = math.ceil(storage_bytes(mission, a) / a.storage_unit_bytes)
    return units * a.storage_price


def estimate(mission: MissionSpec, a: CostAssumptions = CostAssumptions()) -> CostBreakdown:
    day_tot = mission_days(mission, a)
    n_pilots = pilots_required(day_tot, a)
    fixed = fixed_cost(n_pilots, a)
    human = human_cost(day_tot, a, n_pilots)
    drone = drone_cost(day_tot, a)
    fuel = fuel_cost(mission, a)
    storage = storage_cost(mission, a)
    total = fixed + human + drone + fuel + storage

    breakdown = CostBreakdown(
        area_km2=mission.area_km2,
        gsd_m=mission.gsd_m,
        day_tot=day_tot,
        n_pilots=n_pilots,
        fixed=fixed,
        human=human,
        drone=drone,
        fuel=fuel,
        storage=storage,
        total=total,
        unit_cost=total / mission.area_km2,
        hotel_share=a.hotel * day_tot / total if total > 0 else 0.0,
    )
    logger.debug(
        f"{mission.area_km2} km² at {mission.gsd_m} m: {day_tot:.1f} pilot-days, "
        f"{n_pilots} pilots, total ${total:,.0f}"
    )
    return breakdown


def unit_cost_curve(gsd_m: float, areas: Sequence[float], a: CostAssumptions = CostAssumptions()) -> List[Tuple[float, float]]:
    """(area, $/km²) for each area at a fixed GSD.

    Nonincreasing between pilot-count steps only: each extra pilot adds a fixed
    cost, so unit cost rises slightly just past every multiple of max_mission_days.
    """
    if any(area <= 0 for area in areas):
        raise ArgumentError("Areas must be positive")
    return [(area, estimate(MissionSpec(area_km2=area, gsd_m=gsd_m), a).unit_cost) for area in areas]


def hotel_share_curve(gsd_m: float, areas: Sequence[float], a: CostAssumptions = CostAssumptions()) -> List[Tuple[float, float]]:
    """Hotel cost as a share of the total: the saving if local pilots are hired"""
    return [(area, estimate(MissionSpec(area_km2=area, gsd_m=gsd_m), a).hotel_share) for area in areas]


def local_pilot_assumptions(a: CostAssumptions) -> CostAssumptions:
    """Pilots living within a day trip need neither flights nor hotels"""
    return a.model_copy(update={"hotel": 0.0, "airfare": 0.0})


def resolution_cost_curve(area_km2: float, gsds: Sequence[float], a: CostAssumptions = CostAssumptions()) -> List[Tuple[float, float]]:
    """(GSD, $/km²) at a fixed mission area"""
    return [(gsd, estimate(MissionSpec(area_km2=area_km2, gsd_m=gsd), a).unit_cost) for gsd in gsds]


def break_even_area(gsd_m: float, unit_cost_usd_km2: float, a: CostAssumptions, iterations: int = 200) -> Optional[float]:
    """Smallest area in the search bounds where the UAV is no dearer per km².

    Bisection in log-area; None when the UAV never gets that cheap.
    """
    lo, hi = BREAK_EVEN_BOUNDS_KM2

    def uav(area: float) -> float:
        return estimate(MissionSpec(area_km2=area, gsd_m=gsd_m), a).unit_cost

    if uav(lo) <= unit_cost_usd_km2:
        return lo
    if uav(hi) > unit_cost_usd_km2:
        return None
    log_lo, log_hi = math.log(lo), math.log(hi)
    for _ in range(iterations):
        mid = 0.5 * (log_lo + log_hi)
        if uav(math.exp(mid)) <= unit_cost_usd_km2:
            log_hi = mid
        else:
            log_lo = mid
        if log_hi - log_lo < 1e-12:
            break
    return math.exp(log_hi)


def compare_platforms(mission: MissionSpec, a: CostAssumptions, platforms: Sequence[Platform]) -> PlatformComparison:
    if not platforms:
        raise ArgumentError("At least one comparison platform is required")
    uav_unit = estimate(mission, a).unit_cost
    rows = []
    for platform in platforms:
        rows.append(
            PlatformComparisonRow(
                name=platform.name,
                gsd_m=platform.gsd_m,
                unit_cost_usd_km2=platform.unit_cost_usd_km2,
                uav_unit_cost_usd_km2=uav_unit,
                break_even_area_km2=break_even_area(mission.gsd_m, platform.unit_cost_usd_km2, a),
            )
        )
    return PlatformComparison(mission=mission, uav_unit_cost_usd_km2=uav_unit, rows=rows)

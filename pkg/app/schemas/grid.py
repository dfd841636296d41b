from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing import Optional


class GeoMeta(BaseModel):
    """Raster dimensions plus ground sampling distance.

    Grids are row-major with the origin at the top-left pixel, x rightward
    and y downward.
    """
    model_config = ConfigDict(frozen=True)

    width: int = Field(..., ge=1, description="Width in pixels")
    height: int = Field(..., ge=1, description="Height in pixels")
    gsd_m: float = Field(..., gt=0, description="Pixel pitch in meters/pixel")
    altitude_m: Optional[float] = Field(None, gt=0, description="Flight altitude in meters")
    tag: Optional[str] = Field(None, description="Free-form tag, e.g. 'sport-mode'")
    effective_gsd_m: Optional[float] = Field(
        None, gt=0, description="Resolution actually resolved by the pixels, set by GSD simulation"
    )

    @model_validator(mode="after")
    def check_effective_gsd(self):
        if self.effective_gsd_m is not None and self.effective_gsd_m < self.gsd_m:
            raise ValueError("effective_gsd_m cannot be finer than gsd_m")
        return self

    @property
    def size(self) -> int:
        return self.width * self.height

    @property
    def shape(self) -> tuple:
        return (self.height, self.width)

    @property
    def pixel_area_m2(self) -> float:
        return self.gsd_m * self.gsd_m

    @property
    def resolved_gsd_m(self) -> float:
        return self.effective_gsd_m if self.effective_gsd_m is not None else self.gsd_m

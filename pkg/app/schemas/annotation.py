from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import List, Literal, Optional, Tuple


class PolygonAnnotation(BaseModel):
    """Polygon drawn around one solar panel, in pixel coordinates of the image"""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    id: int
    class_name: Literal["solar_panel"] = Field("solar_panel", alias="class")
    vertices: Tuple[Tuple[float, float], ...] = Field(..., description="Ordered (x, y) vertices")

    @field_validator("vertices")
    @classmethod
    def validate_vertices(cls, v):
        if len(v) < 3:
            raise ValueError("A polygon needs at least 3 vertices")
        return v


class AnnotationFile(BaseModel):
    """On-disk annotation JSON, one file per image"""
    model_config = ConfigDict(extra="forbid")

    image: str = Field(..., min_length=1)
    width: int = Field(..., ge=1)
    height: int = Field(..., ge=1)
    gsd_m: float = Field(..., gt=0)
    altitude_m: Optional[float] = Field(None, gt=0)
    tag: Optional[str] = None
    polygons: List[PolygonAnnotation] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_unique_ids(self):
        seen = set()
        for polygon in self.polygons:
            if polygon.id in seen:
                raise ValueError(f"Duplicate polygon id {polygon.id}")
            seen.add(polygon.id)
        return self

from pydantic import BaseModel, ConfigDict, Field
from typing import List, Literal, Optional


class PostprocessParams(BaseModel):
    """Parameters of the threshold / group / filter / dilate / regroup pipeline"""
    model_config = ConfigDict(frozen=True)

    tau_seed: float = Field(0.5, ge=0.0, le=1.0, description="Pixel confidence threshold")
    connectivity: Literal[4, 8] = Field(8, description="Pixel adjacency used for grouping")
    min_area_m2: float = Field(0.02, ge=0.0, description="Smallest object kept, in square meters")
    dilation_radius_px: int = Field(2, ge=0, description="Half-side of the square dilation element")


class ScoringParams(BaseModel):
    """Parameters of object-wise matching"""
    model_config = ConfigDict(frozen=True)

    iou_min: float = Field(0.2, gt=0.0, le=1.0, description="Smallest IoU accepted as a match")


class DetectionRecord(BaseModel):
    """One detected object in the detection JSON file"""
    id: int
    confidence: float = Field(..., ge=0.0, le=1.0)
    area_px: int = Field(..., ge=1)
    pixels_rle: List[List[int]] = Field(..., description="Row-major [start_index, run_length] runs")


class DetectionFile(BaseModel):
    """Per-image detection JSON"""
    image: str
    width: Optional[int] = Field(None, ge=1)
    height: Optional[int] = Field(None, ge=1)
    objects: List[DetectionRecord] = Field(default_factory=list)


class EvaluationSummary(BaseModel):
    """Dataset-level metrics written to summary.json"""
    ap: float
    f1_max: float
    r_max: float
    iou_min: float
    n_truth: int
    n_pred: int

"""Pydantic Schemas for Parameters and File Formats"""
from app.schemas.grid import GeoMeta
from app.schemas.detection import (
    PostprocessParams,
    ScoringParams,
    DetectionRecord,
    DetectionFile,
    EvaluationSummary,
)
from app.schemas.annotation import PolygonAnnotation, AnnotationFile
from app.schemas.cost import (
    CostAssumptions,
    MissionSpec,
    CostBreakdown,
    Platform,
    PlatformComparisonRow,
    PlatformComparison,
)
from app.schemas.manifest import RunManifest

__all__ = [
    "GeoMeta",
    "PostprocessParams",
    "ScoringParams",
    "DetectionRecord",
    "DetectionFile",
    "EvaluationSummary",
    "PolygonAnnotation",
    "AnnotationFile",
    "CostAssumptions",
    "MissionSpec",
    "CostBreakdown",
    "Platform",
    "PlatformComparisonRow",
    "PlatformComparison",
    "RunManifest",
]

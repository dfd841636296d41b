"""Object-wise scoring: IoU matching, PR sweep, AP / F1max / Rmax, confusion render"""
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union
import csv
import enum
import logging

import numpy as np

from app.schemas.detection import EvaluationSummary, ScoringParams
from app.schemas.grid import GeoMeta
from app.services.exceptions import ArgumentError, EmptyGroundTruthError, IoError
from app.services.grid import RgbRaster
from app.services.objects import DetectedObject, GroundTruthObject

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class Outcome(str, enum.Enum):
    """Object outcome in the confusion render"""
    TP = "TP"
    FP = "FP"
    FN = "FN"


OUTCOME_COLORS = {
    Outcome.TP: (0, 255, 0),
    Outcome.FP: (255, 0, 0),
    Outcome.FN: (255, 165, 0),
}


class Match(NamedTuple):
    pred_id: int
    truth_id: int
    iou: float


class CurvePoint(NamedTuple):
    tau: float
    precision: float
    recall: float


class PredictionOutcome(NamedTuple):
    confidence: float
    is_tp: bool


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    fn_: int
    matches: Tuple[Match, ...]


@dataclass(frozen=True)
class PRCurve:
    points: Tuple[CurvePoint, ...]
    r_max: float
    ap: float
    f1_max: float
    n_truth: int
    n_pred: int

    @classmethod
    def from_points(cls, points: Sequence[CurvePoint], n_truth: int, n_pred: int) -> "PRCurve":
        points = tuple(points)
        return cls(
            points=points,
            r_max=points[-1].recall if points else 0.0,
            ap=average_precision(points),
            f1_max=f1_max(points),
            n_truth=n_truth,
            n_pred=n_pred,
        )


def iou(a, b) -> float:
    """Intersection over union of two pixel sets.

    Accepts sets of (x, y) tuples or arrays of flat pixel indices.
    """
    a_is_set, b_is_set = isinstance(a, (set, frozenset)), isinstance(b, (set, frozenset))
    if a_is_set != b_is_set:
        raise ArgumentError("IoU needs two coordinate sets or two index arrays, not one of each")
    if a_is_set:
        a, b = set(a), set(b)
        if not a or not b:
            raise ArgumentError("IoU of an empty pixel set is undefined")
        inter = len(a & b)
        return inter / (len(a) + len(b) - inter)

    a = np.unique(np.asarray(a, dtype=np.int64))
    b = np.unique(np.asarray(b, dtype=np.int64))
    if a.size == 0 or b.size == 0:
        raise ArgumentError("IoU of an empty pixel set is undefined")
    inter = np.intersect1d(a, b, assume_unique=True).size
    return inter / (a.size + b.size - inter)


def _ranked(preds: Iterable[DetectedObject]) -> List[DetectedObject]:
    """Descending confidence, ties broken by ascending id"""
    return sorted(preds, key=lambda p: (-p.confidence, p.id))


def greedy_assign(
    preds: Sequence[DetectedObject],
    truths: Sequence[GroundTruthObject],
    params: ScoringParams,
) -> List[Tuple[DetectedObject, Optional[Match]]]:
    """Match every prediction in rank order to the unmatched truth of highest IoU.

    Matching a confidence prefix yields the prefix of this full run, so one run
    serves every threshold of a PR sweep.
    """
    ordered_truths = sorted(truths, key=lambda t: t.id)
    matched = set()
    assignment = []
    for pred in _ranked(preds):
        best_iou, best_truth = -1.0, None
        for truth in ordered_truths:
            if truth.id in matched:
                continue
            value = iou(pred.indices, truth.indices)
            if value > best_iou:
                best_iou, best_truth = value, truth
        if best_truth is not None and best_iou >= params.iou_min:
            matched.add(best_truth.id)
            assignment.append((pred, Match(pred.id, best_truth.id, best_iou)))
        else:
            assignment.append((pred, None))
    return assignment


def match(
    preds: Sequence[DetectedObject],
    truths: Sequence[GroundTruthObject],
    params: ScoringParams = ScoringParams(),
    tau: float = 0.0,
) -> Confusion:
    """Confusion counts for the predictions with confidence >= tau"""
    kept = [p for p in preds if p.confidence >= tau]
    matches = tuple(m for _, m in greedy_assign(kept, truths, params) if m is not None)
    return Confusion(
        tp=len(matches),
        fp=len(kept) - len(matches),
        fn_=len(truths) - len(matches),
        matches=matches,
    )


def prediction_outcomes(
    preds: Sequence[DetectedObject],
    truths: Sequence[GroundTruthObject],
    params: ScoringParams = ScoringParams(),
) -> List[PredictionOutcome]:
    return [
        PredictionOutcome(pred.confidence, m is not None)
        for pred, m in greedy_assign(preds, truths, params)
    ]


def curve_from_outcomes(outcomes: Iterable[PredictionOutcome], n_truth: int) -> PRCurve:
    """Sweep tau over the distinct confidences, pooling any number of images"""
    if n_truth <= 0:
        raise EmptyGroundTruthError("Recall is undefined without ground-truth objects")

    outcomes = list(outcomes)
    if not outcomes:
        return PRCurve.from_points([], n_truth=n_truth, n_pred=0)

    conf = np.array([o.confidence for o in outcomes], dtype=np.float64)
    is_tp = np.array([o.is_tp for o in outcomes], dtype=bool)
    # Sorting on (conf, is_tp) makes the pooled order independent of input order
    order = np.lexsort((is_tp, -conf))
    conf, is_tp = conf[order], is_tp[order]

    tp = np.cumsum(is_tp)
    fp = np.cumsum(~is_tp)
    # Last index of each run of equal confidence
    last = np.flatnonzero(np.append(conf[1:] != conf[:-1], True))

    points = []
    for i in last:
        kept = tp[i] + fp[i]
        precision = tp[i] / kept if kept else 1.0
        points.append(CurvePoint(float(conf[i]), float(precision), float(tp[i] / n_truth)))
    return PRCurve.from_points(points, n_truth=n_truth, n_pred=len(outcomes))


def pr_curve(
    preds: Sequence[DetectedObject],
    truths: Sequence[GroundTruthObject],
    params: ScoringParams = ScoringParams(),
) -> PRCurve:
    if not truths:
        raise EmptyGroundTruthError("Recall is undefined without ground-truth objects")
    return curve_from_outcomes(prediction_outcomes(preds, truths, params), len(truths))


def pooled_pr_curve(per_image: Iterable[Tuple[Sequence[PredictionOutcome], int]]) -> PRCurve:
    """Dataset-level curve from (outcomes, truth count) pairs of many images"""
    outcomes: List[PredictionOutcome] = []
    n_truth = 0
    for image_outcomes, image_truths in per_image:
        outcomes.extend(image_outcomes)
        n_truth += image_truths
    return curve_from_outcomes(outcomes, n_truth)


def _points(curve) -> Sequence[CurvePoint]:
    return curve.points if isinstance(curve, PRCurve) else curve


def f1_max(curve) -> float:
    best = 0.0
    for p in _points(curve):
        denom = p.precision + p.recall
        if denom > 0:
            best = max(best, 2.0 * p.precision * p.recall / denom)
    return best


def average_precision(curve) -> float:
    """Step integral of precision over recall, up to the largest recall reached"""
    area, previous_recall = 0.0, 0.0
    for p in _points(curve):
        area += p.precision * (p.recall - previous_recall)
        previous_recall = p.recall
    return area


def operating_point(
    curve: PRCurve,
    min_recall: Optional[float] = None,
    min_precision: Optional[float] = None,
) -> Optional[CurvePoint]:
    """Pick a threshold on the curve.

    With ``min_recall``: the most precise point reaching it. With
    ``min_precision``: the highest-recall point reaching it. With neither: the
    F1-maximizing point. Returns None when no point qualifies.
    """
    if min_recall is not None and min_precision is not None:
        raise ArgumentError("Give at most one of min_recall and min_precision")
    points = list(curve.points)
    if min_recall is not None:
        eligible = [p for p in points if p.recall >= min_recall]
        return max(eligible, key=lambda p: p.precision, default=None)
    if min_precision is not None:
        eligible = [p for p in points if p.precision >= min_precision]
        return max(eligible, key=lambda p: p.recall, default=None)

    def f1(p: CurvePoint) -> float:
        s = p.precision + p.recall
        return 2.0 * p.precision * p.recall / s if s else 0.0

    return max(points, key=f1, default=None)


def render_confusion(
    preds: Sequence[DetectedObject],
    truths: Sequence[GroundTruthObject],
    params: ScoringParams,
    tau: float,
    meta: GeoMeta,
) -> RgbRaster:
    """Colour TP detections green, FP red and missed truths orange on black.

    Where objects overlap, TP wins over FN, which wins over FP.
    """
    for obj in list(preds) + list(truths):
        if obj.width != meta.width or obj.indices[-1] >= meta.size:
            raise ArgumentError(f"Object {obj.id} does not fit a {meta.width}x{meta.height} image")

    confusion = match(preds, truths, params, tau)
    tp_preds = {m.pred_id for m in confusion.matches}
    tp_truths = {m.truth_id for m in confusion.matches}
    kept = [p for p in preds if p.confidence >= tau]

    layers = {
        Outcome.FP: [p for p in kept if p.id not in tp_preds],
        Outcome.FN: [t for t in truths if t.id not in tp_truths],
        Outcome.TP: [p for p in kept if p.id in tp_preds],
    }
    flat = np.zeros((meta.size, 3), dtype=np.uint8)
    # Painted lowest precedence first
    for outcome in (Outcome.FP, Outcome.FN, Outcome.TP):
        for obj in layers[outcome]:
            flat[obj.indices] = OUTCOME_COLORS[outcome]

    logger.info(
        f"Confusion at tau={tau}: {confusion.tp} TP, {confusion.fp} FP, {confusion.fn_} FN"
    )
    return RgbRaster(meta=meta, pixels=flat.reshape(meta.height, meta.width, 3))


def summarize(curve: PRCurve, params: ScoringParams, decimals: int = 6) -> EvaluationSummary:
    return EvaluationSummary(
        ap=round(curve.ap, decimals),
        f1_max=round(curve.f1_max, decimals),
        r_max=round(curve.r_max, decimals),
        iou_min=params.iou_min,
        n_truth=curve.n_truth,
        n_pred=curve.n_pred,
    )


def write_curve_csv(curve: PRCurve, path: PathLike, decimals: int = 6) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["tau", "precision", "recall"])
            for p in curve.points:
                writer.writerow([f"{p.tau:.{decimals}f}", f"{p.precision:.{decimals}f}", f"{p.recall:.{decimals}f}"])
    except OSError as e:
        raise IoError(f"Cannot write {path}: {e}") from e

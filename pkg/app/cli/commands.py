"""Subcommand handlers; each returns a process exit code"""
from argparse import Namespace
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple
import csv
import logging
import re

from joblib import Parallel, delayed
from pydantic import ValidationError

from app.config import settings
from app.schemas.cost import CostAssumptions, MissionSpec
from app.schemas.detection import PostprocessParams, ScoringParams
from app.schemas.grid import GeoMeta
from app.services import annotate, costmodel, detect, grid, manifest, resample, score
from app.services.exceptions import (
    ArgumentError,
    EmptyGroundTruthError,
    IoError,
    describe_validation_error,
)
from app.services.objects import DetectedObject

logger = logging.getLogger(__name__)

CONFIDENCE_SUFFIXES = (".fgrid", ".pgm")


class PairingError(ArgumentError):
    """Raised when annotation files have no matching confidence grid"""
    pass


@dataclass(frozen=True)
class ImageResult:
    image_id: str
    meta: GeoMeta
    objects: List[DetectedObject]
    outcomes: List[score.PredictionOutcome]
    n_truth: int
    warnings: List[str]


def _out_dir(args: Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _postprocess_params(args: Namespace) -> PostprocessParams:
    try:
        return PostprocessParams(
            tau_seed=args.tau_seed,
            connectivity=args.connectivity,
            min_area_m2=args.min_area_m2,
            dilation_radius_px=args.dilate_px,
        )
    except ValidationError as e:
        raise ArgumentError(describe_validation_error(e)) from e


def _scoring_params(args: Namespace) -> ScoringParams:
    try:
        return ScoringParams(iou_min=args.iou)
    except ValidationError as e:
        raise ArgumentError(describe_validation_error(e)) from e


def _record(args: Namespace, out_dir: Path, inputs: List[str], extra: Optional[dict] = None) -> None:
    params = {
        k: v for k, v in vars(args).items()
        if k not in ("argv", "verbose", "quiet", "jobs") and not callable(v)
    }
    params.update(extra or {})
    run = manifest.build_manifest(args.command, getattr(args, "argv", []), inputs, params)
    manifest.write_manifest(run, out_dir)


# ---------------------------------------------------------------- eval

def find_pairs(pred_dir: Path, truth_dir: Path, pairs_csv: Optional[str] = None) -> List[Tuple[str, Path, Path]]:
    """(stem, truth, pred) for every annotation file, sorted by stem"""
    if pairs_csv:
        pairs = []
        try:
            with open(pairs_csv, newline="", encoding="utf-8") as handle:
                rows = list(csv.DictReader(handle))
        except OSError as e:
            raise IoError(f"Cannot read {pairs_csv}: {e}") from e
        for row in rows:
            if not row.get("truth") or not row.get("pred"):
                raise ArgumentError(f"{pairs_csv}: expected 'truth' and 'pred' columns")
            truth, pred = truth_dir / row["truth"], pred_dir / row["pred"]
            pairs.append((truth.stem, truth, pred))
        missing = [stem for stem, truth, pred in pairs if not truth.is_file() or not pred.is_file()]
    else:
        preds = {p.stem: p for p in pred_dir.iterdir() if p.suffix.lower() in CONFIDENCE_SUFFIXES}
        truths = {p.stem: p for p in truth_dir.glob("*.json")}
        pairs = [(stem, truths[stem], preds[stem]) for stem in truths if stem in preds]
        missing = sorted(set(truths) - set(preds))
        unused = sorted(set(preds) - set(truths))
        if unused:
            logger.warning(f"Confidence grids without annotations ignored: {', '.join(unused)}")
    if missing:
        raise PairingError(f"No confidence grid for: {', '.join(sorted(missing))}")
    return sorted(pairs, key=lambda item: item[0])


def evaluate_image(truth_path: Path, pred_path: Path, post: PostprocessParams, scoring: ScoringParams) -> ImageResult:
    """Postprocess one confidence map and match it against its annotations"""
    annotations = annotate.parse_annotations(truth_path)
    confidence = grid.load_confidence_grid(pred_path, gsd_m=annotations.meta.gsd_m)
    if confidence.meta.shape != annotations.meta.shape:
        raise ArgumentError(
            f"{pred_path.name} is {confidence.meta.width}x{confidence.meta.height} but "
            f"{truth_path.name} is {annotations.meta.width}x{annotations.meta.height}"
        )
    truths, warnings = annotate.truth_objects(annotations)
    objects = detect.postprocess(confidence, post)
    return ImageResult(
        image_id=annotations.image_id,
        meta=annotations.meta,
        objects=objects,
        outcomes=score.prediction_outcomes(objects, truths, scoring),
        n_truth=len(truths),
        warnings=warnings,
    )


def _group_key(meta: GeoMeta, group_by: str) -> str:
    if group_by == "tag":
        return meta.tag or "untagged"
    altitude = meta.altitude_m or grid.gsd_to_altitude(meta.gsd_m).value
    return grid.altitude_bin(altitude)


def _file_stem(key: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", key)


def _check_unique_ids(results: List[ImageResult]) -> None:
    stems = defaultdict(list)
    for r in results:
        stems[_file_stem(r.image_id)].append(r.image_id)
    clashes = sorted(ids[0] for ids in stems.values() if len(ids) > 1)
    if clashes:
        raise ArgumentError(f"Duplicate image ids: {', '.join(clashes)}")


def _write_curve(out: Path, suffix: str, curve: score.PRCurve, scoring: ScoringParams) -> None:
    score.write_curve_csv(curve, out / f"pr_curve{suffix}.csv", settings.OUTPUT_DECIMALS)
    manifest.write_json(out / f"summary{suffix}.json", score.summarize(curve, scoring).model_dump())


def cmd_eval(args: Namespace) -> int:
    post, scoring = _postprocess_params(args), _scoring_params(args)
    pairs = find_pairs(Path(args.pred_dir), Path(args.truth_dir), args.pairs)
    out = _out_dir(args)
    n_jobs = args.jobs if args.jobs else -1
    logger.info(f"Evaluating {len(pairs)} images with n_jobs={n_jobs}")

    results = Parallel(n_jobs=n_jobs)(
        delayed(evaluate_image)(truth, pred, post, scoring) for _, truth, pred in pairs
    )
    results = sorted(results, key=lambda r: r.image_id)
    _check_unique_ids(results)
    dropped = [message for r in results for message in r.warnings]
    for message in dropped:
        logger.warning(message)

    n_truth = sum(r.n_truth for r in results)
    if n_truth == 0:
        raise EmptyGroundTruthError("No ground-truth objects in any image")

    curve = score.pooled_pr_curve((r.outcomes, r.n_truth) for r in results)
    _write_curve(out, "", curve, scoring)

    objects_dir = out / "objects"
    objects_dir.mkdir(exist_ok=True)
    for r in results:
        detect.save_detections(objects_dir / f"{_file_stem(r.image_id)}.json", r.image_id, r.objects, r.meta)

    if args.group_by != "none":
        groups: Dict[str, List[ImageResult]] = defaultdict(list)
        for r in results:
            groups[_group_key(r.meta, args.group_by)].append(r)
        for key in sorted(groups):
            members = groups[key]
            if sum(r.n_truth for r in members) == 0:
                logger.warning(f"Group {key!r} has no ground truth; no curve written")
                continue
            group_curve = score.pooled_pr_curve((r.outcomes, r.n_truth) for r in members)
            _write_curve(out, f"_{_file_stem(key)}", group_curve, scoring)
            logger.info(f"Group {key}: AP={group_curve.ap:.4f} over {len(members)} images")

    best = score.operating_point(curve)
    logger.info(
        f"AP={curve.ap:.4f} F1max={curve.f1_max:.4f} Rmax={curve.r_max:.4f}"
        + (f" (best tau {best.tau:.3f})" if best else "")
    )
    _record(
        args,
        out,
        [str(p) for _, t, pr in pairs for p in (t, pr)],
        {"dropped_polygons": len(dropped)},
    )
    return 0


# ---------------------------------------------------------------- gsd-sim

def _load_raster(path: str, gsd_m: Optional[float]):
    kind = grid.sniff_format(path)
    if kind == "ppm":
        return kind, grid.load_rgb(path, gsd_m)
    return kind, grid.load_confidence_grid(path, gsd_m)


def cmd_gsd_sim(args: Namespace) -> int:
    kind, raster = _load_raster(args.input, args.gsd)
    degraded = resample.simulate_gsd(raster, args.target_gsd)

    output = Path(args.output)
    output.parent.mkdir(parents=True, exist_ok=True)
    suffix = output.suffix.lower()
    if isinstance(degraded, grid.RgbRaster):
        grid.save_rgb(degraded, output)
    elif suffix == ".pgm" or (suffix != ".fgrid" and kind == "pgm"):
        grid.save_confidence_pgm(degraded, output)
    else:
        grid.save_confidence_grid(degraded, output)

    factor = resample.degradation_factor(raster.meta.gsd_m, args.target_gsd)
    logger.info(f"Wrote {output} (effective GSD {args.target_gsd} m, factor {factor:.3f})")
    _record(args, output.parent, [args.input], {"factor": factor})
    return 0


# ---------------------------------------------------------------- cost

def _assumptions(args: Namespace) -> Tuple[CostAssumptions, str]:
    assumptions, source = costmodel.load_assumptions(args.assumptions)
    updates = {}
    if args.literal_human_formula:
        updates["literal_human_formula"] = True
    if args.coverage is not None:
        updates["coverage_per_flight_hour_km2_at_ref"] = args.coverage
    if updates:
        try:
            assumptions = CostAssumptions.model_validate({**assumptions.model_dump(), **updates})
        except ValidationError as e:
            raise ArgumentError(describe_validation_error(e)) from e
    if args.local_pilots:
        assumptions = costmodel.local_pilot_assumptions(assumptions)
    return assumptions, source


def _mission(area: float, gsd: float) -> MissionSpec:
    try:
        return MissionSpec(area_km2=area, gsd_m=gsd)
    except ValidationError as e:
        raise ArgumentError(describe_validation_error(e)) from e


def _write_area_curve(path: Path, gsd: float, areas: List[float], a: CostAssumptions) -> None:
    rows = []
    for area in areas:
        breakdown = costmodel.estimate(_mission(area, gsd), a)
        rows.append((float(area), breakdown.total, breakdown.unit_cost))
    manifest.write_csv(path, ["area_km2", "total_usd", "unit_cost_usd_per_km2"], rows)


def _write_comparison(out: Path, mission: MissionSpec, a: CostAssumptions, platforms_path: str) -> None:
    comparison = costmodel.compare_platforms(mission, a, costmodel.load_platforms(platforms_path))
    rows = [
        (
            row.name,
            row.gsd_m,
            row.unit_cost_usd_km2,
            row.uav_unit_cost_usd_km2,
            "never" if row.break_even_area_km2 is None else row.break_even_area_km2,
        )
        for row in comparison.rows
    ]
    manifest.write_csv(
        out / "comparison.csv",
        ["name", "gsd_m", "unit_cost_usd_km2", "uav_unit_cost_usd_km2", "break_even_area_km2"],
        rows,
    )
    manifest.write_json(out / "comparison.json", comparison.model_dump(mode="json"))


def cmd_cost(args: Namespace) -> int:
    a, source = _assumptions(args)
    mission = _mission(args.area, args.gsd)
    out = _out_dir(args)

    breakdown = costmodel.estimate(mission, a)
    manifest.write_json(out / "breakdown.json", breakdown.model_dump())
    logger.info(
        f"{mission.area_km2} km² at {mission.gsd_m} m: ${breakdown.total:,.0f} "
        f"(${breakdown.unit_cost:,.2f}/km², {breakdown.n_pilots} pilots)"
    )

    inputs = [] if source == "defaults" else [source]
    if args.platforms:
        _write_comparison(out, mission, a, args.platforms)
        inputs.append(args.platforms)
    if args.curve:
        _write_area_curve(out / "cost_curve.csv", args.gsd, args.curve, a)
    _record(args, out, inputs, {"assumptions_source": source})
    return 0


def cmd_cost_curve(args: Namespace) -> int:
    a, source = _assumptions(args)
    out = _out_dir(args)
    _write_area_curve(out / "cost_curve.csv", args.gsd, args.areas, a)

    if args.hotel_share:
        manifest.write_csv(
            out / "hotel_share.csv",
            ["area_km2", "hotel_share"],
            [(float(area), share) for area, share in costmodel.hotel_share_curve(args.gsd, args.areas, a)],
        )
    if args.resolutions:
        if args.area is None:
            raise ArgumentError("--resolutions needs --area")
        manifest.write_csv(
            out / "resolution_cost.csv",
            ["gsd_m", "unit_cost_usd_per_km2"],
            [(float(g), c) for g, c in costmodel.resolution_cost_curve(args.area, args.resolutions, a)],
        )
    _record(args, out, [] if source == "defaults" else [source], {"assumptions_source": source})
    return 0


def cmd_compare(args: Namespace) -> int:
    a, source = _assumptions(args)
    out = _out_dir(args)
    _write_comparison(out, _mission(args.area, args.gsd), a, args.platforms)
    inputs = [args.platforms] + ([] if source == "defaults" else [source])
    _record(args, out, inputs, {"assumptions_source": source})
    return 0


# ---------------------------------------------------------------- render / rasterize

def cmd_render(args: Namespace) -> int:
    annotations = annotate.parse_annotations(args.truth_file)
    meta = annotations.meta
    truths, warnings = annotate.truth_objects(annotations)
    for message in warnings:
        logger.warning(message)
    if Path(args.pred_file).suffix.lower() == ".json":
        _, preds = detect.load_detections(args.pred_file, meta)
    else:
        confidence = grid.load_confidence_grid(args.pred_file, gsd_m=meta.gsd_m)
        preds = detect.postprocess(confidence, _postprocess_params(args))

    image = score.render_confusion(preds, truths, _scoring_params(args), args.tau, meta)
    output = Path(args.output)
    output.parent.mkdir(parents=True, exist_ok=True)
    grid.save_rgb(image, output)
    _record(args, output.parent, [args.pred_file, args.truth_file])
    return 0


def cmd_rasterize(args: Namespace) -> int:
    annotations = annotate.parse_annotations(args.truth_file)
    mask = annotate.rasterize_set(annotations)
    output = Path(args.output)
    output.parent.mkdir(parents=True, exist_ok=True)
    grid.save_mask(mask, output)
    logger.info(f"{len(annotations.polygons)} polygons -> {mask.count} foreground pixels in {output}")
    _record(args, output.parent, [args.truth_file])
    return 0


COMMANDS = {
    "eval": cmd_eval,
    "gsd-sim": cmd_gsd_sim,
    "cost": cmd_cost,
    "cost-curve": cmd_cost_curve,
    "compare": cmd_compare,
    "render": cmd_render,
    "rasterize": cmd_rasterize,
}

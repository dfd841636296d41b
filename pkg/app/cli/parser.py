import argparse
from typing import List

from app.config import settings
from app.schemas.cost import CostAssumptions


def parse_float_list(text: str) -> List[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("expected at least one number")
    return values


def _global_flags() -> argparse.ArgumentParser:
    """Flags accepted by every subcommand"""
    defaults = CostAssumptions()
    flags = argparse.ArgumentParser(add_help=False)
    group = flags.add_argument_group("pipeline and output")
    group.add_argument("--iou", type=float, default=0.2, help="Minimum IoU for a true positive")
    group.add_argument("--tau-seed", type=float, default=0.5, help="Pixel confidence threshold")
    group.add_argument("--min-area-m2", type=float, default=0.02, help="Smallest object kept (m²)")
    group.add_argument("--dilate-px", type=int, default=2, help="Dilation radius in pixels")
    group.add_argument("--connectivity", type=int, choices=(4, 8), default=8)
    group.add_argument(
        "--jobs", type=int, default=settings.DEFAULT_JOBS, help="Worker processes (default: all cores)"
    )
    group.add_argument("--out", default=".", help="Output directory")
    group.add_argument("-v", "--verbose", action="store_true")
    group.add_argument("-q", "--quiet", action="store_true")
    cost = flags.add_argument_group("cost model")
    cost.add_argument("--assumptions", help="Cost assumptions JSON (default: $SHS_ASSUMPTIONS or built-in)")
    cost.add_argument(
        "--literal-human-formula",
        action="store_true",
        help="Also multiply human cost by the pilot count",
    )
    cost.add_argument("--local-pilots", action="store_true", help="No airfare or hotel")
    cost.add_argument(
        "--coverage",
        type=float,
        default=None,
        help=f"km² per flight hour at the reference GSD (default {defaults.coverage_per_flight_hour_km2_at_ref})",
    )
    return flags


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shs",
        description=f"{settings.APP_NAME}: small solar panel detection scoring and UAV survey costing",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.APP_VERSION}")
    common = _global_flags()
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", parents=[common], help="Score confidence maps against annotations")
    p.add_argument("pred_dir", help="Directory of confidence grids (.fgrid or .pgm)")
    p.add_argument("truth_dir", help="Directory of annotation JSON files")
    p.add_argument("--pairs", help="CSV with truth,pred columns overriding stem pairing")
    p.add_argument("--group-by", choices=("none", "tag", "altitude"), default="none")

    p = sub.add_parser("gsd-sim", parents=[common], help="Simulate a coarser sensor resolution")
    p.add_argument("input", help="FGRID, PGM or PPM raster")
    p.add_argument("--target-gsd", type=float, required=True, help="Target GSD in meters/pixel")
    p.add_argument("--output", required=True, help="Output path (.fgrid, .pgm or .ppm)")
    p.add_argument("--gsd", type=float, default=None, help="Source GSD for PGM/PPM input")

    p = sub.add_parser("cost", parents=[common], help="Estimate a UAV survey mission cost")
    p.add_argument("--area", type=float, required=True, help="Mission area in km²")
    p.add_argument("--gsd", type=float, required=True, help="Imagery GSD in meters/pixel")
    p.add_argument("--platforms", help="Platform list JSON for a comparison table")
    p.add_argument("--curve", type=parse_float_list, help="Comma-separated areas for a unit-cost curve")

    p = sub.add_parser("cost-curve", parents=[common], help="Unit cost against area or resolution")
    p.add_argument("--gsd", type=float, required=True)
    p.add_argument("--areas", type=parse_float_list, required=True, help="Comma-separated areas in km²")
    p.add_argument("--hotel-share", action="store_true", help="Also write hotel share per area")
    p.add_argument("--resolutions", type=parse_float_list, help="Comma-separated GSDs for a cost-vs-resolution curve")
    p.add_argument("--area", type=float, default=None, help="Fixed area for --resolutions")

    p = sub.add_parser("compare", parents=[common], help="Compare UAV cost with other platforms")
    p.add_argument("--area", type=float, required=True)
    p.add_argument("--gsd", type=float, required=True)
    p.add_argument("--platforms", required=True, help="Platform list JSON")

    p = sub.add_parser("render", parents=[common], help="Colour-coded TP/FP/FN image")
    p.add_argument("pred_file", help="Detection JSON or a confidence grid")
    p.add_argument("truth_file", help="Annotation JSON")
    p.add_argument("--tau", type=float, default=0.5, help="Object confidence threshold")
    p.add_argument("--output", required=True, help="Output PPM path")

    p = sub.add_parser("rasterize", parents=[common], help="Annotation polygons to a PGM mask")
    p.add_argument("truth_file")
    p.add_argument("--output", required=True, help="Output PGM path")

    p = sub.add_parser("replay", parents=[common], help="Re-run the command recorded in a manifest")
    p.add_argument("manifest")

    return parser

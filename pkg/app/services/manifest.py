"""Deterministic output writers and the run manifest"""
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union
import csv
import json
import logging

from pydantic import ValidationError

from app.config import settings
from app.schemas.manifest import RunManifest
from app.services.exceptions import FormatError, IoError, describe_validation_error

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

MANIFEST_NAME = "manifest.json"


def rounded(value: Any, decimals: int = settings.OUTPUT_DECIMALS) -> Any:
    """Round every float in a JSON-like structure"""
    if isinstance(value, float):
        return round(value, decimals)
    if isinstance(value, dict):
        return {k: rounded(v, decimals) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [rounded(v, decimals) for v in value]
    return value


def write_json(path: PathLike, doc: Any) -> None:
    """Sorted keys, fixed indent and rounded floats so reruns are byte-identical"""
    text = json.dumps(rounded(doc), indent=2, sort_keys=True) + "\n"
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as e:
        raise IoError(f"Cannot write {path}: {e}") from e


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]], decimals: int = settings.OUTPUT_DECIMALS) -> None:
    def cell(v: Any) -> str:
        return f"{v:.{decimals}f}" if isinstance(v, float) else ("" if v is None else str(v))

    try:
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([cell(v) for v in row])
    except OSError as e:
        raise IoError(f"Cannot write {path}: {e}") from e


def flatten(params: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    """Flatten nested parameter maps to dotted keys"""
    flat: Dict[str, Any] = {}
    for key, value in params.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(flatten(value, f"{name}."))
        elif isinstance(value, Path):
            flat[name] = str(value)
        else:
            flat[name] = value
    return flat


def build_manifest(command: str, argv: List[str], inputs: Iterable[PathLike], params: Dict[str, Any]) -> RunManifest:
    return RunManifest(
        command=command,
        argv=list(argv),
        inputs=sorted(str(p) for p in inputs),
        params=flatten(params),
        version=settings.APP_VERSION,
        timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )


def write_manifest(manifest: RunManifest, out_dir: PathLike) -> Path:
    path = Path(out_dir) / MANIFEST_NAME
    write_json(path, manifest.model_dump(mode="json"))
    logger.info(f"Manifest written to {path}")
    return path


def load_manifest(path: PathLike) -> RunManifest:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise IoError(f"Cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: malformed JSON ({e})") from e
    try:
        return RunManifest.model_validate(raw)
    except ValidationError as e:
        raise FormatError(f"{path}: {describe_validation_error(e)}") from e

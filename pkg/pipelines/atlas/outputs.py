"""
Result files for CLI runs.

CSV and text files start with `# config=` and `# sampler=` comment lines;
JUnit files carry them as testsuite properties; JSON files
carry the same data under "config" and "sampler". Nothing time-dependent is
written, so the same config always yields byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
import xml.etree.ElementTree as ET
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

from atlas.constellation import Constellation, load, parse_builtin
from atlas.errors import UsageError, ValidationError
from atlas.sampling import sampler_metadata
from pipelines.atlas.state import RunConfig
from utils.logger import get_logger

logger = get_logger(__name__)

CONFIG_PREFIX = "# config="
SAMPLER_PREFIX = "# sampler="


def _clean(value: Any) -> Any:
    """JSON-safe copy: non-finite floats become strings, tuples become lists."""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if hasattr(value, "item") and callable(value.item):
        return _clean(value.item())
    return value


def _dumps(obj: Any, indent: Any = None) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=indent, ensure_ascii=False)


def run_dir(config: RunConfig) -> Path:
    path = Path(config.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)


def embedded_metadata(config: RunConfig) -> Dict[str, str]:
    """Serialized config and sampler metadata, as embedded in every result file."""
    return {"config": _dumps(config.to_dict()), "sampler": _dumps(sampler_metadata())}


def header_lines(config: RunConfig) -> List[str]:
    meta = embedded_metadata(config)
    return [CONFIG_PREFIX + meta["config"], SAMPLER_PREFIX + meta["sampler"]]


def write_csv(
    path: Path,
    columns: Sequence[str],
    rows: Iterable[Sequence[Any]],
    config: RunConfig,
) -> Path:
    buf = io.StringIO()
    for line in header_lines(config):
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_cell(v) for v in row])

    path.write_text(buf.getvalue(), encoding="utf-8")
    logger.info(f"[io] wrote {path}")
    return path


def write_json(path: Path, payload: Dict[str, Any], config: RunConfig) -> Path:
    doc = dict(payload)
    doc["config"] = config.to_dict()
    doc["sampler"] = sampler_metadata()
    path.write_text(_dumps(doc, indent=2) + "\n", encoding="utf-8")
    logger.info(f"[io] wrote {path}")
    return path


def write_text(path: Path, lines: List[str], config: RunConfig) -> Path:
    path.write_text("\n".join(header_lines(config) + list(lines)) + "\n", encoding="utf-8")
    logger.info(f"[io] wrote {path}")
    return path


def read_config(path: Path) -> RunConfig:
    """Recover the RunConfig embedded in a CSV, text, JSON or JUnit result file."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        if path.suffix == ".json":
            data = json.loads(text)["config"]
        elif path.suffix == ".xml":
            node = ET.fromstring(text).find("properties/property[@name='config']")
            data = json.loads(node.get("value"))
        else:
            line = next(l for l in text.splitlines() if l.startswith(CONFIG_PREFIX))
            data = json.loads(line[len(CONFIG_PREFIX):])
    except (AttributeError, KeyError, StopIteration, TypeError, ET.ParseError, json.JSONDecodeError) as e:
        raise ValidationError(f"{path}: no embedded config ({e})")
    return RunConfig.from_dict(data, out=str(path.parent))


def resolve_constellation(config: RunConfig) -> Constellation:
    if config.file:
        return load(config.file, auto_normalize=config.auto_normalize)
    if config.builtin:
        return parse_builtin(config.builtin)
    raise UsageError("a constellation is required: pass --builtin NAME or --file PATH")

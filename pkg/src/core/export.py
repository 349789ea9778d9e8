"""
CSV and JSON writers for tables and reports.
"""

import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np

SCHEMA_VERSION = 1


def _cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _plain(value: Any) -> Any:
    """Convert numpy containers and scalars to JSON-native values."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def _float17(value: float) -> str:
    text = format(value, ".17g")
    return text if any(c in text for c in ".en") else text + ".0"


class _Float17Encoder(json.JSONEncoder):
    """JSON encoder printing floats with 17 significant digits."""

    def iterencode(self, o, _one_shot=False):
        indent = " " * self.indent if isinstance(self.indent, int) else self.indent
        encode = (
            json.encoder.py_encode_basestring_ascii if self.ensure_ascii
            else json.encoder.py_encode_basestring
        )
        return json.encoder._make_iterencode(
            {} if self.check_circular else None,
            self.default,
            encode,
            indent,
            _float17,
            self.key_separator,
            self.item_separator,
            self.sort_keys,
            self.skipkeys,
            _one_shot,
        )(o, 0)


def format_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buffer.getvalue()


def format_json(report: dict) -> str:
    """Sorted keys, 17 significant digit floats, schema tag."""
    payload = {"schema": SCHEMA_VERSION, **_plain(report)}
    return json.dumps(payload, sort_keys=True, indent=2, cls=_Float17Encoder) + "\n"


def emit(text: str, path: Optional[Path] = None):
    """Write to path, or to stdout when no path is given."""
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(text)


def write_csv(header: Sequence[str], rows: Iterable[Sequence[Any]], path: Optional[Path] = None):
    emit(format_csv(header, rows), path)


def write_json(report: dict, path: Optional[Path] = None):
    emit(format_json(report), path)

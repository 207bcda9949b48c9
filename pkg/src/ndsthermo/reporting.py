"""Structured check results and deterministic file writers."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError


def jsonable(value):
    """Convert numpy scalars/arrays and tuples into plain JSON types."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        value = float(value)
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if hasattr(value, "to_dict"):
        return jsonable(value.to_dict())
    return value


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2) + "\n"


@dataclass
class Report:
    """Outcome of a theorem check or estimator run.

    ``failures`` lists human-readable descriptions; the check passes iff it is
    empty. ``value``/``tolerance`` carry the headline number when there is one.
    """

    name: str
    value: object = None
    tolerance: float | None = None
    failures: list = field(default_factory=list)
    details: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def fail(self, message: str) -> None:
        self.failures.append(message)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "value": self.value,
            "tolerance": self.tolerance,
            "failures": self.failures,
            "details": self.details,
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return dumps(self)


def fmt17(x: float) -> str:
    return format(float(x), ".17g")


def emit_plot_data(series, path, header: str = "") -> None:
    """Write (abscissa, ordinate) pairs as a two-column text file.

    Values use 17 significant digits so the output is byte-stable.
    """
    rows = list(series)
    if not rows:
        raise ParameterError("cannot emit an empty series")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# " + (header or "x y").replace("\n", " ") + "\n")
        for a, b in rows:
            fh.write(f"{fmt17(a)} {fmt17(b)}\n")


def rows_to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt17(v) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()

"""
Curve rows and their CSV / JSON writers.

A curve table is a list of CurvePoint rows. Missing values are written as
blank CSV cells and JSON nulls; floats use a fixed '.12g' format so output is
byte-stable for a fixed config and seed.
"""

import csv
import io
import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

COLUMNS = ("x_db", "analytic", "asymptotic", "mc_mean", "mc_ci_low", "mc_ci_high")
DISAGREE = "DISAGREE"
ACCEPTED = "ok"
MISS = "MISS"


@dataclass
class CurvePoint:
    x_db: float
    analytic: float
    asymptotic: Optional[float] = None
    mc_mean: Optional[float] = None
    mc_ci_low: Optional[float] = None
    mc_ci_high: Optional[float] = None
    meta: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.mc_mean is not None:
            if self.mc_ci_low is None or self.mc_ci_high is None:
                raise ValueError("Monte Carlo mean given without its interval")
            if not self.mc_ci_low <= self.mc_mean <= self.mc_ci_high:
                raise ValueError(f"interval [{self.mc_ci_low}, {self.mc_ci_high}] does not hold {self.mc_mean}")

    @property
    def disagrees(self) -> bool:
        return self.meta.get("flag") == DISAGREE

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {name: getattr(self, name) for name in COLUMNS}
        out["meta"] = dict(self.meta)
        return out

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CurvePoint":
        return cls(**{name: data.get(name) for name in COLUMNS}, meta=dict(data.get("meta") or {}))


def format_value(value: Optional[float]) -> str:
    if value is None:
        return ""
    if isinstance(value, float) and math.isnan(value):
        return "nan"
    return format(float(value), ".12g")


def to_csv(rows: List[CurvePoint]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow([format_value(getattr(row, name)) for name in COLUMNS])
    return buffer.getvalue()


def _json_number(value: Optional[float]) -> Optional[float]:
    if value is None:
        return None
    return float(format(float(value), ".12g"))


def to_json(rows: List[CurvePoint]) -> str:
    payload = []
    for row in rows:
        item = {name: _json_number(getattr(row, name)) for name in COLUMNS}
        item["meta"] = {str(k): str(v) for k, v in sorted(row.meta.items())}
        payload.append(item)
    return json.dumps(payload, indent=2)


def write_tables(tables: Dict[str, List[CurvePoint]], out_dir: str, fmt: str = "csv") -> List[str]:
    """Write one file per table into out_dir (created if absent); returns the paths written."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown output format {fmt!r}")
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name in sorted(tables):
        path = os.path.join(out_dir, f"{name}.{fmt}")
        text = to_csv(tables[name]) if fmt == "csv" else to_json(tables[name])
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        logging.info(f"[Export] wrote {len(tables[name])} rows to {path}")
        paths.append(path)
    return paths


def disagreement_count(tables: Dict[str, List[CurvePoint]]) -> int:
    return sum(row.disagrees for rows in tables.values() for row in rows)


def acceptance_rows(tables: Dict[str, List[CurvePoint]]) -> List[Dict[str, Any]]:
    """Rows carrying a published reference, with the verdict recorded by the recipe."""
    out = []
    for name in sorted(tables):
        for row in tables[name]:
            if "acceptance" in row.meta:
                out.append({
                    "table": name,
                    "x_db": row.x_db,
                    "value": row.analytic,
                    "reference": row.meta.get("reference", ""),
                    "tolerance": row.meta.get("tolerance", ""),
                    "status": row.meta["acceptance"],
                })
    return out


def _flatten(prefix: str, value: Any, out: Dict[str, Any]) -> None:
    if isinstance(value, dict):
        for key, item in value.items():
            _flatten(f"{prefix}.{key}", item, out)
    else:
        out[prefix] = value


def params_dump(link_one: Dict[str, Any], link_two: Dict[str, Any], fmt: str = "text") -> str:
    """
    Deterministic dump of both hop bundles: sorted `link_one.gg.alpha = ...`
    lines, or sorted-key JSON when fmt is "json".
    """
    if fmt == "json":
        return json.dumps({"link_one": link_one, "link_two": link_two}, indent=2, sort_keys=True) + "\n"
    flat: Dict[str, Any] = {}
    _flatten("link_one", link_one, flat)
    _flatten("link_two", link_two, flat)
    lines = []
    for key in sorted(flat):
        value = flat[key]
        text = format(float(value), ".12g") if isinstance(value, float) else str(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"

"""Result tables and their CSV/JSON serialization."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class ResultTable:
    columns: list
    rows: list  # list of tuples, aligned with columns
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for r in self.rows:
            if len(r) != len(self.columns):
                raise ValueError("ragged result table")

    @classmethod
    def from_dicts(cls, columns, records, metadata=None):
        return cls(list(columns), [tuple(rec[c] for c in columns) for rec in records], metadata or {})

    def column(self, name):
        k = self.columns.index(name)
        return [r[k] for r in self.rows]


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        if math.isnan(v):
            return "nan-flagged"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{float(v):.11e}"
    if v is None:
        return "nan-flagged"
    return str(v)


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        if math.isnan(v):
            return "nan-flagged"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return float(f"{float(v):.11e}")
    if v is None:
        return "nan-flagged"
    return v


def to_csv(table: ResultTable) -> str:
    lines = []
    for key in sorted(table.metadata):
        val = table.metadata[key]
        text = val if isinstance(val, str) else json.dumps(val, sort_keys=True, default=str)
        lines.append(f"# {key}: {text}")
    lines.append(",".join(table.columns))
    lines.extend(",".join(format_value(v) for v in row) for row in table.rows)
    return "\n".join(lines) + "\n"


def to_json(table: ResultTable) -> str:
    doc = dict(columns=table.columns,
               rows=[[_json_value(v) for v in row] for row in table.rows],
               metadata=table.metadata)
    return json.dumps(doc, indent=1, sort_keys=True, default=str) + "\n"


def write_table(table: ResultTable, path: str | None, fmt: str = "csv") -> str:
    text = to_json(table) if fmt == "json" else to_csv(table)
    if path in (None, "-"):
        import sys
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text

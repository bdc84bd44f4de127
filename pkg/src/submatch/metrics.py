"""Per-run metrics rows and their CSV form."""
from __future__ import annotations

import csv
import io
from typing import Any, Iterable, Mapping

CSV_FIELDS = (
    "query", "strategy", "opts", "T", "T_comp", "T_comm", "max_recv_integers", "peak_mem", "result_count",
)
FIELD_TYPES: dict[str, type] = {
    "query": str, "strategy": str, "opts": str, "T": float, "T_comp": float, "T_comm": float,
    "max_recv_integers": int, "peak_mem": int, "result_count": int,
}
# status column values for runs that did not finish
OT, OOM = "OT", "OOM"


def csv_text(rows: Iterable[Mapping[str, Any]], header: bool = True) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, extrasaction="ignore", lineterminator="\n")
    if header:
        writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def parse_csv(text: str) -> list[dict[str, Any]]:
    """Read rows back with their declared types; OT/OOM stay strings."""
    out = []
    for raw in csv.DictReader(io.StringIO(text)):
        row: dict[str, Any] = {}
        for name in CSV_FIELDS:
            value = raw[name]
            kind = FIELD_TYPES[name]
            row[name] = value if value in (OT, OOM) and kind is not str else kind(value)
        out.append(row)
    return out


def failed_row(query: str, strategy: str, opts: str, status: str) -> dict[str, Any]:
    row: dict[str, Any] = {"query": query, "strategy": strategy, "opts": opts}
    for name in CSV_FIELDS[3:]:
        row[name] = status
    return row

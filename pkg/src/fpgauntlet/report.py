"""Report assembly and rendering (canonical JSON, fixed-column CSV)."""

from __future__ import annotations

import csv
import io
import json
from typing import Sequence

from . import __version__
from .experiments import DETECT_COLUMNS, NETLAB_COLUMNS, VERIFY_COLUMNS

COLUMNS = {"verify": VERIFY_COLUMNS, "netlab": NETLAB_COLUMNS, "detect": DETECT_COLUMNS}


def build_report(command: str, rows: Sequence[dict], config_sha256: str, seed: int,
                 failures: Sequence[str] = ()) -> dict:
    return {
        "metadata": {
            "tool": "fpgauntlet",
            "version": __version__,
            "command": command,
            "config_sha256": config_sha256,
            "seed": seed,
            "columns": list(COLUMNS[command]),
        },
        "rows": list(rows),
        "expectation_failures": list(failures),
    }


def to_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def to_csv(report: dict) -> str:
    columns = report["metadata"]["columns"]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in report["rows"]:
        writer.writerow({k: _cell(row.get(k, "")) for k in columns})
    return buf.getvalue()


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def render(report: dict, fmt: str) -> str:
    return to_csv(report) if fmt == "csv" else to_json(report)


def load_report(text: str) -> dict:
    report = json.loads(text)
    if not isinstance(report, dict) or "metadata" not in report or "rows" not in report:
        raise ValueError("not a report document")
    return report


def to_table(report: dict) -> str:
    """Plain aligned text table for terminals."""
    columns = report["metadata"]["columns"]
    cells = [[_cell(r.get(c, "")) for c in columns] for r in report["rows"]]
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths)).rstrip()]
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() for row in cells]
    return "\n".join(lines) + "\n"

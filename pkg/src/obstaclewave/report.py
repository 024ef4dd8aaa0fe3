"""Report bundle: one JSON document per run plus CSV tables.

CSV content depends only on the configuration and seed (floats are written
with ``repr``), so repeated runs give byte-identical tables.  Timings live in
the JSON only.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SCHEMA_ID = "obstaclewave.report/1"


@dataclass
class Table:
    header: list
    rows: list


@dataclass
class SectionResult:
    """What one pipeline stage hands back to the CLI."""

    name: str
    summary: dict
    tables: dict = field(default_factory=dict)   # name -> Table
    figures: list = field(default_factory=list)  # callables taking an output path
    checks: dict = field(default_factory=dict)   # invariant name -> bool
    seconds: float = 0.0
    arrays: dict = field(default_factory=dict)   # name -> {key: array}, written as .npz

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def _cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if x is None:
        return ""
    return str(x)


def write_csv(path, table: Table):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.header)
        for row in table.rows:
            w.writerow([_cell(x) for x in row])


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    return obj


def write_json(path, doc: dict):
    Path(path).write_text(json.dumps(jsonable(doc), indent=2, sort_keys=True) + "\n")


def build_report(command: str, cfg, sections: list, total_seconds: float) -> dict:
    return {
        "schema": SCHEMA_ID,
        "command": command,
        "config_hash": cfg.config_hash(),
        "config": cfg.to_ini(),
        "seed": cfg.seed,
        "passed": all(s.passed for s in sections),
        "sections": {s.name: {"summary": s.summary, "checks": s.checks, "passed": s.passed} for s in sections},
        "timings": {**{s.name: s.seconds for s in sections}, "total": total_seconds},
    }


def write_bundle(out_dir, command: str, cfg, sections: list, total_seconds: float, figures: bool = True) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for s in sections:
        for name, table in s.tables.items():
            p = out / f"{s.name}_{name}.csv"
            write_csv(p, table)
            files.append(p.name)
        for name, arrs in s.arrays.items():
            p = out / f"{s.name}_{name}.npz"
            np.savez(p, **arrs)
            files.append(p.name)
        if figures:
            for k, fig in enumerate(s.figures):
                p = out / f"{s.name}_{getattr(fig, 'stem', k)}.png"
                fig(p)
                files.append(p.name)
    doc = build_report(command, cfg, sections, total_seconds)
    doc["files"] = sorted(files)
    write_json(out / f"report_{command}.json", doc)
    (out / "config_echo.ini").write_text(cfg.to_ini())
    return doc

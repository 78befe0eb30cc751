"""Result files: cell lists (CSV / JSON), the run report, and a 2-D hull polygon.

Floats are written with ``repr``, the shortest text that reads back to the
same double, so exports reload bit-exactly.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull

from rcis.algorithms import RunReport
from rcis.geometry import Box, Covering

FORMATS = ("cells_csv", "cells_json", "hull_csv")


def _num(v) -> str:
    return repr(float(v))


def covering_to_dict(c: Covering) -> dict:
    return {
        "root": {"lo": [float(v) for v in c.root.lo], "hi": [float(v) for v in c.root.hi]},
        "depth": c.depth,
        "splits": list(c.splits),
        "coords": c.coords.tolist(),
    }


def covering_from_dict(d: dict) -> Covering:
    root = Box(d["root"]["lo"], d["root"]["hi"])
    coords = np.array(d["coords"], dtype=np.int64).reshape(-1, root.n)
    return Covering(root, int(d["depth"]), tuple(d["splits"]), coords)


def report_to_dict(report: RunReport) -> dict:
    out = report.summary()
    out["covering"] = covering_to_dict(report.covering)
    return out


def write_report(report: RunReport, path) -> None:
    Path(path).write_text(json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n")


def load_covering(path) -> Covering:
    """Final covering stored in a report file."""
    data = json.loads(Path(path).read_text())
    if "covering" not in data:
        raise ValueError(f"{path} has no 'covering' section")
    return covering_from_dict(data["covering"])


def cells_csv(c: Covering) -> str:
    n = c.n
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["depth"] + [f"c{i + 1}" for i in range(n)] + [f"lo{i + 1}" for i in range(n)] + [f"hi{i + 1}" for i in range(n)])
    lo, hi = c.bounds()
    for coords, a, b in zip(c.coords.tolist(), lo, hi):
        w.writerow([c.depth] + coords + [_num(v) for v in a] + [_num(v) for v in b])
    return buf.getvalue()


def read_cells_csv(text: str) -> tuple:
    """``(depth, coords, lo, hi)`` arrays from :func:`cells_csv` output."""
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    n = (len(header) - 1) // 3
    if not body:
        return None, np.zeros((0, n), dtype=np.int64), np.zeros((0, n)), np.zeros((0, n))
    depth = {int(r[0]) for r in body}
    if len(depth) != 1:
        raise ValueError("cells of mixed depth")
    coords = np.array([[int(v) for v in r[1:1 + n]] for r in body], dtype=np.int64)
    lo = np.array([[float(v) for v in r[1 + n:1 + 2 * n]] for r in body])
    hi = np.array([[float(v) for v in r[1 + 2 * n:1 + 3 * n]] for r in body])
    return depth.pop(), coords, lo, hi


def cells_json(c: Covering) -> str:
    lo, hi = c.bounds()
    cells = [
        {"coords": coords, "lo": [float(v) for v in a], "hi": [float(v) for v in b]}
        for coords, a, b in zip(c.coords.tolist(), lo, hi)
    ]
    doc = {"depth": c.depth, "splits": list(c.splits), "root": covering_to_dict(c)["root"], "cells": cells}
    return json.dumps(doc, indent=1) + "\n"


def hull_vertices(c: Covering) -> np.ndarray:
    """Counterclockwise convex-hull vertices of all cell corners, starting at the lowest-leftmost one."""
    if c.n != 2:
        raise ValueError(f"hull export is only defined for 2-D coverings, got n = {c.n}")
    if c.is_empty:
        return np.zeros((0, 2))
    lo, hi = c.bounds()
    pts = np.unique(np.concatenate([lo, hi, np.c_[lo[:, 0], hi[:, 1]], np.c_[hi[:, 0], lo[:, 1]]]), axis=0)
    v = pts[ConvexHull(pts).vertices]
    start = np.lexsort((v[:, 0], v[:, 1]))[0]
    return np.roll(v, -start, axis=0)


def hull_csv(c: Covering) -> str:
    lines = ["x1,x2"]
    lines += [f"{_num(a)},{_num(b)}" for a, b in hull_vertices(c)]
    return "\n".join(lines) + "\n"


def export_results(covering: Covering, fmt: str) -> str:
    if fmt == "cells_csv":
        return cells_csv(covering)
    if fmt == "cells_json":
        return cells_json(covering)
    if fmt == "hull_csv":
        return hull_csv(covering)
    raise ValueError(f"unknown export format {fmt!r}; choose from {FORMATS}")

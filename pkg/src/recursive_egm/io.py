"""CSV and JSON serialisation for solutions and benchmark tables.

Every CSV written here carries a ``schema_version`` column so readers can
detect layout changes.
"""

import csv
import json
from pathlib import Path

import numpy as np

from .model import Solution

SCHEMA_VERSION = 1
SOLUTION_COLUMNS = ("schema_version", "state", "m", "c", "v")
_META_PREFIX = "# meta: "


def save_solution(solution, path):
    """Write ``solution`` as one row per (state, m) with columns state, m, c, v.

    Metadata (method, iterations, ...) goes on a leading ``# meta:`` line.
    Floats are written with ``repr`` so a round trip is exact.
    """
    path = Path(path)
    n_m, n_z = solution.c.shape
    with path.open("w", newline="") as fh:
        fh.write(_META_PREFIX + json.dumps(solution.meta()) + "\n")
        w = csv.writer(fh)
        w.writerow(SOLUTION_COLUMNS)
        for k in range(n_z):
            for i in range(n_m):
                w.writerow((SCHEMA_VERSION, k, repr(float(solution.m_grid[i])),
                            repr(float(solution.c[i, k])), repr(float(solution.v[i, k]))))
    return path


def load_solution(path):
    path = Path(path)
    with path.open() as fh:
        first = fh.readline()
        meta = json.loads(first[len(_META_PREFIX):]) if first.startswith(_META_PREFIX) else {}
        if not first.startswith(_META_PREFIX):
            fh.seek(0)
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path} holds no solution rows")
    versions = {int(r["schema_version"]) for r in rows}
    if versions != {SCHEMA_VERSION}:
        raise ValueError(f"unsupported solution schema version(s) {sorted(versions)}")
    state = np.array([int(r["state"]) for r in rows])
    m = np.array([float(r["m"]) for r in rows])
    c = np.array([float(r["c"]) for r in rows])
    v = np.array([float(r["v"]) for r in rows])
    n_z = state.max() + 1
    n_m = len(rows) // n_z
    order = np.lexsort((m, state))
    m_grid = m[order][:n_m]
    shape = (n_z, n_m)
    return Solution(m_grid=m_grid, c=c[order].reshape(shape).T, v=v[order].reshape(shape).T,
                    **meta)


def write_table(rows, path, columns=None):
    """Write dict rows to CSV, prepending the ``schema_version`` column."""
    path = Path(path)
    rows = list(rows)
    if columns is None:
        columns = []
        for r in rows:
            columns.extend(k for k in r if k not in columns)
    columns = ["schema_version"] + [c for c in columns if c != "schema_version"]
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({"schema_version": SCHEMA_VERSION, **r})
    return path


def read_table(path):
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def write_json(obj, path):
    path = Path(path)
    payload = {"schema_version": SCHEMA_VERSION, **obj} if isinstance(obj, dict) else \
        {"schema_version": SCHEMA_VERSION, "records": obj}
    path.write_text(json.dumps(payload, indent=2, default=_json_default) + "\n")
    return path


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serialisable: {type(x).__name__}")

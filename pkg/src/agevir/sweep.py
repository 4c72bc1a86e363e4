"""Parameter sweeps over one scalar scenario field, run in a process pool."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from agevir.equilibria import solve_antibody, solve_immune_free
from agevir.errors import ValidationError
from agevir.scenario import Scenario, get_path
from agevir.thresholds import classify

COLUMNS = ["index", "value", "R0", "R_star", "R_AN", "regime", "V_star", "T_star_1",
           "A_hat", "V_hat"]


def sweep_values(lo: float, hi: float, steps: int, log: bool = True) -> np.ndarray:
    if steps < 1:
        raise ValidationError("steps must be at least 1")
    if log:
        if not (lo > 0 and hi > 0):
            raise ValidationError("log sweep needs positive bounds")
        return np.geomspace(lo, hi, steps)
    return np.linspace(lo, hi, steps)


def _point(args):
    index, spec, path, value = args
    sc = Scenario.from_dict(spec).replace_value(path, value)
    rep = classify(sc)
    est = solve_immune_free(sc) if rep.r0 > 1 else None
    ehat = solve_antibody(sc) if rep.r_star > 1 else None
    nan = math.nan
    return [index, value, rep.r0, rep.r_star, rep.r_an if rep.r_an is not None else nan,
            rep.regime.value, est.V if est else nan, est.T[0] if est else nan,
            ehat.A if ehat else nan, ehat.V if ehat else nan]


def run_sweep(scenario: Scenario, path: str, values, workers: int | None = None) -> list[list]:
    """One row per value, ordered by sweep index whatever the completion order."""
    spec = scenario.to_dict()
    get_path(spec, path)
    scenario.replace_value(path, float(values[0]))  # validates the path early
    jobs = [(i, spec, path, float(v)) for i, v in enumerate(values)]
    if workers == 1 or len(jobs) < 4:
        return [_point(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_point, jobs, chunksize=max(1, len(jobs) // 32)))


def write_sweep_csv(rows, path: str | Path, param: str) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["# param=" + param])
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in r])
    return path


def read_sweep_csv(path: str | Path) -> tuple[str, list[dict]]:
    with Path(path).open(newline="") as fh:
        lines = list(csv.reader(fh))
    param = lines[0][0].split("=", 1)[1] if lines and lines[0][0].startswith("# param=") else ""
    body = lines[1:] if param else lines
    header, rows = body[0], body[1:]
    return param, [dict(zip(header, r)) for r in rows]

"""Sampled trajectories and their CSV form.

CSV columns are fixed: ``t, T_1..T_n, I_1..I_n, V, A`` followed by one column
per requested diagnostic (``W``, ``W1``, ``W2``, ``phi``) and ``omega_ok``
when the invariant-region monitor ran.  Floats are written with ``repr`` so a
read-back is bit-exact.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from agevir.errors import ValidationError


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    T: np.ndarray  # (samples, n)
    I: np.ndarray  # (samples, n)
    V: np.ndarray
    A: np.ndarray
    diagnostics: dict[str, np.ndarray] = field(default_factory=dict)
    omega_ok: np.ndarray | None = None
    slices: dict[float, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    final_state: Any = None
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.T.shape[1]

    def columns(self) -> list[str]:
        cols = ["t"] + [f"T_{j + 1}" for j in range(self.n)]
        cols += [f"I_{j + 1}" for j in range(self.n)] + ["V", "A"]
        cols += list(self.diagnostics)
        if self.omega_ok is not None:
            cols.append("omega_ok")
        return cols

    def rows(self):
        for m, t in enumerate(self.times):
            row = [float(t), *map(float, self.T[m]), *map(float, self.I[m]),
                   float(self.V[m]), float(self.A[m])]
            row += [float(v[m]) for v in self.diagnostics.values()]
            if self.omega_ok is not None:
                row.append(int(bool(self.omega_ok[m])))
            yield row

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns())
            for row in self.rows():
                w.writerow([repr(x) if isinstance(x, float) else x for x in row])
        return path

    def slices_to_csv(self, path: str | Path) -> Path:
        """Age slices as long-form rows: t, theta, i_1..i_n."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "theta"] + [f"i_{j + 1}" for j in range(self.n)])
            for t, (theta, dens) in sorted(self.slices.items()):
                for k, th in enumerate(theta):
                    w.writerow([repr(float(t)), repr(float(th))]
                               + [repr(float(x)) for x in dens[:, k]])
        return path

    def state_at(self, m: int) -> np.ndarray:
        """Flat (T, I, V, A) vector of sample ``m``."""
        return np.concatenate([self.T[m], self.I[m], [self.V[m], self.A[m]]])

    def as_matrix(self) -> np.ndarray:
        return np.column_stack([self.T, self.I, self.V, self.A])


def read_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Header and float matrix of a CSV written by this package."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValidationError(f"{path}: empty CSV")
    header, body = rows[0], rows[1:]
    data = np.array([[float(x) for x in r] for r in body]) if body else np.empty((0, len(header)))
    return header, data


def record_from_csv(path: str | Path) -> TrajectoryRecord:
    header, data = read_csv(path)
    if header[0] != "t" or "V" not in header or "A" not in header:
        raise ValidationError(f"{path}: not a trajectory CSV (columns {header})")
    n = sum(1 for h in header if h.startswith("T_"))
    col = {h: i for i, h in enumerate(header)}
    diag = {h: data[:, col[h]] for h in header if h in ("W", "W1", "W2", "phi")}
    omega = data[:, col["omega_ok"]].astype(bool) if "omega_ok" in col else None
    return TrajectoryRecord(
        data[:, 0], data[:, 1:1 + n], data[:, 1 + n:1 + 2 * n],
        data[:, col["V"]], data[:, col["A"]], diag, omega)

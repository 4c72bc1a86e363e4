"""Emit standalone matplotlib scripts for the CSV files the CLI writes.

The scripts read their CSV by a path relative to the script itself, so the
pair can be moved together.  Matplotlib is only needed to run them.
"""

from __future__ import annotations

import csv
import os
from pathlib import Path

from agevir.errors import ValidationError

_TRAJECTORY = '''"""Four-panel time series of T, I, V, A."""
import csv
import os

import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
with open(os.path.join(HERE, {csv!r}), newline="") as fh:
    rows = list(csv.DictReader(fh))
t = [float(r["t"]) for r in rows]
fig, axes = plt.subplots(2, 2, figsize=(10, 7), sharex=True)
panels = [("T", "uninfected cells"), ("I", "infected cells"), ("V", "virions"), ("A", "antibodies")]
for ax, (key, label) in zip(axes.flat, panels):
    cols = [c for c in rows[0] if c == key or c.startswith(key + "_")]
    for c in cols:
        ax.plot(t, [float(r[c]) for r in rows], label=c)
    ax.set_ylabel(label)
    if len(cols) > 1:
        ax.legend()
for ax in axes[1]:
    ax.set_xlabel("t (days)")
fig.tight_layout()
fig.savefig(os.path.join(HERE, {png!r}), dpi=150)
'''

_SWEEP = '''"""Regime and thresholds against the swept parameter."""
import csv
import os

import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
with open(os.path.join(HERE, {csv!r}), newline="") as fh:
    lines = list(csv.reader(fh))
param = lines[0][0].split("=", 1)[1]
rows = [dict(zip(lines[1], r)) for r in lines[2:]]
x = [float(r["value"]) for r in rows]
code = {{"InfectionFree": 0, "ImmuneFree": 1, "AntibodyImmune": 2}}
fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 7), sharex=True)
ax1.step(x, [code[r["regime"]] for r in rows], where="mid")
ax1.set_yticks([0, 1, 2], ["E0", "E*", "E-hat"])
ax1.set_ylabel("regime")
ax2.plot(x, [float(r["R0"]) for r in rows], label="R0")
ax2.plot(x, [float(r["R_star"]) for r in rows], label="R*")
ax2.axhline(1.0, color="k", lw=0.5)
ax2.set_xlabel(param)
ax2.legend()
if min(x) > 0 and max(x) / min(x) > 50:
    ax2.set_xscale("log")
fig.tight_layout()
fig.savefig(os.path.join(HERE, {png!r}), dpi=150)
'''

_SLICES = '''"""Infected age profiles i(theta) at the stored times."""
import csv
import os
from collections import defaultdict

import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
with open(os.path.join(HERE, {csv!r}), newline="") as fh:
    rows = list(csv.DictReader(fh))
cols = [c for c in rows[0] if c.startswith("i_")]
by_t = defaultdict(list)
for r in rows:
    by_t[float(r["t"])].append(r)
fig, axes = plt.subplots(len(cols), 1, figsize=(8, 3.5 * len(cols)), squeeze=False)
for ax, c in zip(axes[:, 0], cols):
    for t, rs in sorted(by_t.items()):
        ax.plot([float(r["theta"]) for r in rs], [float(r[c]) for r in rs], label=f"t={{t:g}}")
    ax.set_ylabel(c)
    ax.set_yscale("log")
    ax.legend()
axes[-1, 0].set_xlabel("infection age (days)")
fig.tight_layout()
fig.savefig(os.path.join(HERE, {png!r}), dpi=150)
'''


def csv_kind(path: str | Path) -> str:
    with Path(path).open(newline="") as fh:
        first = next(csv.reader(fh), None)
        second = next(csv.reader(fh), None) if first else None
    if not first:
        raise ValidationError(f"{path}: empty CSV")
    if first[0].startswith("# param="):
        needed = {"value", "regime", "R0", "R_star"}
        if not second or not needed <= set(second):
            raise ValidationError(f"{path}: sweep CSV lacks columns {sorted(needed)}")
        return "sweep"
    if first[:2] == ["t", "theta"]:
        if not any(c.startswith("i_") for c in first):
            raise ValidationError(f"{path}: age-slice CSV has no i_j columns")
        return "slices"
    if first[0] == "t":
        missing = [c for c in ("T_1", "I_1", "V", "A") if c not in first]
        if missing:
            raise ValidationError(f"{path}: trajectory CSV missing columns {missing}")
        return "trajectory"
    raise ValidationError(f"{path}: unrecognised CSV layout")


def emit_plots(csv_path: str | Path, out_dir: str | Path | None = None) -> Path:
    """Write a plot script for ``csv_path`` into ``out_dir``; returns its path."""
    csv_path = Path(csv_path)
    if not csv_path.is_file():
        raise ValidationError(f"{csv_path}: no such CSV")
    kind = csv_kind(csv_path)
    out_dir = Path(out_dir) if out_dir else csv_path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    template = {"trajectory": _TRAJECTORY, "sweep": _SWEEP, "slices": _SLICES}[kind]
    rel = os.path.relpath(csv_path.resolve(), out_dir.resolve())
    script = out_dir / f"plot_{csv_path.stem}.py"
    script.write_text(template.format(csv=rel, png=f"{csv_path.stem}.png"))
    return script

"""Command-line interface.

Subcommands: ``report``, ``equilibria``, ``simulate``, ``sweep``, ``check`` and
``plots``.  Exit codes: 0 ok, 2 validation, 3 solver, 4 integration.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from agevir import agesim, ddesim, equilibria, thresholds
from agevir.errors import AgevirError
from agevir.plots import emit_plots
from agevir.scenario import audit_incidence, bundled_names, load_scenario
from agevir.sweep import run_sweep, sweep_values, write_sweep_csv


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def format_report(sc, rep, states) -> str:
    lines = [f"scenario: {sc.name}",
             f"regime: {rep.regime.value}, R0={rep.r0:.4f}, R*={rep.r_star:.4f}"]
    for j, (cl, r) in enumerate(zip(sc.classes, rep.r_js)):
        lines.append(f"  R_{j + 1:<3d} {r:12.6f}   {cl.name}")
    lines.append(f"  R0    {rep.r0:12.6f}")
    lines.append(f"  R*    {rep.r_star:12.6f}")
    if rep.r_an is not None:
        lines.append(f"  R_AN  {rep.r_an:12.6f}   (V* = {rep.v_star:.6g})")
    for flag in rep.boundary_flags:
        lines.append(f"  note: {flag}")
    lines.append("equilibria:")
    for s in states:
        T = ", ".join(f"{x:.6g}" for x in s.T)
        I = ", ".join(f"{x:.6g}" for x in s.I)
        lines.append(f"  {s.kind:5s} T=[{T}] I=[{I}] V={s.V:.6g} A={s.A:.6g} "
                     f"residual={s.max_residual:.2e}")
    return "\n".join(lines)


def cmd_report(args) -> int:
    sc = load_scenario(args.scenario)
    rep = thresholds.classify(sc)
    states = equilibria.all_steady_states(sc)
    if args.json:
        print(json.dumps({"scenario": sc.name, "thresholds": rep.as_dict(),
                          "equilibria": [s.as_dict() for s in states]}, indent=2))
    else:
        print(format_report(sc, rep, states))
    return 0


def cmd_equilibria(args) -> int:
    sc = load_scenario(args.scenario)
    states = equilibria.all_steady_states(sc)
    if args.json:
        print(json.dumps([s.as_dict() for s in states], indent=2))
    else:
        for s in states:
            print(f"{s.kind}: T={list(s.T)} I={list(s.I)} V={s.V!r} A={s.A!r} "
                  f"residual={s.max_residual:.2e}")
    if args.profile_theta_max:
        out = _out_dir(args)
        theta = np.arange(0.0, args.profile_theta_max + 1e-12, args.profile_dtheta)
        for s in states:
            path = out / f"profile_{s.kind}.csv"
            with path.open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["theta"] + [f"i_{j + 1}" for j in range(sc.n)])
                cols = [s.profile(j, theta) for j in range(sc.n)]
                for k, th in enumerate(theta):
                    w.writerow([repr(float(th))] + [repr(float(c[k])) for c in cols])
            print(f"wrote {path}")
    return 0


def cmd_simulate(args) -> int:
    sc = load_scenario(args.scenario)
    diags = [d for d in (args.diagnostics or "").split(",") if d]
    slices = [float(x) for x in (args.slices or "").split(",") if x]
    if args.model == "dde":
        if diags or slices:
            raise AgevirError("diagnostics and age slices need --model age")
        rec = ddesim.simulate_dde(sc, args.t_end, stride=args.stride, dt=args.dtheta)
    else:
        rec = agesim.simulate(sc, args.t_end, stride=args.stride, dtheta=args.dtheta,
                              diagnostics=diags, slice_times=slices)
    out = _out_dir(args)
    path = rec.to_csv(out / f"{sc.name}_{args.model}.csv")
    print(f"wrote {path}")
    if rec.slices:
        spath = rec.slices_to_csv(out / f"{sc.name}_slices.csv")
        print(f"wrote {spath}")
    final = rec.state_at(-1)
    print("final:", " ".join(f"{c}={x:.6g}" for c, x in zip(rec.columns()[1:], final)))
    return 0


def cmd_sweep(args) -> int:
    sc = load_scenario(args.scenario)
    values = sweep_values(args.range[0], args.range[1], args.steps, log=not args.linear)
    rows = run_sweep(sc, args.param, values, workers=args.workers)
    out = _out_dir(args)
    path = write_sweep_csv(rows, out / f"{sc.name}_sweep.csv", args.param)
    prev = None
    for r in rows:
        if r[5] != prev:
            print(f"{args.param}={r[1]:.6g}: {r[5]} (R0={r[2]:.4f}, R*={r[3]:.4f})")
            prev = r[5]
    print(f"wrote {path}")
    return 0


def cmd_check(args) -> int:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sc = load_scenario(args.scenario)
    problems = audit_incidence(sc, grid_n=41)
    rep = thresholds.classify(sc)
    states = equilibria.all_steady_states(sc)
    checks = [("incidence hypotheses", not problems, "; ".join(problems)),
              ("R* < R0", rep.r_star < rep.r0, f"{rep.r_star:.6g} vs {rep.r0:.6g}")]
    kinds = {s.kind for s in states}
    checks.append(("E* present iff R0 > 1", ("EStar" in kinds) == (rep.r0 > 1), ""))
    checks.append(("E-hat present iff R* > 1", ("EHat" in kinds) == (rep.r_star > 1), ""))
    for s in states:
        checks.append((f"{s.kind} residual <= 1e-8", s.max_residual <= 1e-8,
                       f"{s.max_residual:.2e}"))
    if rep.r_an is not None:
        checks.append(("sign(R*-1) == sign(R_AN-1)",
                       np.sign(rep.r_star - 1) == np.sign(rep.r_an - 1), ""))
    ok = True
    for name, passed, detail in checks:
        ok &= bool(passed)
        print(f"{'PASS' if passed else 'FAIL'}  {name}" + (f"  ({detail})" if detail else ""))
    return 0 if ok else 2


def cmd_plots(args) -> int:
    script = emit_plots(args.csv, args.out)
    print(f"wrote {script}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="agevir", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    scen_help = f"scenario file or bundled name ({', '.join(bundled_names())})"

    def common(sp, out=True):
        sp.add_argument("--scenario", required=True, help=scen_help)
        if out:
            sp.add_argument("--out", help="output directory (default: current)")

    sp = sub.add_parser("report", help="thresholds, regime and equilibria")
    common(sp, out=False)
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("equilibria", help="steady states and optional profile CSVs")
    common(sp)
    sp.add_argument("--json", action="store_true")
    sp.add_argument("--profile-theta-max", type=float, default=None)
    sp.add_argument("--profile-dtheta", type=float, default=0.1)
    sp.set_defaults(func=cmd_equilibria)

    sp = sub.add_parser("simulate", help="time integration to CSV")
    common(sp)
    sp.add_argument("--model", choices=("age", "dde"), default="age")
    sp.add_argument("--t-end", type=float, default=200.0)
    sp.add_argument("--stride", type=float, default=1.0)
    sp.add_argument("--dtheta", type=float, default=None, help="age/time step (dde: time step)")
    sp.add_argument("--diagnostics", help="comma list of W, W1, W2, phi")
    sp.add_argument("--slices", help="comma list of times for age-profile dumps")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep", help="thresholds and regimes over one parameter")
    common(sp)
    sp.add_argument("--param", required=True, help="e.g. classes[0].incidence.beta")
    sp.add_argument("--range", nargs=2, type=float, required=True, metavar=("LO", "HI"))
    sp.add_argument("--steps", type=int, default=50)
    sp.add_argument("--linear", action="store_true", help="linear instead of log spacing")
    sp.add_argument("--workers", type=int, default=None)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("check", help="hypothesis and invariant audit")
    common(sp, out=False)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("plots", help="emit a matplotlib script for a CSV")
    sp.add_argument("--csv", required=True)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_plots)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except AgevirError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())

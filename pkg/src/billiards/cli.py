"""Command-line front end.

Subcommands: beta, mm, compare, conjugacy, witness, orbit.  Each command
reads table description files (JSON), writes CSV data plus a
machine-readable summary.json into the output directory, and exits 0 on
success, 1 on configuration errors, 2 on fit-conditioning failures and 3
on solver failures.  Set BILLIARDS_LOG to a logging level name for
progress output; --threads parallelizes the q sweeps.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

from . import __version__
from .dynamics import PhasePoint, trajectory, write_trajectory_csv
from .ellipse_maps import build_conjugacy, eccentricity_witness, hyperbolic_orbit_exists
from .errors import (
    BilliardsError,
    ConditioningError,
    SolverError,
    TableConfigError,
)
from .invariants import (
    DEFAULT_Q_RANGE,
    fit_normalized_beta,
    mm_fit_from_samples,
    mm_ratio_check,
    sample_beta,
)
from .orbits import find_orbit, lq_bounds
from .tables import EllipseTable, load_table

log = logging.getLogger("billiards")

STAT_TOL_NOTE = {
    "stationarity": "1e-10 * perimeter",
    "fit_condition_limit": 1e12,
    "chord_parameter": 1e-13,
}


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="billiards",
        description="Length-spectrum invariants and conjugacies of convex billiards",
    )
    ap.add_argument("--version", action="version", version=f"billiards {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, two_tables=False):
        p.add_argument("--table", required=True, help="table description file (JSON)")
        if two_tables:
            p.add_argument("--table2", required=True, help="second table file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1)

    p = sub.add_parser("beta", help="sample beta(1/q) and fit the normalized expansion")
    common(p)
    p.add_argument("--qmin", type=int, default=DEFAULT_Q_RANGE[0])
    p.add_argument("--qmax", type=int, default=DEFAULT_Q_RANGE[1])
    p.add_argument("--K", type=int, default=3)
    p.add_argument("--extended", action="store_true",
                   help="extended-precision fit accumulation (required for K > 3)")

    p = sub.add_parser("mm", help="L_q/l_q table and Marvizi-Melrose fit")
    common(p)
    p.add_argument("--qmin", type=int, default=DEFAULT_Q_RANGE[0])
    p.add_argument("--qmax", type=int, default=DEFAULT_Q_RANGE[1])
    p.add_argument("--K", type=int, default=3)
    p.add_argument("--extended", action="store_true")
    p.add_argument("--gap-step", type=int, default=5,
                   help="stride for the l_q (gap) computation")

    p = sub.add_parser("compare", help="normalized coefficients of two tables + ratio law")
    common(p, two_tables=True)
    p.add_argument("--qmin", type=int, default=DEFAULT_Q_RANGE[0])
    p.add_argument("--qmax", type=int, default=DEFAULT_Q_RANGE[1])
    p.add_argument("--K", type=int, default=3)
    p.add_argument("--extended", action="store_true")

    p = sub.add_parser("conjugacy", help="verify the elliptic near-boundary conjugacy")
    common(p, two_tables=True)
    p.add_argument("--grid", type=int, nargs=2, default=(200, 50),
                   metavar=("NS", "NTHETA"))
    p.add_argument("--threshold", type=float, default=None,
                   help="exit nonzero when the max residual exceeds this")

    p = sub.add_parser("witness", help="eccentricity-rigidity witness for two ellipses")
    common(p, two_tables=True)

    p = sub.add_parser("orbit", help="export a periodic orbit or a trajectory")
    common(p)
    p.add_argument("--pq", type=int, nargs=2, metavar=("P", "Q"))
    p.add_argument("--orbit-class", choices=("max", "min"), default="max")
    p.add_argument("--s0", type=float, default=0.0)
    p.add_argument("--theta0", type=float, default=None)
    p.add_argument("--steps", type=int, default=100)
    return ap


def _write_summary(outdir: Path, command: str, config: dict, payload: dict,
                   outputs: list[str]) -> None:
    summary = {
        "tool": "billiards",
        "version": __version__,
        "command": command,
        "config": config,
        "tolerances": STAT_TOL_NOTE,
        "outputs": outputs,
    }
    summary.update(payload)
    with open(outdir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)


def _load(path) -> object:
    table = load_table(path)
    log.info("loaded %s table from %s (perimeter %.6f)", table.kind, path, table.perimeter)
    return table


def _cmd_beta(args, outdir: Path) -> int:
    table = _load(args.table)
    samples = sample_beta(table, args.qmin, args.qmax, workers=args.threads)
    report = mm_fit_from_samples(samples, args.K, extended=args.extended)
    csv_path = outdir / "beta_samples.csv"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["p", "q", "omega", "beta"])
        for p, q, om, b in zip(samples.p, samples.q, samples.omega, samples.beta):
            w.writerow([int(p), int(q), float(om), float(b)])
    rep_path = outdir / "invariant_report.json"
    with open(rep_path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2)
    _write_summary(
        outdir, "beta", {"table": table.as_config(), "qmin": args.qmin,
                         "qmax": args.qmax, "K": args.K},
        {"c3": float(report.beta_coeffs[0]), "ell0": float(report.mm_ell[0]),
         "perimeter": table.perimeter},
        [str(csv_path), str(rep_path)],
    )
    return 0


def _cmd_mm(args, outdir: Path) -> int:
    table = _load(args.table)
    samples = sample_beta(table, args.qmin, args.qmax, workers=args.threads)
    report = mm_fit_from_samples(samples, args.K, extended=args.extended)
    gap_qs = list(range(args.qmin, args.qmax + 1, args.gap_step))
    rows = []
    for q in gap_qs:
        big, small = lq_bounds(table, q)
        rows.append((q, big, small, -big / q))
    csv_path = outdir / "mm_table.csv"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["q", "L_q", "l_q", "beta"])
        for q, big, small, beta in rows:
            w.writerow([q, big, small, beta])
    rep_path = outdir / "invariant_report.json"
    with open(rep_path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2)
    _write_summary(
        outdir, "mm", {"table": table.as_config(), "qmin": args.qmin,
                       "qmax": args.qmax, "K": args.K, "gap_step": args.gap_step},
        {"ell0": float(report.mm_ell[0]), "perimeter": table.perimeter,
         "max_gap": max(r[1] - r[2] for r in rows)},
        [str(csv_path), str(rep_path)],
    )
    return 0


def _cmd_compare(args, outdir: Path) -> int:
    t1 = _load(args.table)
    t2 = _load(args.table2)
    s1 = sample_beta(t1, args.qmin, args.qmax, workers=args.threads)
    s2 = sample_beta(t2, args.qmin, args.qmax, workers=args.threads)
    r1 = fit_normalized_beta(s1, args.K, extended=args.extended)
    r2 = fit_normalized_beta(s2, args.K, extended=args.extended)
    ratios = mm_ratio_check(r1, r2)
    diff = [
        {"k": 2 * k + 3, "c_table1": float(a), "c_table2": float(b),
         "abs_diff": abs(float(a) - float(b)),
         "rel_diff": abs(float(a) - float(b)) / max(abs(float(b)), 1e-300)}
        for k, (a, b) in enumerate(zip(r1.beta_coeffs, r2.beta_coeffs))
    ]
    csv_path = outdir / "ratio_table.csv"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "measured", "predicted", "deviation"])
        for row in ratios:
            w.writerow([row.n, row.measured, row.predicted, row.deviation])
    _write_summary(
        outdir, "compare",
        {"table": t1.as_config(), "table2": t2.as_config(), "qmin": args.qmin,
         "qmax": args.qmax, "K": args.K},
        {"coefficients": diff,
         "ratio_table": [row.__dict__ for row in ratios],
         "lazutkin": [r1.lazutkin, r2.lazutkin]},
        [str(csv_path)],
    )
    return 0


def _cmd_conjugacy(args, outdir: Path) -> int:
    t1 = _load(args.table)
    t2 = _load(args.table2)
    if not isinstance(t1, EllipseTable) or not isinstance(t2, EllipseTable):
        raise TableConfigError("conjugacy requires elliptic tables")
    h = build_conjugacy(t1, t2)
    n_s, n_theta = args.grid
    s, th, rs, rt = h.residual_grid(n_s=n_s, n_theta=n_theta)
    csv_path = outdir / "conjugacy_residuals.csv"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "theta", "residual_s", "residual_theta"])
        for row in zip(s, th, rs, rt):
            w.writerow([float(v) for v in row])
    max_res = float(max(rs.max(), rt.max()))
    _write_summary(
        outdir, "conjugacy",
        {"table": t1.as_config(), "table2": t2.as_config(), "grid": [n_s, n_theta]},
        {"max_residual": max_res, "theta_star": h.theta_star,
         "theta2_star": h.theta2_star, "theta3_star": h.theta3_star},
        [str(csv_path)],
    )
    if args.threshold is not None and max_res > args.threshold:
        log.error("conjugacy residual %.3e exceeds threshold %.3e", max_res, args.threshold)
        return 4
    return 0


def _cmd_witness(args, outdir: Path) -> int:
    t1 = _load(args.table)
    t2 = _load(args.table2)
    if not isinstance(t1, EllipseTable) or not isinstance(t2, EllipseTable):
        raise TableConfigError("witness requires elliptic tables")
    e1, e2 = t1.params, t2.params
    wit = eccentricity_witness(e1, e2)
    payload = {
        "e1": e1.eccentricity,
        "e2": e2.eccentricity,
        "interval": sorted([math.asin(e1.b / e1.a) / math.pi,
                            math.asin(e2.b / e2.a) / math.pi]),
        "m": None,
        "n": None,
        "xi_root": None,
        "u_min": None,
    }
    if wit is not None:
        m, n = wit
        hot = e1 if e1.eccentricity > e2.eccentricity else e2
        cold = e2 if hot is e1 else e1
        dec_hot = hyperbolic_orbit_exists(hot, m, n)
        dec_cold = hyperbolic_orbit_exists(cold, m, n)
        payload.update({
            "m": m,
            "n": n,
            "xi_root": dec_hot.xi_root,
            "u_min": dec_cold.u_min,
        })
    json_path = outdir / "witness.json"
    with open(json_path, "w") as fh:
        json.dump(payload, fh, indent=2)
    _write_summary(outdir, "witness",
                   {"table": t1.as_config(), "table2": t2.as_config()},
                   payload, [str(json_path)])
    return 0


def _cmd_orbit(args, outdir: Path) -> int:
    table = _load(args.table)
    outputs = []
    payload = {}
    if args.pq:
        p, q = args.pq
        orb = find_orbit(table, p, q, args.orbit_class)
        pts = orb.vertices(table)
        csv_path = outdir / f"orbit_{p}_{q}_{args.orbit_class}.csv"
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "s_i", "x_i", "y_i"])
            for i, (si, pt) in enumerate(zip(orb.s, pts)):
                w.writerow([i, float(si % table.perimeter), float(pt[0]), float(pt[1])])
        outputs.append(str(csv_path))
        payload.update({"length": orb.length, "beta": orb.beta,
                        "residual": orb.residual})
    else:
        theta0 = args.theta0 if args.theta0 is not None else math.pi / 4
        s, th, pts = trajectory(table, PhasePoint(args.s0, theta0), args.steps)
        csv_path = outdir / "trajectory.csv"
        write_trajectory_csv(csv_path, table, s, th, pts)
        outputs.append(str(csv_path))
        payload.update({"steps": args.steps})
    _write_summary(outdir, "orbit", {"table": table.as_config()}, payload, outputs)
    return 0


_COMMANDS = {
    "beta": _cmd_beta,
    "mm": _cmd_mm,
    "compare": _cmd_compare,
    "conjugacy": _cmd_conjugacy,
    "witness": _cmd_witness,
    "orbit": _cmd_orbit,
}


def main(argv=None) -> int:
    level = os.environ.get("BILLIARDS_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    outdir = Path(args.out)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](args, outdir)
    except TableConfigError as exc:
        print(f"billiards: {exc}", file=sys.stderr)
        return 1
    except ConditioningError as exc:
        print(f"billiards: fit conditioning failure: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"billiards: solver failure: {exc}", file=sys.stderr)
        return 3
    except BilliardsError as exc:
        print(f"billiards: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()

"""satguard command line: tune, simulate, sweep, verify."""

import argparse
import csv
import math
import sys

import numpy as np

from .config import load_config
from .controller import ControllerGains
from .errors import ConfigError, FeasibilityError, InfeasibleGainError, InputError, IntegrationFault, SatguardError
from .numerics import default_horizon
from .simulate import (asymptotic_error, ell_excursion, simulate, verify_envelope, verify_region_convergence,
                       verify_udot_bound)
from .tuning import (SWEEP_COLUMNS, envelope_constants, feasibility_report, fmt, lambda_cap, lambda_f_bound,
                     lambda_star, pick_gains, sweep)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INFEASIBLE = 2
EXIT_FAULT = 3

EXCURSION_RATIO_PROXY = 5.0
# the error bound is a limit; a finite run keeps a roundoff-level residual
TAIL_ABS_TOL = 1e-9


def _constants(sc):
    computed = envelope_constants(sc.internal, sc.envelope.w_bound, sc.epsilon)
    return (sc.constants or computed), computed


def resolve_gains(sc, ec):
    """Configured gains, with 0.99 lam* / 0.95 lam phi(lam) filling whatever is missing."""
    if sc.lam is None:
        return (*pick_gains(sc.envelope, ec), True)
    if sc.lam_f is None:
        return sc.lam, 0.95 * lambda_f_bound(sc.envelope, ec, sc.lam), True
    return sc.lam, sc.lam_f, False


def build_report(sc, lam, lam_f):
    return feasibility_report(sc.envelope, sc.internal, sc.envelope.w_bound, sc.epsilon, sc.envelope.g_rate_bound,
                              lam, lam_f, constants=sc.constants, g_signal=sc.g)


def _gains(sc, lam, lam_f):
    e = sc.envelope
    return ControllerGains(lam, lam_f, sc.y_d_final, e.u_min, e.u_max)


def cmd_tune(args, out=None):
    out = out or sys.stdout
    sc = load_config(args.config)
    ec, _ = _constants(sc)
    try:
        lam, lam_f, auto = resolve_gains(sc, ec)
    except (FeasibilityError, InfeasibleGainError) as exc:
        print(f"infeasible: {exc}", file=out)
        if not ec.c0 < sc.envelope.rho_min:
            print("failed = c0_below_rho_min", file=out)
        return EXIT_INFEASIBLE
    rep = build_report(sc, lam, lam_f)
    print(f"gains_auto_picked = {fmt(auto)}", file=out)
    out.write(rep.to_text())
    return EXIT_OK if rep.feasible else EXIT_INFEASIBLE


def run_checks(sc, tr, rep):
    """Evaluate every verifier on a trajectory; returns (name, value, required, passed) rows."""
    rows = []
    feasible = rep.feasible
    region = verify_region_convergence(tr)
    rows.append(("region_entry_time", region.entry_time, False, None))
    rows.append(("invariant_after_entry", region.invariant_after_entry, feasible, region.invariant_after_entry))

    ec = rep.envelope
    env = verify_envelope(tr, ec)
    rows.append(("envelope_ell_margin", env.ell_margin, False, None))
    rows.append(("envelope_dell_margin", env.dell_margin, False, None))
    rows.append(("envelope_violations_window", env.violations, False, env.ok))
    memory = default_horizon(sc.internal.A)
    env_m = verify_envelope(tr, ec, memory=memory)
    rows.append(("envelope_violations_memory", env_m.violations, True, env_m.ok))

    if rep.delta_u is not None:
        ud = verify_udot_bound(tr, rep.delta_u)
        rows.append(("udot_observed", ud.observed, False, None))
        rows.append(("delta_u", ud.bound, False, None))
        rows.append(("udot_ratio", ud.ratio, False, None))
        rows.append(("udot_within_bound", ud.ok, True, ud.ok))
    try:
        err = asymptotic_error(tr, 0.2)
    except InputError:
        err = None
    rows.append(("tail_error", err, False, None))
    rows.append(("error_bound", rep.error_bound, False, None))
    if err is not None and feasible:
        ok = err <= rep.error_bound + TAIL_ABS_TOL
        rows.append(("tail_error_within_bound", ok, feasible, ok))
    rows.append(("ell_excursion", ell_excursion(tr), False, None))
    return rows


def _reference_excursion(sc, ec):
    lam, lam_f = pick_gains(sc.envelope, ec)
    ref = simulate(sc.plant_truth(), _gains(sc, lam, lam_f), sc.sim_config())
    return lam, lam_f, ell_excursion(ref)


def _summary(sc, tr, rep, out):
    rows = run_checks(sc, tr, rep)
    for name, value, required, passed in rows:
        tag = "" if passed is None else (" [PASS]" if passed else (" [FAIL]" if required else " [WARN]"))
        print(f"{name} = {fmt(value)}{tag}", file=out)
    print(f"feasible = {fmt(rep.feasible)}", file=out)
    print(f"failed = {','.join(rep.failed) or 'none'}", file=out)
    if not rep.feasible:
        try:
            lam, lam_f, ref = _reference_excursion(sc, rep.envelope)
        except SatguardError:
            return rows
        ratio = ell_excursion(tr) / ref if ref > 0 else math.inf
        print(f"reference_gains = {fmt(lam)},{fmt(lam_f)}", file=out)
        print(f"ell_excursion_ratio = {fmt(ratio)} (proxy threshold {fmt(EXCURSION_RATIO_PROXY)})", file=out)
    return rows


def _simulate_sc(sc, out):
    ec, _ = _constants(sc)
    lam, lam_f, auto = resolve_gains(sc, ec)
    rep = build_report(sc, lam, lam_f)
    print(f"lambda = {fmt(lam)}", file=out)
    print(f"lambda_f = {fmt(lam_f)}", file=out)
    print(f"gains_auto_picked = {fmt(auto)}", file=out)
    tr = simulate(sc.plant_truth(), _gains(sc, lam, lam_f), sc.sim_config())
    return tr, rep


def cmd_simulate(args, out=None):
    out = out or sys.stdout
    sc = load_config(args.config)
    try:
        tr, rep = _simulate_sc(sc, out)
    except IntegrationFault as exc:
        if args.out and getattr(exc, "trajectory", None) is not None:
            exc.trajectory.to_csv(args.out)
        print(f"integration fault: {exc}", file=out)
        return EXIT_FAULT
    if args.out:
        tr.to_csv(args.out)
        print(f"trajectory = {args.out}", file=out)
    _summary(sc, tr, rep, out)
    return EXIT_OK


def cmd_verify(args, out=None):
    out = out or sys.stdout
    sc = load_config(args.config)
    try:
        tr, rep = _simulate_sc(sc, out)
    except IntegrationFault as exc:
        print(f"integration fault: {exc}", file=out)
        return EXIT_FAULT
    for k, ok in rep.flags.items():
        print(f"precondition_{k} = {fmt(ok)} [{'PASS' if ok else 'FAIL'}]", file=out)
    rows = _summary(sc, tr, rep, out)
    passed = rep.feasible and all(p for _, _, req, p in rows if req)
    print(f"verdict = {'PASS' if passed else 'FAIL'}", file=out)
    return EXIT_OK if passed else EXIT_INFEASIBLE


def cmd_sweep(args, out=None):
    out = out or sys.stdout
    sc = load_config(args.config)
    ec, _ = _constants(sc)
    cap = lambda_cap(sc.envelope, ec)
    if math.isinf(cap) and (args.lambda_min is None or args.lambda_max is None):
        raise ConfigError("", "lambda range required when 1/(alpha_max c1) is unbounded")
    lo = args.lambda_min if args.lambda_min is not None else 1e-3 * cap
    hi = args.lambda_max if args.lambda_max is not None else 0.999 * cap
    if args.points < 1:
        raise ConfigError("", "--points must be >= 1")
    grid = np.linspace(lo, hi, args.points) if args.points > 1 else np.array([lo])
    rows = sweep(sc.envelope, ec, grid, sc.envelope.g_rate_bound)
    target = open(args.out, "w", newline="") if args.out else out
    try:
        writer = csv.writer(target, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for r in rows:
            writer.writerow([fmt(r[c]) for c in SWEEP_COLUMNS])
    finally:
        if args.out:
            target.close()
    n_ok = sum(r["feasible"] for r in rows)
    if ec.c0 < sc.envelope.rho_min:
        print(f"lambda_star = {fmt(lambda_star(sc.envelope, ec))}", file=sys.stderr)
    print(f"feasible_points = {n_ok}/{len(rows)}", file=sys.stderr)
    return EXIT_OK if n_ok else EXIT_INFEASIBLE


def build_parser():
    parser = argparse.ArgumentParser(prog="satguard", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("tune", help="print the feasibility report")
    p.add_argument("config")
    p.set_defaults(func=cmd_tune)
    p = sub.add_parser("simulate", help="run the closed loop and write a CSV trajectory")
    p.add_argument("config")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("sweep", help="tabulate phi, lambda*phi, delta_u and error bound over a lambda grid")
    p.add_argument("config")
    p.add_argument("--lambda-min", type=float)
    p.add_argument("--lambda-max", type=float)
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("verify", help="simulate and check every applicable claim")
    p.add_argument("config")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FeasibilityError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except InfeasibleGainError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConfigError, InputError, SatguardError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

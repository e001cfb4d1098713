"""Command-line front end.

Exit codes: 0 success, 1 validation tolerance missed, 2 inconclusive run,
64 usage error, 65 data/parse error, 70 internal numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import engine, model, protocol, reduced
from .errors import Ec3Error, InfeasibleError, InstanceError, NumericalError, OracleGuardError
from .io import atomic_write_text, csv_text
from .operators import DEFAULT_C, DEFAULT_OMEGA, clause_hamiltonian

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_INCONCLUSIVE = 2
EXIT_USAGE = 64
EXIT_DATA = 65
EXIT_NUMERICAL = 70

VALIDATE_MAX_N = 12


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fraction(text: str) -> Fraction:
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational 'a/b': {text!r}") from None
    if not 0 <= value <= 1:
        raise argparse.ArgumentTypeError(f"probability must lie in [0, 1], got {text}")
    return value


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return value


def _nonneg_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return value


def _load(path: str) -> model.Ec3Instance:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InstanceError(f"cannot read {path}: {exc.strerror}") from None
    return model.parse_instance(text)


def _emit(text: str, out: str | None):
    if out:
        atomic_write_text(out, text)
    else:
        sys.stdout.write(text)


# -- commands -----------------------------------------------------------------

def cmd_oracle(args) -> int:
    inst = _load(args.instance)
    seq = model.p_sequence(inst)
    print(f"n = {inst.n}")
    print(f"M = {inst.m}")
    print("N_k: " + " ".join(str(x) for x in seq.counts))
    print("p_k: " + " ".join("undefined" if v is None else str(v) for v in seq.values))
    unsat = seq.unsat_round
    if unsat is not None:
        print(f"UNSAT (N_{unsat} = 0)")
        return EXIT_OK
    sols = model.brute_force_solutions(inst)
    print(f"solutions ({len(sols)}):")
    for a in sols:
        print(f"  {a}")
    return EXIT_OK


def _protocol_params(args) -> protocol.ProtocolParams:
    return protocol.ProtocolParams(
        omega=args.omega, c=args.c, t_mode=args.t_mode,
        purify_successes=args.purify_successes, max_trials_per_round=args.max_trials,
        seed=args.seed, t_max=args.t_max, t_points=args.t_points,
        trotter_steps=args.trotter_steps, trotter_order=args.trotter_order)


def cmd_solve(args) -> int:
    inst = _load(args.instance)
    params = _protocol_params(args)
    result, elapsed = protocol.timed_run(inst, params)
    report = protocol.build_report(inst, params, result, elapsed)
    report["config"] = {"command": "solve", "instance_path": args.instance,
                        **params.to_json()}
    _emit(json.dumps(report, indent=2, sort_keys=True) + "\n", args.out)
    summary = f"status: {result.status}"
    if result.solutions:
        summary += "; " + ", ".join(f"{a} ({w:.6f})" for a, w in result.solutions)
    print(summary, file=sys.stderr)
    return EXIT_INCONCLUSIVE if result.status == protocol.INCONCLUSIVE else EXIT_OK


def cmd_figures(args) -> int:
    params = reduced.ReducedParams(args.c, args.p)
    grid = np.linspace(0.0, args.tmax, args.points) if args.figure in (2, 3) else None
    header, rows = reduced.emit_figure_data(args.figure, params, grid)
    if args.figure == 3:
        header, rows = ("t", "c2_sq"), [(t, b) for t, _, b in rows]
    _emit(csv_text(header, rows), args.out)
    return EXIT_OK


def _full_round_series(inst, k, c, omega, grid):
    oracle = protocol.round_oracle(inst, k)
    h = clause_hamiltonian(inst.clauses[k - 1], inst.n, omega, c)
    psi0 = protocol.prepare_round_input(oracle.phi_prev)
    rows = []
    for t in grid:
        v = engine.evolve_exact(h, psi0, float(t))
        d = engine.subspace_decompose(v, oracle.phi_prev, oracle.phi_sol, oracle.phi_nonsol)
        rows.append((d, engine.probe_ground_population(v)))
    return oracle, rows


def validate_round(inst: model.Ec3Instance, k: int, c: float, grid, omega=DEFAULT_OMEGA):
    """Full-vs-reduced comparison for one round; returns a summary dict."""
    if inst.n > VALIDATE_MAX_N:
        raise OracleGuardError(f"full-simulation validation limited to n <= {VALIDATE_MAX_N}")
    if not 1 <= k <= inst.m:
        raise UsageError(f"round must lie in 1..{inst.m}")
    oracle, rows = _full_round_series(inst, k, c, omega, grid)
    if oracle.p_k is None:
        raise InstanceError(f"round {k} follows an UNSAT prefix; nothing to validate")
    full = np.array([[d.c0, d.c1, d.c2] for d, _ in rows])
    leak = np.array([d.leakage for d, _ in rows])
    decay = np.array([pg for _, pg in rows])
    rp = reduced.ReducedParams(c, oracle.p_k)
    red = reduced.amplitudes3(rp, grid)
    exact = reduced.exact_round_amplitudes(rp, grid)
    red_decay = np.sum(np.abs(red[:, 1:]) ** 2, axis=1)
    return {
        "round": k, "p_k": str(oracle.p_k), "c": c, "points": len(grid),
        "t_max": float(grid[-1]),
        "max_dev_reduced3": float(np.max(np.abs(full - red))),
        "max_dev_two_block": float(np.max(np.abs(full - exact))),
        "max_leakage": float(np.max(leak)),
        "max_decay_full": float(np.max(decay)),
        "max_decay_reduced3": float(np.max(red_decay)),
        "decay_ceiling": reduced.offres_ceiling(c),
        "series": (grid, full, red, leak, decay),
    }


def cmd_validate(args) -> int:
    inst = _load(args.instance)
    grid = np.linspace(0.0, args.t_max, args.points)
    res = validate_round(inst, args.round, args.c, grid, args.omega)
    for key in ("round", "p_k", "c", "points", "t_max", "max_dev_reduced3",
                "max_dev_two_block", "max_leakage", "max_decay_full",
                "max_decay_reduced3", "decay_ceiling"):
        print(f"{key}: {res[key]}")
    if args.out:
        times, full, _, leak, decay = res["series"]
        pops = np.abs(full) ** 2
        engine.write_timeseries(args.out, [
            (float(t), float(a), float(b), float(cc), float(lk), float(pg))
            for t, (a, b, cc), lk, pg in zip(times, pops, leak, decay)])
    if Fraction(res["p_k"]) == 0:
        ok = (res["max_decay_full"] <= res["decay_ceiling"] + protocol.CEILING_SLACK
              and res["max_decay_reduced3"] <= res["decay_ceiling"] + protocol.CEILING_SLACK)
    else:
        ok = res["max_dev_reduced3"] < args.tol_dev and res["max_leakage"] < args.tol_leak
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_VALIDATION


def cmd_gen(args) -> int:
    inst = model.random_instance(args.n, args.m, args.seed, args.satisfiable)
    text = f"c random n={args.n} m={args.m} seed={args.seed}\n" + model.serialize_instance(inst)
    _emit(text, args.out)
    return EXIT_OK


def trotter_table(inst, k, c, t, order, steps_list, omega=DEFAULT_OMEGA):
    oracle = protocol.round_oracle(inst, k)
    h = clause_hamiltonian(inst.clauses[k - 1], inst.n, omega, c)
    psi0 = protocol.prepare_round_input(oracle.phi_prev)
    ref = engine.evolve_exact(h, psi0, t)
    rows = []
    for steps in steps_list:
        err = float(np.max(np.abs(engine.evolve_trotter(h, psi0, t, steps, order) - ref)))
        rows.append((steps, err))
    return rows


def cmd_trotter_bench(args) -> int:
    inst = _load(args.instance)
    if not 1 <= args.round <= inst.m:
        raise UsageError(f"round must lie in 1..{inst.m}")
    p_k = model.p_sequence(inst).values[args.round - 1]
    t = args.t if args.t is not None else protocol.resonance_evolution_time(p_k, args.c)
    steps = [int(s) for s in args.steps.split(",")]
    if any(s < 1 for s in steps):
        raise UsageError("steps must be positive")
    rows = trotter_table(inst, args.round, args.c, t, args.trotter_order, steps, args.omega)
    out = [(s, e, "" if i == 0 else rows[i - 1][1] / e) for i, (s, e) in enumerate(rows)]
    text = csv_text(("steps", "max_abs_error", "ratio_vs_previous"), out)
    _emit(text, args.out)
    return EXIT_OK


# -- wiring -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ec3r", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def physics(p, with_omega=True):
        p.add_argument("--c", type=_positive_float, default=DEFAULT_C)
        if with_omega:
            p.add_argument("--omega", type=_positive_float, default=DEFAULT_OMEGA)

    p = sub.add_parser("oracle", help="exact classical analysis of an instance")
    p.add_argument("instance")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("solve", help="run the full protocol and write a JSON report")
    p.add_argument("instance")
    physics(p)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--t-mode", choices=protocol.T_MODES, default=protocol.TIME_SCAN)
    p.add_argument("--trotter-steps", type=_positive_int, default=None)
    p.add_argument("--trotter-order", type=int, choices=(1, 2), default=2)
    p.add_argument("--purify-successes", type=_nonneg_int, default=None)
    p.add_argument("--max-trials", type=_positive_int, default=2000)
    p.add_argument("--t-max", type=_positive_float, default=None)
    p.add_argument("--t-points", type=_positive_int, default=600)
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("figures", help="CSV data for the reduced-model figures")
    p.add_argument("figure", type=int, choices=(2, 3, 4))
    physics(p, with_omega=False)
    p.add_argument("--p", type=_fraction, default=reduced.FIG_P)
    p.add_argument("--tmax", type=_positive_float, default=1200.0)
    p.add_argument("--points", type=_positive_int, default=2001)
    p.add_argument("--out")
    p.set_defaults(func=cmd_figures)

    p = sub.add_parser("validate", help="full simulation vs reduced model for one round")
    p.add_argument("instance")
    physics(p)
    p.add_argument("--round", type=_positive_int, default=1)
    p.add_argument("--t-max", type=_positive_float, default=1200.0)
    p.add_argument("--points", type=_positive_int, default=200)
    p.add_argument("--tol-dev", type=_positive_float, default=5e-2)
    p.add_argument("--tol-leak", type=_positive_float, default=5e-3)
    p.add_argument("--out", help="time-series CSV")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("gen", help="seeded random instance")
    p.add_argument("n", type=int)
    p.add_argument("m", type=int)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--satisfiable", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("trotter-bench", help="Trotter error vs step count")
    p.add_argument("instance")
    physics(p)
    p.add_argument("--round", type=_positive_int, default=1)
    p.add_argument("--t", type=_positive_float, default=None)
    p.add_argument("--trotter-order", type=int, choices=(1, 2), default=2)
    p.add_argument("--steps", default="256,512,1024,2048")
    p.add_argument("--out")
    p.set_defaults(func=cmd_trotter_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ec3r: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InstanceError, OracleGuardError, InfeasibleError) as exc:
        print(f"ec3r: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, ArithmeticError) as exc:
        print(f"ec3r: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (Ec3Error, ValueError) as exc:
        print(f"ec3r: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

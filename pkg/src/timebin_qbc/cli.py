"""Command-line entry point: ``qbc {run,attack,sweep,verify-equivalence,holding-time}``.

The output directory defaults to ``$QBC_OUT_DIR`` or the current directory.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import analysis
from .adversary import MAX_OPTIMIZER_DIM, OptimizerConfig, bob_discrimination_attack, optimal_cheat_probability, omega_attack
from .protocol import ProtocolParams, Verdict, run_protocol
from .timebin import equivalence_sweep
from .transport import AliceConfig, BobConfig, Channel, run_session

EXIT_ACCEPTED, EXIT_REJECTED, EXIT_ERROR = 0, 1, 2


def _out_dir(args) -> Path:
    path = Path(args.out or os.environ.get("QBC_OUT_DIR") or ".")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _bit(text: str) -> int:
    if text not in ("0", "1"):
        raise argparse.ArgumentTypeError("bit must be 0 or 1")
    return int(text)


def _non_negative(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return value


def _params_from(args) -> ProtocolParams:
    return ProtocolParams.build(
        args.rounds,
        args.n,
        epsilon=args.epsilon,
        accept_z=args.accept_z,
        seed=args.seed,
        slot_spacing=args.slot_spacing,
        loss_fraction=args.loss_fraction,
    )


def _add_protocol_flags(p: argparse.ArgumentParser):
    p.add_argument("--rounds", type=int, default=100, help="number of photons s (default 100)")
    p.add_argument("--n", type=int, default=64, help="dimension: slot count + 1 (default 64)")
    p.add_argument("--epsilon", type=float, default=0.0, help="calibrated error rate (default 0)")
    p.add_argument("--accept-z", type=float, default=3.0, help="acceptance slack in standard deviations (default 3)")
    p.add_argument("--loss-fraction", type=float, default=0.5, help="share of epsilon that is photon loss (default 0.5)")
    p.add_argument("--slot-spacing", type=int, default=1, help="ticks between delay slots (default 1)")
    p.add_argument("--seed", type=_non_negative, default=0)


def cmd_run(args) -> int:
    params = _params_from(args)
    problems = params.problems()
    if problems:
        print("error: " + "; ".join(problems), file=sys.stderr)
        return EXIT_ERROR
    unveil = args.bit if args.unveil_bit is None else args.unveil_bit
    if args.two_process:
        _, transcript = run_session(
            AliceConfig(params, args.bit, unveil), BobConfig(params, args.tau_hold), Channel(mode="socket")
        )
    else:
        transcript = run_protocol(params, args.bit, unveil, args.tau_hold)
    out = _out_dir(args) / "transcript.txt"
    out.write_text(transcript.to_text())
    print(f"verdict: {transcript.verdict.value} ({transcript.n_correct}/{params.s} rounds correct)")
    if transcript.reason:
        print(f"reason: {transcript.reason}")
    return {Verdict.ACCEPTED: EXIT_ACCEPTED, Verdict.REJECTED: EXIT_REJECTED}.get(transcript.verdict, EXIT_ERROR)


def cmd_attack(args) -> int:
    if not (args.concealment or args.binding):
        args.concealment = True
    if any(n < 2 for n in args.n):
        print("error: n must be >= 2", file=sys.stderr)
        return EXIT_ERROR
    if args.binding and not args.omega_only and any(n > MAX_OPTIMIZER_DIM for n in args.n):
        print(f"error: binding optimizer supports n <= {MAX_OPTIMIZER_DIM}", file=sys.stderr)
        return EXIT_ERROR
    out = _out_dir(args)
    if args.concealment:
        rows = [(n, *bob_discrimination_attack(n)) for n in args.n]
        analysis.write_csv(out / "concealment.csv", analysis.CONCEALMENT_HEADER, rows)
        for n, td, hel in rows:
            print(f"concealment n={n}: trace_distance={td:.12g} helstrom={hel:.12g}")
    if args.binding:
        cfg = OptimizerConfig(restarts=args.restarts, seed=args.seed)
        rows = []
        for n in args.n:
            rows.append((n, *omega_attack(n), "omega"))
            if not args.omega_only:
                res = optimal_cheat_probability(n, cfg)
                rows.append((n, res.p0, res.p1, res.p_avg, "optimized"))
        analysis.write_csv(out / "binding.csv", analysis.BINDING_HEADER, rows)
        for n, p0, p1, pavg, strategy in rows:
            print(f"binding n={n} [{strategy}]: p0={p0:.9f} p1={p1:.9f} p_avg={pavg:.9f}")
    return 0


def cmd_sweep(args) -> int:
    values = [float(v) if args.variable == "epsilon" else int(v) for v in args.values]
    try:
        spec = analysis.SweepSpec(
            args.variable, values, fixed=_params_from(args), trials=args.trials, seed=args.seed, tau_hold=args.tau_hold
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    out = _out_dir(args)
    if args.variable == "n":
        rows = analysis.concealment_sweep(spec)
        analysis.write_csv(out / "concealment.csv", analysis.CONCEALMENT_HEADER, rows)
        for row in rows:
            print("concealment " + " ".join(f"{h}={v}" for h, v in zip(analysis.CONCEALMENT_HEADER, row)))
    rows = analysis.acceptance_sweep(spec, alice_b=args.bit, unveil_b=args.unveil_bit)
    analysis.write_csv(out / "acceptance.csv", analysis.ACCEPTANCE_HEADER, rows)
    for row in rows:
        print("acceptance " + " ".join(f"{h}={v}" for h, v in zip(analysis.ACCEPTANCE_HEADER, row)))
    return 0


def cmd_verify_equivalence(args) -> int:
    if args.n < 2 or args.samples < 1:
        print("error: need --n >= 2 and --samples >= 1", file=sys.stderr)
        return EXIT_ERROR
    bad = equivalence_sweep(args.n, args.samples, args.seed, bs_sign=-1 if args.flip_bs_sign else 1)
    if bad:
        for m in bad[: args.max_report]:
            print(f"MISMATCH b={m.b} i={m.i} t_j={m.t_j} tau_hold={m.tau_hold} stage={m.stage}: {m.detail}")
        print(f"{len(bad)} mismatches")
        return 1
    print(f"equivalence holds for n={args.n}: {2 * (args.n - 1)} states x {args.samples} settings")
    return 0


def cmd_holding_time(args) -> int:
    try:
        for d in args.distance:
            print(f"relativistic d={d:g} km: {analysis.format_seconds(analysis.relativistic_holding_time(d))}")
        if args.fiber_length is not None:
            t = analysis.fiber_holding_time(args.fiber_length, args.velocity)
            print(f"fiber {args.fiber_length:g} km at {args.velocity:g} km/s: {analysis.format_seconds(t)}")
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    rows = analysis.comparison_table()
    analysis.write_csv(_out_dir(args) / "holding.csv", analysis.HOLDING_HEADER, rows)
    for scheme, dist, t in rows:
        where = "any distance" if dist is None else f"{dist:g} km"
        print(f"{scheme:45s} {where:>14s} {analysis.format_seconds(t):>10s}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qbc", description="Time-bin quantum bit commitment simulator")
    parser.add_argument("--out", help="output directory (default $QBC_OUT_DIR or .)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the commit/unveil protocol")
    _add_protocol_flags(p)
    p.add_argument("--bit", type=_bit, default=0, help="bit Alice commits")
    p.add_argument("--unveil-bit", type=_bit, help="bit Alice announces (default: --bit)")
    p.add_argument("--tau-hold", type=_non_negative, default=0, help="holding time in ticks")
    p.add_argument("--two-process", action="store_true", help="run Bob in a separate process over TCP")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("attack", help="concealment and binding attack analysis")
    p.add_argument("--n", type=int, nargs="+", default=[16])
    p.add_argument("--concealment", action="store_true", help="Bob's discrimination attack")
    p.add_argument("--binding", action="store_true", help="Alice's steering attacks")
    p.add_argument("--omega-only", action="store_true", help="skip the optimizer, report the omega attack")
    p.add_argument("--restarts", type=int, default=64)
    p.add_argument("--seed", type=_non_negative, default=0)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("sweep", help="parameter sweeps")
    _add_protocol_flags(p)
    p.add_argument("--variable", choices=("n", "s", "epsilon"), required=True)
    p.add_argument("--values", nargs="+", required=True)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--bit", type=_bit, default=0)
    p.add_argument("--unveil-bit", type=_bit)
    p.add_argument("--tau-hold", type=_non_negative, default=0)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify-equivalence", help="check the time-bin / abstract-state equivalence")
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=_non_negative, default=0)
    p.add_argument("--max-report", type=int, default=10)
    p.add_argument("--flip-bs-sign", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify_equivalence)

    p = sub.add_parser("holding-time", help="holding-time comparison")
    p.add_argument("--distance", type=float, nargs="*", default=[], help="relativistic agent distance(s) in km")
    p.add_argument("--fiber-length", type=float, help="fiber storage ring length in km")
    p.add_argument("--velocity", type=float, default=analysis.SPEED_OF_LIGHT_KM_S, help="light speed in fiber, km/s")
    p.set_defaults(func=cmd_holding_time)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end: gen, run, sweep, verify, occupancy.

Exit codes: 0 success, 1 usage, 2 engine diagnostic, 3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from typing import Optional, Sequence

from .analysis import (
    OccupancyGuardError,
    check_theorem1,
    emit_report,
    fitted_constant,
    occupancy_exact,
    occupancy_mc,
)
from .core import (
    ReduceRule,
    WorkloadError,
    compute_parameters,
    expand_step,
    load_workload,
    save_workload,
)
from .machine import ConfigError, EngineDiagnostic, MachineConfig
from .pipeline import REMAPS, SCHEDULERS, SHUFFLES, RunConfig, make_row, run_step
from .sched_bsp import PreconditionWarning
from .shuffle import ShuffleError
from .workloads import KINDS, GeneratorSpec, generate

EXIT_OK, EXIT_USAGE, EXIT_ENGINE, EXIT_VERIFY = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _default_seed() -> int:
    try:
        return int(os.environ.get("MRSIM_SEED", "0"))
    except ValueError:
        raise UsageError("MRSIM_SEED must be an integer") from None


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("list must not be empty")
    return values


def _choice_list(choices):
    def parse(text: str) -> list[str]:
        values = [v.strip() for v in text.split(",") if v.strip()]
        bad = [v for v in values if v not in choices]
        if bad or not values:
            raise argparse.ArgumentTypeError(f"choose from {', '.join(choices)}")
        return values

    return parse


def _parse_strike(text: Optional[str]) -> tuple[float, str]:
    if text is None:
        return 2.0, "known"
    parts = text.split(",")
    try:
        b = float(parts[0])
    except ValueError:
        raise UsageError(f"bad --strike value {text!r}") from None
    mode = parts[1] if len(parts) > 1 else "known"
    mode = {"est": "estimated", "estimated": "estimated", "known": "known"}.get(mode)
    if mode is None or len(parts) > 2 or not b > 1:
        raise UsageError("--strike takes b[,known|est] with b > 1")
    return b, mode


def _add_generator_flags(ap: argparse.ArgumentParser, required: bool) -> None:
    ap.add_argument("--kind", choices=KINDS, required=required)
    ap.add_argument("--n", type=int, required=required)
    ap.add_argument("--keys", type=int, default=None, help="key count (default n)")
    ap.add_argument("--theta", type=float, default=1.0, help="zipf exponent")
    ap.add_argument("--heavy", type=int, default=None, help="sources of the heavy key")
    ap.add_argument("--degree", type=int, default=3, help="expander degree")
    ap.add_argument("--gen-p", type=int, default=1, help="PE count for round-robin placement")
    ap.add_argument("--alpha", type=int, default=1, help="reduce cost per group")
    ap.add_argument("--beta", type=int, default=0, help="reduce cost per input word")
    ap.add_argument("--out-sizes", type=_int_list, default=[1], help="reduce output sizes")


def _spec_from_args(args, seed: int) -> GeneratorSpec:
    return GeneratorSpec(
        kind=args.kind,
        n=args.n,
        key_count=args.keys,
        zipf_theta=args.theta,
        heavy_volume=args.heavy,
        degree=args.degree,
        p=args.gen_p,
        seed=seed,
        reduce_rule=ReduceRule(args.alpha, args.beta, tuple(args.out_sizes)),
    )


def _add_machine_flags(ap: argparse.ArgumentParser) -> None:
    ap.add_argument("--L", type=float, default=1.0, help="latency per message/superstep")
    ap.add_argument("--g", type=float, default=1.0, help="time per communicated word")
    ap.add_argument("--tau", type=float, default=2.0, help="remap trigger factor")
    ap.add_argument("--strike", default=None, help="b[,known|est] for steal-strikes")
    ap.add_argument("--no-disperse", action="store_true", help="keep all reducer outputs local (bsp)")
    ap.add_argument("--max-events", type=int, default=50_000_000, help="event budget of the stealing engine")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="mrsim", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a workload file")
    _add_generator_flags(g, required=True)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("-o", "--out", required=True)

    r = sub.add_parser("run", help="run one configuration")
    r.add_argument("--workload", required=True)
    r.add_argument("--scheduler", choices=SCHEDULERS, default="bsp")
    r.add_argument("--shuffle", choices=SHUFFLES, default="prefix")
    r.add_argument("--remap", choices=REMAPS, default="off")
    r.add_argument("--p", type=int, required=True)
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("-o", "--out", default=None)
    _add_machine_flags(r)

    s = sub.add_parser("sweep", help="run the product of p values, seeds and schedulers")
    s.add_argument("--workload", default=None)
    _add_generator_flags(s, required=False)
    s.add_argument("--p", type=_int_list, required=True)
    s.add_argument("--seeds", type=int, default=5, help="number of seeds")
    s.add_argument("--seed", type=int, default=None, help="first seed")
    s.add_argument("--schedulers", type=_choice_list(SCHEDULERS), default=list(SCHEDULERS))
    s.add_argument("--shuffle", type=_choice_list(SHUFFLES), default=["prefix"])
    s.add_argument("--remap", type=_choice_list(REMAPS), default=["off"])
    s.add_argument("-o", "--out", default=None)
    s.add_argument("--summary", default=None, help="write fitted constants as JSON")
    s.add_argument("--plot", default=None, help="write an SVG of bottlenecks vs p")
    _add_machine_flags(s)

    v = sub.add_parser("verify", help="run an invariant suite")
    v.add_argument("--suite", required=True)
    v.add_argument("--instances", type=int, default=None)
    v.add_argument("--seed", type=int, default=None)

    o = sub.add_parser("occupancy", help="expected max bin load of b balls in p bins")
    o.add_argument("--b", type=float, required=True)
    o.add_argument("--p", type=int, required=True)
    o.add_argument("--trials", type=int, default=100_000)
    o.add_argument("--seed", type=int, default=None)
    o.add_argument("--mc", action="store_true", help="force Monte Carlo")
    return ap


def _run_config(args, scheduler, shuffle, remap, p, seed) -> RunConfig:
    b, mode = _parse_strike(args.strike)
    return RunConfig(
        MachineConfig(p, args.L, args.g, seed),
        scheduler=scheduler,
        shuffle=shuffle,
        remap=remap,
        tau=args.tau,
        strike_b=b,
        strike_mode=mode,
        disperse_outputs=not args.no_disperse,
        max_events=args.max_events,
    )


def _write(text: str, path: Optional[str]) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_gen(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    step = generate(_spec_from_args(args, seed))
    save_workload(args.out, [step])
    prm = compute_parameters(step)
    print(f"wrote {args.out}: n={len(step.elements)} w={prm.w} w_hat={prm.w_hat} m={prm.m} m_hat={prm.m_hat}")
    return EXIT_OK


def cmd_run(args) -> int:
    if args.p < 1:
        raise UsageError("--p must be at least 1")
    seed = args.seed if args.seed is not None else _default_seed()
    # --strike on the plain stealing scheduler turns strikes on
    sched = "steal-strikes" if args.strike is not None and args.scheduler == "steal" else args.scheduler
    rows = []
    for step in load_workload(args.workload):
        trace = expand_step(step)
        rc = _run_config(args, sched, args.shuffle, args.remap, args.p, seed)
        report = run_step(trace, None, rc)
        rows.append(make_row(rc, compute_parameters(trace), report))
    _write(emit_report(rows), args.out)
    return EXIT_OK


def _sweep_traces(args, seed):
    if args.workload:
        return [expand_step(s) for s in load_workload(args.workload)]
    if args.kind is None or args.n is None:
        raise UsageError("sweep needs --workload or --kind and --n")
    return [expand_step(generate(_spec_from_args(args, seed)))]


def cmd_sweep(args) -> int:
    if any(p < 1 for p in args.p) or args.seeds < 1:
        raise UsageError("p values and --seeds must be positive")
    base = args.seed if args.seed is not None else _default_seed()
    traces = _sweep_traces(args, base)
    rows, checks = [], {}
    for trace in traces:
        params = compute_parameters(trace)
        for sched in args.schedulers:
            for sh in args.shuffle:
                for rm in args.remap:
                    for p in args.p:
                        for seed in range(base, base + args.seeds):
                            rc = _run_config(args, sched, sh, rm, p, seed)
                            report = run_step(trace, None, rc)
                            rows.append(make_row(rc, params, report))
                            for c in check_theorem1(report, params, p):
                                checks.setdefault((sched, sh, rm, c.name), []).append(c)
    _write(emit_report(rows), args.out)
    summary = {
        "/".join(k[:3]) + ":" + k[3]: round(fitted_constant(v), 4) for k, v in sorted(checks.items())
    }
    for name, c in summary.items():
        print(f"fitted C {name} = {c}", file=sys.stderr)
    if args.summary:
        with open(args.summary, "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
    if args.plot:
        plot_sweep(rows, args.plot)
    return EXIT_OK


def plot_sweep(rows, path: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6))
    series: dict = {}
    for r in rows:
        series.setdefault((r["scheduler"], r["shuffle"], r["remap"]), {}).setdefault(r["p"], []).append(r)
    for label, by_p in sorted(series.items()):
        ps = sorted(by_p)
        for ax, col in zip(axes, ("bottleneck_work", "bottleneck_comm")):
            ys = [sum(float(r[col]) for r in by_p[p]) / len(by_p[p]) for p in ps]
            ax.plot(ps, ys, marker="o", label="/".join(label))
    for ax, title in zip(axes, ("bottleneck work", "bottleneck communication")):
        ax.set_xscale("log", base=2)
        ax.set_yscale("log")
        ax.set_xlabel("p")
        ax.set_title(title)
    axes[0].legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def cmd_verify(args) -> int:
    from .verify import SUITES

    if args.suite not in SUITES:
        raise UsageError(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)}")
    kw = {}
    if args.instances is not None:
        kw[list(SUITES[args.suite].__code__.co_varnames)[0]] = args.instances
    if args.seed is not None:
        kw["seed"] = args.seed
    results = SUITES[args.suite](**kw)
    ok = True
    for r in results:
        ok &= r.passed
        detail = f"  ({r.detail})" if r.detail and not r.passed else ""
        print(f"{'PASS' if r.passed else 'FAIL'} {args.suite}: {r.name}{detail}")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_occupancy(args) -> int:
    if args.p < 1 or args.b < 0 or args.trials < 1:
        raise UsageError("need p >= 1, b >= 0, trials >= 1")
    seed = args.seed if args.seed is not None else _default_seed()
    if not args.mc:
        try:
            val = occupancy_exact(args.b, args.p)
            print(f"exact {val} = {float(val):.6f}")
            return EXIT_OK
        except OccupancyGuardError:
            pass
    est = occupancy_mc(args.b, args.p, args.trials, seed)
    print(f"mc {est.mean:.6f} +- {est.stderr:.6f} ({est.trials} trials)")
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "run": cmd_run, "sweep": cmd_sweep, "verify": cmd_verify, "occupancy": cmd_occupancy}


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command is None:
        ap.print_usage(sys.stderr)
        return EXIT_USAGE
    warnings.simplefilter("default", PreconditionWarning)
    warnings.formatwarning = lambda msg, cat, *a, **k: f"warning: {msg}\n"
    try:
        return COMMANDS[args.command](args)
    except (UsageError, WorkloadError, ConfigError, OSError, ValueError) as exc:
        print(f"mrsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EngineDiagnostic, ShuffleError) as exc:
        print(f"mrsim: engine diagnostic: {exc}", file=sys.stderr)
        return EXIT_ENGINE


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point: ``stieltjes <subcommand> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import exprdsl, gcalc, scenarios
from .errors import ArgumentError, ConfigError, ExprSyntaxError, StieltjesError
from .solver import write_key_values

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from None


def _float_list(values) -> list[float] | None:
    if not values:
        return None
    return [v for group in values for v in group]


def _scalar(src: str, jump_src: str | None, cfg) -> gcalc.TwoBranchScalar:
    consts = cfg.constants
    cont = exprdsl.parse(src, 0, consts)
    jump = exprdsl.parse(jump_src, 0, consts) if jump_src else cont
    if isinstance(cont, exprdsl.Num) and isinstance(jump, exprdsl.Num):
        return gcalc.TwoBranchScalar.const(cont.value, jump.value)
    fc, fj = exprdsl.to_callable(cont), exprdsl.to_callable(jump)
    return gcalc.TwoBranchScalar(lambda t: fc(t, ()), lambda t: fj(t, ()))


def cmd_list(args) -> int:
    for bid, desc in scenarios.list_scenarios():
        print(f"{bid:<22} {desc}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = scenarios.load_scenario(args.scenario)
    cfg = scenarios.with_overrides(cfg, step=args.step, horizon=args.horizon, out=args.out,
                                   states=args.x0 or None, record_every=args.record_every)
    res = scenarios.run_scenario(cfg, workers=args.workers, certificate=not args.no_certificate)
    for i, (tr, err) in enumerate(zip(res.trajectories, res.errors)):
        if tr is None:
            print(f"traj_{i:03d} error {err}")
        else:
            print(f"traj_{i:03d} {tr.termination.value} omega={tr.omega:.15g}")
    if res.report is not None:
        print(f"verdict {res.report.verdict.value}")
    print(f"wrote {len(res.files)} files to {cfg.outputs.directory}")
    return EXIT_NUMERIC if all(tr is None for tr in res.trajectories) else EXIT_OK


def cmd_check(args) -> int:
    cfg = scenarios.load_scenario(args.scenario)
    cfg = scenarios.with_overrides(cfg, horizon=args.horizon, out=args.out)
    if cfg.candidate is None:
        raise ConfigError("scenario has no Lyapunov candidate", "candidate")
    out = Path(cfg.outputs.directory)
    out.mkdir(parents=True, exist_ok=True)
    report = scenarios.run_certificate(cfg, workers=args.workers)
    print(report.to_text())
    report.write(out / "certificate.txt")
    eps = _float_list(args.eps)
    t0_grid = _float_list(args.t0_grid)
    if eps or t0_grid or not args.no_probe:
        table = scenarios.run_probe(cfg, eps, t0_grid, workers=args.workers)
        print()
        print(table.to_text())
        (out / "probe.txt").write_text(table.to_text() + "\n")
        spread = {}
        for e, row in table.spread().items():
            for key, val in row.items():
                spread[f"eps={e:.6g}.{key}"] = "none" if val is None else val
        write_key_values(out / "probe_summary.txt", spread)
    return EXIT_OK


def cmd_integrate(args) -> int:
    cfg = scenarios.load_scenario(args.scenario)
    d = scenarios.build_derivator(cfg)
    h = _scalar(args.expr, args.jump_expr, cfg)
    print(format(gcalc.ls_integrate(d, h, args.a, args.b), ".15g"))
    return EXIT_OK


def cmd_gexp(args) -> int:
    cfg = scenarios.load_scenario(args.scenario)
    d = scenarios.build_derivator(cfg)
    p = _scalar(args.p, args.p_jump, cfg)
    print(format(gcalc.g_exp(d, p, args.a, args.b), ".15g"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stieltjes", description="Simulate Stieltjes differential "
                                 "equations and check Lyapunov certificates.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("list-scenarios", help="list builtin scenario ids")
    p.set_defaults(run=cmd_list)

    p = sub.add_parser("simulate", help="simulate a scenario and write CSV trajectories")
    p.add_argument("scenario", help="builtin id or path to a JSON scenario")
    p.add_argument("--step", type=float)
    p.add_argument("--horizon", type=float)
    p.add_argument("--out")
    p.add_argument("--x0", type=_floats, action="append",
                   help="initial state, e.g. --x0 9.5,0.12 (repeatable; replaces the config's states)")
    p.add_argument("--record-every", type=int)
    p.add_argument("--no-certificate", action="store_true")
    p.add_argument("--workers", type=int)
    p.set_defaults(run=cmd_simulate)

    p = sub.add_parser("check-stability", help="check the scenario's Lyapunov certificate")
    p.add_argument("scenario")
    p.add_argument("--eps", type=_floats, action="append")
    p.add_argument("--t0-grid", type=_floats, action="append")
    p.add_argument("--horizon", type=float)
    p.add_argument("--out")
    p.add_argument("--no-probe", action="store_true", help="skip the empirical delta/sigma probe")
    p.add_argument("--workers", type=int)
    p.set_defaults(run=cmd_check)

    for name, fn, label in (("integrate", cmd_integrate, "--expr"), ("gexp", cmd_gexp, "--p")):
        p = sub.add_parser(name, help="Lebesgue-Stieltjes integral" if name == "integrate"
                           else "g-exponential e_p(to, from)")
        p.add_argument("scenario", help="scenario whose derivator is used")
        p.add_argument(label, required=True, dest="expr" if name == "integrate" else "p",
                       help="expression in t and the scenario's constants")
        p.add_argument(label + "-jump", dest="jump_expr" if name == "integrate" else "p_jump",
                       help="value on jump times (defaults to the main expression)")
        p.add_argument("--from", dest="a", type=float, required=True)
        p.add_argument("--to", dest="b", type=float, required=True)
        p.set_defaults(run=fn)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.run(args)
    except (ConfigError, ExprSyntaxError, ArgumentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StieltjesError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

"""Time the compiled RK4 kernel against the pure-Python one.

Run with ``python benchmarks/bench_kernels.py [--repeat N]``. Each builtin
scenario is integrated from its first configured state with both backends;
the trajectories are also compared so a speedup never hides a divergence.
"""

import argparse
import time

import numpy as np

from stieltjes import kernels, scenarios
from stieltjes.solver import DomainSpec, solve_ivp

CASES = [
    ("linear_jumps", 10.0),
    ("arctan_impulse", 20.0),
    ("rational_decay", 20.0),
    ("allee_train", 100.0),
    ("cyanobacteria", 50.0),
]


def best_of(repeat, fn):
    best = float("inf")
    out = None
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - start)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if kernels.native_backend is None:
        print("compiled extension not built; only the python backend is available")
        return 1

    print(f"{'scenario':<16} {'steps':>8} {'python s':>10} {'native s':>10} {'speedup':>8}  identical")
    for bid, horizon in CASES:
        cfg = scenarios.load_scenario(bid)
        d = scenarios.build_derivator(cfg)
        f = scenarios.build_dsl_field(cfg)
        dom = scenarios.build_domain(cfg)
        dom = DomainSpec(dom.t0, min(horizon, dom.horizon), dom.center, dom.r0, dom.r)
        x0 = scenarios.initial_states(cfg)[0]
        run = {name: (lambda name=name: solve_ivp(d, f, dom, x0, step=cfg.step, record_every=100,
                                                  backend=name))
               for name in ("python", "native")}
        t_py, tr_py = best_of(args.repeat, run["python"])
        t_nat, tr_nat = best_of(args.repeat, run["native"])
        same = np.array_equal(tr_py.x_right, tr_nat.x_right)
        steps = round((dom.horizon - dom.t0) / cfg.step)
        print(f"{bid:<16} {steps:>8} {t_py:>10.3f} {t_nat:>10.3f} {t_py / t_nat:>7.1f}x  {same}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

"""Time the numba and numpy versions of each hot kernel side by side.

    python benchmarks/bench_kernels.py [--repeat 5] [--grid 256]

Both implementations are called directly, so the PHASECRYSTAL_NUMBA flag
does not matter here. The first numba call (compilation) is excluded.
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from phasecrystal import classical as C
from phasecrystal import dissipative as D
from phasecrystal.lattice import ModelParams


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(grid):
    g = D.init_state("coherent", 12.8 * grid / 256, grid, 1.0, 1.0, -1.0)
    pars = ModelParams(K=0.1, kappa=1e-4)
    j = D.choose_j_max(pars.K, pars.tau, 1.0)
    coef = D._kick_coefficients(g, pars, j)
    bases, wts = D._shift_stencils(1.0 / g.ds, j, D.DEFAULT_ORDER)
    rot = (g.w, -g.L, g.ds, math.cos(pars.tau), math.sin(pars.tau),
           math.exp(-0.5 * pars.kappa * pars.tau), 1e-4, D.DEFAULT_ORDER)

    st = C.three_body_state()
    K = -0.02 / math.pi
    lab = C.ClassicalPotentialSpec("contact-smoothed", eps=0.194)

    def poincare(impl):
        def run():
            y = np.concatenate([st.q, st.p])
            ox, op = np.zeros((11, 3)), np.zeros((11, 3))
            impl(y, K, math.pi / 2, 4, 10, lab._lab_pars(), 1e-10, 1e-12, 200000, ox, op)
        return run

    def rk4(impl):
        def run():
            y = np.concatenate([st.q, st.p])
            ox, op = np.zeros((51, 3)), np.zeros((51, 3))
            impl(y, 0.5 * K, C.DEFAULT_DT, 10000, 200, lab.averaged()._rwa_pars(), 1e-3, ox, op)
        return run

    return [
        (f"rotate {grid}^2", lambda: D._rotate_nb(*rot), lambda: D._rotate_np(*rot)),
        (f"kick {grid}^2", lambda: D._kick_nb(g.w, coef, bases, wts), lambda: D._kick_np(g.w, coef, bases, wts)),
        ("poincare 3 atoms x 10 periods", poincare(C._poincare_nb), poincare(C._poincare_np)),
        ("rk4 3 atoms x 50 periods", rk4(C._rk4_nb), rk4(C._rk4_np)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--grid", type=int, default=256)
    args = ap.parse_args()
    print(f"{'kernel':34s} {'numba [s]':>11s} {'numpy [s]':>11s} {'speed-up':>9s}")
    for name, nb, npy in cases(args.grid):
        a = best_of(nb, args.repeat)
        b = best_of(npy, max(1, args.repeat // 2))
        print(f"{name:34s} {a:11.4f} {b:11.4f} {b / a:8.1f}x")


if __name__ == "__main__":
    main()

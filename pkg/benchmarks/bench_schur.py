"""Compare the compiled Schur-complement kernel with the numpy fallback.

Run with ``python3 benchmarks/bench_schur.py [--repeat N]``. Two levels are
timed: the Schur assembly of every block group on random scaling matrices,
and complete solves of representative problems.
"""
from __future__ import annotations

import argparse
import time
import warnings

import numpy as np

from qsteer.assemblage import generate, pauli_measurements, random_assemblage
from qsteer.detect import _lhs_problem
from qsteer.hermat import werner
from qsteer.multipartite import ghz_state, white_noise_threshold
from qsteer.sdp import RedundantRowsWarning, kernels
from qsteer.sdp.ipm import ConicSolver


def _best(f, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        f()
        times.append(time.perf_counter() - t0)
    return min(times)


def schur_only(prob, repeat: int, rng) -> tuple[float, float, float]:
    """Time one full Schur assembly (all groups) with and without the kernel."""
    conic, _ = prob.compile()
    solver = ConicSolver(conic.A, conic.b, conic.c, conic.nfree, conic.block_dims)
    Ws = []
    for g in solver.groups:
        W = rng.normal(size=(len(g.blocks), g.n, g.n))
        Ws.append(W @ np.swapaxes(W, 1, 2))
    m = conic.A.shape[0]

    def run(flag):
        M = np.zeros((m, m))
        for g, W in zip(solver.groups, Ws):
            g.schur(W, M, flag)
        return M

    err = float(np.max(np.abs(run(True) - run(False))))
    return _best(lambda: run(True), repeat), _best(lambda: run(False), repeat), err


def end_to_end(f, repeat: int) -> tuple[float, float]:
    """Time a high-level call with the kernel switched on and off."""
    saved = kernels.HAVE_KERNEL
    try:
        kernels.HAVE_KERNEL = True
        t_k = _best(f, repeat)
        kernels.HAVE_KERNEL = False
        t_n = _best(f, repeat)
    finally:
        kernels.HAVE_KERNEL = saved
    return t_k, t_n


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if not kernels.HAVE_KERNEL:
        raise SystemExit("compiled kernel not built; run `pip install -e . --no-build-isolation`")
    warnings.simplefilter("ignore", RedundantRowsWarning)
    rng = np.random.default_rng(0)

    lhs_cases = {
        "LHS qubit, 3 settings": generate(werner(0.9), (2, 2), pauli_measurements("XYZ")),
        "LHS qutrit, 3 settings, 3 outcomes": random_assemblage(3, 3, 3, rng),
        "LHS qutrit, 4 settings, 2 outcomes": random_assemblage(3, 4, 2, rng),
    }
    print(f"{'Schur assembly':<40}{'cython [ms]':>12}{'numpy [ms]':>12}{'speed-up':>10}{'max diff':>10}")
    for name, a in lhs_cases.items():
        prob = _lhs_problem(a)[0]
        tk, tn, err = schur_only(prob, args.repeat, rng)
        print(f"{name:<40}{1e3 * tk:>12.3f}{1e3 * tn:>12.3f}{tn / tk:>10.1f}{err:>10.1e}")

    full_cases = {
        "LHS qutrit, 3 settings, 3 outcomes": lambda: _lhs_problem(lhs_cases["LHS qutrit, 3 settings, 3 outcomes"])[0].solve(),
        "GHZ MS threshold, 2 untrusted": lambda: white_noise_threshold(ghz_state(), "ms", 2),
        "GHZ GMS threshold, 1 untrusted": lambda: white_noise_threshold(ghz_state(), "gms", 1),
    }
    print(f"\n{'full solve':<40}{'cython [s]':>12}{'numpy [s]':>12}{'speed-up':>10}")
    for name, f in full_cases.items():
        tk, tn = end_to_end(f, args.repeat)
        print(f"{name:<40}{tk:>12.3f}{tn:>12.3f}{tn / tk:>10.1f}")


if __name__ == "__main__":
    main()

"""Compare the compiled and pure-Python kernels on sparse scaling instances.

Usage::

    python benchmarks/bench_kernels.py [--sizes 1000 100000] [--iters 20000]

Each backend runs the same sampled block sequence from the same starting
state; the script reports microseconds per iteration, the speedup and the
largest deviation between the two final iterates.
"""

import argparse
import time

import numpy as np

from smartcd._backend import compiled_kernels, python_kernels
from smartcd.problems import sparse_lasso_l1
from smartcd.schedule import make_rng
from smartcd.solver import SolverConfig, _KernelRunner, efficient_state, initialize


def _time_backend(mod, runner, state0, blocks, repeat):
    best = np.inf
    for _ in range(repeat):
        st = [a.copy() for a in (state0.u, state0.z, state0.r_uf, state0.r_zf,
                                 state0.r_uh, state0.r_zh)]
        sch = state0.schedule
        scal = np.array([sch.tau, sch.beta_next, state0.c, state0.c_prev])
        t0 = time.perf_counter()
        mod.efficient_loop(blocks, *runner.A, *runner.M, runner.normA2, runner.Lhat,
                           runner.w, runner.bvec, *runner.g, runner.h_kind, runner.h_lam,
                           runner.cvec, state0.ydot, runner.regime, runner.tau0, *st, scal)
        best = min(best, time.perf_counter() - t0)
    z = st[1]
    return best / len(blocks), z


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[1000, 100_000])
    ap.add_argument("--iters", type=int, default=20_000, help="iterations per timed run")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if compiled_kernels is None:
        print("compiled extension not built; only the Python backend is available")
    print(f"{'p':>8} {'backend':>8} {'us/iter':>10} {'speedup':>8} {'max|dz|':>9}")
    for p in args.sizes:
        prob = sparse_lasso_l1(p, seed=args.seed)
        setup = initialize(prob, SolverConfig())
        state = efficient_state(prob, setup)
        runner = _KernelRunner(prob, setup)
        blocks = np.ascontiguousarray(setup.sampler.draw(make_rng(args.seed), args.iters),
                                      dtype=np.int64)
        # the Python loop is slow; time it on a prefix and scale per iteration
        py_blocks = blocks[: max(1, args.iters // 50)]
        t_py, z_py = _time_backend(python_kernels, runner, state, py_blocks, 1)
        print(f"{p:>8} {'python':>8} {t_py * 1e6:>10.3f} {'':>8} {'':>9}")
        if compiled_kernels is not None:
            t_c, _ = _time_backend(compiled_kernels, runner, state, blocks, args.repeat)
            _, z_c = _time_backend(compiled_kernels, runner, state, py_blocks, 1)
            dev = float(np.max(np.abs(z_c - z_py)))
            print(f"{p:>8} {'cython':>8} {t_c * 1e6:>10.3f} {t_py / t_c:>8.0f} {dev:>9.1e}")


if __name__ == "__main__":
    main()

import os
import subprocess
import sys

import numpy as np
import pytest

from smartcd import _backend
from smartcd.problems import sparse_lasso_l1
from smartcd.schedule import make_rng
from smartcd.solver import SolverConfig, _KernelRunner, efficient_state, initialize

compiled = _backend.compiled_kernels
needs_ext = pytest.mark.skipif(compiled is None, reason="compiled extension not built")


def test_env_var_forces_python_fallback():
    env = dict(os.environ, SMARTCD_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import smartcd; print(smartcd.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_default_backend():
    expect = "cython" if compiled is not None and not os.environ.get("SMARTCD_PURE_PYTHON") \
        else "python"
    assert _backend.BACKEND == expect


@needs_ext
@pytest.mark.parametrize("regime", [0, 1])
def test_schedule_sequences_agree(regime):
    a = compiled.schedule_sequence(regime, 0.05, 5000, 2.0)
    b = _backend.python_kernels.schedule_sequence(regime, 0.05, 5000, 2.0)
    assert np.allclose(a[0], b[0], rtol=1e-14) and np.allclose(a[1], b[1], rtol=1e-14)


@needs_ext
def test_efficient_loop_agrees():
    prob = sparse_lasso_l1(300, nnz_per_col=4, seed=3)
    setup = initialize(prob, SolverConfig(beta1=0.5))
    runner = _KernelRunner(prob, setup)
    blocks = setup.sampler.draw(make_rng(1), 3000).astype(np.int64)
    results = []
    for mod in (compiled, _backend.python_kernels):
        st = efficient_state(prob, setup)
        scal = np.array([st.schedule.tau, st.schedule.beta_next, st.c, st.c_prev])
        done, ops = mod.efficient_loop(blocks, *runner.A, *runner.M, runner.normA2, runner.Lhat,
                                       runner.w, runner.bvec, *runner.g, runner.h_kind,
                                       runner.h_lam, runner.cvec, st.ydot, runner.regime,
                                       runner.tau0, st.u, st.z, st.r_uf, st.r_zf, st.r_uh,
                                       st.r_zh, scal)
        results.append((done, ops, st.z.copy(), st.u.copy(), scal.copy()))
    (d1, o1, z1, u1, s1), (d2, o2, z2, u2, s2) = results
    assert d1 == d2 == 3000 and o1 == o2 == 3000 * 8
    assert np.allclose(z1, z2, rtol=1e-11, atol=1e-13)
    assert np.allclose(u1, u2, rtol=1e-11, atol=1e-13)
    assert np.allclose(s1, s2, rtol=1e-13)


def test_bench_script_runs():
    root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    out = subprocess.run([sys.executable, os.path.join(root, "benchmarks", "bench_kernels.py"),
                          "--sizes", "200", "--iters", "500", "--repeat", "1"],
                         capture_output=True, text=True, check=True)
    assert "python" in out.stdout

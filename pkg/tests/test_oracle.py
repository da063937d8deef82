import numpy as np
import pytest

from smartcd.blocks import make_partition
from smartcd.functions import SeparablePart, SmoothPart
from smartcd.oracle import finite_diff_gradient, grid_minimize_scalar, long_run_reference
from smartcd.problems import degenerate_lp, tv_l1_least_squares
from smartcd.solver import SolverConfig, initialize, reference_state, reference_step


def test_grid_parabola():
    arg, val = grid_minimize_scalar(lambda u: (u - 3) ** 2, 0.0, 5.0, 1e-3)
    assert abs(arg - 3) <= 1e-3 and val <= 1e-6


def test_grid_soft_threshold():
    arg, _ = grid_minimize_scalar(lambda u: abs(u) + (u - 2) ** 2 / 2, -3.0, 3.0, 1e-4)
    assert arg == pytest.approx(1.0, abs=1e-4)


def test_grid_ties_go_low():
    assert grid_minimize_scalar(lambda u: 1.0, -2.0, 2.0, 0.5)[0] == -2.0
    assert grid_minimize_scalar(lambda u: np.ones_like(u), -2.0, 2.0, 0.5, vectorized=True)[0] == -2.0


def test_grid_vectorized_matches_loop():
    fn = lambda u: np.abs(u - 0.3) + 0.1 * u**2
    assert grid_minimize_scalar(fn, -1, 1, 1e-3) == grid_minimize_scalar(fn, -1, 1, 1e-3, vectorized=True)


def test_finite_differences():
    x = np.array([1.0, 2.0])
    assert np.allclose(finite_diff_gradient(lambda v: 0.5 * v @ v, x), x, atol=1e-8)
    w = np.array([0.3, -4.0])
    assert np.allclose(finite_diff_gradient(lambda v: w @ v, x), w, rtol=1e-9)
    with pytest.raises(FloatingPointError):
        finite_diff_gradient(lambda v: np.inf, x)


def test_long_run_lp():
    ref = long_run_reference(degenerate_lp(), 100_000)
    assert abs(ref.Fref - 2.0) <= 1e-4
    assert ref.feasibility <= 1e-4 and np.isfinite(ref.accuracy)


def test_long_run_lambda_zero_least_squares():
    rng = np.random.default_rng(0)
    M, b = rng.standard_normal((20, 10)), rng.standard_normal(20)
    ref = long_run_reference(tv_l1_least_squares(M, b, 0.0, 0.5), 20_000, beta1=100.0)
    assert np.allclose(ref.xref, np.linalg.lstsq(M, b, rcond=None)[0], atol=1e-6)


def test_long_run_zero_objective():
    from smartcd.blocks import BlockSparseMatrix
    from smartcd.functions import ConjugateProxPart
    from smartcd.problems import ProblemSpec
    part = make_partition([1, 1, 1])
    prob = ProblemSpec(f=SmoothPart.zero(part), g=SeparablePart.zero(part),
                       h=ConjugateProxPart.l1(1.0, 0),
                       A=BlockSparseMatrix.empty(part), x0=np.array([1.0, 2.0, 3.0]))
    ref = long_run_reference(prob, 10)
    assert np.array_equal(ref.xref, prob.x0) and ref.accuracy == 0.0


def test_long_run_matches_single_block_reference_step():
    rng = np.random.default_rng(4)
    M, b = rng.standard_normal((15, 8)), rng.standard_normal(15)
    prob = tv_l1_least_squares(M, b, 0.2, 0.4)
    one = prob.repartition([8])
    setup = initialize(one, SolverConfig(beta1=3.0, variant="reference"))
    st = reference_state(one, setup)
    for _ in range(300):
        reference_step(st, one, setup, 0)
    ref = long_run_reference(prob, 300, beta1=3.0)
    assert np.allclose(ref.xref, st.xbar, rtol=1e-12, atol=1e-14)

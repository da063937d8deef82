import numpy as np
import pytest

from smartcd.functions import ConjugateProxPart
from smartcd.smoothing import (SmoothingContext, h_beta_value, lipschitz_B, smoothed_dual,
                               smoothed_dual_rows)
from smartcd.oracle import finite_diff_gradient


def test_smoothed_dual_equality_closed_form():
    ctx = SmoothingContext.centered(ConjugateProxPart.equality([1.0]), 2.0)
    assert smoothed_dual(ctx, np.array([3.0])) == pytest.approx([1.0])


def test_smoothed_dual_l1_clamp():
    ctx = SmoothingContext.centered(ConjugateProxPart.l1(1.0, 2), 1.0)
    assert smoothed_dual(ctx, np.array([5.0, -0.2])) == pytest.approx([1.0, -0.2])


def test_nonpositive_beta_rejected():
    with pytest.raises(ValueError):
        SmoothingContext.centered(ConjugateProxPart.l1(1.0, 1), 0.0)


def test_smoothed_dual_is_the_inner_maximizer(rng):
    # projected gradient ascent on <u,y> - h*(y) - beta/2 ||y - ydot||^2
    for _ in range(20):
        m, lam, beta = 5, rng.uniform(0.2, 2), rng.uniform(0.1, 3)
        h = ConjugateProxPart.l1(lam, m)
        ydot = 0.3 * rng.standard_normal(m)
        u = 2 * rng.standard_normal(m)
        y = np.zeros(m)
        for _ in range(500):
            y = np.clip(y + (u - beta * (y - ydot)) / beta, -lam, lam)
        ctx = SmoothingContext.centered(h, beta, ydot)
        assert np.allclose(smoothed_dual(ctx, u), y, atol=1e-8)


def test_rows_version_matches(rng):
    for h in (ConjugateProxPart.l1(0.7, 8), ConjugateProxPart.equality(rng.standard_normal(8))):
        ydot, u = rng.standard_normal(8), rng.standard_normal(8)
        rows = np.array([1, 4, 6])
        full = smoothed_dual(SmoothingContext.centered(h, 0.4, ydot), u)
        assert np.allclose(smoothed_dual_rows(h, ydot, 0.4, u[rows], rows), full[rows],
                           rtol=0, atol=1e-15)


def test_h_beta_equality_zero_at_feasibility():
    h = ConjugateProxPart.equality([1.0, -2.0])
    ctx = SmoothingContext.centered(h, 0.5)
    assert h_beta_value(ctx, np.array([1.0, -2.0])) == 0.0
    assert h_beta_value(ctx, np.array([2.0, -2.0])) == pytest.approx(1.0)


def test_h_beta_l1_small_beta_limit():
    ctx = SmoothingContext.centered(ConjugateProxPart.l1(1.0, 1), 1e-8)
    assert h_beta_value(ctx, np.array([2.0])) == pytest.approx(2.0, abs=1e-6)


def test_sandwich(rng):
    for _ in range(200):
        h = ConjugateProxPart.l1(rng.uniform(0.1, 2), 6)
        beta = rng.uniform(0.01, 3)
        u = 3 * rng.standard_normal(6)
        hb = h_beta_value(SmoothingContext.centered(h, beta), u)
        assert hb <= h.value(u) + 1e-12
        assert h.value(u) <= hb + beta * h.d_hstar() ** 2 / 2 + 1e-12


def test_gradient_of_h_beta_is_smoothed_dual(rng):
    h = ConjugateProxPart.l1(0.8, 5)
    ctx = SmoothingContext.centered(h, 0.6, 0.2 * rng.standard_normal(5))
    u = rng.standard_normal(5)
    fd = finite_diff_gradient(lambda v: h_beta_value(ctx, v), u)
    assert np.allclose(fd, smoothed_dual(ctx, u), atol=1e-5)


def test_lipschitz_B():
    assert lipschitz_B(0.0, 1.0, 1.0) == 1.0
    assert lipschitz_B(2.0, 3.0, 0.5) == 20.0
    rng = np.random.default_rng(0)
    L, a = rng.uniform(0, 5, 10), rng.uniform(0, 5, 10)
    assert np.all(lipschitz_B(L, a, 1.0) >= lipschitz_B(L, a, 2.0))
    with pytest.raises(ValueError):
        lipschitz_B(1.0, 1.0, 0.0)

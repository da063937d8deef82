"""Independent ground truth: long deterministic runs, grid search, finite differences."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blocks import spectral_norm
from .functions import soft_threshold
from .problems import ProblemSpec

__all__ = [
    "ReferenceSolution",
    "long_run_reference",
    "grid_minimize_scalar",
    "finite_diff_gradient",
]


@dataclass(frozen=True)
class ReferenceSolution:
    xref: np.ndarray
    Fref: float
    method: str
    accuracy: float
    feasibility: float | None = None


def long_run_reference(problem: ProblemSpec, iterations: int, beta1: float = 1.0,
                       regime: str | None = None) -> ReferenceSolution:
    """Run the method deterministically with the whole vector as one block.

    With a single block every step is a full proximal-gradient step on the
    smoothed problem followed by the averaging update. This loop works on
    plain arrays instead of going through the block machinery, which keeps
    1e6 iterations affordable and gives a second, independent code path.
    ``accuracy`` is the objective change over the last decade of iterations.
    """
    from .schedule import tau_sequence

    if regime is None:
        regime = "constrained" if problem.h.kind == "equality" else "lipschitz"
    x0 = problem.x0.astype(float)
    f, g, h = problem.f, problem.g, problem.h
    A = _as_operator(problem.A.csc)
    M = _as_operator(f.M.csc) if f.M is not None else None
    normA2 = spectral_norm(problem.A.csc) ** 2
    Lhat = spectral_norm(f.M.csc) ** 2 if f.M is not None else 0.0
    if iterations == 0 or normA2 + Lhat == 0.0:
        return ReferenceSolution(x0.copy(), problem.objective(x0), "long-run-deterministic",
                                 0.0, problem.feasibility(x0))
    taus, betas = tau_sequence(regime, 1.0, iterations, beta1)
    ydot = np.zeros(problem.m)
    w = f.w if f.w is not None else 0.0
    xbar = x0.copy()
    xt = x0.copy()
    decade = max(iterations // 10, 1)
    history = []
    for k in range(iterations):
        tau, beta = taus[k], betas[k]
        xhat = (1.0 - tau) * xbar + tau * xt
        v = ydot + (A @ xhat) / beta
        y = np.clip(v, -h.lam, h.lam) if h.kind == "l1" else v - h.c / beta
        grad = A.T @ y + w
        if M is not None:
            grad = grad + M.T @ (M @ xhat - f.b)
        step = 1.0 / (tau * (Lhat + normA2 / beta))
        new = np.clip(soft_threshold(xt - step * grad, g.l1 * step), g.lo, g.hi)
        xbar = xhat + tau * (new - xt)
        xt = new
        if (k + 1) % decade == 0:
            if not np.all(np.isfinite(xbar)):
                raise FloatingPointError(f"reference run diverged at iteration {k + 1}")
            history.append(problem.objective(xbar))
    accuracy = abs(history[-1] - history[-2]) if len(history) > 1 else np.inf
    return ReferenceSolution(xbar, problem.objective(xbar), "long-run-deterministic",
                             float(accuracy), problem.feasibility(xbar))


def _as_operator(csc):
    m, p = csc.shape
    return csc.toarray() if m * p <= 1_000_000 else csc.tocsr()


def grid_minimize_scalar(fn, lo: float, hi: float, step: float, vectorized: bool = False):
    """Exhaustive minimization over ``lo, lo + step, ..., hi``; ties go to the lowest point.

    With ``vectorized=True`` ``fn`` is called once on the whole grid array.
    """
    grid = lo + step * np.arange(int(np.floor((hi - lo) / step + 1e-9)) + 1)
    vals = np.asarray(fn(grid), dtype=float) if vectorized else np.array([fn(u) for u in grid])
    j = int(np.argmin(vals))
    return float(grid[j]), float(vals[j])


def finite_diff_gradient(fn, x, step: float = 1e-6) -> np.ndarray:
    """Central differences of a scalar function of a vector."""
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = step
        hi, lo = fn(x + e), fn(x - e)
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise FloatingPointError(f"nonfinite evaluation near coordinate {j}")
        grad[j] = (hi - lo) / (2 * step)
    return grad

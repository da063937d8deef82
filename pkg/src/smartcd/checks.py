"""Quick invariant checks on small random instances (``smartcd check``)."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .blocks import BlockSparseMatrix, make_partition
from .functions import (ConjugateProxPart, SeparablePart, SmoothPart, grad_f_full,
                        prox_g_block, prox_h, prox_h_conj)
from .oracle import finite_diff_gradient, grid_minimize_scalar
from .problems import ProblemSpec, degenerate_lp
from .schedule import tau_sequence
from .smoothing import SmoothingContext, h_beta_value, smoothed_dual
from .solver import SolverConfig, run


def random_problem(seed: int, h_kind: str = "l1", scalar: bool = True, n=None) -> ProblemSpec:
    """Small random instance with least-squares f, l1-plus-box g and the given h.

    ``h_kind`` is ``"l1"``, ``"equality"`` or ``"zero"`` (l1 with weight 0).
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 51)) if n is None else n
    sizes = [1] * n if scalar else [int(s) for s in rng.integers(1, 5, size=n)]
    part = make_partition(sizes)
    p = part.p
    m = int(rng.integers(5, 60))
    mf = int(rng.integers(5, 60))
    A = sp.random(m, p, density=0.3, random_state=rng, format="csc")
    M = sp.random(mf, p, density=0.3, random_state=rng, format="csc")
    f = SmoothPart.least_squares(BlockSparseMatrix.from_matrix(M, part), rng.standard_normal(mf))
    g = SeparablePart.build(part, l1=0.1, lo=-1.0, hi=1.0)
    if h_kind == "equality":
        h = ConjugateProxPart.equality(0.1 * rng.standard_normal(m))
    else:
        h = ConjugateProxPart.l1(0.5 if h_kind == "l1" else 0.0, m)
    return ProblemSpec(f=f, g=g, h=h, A=BlockSparseMatrix.from_matrix(A, part),
                       x0=0.1 * rng.standard_normal(p), name=f"random_{h_kind}")


def check_equivalence(instances=4, iterations=500):
    worst = 0.0
    for seed in range(instances):
        for kind in ("l1", "equality", "zero"):
            prob = random_problem(seed, kind, scalar=bool(seed % 2))
            regime = "constrained" if kind == "equality" else "lipschitz"
            xs = []
            for variant in ("reference", "efficient"):
                cfg = SolverConfig(beta1=1.0, alpha=0.5, variant=variant, regime=regime,
                                   max_iterations=iterations, seed=seed)
                xs.append(run(prob, cfg)[0])
            rel = np.linalg.norm(xs[0] - xs[1]) / max(1.0, np.linalg.norm(xs[0]))
            worst = max(worst, rel)
    return worst <= 1e-8, f"max relative deviation {worst:.2e}"


def check_schedule(count=100_000):
    worst = 0.0
    for tau0 in (1.0, 0.5, 0.1, 0.01):
        taus, betas = tau_sequence("lipschitz", tau0, count)
        k = np.arange(count + 1)
        lo = 1.0 / (k + 1.0 / tau0)
        hi = 2.0 / (k + 1.0 / tau0 + 1.0)
        kb = np.arange(1, count + 2)
        bb = (1.0 + tau0) / (tau0 * kb + 1.0)
        worst = max(worst, np.max(lo - taus), np.max(taus - hi), np.max(betas - bb))
    return worst <= 1e-12, f"max bound violation {worst:.2e}"


def check_smoothing(trials=200):
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(trials):
        m = 6
        h = ConjugateProxPart.l1(rng.uniform(0.1, 2.0), m)
        beta = rng.uniform(0.1, 3.0)
        ctx = SmoothingContext.centered(h, beta, 0.1 * rng.standard_normal(m))
        u, uh = rng.standard_normal(m), rng.standard_normal(m)
        yu, yuh = smoothed_dual(ctx, u), smoothed_dual(ctx, uh)
        lip = np.linalg.norm(yu - yuh) - np.linalg.norm(u - uh) / beta
        lhs = h_beta_value(ctx, u) + yu @ (uh - u) + 0.5 * beta * np.sum((yu - yuh) ** 2)
        worst = max(worst, lip, lhs - h_beta_value(ctx, uh))
    return worst <= 1e-10, f"max violation {worst:.2e}"


def check_prox():
    rng = np.random.default_rng(1)
    part = make_partition([1])
    worst = 0.0
    for _ in range(20):
        v = rng.uniform(-2, 2)
        step = rng.uniform(0.2, 2.0)
        g = SeparablePart.build(part, l1=rng.uniform(0, 1), lo=-1.0, hi=1.5)
        got = prox_g_block(g, 0, np.array([v]), step)[0]
        arg, _ = grid_minimize_scalar(lambda t: g.value(np.array([t])) + (t - v) ** 2 / (2 * step),
                                      -1.0, 1.5, 1e-4)
        worst = max(worst, abs(arg - got))
    h = ConjugateProxPart.l1(0.7, 5)
    v = rng.standard_normal(5) * 3
    sigma = 0.4
    moreau = np.max(np.abs(prox_h_conj(h, v, sigma) + sigma * prox_h(h, v / sigma, 1 / sigma) - v))
    return worst <= 1e-3 and moreau <= 1e-12, f"grid error {worst:.1e}, Moreau {moreau:.1e}"


def check_gradient():
    rng = np.random.default_rng(2)
    part = make_partition([1] * 6)
    M = BlockSparseMatrix.from_matrix(rng.standard_normal((4, 6)) / 2, part)
    f = SmoothPart.least_squares(M, rng.standard_normal(4) / 2)
    x = rng.standard_normal(6) / 2
    err = np.max(np.abs(grad_f_full(f, x) - finite_diff_gradient(f.value, x)))
    return err <= 1e-5, f"finite-difference error {err:.1e}"


def check_lp():
    prob = degenerate_lp(10, 200)
    _, trace = run(prob, SolverConfig(beta1=1.0, regime="constrained", max_iterations=200_000,
                                      checkpoint_every=20_000))
    sub = abs(trace.column("subopt")[-1])
    feas = trace.column("feas")[-1]
    return sub <= 1e-3 and feas <= 1e-3, f"|F-2| = {sub:.1e}, feasibility {feas:.1e}"


CHECKS = {
    "prox oracles": check_prox,
    "gradient oracle": check_gradient,
    "smoothing inequalities": check_smoothing,
    "schedule bounds": check_schedule,
    "reference/efficient equivalence": check_equivalence,
    "degenerate LP": check_lp,
}


def run_checks(out=print) -> bool:
    ok_all = True
    for name, fn in CHECKS.items():
        ok, detail = fn()
        ok_all &= bool(ok)
        out(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return ok_all

"""Quadratic smoothing of h around a center ``ydot``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .functions import ConjugateProxPart, prox_h_conj

__all__ = [
    "SmoothingContext",
    "smoothed_dual",
    "smoothed_dual_rows",
    "h_beta_value",
    "lipschitz_B",
]


@dataclass(frozen=True)
class SmoothingContext:
    beta: float
    ydot: np.ndarray
    h: ConjugateProxPart

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"smoothing parameter must be positive, got {self.beta}")

    @classmethod
    def centered(cls, h: ConjugateProxPart, beta: float, ydot=None):
        ydot = np.zeros(h.m) if ydot is None else np.asarray(ydot, dtype=float)
        return cls(float(beta), ydot, h)


def smoothed_dual(ctx: SmoothingContext, u) -> np.ndarray:
    """Maximizer ``y*_beta(u) = prox_{h*/beta}(ydot + u/beta)``."""
    u = np.asarray(u, dtype=float)
    if u.shape != (ctx.h.m,):
        raise ValueError(f"u has shape {u.shape}, expected ({ctx.h.m},)")
    return prox_h_conj(ctx.h, ctx.ydot + u / ctx.beta, 1.0 / ctx.beta)


def smoothed_dual_rows(h: ConjugateProxPart, ydot, beta: float, u_rows, rows) -> np.ndarray:
    """Entries ``rows`` of ``y*_beta`` given only those entries of ``u``.

    Both supported kinds of h are separable, so each dual entry depends on
    the matching entry of ``u`` alone.
    """
    v = ydot[rows] + u_rows / beta
    if h.kind == "l1":
        return np.clip(v, -h.lam, h.lam)
    return v - h.c[rows] / beta


def h_beta_value(ctx: SmoothingContext, u) -> float:
    u = np.asarray(u, dtype=float)
    y = smoothed_dual(ctx, u)
    d = y - ctx.ydot
    # h* vanishes on its domain for the l1 kind and the clamp keeps y there.
    conj = float(ctx.h.c @ y) if ctx.h.kind == "equality" else 0.0
    return float(u @ y) - conj - 0.5 * ctx.beta * float(d @ d)


def lipschitz_B(Lhat_i, normA_i, beta):
    """Block constant ``Lhat_i + ||A_i||^2 / beta``."""
    if np.any(np.asarray(beta) <= 0):
        raise ValueError(f"beta must be positive, got {beta}")
    return Lhat_i + normA_i**2 / beta

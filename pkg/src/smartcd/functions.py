"""Oracles for the smooth part f, the separable part g and the conjugate of h."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .blocks import BlockPartition, BlockSparseMatrix

__all__ = [
    "SmoothPart",
    "SeparablePart",
    "ConjugateProxPart",
    "soft_threshold",
    "grad_f_full",
    "grad_f_block",
    "prox_g_block",
    "prox_h_conj",
    "prox_h",
]


def soft_threshold(v, thresh):
    return np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0)


@dataclass(frozen=True)
class SmoothPart:
    """``f(x) = 1/2 ||Mx - b||^2 + <w, x>``.

    ``kind`` is ``"least_squares"`` (``M`` set, ``w`` optional), ``"linear"``
    (only ``w``) or ``"zero"``. ``Lhat`` holds the per-block Lipschitz
    constants of the partial gradients, ``||M_i||^2``.
    """

    kind: str
    partition: BlockPartition
    M: Optional[BlockSparseMatrix] = None
    b: Optional[np.ndarray] = None
    w: Optional[np.ndarray] = None

    @classmethod
    def least_squares(cls, M: BlockSparseMatrix, b=None, w=None) -> "SmoothPart":
        b = np.zeros(M.m) if b is None else np.asarray(b, dtype=float)
        if b.shape != (M.m,):
            raise ValueError(f"b has shape {b.shape}, expected ({M.m},)")
        if w is not None:
            w = np.asarray(w, dtype=float)
        return cls("least_squares", M.partition, M=M, b=b, w=w)

    @classmethod
    def linear(cls, w, partition: BlockPartition) -> "SmoothPart":
        return cls("linear", partition, w=np.asarray(w, dtype=float))

    @classmethod
    def zero(cls, partition: BlockPartition) -> "SmoothPart":
        return cls("zero", partition)

    @property
    def Lhat(self) -> np.ndarray:
        if self.kind == "least_squares":
            return self.M.norms**2
        return np.zeros(self.partition.n)

    @property
    def image_dim(self) -> int:
        return self.M.m if self.M is not None else 0

    def image(self, x):
        """``Mx`` (empty when there is no quadratic term)."""
        if self.M is None:
            return np.zeros(0)
        return self.M.matvec(x)

    def value(self, x) -> float:
        val = 0.0
        if self.M is not None:
            r = self.M.matvec(x) - self.b
            val += 0.5 * float(r @ r)
        if self.w is not None:
            val += float(self.w @ x)
        return val

    def value_from_image(self, x, image) -> float:
        val = 0.0
        if self.M is not None:
            r = image - self.b
            val += 0.5 * float(r @ r)
        if self.w is not None:
            val += float(self.w @ x)
        return val


def grad_f_full(f: SmoothPart, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (f.partition.p,):
        raise ValueError(f"x has shape {x.shape}, expected ({f.partition.p},)")
    g = np.zeros_like(x)
    if f.M is not None:
        g += f.M.rmatvec(f.M.matvec(x) - f.b)
    if f.w is not None:
        g += f.w
    return g


def grad_f_block(f: SmoothPart, x_image, i: int) -> np.ndarray:
    """Partial gradient on block ``i`` given the maintained image ``Mx``."""
    sl = f.partition.slice(i)
    g = np.zeros(sl.stop - sl.start)
    if f.M is not None:
        rows, _ = f.M.block(i)
        g += f.M.block_t(i) @ (x_image[rows] - f.b[rows])
    if f.w is not None:
        g += f.w[sl]
    return g


@dataclass(frozen=True)
class SeparablePart:
    """``g(x) = sum_j l1[j] |x_j| + indicator(lo[j] <= x_j <= hi[j])``.

    Zero, weighted l1, box and nonnegativity terms are all special cases of
    this per-coordinate form. ``kinds`` records the per-block label used to
    build it. A caller-supplied ``prox_fn(i, v, step)`` and ``value_fn(x)``
    replace the built-in form entirely.
    """

    partition: BlockPartition
    l1: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    kinds: tuple
    prox_fn: Optional[Callable] = None
    value_fn: Optional[Callable] = None

    @classmethod
    def build(cls, partition: BlockPartition, kinds=None, l1=0.0, lo=-np.inf, hi=np.inf):
        p = partition.p
        l1 = np.broadcast_to(np.asarray(l1, dtype=float), (p,)).copy()
        lo = np.broadcast_to(np.asarray(lo, dtype=float), (p,)).copy()
        hi = np.broadcast_to(np.asarray(hi, dtype=float), (p,)).copy()
        if np.any(l1 < 0):
            raise ValueError("l1 weights must be nonnegative")
        if np.any(lo > hi):
            raise ValueError("empty box: lo > hi for some coordinate")
        if kinds is None:
            kinds = tuple(_infer_kind(l1[partition.slice(i)], lo[partition.slice(i)],
                                      hi[partition.slice(i)]) for i in range(partition.n))
        return cls(partition, l1, lo, hi, tuple(kinds))

    @classmethod
    def zero(cls, partition):
        return cls.build(partition)

    @classmethod
    def custom(cls, partition, prox_fn, value_fn):
        p = partition.p
        return cls(partition, np.zeros(p), np.full(p, -np.inf), np.full(p, np.inf),
                   ("custom",) * partition.n, prox_fn, value_fn)

    @property
    def is_zero(self) -> bool:
        return (self.prox_fn is None and not np.any(self.l1)
                and np.all(np.isneginf(self.lo)) and np.all(np.isposinf(self.hi)))

    @property
    def builtin(self) -> bool:
        return self.prox_fn is None

    def value(self, x, tol: float = 1e-9) -> float:
        if self.value_fn is not None:
            return float(self.value_fn(x))
        slack = tol * np.maximum(1.0, np.abs(x))
        if np.any(x < self.lo - slack) or np.any(x > self.hi + slack):
            return np.inf
        return float(np.sum(self.l1 * np.abs(x)))


def _infer_kind(l1, lo, hi) -> str:
    boxed = np.any(np.isfinite(lo)) or np.any(np.isfinite(hi))
    if np.any(l1):
        return "l1+box" if boxed else "l1"
    if not boxed:
        return "zero"
    if np.all(lo == 0) and np.all(np.isposinf(hi)):
        return "nonneg"
    return "box"


def prox_g_block(g: SeparablePart, i: int, v, step: float) -> np.ndarray:
    """``argmin_u g_i(u) + ||u - v||^2 / (2 step)``."""
    if step <= 0:
        raise ValueError(f"prox step must be positive, got {step}")
    if g.prox_fn is not None:
        return np.asarray(g.prox_fn(i, v, step), dtype=float)
    sl = g.partition.slice(i)
    v = np.asarray(v, dtype=float)
    # Scalar convex terms: clamping the unconstrained minimizer is exact.
    return np.clip(soft_threshold(v, g.l1[sl] * step), g.lo[sl], g.hi[sl])


@dataclass(frozen=True)
class ConjugateProxPart:
    """Nonsmooth ``h`` described through its conjugate.

    ``kind="l1"``: ``h(u) = lam ||u||_1``, so ``h*`` is the indicator of the
    infinity-ball of radius ``lam``. ``kind="equality"``: ``h`` is the
    indicator of ``{c}``, so ``h*(y) = <c, y>``.
    """

    kind: str
    m: int
    lam: float = 0.0
    c: Optional[np.ndarray] = None

    @classmethod
    def l1(cls, lam: float, m: int) -> "ConjugateProxPart":
        if lam < 0:
            raise ValueError("lam must be nonnegative")
        return cls("l1", m, lam=float(lam))

    @classmethod
    def equality(cls, c) -> "ConjugateProxPart":
        c = np.asarray(c, dtype=float)
        return cls("equality", c.size, c=c)

    def d_hstar(self, ydot=None) -> float:
        """``max ||y - ydot||`` over the domain of ``h*``."""
        if self.kind == "equality":
            return np.inf
        ydot = np.zeros(self.m) if ydot is None else np.asarray(ydot)
        return float(np.linalg.norm(self.lam + np.abs(ydot)))

    def conj_value(self, y) -> float:
        if self.kind == "equality":
            return float(self.c @ y)
        return 0.0 if np.all(np.abs(y) <= self.lam * (1 + 1e-12)) else np.inf

    def value(self, u) -> float:
        if self.kind == "l1":
            return self.lam * float(np.sum(np.abs(u)))
        return 0.0 if np.allclose(u, self.c, rtol=0, atol=1e-12) else np.inf

    def residual(self, u) -> float:
        """``||u - c||`` for the equality kind, 0 otherwise."""
        if self.kind == "equality":
            return float(np.linalg.norm(u - self.c))
        return 0.0


def prox_h_conj(h: ConjugateProxPart, v, sigma: float) -> np.ndarray:
    """``prox_{sigma h*}(v)``."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    v = np.asarray(v, dtype=float)
    if h.kind == "l1":
        return np.clip(v, -h.lam, h.lam)
    return v - sigma * h.c


def prox_h(h: ConjugateProxPart, v, step: float) -> np.ndarray:
    """``prox_{step h}(v)``; only used to cross-check :func:`prox_h_conj`."""
    v = np.asarray(v, dtype=float)
    if h.kind == "l1":
        return soft_threshold(v, step * h.lam)
    return h.c.copy()

"""Problem container, experiment instance builders and evaluation metrics."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .blocks import BlockPartition, BlockSparseMatrix, make_partition
from .functions import ConjugateProxPart, SeparablePart, SmoothPart

__all__ = [
    "ProblemSpec",
    "LibsvmError",
    "difference_operator",
    "degenerate_lp",
    "tv_l1_least_squares",
    "piecewise_constant_signal",
    "synthetic_tv_problem",
    "svm_dual",
    "svm_primal_objective",
    "svm_duality_gap",
    "separable_svm_data",
    "sparse_column_matrix",
    "sparse_lasso_l1",
    "parse_libsvm",
    "write_libsvm",
    "metrics",
    "BUILDERS",
    "build_named",
]


@dataclass(frozen=True)
class ProblemSpec:
    """``F(x) = f(x) + g(x) + h(Ax)`` plus whatever is known about its optimum."""

    f: SmoothPart
    g: SeparablePart
    h: ConjugateProxPart
    A: BlockSparseMatrix
    x0: np.ndarray
    known_Fstar: Optional[float] = None
    known_xstar: Optional[np.ndarray] = None
    known_ystar: Optional[np.ndarray] = None
    note: str = ""
    name: str = "custom"
    extras: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        p = self.partition.p
        if self.f.partition.p != p or self.g.partition.p != p:
            raise ValueError("f, g and A disagree on the dimension of x")
        if self.x0.shape != (p,):
            raise ValueError(f"x0 has shape {self.x0.shape}, expected ({p},)")
        if self.A.m != self.h.m:
            raise ValueError(f"A has {self.A.m} rows but h acts on R^{self.h.m}")
        if self.known_Fstar is not None and not self.note:
            raise ValueError("known_Fstar needs a provenance note")

    @property
    def partition(self) -> BlockPartition:
        return self.A.partition

    @property
    def n(self) -> int:
        return self.partition.n

    @property
    def m(self) -> int:
        return self.A.m

    def objective(self, x) -> float:
        """F(x) with the true h; for an equality h only the finite part f + g."""
        val = self.f.value(x) + self.g.value(x)
        if self.h.kind == "l1":
            val += self.h.value(self.A.matvec(x))
        return val

    def feasibility(self, x) -> Optional[float]:
        if self.h.kind != "equality":
            return None
        return self.h.residual(self.A.matvec(x))

    def repartition(self, sizes) -> "ProblemSpec":
        """Same problem with a different block structure."""
        part = make_partition(sizes)
        A = self.A.with_partition(part)
        f = self.f
        if f.kind == "least_squares":
            f = SmoothPart.least_squares(f.M.with_partition(part), f.b, f.w)
        else:
            f = replace(f, partition=part)
        g = replace(self.g, partition=part, kinds=("merged",) * part.n)
        return replace(self, f=f, g=g, A=A)


def metrics(problem: ProblemSpec, x):
    """``(F(x), feasibility or None, duality gap or None)``."""
    F = problem.objective(x)
    feas = problem.feasibility(x)
    gap = None
    if problem.name == "svm_dual":
        gap = svm_duality_gap(problem, x)
    return F, feas, gap


# -- difference operator ---------------------------------------------------

def difference_operator(dims) -> sp.csr_matrix:
    """Forward differences along every axis of an array of shape ``dims``.

    Only interior differences are kept (no boundary rows), so every row has
    exactly one +1 and one -1. The signal is flattened in C order.
    """
    dims = (int(dims),) if np.isscalar(dims) else tuple(int(d) for d in dims)
    if any(d < 1 for d in dims):
        raise ValueError(f"invalid dims {dims}")
    size = int(np.prod(dims))
    idx = np.arange(size).reshape(dims)
    blocks = []
    for axis, d in enumerate(dims):
        if d < 2:
            continue
        lo = np.take(idx, np.arange(d - 1), axis=axis).ravel()
        hi = np.take(idx, np.arange(1, d), axis=axis).ravel()
        r = np.arange(lo.size)
        data = np.concatenate([-np.ones(lo.size), np.ones(lo.size)])
        blocks.append(sp.csr_matrix((data, (np.concatenate([r, r]), np.concatenate([lo, hi]))),
                                    shape=(lo.size, size)))
    if not blocks:
        return sp.csr_matrix((0, size))
    return sp.vstack(blocks, format="csr")


# -- degenerate linear program ----------------------------------------------

def degenerate_lp(p: int = 10, d: int = 200) -> ProblemSpec:
    """``min 2 x_p`` s.t. ``sum_{k<p} x_k = 1``, ``x_p - sum_{k<p} x_k = 0``
    (repeated ``d`` times), ``x_p >= 0``."""
    if p < 2 or d < 1:
        raise ValueError(f"need p >= 2 and d >= 1, got p={p}, d={d}")
    dense = np.zeros((d + 1, p))
    dense[0, : p - 1] = 1.0
    dense[1:, : p - 1] = -1.0
    dense[1:, p - 1] = 1.0
    part = make_partition([1] * p)
    A = BlockSparseMatrix.from_matrix(sp.csc_matrix(dense), part)
    c = np.zeros(d + 1)
    c[0] = 1.0
    w = np.zeros(p)
    w[p - 1] = 2.0
    lo = np.full(p, -np.inf)
    lo[p - 1] = 0.0
    g = SeparablePart.build(part, lo=lo)
    xstar = np.full(p, 1.0 / (p - 1))
    xstar[p - 1] = 1.0
    # Stationarity in the free coordinates forces y_0 = sum_{j>=1} y_j and the
    # last coordinate forces sum_{j>=1} y_j = -2; the minimum-norm choice
    # spreads that evenly over the repeated rows.
    ystar = np.full(d + 1, -2.0 / d)
    ystar[0] = -2.0
    return ProblemSpec(
        f=SmoothPart.linear(w, part), g=g, h=ConjugateProxPart.equality(c), A=A,
        x0=np.zeros(p), known_Fstar=2.0, known_xstar=xstar, known_ystar=ystar,
        note="analytic: constraints force x_p = 1", name="degenerate_lp",
    )


# -- TV-l1 regression -------------------------------------------------------

def tv_l1_least_squares(M, b, lam: float, r: float, dims=None) -> ProblemSpec:
    """``1/2 ||Mx - b||^2 + lam r ||x||_1 + lam (1 - r) ||Dx||_1``."""
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"r must lie in [0, 1], got {r}")
    M = sp.csc_matrix(M, dtype=float)
    p = M.shape[1]
    dims = p if dims is None else dims
    D = difference_operator(dims)
    if D.shape[1] != p:
        raise ValueError(f"dims {dims} describe {D.shape[1]} unknowns but M has {p} columns")
    part = make_partition([1] * p)
    f = SmoothPart.least_squares(BlockSparseMatrix.from_matrix(M, part), b)
    g = SeparablePart.build(part, l1=lam * r)
    h = ConjugateProxPart.l1(lam * (1.0 - r), D.shape[0])
    A = BlockSparseMatrix.from_matrix(D, part)
    return ProblemSpec(f=f, g=g, h=h, A=A, x0=np.zeros(p), name="tv_l1",
                       extras={"dims": dims, "lam": lam, "r": r})


def piecewise_constant_signal(p: int, pieces: int = 5, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    cuts = np.sort(rng.choice(np.arange(1, p), size=min(pieces - 1, p - 1), replace=False))
    levels = rng.uniform(-1.0, 1.0, size=len(cuts) + 1)
    levels[rng.random(len(levels)) < 0.3] = 0.0
    return np.repeat(levels, np.diff(np.concatenate(([0], cuts, [p]))))


def synthetic_tv_problem(p: int = 200, m: int = 100, lam: float = 0.01, r: float = 0.5,
                         noise: float = 0.01, seed: int = 0) -> ProblemSpec:
    """Gaussian design observing a piecewise-constant 1D signal."""
    rng = np.random.default_rng(seed)
    xtrue = piecewise_constant_signal(p, seed=seed)
    M = rng.standard_normal((m, p)) / np.sqrt(m)
    b = M @ xtrue + noise * rng.standard_normal(m)
    prob = tv_l1_least_squares(M, b, lam, r)
    prob.extras["xtrue"] = xtrue
    return prob


# -- dual SVM with bias -----------------------------------------------------

def svm_dual(M, labels, C=1.0, lam: Optional[float] = None) -> ProblemSpec:
    """Dual of the biased soft-margin SVM.

    ``M`` is ``features x examples``. The smooth part is
    ``1/(2 lam) ||M D(b) x||^2 - sum x``, the separable part the box
    ``[0, C_i]`` and the coupling constraint ``b^T x = 0``.
    """
    M = sp.csc_matrix(M, dtype=float)
    labels = np.asarray(labels, dtype=float)
    m = M.shape[1]
    if labels.shape != (m,):
        raise ValueError(f"need {m} labels, got shape {labels.shape}")
    if not np.all(np.isin(labels, (-1.0, 1.0))):
        raise ValueError("labels must be -1 or +1")
    lam = 1.0 / m if lam is None else float(lam)
    if lam <= 0:
        raise ValueError("lam must be positive")
    C = np.broadcast_to(np.asarray(C, dtype=float), (m,)).copy()
    if np.any(C <= 0):
        raise ValueError("C_i must be positive")
    part = make_partition([1] * m)
    scaled = M @ sp.diags(labels) / np.sqrt(lam)
    f = SmoothPart.least_squares(BlockSparseMatrix.from_matrix(scaled, part), w=-np.ones(m))
    g = SeparablePart.build(part, lo=0.0, hi=C)
    A = BlockSparseMatrix.from_matrix(sp.csc_matrix(labels.reshape(1, -1)), part)
    return ProblemSpec(f=f, g=g, h=ConjugateProxPart.equality([0.0]), A=A, x0=np.zeros(m),
                       name="svm_dual",
                       extras={"features": sp.csc_matrix(M), "labels": labels, "C": C, "lam": lam})


def _best_bias(scores, labels, C):
    """Minimize ``sum_i C_i max(0, 1 - b_i (s_i + w0))`` over the bias ``w0``.

    The objective is convex piecewise linear with breakpoints ``b_i - s_i``;
    the minimizer is the first breakpoint at which the slope turns
    nonnegative.
    """
    brk = labels - scores
    order = np.argsort(brk)
    # Left of every breakpoint only the positive examples contribute slope -C_i.
    slope = -np.sum(C[labels > 0])
    for j in order:
        slope += C[j]
        if slope >= 0:
            return float(brk[j])
    return float(brk[order[-1]])


def svm_primal_objective(M, labels, C, lam, w, w0) -> float:
    margins = 1.0 - labels * (M.T @ w + w0)
    return float(np.sum(C * np.maximum(margins, 0.0)) + 0.5 * lam * (w @ w))


def svm_duality_gap(problem: ProblemSpec, x) -> float:
    """Primal objective at the recovered ``(w, w0)`` minus the dual objective."""
    ex = problem.extras
    M, labels, C, lam = ex["features"], ex["labels"], ex["C"], ex["lam"]
    w = (M @ (labels * x)) / lam
    scores = M.T @ w
    w0 = _best_bias(scores, labels, C)
    primal = svm_primal_objective(M, labels, C, lam, w, w0)
    dual = -problem.f.value(x)
    return primal - dual


def separable_svm_data(m: int = 200, p: int = 20, margin: float = 0.1, seed: int = 0):
    """Linearly separable two-class data; returns ``(features x examples, labels)``."""
    rng = np.random.default_rng(seed)
    wtrue = rng.standard_normal(p)
    wtrue /= np.linalg.norm(wtrue)
    X = rng.standard_normal((m, p))
    proj = X @ wtrue + 0.5
    labels = np.where(proj >= 0, 1.0, -1.0)
    X += np.outer(labels * margin, wtrue)
    return X.T.copy(), labels


# -- libsvm format ----------------------------------------------------------

class LibsvmError(ValueError):
    pass


def parse_libsvm(path):
    """Read ``label idx:val ...`` lines; examples become columns of ``M``."""
    rows, cols, vals, labels = [], [], [], []
    nfeat = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                lab = float(parts[0].replace("−", "-"))
            except ValueError:
                raise LibsvmError(f"line {lineno}: bad label {parts[0]!r}") from None
            if lab in (0.0, -1.0):
                lab = -1.0
            elif lab == 1.0:
                lab = 1.0
            else:
                raise LibsvmError(f"line {lineno}: label {parts[0]!r} is not binary")
            col = len(labels)
            labels.append(lab)
            for tok in parts[1:]:
                try:
                    idx, val = tok.split(":")
                    idx = int(idx)
                    val = float(val)
                except ValueError:
                    raise LibsvmError(f"line {lineno}: malformed entry {tok!r}") from None
                if idx < 1:
                    raise LibsvmError(f"line {lineno}: feature index {idx} must be >= 1")
                rows.append(idx - 1)
                cols.append(col)
                vals.append(val)
                nfeat = max(nfeat, idx)
    if not labels:
        raise LibsvmError(f"{path}: no examples (m=0)")
    M = sp.csc_matrix((vals, (rows, cols)), shape=(nfeat, len(labels)))
    return M, np.array(labels)


def write_libsvm(path, M, labels) -> None:
    M = sp.csc_matrix(M)
    M.sort_indices()
    with open(path, "w") as fh:
        for j, lab in enumerate(labels):
            a, b = M.indptr[j], M.indptr[j + 1]
            feats = " ".join(f"{i + 1}:{float(v)!r}" for i, v in zip(M.indices[a:b], M.data[a:b]))
            fh.write(f"{int(lab):+d} {feats}".rstrip() + "\n")


# -- scaling instances ------------------------------------------------------

def sparse_column_matrix(m: int, p: int, nnz_per_col: int = 10, seed: int = 0) -> sp.csc_matrix:
    """Random ``m x p`` matrix with exactly ``nnz_per_col`` entries per column."""
    if nnz_per_col > m:
        raise ValueError("nnz_per_col cannot exceed the row count")
    rng = np.random.default_rng(seed)
    rows = np.argsort(rng.random((p, m)), axis=1)[:, :nnz_per_col] if m <= 64 else \
        np.stack([rng.choice(m, nnz_per_col, replace=False) for _ in range(p)])
    indptr = np.arange(0, p * nnz_per_col + 1, nnz_per_col)
    data = rng.standard_normal(p * nnz_per_col) / np.sqrt(nnz_per_col)
    mat = sp.csc_matrix((data, np.sort(rows, axis=1).ravel(), indptr), shape=(m, p))
    return mat


def sparse_lasso_l1(p: int = 1000, nnz_per_col: int = 10, lam: float = 0.1, r: float = 0.1,
                    seed: int = 0) -> ProblemSpec:
    """Least squares plus l1 on ``x`` and on ``Ax``, both operators with fixed column nnz.

    Row counts are ``p // 2`` so the per-iteration work depends only on
    column sparsity; used to measure how iteration cost scales with ``p``.
    """
    m = max(nnz_per_col, p // 2)
    part = make_partition(np.ones(p, dtype=int))
    M = sparse_column_matrix(m, p, nnz_per_col, seed)
    A = sparse_column_matrix(m, p, nnz_per_col, seed + 1)
    b = np.random.default_rng(seed + 2).standard_normal(m)
    return ProblemSpec(
        f=SmoothPart.least_squares(BlockSparseMatrix.from_matrix(M, part), b),
        g=SeparablePart.build(part, l1=lam),
        h=ConjugateProxPart.l1(r, m),
        A=BlockSparseMatrix.from_matrix(A, part),
        x0=np.zeros(p),
        name="sparse_lasso_l1",
    )


# -- registry ---------------------------------------------------------------

def _svm_builder(m=200, p=20, C=1.0, lam=None, seed=0, margin=0.1, path=None):
    if path is not None:
        M, labels = parse_libsvm(path)
    else:
        M, labels = separable_svm_data(m, p, margin=margin, seed=seed)
    return svm_dual(M, labels, C=C, lam=lam)


def _lp_builder(p=10, d=200):
    return degenerate_lp(p, d)


def _tv_builder(p=200, m=100, lam=0.01, r=0.5, noise=0.01, seed=0):
    return synthetic_tv_problem(p, m, lam, r, noise=noise, seed=seed)


BUILDERS = {
    "degenerate_lp": _lp_builder,
    "tv_l1": _tv_builder,
    "svm_dual": _svm_builder,
    "sparse_lasso_l1": sparse_lasso_l1,
}


def build_named(name: str, **params) -> ProblemSpec:
    try:
        builder = BUILDERS[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(BUILDERS)}") from None
    return builder(**params)

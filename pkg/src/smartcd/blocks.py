"""Block partitions, column-block sparse matrices and weighted block norms."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

__all__ = [
    "InvalidPartition",
    "BlockPartition",
    "BlockSparseMatrix",
    "make_partition",
    "block_norm",
    "weighted_norm_sq",
    "spectral_norm",
]

# Blocks with at most this many columns get an exact dense 2-norm.
_DENSE_NORM_MAX_COLS = 512
# Wider blocks keep their restricted submatrix sparse.
_DENSE_BLOCK_MAX_COLS = 64
_DENSE_MATVEC_MAX_ENTRIES = 65536


class InvalidPartition(ValueError):
    pass


@dataclass(frozen=True)
class BlockPartition:
    """Contiguous split of ``p`` coordinates into ``n`` blocks."""

    sizes: np.ndarray
    offsets: np.ndarray

    @property
    def n(self) -> int:
        return len(self.sizes)

    @property
    def p(self) -> int:
        return int(self.offsets[-1] + self.sizes[-1])

    @property
    def scalar(self) -> bool:
        return bool(np.all(self.sizes == 1))

    def slice(self, i: int) -> slice:
        if not 0 <= i < self.n:
            raise IndexError(f"block index {i} out of range for n={self.n}")
        start = int(self.offsets[i])
        return slice(start, start + int(self.sizes[i]))

    def block_of(self, j: int) -> int:
        """Block containing coordinate ``j``."""
        return int(np.searchsorted(self.offsets, j, side="right") - 1)

    def split(self, x):
        return [x[self.slice(i)] for i in range(self.n)]


def make_partition(sizes) -> BlockPartition:
    sizes = np.asarray(list(sizes), dtype=np.int64)
    if sizes.size == 0:
        raise InvalidPartition("partition needs at least one block")
    if np.any(sizes < 1):
        raise InvalidPartition(f"block sizes must be >= 1, got {sizes.tolist()}")
    offsets = np.concatenate(([0], np.cumsum(sizes)[:-1])).astype(np.int64)
    return BlockPartition(sizes=sizes, offsets=offsets)


def spectral_norm(mat, maxiter: int = 1000, rtol: float = 1e-10, seed: int = 0) -> float:
    """Largest singular value of a (sparse or dense) matrix.

    Small matrices use a dense SVD. Larger ones use power iteration on
    ``mat.T @ mat``; the result is inflated by the final relative change so it
    stays an upper estimate when the iteration stops early.
    """
    m, ncols = mat.shape
    if m == 0 or ncols == 0:
        return 0.0
    if ncols == 1:
        col = mat.toarray().ravel() if sp.issparse(mat) else np.asarray(mat).ravel()
        return float(np.linalg.norm(col))
    if ncols <= _DENSE_NORM_MAX_COLS and m * ncols <= 4_000_000:
        dense = mat.toarray() if sp.issparse(mat) else np.asarray(mat)
        return float(np.linalg.norm(dense, 2))
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(ncols)
    v /= np.linalg.norm(v)
    est = 0.0
    change = 1.0
    for _ in range(maxiter):
        w = mat.T @ (mat @ v)
        new = float(np.linalg.norm(w))
        if new == 0.0:
            return 0.0
        v = w / new
        change = abs(new - est) / new
        est = new
        if change <= rtol:
            break
    fro = sp.linalg.norm(mat) if sp.issparse(mat) else np.linalg.norm(mat)
    return float(min(np.sqrt(est) * (1.0 + change), fro))


@dataclass(frozen=True)
class BlockSparseMatrix:
    """Column-major sparse matrix whose columns follow a :class:`BlockPartition`.

    ``csc`` holds the entries; ``norms`` caches the spectral norm of every
    column block since the solver needs ``||A_i||^2`` on every iteration.
    """

    csc: sp.csc_matrix
    partition: BlockPartition
    norms: np.ndarray
    _blocks: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def from_matrix(cls, mat, partition: BlockPartition | None = None) -> "BlockSparseMatrix":
        csc = sp.csc_matrix(mat, dtype=np.float64)
        csc.sum_duplicates()
        csc.sort_indices()
        if partition is None:
            partition = make_partition([1] * csc.shape[1])
        if partition.p != csc.shape[1]:
            raise ValueError(
                f"partition covers {partition.p} columns but matrix has {csc.shape[1]}"
            )
        if partition.scalar:
            norms = np.sqrt(np.asarray(csc.multiply(csc).sum(axis=0)).ravel())
        else:
            norms = np.array(
                [spectral_norm(csc[:, partition.slice(i)]) for i in range(partition.n)]
            )
        return cls(csc=csc, partition=partition, norms=norms)

    @classmethod
    def empty(cls, partition: BlockPartition) -> "BlockSparseMatrix":
        return cls.from_matrix(sp.csc_matrix((0, partition.p)), partition)

    @property
    def shape(self):
        return self.csc.shape

    @property
    def m(self) -> int:
        return self.csc.shape[0]

    @property
    def p(self) -> int:
        return self.csc.shape[1]

    def nnz_block(self, i: int) -> int:
        sl = self.partition.slice(i)
        return int(self.csc.indptr[sl.stop] - self.csc.indptr[sl.start])

    def block(self, i: int):
        """``(rows, sub)``: block ``i`` restricted to its nonzero rows.

        ``sub`` is dense for narrow or dense blocks and CSR otherwise.
        """
        return self._block(i)[:2]

    def block_t(self, i: int):
        """Transpose of the restricted block returned by :meth:`block`."""
        return self._block(i)[2]

    def _block(self, i: int):
        cached = self._blocks.get(i)
        if cached is not None:
            return cached
        sl = self.partition.slice(i)
        a, b = self.csc.indptr[sl.start], self.csc.indptr[sl.stop]
        if sl.stop - sl.start == 1:
            rows = self.csc.indices[a:b]
            sub = self.csc.data[a:b].reshape(-1, 1)
            subT = sub.T
        else:
            rows = np.unique(self.csc.indices[a:b])
            sub = self.csc[rows][:, sl]
            width = sl.stop - sl.start
            if width <= _DENSE_BLOCK_MAX_COLS or sub.nnz > 0.3 * len(rows) * width:
                sub = sub.toarray()
                subT = sub.T
            else:
                subT = sub.T.tocsr()
                sub = sub.tocsr()
        self._blocks[i] = (rows, sub, subT)
        return self._blocks[i]

    def _small_dense(self):
        # Tiny matrices multiply faster as dense arrays than through scipy.
        dense = self._blocks.get("dense")
        if dense is None:
            m, p = self.csc.shape
            dense = self.csc.toarray() if m * p <= _DENSE_MATVEC_MAX_ENTRIES else False
            self._blocks["dense"] = dense
        return dense

    def matvec(self, x):
        dense = self._small_dense()
        return dense @ x if dense is not False else self.csc @ x

    def rmatvec(self, y):
        dense = self._small_dense()
        return dense.T @ y if dense is not False else self.csc.T @ y

    def with_partition(self, partition: BlockPartition) -> "BlockSparseMatrix":
        return BlockSparseMatrix.from_matrix(self.csc, partition)


def block_norm(A: BlockSparseMatrix, i: int) -> float:
    if not 0 <= i < A.partition.n:
        raise IndexError(f"block index {i} out of range for n={A.partition.n}")
    return float(A.norms[i])


def weighted_norm_sq(x, partition: BlockPartition, L, alpha: float) -> float:
    """Sum over blocks of ``L_i**alpha * ||x_i||^2``."""
    x = np.asarray(x, dtype=float)
    L = np.asarray(L, dtype=float)
    if x.shape != (partition.p,):
        raise ValueError(f"expected vector of length {partition.p}, got shape {x.shape}")
    if L.shape != (partition.n,):
        raise ValueError(f"expected {partition.n} block constants, got shape {L.shape}")
    sq = np.add.reduceat(x * x, partition.offsets)
    return float(np.sum(L**alpha * sq))

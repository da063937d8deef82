import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from smartcd.blocks import (BlockSparseMatrix, InvalidPartition, block_norm, make_partition,
                            spectral_norm, weighted_norm_sq)


def test_partition_scalar():
    part = make_partition([1, 1, 1])
    assert (part.n, part.p) == (3, 3)
    assert list(part.offsets) == [0, 1, 2]
    assert part.scalar


def test_partition_mixed():
    part = make_partition([2, 3])
    assert (part.n, part.p) == (2, 5)
    assert list(part.offsets) == [0, 2]
    assert part.slice(1) == slice(2, 5)
    assert not part.scalar


@pytest.mark.parametrize("sizes", [[], [0, 1], [2, -1]])
def test_partition_rejects(sizes):
    with pytest.raises(InvalidPartition):
        make_partition(sizes)


@given(st.lists(st.integers(1, 6), min_size=1, max_size=20))
def test_partition_covers_every_coordinate_once(sizes):
    part = make_partition(sizes)
    assert part.p == sum(sizes)
    owner = np.concatenate([np.full(s, i) for i, s in enumerate(sizes)])
    assert all(part.block_of(j) == owner[j] for j in range(part.p))
    assert np.all(np.diff(part.offsets) > 0)


def test_block_norm_single_column():
    A = BlockSparseMatrix.from_matrix(np.array([[3.0], [4.0]]), make_partition([1]))
    assert block_norm(A, 0) == pytest.approx(5.0)


def test_block_norm_identity():
    A = BlockSparseMatrix.from_matrix(np.eye(2), make_partition([2]))
    assert block_norm(A, 0) == pytest.approx(1.0)


def test_block_norm_matches_svd(rng):
    dense = rng.standard_normal((5, 3))
    A = BlockSparseMatrix.from_matrix(dense, make_partition([3]))
    assert block_norm(A, 0) == pytest.approx(np.linalg.norm(dense, 2), rel=1e-10)


def test_power_iteration_bounds(rng):
    # wide enough to skip the dense path
    mat = sp.random(300, 600, density=0.01, random_state=1, format="csc")
    est = spectral_norm(mat)
    true = np.linalg.norm(mat.toarray(), 2)
    assert est >= true * (1 - 1e-10)
    assert est <= sp.linalg.norm(mat) + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(1, 4), min_size=1, max_size=8), st.integers(0, 2**31))
def test_cached_norms_between_spectral_and_frobenius(sizes, seed):
    rng = np.random.default_rng(seed)
    part = make_partition(sizes)
    dense = rng.standard_normal((6, part.p))
    A = BlockSparseMatrix.from_matrix(dense, part)
    for i in range(part.n):
        blk = dense[:, part.slice(i)]
        assert A.norms[i] >= np.linalg.norm(blk, 2) * (1 - 1e-10)
        assert A.norms[i] <= np.linalg.norm(blk) * (1 + 1e-12)


def test_matvec_and_blocks(rng):
    part = make_partition([2, 1, 3])
    dense = sp.random(7, 6, density=0.4, random_state=3).toarray()
    A = BlockSparseMatrix.from_matrix(dense, part)
    x, y = rng.standard_normal(6), rng.standard_normal(7)
    assert np.allclose(A.matvec(x), dense @ x)
    assert np.allclose(A.rmatvec(y), dense.T @ y)
    for i in range(part.n):
        rows, sub = A.block(i)
        full = np.zeros((7, sub.shape[1]))
        full[rows] = sub.toarray() if sp.issparse(sub) else sub
        assert np.allclose(full, dense[:, part.slice(i)])


def test_weighted_norm_examples():
    assert weighted_norm_sq([1.0, 2.0], make_partition([1, 1]), [7.0, 9.0], 0.0) == 5.0
    assert weighted_norm_sq([1.0, 0.0, 1.0, 1.0], make_partition([2, 2]), [2.0, 3.0], 1.0) == 8.0
    assert weighted_norm_sq([3.0], make_partition([1]), [4.0], 0.5) == pytest.approx(18.0)

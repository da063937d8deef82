import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from smartcd.oracle import grid_minimize_scalar
from smartcd.problems import (BUILDERS, LibsvmError, build_named, degenerate_lp,
                              difference_operator, metrics, parse_libsvm, separable_svm_data,
                              sparse_column_matrix, svm_dual, svm_duality_gap,
                              synthetic_tv_problem, tv_l1_least_squares, write_libsvm)
from smartcd.solver import SolverConfig, run


def test_lp_shape_and_rows():
    prob = degenerate_lp(10, 200)
    dense = prob.A.csc.toarray()
    assert dense.shape == (201, 10)
    assert np.array_equal(dense[0], np.r_[np.ones(9), 0.0])
    assert np.all(dense[1:, :9] == -1) and np.all(dense[1:, 9] == 1)
    assert prob.known_Fstar == 2.0 and prob.note


def test_lp_known_solution():
    prob = degenerate_lp(10, 200)
    F, feas, gap = metrics(prob, prob.known_xstar)
    assert F == pytest.approx(2.0) and feas == pytest.approx(0.0, abs=1e-14) and gap is None
    # KKT with the analytic multiplier: w + A^T y* vanishes on the free coordinates
    # and is nonnegative on the sign-constrained one
    r = prob.f.w + prob.A.rmatvec(prob.known_ystar)
    assert np.allclose(r[:9], 0.0, atol=1e-12) and r[9] >= -1e-12


def test_lp_any_feasible_point_has_last_coordinate_one(rng):
    prob = degenerate_lp(6, 20)
    for _ in range(20):
        x = rng.uniform(0, 1, 6)
        x[:5] /= x[:5].sum()
        x[5] = 1.0
        assert prob.feasibility(x) == pytest.approx(0.0, abs=1e-12)
        assert prob.objective(x) == pytest.approx(2.0)
    assert prob.feasibility(np.zeros(6)) > 0


def test_lp_rejects_bad_sizes():
    with pytest.raises(ValueError):
        degenerate_lp(1, 10)


def test_difference_operator_1d():
    D = difference_operator(4).toarray()
    assert np.array_equal(D, [[-1, 1, 0, 0], [0, -1, 1, 0], [0, 0, -1, 1]])


def test_difference_operator_2d():
    D = difference_operator((2, 3))
    assert D.shape == (1 * 3 + 2 * 2, 6)
    assert np.all(np.abs(D).sum(axis=1) == 2) and np.allclose(D.sum(axis=1), 0)
    img = np.arange(6.0).reshape(2, 3)
    assert np.allclose(np.sort(D @ img.ravel()), np.sort(np.r_[np.full(3, 3.0), np.ones(4)]))


def test_tv_degenerate_cases(rng):
    M = rng.standard_normal((6, 5))
    b = rng.standard_normal(6)
    prob = tv_l1_least_squares(M, b, 0.3, 1.0)
    assert prob.h.lam == 0.0 and np.allclose(prob.g.l1, 0.3)
    assert prob.objective(np.zeros(5)) == pytest.approx(0.5 * b @ b)
    with pytest.raises(ValueError):
        tv_l1_least_squares(M, b, 0.1, 1.5)
    with pytest.raises(ValueError):
        tv_l1_least_squares(M, b, 0.1, 0.5, dims=(2, 2))


def test_tv_lambda_zero_matches_least_squares():
    rng = np.random.default_rng(0)
    M, b = rng.standard_normal((20, 10)), rng.standard_normal(20)
    x, _ = run(tv_l1_least_squares(M, b, 0.0, 0.5), SolverConfig(beta1=100.0, max_iterations=20_000))
    assert np.allclose(x, np.linalg.lstsq(M, b, rcond=None)[0], atol=1e-4)


def test_synthetic_tv_reproducible():
    a, b = synthetic_tv_problem(seed=3), synthetic_tv_problem(seed=3)
    assert np.array_equal(a.f.b, b.f.b)
    assert len(np.unique(a.extras["xtrue"])) <= 5


def test_svm_structure():
    M, labels = separable_svm_data(m=30, p=4, seed=1)
    prob = svm_dual(M, labels)
    assert np.array_equal(prob.A.csc.toarray()[0], labels)
    assert prob.extras["lam"] == pytest.approx(1 / 30)
    F, feas, gap = metrics(prob, np.zeros(30))
    assert F == 0.0 and feas == 0.0 and gap > 0
    with pytest.raises(ValueError):
        svm_dual(M, np.zeros(30))


def test_svm_two_point_symmetric_optimum():
    feats = np.array([[1.0, 1.0], [0.5, 0.5]])
    prob = svm_dual(feats, np.array([1.0, -1.0]), C=1.0)
    # on the feasible line x1 = x2 = t the dual objective is -2t
    t, _ = grid_minimize_scalar(lambda t: prob.f.value(np.array([t, t])), 0.0, 1.0, 1e-3)
    assert t == pytest.approx(1.0)
    x, _ = run(prob, SolverConfig(beta1=1e-2, regime="constrained", max_iterations=20_000))
    assert x[0] == pytest.approx(x[1], abs=1e-3) and x[0] == pytest.approx(1.0, abs=1e-2)


def test_svm_gap_nonnegative(rng):
    M, labels = separable_svm_data(m=40, p=5, seed=2)
    prob = svm_dual(M, labels)
    for _ in range(10):
        x = rng.uniform(0, 1, 40)
        x -= labels * (labels @ x) / 40  # project onto b^T x = 0
        x = np.clip(x, 0, 1)
        if abs(labels @ x) < 1e-9:
            assert svm_duality_gap(prob, x) >= -1e-9


def test_separable_data_is_separable():
    M, labels = separable_svm_data(m=100, p=5, margin=0.2, seed=0)
    assert set(np.unique(labels)) == {-1.0, 1.0}


def test_libsvm_example(tmp_path):
    path = tmp_path / "d.txt"
    path.write_text("+1 1:0.5 3:2\n-1 2:1\n")
    M, labels = parse_libsvm(path)
    assert M.shape == (3, 2)
    assert M[0, 0] == 0.5 and M[2, 0] == 2 and M[1, 1] == 1
    assert list(labels) == [1, -1]


def test_libsvm_zero_label_and_comments(tmp_path):
    path = tmp_path / "d.txt"
    path.write_text("# header\n0 1:1\n\n1 2:3 # trailing\n")
    M, labels = parse_libsvm(path)
    assert list(labels) == [-1, 1] and M.shape == (2, 2)


@pytest.mark.parametrize("text", ["", "\n\n", "+1 0:1\n", "2 1:1\n", "+1 1=3\n"])
def test_libsvm_errors(tmp_path, text):
    path = tmp_path / "d.txt"
    path.write_text(text)
    with pytest.raises(LibsvmError):
        parse_libsvm(path)


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(p=st.integers(1, 8), m=st.integers(1, 12), seed=st.integers(0, 2**31))
def test_libsvm_round_trip(p, m, seed, tmp_path_factory):
    rng = np.random.default_rng(seed)
    M = sp.random(p, m, density=0.5, random_state=rng, format="lil")
    M[p - 1, 0] = 1.5  # keep the feature count fixed
    M = M.tocsc()
    M.data = rng.standard_normal(M.nnz)
    labels = rng.choice([-1.0, 1.0], size=m)
    path = tmp_path_factory.mktemp("svm") / "r.txt"
    write_libsvm(path, M, labels)
    M2, lab2 = parse_libsvm(path)
    assert M2.shape == M.shape
    assert (M2 != sp.csc_matrix(M)).nnz == 0
    assert np.array_equal(lab2, labels)


def test_build_named_and_registry(tmp_path):
    assert set(BUILDERS) >= {"degenerate_lp", "tv_l1", "svm_dual"}
    assert build_named("degenerate_lp", p=5, d=7).A.shape == (8, 5)
    M, labels = separable_svm_data(m=12, p=3)
    path = tmp_path / "s.txt"
    write_libsvm(path, M, labels)
    assert build_named("svm_dual", path=str(path)).n == 12
    with pytest.raises(KeyError):
        build_named("nope")


def test_sparse_column_matrix():
    mat = sparse_column_matrix(50, 200, 7, seed=1)
    assert np.all(np.diff(mat.indptr) == 7)
    assert mat.shape == (50, 200)
    with pytest.raises(ValueError):
        sparse_column_matrix(5, 10, 6)


def test_repartition_preserves_objective(rng):
    prob = synthetic_tv_problem(p=12, m=8)
    merged = prob.repartition([3, 4, 5])
    x = rng.standard_normal(12)
    assert merged.n == 3 and merged.objective(x) == pytest.approx(prob.objective(x))

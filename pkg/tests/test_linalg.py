import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lngca import InputError, SingularCovarianceError
from lngca.linalg import (
    SignedPermutation,
    center,
    center_whiten,
    covariance,
    hungarian,
    random_mixing,
    random_orthogonal,
    random_orthonormal,
    signed_perm_error,
    sym_orthogonalize,
    whiten,
)
from oracles import brute_assignment, brute_signed_perm_error


def test_whitening_contract():
    rng = np.random.default_rng(0)
    Y = rng.standard_normal((500, 5)) @ rng.standard_normal((5, 5)) + rng.normal(size=5)
    wr = center_whiten(Y)
    assert np.allclose(covariance(wr.Z), np.eye(5), atol=1e-10)
    assert np.allclose(wr.Z.mean(axis=0), 0, atol=1e-12)
    assert np.allclose(wr.inverse(), Y, atol=1e-10)
    assert np.allclose(wr.H, wr.H.T)
    assert np.allclose(wr.H @ wr.Hinv, np.eye(5), atol=1e-10)


def test_white_input_gives_identity_map():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((2000, 2))
    X = X - X.mean(axis=0)
    # exactly decorrelate and scale so the covariance is the identity
    evals, evecs = np.linalg.eigh(X.T @ X / len(X))
    X = X @ evecs / np.sqrt(evals) @ evecs.T
    wr = whiten(X)
    assert np.allclose(wr.H, np.eye(2), atol=1e-10)


def test_singular_covariance_raises():
    rng = np.random.default_rng(2)
    a = rng.standard_normal(100)
    Y = np.column_stack([a, 2 * a, rng.standard_normal(100)])
    with pytest.raises(SingularCovarianceError):
        center_whiten(Y)


def test_center_rejects_bad_input():
    with pytest.raises(InputError):
        center(np.array([[1.0, np.nan], [2.0, 3.0]]))
    with pytest.raises(InputError):
        center(np.ones((1, 3)))


def test_sym_orthogonalize_matches_inverse_root_formula():
    rng = np.random.default_rng(3)
    W = rng.standard_normal((3, 5))
    evals, evecs = np.linalg.eigh(W @ W.T)
    oracle = evecs @ np.diag(evals**-0.5) @ evecs.T @ W
    out = sym_orthogonalize(W)
    assert np.allclose(out, oracle, atol=1e-12)
    assert np.allclose(out @ out.T, np.eye(3), atol=1e-12)


def test_sym_orthogonalize_is_closest_orthonormal():
    rng = np.random.default_rng(4)
    W = rng.standard_normal((3, 3))
    U = sym_orthogonalize(W)
    for _ in range(200):
        V = random_orthogonal(3, rng)
        assert np.linalg.norm(W - U) <= np.linalg.norm(W - V) + 1e-12


def test_sym_orthogonalize_row_signs_commute():
    rng = np.random.default_rng(5)
    W = rng.standard_normal((4, 4))
    D = np.diag([1.0, -1.0, -1.0, 1.0])
    assert np.allclose(sym_orthogonalize(D @ W), D @ sym_orthogonalize(W), atol=1e-12)


def test_sym_orthogonalize_rank_deficient():
    W = np.array([[1.0, 0.0], [2.0, 0.0]])
    with pytest.raises(np.linalg.LinAlgError):
        sym_orthogonalize(W)


def test_random_orthonormal_rows():
    W = random_orthonormal(6, 3, 7)
    assert W.shape == (3, 6)
    assert np.allclose(W @ W.T, np.eye(3), atol=1e-12)


@pytest.mark.parametrize("p", [1, 2, 4, 10])
def test_random_mixing_condition_number(p):
    rng = np.random.default_rng(p)
    for _ in range(50):
        A = random_mixing(p, rng)
        s = np.linalg.svd(A, compute_uv=False)
        assert 1.0 - 1e-12 <= s[0] / s[-1] <= 2.0 + 1e-12
        assert np.isclose(s[-1], 1.0)
        if p > 2:
            assert np.allclose(np.diff(s), np.diff(s)[0])


def test_hungarian_matches_enumeration():
    rng = np.random.default_rng(8)
    for n in (1, 2, 3, 4, 5):
        for _ in range(20):
            cost = rng.random((n, n))
            assignment, total = hungarian(cost)
            assert sorted(assignment) == list(range(n))
            assert np.isclose(total, brute_assignment(cost), rtol=0, atol=1e-12)


def test_hungarian_rejects_non_square():
    with pytest.raises(InputError):
        hungarian(np.ones((2, 3)))


@settings(max_examples=60, deadline=None)
@given(
    q=st.integers(1, 4),
    extra=st.integers(0, 2),
    seed=st.integers(0, 2**32 - 1),
)
def test_signed_perm_error_matches_brute_force(q, extra, seed):
    rng = np.random.default_rng(seed)
    p = q + extra
    W0 = rng.standard_normal((q, p))
    What = rng.standard_normal((q, p))
    err, Q = signed_perm_error(W0, What)
    assert err == pytest.approx(brute_signed_perm_error(W0, What), abs=1e-12)
    # the returned alignment attains the minimum
    attained = ((W0 - Q.apply(What)) ** 2).sum() / np.sqrt(p * q)
    assert attained == pytest.approx(err, abs=1e-12)


def test_signed_perm_error_zero_on_signed_permutation():
    rng = np.random.default_rng(9)
    W0 = rng.standard_normal((3, 5))
    perm = np.array([2, 0, 1])
    signs = np.array([-1.0, 1.0, -1.0])
    What = np.empty_like(W0)
    What[perm] = signs[:, None] * W0
    err, Q = signed_perm_error(W0, What)
    assert err == 0.0
    assert np.array_equal(Q.apply(What), W0)


def test_signed_perm_error_shape_mismatch():
    with pytest.raises(InputError):
        signed_perm_error(np.eye(2), np.eye(3)[:2])


def test_signed_permutation_rows_and_columns_agree():
    rng = np.random.default_rng(10)
    Z = rng.standard_normal((50, 3))
    W = random_orthogonal(3, rng)
    for perm in itertools.permutations(range(3)):
        Q = SignedPermutation(np.array(perm), np.array([1.0, -1.0, 1.0]))
        assert np.allclose(Q.apply_columns(Z @ W.T), Z @ Q.apply(W).T)
    assert np.array_equal(SignedPermutation.identity(3).apply(W), W)

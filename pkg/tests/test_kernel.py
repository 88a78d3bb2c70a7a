import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_frame, random_skew
from liedetect.errors import DimensionMismatch, InvalidMatrix, NotPSD, NotSkewSymmetric
from liedetect.kernel import (
    L,
    block_skew,
    grassmann_distance,
    matrix_exponential_skew,
    normalized_block_skew,
    pseudo_inverse_sqrt,
    random_orthogonal,
    skew_schur_form,
    symmetric_eigendecomposition,
)

seeds = st.integers(0, 2**32 - 1)


def taylor_expm(A, tail=1e-14):
    # scaling and squaring around a plain power series, independent of eigh
    s = max(0, int(np.ceil(np.log2(max(np.linalg.norm(A, 1), 1e-300)))) + 1)
    B = A / 2**s
    out, term, k = np.eye(len(A)), np.eye(len(A)), 0
    while True:
        k += 1
        term = term @ B / k
        out = out + term
        if np.linalg.norm(term, 1) < tail:
            break
    for _ in range(s):
        out = out @ out
    return out


# ---------------------------------------------------------------- eigendecomposition

def test_eigh_identity():
    w, _ = symmetric_eigendecomposition(np.eye(3))
    assert np.allclose(w, [1, 1, 1])


def test_eigh_diagonal():
    w, V = symmetric_eigendecomposition(np.diag([0.0, 2.0]))
    assert np.allclose(w, [0, 2])
    assert np.allclose(np.abs(V), np.eye(2))


def test_eigh_reconstructs(rng):
    S = rng.standard_normal((5, 5))
    S = S + S.T
    w, V = symmetric_eigendecomposition(S)
    assert np.all(np.diff(w) >= 0)
    assert np.allclose(V.T @ V, np.eye(5), atol=1e-12)
    assert np.linalg.norm(V @ np.diag(w) @ V.T - S) <= 1e-8 * np.linalg.norm(S)


def test_eigh_rejects_nan():
    with pytest.raises(InvalidMatrix):
        symmetric_eigendecomposition(np.array([[1.0, np.nan], [np.nan, 1.0]]))


# ---------------------------------------------------------------- normal form

def test_schur_of_block_form():
    nf = skew_schur_form(normalized_block_skew([1, 4]))
    assert np.allclose(nf.block_rates, [1 / np.sqrt(34), 4 / np.sqrt(34)], atol=1e-12)
    assert np.allclose(nf.block_rates, [0.17150, 0.68599], atol=1e-5)


def test_schur_of_zero():
    nf = skew_schur_form(np.zeros((4, 4)))
    assert np.allclose(nf.block_rates, 0)
    assert np.allclose(nf.rotation.T @ nf.rotation, np.eye(4))


def test_schur_matches_complex_eigenvalues(rng):
    for _ in range(10):
        A = random_skew(rng, 6)
        nf = skew_schur_form(A)
        imag = np.sort(np.abs(np.linalg.eigvals(A).imag))[::2]
        assert np.allclose(nf.block_rates, imag, atol=1e-8)
        assert np.linalg.norm(nf.rotation.T @ nf.rotation - np.eye(6)) <= 1e-10
        assert np.allclose(nf.reconstruct(), A, atol=1e-8)


def test_schur_odd_dimension(rng):
    A = random_skew(rng, 5)
    nf = skew_schur_form(A)
    assert nf.residual_zero
    assert nf.block_rates.size == 2
    assert np.allclose(nf.reconstruct(), A, atol=1e-8)


def test_schur_rejects_symmetric():
    with pytest.raises(NotSkewSymmetric):
        skew_schur_form(np.eye(3))


@given(seeds, st.integers(2, 7))
def test_schur_rates_conjugation_invariant(seed, n):
    rng = np.random.default_rng(seed)
    A = random_skew(rng, n)
    O = random_orthogonal(n, rng, det=rng.choice([1, -1]))
    a = skew_schur_form(A).block_rates
    b = skew_schur_form(O @ A @ O.T).block_rates
    assert np.allclose(a, b, atol=1e-8)


# ---------------------------------------------------------------- exponential

def test_exp_quarter_turn():
    assert np.allclose(matrix_exponential_skew(L(np.pi / 2)), [[0, -1], [1, 0]], atol=1e-15)


def test_exp_zero():
    assert np.allclose(matrix_exponential_skew(np.zeros((3, 3))), np.eye(3))


def test_exp_matches_series(rng):
    for _ in range(10):
        A = random_skew(rng, 5)
        E = matrix_exponential_skew(A)
        assert np.allclose(E, taylor_expm(A), atol=1e-10)
        assert np.allclose(E.T @ E, np.eye(5), atol=1e-9)
        assert abs(np.linalg.det(E) - 1) < 1e-9


@given(seeds, st.integers(2, 6), st.floats(-10, 10))
def test_exp_lipschitz_bound(seed, n, t):
    rng = np.random.default_rng(seed)
    A = random_skew(rng, n)
    O = random_orthogonal(n, rng)
    B = O @ A @ O.T
    lhs = np.linalg.norm(matrix_exponential_skew(t * A) - matrix_exponential_skew(t * B))
    # the bound is stated for the normalized frame elements
    scale = np.linalg.norm(A)
    lhs = np.linalg.norm(matrix_exponential_skew(t * A / scale) - matrix_exponential_skew(t * B / scale))
    assert lhs <= abs(t) * np.linalg.norm(A - B) / scale + 1e-9


@given(seeds, st.integers(1, 6))
def test_outer_product_stability(seed, n):
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal(n), rng.standard_normal(n)
    lhs = np.linalg.norm(np.outer(x, x) - np.outer(y, y))
    rhs = (np.linalg.norm(x) + np.linalg.norm(y)) * np.linalg.norm(x - y)
    assert lhs <= rhs + 1e-12


# ---------------------------------------------------------------- pseudo-inverse square root

def test_pinv_sqrt_regular():
    assert np.allclose(pseudo_inverse_sqrt(np.diag([4.0, 1.0]), 1e-9), np.diag([0.5, 1.0]))


def test_pinv_sqrt_singular():
    assert np.allclose(pseudo_inverse_sqrt(np.diag([4.0, 0.0]), 1e-9), np.diag([0.5, 0.0]))


def test_pinv_sqrt_identity(rng):
    G = rng.standard_normal((4, 2))
    S = G @ G.T  # rank 2
    M = pseudo_inverse_sqrt(S, 1e-9)
    w, V = np.linalg.eigh(S)
    P = V[:, w > 1e-9] @ V[:, w > 1e-9].T
    assert np.allclose(M @ S @ M, P, atol=1e-8)


def test_pinv_sqrt_not_psd():
    with pytest.raises(NotPSD):
        pseudo_inverse_sqrt(np.diag([1.0, -1.0]), 1e-9)


# ---------------------------------------------------------------- Grassmann distance

def test_grassmann_same_frame(rng):
    F = random_frame(rng, 2, 4)
    assert grassmann_distance(F, F) == pytest.approx(0, abs=1e-7)


def test_grassmann_orthogonal_pair():
    A = normalized_block_skew([1, 0])[None]
    B = normalized_block_skew([0, 1])[None]
    assert grassmann_distance(A, B) == pytest.approx(np.sqrt(2))


def test_grassmann_d1_formula(rng):
    for _ in range(10):
        A, B = random_frame(rng, 1, 4), random_frame(rng, 1, 4)
        c = np.sum(A * B)
        g2 = grassmann_distance(A, B) ** 2
        assert g2 == pytest.approx(2 * (1 - c * c), abs=1e-12)
        # with m = min ||A -+ B||^2 = 2 - 2|c|, the square is 2m - m^2/2, so
        # 2m alone is only an upper bound (tight when the spans coincide)
        m = min(np.linalg.norm(A - B), np.linalg.norm(A + B)) ** 2
        assert g2 == pytest.approx(2 * m - m * m / 2, abs=1e-12)
        assert g2 <= 2 * m + 1e-12


def test_grassmann_mismatch(rng):
    with pytest.raises(DimensionMismatch):
        grassmann_distance(random_frame(rng, 1, 4), random_frame(rng, 2, 4))


def _projection_on_skew(F):
    n = F.shape[1]
    iu = np.triu_indices(n, 1)
    # coordinates in the orthonormal basis (E_ab - E_ba)/sqrt(2)
    C = np.array([np.sqrt(2) * A[iu] for A in F])
    Q, _ = np.linalg.qr(C.T)
    return Q @ Q.T


@given(seeds, st.integers(1, 3), st.integers(3, 6))
def test_grassmann_matches_projections(seed, d, n):
    rng = np.random.default_rng(seed)
    A, B = random_frame(rng, d, n), random_frame(rng, d, n)
    direct = np.linalg.norm(_projection_on_skew(A) - _projection_on_skew(B))
    assert grassmann_distance(A, B) == pytest.approx(direct, abs=1e-8)
    assert grassmann_distance(A, B) == pytest.approx(grassmann_distance(B, A), abs=1e-12)


def test_block_skew_padding():
    B = block_skew([1, 2], 5)
    assert B.shape == (5, 5)
    assert np.allclose(B[4], 0)

"""Dense matrix primitives shared by every stage.

Frames of skew-symmetric matrices are handled as arrays of shape (d, n, n).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, InvalidMatrix, NotPSD, NotSkewSymmetric

SKEW_TOL = 1e-10


def L(a: float) -> np.ndarray:
    """2x2 generator of planar rotations at rate a."""
    return np.array([[0.0, -a], [a, 0.0]])


def rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def block_skew(rates, n: int | None = None) -> np.ndarray:
    """diag(L(r1), ..., L(rm)), padded with zero rows/columns up to size n."""
    rates = np.asarray(rates, dtype=float)
    m = rates.size
    n = 2 * m if n is None else n
    if n < 2 * m:
        raise DimensionMismatch(f"{m} blocks do not fit in dimension {n}")
    out = np.zeros((n, n))
    idx = np.arange(m)
    out[2 * idx + 1, 2 * idx] = rates
    out[2 * idx, 2 * idx + 1] = -rates
    return out


def normalized_block_skew(weights, n: int | None = None) -> np.ndarray:
    """Unit-Frobenius version of block_skew, i.e. diag(L(k))/(sqrt(2)|k|)."""
    w = np.asarray(weights, dtype=float)
    norm = np.linalg.norm(w)
    if norm == 0:
        raise InvalidMatrix("cannot normalize the zero weight vector")
    return block_skew(w, n) / (np.sqrt(2.0) * norm)


def skew_part(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A - np.swapaxes(A, -1, -2))


def _check_finite(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidMatrix(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidMatrix("matrix has non-finite entries")
    return A


def symmetric_eigendecomposition(S: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues ascending and orthonormal eigenvectors (as columns)."""
    S = _check_finite(S)
    S = 0.5 * (S + S.T)
    w, V = np.linalg.eigh(S)
    return w, V


@dataclass(frozen=True)
class SkewNormalForm:
    """A = P diag(L(a1), ..., L(am) [, 0]) P^T with a1 <= ... <= am."""

    rotation: np.ndarray
    block_rates: np.ndarray
    residual_zero: bool

    def reconstruct(self) -> np.ndarray:
        n = self.rotation.shape[0]
        P = self.rotation
        return P @ block_skew(self.block_rates, n) @ P.T


def skew_schur_form(A: np.ndarray, tol: float = SKEW_TOL) -> SkewNormalForm:
    """Real normal form of a skew-symmetric matrix via the real Schur form."""
    A = _check_finite(A)
    if np.linalg.norm(A + A.T) > tol * max(1.0, np.linalg.norm(A)):
        raise NotSkewSymmetric("input is not skew-symmetric")
    A = skew_part(A)
    n = A.shape[0]
    T, Z = scipy.linalg.schur(A, output="real")

    # Walk the quasi-triangular factor: 2x2 bumps are rotation planes, 1x1
    # entries are (numerically) zero eigenvalues that get paired up.
    pairs, singles = [], []
    i = 0
    while i < n:
        if i + 1 < n and T[i + 1, i] != 0.0:
            pairs.append((i, i + 1))
            i += 2
        else:
            singles.append(i)
            i += 1
    for a, b in zip(singles[0::2], singles[1::2]):
        pairs.append((a, b))
    leftover = singles[-1] if len(singles) % 2 else None

    cols, rates = [], []
    for a, b in pairs:
        za, zb = Z[:, a].copy(), Z[:, b].copy()
        rate = zb @ A @ za
        if rate < 0:
            zb = -zb
            rate = -rate
        cols.append((za, zb))
        rates.append(rate)
    order = np.argsort(rates, kind="stable")
    P = np.zeros((n, n))
    for k, j in enumerate(order):
        P[:, 2 * k], P[:, 2 * k + 1] = cols[j]
    if leftover is not None:
        P[:, n - 1] = Z[:, leftover]
    return SkewNormalForm(P, np.asarray(rates, dtype=float)[order], leftover is not None)


def expm_skew(A: np.ndarray) -> np.ndarray:
    """exp of one skew matrix or a stack of them, shape (..., n, n).

    Goes through the Hermitian matrix iA, whose eigendecomposition is exact up
    to rounding and vectorizes over the stack.
    """
    A = np.asarray(A, dtype=float)
    lam, V = np.linalg.eigh(1j * A)
    phase = np.exp(-1j * lam)
    out = np.einsum("...ij,...j,...kj->...ik", V, phase, V.conj())
    return out.real


def matrix_exponential_skew(A: np.ndarray) -> np.ndarray:
    A = _check_finite(A)
    if np.linalg.norm(A + A.T) > SKEW_TOL * max(1.0, np.linalg.norm(A)):
        raise NotSkewSymmetric("input is not skew-symmetric")
    return expm_skew(skew_part(A))


def pseudo_inverse_sqrt(S: np.ndarray, rank_threshold: float) -> np.ndarray:
    """sqrt of the Moore-Penrose pseudo-inverse, truncated below rank_threshold."""
    if rank_threshold <= 0:
        raise InvalidMatrix("rank_threshold must be positive")
    w, V = symmetric_eigendecomposition(S)
    if w[0] < -1e-8:
        raise NotPSD(f"smallest eigenvalue {w[0]:.3e} is negative")
    keep = w > rank_threshold
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / np.sqrt(w[keep])
    return (V * inv) @ V.T


def frame_gram(A: np.ndarray, B: np.ndarray | None = None) -> np.ndarray:
    B = A if B is None else B
    return np.einsum("iab,jab->ij", A, B)


def orthonormalize_frame(mats: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Gram-Schmidt in the Frobenius inner product; drops dependent members."""
    mats = np.asarray(mats, dtype=float)
    out = []
    for M in mats:
        v = M.copy()
        for _ in range(2):
            for Q in out:
                v -= np.sum(v * Q) * Q
        nv = np.linalg.norm(v)
        if nv > tol * max(1.0, np.linalg.norm(M)):
            out.append(v / nv)
    if not out:
        return np.zeros((0,) + mats.shape[1:])
    return np.stack(out)


def grassmann_distance(A: np.ndarray, B: np.ndarray) -> float:
    """||P_span(A) - P_span(B)|| for two orthonormal d-frames."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim != 3 or A.shape != B.shape:
        raise DimensionMismatch(f"frames of shapes {A.shape} and {B.shape}")
    # d - sum <A_i, B_j>^2 is the squared residual of B off span(A); forming
    # the residual directly avoids the cancellation near zero
    G = frame_gram(A, B)
    R = B - np.einsum("ij,iab->jab", G, A)
    return float(np.sqrt(2.0 * np.sum(R * R)))


def random_orthogonal(n: int, rng: np.random.Generator, det: int = 1) -> np.ndarray:
    """Haar-distributed orthogonal matrix with the requested determinant sign."""
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) * det < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


def qr_retraction(O: np.ndarray, xi: np.ndarray) -> np.ndarray:
    Q, R = np.linalg.qr(O + xi)
    return Q * np.sign(np.diag(R))

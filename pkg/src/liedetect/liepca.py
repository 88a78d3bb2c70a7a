"""LiePCA: local normal spaces and the operator whose kernel is the symmetry algebra."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    ConfigError,
    DegenerateEigenframe,
    IsolatedPoint,
    TangentEstimationFailed,
    ZeroPointInCloud,
)
from .kernel import orthonormalize_frame, skew_part, symmetric_eigendecomposition
from .preprocess import as_points

MAX_AMBIENT = 32


@dataclass(frozen=True)
class LocalPcaConfig:
    intrinsic_dim: int
    radius: float | None = None
    k_neighbors: int | None = None

    def __post_init__(self):
        if self.intrinsic_dim < 1:
            raise ConfigError("intrinsic dimension must be positive")
        if (self.radius is None) == (self.k_neighbors is None):
            raise ConfigError("give exactly one of radius and k_neighbors")
        if self.radius is not None and self.radius <= 0:
            raise ConfigError("radius must be positive")
        if self.k_neighbors is not None and self.k_neighbors < 1:
            raise ConfigError("k_neighbors must be positive")


def _neighborhood(X: np.ndarray, i: int, config: LocalPcaConfig, tree: cKDTree | None) -> np.ndarray:
    tree = cKDTree(X) if tree is None else tree
    if config.radius is not None:
        idx = np.asarray(tree.query_ball_point(X[i], config.radius), dtype=int)
    else:
        k = min(config.k_neighbors + 1, X.shape[0])
        _, idx = tree.query(X[i], k=k)
        idx = np.atleast_1d(idx)
    if i not in idx:
        idx = np.append(idx, i)
    return idx


def local_covariance(cloud, i: int, config: LocalPcaConfig, tree: cKDTree | None = None,
                     strict: bool = False) -> np.ndarray:
    """(1/|Y|) sum (y - x_i)(y - x_i)^T over the neighborhood Y, x_i included.

    With strict set, a neighborhood reduced to x_i raises IsolatedPoint
    instead of returning the zero matrix.
    """
    X = as_points(cloud)
    idx = _neighborhood(X, i, config, tree)
    if strict and idx.size < 2:
        raise IsolatedPoint(f"point {i} has no neighbor within the chosen scale")
    D = X[idx] - X[i]
    return D.T @ D / idx.size


def _tangent_projection(C: np.ndarray, l: int, i: int) -> np.ndarray:
    n = C.shape[0]
    if l >= n:
        raise ConfigError(f"intrinsic dimension {l} must be smaller than ambient {n}")
    w, V = symmetric_eigendecomposition(C)
    if w[-1] <= 0 or w[-l] <= 1e-12 * w[-1]:
        raise TangentEstimationFailed(f"local covariance at point {i} has rank below {l}")
    U = V[:, -l:]
    return U @ U.T


def normal_projection_estimate(cloud, i: int, config: LocalPcaConfig, tree: cKDTree | None = None) -> np.ndarray:
    """I minus the projection onto the top-l local principal directions."""
    X = as_points(cloud)
    C = local_covariance(X, i, config, tree, strict=True)
    return np.eye(X.shape[1]) - _tangent_projection(C, config.intrinsic_dim, i)


def estimate_normals(cloud, config: LocalPcaConfig) -> np.ndarray:
    """Normal projections at every point, shape (N, n, n)."""
    X = as_points(cloud)
    N, n = X.shape
    if config.intrinsic_dim >= n:
        raise ConfigError(f"intrinsic dimension {config.intrinsic_dim} must be smaller than ambient {n}")
    tree = cKDTree(X)
    out = np.empty((N, n, n))
    if config.k_neighbors is not None:
        k = min(config.k_neighbors + 1, N)
        _, idx = tree.query(X, k=k)
        idx = idx.reshape(N, k)
        if k < 2:
            raise IsolatedPoint("a single point has no neighbors")
        D = X[idx] - X[:, None, :]
        covs = np.einsum("ika,ikb->iab", D, D) / k
        for i in range(N):
            out[i] = np.eye(n) - _tangent_projection(covs[i], config.intrinsic_dim, i)
        return out
    for i in range(N):
        out[i] = normal_projection_estimate(X, i, config, tree)
    return out


@dataclass
class LiePcaOperator:
    """Symmetric PSD operator on n x n matrices, stored as an n^2 x n^2 matrix.

    Matrices are flattened row-major, so Lambda(A) = (matrix @ A.ravel()).reshape(n, n).
    """

    n: int
    matrix: np.ndarray
    _eig: tuple | None = field(default=None, repr=False)
    _eig_skew: tuple | None = field(default=None, repr=False)

    def apply(self, A: np.ndarray) -> np.ndarray:
        return (self.matrix @ np.asarray(A).reshape(-1)).reshape(self.n, self.n)

    def eigen(self) -> tuple[np.ndarray, np.ndarray]:
        if self._eig is None:
            self._eig = symmetric_eigendecomposition(self.matrix)
        return self._eig

    def eigen_skew(self) -> tuple[np.ndarray, np.ndarray]:
        """Spectrum of the operator compressed to so(n); eigenvectors as flattened matrices."""
        if self._eig_skew is None:
            Q = skew_basis(self.n)
            w, V = symmetric_eigendecomposition(Q.T @ self.matrix @ Q)
            self._eig_skew = (w, Q @ V)
        return self._eig_skew

    def bottom_matrices(self, d: int, restrict_skew: bool = True) -> np.ndarray:
        w, V = self.eigen_skew() if restrict_skew else self.eigen()
        return V[:, :d].T.reshape(d, self.n, self.n)

    def bottom_frame(self, d: int, restrict_skew: bool = True) -> np.ndarray:
        """Skew-symmetrized, orthonormalized bottom eigen-matrices."""
        frame = orthonormalize_frame(skew_part(self.bottom_matrices(d, restrict_skew)))
        if frame.shape[0] < d:
            raise DegenerateEigenframe(f"bottom {d} eigen-matrices span only {frame.shape[0]} skew directions")
        return frame


def skew_basis(n: int) -> np.ndarray:
    """Orthonormal basis of so(n) as columns of flattened matrices, n^2 x n(n-1)/2."""
    cols = []
    for a in range(n):
        for b in range(a + 1, n):
            E = np.zeros((n, n))
            E[a, b], E[b, a] = 1 / np.sqrt(2), -1 / np.sqrt(2)
            cols.append(E.ravel())
    return np.array(cols).T if cols else np.zeros((n * n, 0))


def operator_from_projections(normals: np.ndarray, spans: np.ndarray) -> LiePcaOperator:
    """(1/N) sum kron(N_i, P_i) from stacks of normal and span projections."""
    N, n, _ = normals.shape
    acc = normals.reshape(N, n * n).T @ spans.reshape(N, n * n)  # [(a,c),(b,d)]
    M = acc.reshape(n, n, n, n).transpose(0, 2, 1, 3).reshape(n * n, n * n) / N
    return LiePcaOperator(n, 0.5 * (M + M.T))


def build_lie_pca(cloud, config: LocalPcaConfig | None = None,
                  normals_override: Callable[[np.ndarray], np.ndarray] | np.ndarray | None = None) -> LiePcaOperator:
    """Assemble Lambda(A) = (1/N) sum N_i A Pi_span(x_i).

    normals_override supplies exact normal projections, either as a callable
    of the point or as an (N, n, n) array; config is then unused.
    """
    X = as_points(cloud)
    N, n = X.shape
    if n > MAX_AMBIENT:
        raise ConfigError(f"ambient dimension {n} exceeds the supported maximum {MAX_AMBIENT}")
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms < 1e-12):
        raise ZeroPointInCloud("Pi_span(x) is undefined at the origin")
    if normals_override is None:
        if config is None:
            raise ConfigError("a LocalPcaConfig is required without normals_override")
        normals = estimate_normals(X, config)
    elif callable(normals_override):
        normals = np.stack([normals_override(x) for x in X])
    else:
        normals = np.asarray(normals_override, dtype=float)
        if normals.shape != (N, n, n):
            raise ConfigError(f"normals_override must have shape {(N, n, n)}")
    U = X / norms[:, None]
    spans = np.einsum("ia,ib->iab", U, U)
    return operator_from_projections(normals, spans)


def spectrum_report(op: LiePcaOperator, restrict_skew: bool = False) -> np.ndarray:
    w, _ = op.eigen_skew() if restrict_skew else op.eigen()
    return w.copy()


def estimate_symmetry_dimension(eigenvalues, gap_ratio: float = 5.0, max_dim: int | None = None) -> int:
    """Number of eigenvalues below the most pronounced spectral gap.

    Scans ratios eig[d] / max(eig[d-1], 1e-12) for d = 1..max_dim and keeps
    the largest ratio among those reaching gap_ratio; 0 when none does.
    """
    w = np.sort(np.asarray(eigenvalues, dtype=float))
    if w.size < 2:
        raise ConfigError("need at least two eigenvalues")
    top = w.size - 1 if max_dim is None else min(max_dim, w.size - 1)
    best, best_ratio = 0, 0.0
    for d in range(1, top + 1):
        ratio = w[d] / max(w[d - 1], 1e-12)
        if ratio >= gap_ratio and ratio > best_ratio:
            best, best_ratio = d, ratio
    return best

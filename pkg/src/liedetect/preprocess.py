"""Whitening of the input cloud so that the underlying action becomes orthogonal."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import AmbiguousCut, ConfigError, DegenerateCloud
from .kernel import pseudo_inverse_sqrt, symmetric_eigendecomposition

STAGES = ("raw", "projected", "orthonormalized")


@dataclass
class PointCloud:
    points: np.ndarray
    stage: str = "raw"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ConfigError("point cloud must contain at least one point")
        if not np.all(np.isfinite(pts)):
            raise ConfigError("point cloud has non-finite coordinates")
        if self.stage not in STAGES:
            raise ConfigError(f"unknown stage {self.stage!r}")
        self.points = pts

    @property
    def n(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]


def as_points(cloud) -> np.ndarray:
    return cloud.points if isinstance(cloud, PointCloud) else np.atleast_2d(np.asarray(cloud, dtype=float))


def covariance(cloud) -> np.ndarray:
    """Uncentered covariance (1/N) sum x x^T."""
    X = as_points(cloud)
    return X.T @ X / X.shape[0]


@dataclass
class PreprocessResult:
    cloud: PointCloud  # M Pi x, expressed in the input coordinates
    basis: np.ndarray  # n x k, retained eigenvectors
    factor: np.ndarray  # n x n, the map M Pi
    retained_dimension: int
    covariance_spectrum: np.ndarray  # descending

    def reduced(self) -> PointCloud:
        """The output cloud in coordinates of the retained subspace (R^k)."""
        return PointCloud(self.cloud.points @ self.basis, "orthonormalized", dict(self.cloud.meta))

    def transform(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.factor.T

    def restore(self, reduced_points: np.ndarray) -> np.ndarray:
        """Map points given in reduced coordinates back to the input space (pseudo-inverse of the factor)."""
        Y = np.asarray(reduced_points, dtype=float) @ self.basis.T
        return Y @ np.linalg.pinv(self.factor).T

    def summary(self) -> dict:
        return {
            "retained_dimension": self.retained_dimension,
            "covariance_spectrum": [float(x) for x in self.covariance_spectrum],
        }


def default_epsilon(spectrum_desc: np.ndarray) -> float:
    return 1e-9 * float(max(spectrum_desc[0], 0.0)) if spectrum_desc.size else 1e-9


def orthonormalize(cloud, epsilon: float | None = None) -> PreprocessResult:
    """Apply sqrt(Sigma^+) restricted to eigenvalues above epsilon."""
    X = as_points(cloud)
    meta = dict(cloud.meta) if isinstance(cloud, PointCloud) else {}
    S = covariance(X)
    w, V = symmetric_eigendecomposition(S)
    w, V = w[::-1], V[:, ::-1]
    if epsilon is None:
        epsilon = default_epsilon(w)
    if epsilon <= 0:
        raise ConfigError("epsilon must be positive")
    keep = w > epsilon
    k = int(keep.sum())
    if k == 0:
        raise DegenerateCloud(f"no covariance eigenvalue exceeds epsilon={epsilon:g}")
    M = pseudo_inverse_sqrt(S, epsilon)
    basis = V[:, :k]
    factor = M @ (basis @ basis.T)
    out = PointCloud(X @ factor.T, "orthonormalized", meta)
    return PreprocessResult(out, basis, factor, k, w)


def epsilon_for_dimension(spectrum_desc: np.ndarray, target_dim: int) -> float:
    """A threshold sitting between the target_dim-th and next eigenvalue."""
    n = spectrum_desc.size
    if not 1 <= target_dim <= n:
        raise ConfigError(f"target dimension {target_dim} outside [1, {n}]")
    hi = spectrum_desc[target_dim - 1]
    lo = spectrum_desc[target_dim] if target_dim < n else 0.0
    if hi - lo < 1e-12:
        warnings.warn(f"eigenvalues {hi:.3e} and {lo:.3e} tie at the cut", AmbiguousCut, stacklevel=2)
    lo = max(lo, 0.0)
    return float(np.sqrt(hi * lo)) if lo > 0 else 0.5 * hi


def project_to_dimension(cloud, target_dim: int) -> PointCloud:
    """Coordinates in the top target_dim eigenvectors of the covariance."""
    X = as_points(cloud)
    meta = dict(cloud.meta) if isinstance(cloud, PointCloud) else {}
    n = X.shape[1]
    if not 1 <= target_dim <= n:
        raise ConfigError(f"target dimension {target_dim} outside [1, {n}]")
    w, V = symmetric_eigendecomposition(covariance(X))
    w, V = w[::-1], V[:, ::-1]
    if target_dim < n and w[target_dim - 1] - w[target_dim] < 1e-12:
        warnings.warn("eigenvalue tie at the requested cut; keeping the first indices", AmbiguousCut, stacklevel=2)
    meta["projection_basis"] = V[:, :target_dim]
    return PointCloud(X @ V[:, :target_dim], "projected", meta)


def center(cloud) -> PointCloud:
    X = as_points(cloud)
    meta = dict(cloud.meta) if isinstance(cloud, PointCloud) else {}
    meta["center"] = X.mean(axis=0)
    stage = cloud.stage if isinstance(cloud, PointCloud) else "raw"
    return PointCloud(X - X.mean(axis=0), stage, meta)


def read_csv(path, header: bool = False) -> PointCloud:
    try:
        pts = np.loadtxt(path, delimiter=",", skiprows=1 if header else 0, ndmin=2)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return PointCloud(pts, "raw", {"source": str(path)})

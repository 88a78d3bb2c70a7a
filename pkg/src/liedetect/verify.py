"""Orbit reconstruction and goodness-of-fit distances."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog
from scipy.sparse import coo_matrix
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist
from scipy.stats import qmc

from . import catalog
from .errors import BadWeights, ConfigError, DimensionMismatch, EmptySample, EmptySet
from .fit import FitResult
from .kernel import expm_skew
from .preprocess import PointCloud, as_points

DEFAULT_K = {1: 500, 2: 5000, 3: 8000}


# ---------------------------------------------------------------- sampling

def parameter_grid(d: int, K: int, domain: str = "box", seed: int = 0) -> np.ndarray:
    """K low-discrepancy parameters in [0,1)^d (box) or the unit ball of R^d (ball)."""
    if K < 1:
        raise EmptySample("at least one sample point is required")
    if domain == "box":
        if d == 1:
            return (np.arange(K) / K)[:, None]
        return qmc.Halton(d, scramble=True, seed=seed).random(K)
    if domain == "ball":
        if d == 1:
            return (-1.0 + (2.0 * np.arange(K) + 1.0) / K)[:, None]
        eng = qmc.Halton(d, scramble=True, seed=seed)
        out = np.zeros((0, d))
        while len(out) < K:
            t = 2.0 * eng.random(2 * K) - 1.0
            out = np.vstack([out, t[np.sum(t * t, axis=1) <= 1.0]])
        return out[:K]
    raise ConfigError(f"unknown parameter domain {domain!r}")


def haar_su2_parameters(K: int, seed: int = 0) -> np.ndarray:
    """Algebra coordinates t = theta*u of K Haar-spread SU(2) elements.

    Unit quaternions come from low-discrepancy points in the cube through
    Shoemake's uniform map; q = (cos(theta/2), sin(theta/2) u) then equals
    exp(sum t_i e_i) for generators with [e1,e2]=e3 and cyclic.
    """
    if K < 1:
        raise EmptySample("at least one sample point is required")
    u1, u2, u3 = qmc.Halton(3, scramble=True, seed=seed).random(K).T
    q = np.stack([
        np.sqrt(1 - u1) * np.sin(2 * np.pi * u2),
        np.sqrt(1 - u1) * np.cos(2 * np.pi * u2),
        np.sqrt(u1) * np.sin(2 * np.pi * u3),
        np.sqrt(u1) * np.cos(2 * np.pi * u3),
    ], axis=1)
    return quaternion_to_algebra(q)


def quaternion_to_algebra(q: np.ndarray) -> np.ndarray:
    """t = theta*u with exp(sum t_i e_i) equal to the SU(2) element q, theta in [0, 2pi]."""
    q = np.asarray(q, dtype=float)
    theta = 2.0 * np.arccos(np.clip(q[..., 0], -1.0, 1.0))
    v = q[..., 1:]
    nv = np.linalg.norm(v, axis=-1, keepdims=True)
    axis = np.divide(v, nv, out=np.zeros_like(v), where=nv > 0)
    return theta[..., None] * axis


def group_elements(generators: np.ndarray, K: int, domain: str = "box", radius: float = 2 * np.pi,
                   seed: int = 0) -> np.ndarray:
    """K orthogonal matrices exp(radius * sum t_i G_i); domain 'haar' ignores radius."""
    G = np.asarray(generators, dtype=float)
    if domain == "haar":
        if len(G) != 3:
            raise DimensionMismatch("Haar sampling of SU(2) needs three generators")
        T = haar_su2_parameters(K, seed)
    else:
        T = radius * parameter_grid(len(G), K, domain, seed)
    return expm_skew(np.tensordot(T, G, axes=1))


@dataclass
class OrbitSample:
    base_point: np.ndarray
    frame: np.ndarray
    points: np.ndarray
    coverage_radius: float


def sample_orbit(frame: np.ndarray, x, K: int, coverage_radius: float, domain: str = "box",
                 seed: int = 0) -> OrbitSample:
    """Points exp(R sum t_i A_i) x for a low-discrepancy grid of t."""
    x = np.asarray(x, dtype=float)
    if np.linalg.norm(x) == 0:
        raise ConfigError("base point must be nonzero")
    E = group_elements(frame, K, domain, coverage_radius, seed)
    return OrbitSample(x, np.asarray(frame), E @ x, float(coverage_radius))


def so2_coverage_radius(weights) -> float:
    """Period of exp(t B(k)) for the unit-norm frame B(k) of primitive weights."""
    return 2 * np.pi * np.sqrt(2.0) * float(np.linalg.norm(weights))


def fit_group_elements(fit: FitResult, K: int, seed: int = 0) -> np.ndarray:
    """Group elements covering the fitted group once, in the fitted coordinates."""
    domain = "box" if fit.rep.group in catalog.ABELIAN else "haar"
    return group_elements(fit.generators, K, domain, 2 * np.pi, seed)


# ---------------------------------------------------------------- distances

def _nonempty(A) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] == 0 or A.size == 0:
        raise EmptySet("point set is empty")
    return A


def hausdorff_one_sided(A, B) -> float:
    """sup over a in A of the distance from a to B."""
    A, B = _nonempty(A), _nonempty(B)
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatch("point sets live in different dimensions")
    dist, _ = cKDTree(B).query(A)
    return float(np.max(dist))


def hausdorff_symmetric(A, B) -> float:
    return max(hausdorff_one_sided(A, B), hausdorff_one_sided(B, A))


def _weights(w, size: int) -> np.ndarray:
    if w is None:
        return np.full(size, 1.0 / size)
    w = np.asarray(w, dtype=float)
    if w.shape != (size,) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise BadWeights("weights must be non-negative and sum to 1")
    return w


def _sq_dists(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    # differences first: the expanded form loses the small distances
    return cdist(A, B, "sqeuclidean")


def _transport_lp(a: np.ndarray, b: np.ndarray, C: np.ndarray, I: np.ndarray, J: np.ndarray):
    # transport LP restricted to the edges (I, J); presolve only slows these down
    N, M = C.shape
    E = len(I)
    rows = np.concatenate([I, N + J])
    cols = np.concatenate([np.arange(E), np.arange(E)])
    A_eq = coo_matrix((np.ones(2 * E), (rows, cols)), shape=(N + M, E)).tocsr()
    return linprog(C[I, J], A_eq=A_eq, b_eq=np.concatenate([a, b]), bounds=(0, None),
                   method="highs", options={"presolve": False})


def _northwest_corner(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # support of the northwest-corner plan, always feasible
    ca = np.concatenate([[0.0], np.cumsum(a)])
    cb = np.concatenate([[0.0], np.cumsum(b)])
    cuts = np.unique(np.concatenate([ca, cb]))
    mid = (cuts[:-1] + cuts[1:]) / 2
    I = np.clip(np.searchsorted(ca, mid, side="right") - 1, 0, len(a) - 1)
    J = np.clip(np.searchsorted(cb, mid, side="right") - 1, 0, len(b) - 1)
    return I, J


def _sparse_transport(a: np.ndarray, b: np.ndarray, C: np.ndarray, k: int = 16,
                      max_rounds: int = 100) -> float:
    """Exact transport by column generation over nearest-neighbor edges.

    Starts from the k cheapest edges of every row and column, solves the
    restricted LP and adds every edge with negative reduced cost until none
    is left, at which point the restricted optimum is a global one.
    """
    N, M = C.shape
    # a point on the small side ships to about M/N (or N/M) points of the other
    kr = min(M, k + 6 * -(-M // N)) if M > N else min(k, M)
    kc = min(N, k + 6 * -(-N // M)) if N > M else max(1, min(N, -(-k * N // M)))
    rows = np.argpartition(C, kc - 1, axis=0)[:kc]
    cols = np.argpartition(C, kr - 1, axis=1)[:, :kr]
    keys = np.unique(np.concatenate([(rows * M + np.arange(M)).ravel(),
                                     (np.arange(N)[:, None] * M + cols).ravel()]))
    # matches the solver's dual feasibility tolerance
    tol = 1e-7 * max(1.0, float(C.max()))
    for _ in range(max_rounds):
        res = _transport_lp(a, b, C, keys // M, keys % M)
        if res.status == 2:  # infeasible support
            I, J = _northwest_corner(a, b)
            keys = np.union1d(keys, I * M + J)
            continue
        if not res.success:
            raise ConfigError(f"transport LP failed: {res.message}")
        y = res.eqlin.marginals
        bad = np.flatnonzero((C - y[:N, None] - y[None, N:]).ravel() < -tol)
        bad = np.setdiff1d(bad, keys, assume_unique=True)
        if bad.size == 0:
            return float(res.fun)
        keys = np.union1d(keys, bad)
    raise ConfigError("transport column generation did not converge")


def _exact_transport(a: np.ndarray, b: np.ndarray, C: np.ndarray) -> float:
    N, M = C.shape
    if N == M and np.allclose(a, 1.0 / N) and np.allclose(b, 1.0 / M):
        r, c = linear_sum_assignment(C)
        return float(C[r, c].mean())
    if N * M > 90_000:
        return _sparse_transport(a, b, C)
    res = _transport_lp(a, b, C, np.repeat(np.arange(N), M), np.tile(np.arange(M), N))
    if not res.success:
        raise ConfigError(f"transport LP failed: {res.message}")
    return float(res.fun)


def _lse(M: np.ndarray, axis: int) -> np.ndarray:
    m = M.max(axis=axis, keepdims=True)
    return (m + np.log(np.exp(M - m).sum(axis=axis, keepdims=True))).squeeze(axis)


def sinkhorn_plan(a: np.ndarray, b: np.ndarray, C: np.ndarray, reg: float,
                  max_iters: int = 5000, tol: float = 1e-4) -> np.ndarray:
    """Entropic transport plan by log-domain Sinkhorn iterations.

    The regularization is annealed from the median cost down to reg, halving
    at each stage and warm-starting the potentials; every stage stops once
    the row marginals are within a relative tol of a.
    """
    la, lb = np.log(a), np.log(b)
    f = np.zeros_like(a)
    g = np.zeros_like(b)
    stages = [reg]
    while stages[-1] < 0.5 * max(float(np.median(C)), reg):
        stages.append(2 * stages[-1])
    for eps in stages[::-1]:
        K = -C / eps
        for it in range(max_iters):
            f = eps * (la - _lse(K + g[None, :] / eps, axis=1))
            g = eps * (lb - _lse(K + f[:, None] / eps, axis=0))
            if it % 10 == 9:
                row = np.exp(_lse(K + (f[:, None] + g[None, :]) / eps, axis=1))
                if np.max(np.abs(row - a) / a) < tol:
                    break
    return np.exp(K + (f[:, None] + g[None, :]) / reg)


def wasserstein2(A, B, a_weights=None, b_weights=None, method: str = "exact",
                 reg: float | None = None) -> float:
    """W2 between discrete measures; sinkhorn defaults to reg = 0.01 * median squared distance."""
    A, B = _nonempty(A), _nonempty(B)
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatch("point sets live in different dimensions")
    a = _weights(a_weights, len(A))
    b = _weights(b_weights, len(B))
    C = _sq_dists(A, B)
    if method == "exact":
        return float(np.sqrt(max(_exact_transport(a, b, C), 0.0)))
    if method == "sinkhorn":
        if reg is None:
            med = float(np.median(C))
            reg = 0.01 * med if med > 0 else 1e-3
        if reg <= 0:
            raise ConfigError("reg must be positive")
        P = sinkhorn_plan(a, b, C, reg)
        return float(np.sqrt(max(np.sum(P * C), 0.0)))
    raise ConfigError(f"unknown transport method {method!r}")


def average_orbit_measure(cloud, frame: np.ndarray, per_point_K: int, coverage_radius: float = 2 * np.pi,
                          domain: str = "box", seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Union of per-point orbit samples, each point weighted 1/(N K)."""
    X = as_points(cloud)
    E = group_elements(frame, per_point_K, domain, coverage_radius, seed)
    pts = np.einsum("kab,ib->ika", E, X).reshape(-1, X.shape[1])
    return pts, np.full(len(pts), 1.0 / len(pts))


# ---------------------------------------------------------------- verdict

@dataclass(frozen=True)
class Thresholds:
    one_sided: float = 0.35
    symmetric: float = 0.42
    reverse: float = 0.7


@dataclass
class VerificationReport:
    hausdorff_in_to_orbit: float
    hausdorff_orbit_to_in: float
    hausdorff_symmetric: float
    verdict: str
    thresholds: Thresholds = field(default_factory=Thresholds)
    wasserstein2: float | None = None
    base_index: int = 0
    orbit_samples: int = 0
    scale: float = 1.0

    def to_dict(self) -> dict:
        return {
            "hausdorff_in_to_orbit": self.hausdorff_in_to_orbit,
            "hausdorff_orbit_to_in": self.hausdorff_orbit_to_in,
            "hausdorff_symmetric": self.hausdorff_symmetric,
            "symmetric_below_threshold": self.hausdorff_symmetric < self.thresholds.symmetric,
            "wasserstein2": self.wasserstein2,
            "verdict": self.verdict,
            "base_index": self.base_index,
            "orbit_samples": self.orbit_samples,
            "scale": self.scale,
            "thresholds": vars(self.thresholds),
        }


def verdict_for(forward: float, backward: float, thresholds: Thresholds) -> str:
    if forward < thresholds.one_sided:
        return "success"
    if backward < thresholds.reverse:
        return "non-transitive-suspected"
    return "fail"


def verify(cloud: PointCloud, fit: FitResult, base_point: str | int = "first", K: int | None = None,
           compute_w2: bool = False, thresholds: Thresholds | None = None, seed: int = 0,
           per_point_K: int = 50) -> VerificationReport:
    """Hausdorff (and optionally W2) distances between the cloud and the fitted orbit.

    Distances are measured after rescaling the cloud to unit root-mean-square
    norm; the factor is kept in the report.
    """
    if not isinstance(cloud, PointCloud) or cloud.stage == "raw":
        raise ConfigError("distance thresholds only apply to orthonormalized clouds")
    # thresholds are calibrated for points of norm about 1, while the
    # orthonormalized cloud has mean squared norm equal to its dimension
    scale = float(np.sqrt(np.mean(np.sum(cloud.points**2, axis=1))))
    X = cloud.points / scale
    n = fit.conjugator.shape[0]
    if X.shape[1] != n:
        raise DimensionMismatch(f"fit lives in R^{n}, cloud in R^{X.shape[1]}")
    thresholds = thresholds or Thresholds()
    K = K or DEFAULT_K.get(fit.rep.dim, 8000)
    E = fit_group_elements(fit, K, seed)
    tree_X = cKDTree(X)

    if base_point == "first":
        idx = 0
    elif base_point == "best":
        idx, best = 0, np.inf
        for i in range(len(X)):
            orbit = E @ X[i]
            dist, _ = cKDTree(orbit).query(X, distance_upper_bound=best)
            h = float(np.max(dist))
            if h < best:
                idx, best = i, h
    elif isinstance(base_point, (int, np.integer)):
        idx = int(base_point)
    else:
        raise ConfigError(f"unknown base-point mode {base_point!r}")

    orbit = E @ X[idx]
    forward = float(np.max(cKDTree(orbit).query(X)[0]))
    backward = float(np.max(tree_X.query(orbit)[0]))
    w2 = None
    if compute_w2:
        domain = "box" if fit.rep.group in catalog.ABELIAN else "haar"
        pts, wts = average_orbit_measure(X, fit.generators, per_point_K, 2 * np.pi, domain, seed)
        w2 = wasserstein2(X, pts, None, wts, method="exact")
    return VerificationReport(forward, backward, max(forward, backward),
                              verdict_for(forward, backward, thresholds), thresholds, w2, idx, K, scale)

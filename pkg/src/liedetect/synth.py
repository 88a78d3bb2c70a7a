"""Synthetic orbit samples and orbit-based density sampling."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.spatial import cKDTree

from . import catalog
from .catalog import RepType
from .errors import ConfigError, DegenerateBasePoint, SamplerStalled
from .kernel import expm_skew
from .preprocess import PointCloud, as_points
from .verify import group_elements, quaternion_to_algebra

SAMPLER_MODES = ("multi_source_liepca", "multi_source_liedetect", "single_source_liedetect")


def haar_element(group: str, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Haar-distributed group parameters.

    SO2 and tori give angles in [0, 2pi)^d; SU2 and SO3 give unit quaternions
    (a normalized 4-dimensional Gaussian, pushed to SO(3) for the latter).
    """
    tag, d = catalog.parse_group(group)
    shape = () if size is None else (size,)
    if tag in catalog.ABELIAN:
        return rng.uniform(0.0, 2 * np.pi, shape + (d,))
    q = rng.standard_normal(shape + (4,))
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def quaternion_to_rotation(q: np.ndarray) -> np.ndarray:
    w, x, y, z = np.moveaxis(np.asarray(q, dtype=float), -1, 0)
    return np.stack([
        np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], -1),
        np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], -1),
        np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], -1),
    ], -2)


def irrep_blocks(rep: RepType, n: int) -> list[tuple[int, int, bool]]:
    """(start, size, nontrivial) for every irreducible block, padding included."""
    blocks = []
    if rep.group in catalog.ABELIAN:
        weights = np.array([rep.payload] if rep.group == "SO2" else rep.payload).T  # (m, d)
        for k, w in enumerate(weights):
            blocks.append((2 * k, 2, bool(np.any(w != 0))))
        if n % 2:
            blocks.append((n - 1, 1, False))
    else:
        start = 0
        for p in rep.payload:
            blocks.append((start, p, p > 1))
            start += p
    return blocks


def default_base_point(rep: RepType, n: int | None = None) -> np.ndarray:
    """Unit vector with norm 1/sqrt(#blocks) on every irreducible block.

    Inside nonabelian blocks the direction is a fixed generic one, different
    for each block so that repeated irreps do not collapse onto a diagonal.
    """
    n = rep.size if n is None else n
    catalog._padding(rep, n)
    blocks = [b for b in irrep_blocks(rep, n) if rep.group not in catalog.ABELIAN or b[1] == 2]
    x = np.zeros(n)
    gen = np.random.default_rng(20240611)
    for start, size, _ in blocks:
        v = np.zeros(size)
        if rep.group in catalog.ABELIAN or size == 1:
            v[0] = 1.0
        else:
            v = gen.standard_normal(size)
            v /= np.linalg.norm(v)
        x[start:start + size] = v / np.sqrt(len(blocks))
    return x


@dataclass
class OrbitSpec:
    rep: RepType
    N: int
    n: int | None = None
    base_point: np.ndarray | None = None
    noise_sigma: float = 0.0
    outliers: int = 0
    seed: int = 0
    spacing: str = "haar"  # or "regular", one-parameter groups only
    stretch: np.ndarray | None = None  # linear map applied before noise

    @property
    def group(self) -> str:
        return self.rep.tag

    def validate(self) -> None:
        n = self.rep.size if self.n is None else self.n
        catalog._padding(self.rep, n)
        if self.N < 1:
            raise ConfigError("N must be positive")
        if self.noise_sigma < 0 or self.outliers < 0:
            raise ConfigError("noise and outlier count must be non-negative")
        if self.spacing not in ("haar", "regular"):
            raise ConfigError(f"unknown spacing {self.spacing!r}")
        if self.spacing == "regular" and self.rep.dim != 1:
            raise ConfigError("regular spacing is only defined for SO(2)")

    @classmethod
    def from_json(cls, text: str) -> "OrbitSpec":
        raw = json.loads(text)
        tag, _ = catalog.parse_group(raw["group"])
        payload = raw["payload"]
        payload = tuple(tuple(r) for r in payload) if tag == "T" else tuple(payload)
        base = raw.get("base_point")
        stretch = raw.get("stretch")
        return cls(RepType(tag, payload), int(raw.get("N", 100)), raw.get("n"),
                   None if base is None else np.asarray(base, dtype=float),
                   float(raw.get("sigma", 0.0)), int(raw.get("outliers", 0)), int(raw.get("seed", 0)),
                   raw.get("spacing", "haar"),
                   None if stretch is None else np.asarray(stretch, dtype=float))


def _check_base_point(rep: RepType, x: np.ndarray) -> None:
    for start, size, nontrivial in irrep_blocks(rep, x.size):
        if nontrivial and np.linalg.norm(x[start:start + size]) == 0:
            raise DegenerateBasePoint(f"base point has no mass on the block at coordinate {start}")


def orbit_elements(rep: RepType, n: int, N: int, rng: np.random.Generator, spacing: str = "haar") -> np.ndarray:
    gens = catalog.generators(rep, n)
    if spacing == "regular":
        angles = (2 * np.pi * np.arange(N) / N)[:, None]
    elif rep.group in catalog.ABELIAN:
        angles = haar_element(f"T{rep.dim}", rng, N)
    else:
        angles = quaternion_to_algebra(haar_element("SU2", rng, N))
    return expm_skew(np.tensordot(angles, gens, axes=1))


def sample_orbit_uniform(spec: OrbitSpec) -> PointCloud:
    """Haar-uniform orbit sample with additive Gaussian noise and uniform outliers."""
    spec.validate()
    n = spec.rep.size if spec.n is None else spec.n
    x0 = default_base_point(spec.rep, n) if spec.base_point is None else np.asarray(spec.base_point, dtype=float)
    if x0.shape != (n,):
        raise ConfigError(f"base point must have {n} coordinates")
    _check_base_point(spec.rep, x0)
    rng = np.random.default_rng(spec.seed)
    pts = orbit_elements(spec.rep, n, spec.N, rng, spec.spacing) @ x0
    if spec.stretch is not None:
        pts = pts @ np.asarray(spec.stretch, dtype=float).T
    if spec.noise_sigma > 0:
        pts = pts + spec.noise_sigma * rng.standard_normal(pts.shape)
    if spec.outliers:
        pts = np.vstack([pts, rng.uniform(-1.0, 1.0, (spec.outliers, n))])
    meta = {"rep": spec.rep.to_dict(), "base_point": x0.tolist(), "sigma": spec.noise_sigma,
            "outliers": spec.outliers, "seed": spec.seed}
    return PointCloud(pts, "raw", meta)


def running_example(N: int = 300, sigma: float = 0.01, seed: int = 0, spacing: str = "regular",
                    outliers: int = 0) -> PointCloud:
    """Points near (cos t, 2 sin t, cos 4t, sin 4t)."""
    spec = OrbitSpec(RepType("SO2", (1, 4)), N, 4, np.array([1.0, 0.0, 1.0, 0.0]), sigma, outliers,
                     seed, spacing, np.diag([1.0, 2.0, 1.0, 1.0]))
    return sample_orbit_uniform(spec)


# ---------------------------------------------------------------- density sampling

def silverman_factor(N: int, l: int) -> float:
    """(N(l+2)/4)^(-1/(l+4)) for N points on an l-dimensional manifold."""
    if N < 1 or l < 1:
        raise ConfigError("N and l must be positive")
    return float((N * (l + 2) / 4.0) ** (-1.0 / (l + 4)))


def resample_threshold(cloud) -> float:
    """Largest nearest-neighbor distance in the cloud."""
    X = as_points(cloud)
    if len(X) < 2:
        return np.inf
    dist, _ = cKDTree(X).query(X, k=2)
    return float(dist[:, 1].max())


def _parameter_scale(X: np.ndarray, frames: np.ndarray, factor: float) -> np.ndarray:
    # standard deviation per generator so that a draw moves points by about
    # factor * (cloud radius), measured through the mean speed |A_k x|
    radius = float(np.sqrt(np.mean(np.sum(X * X, axis=1))))
    speed = np.array([np.mean(np.linalg.norm(X @ A.T, axis=1)) for A in frames])
    return factor * radius / np.maximum(speed, 1e-12)


def density_sample(cloud, frames: np.ndarray, mode: str, M: int, seed: int = 0, tau: float | None = None,
                   intrinsic_dim: int | None = None, generators: np.ndarray | None = None,
                   domain: str = "box", t_scale: np.ndarray | None = None, max_attempts: int = 100) -> PointCloud:
    """M new points near the orbit carried by `cloud`.

    Multi-source modes move random sources by exp(sum t_k A_k) with Gaussian
    t (Silverman bandwidth) and redraw t whenever the result is farther than
    tau from the cloud. The single-source mode sweeps a regular grid of the
    group given by `generators` (periods 2*pi, or SU(2) structure constants
    with domain 'haar') from one random source.
    """
    if mode not in SAMPLER_MODES:
        raise ConfigError(f"unknown sampler mode {mode!r}")
    if M < 1:
        raise ConfigError("M must be positive")
    X = as_points(cloud)
    rng = np.random.default_rng(seed)
    frames = np.asarray(frames, dtype=float)
    if frames.ndim == 2:
        frames = frames[None]

    if mode == "single_source_liedetect":
        if generators is None:
            raise ConfigError("single-source sampling needs generators with known periods")
        src = X[rng.integers(len(X))]
        E = group_elements(generators, M, domain, 2 * np.pi, seed)
        return PointCloud(E @ src, "orthonormalized", {"mode": mode})

    tau = resample_threshold(X) if tau is None else tau
    if tau <= 0:
        raise ConfigError("tau must be positive")
    l = frames.shape[0] if intrinsic_dim is None else intrinsic_dim
    if t_scale is None:
        t_scale = _parameter_scale(X, frames, silverman_factor(len(X), l))
    t_scale = np.broadcast_to(np.asarray(t_scale, dtype=float), (frames.shape[0],))
    tree = cKDTree(X)
    sources = X[rng.integers(len(X), size=M)]
    out = np.empty((M, X.shape[1]))
    pending = np.arange(M)
    # raw LiePCA eigen-matrices need not be skew, and then exp(A) is not orthogonal
    skew = np.allclose(frames, -np.swapaxes(frames, 1, 2), atol=1e-10)
    expm = expm_skew if skew else scipy.linalg.expm
    for _ in range(max_attempts):
        T = rng.standard_normal((pending.size, frames.shape[0])) * t_scale
        out[pending] = np.einsum("kab,kb->ka", expm(np.tensordot(T, frames, axes=1)), sources[pending])
        if not np.isfinite(tau):
            pending = pending[:0]
            break
        dist, _ = tree.query(out[pending])
        pending = pending[dist > tau]
        if pending.size == 0:
            break
    if pending.size > 0.1 * M:
        raise SamplerStalled(f"{pending.size} of {M} points exceeded {max_attempts} resampling attempts")
    return PointCloud(out, "orthonormalized", {"mode": mode, "tau": tau, "stalled": int(pending.size)})


def stiefel_sample(N: int, k: int = 2, m: int = 4, seed: int = 0) -> PointCloud:
    """Haar sample of orthonormal k-frames in R^m, flattened to R^(k*m).

    SO(3) acts on V(2, R^4) with 3-dimensional orbits inside a 5-dimensional
    manifold, which makes it a standard non-transitive test case.
    """
    if not 1 <= k <= m:
        raise ConfigError("need 1 <= k <= m")
    rng = np.random.default_rng(seed)
    Q, R = np.linalg.qr(rng.standard_normal((N, m, m)))
    Q = Q * np.sign(np.diagonal(R, axis1=1, axis2=2))[:, None, :]
    frames = np.swapaxes(Q, 1, 2)[:, :k, :]
    return PointCloud(frames.reshape(N, k * m), "raw", {"stiefel": [k, m], "seed": seed})

import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from liedetect.catalog import RepType
from liedetect.errors import AmbiguousCut, ConfigError, DegenerateCloud
from liedetect.kernel import block_skew, expm_skew, random_orthogonal
from liedetect.preprocess import (
    PointCloud,
    center,
    covariance,
    epsilon_for_dimension,
    orthonormalize,
    project_to_dimension,
    read_csv,
)
from liedetect.synth import OrbitSpec, sample_orbit_uniform

seeds = st.integers(0, 2**32 - 1)


def cyclic_orbit(weights, x, p):
    t = 2 * np.pi * np.arange(p) / p
    return np.array([expm_skew(s * block_skew(weights)) @ x for s in t])


def test_covariance_single_point():
    assert np.allclose(covariance(np.array([[1.0, 0.0, 0.0]])), np.diag([1.0, 0.0, 0.0]))


def test_covariance_cyclic_orbit_block_form(rng):
    # regular p-gon along weights (1, 3): every 2w and w_i +- w_j stays off
    # multiples of p, so the cross terms average out
    for weights, p in [((1, 3), 9), ((1, 2), 7), ((2, 3, 5), 17)]:
        x = rng.standard_normal(2 * len(weights))
        S = covariance(cyclic_orbit(weights, x, p))
        blocks = 0.5 * (x[0::2] ** 2 + x[1::2] ** 2)
        assert np.allclose(S, np.diag(np.repeat(blocks, 2)), atol=1e-12)


def test_covariance_cyclic_orbit_needs_enough_points(rng):
    # with p = 2 w the rotation by half a turn is +-identity on that plane
    x = rng.standard_normal(4)
    S = covariance(cyclic_orbit((1, 2), x, 4))
    assert not np.allclose(S, np.diag(np.repeat(0.5 * (x[0::2] ** 2 + x[1::2] ** 2), 2)), atol=1e-6)


def test_covariance_brute_force(rng):
    X = rng.standard_normal((10, 4))
    brute = sum(np.outer(x, x) for x in X) / 10
    S = covariance(X)
    assert np.allclose(S, brute, atol=1e-12)
    assert np.trace(S) == pytest.approx(np.mean(np.sum(X**2, axis=1)))


def test_running_example_transform():
    t = 2 * np.pi * np.arange(4000) / 4000
    X = np.stack([np.cos(t), 2 * np.sin(t), np.cos(4 * t), np.sin(4 * t)], axis=1)
    res = orthonormalize(X)
    # sqrt of the pseudo-inverse of diag(1/2, 2, 1/2, 1/2)
    assert np.allclose(res.factor, np.sqrt(2) * np.diag([1, 0.5, 1, 1]), atol=1e-9)
    # the shape of the matrix, up to the global scale
    F = res.factor / res.factor[0, 0]
    assert np.allclose(F, np.diag([1, 0.5, 1, 1]), atol=1e-9)


def test_isotropic_cloud_rescales(rng):
    n = 3
    X = random_orthogonal(n, rng) / np.sqrt(n)  # rows orthonormal up to scale: covariance I/n^2 * n
    X = np.vstack([X, -X])
    S = covariance(X)
    c = S[0, 0]
    assert np.allclose(S, c * np.eye(n))
    res = orthonormalize(X)
    assert res.retained_dimension == n
    assert np.allclose(res.cloud.points, X / np.sqrt(c), atol=1e-12)


def test_output_covariance_identity(rng):
    X = rng.standard_normal((200, 5)) @ rng.standard_normal((5, 5))
    res = orthonormalize(X)
    assert np.allclose(covariance(res.cloud), np.eye(5), atol=1e-8)
    assert res.cloud.stage == "orthonormalized"


def test_rank_deficient_cloud(rng):
    X = np.zeros((100, 4))
    X[:, :2] = rng.standard_normal((100, 2))
    res = orthonormalize(X, 1e-9)
    assert res.retained_dimension == 2
    assert np.allclose(covariance(res.reduced()), np.eye(2), atol=1e-8)


def test_degenerate_cloud():
    with pytest.raises(DegenerateCloud):
        orthonormalize(np.full((5, 3), 1e-6), epsilon=1.0)


def test_project_plane(rng):
    X = np.zeros((50, 3))
    X[:, :2] = rng.standard_normal((50, 2))
    Y = project_to_dimension(X, 2)
    assert Y.n == 2 and Y.stage == "projected"
    # distances are preserved, so the plane survives up to rotation
    D0 = np.linalg.norm(X[:, None] - X[None], axis=2)
    D1 = np.linalg.norm(Y.points[:, None] - Y.points[None], axis=2)
    assert np.allclose(D0, D1, atol=1e-12)


def test_project_selects_documented_gap(rng):
    # eigenvalue gaps after the first, third and eighth directions
    spectrum = np.array([100, 10, 9, 1, 0.9, 0.8, 0.7, 0.6, 0.01, 0.009])
    X = rng.standard_normal((4000, 10))
    X = (X - X.mean(0)) @ np.linalg.inv(np.linalg.cholesky(np.cov(X.T, bias=True) + np.outer(X.mean(0), X.mean(0)))).T
    X = X * np.sqrt(spectrum)
    w = np.linalg.eigvalsh(covariance(X))[::-1]
    eps = epsilon_for_dimension(w, 8)
    assert w[7] > eps > w[8]
    assert orthonormalize(X, eps).retained_dimension == 8
    assert project_to_dimension(X, 8).n == 8


def test_project_retained_variance(rng):
    X = rng.standard_normal((300, 6)) * np.array([5, 4, 3, 2, 1, 0.5])
    w = np.linalg.eigvalsh(covariance(X))[::-1]
    Y = project_to_dimension(X, 3)
    assert np.trace(covariance(Y)) == pytest.approx(w[:3].sum(), rel=1e-10)


def test_project_tie_warns():
    X = np.vstack([np.eye(3), -np.eye(3)])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        Y = project_to_dimension(X, 2)
    assert any(issubclass(w.category, AmbiguousCut) for w in caught)
    assert Y.n == 2


def test_project_bad_target(rng):
    with pytest.raises(ConfigError):
        project_to_dimension(rng.standard_normal((5, 3)), 4)


@given(seeds, st.floats(0.1, 10))
def test_scale_covariance(seed, c):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((40, 4)) @ rng.standard_normal((4, 4))
    eps = 1e-6
    a = orthonormalize(X, eps).cloud.points
    b = orthonormalize(c * X, c * c * eps).cloud.points
    assert np.allclose(a, b, atol=1e-9)


@given(seeds)
def test_idempotent(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((40, 4)) @ rng.standard_normal((4, 4))
    once = orthonormalize(X).cloud.points
    twice = orthonormalize(once).cloud.points
    assert np.allclose(once, twice, atol=1e-8)


@given(seeds)
def test_exact_orbit_has_equal_norms(seed):
    rng = np.random.default_rng(seed)
    rep = RepType("SO2", (1, 2, 3))
    x0 = rng.standard_normal(6)
    X = sample_orbit_uniform(OrbitSpec(rep, 400, 6, x0, spacing="regular")).points
    A = rng.standard_normal((6, 6))  # generic invertible change of basis
    res = orthonormalize(X @ A.T)
    norms = np.linalg.norm(res.cloud.points, axis=1)
    assert np.ptp(norms) < 1e-8


def test_center(rng):
    X = rng.standard_normal((20, 3)) + 5
    Y = center(X)
    assert np.allclose(Y.points.mean(0), 0)


def test_point_cloud_rejects_nan():
    with pytest.raises(ConfigError):
        PointCloud(np.array([[np.nan, 1.0]]))


def test_read_csv(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("x,y\n1,2\n3,4\n")
    assert read_csv(p, header=True).points.shape == (2, 2)
    with pytest.raises(ConfigError):
        read_csv(p, header=False)

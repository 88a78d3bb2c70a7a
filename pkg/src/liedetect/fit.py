"""Matching the LiePCA output against the catalog of representation types."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import catalog
from .catalog import RepType
from .errors import (
    ConfigError,
    DegenerateEigenframe,
    DimensionMismatch,
    NoCandidates,
    NonReducibleFrame,
    OptimizerDiverged,
)
from .kernel import (
    frame_gram,
    orthonormalize_frame,
    qr_retraction,
    random_orthogonal,
    skew_part,
    skew_schur_form,
)
from .liepca import LiePcaOperator

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FitCandidate:
    rep: RepType
    base_frame: np.ndarray  # (d, n, n), orthonormal

    @classmethod
    def from_rep(cls, rep: RepType, n: int) -> "FitCandidate":
        return cls(rep, catalog.assemble_frame(rep, n))

    @property
    def n(self) -> int:
        return self.base_frame.shape[1]


@dataclass
class FitResult:
    rep: RepType
    conjugator: np.ndarray
    cost: float
    fitted_frame: np.ndarray
    all_costs: list = field(default_factory=list)  # [(rep, cost)] ascending
    method: str = ""
    ranked: list = field(default_factory=list, repr=False)  # [(rep, cost, O, frame)] ascending

    def alternative(self, i: int) -> "FitResult":
        """The i-th ranked candidate as a result of its own (0 is the winner)."""
        rep, cost, O, frame = self.ranked[i]
        return FitResult(rep, O, float(cost), frame, self.all_costs, self.method, self.ranked)

    @property
    def generators(self) -> np.ndarray:
        """Unnormalized generators conjugated by the fitted O (integer periods for tori)."""
        O = self.conjugator
        return O @ catalog.generators(self.rep, O.shape[0]) @ O.T

    def costs_table(self) -> list[dict]:
        return [{"rep": r.to_dict(), "cost": float(c)} for r, c in self.all_costs]


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 5
    max_iters: int = 1000
    gradient_norm_tol: float = 1e-9
    line_search: bool = True
    step: float = 0.1  # used when line_search is off
    seed: int = 0

    def __post_init__(self):
        if self.restarts < 1 or self.max_iters < 1:
            raise ConfigError("restarts and max_iters must be at least 1")
        if self.gradient_norm_tol <= 0 or self.step <= 0:
            raise ConfigError("tolerances must be positive")


@dataclass
class OptimizeResult:
    O: np.ndarray
    cost: float
    converged: bool
    iterations: int
    history: list

    def __iter__(self):
        return iter((self.O, self.cost))


# ---------------------------------------------------------------- costs

def _conjugate(O: np.ndarray, frame: np.ndarray) -> np.ndarray:
    return O @ frame @ O.T


def _chain_rule(O: np.ndarray, frame: np.ndarray, dY: np.ndarray) -> np.ndarray:
    """Euclidean gradient in O of a function of Y_j = O C_j O^T, given dF/dY_j."""
    OC = O @ frame  # (d, n, n)
    OCt = O @ np.swapaxes(frame, 1, 2)
    return np.sum(dY @ OCt + np.swapaxes(dY, 1, 2) @ OC, axis=0)


class StiefelObjective:
    """O -> sum_j ||Lambda(O C_j O^T)||^2, with its Euclidean gradient."""

    def __init__(self, op: LiePcaOperator, frame: np.ndarray):
        if frame.shape[1] != op.n:
            raise DimensionMismatch(f"candidate lives in R^{frame.shape[1]}, operator in R^{op.n}")
        self.n = op.n
        self.frame = frame
        self.sq = op.matrix @ op.matrix

    def __call__(self, O: np.ndarray, grad: bool = True):
        Y = _conjugate(O, self.frame).reshape(len(self.frame), -1)
        SY = Y @ self.sq  # sq is symmetric
        cost = float(np.sum(SY * Y))
        if not grad:
            return cost
        dY = 2.0 * SY.reshape(self.frame.shape)
        return cost, _chain_rule(O, self.frame, dY)


class GrassmannObjective:
    """O -> ||P_span(A) - P_span(O C O^T)||^2 = 2(d - sum <A_i, O C_j O^T>^2)."""

    def __init__(self, bottom: np.ndarray, frame: np.ndarray):
        if bottom.shape != frame.shape:
            raise DimensionMismatch(f"frames of shapes {bottom.shape} and {frame.shape}")
        self.bottom = bottom
        self.frame = frame

    def __call__(self, O: np.ndarray, grad: bool = True):
        Y = _conjugate(O, self.frame)
        G = frame_gram(self.bottom, Y)  # G[i, j] = <A_i, Y_j>
        d = len(self.frame)
        cost = float(max(0.0, 2.0 * (d - np.sum(G**2))))
        if not grad:
            return cost
        dY = -4.0 * np.einsum("ij,iab->jab", G, self.bottom)
        return cost, _chain_rule(O, self.frame, dY)


def cost_stiefel(op: LiePcaOperator, candidate: FitCandidate, O: np.ndarray) -> float:
    return StiefelObjective(op, candidate.base_frame)(O, grad=False)


def prepare_bottom_frame(source, d: int) -> np.ndarray:
    """Skew-symmetrized, orthonormalized d-frame from an operator or a matrix stack."""
    if isinstance(source, LiePcaOperator):
        return source.bottom_frame(d)
    mats = np.asarray(source, dtype=float)
    if mats.ndim == 2:
        mats = mats[None]
    frame = orthonormalize_frame(skew_part(mats))
    if frame.shape[0] < len(mats) or frame.shape[0] < d:
        raise DegenerateEigenframe("eigen-matrices are rank-deficient after skew-symmetrization")
    return frame


def cost_grassmann(bottom_frame: np.ndarray, candidate: FitCandidate, O: np.ndarray) -> float:
    bottom = prepare_bottom_frame(bottom_frame, len(candidate.base_frame))
    return GrassmannObjective(bottom, candidate.base_frame)(O, grad=False)


# ---------------------------------------------------------------- optimizer

def _riemannian(O: np.ndarray, egrad: np.ndarray) -> np.ndarray:
    return O @ skew_part(O.T @ egrad)


def _descend(costfn: Callable, O: np.ndarray, config: OptimizerConfig) -> OptimizeResult:
    cost, eg = costfn(O)
    xi = _riemannian(O, eg)
    history = [cost]
    prev = None
    t = 1.0
    for it in range(1, config.max_iters + 1):
        if not np.isfinite(cost):
            raise OptimizerDiverged(f"non-finite cost at iteration {it}")
        gnorm2 = float(np.sum(xi * xi))
        if np.sqrt(gnorm2) <= config.gradient_norm_tol or cost <= 1e-16:
            return OptimizeResult(O, cost, True, it - 1, history)
        if not config.line_search:
            O_new = qr_retraction(O, -config.step * xi)
            c_new, eg_new = costfn(O_new)
        else:
            if prev is not None:
                s, y = prev
                sy = abs(float(np.sum(s * y)))
                t = float(np.sum(s * s)) / sy if sy > 0 else 2.0 * t
            t = min(max(t, 1e-10), 10.0)
            for _ in range(60):
                O_new = qr_retraction(O, -t * xi)
                c_new = costfn(O_new, grad=False)
                if c_new <= cost - 1e-4 * t * gnorm2:
                    break
                t *= 0.5
            else:
                return OptimizeResult(O, cost, True, it - 1, history)  # no descent left
            c_new, eg_new = costfn(O_new)
        xi_new = _riemannian(O_new, eg_new)
        prev = (O_new - O, xi_new - xi)
        O, cost, xi = O_new, c_new, xi_new
        history.append(cost)
    if not np.isfinite(cost):
        raise OptimizerDiverged("non-finite cost")
    return OptimizeResult(O, cost, False, config.max_iters, history)


def optimize_orthogonal(costfn: Callable, n: int, config: OptimizerConfig | None = None,
                        inits: list | None = None) -> OptimizeResult:
    """Gradient descent on O(n) with QR retraction, restarted in both components.

    costfn(O) returns (cost, euclidean gradient); costfn(O, grad=False) the cost.
    """
    config = config or OptimizerConfig()
    rng = np.random.default_rng(config.seed)
    starts = list(inits) if inits is not None else []
    if inits is None:
        for det in (1, -1):
            starts += [random_orthogonal(n, rng, det) for _ in range(config.restarts)]
    best = None
    for O0 in starts:
        res = _descend(costfn, O0, config)
        if best is None or res.cost < best.cost:
            best = res
    return best


# ---------------------------------------------------------------- closed forms

def _f(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """||x/|x| - y/|y|||^2 over the last axis."""
    return np.sum((x / np.linalg.norm(x, axis=-1, keepdims=True)
                   - y / np.linalg.norm(y, axis=-1, keepdims=True)) ** 2, axis=-1)


def _finish(rows: list, method: str) -> FitResult:
    order = sorted(range(len(rows)), key=lambda i: (rows[i][1], i))
    rep, cost, O, frame = rows[order[0]]
    table = [(rows[i][0], rows[i][1]) for i in order]
    return FitResult(rep, O, float(cost), frame, table, method, [rows[i] for i in order])


def fit_so2_closed_form(bottom_matrix: np.ndarray, types: list[RepType]) -> FitResult:
    """Normal form of the bottom eigen-matrix compared with every weight tuple."""
    if not types:
        raise NoCandidates("no SO(2) types to compare against")
    A = skew_part(np.asarray(bottom_matrix, dtype=float).reshape(bottom_matrix.shape[-2:]))
    if np.linalg.norm(A) < 1e-12:
        raise DegenerateEigenframe("bottom eigen-matrix vanishes")
    nf = skew_schur_form(A)
    n = A.shape[0]
    alpha = nf.block_rates
    W = np.array([t.payload for t in types], dtype=float)
    if W.shape[1] != alpha.size:
        raise DimensionMismatch(f"types have {W.shape[1]} weights, matrix has {alpha.size} planes")
    costs = _f(alpha[None], W)
    P = nf.rotation
    rows = []
    for rep, c in zip(types, costs):
        rows.append((rep, float(c), P, (P @ catalog.assemble_frame(rep, n) @ P.T)))
    return _finish(rows, "so2-closed-form")


def _block_mask(n: int) -> np.ndarray:
    m = n // 2
    idx = np.arange(m)
    M = np.zeros((n, n), dtype=bool)
    M[2 * idx + 1, 2 * idx] = True
    M[2 * idx, 2 * idx + 1] = True
    return M


class ReductionObjective:
    """O -> sum_i ||Pi_{C-perp}(O A_i O^T)||^2, C the block-diagonal rotation planes."""

    def __init__(self, frame: np.ndarray):
        self.frame = frame
        self.mask = _block_mask(frame.shape[1])

    def __call__(self, O: np.ndarray, grad: bool = True):
        Y = _conjugate(O, self.frame)
        off = np.where(self.mask, 0.0, Y)
        cost = float(np.sum(off**2))
        if not grad:
            return cost
        return cost, _chain_rule(O, self.frame, 2.0 * off)


def simultaneous_reduction(frame: np.ndarray, config: OptimizerConfig | None = None) -> tuple[np.ndarray, float]:
    """Orthogonal O making every O A_i O^T as block-diagonal as possible.

    Starts from the normal form of a random combination of the frame, which is
    exact when the A_i commute, then refines by gradient descent.
    """
    config = config or OptimizerConfig()
    rng = np.random.default_rng(config.seed)
    obj = ReductionObjective(frame)
    inits = []
    for _ in range(config.restarts):
        c = rng.standard_normal(len(frame))
        P = skew_schur_form(np.tensordot(c, frame, axes=1)).rotation
        inits.append(P.T)
    res = optimize_orthogonal(obj, frame.shape[1], config, inits=inits)
    return res.O, res.cost


def _signed_block_permutation(n: int, perm: np.ndarray, signs: np.ndarray) -> np.ndarray:
    """Q with Q diag(L(w)) Q^T = diag(L(s_k w_perm[k]))."""
    Q = np.zeros((n, n))
    for k, (p, s) in enumerate(zip(perm, signs)):
        Q[2 * k, 2 * p] = 1.0
        Q[2 * k + 1, 2 * p + 1] = s
    if n % 2:
        Q[n - 1, n - 1] = 1.0
    return Q


def _span_projection(W: np.ndarray) -> np.ndarray:
    Q, _ = np.linalg.qr(np.asarray(W, dtype=float).T)
    return Q @ Q.T


def torus_scores(rates: np.ndarray, types: list[RepType]) -> tuple[np.ndarray, np.ndarray]:
    """Best value of tr(P' R) per lattice over signed permutations of its span projection.

    rates is d x m; R = rates^T rates. Returns (scores, index of the best signed permutation).
    """
    m = rates.shape[1]
    R = rates.T @ rates
    perms, signs = catalog._signed_permutations(m)
    # moved[p, s] = s_k s_l R[p^-1 ...]: tr(P' R) with P'[k, l] = s_k s_l P[p_k, p_l]
    # equals sum_{k,l} P[p_k, p_l] s_k s_l R[k, l]
    outer = signs[:, :, None] * signs[:, None, :]
    SR = outer * R[None]  # (2^m, m, m)
    inv = np.argsort(perms, axis=1)
    moved = SR[:, inv[:, :, None], inv[:, None, :]]  # (2^m, m!, m, m): index by p_k
    moved = np.swapaxes(moved, 0, 1).reshape(len(perms) * len(signs), m * m)
    Ps = np.stack([_span_projection(t.payload).ravel() for t in types], axis=1)
    vals = moved @ Ps  # (actions, types)
    best = np.argmax(vals, axis=0)
    return vals[best, np.arange(len(types))], best


def fit_torus_closed_form(bottom_frame: np.ndarray, types: list[RepType],
                          config: OptimizerConfig | None = None,
                          max_residual: float = 0.5) -> FitResult:
    """Simultaneous reduction of the frame, then lattice scoring on the rates.

    A lattice is scored by the exact squared Grassmann distance between the
    reduced frame and the lattice algebra, minimized over signed permutations
    of the rotation planes, which does not depend on the chosen lattice basis.
    """
    if not types:
        raise NoCandidates("no torus types to compare against")
    frame = prepare_bottom_frame(bottom_frame, len(bottom_frame))
    d, n = frame.shape[0], frame.shape[1]
    if types[0].dim != d:
        raise DimensionMismatch(f"types have dimension {types[0].dim}, frame has {d} members")
    O_r, residual = simultaneous_reduction(frame, config)
    if residual / d > max_residual:
        raise NonReducibleFrame(f"off-block residual {residual:.3f} for {d} matrices")
    Y = _conjugate(O_r, frame)
    m = n // 2
    rates = Y[:, 2 * np.arange(m) + 1, 2 * np.arange(m)]
    scores, best = torus_scores(rates, types)
    perms, signs = catalog._signed_permutations(m)
    rows = []
    for rep, score, b in zip(types, scores, best):
        Q = _signed_block_permutation(n, perms[b // len(signs)], signs[b % len(signs)])
        O = O_r.T @ Q
        frame_fit = _conjugate(O, catalog.assemble_frame(rep, n))
        cost = max(0.0, 2.0 * (d - np.sum(frame_gram(frame, frame_fit) ** 2)))
        rows.append((rep, float(cost), O, frame_fit))
    res = _finish(rows, "torus-closed-form")
    log.debug("torus reduction residual %.3e, winner %s", residual, res.rep.label())
    return res


# ---------------------------------------------------------------- dispatch

def _optimize_candidate(objective_factory, candidate: FitCandidate, config: OptimizerConfig, seed: int):
    obj = objective_factory(candidate.base_frame)
    cfg = OptimizerConfig(config.restarts, config.max_iters, config.gradient_norm_tol,
                          config.line_search, config.step, seed)
    res = optimize_orthogonal(obj, candidate.n, cfg)
    return (candidate.rep, res.cost, res.O, _conjugate(res.O, candidate.base_frame))


def fit(source, group: str, n: int | None = None, w_max: int = 1, mode: str = "auto",
        config: OptimizerConfig | None = None, types: list[RepType] | None = None,
        threads: int | None = None) -> FitResult:
    """Best representation type of `group` for an operator or a bottom frame.

    auto uses the closed forms for SO2 and tori and the Stiefel cost for
    SU2/SO3. stiefel needs a LiePcaOperator.
    """
    config = config or OptimizerConfig()
    tag, d = catalog.parse_group(group)
    op = source if isinstance(source, LiePcaOperator) else None
    if n is None:
        n = op.n if op is not None else np.asarray(source).shape[-1]
    if types is None:
        types = catalog.enumerate_types(group, n, w_max)
    if not types:
        raise NoCandidates(f"no representation types of {group} in R^{n}")
    if mode == "auto":
        mode = "closed" if tag in catalog.ABELIAN else "stiefel"
    if mode not in ("closed", "stiefel", "grassmann"):
        raise ConfigError(f"unknown fit mode {mode!r}")

    if mode == "closed":
        if tag not in catalog.ABELIAN:
            raise ConfigError("closed forms exist only for SO2 and tori")
        bottom = prepare_bottom_frame(source, d)[:d]
        if tag == "SO2":
            return fit_so2_closed_form(bottom[0], types)
        return fit_torus_closed_form(bottom, types, config)

    if mode == "stiefel":
        if op is None:
            raise ConfigError("the Stiefel cost needs the LiePCA operator")
        factory = lambda frame: StiefelObjective(op, frame)  # noqa: E731
    else:
        bottom = prepare_bottom_frame(source, d)[:d]
        factory = lambda frame: GrassmannObjective(bottom, frame)  # noqa: E731

    candidates = [FitCandidate.from_rep(r, n) for r in types]
    seeds = [config.seed * 1009 + i for i in range(len(candidates))]
    threads = (os.cpu_count() or 1) if threads is None else threads
    if threads > 1 and len(candidates) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda cs: _optimize_candidate(factory, cs[0], config, cs[1]),
                                 zip(candidates, seeds)))
    else:
        rows = [_optimize_candidate(factory, c, config, s) for c, s in zip(candidates, seeds)]
    return _finish(rows, mode)

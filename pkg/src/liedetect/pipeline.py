"""End-to-end runs: orthonormalize, LiePCA, fit, verify."""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__, catalog
from .errors import ConfigError, LieDetectError, NoAlmostFaithfulRep, NumericalError
from .fit import OptimizerConfig, fit
from .liepca import LocalPcaConfig, build_lie_pca, estimate_symmetry_dimension
from .preprocess import (
    PointCloud,
    PreprocessResult,
    center,
    covariance,
    epsilon_for_dimension,
    orthonormalize,
    read_csv,
)
from .verify import Thresholds, verify

log = logging.getLogger(__name__)

SCHEMA = "1"
LIST_GROUPS = ("SO2", "T2", "T3", "SU2", "SO3")


@dataclass
class PipelineConfig:
    input: str | None = None
    group: str | None = None
    groups: list[str] = field(default_factory=list)
    w_max: int | None = None
    allow_zero: bool = False
    epsilon: float | None = None
    target_dim: int | None = None
    intrinsic_dim: int | None = None
    radius: float | None = None
    k_neighbors: int | None = None
    mode: str = "auto"
    orbit_samples: int | None = None
    base_point: str = "first"
    compute_w2: bool = False
    seed: int = 0
    threads: int | None = None
    center: bool = False
    header: bool = False
    orthonormalize: bool = True
    restarts: int = 5
    tie_ratio: float = 10.0
    max_ties: int = 4
    out: str | None = None

    def validate(self, list_mode: bool = False) -> None:
        if self.epsilon is not None and self.target_dim is not None:
            raise ConfigError("give at most one of epsilon and target_dim")
        if self.radius is not None and self.k_neighbors is not None:
            raise ConfigError("give at most one of radius and k_neighbors")
        if list_mode:
            if not self.groups:
                raise ConfigError("group list is empty")
            bad = [g for g in self.groups if g.upper() not in LIST_GROUPS]
            if bad:
                raise ConfigError(f"groups {bad} are outside {list(LIST_GROUPS)}")
        elif not self.group:
            raise ConfigError("a group is required")
        if self.mode not in ("auto", "stiefel", "grassmann"):
            raise ConfigError(f"unknown fit mode {self.mode!r}")
        if self.tie_ratio < 1 or self.max_ties < 1:
            raise ConfigError("tie_ratio must be at least 1 and max_ties positive")
        if self.base_point not in ("first", "best"):
            raise ConfigError(f"unknown base-point mode {self.base_point!r}")

    def echo(self) -> dict:
        return asdict(self)


def default_w_max(group: str, n: int) -> int:
    """Largest weight searched when none is given: 2m for SO(2) in R^2m, 2 for T2, 1 above."""
    tag, d = catalog.parse_group(group)
    if tag == "SO2":
        return max(2 * (n // 2), 1)
    if tag == "T":
        return 2 if d == 2 else 1
    return 1


def default_neighbors(l: int) -> int:
    # small neighborhoods win on sparse, strongly curved orbits (high weights)
    return max(5, 2 * l + 1)


def _error_record(stage: str, exc: Exception) -> dict:
    kind = "config" if isinstance(exc, ConfigError) else "numerical" if isinstance(exc, NumericalError) else "other"
    return {"stage": stage, "type": type(exc).__name__, "kind": kind, "message": str(exc)}


class _Run:
    """Shared state of one run: the prepared cloud and cached LiePCA operators."""

    def __init__(self, config: PipelineConfig, cloud: PointCloud | None):
        self.config = config
        self.report: dict = {"schema": SCHEMA, "version": __version__, "config": config.echo(),
                             "stages": {}, "timings": {}, "errors": []}
        self.raw = cloud
        self.cloud: PointCloud | None = None
        self.prep = None
        self.ops: dict = {}
        self.fits: dict = {}
        self.failed = False

    def timed(self, name: str, fn):
        t0 = time.perf_counter()
        try:
            return fn()
        finally:
            self.report["timings"][name] = self.report["timings"].get(name, 0.0) + time.perf_counter() - t0

    def load(self) -> None:
        if self.raw is None:
            if not self.config.input:
                raise ConfigError("no input given")
            try:
                self.raw = read_csv(self.config.input, self.config.header)
            except OSError as exc:
                raise ConfigError(f"cannot read {self.config.input}: {exc}") from exc
        if self.config.center:
            self.raw = center(self.raw)

    def preprocess(self) -> None:
        cfg = self.config
        eps = cfg.epsilon
        if cfg.target_dim is not None:
            spectrum = np.linalg.eigvalsh(covariance(self.raw))[::-1]
            eps = epsilon_for_dimension(spectrum, cfg.target_dim)
        if cfg.orthonormalize:
            res = orthonormalize(self.raw, eps)
        else:
            # the caller vouches that the orbit is already homogeneous
            n = self.raw.n
            spectrum = np.linalg.eigvalsh(covariance(self.raw))[::-1]
            res = PreprocessResult(PointCloud(self.raw.points, "orthonormalized", dict(self.raw.meta)),
                                   np.eye(n), np.eye(n), n, spectrum)
        self.prep = res
        self.cloud = res.reduced()
        self.report["stages"]["preprocess"] = {**res.summary(), "skipped": not cfg.orthonormalize}

    def operator(self, l: int):
        if l not in self.ops:
            cfg = self.config
            k = None if cfg.radius is not None else (cfg.k_neighbors or default_neighbors(l))
            pca = LocalPcaConfig(l, radius=cfg.radius, k_neighbors=k)
            op = self.timed("liepca", lambda: build_lie_pca(self.cloud, pca))
            w = op.eigen()[0]
            n = op.n
            d_hat = estimate_symmetry_dimension(w, max_dim=n * (n - 1) // 2)
            self.report["stages"].setdefault("liepca", {})[str(l)] = {
                "intrinsic_dim": l,
                "neighborhood": {"radius": cfg.radius, "k_neighbors": k},
                "spectrum": [float(x) for x in w],
                "estimated_dimension": d_hat,
                "suggested_groups": list(catalog.suggest_groups(d_hat)),
            }
            self.ops[l] = op
        return self.ops[l]

    def run_group(self, group: str) -> dict:
        cfg = self.config
        entry: dict = {"group": group}
        stage = "catalog"
        try:
            tag, d = catalog.parse_group(group)
            n = self.cloud.n
            if tag == "T" and 2 * d > n:
                raise NoAlmostFaithfulRep(f"T^{d} has no almost-faithful representation in R^{n}")
            l = cfg.intrinsic_dim or d
            stage = "liepca"
            op = self.operator(l)
            stage = "fit"
            w_max = cfg.w_max or default_w_max(group, n)
            types = (catalog.enumerate_so2_types(n // 2, w_max, allow_zero=cfg.allow_zero)
                     if tag == "SO2" else catalog.enumerate_types(group, n, w_max))
            opt = OptimizerConfig(restarts=cfg.restarts, seed=cfg.seed)
            res = self.timed("fit", lambda: fit(op, group, n, w_max, cfg.mode, opt, types, cfg.threads))
            entry["fit"] = {"rep": res.rep.to_dict(), "cost": res.cost, "method": res.method,
                            "all_costs": res.costs_table()}
            stage = "verify"
            res, rep = self.timed("verify", lambda: self.verify_ties(res, entry["fit"]))
            entry["verification"] = rep.to_dict()
            entry["status"] = "ok"
            entry["_fit"] = res
        except NoAlmostFaithfulRep as exc:
            entry["status"] = "inapplicable"
            entry["error"] = _error_record(stage, exc)
        except LieDetectError as exc:
            entry["status"] = "error"
            entry["error"] = _error_record(stage, exc)
            self.report["errors"].append(entry["error"])
        return entry

    def verify_ties(self, res, record: dict):
        """Verify the winner, falling back on nearly tied candidates if it fails.

        Costs within tie_ratio of the best one cannot separate types whose
        algebras both sit inside a larger symmetry algebra (S^3 carries both
        SU(2)-(4) and SO(3)-(1,3) flows); the orbit distance can. The cost
        winner is kept unless another near tie passes verification.
        """
        cfg = self.config

        def check(r, w2=False):
            return verify(self.cloud, r, cfg.base_point, cfg.orbit_samples, w2, Thresholds(), cfg.seed)

        # W2 is the expensive part and only reported for the final choice
        report = check(res)
        best_cost = res.all_costs[0][1]
        near = [i for i, (_, c) in enumerate(res.all_costs[:cfg.max_ties])
                if i > 0 and c <= cfg.tie_ratio * best_cost + 1e-12]
        if report.verdict == "success" or not near:
            return res, (check(res, True) if cfg.compute_w2 else report)
        tried = [(res, report)] + [(res.alternative(i), None) for i in near]
        tried = [(a, v or check(a)) for a, v in tried]
        record["near_ties"] = [{"rep": a.rep.to_dict(), "cost": a.cost, "verdict": v.verdict,
                                "hausdorff_in_to_orbit": v.hausdorff_in_to_orbit} for a, v in tried]
        passing = [t for t in tried if t[1].verdict == "success"]
        if not passing:
            return res, (check(res, True) if cfg.compute_w2 else report)
        winner, report = min(passing, key=lambda t: t[1].hausdorff_in_to_orbit)
        record.update({"rep": winner.rep.to_dict(), "cost": winner.cost, "selected_by": "verification"})
        return winner, (check(winner, True) if cfg.compute_w2 else report)


def _finalize(run: _Run, entries: list[dict]) -> dict:
    fits = {}
    for e in entries:
        res = e.pop("_fit", None)
        if res is not None:
            fits[e["group"]] = res
    run.report["groups"] = entries
    ok = [e for e in entries if e.get("status") == "ok"]
    successes = [e for e in ok if e["verification"]["verdict"] == "success"]
    notes = []
    selected = None
    if successes:
        successes.sort(key=lambda e: e["verification"]["hausdorff_in_to_orbit"])
        selected = successes[0]["group"]
        best = successes[0]["verification"]["hausdorff_in_to_orbit"]
        for e in successes[1:]:
            if e["verification"]["hausdorff_in_to_orbit"] - best < 1e-3:
                notes.append(f"{e['group']} ties with {selected}")
    names = {e["group"].upper() for e in ok}
    if {"SU2", "SO3"} <= names and run.cloud is not None and run.cloud.n % 2 == 1:
        notes.append("SU2 and SO3 share their irreducible representations in odd dimension")
    run.report["selected_group"] = selected
    run.report["ambiguities"] = notes
    verdict = None
    if selected is not None:
        verdict = "success"
    elif ok:
        verdict = "non-transitive-suspected" if any(
            e["verification"]["verdict"] == "non-transitive-suspected" for e in ok) else "fail"
    run.report["verdict"] = verdict
    run.fits = fits
    return run.report


def _start(config: PipelineConfig, cloud, list_mode: bool) -> _Run:
    config.validate(list_mode)
    if cloud is not None and not isinstance(cloud, PointCloud):
        cloud = PointCloud(np.asarray(cloud, dtype=float))
    run = _Run(config, cloud)
    for stage, fn in (("load", run.load), ("preprocess", run.preprocess)):
        try:
            run.timed(stage, fn)
        except LieDetectError as exc:
            run.report["errors"].append(_error_record(stage, exc))
            run.failed = True
            break
    return run


def _aborted(run: _Run) -> dict:
    run.report.update({"groups": [], "selected_group": None, "ambiguities": [], "verdict": None, "_run": run})
    return run.report


def run_pipeline(config: PipelineConfig, cloud=None) -> dict:
    """Steps 1 to 4 for a single group; errors are recorded with their stage."""
    run = _start(config, cloud, list_mode=False)
    if run.failed:
        return _aborted(run)
    entry = run.run_group(config.group)
    report = _finalize(run, [entry])
    report["_run"] = run
    return report


def run_group_list(config: PipelineConfig, cloud=None) -> dict:
    """Run every group of the list and select the best verified one."""
    run = _start(config, cloud, list_mode=True)
    if run.failed:
        return _aborted(run)
    entries = [run.run_group(g) for g in config.groups]
    report = _finalize(run, entries)
    report["_run"] = run
    return report


def public(report: dict) -> dict:
    """The JSON-serializable part of a report."""
    return {k: v for k, v in report.items() if not k.startswith("_")}


def suggested_group_list(config: PipelineConfig, cloud=None, max_l: int = 3) -> list[str]:
    """Groups whose dimension matches the estimated symmetry dimension.

    Tries intrinsic dimensions 1..max_l (or the configured one) and keeps the
    first l whose estimate d_hat equals l; falls back to every listed group.
    """
    probe = PipelineConfig(**{**config.echo(), "groups": list(LIST_GROUPS)})
    run = _start(probe, cloud, list_mode=True)
    if run.failed:
        err = run.report["errors"][-1]
        raise (ConfigError if err["kind"] == "config" else NumericalError)(err["message"])
    dims = [config.intrinsic_dim] if config.intrinsic_dim else range(1, max_l + 1)
    for l in dims:
        try:
            run.operator(l)
        except LieDetectError:
            continue
        d_hat = run.report["stages"]["liepca"][str(l)]["estimated_dimension"]
        found = [g for g in catalog.suggest_groups(d_hat) if g in LIST_GROUPS]
        if found and (config.intrinsic_dim or d_hat == l):
            return found
    return list(LIST_GROUPS)

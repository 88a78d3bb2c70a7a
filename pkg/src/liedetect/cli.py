"""Command-line entry point.

Exit codes: 0 success verdict, 2 any other verdict, 3 configuration error,
4 numerical error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import __version__, catalog
from .errors import ConfigError, LieDetectError, NumericalError
from .liepca import LocalPcaConfig, build_lie_pca, estimate_symmetry_dimension
from .pipeline import (
    LIST_GROUPS,
    PipelineConfig,
    default_neighbors,
    public,
    run_group_list,
    run_pipeline,
    suggested_group_list,
)
from .preprocess import center, covariance, epsilon_for_dimension, orthonormalize, read_csv
from .synth import SAMPLER_MODES, OrbitSpec, density_sample, running_example, sample_orbit_uniform

log = logging.getLogger("liedetect")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3, 4


def _pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="CSV file, one point per row")
    p.add_argument("--header", action="store_true", help="skip the first CSV line")
    p.add_argument("--center", action="store_true", help="subtract the mean before anything else")
    p.add_argument("--skip-orthonormalize", action="store_true",
                   help="use the points as given (orbit already has identity-proportional covariance)")
    p.add_argument("--wmax", type=int, help="largest weight searched (SO2 and tori)")
    p.add_argument("--allow-zero", action="store_true", help="allow zero SO(2) weights")
    cut = p.add_mutually_exclusive_group()
    cut.add_argument("--epsilon", type=float, help="covariance eigenvalue cutoff")
    cut.add_argument("--target-dim", type=int, help="keep this many covariance directions")
    p.add_argument("--intrinsic-dim", type=int, help="orbit dimension l for local PCA")
    nb = p.add_mutually_exclusive_group()
    nb.add_argument("--radius", type=float)
    nb.add_argument("--k-neighbors", type=int)
    p.add_argument("--mode", choices=("auto", "stiefel", "grassmann"), default="auto")
    p.add_argument("--orbit-samples", type=int, help="orbit sample size K for verification")
    p.add_argument("--base-point", choices=("first", "best"), default="first")
    p.add_argument("--w2", action="store_true", help="also compute the Wasserstein-2 distance")
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", help="write the JSON report here instead of stdout")


def _config(args, **extra) -> PipelineConfig:
    return PipelineConfig(
        input=args.input, w_max=args.wmax, allow_zero=args.allow_zero, epsilon=args.epsilon,
        target_dim=args.target_dim, intrinsic_dim=args.intrinsic_dim, radius=args.radius,
        k_neighbors=args.k_neighbors, mode=args.mode, orbit_samples=args.orbit_samples,
        base_point=args.base_point, compute_w2=args.w2, seed=args.seed, threads=args.threads,
        center=args.center, header=args.header, orthonormalize=not args.skip_orthonormalize,
        restarts=args.restarts, out=args.out, **extra)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="liedetect", description="Detect Lie group representations in point clouds.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="fit one group and verify the orbit")
    _pipeline_flags(p)
    p.add_argument("--group", required=True, help="SO2, T<d>, SU2 or SO3")

    p = sub.add_parser("detect-multi", help="run a list of groups and select the best")
    _pipeline_flags(p)
    p.add_argument("--groups", help=f"comma-separated subset of {','.join(LIST_GROUPS)}; "
                                    "default: groups matching the estimated symmetry dimension")

    p = sub.add_parser("list-reps", help="print the representation catalog as JSON")
    p.add_argument("--group", required=True)
    p.add_argument("--dim", type=int, required=True, help="ambient dimension n")
    p.add_argument("--wmax", type=int, default=1)
    p.add_argument("--allow-zero", action="store_true")
    p.add_argument("--out")

    p = sub.add_parser("synth", help="sample a synthetic orbit as CSV")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--spec", help="JSON orbit spec, inline or a file path")
    src.add_argument("--running-example", action="store_true")
    p.add_argument("--count", type=int, default=300, help="number of points for --running-example")
    p.add_argument("--sigma", type=float, default=0.01, help="noise level for --running-example")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV path; ground truth goes to the same stem with .json")

    p = sub.add_parser("density-sample", help="fit a group, then sample new points along its orbits")
    _pipeline_flags(p)
    p.add_argument("--group", required=True)
    p.add_argument("--sampler", choices=SAMPLER_MODES, default="multi_source_liedetect")
    p.add_argument("--count", type=int, default=500)
    p.add_argument("--report", help="also write the fitting report as JSON here")

    p = sub.add_parser("spectrum", help="emit LiePCA eigenvalues only")
    p.add_argument("--input", required=True)
    p.add_argument("--header", action="store_true")
    p.add_argument("--center", action="store_true")
    cut = p.add_mutually_exclusive_group()
    cut.add_argument("--epsilon", type=float)
    cut.add_argument("--target-dim", type=int)
    p.add_argument("--intrinsic-dim", type=int, default=1)
    nb = p.add_mutually_exclusive_group()
    nb.add_argument("--radius", type=float)
    nb.add_argument("--k-neighbors", type=int)
    p.add_argument("--out")
    return parser


def _emit_text(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_json(obj, out: str | None) -> None:
    _emit_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", out)


def _emit_csv(points: np.ndarray, out: str | None) -> None:
    if out:
        np.savetxt(out, points, delimiter=",", fmt="%.17g")
    else:
        np.savetxt(sys.stdout, points, delimiter=",", fmt="%.17g")


def _report_exit(report: dict) -> int:
    if report.get("verdict") == "success":
        return EXIT_OK
    errors = report.get("errors", []) + [g["error"] for g in report.get("groups", []) if "error" in g]
    kinds = {e["kind"] for e in errors}
    if report.get("verdict") is None and kinds:
        return EXIT_CONFIG if "config" in kinds else EXIT_NUMERICAL
    return EXIT_FAIL


def cmd_detect(args) -> int:
    report = run_pipeline(_config(args, group=args.group))
    _emit_json(public(report), args.out)
    return _report_exit(report)


def cmd_detect_multi(args) -> int:
    config = _config(args)
    if args.groups:
        config.groups = [g.strip() for g in args.groups.split(",") if g.strip()]
    else:
        config.groups = suggested_group_list(config)
        log.info("using suggested groups %s", config.groups)
    report = run_group_list(config)
    _emit_json(public(report), args.out)
    return _report_exit(report)


def cmd_list_reps(args) -> int:
    tag, _ = catalog.parse_group(args.group)
    if tag == "SO2":
        reps = catalog.enumerate_so2_types(args.dim // 2, args.wmax, allow_zero=args.allow_zero)
    else:
        reps = catalog.enumerate_types(args.group, args.dim, args.wmax)
    _emit_json([r.to_dict() for r in reps], args.out)
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.running_example:
        cloud = running_example(args.count, args.sigma, args.seed)
    else:
        text = args.spec
        if os.path.exists(text):
            with open(text) as fh:
                text = fh.read()
        try:
            spec = OrbitSpec.from_json(text)
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ConfigError(f"bad orbit spec: {exc}") from exc
        cloud = sample_orbit_uniform(spec)
    _emit_csv(cloud.points, args.out)
    if args.out:
        # ground truth next to the CSV
        stem = args.out[:-4] if args.out.endswith(".csv") else args.out
        _emit_json({"schema": "1", "version": __version__, "points": len(cloud.points), **cloud.meta},
                   stem + ".json")
    return EXIT_OK


def cmd_density_sample(args) -> int:
    report = run_pipeline(_config(args, group=args.group))
    if args.report:
        _emit_json(public(report), args.report)
    if report.get("verdict") is None:
        return _report_exit(report)
    run = report["_run"]
    res = run.fits.get(args.group)
    if res is None:
        raise NumericalError("fit did not produce a result")
    if args.sampler == "multi_source_liepca":
        frames = run.ops[args.intrinsic_dim or res.rep.dim].bottom_frame(res.rep.dim)
    else:
        frames = res.generators
    domain = "box" if res.rep.group in catalog.ABELIAN else "haar"
    new = density_sample(run.cloud, frames, args.sampler, args.count, args.seed,
                         intrinsic_dim=args.intrinsic_dim, generators=res.generators, domain=domain)
    _emit_csv(run.prep.restore(new.points), args.out)
    return EXIT_OK


def cmd_spectrum(args) -> int:
    cloud = read_csv(args.input, args.header)
    if args.center:
        cloud = center(cloud)
    eps = args.epsilon
    if args.target_dim is not None:
        eps = epsilon_for_dimension(np.linalg.eigvalsh(covariance(cloud))[::-1], args.target_dim)
    prep = orthonormalize(cloud, eps)
    k = None if args.radius is not None else (args.k_neighbors or default_neighbors(args.intrinsic_dim))
    op = build_lie_pca(prep.reduced(), LocalPcaConfig(args.intrinsic_dim, radius=args.radius, k_neighbors=k))
    w = op.eigen()[0]
    n = op.n
    d_hat = estimate_symmetry_dimension(w, max_dim=n * (n - 1) // 2)
    _emit_json({"schema": "1", "version": __version__, "ambient_dimension": n,
                "spectrum": [float(x) for x in w],
                "skew_spectrum": [float(x) for x in op.eigen_skew()[0]],
                "estimated_dimension": d_hat,
                "suggested_groups": list(catalog.suggest_groups(d_hat))}, args.out)
    return EXIT_OK


COMMANDS = {
    "detect": cmd_detect,
    "detect-multi": cmd_detect_multi,
    "list-reps": cmd_list_reps,
    "synth": cmd_synth,
    "density-sample": cmd_density_sample,
    "spectrum": cmd_spectrum,
}


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("LIEDETECT_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except LieDetectError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

"""Generating new points along a fitted orbit from only 100 samples.

Compares the three samplers by their symmetric Hausdorff distance to a dense
copy of the true orbit.
"""

import numpy as np

from liedetect.catalog import RepType
from liedetect.pipeline import PipelineConfig, run_pipeline
from liedetect.synth import OrbitSpec, density_sample, sample_orbit_uniform
from liedetect.verify import hausdorff_symmetric

rep = RepType("SO2", (1, 2))
truth = sample_orbit_uniform(OrbitSpec(rep, 500, 4, spacing="regular")).points
modes = ("multi_source_liepca", "multi_source_liedetect", "single_source_liedetect")
dist = {m: [] for m in modes}

for s in range(10):
    cloud = sample_orbit_uniform(OrbitSpec(rep, 100, 4, seed=s))
    run = run_pipeline(PipelineConfig(group="SO2", seed=s, orthonormalize=False), cloud)["_run"]
    fit = run.fits["SO2"]
    for m in modes:
        frames = run.ops[1].bottom_matrices(1, restrict_skew=False) if m == "multi_source_liepca" else fit.generators
        new = density_sample(run.cloud, frames, m, 500, seed=s, generators=fit.generators)
        dist[m].append(hausdorff_symmetric(run.prep.restore(new.points), truth))

for m in modes:
    print(f"{m:>24}: median {np.median(dist[m]):.3f}")

"""A noisy curve in R^4 traced by a circle action with weights 1 and 4.

Runs the pipeline one step at a time and prints what each stage sees.
"""

import numpy as np

from liedetect.pipeline import PipelineConfig, run_pipeline
from liedetect.synth import running_example

cloud = running_example(300, sigma=0.01, seed=0)
report = run_pipeline(PipelineConfig(group="SO2", w_max=4, allow_zero=True), cloud)

prep = report["stages"]["preprocess"]
print("retained dimension:", prep["retained_dimension"])

spec = report["stages"]["liepca"]["1"]
print("smallest LiePCA eigenvalues:", np.round(spec["spectrum"][:4], 4))
print("estimated symmetry dimension:", spec["estimated_dimension"])

entry = report["groups"][0]
print("\ncandidate costs")
for row in entry["fit"]["all_costs"]:
    print(f"  {row['rep']['payload']}: {row['cost']:.2e}")

v = entry["verification"]
print(f"\nwinner {entry['fit']['rep']['payload']}")
print(f"HD(X->orbit) {v['hausdorff_in_to_orbit']:.3f}   HD(orbit->X) {v['hausdorff_orbit_to_in']:.3f}")
print("verdict:", report["verdict"])

"""Two groups of dimension 3 compete for one orbit.

The cloud lies on an orbit of SU(2) acting on R^6 as 1 + 5. Both SU(2) and
the torus T^3 are tried; only SU(2) reproduces the points.
"""

from liedetect.catalog import RepType
from liedetect.pipeline import PipelineConfig, run_group_list, suggested_group_list
from liedetect.synth import OrbitSpec, default_base_point, sample_orbit_uniform

rep = RepType("SU2", (1, 5))
cloud = sample_orbit_uniform(OrbitSpec(rep, 1500, 6, default_base_point(rep), seed=0))

groups = suggested_group_list(PipelineConfig(), cloud)
print("groups suggested by the spectrum:", groups)

report = run_group_list(PipelineConfig(groups=groups), cloud)
for e in report["groups"]:
    v = e["verification"]
    print(f"{e['group']:>4}: {e['fit']['rep']['payload']}  HD(X->orbit) {v['hausdorff_in_to_orbit']:.3f}  {v['verdict']}")
print("selected:", report["selected_group"])

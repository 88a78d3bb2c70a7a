import json

import numpy as np
import pytest

from liedetect import catalog
from liedetect.catalog import RepType
from liedetect.cli import main
from liedetect.errors import ConfigError
from liedetect.pipeline import PipelineConfig, public, run_group_list, run_pipeline, suggested_group_list
from liedetect.synth import OrbitSpec, default_base_point, running_example, sample_orbit_uniform


@pytest.fixture(scope="module")
def running_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "running.csv"
    np.savetxt(path, running_example(300, 0.01, 0).points, delimiter=",")
    return str(path)


def run_cli(argv, capsys):
    code = main(argv)
    return code, capsys.readouterr()


def strip_timings(report):
    report = dict(report)
    report.pop("timings", None)
    return report


# ---------------------------------------------------------------- pipeline

def test_running_example_pipeline():
    report = run_pipeline(PipelineConfig(group="SO2", w_max=4, allow_zero=True), running_example(300, 0.01, 0))
    entry = report["groups"][0]
    assert tuple(entry["fit"]["rep"]["payload"]) == (1, 4)
    assert report["verdict"] == "success" and report["selected_group"] == "SO2"
    assert entry["verification"]["hausdorff_in_to_orbit"] <= 0.05
    json.dumps(public(report))


def test_group_list_selects_su2():
    rep = RepType("SU2", (1, 5))
    cloud = sample_orbit_uniform(OrbitSpec(rep, 1500, 6, default_base_point(rep), seed=0))
    report = run_group_list(PipelineConfig(groups=["T3", "SU2"]), cloud)
    by = {e["group"]: e for e in report["groups"]}
    assert report["selected_group"] == "SU2"
    assert tuple(by["SU2"]["fit"]["rep"]["payload"]) == (1, 5)
    # 8000 orbit samples on a 3-manifold leave HD near 0.19; it shrinks with K
    assert by["SU2"]["verification"]["hausdorff_in_to_orbit"] < 0.25
    assert by["T3"]["verification"]["hausdorff_in_to_orbit"] > 0.7
    assert by["T3"]["verification"]["verdict"] != "success"


def test_torus_too_large_is_inapplicable():
    cloud = running_example(100, 0.0)
    report = run_group_list(PipelineConfig(groups=["T3", "SO2"], w_max=4, allow_zero=True), cloud)
    by = {e["group"]: e for e in report["groups"]}
    assert by["T3"]["status"] == "inapplicable"
    assert by["T3"]["error"]["type"] == "NoAlmostFaithfulRep"
    assert report["selected_group"] == "SO2"


def test_planted_torus_beats_circle():
    rep = RepType("T", ((1, 0, 1), (0, 1, 2)))
    cloud = sample_orbit_uniform(OrbitSpec(rep, 750, 6, default_base_point(rep), seed=3))
    report = run_group_list(PipelineConfig(groups=["T2", "SO2"]), cloud)
    by = {e["group"]: e for e in report["groups"]}
    assert report["selected_group"] == "T2"
    assert by["SO2"]["verification"]["verdict"] in ("fail", "non-transitive-suspected")


def test_suggested_groups():
    rep = RepType("SO3", (5,))
    cloud = sample_orbit_uniform(OrbitSpec(rep, 1500, 5, default_base_point(rep), seed=1))
    assert suggested_group_list(PipelineConfig(), cloud) == ["SU2", "T3"]
    assert set(catalog.suggest_groups(3)) >= {"SU2", "T3"}
    assert suggested_group_list(PipelineConfig(w_max=4), running_example(300, 0.0)) == ["SO2"]


def test_report_deterministic():
    cfg = dict(group="SO2", w_max=4, allow_zero=True, seed=4)
    a = public(run_pipeline(PipelineConfig(**cfg), running_example(200, 0.01, 1)))
    b = public(run_pipeline(PipelineConfig(**cfg), running_example(200, 0.01, 1)))
    assert json.dumps(strip_timings(a), sort_keys=True) == json.dumps(strip_timings(b), sort_keys=True)


def test_config_validation():
    with pytest.raises(ConfigError):
        run_pipeline(PipelineConfig(group="SO2", epsilon=0.1, target_dim=2), running_example(10))
    with pytest.raises(ConfigError):
        run_group_list(PipelineConfig(groups=["SO5"]), running_example(10))
    with pytest.raises(ConfigError):
        run_group_list(PipelineConfig(groups=[]), running_example(10))


# ---------------------------------------------------------------- cli

def test_cli_detect_success(running_csv, capsys):
    code, out = run_cli(["detect", "--input", running_csv, "--group", "SO2", "--wmax", "4", "--allow-zero"], capsys)
    report = json.loads(out.out)
    assert code == 0
    assert report["groups"][0]["fit"]["rep"]["payload"] == [1, 4]


def test_cli_exit_fail(running_csv, capsys):
    # a circle forced into T2 fits but cannot verify
    code, out = run_cli(["detect", "--input", running_csv, "--group", "T2"], capsys)
    assert code == 2
    assert json.loads(out.out)["verdict"] in ("fail", "non-transitive-suspected")


def test_cli_exit_config(tmp_path, running_csv, capsys):
    code, _ = run_cli(["detect", "--input", str(tmp_path / "missing.csv"), "--group", "SO2"], capsys)
    assert code == 3
    code, _ = run_cli(["detect-multi", "--input", running_csv, "--groups", "T3"], capsys)
    assert code == 3
    code, out = run_cli(["synth", "--spec", "{not json"], capsys)
    assert code == 3 and "configuration error" in out.err


def test_cli_exit_numerical(tmp_path, capsys):
    path = tmp_path / "small.csv"
    np.savetxt(path, running_example(20).points, delimiter=",")
    # no covariance direction survives the cut
    code, _ = run_cli(["detect", "--input", str(path), "--group", "SO2", "--epsilon", "100"], capsys)
    assert code == 4


@pytest.mark.parametrize("group,dim,wmax,count", [("SO2", 10, 10, 251), ("SU2", 7, 1, 6), ("SO3", 4, 1, 1)])
def test_cli_list_reps(group, dim, wmax, count, capsys):
    code, out = run_cli(["list-reps", "--group", group, "--dim", str(dim), "--wmax", str(wmax)], capsys)
    rows = json.loads(out.out)
    assert code == 0 and len(rows) == count
    if group == "SO3":
        assert rows[0]["payload"] == [1, 3]


def test_cli_synth_sidecar(tmp_path, capsys):
    out = tmp_path / "orbit.csv"
    spec = '{"group": "SO2", "payload": [1, 2], "N": 40, "seed": 2}'
    assert main(["synth", "--spec", spec, "--out", str(out)]) == 0
    pts = np.loadtxt(out, delimiter=",")
    truth = json.loads((tmp_path / "orbit.json").read_text())
    assert pts.shape == (40, 4)
    assert truth["points"] == 40 and truth["rep"]["payload"] == [1, 2]


def test_cli_spectrum(running_csv, capsys):
    code, out = run_cli(["spectrum", "--input", running_csv], capsys)
    payload = json.loads(out.out)
    assert code == 0
    assert payload["estimated_dimension"] == 1 and payload["suggested_groups"] == ["SO2"]
    assert len(payload["spectrum"]) == 16 and len(payload["skew_spectrum"]) == 6


def test_cli_density_sample(tmp_path, running_csv, capsys):
    out = tmp_path / "new.csv"
    code = main(["density-sample", "--input", running_csv, "--group", "SO2", "--wmax", "4", "--allow-zero",
                 "--count", "100", "--out", str(out)])
    assert code == 0
    pts = np.loadtxt(out, delimiter=",")
    assert pts.shape == (100, 4)
    # new points stay near the (1,4) curve: |x_3 + i x_4| stays close to 1
    assert np.max(np.abs(np.hypot(pts[:, 2], pts[:, 3]) - 1)) < 0.2

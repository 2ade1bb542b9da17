import json
import xml.etree.ElementTree as ET

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beta_adic.cli import run_command
from beta_adic.errors import UnsupportedKind
from beta_adic.experiments import ExperimentConfig, run_experiment
from beta_adic.plotting import emit_plot, render_svg


def run(capsys, *argv):
    code = run_command(list(argv))
    out = capsys.readouterr()
    return code, out.out.strip(), out.err


def test_expand(capsys):
    assert run(capsys, "expand", "--beta", "5/2", "--x", "1/2", "--depth", "4")[:2] == (0, "1,0,1,1")


def test_tau_and_inverse(capsys):
    assert run(capsys, "tau", "--beta", "5/2", "--word", "0,0,0")[:2] == (0, "1,0,0")
    assert run(capsys, "tau", "--beta", "5/2", "--word", "0,1,1,1", "--inverse")[:2] == (0, "2,0,1,1")


def test_admissible(capsys):
    assert run(capsys, "admissible", "--beta", "5/2", "--word", "2,2")[:2] == (0, "false")
    assert run(capsys, "admissible", "--beta", "5/2", "--word", "1,1,1")[:2] == (0, "true")


def test_orbit_and_csv(capsys, tmp_path):
    code, out, _ = run(capsys, "orbit", "--beta", "5/2", "--word", "1,0,1,1", "--n", "200")
    assert code == 0 and out.startswith("S_n=")
    path = tmp_path / "orbit.csv"
    code, out2, _ = run(capsys, "orbit", "--beta", "5/2", "--word", "1,0,1,1", "--n", "200", "--output", str(path))
    assert code == 0 and out2 == out
    lines = path.read_text().splitlines()
    assert len(lines) == 201
    assert sum(int(l.rsplit(",", 1)[1]) for l in lines[1:]) == int(out.split()[0].split("=")[1])


def test_density_and_sigma(capsys, tmp_path):
    path = tmp_path / "h.csv"
    code, out, _ = run(capsys, "density", "--beta", "5/2", "--bins", "512", "--output", str(path))
    assert code == 0 and "l1_parry=" in out
    assert path.read_text().splitlines()[0] == "x,value"
    code, out, _ = run(capsys, "sigma", "--beta", "5/2", "--bins", "1024")
    assert code == 0 and out.startswith("sigma2=0.23")


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["bogus"],
        ["expand", "--beta", "5/2"],
        ["expand", "--beta", "abc", "--x", "1/2"],
        ["expand", "--beta", "5/2", "--x", "3/2"],
        ["expand", "--beta", "5/2", "--x", "1/2", "--depth", "many"],
        ["admissible", "--beta", "5/2", "--word", "1,x"],
        ["admissible", "--beta", "5/2", "--word", "3"],
        ["orbit", "--beta", "5/2", "--word", "1", "--n", "5", "--observable", "nope"],
        ["orbit", "--beta", "5/2", "--word", "1", "--n", "5", "--observable", "{bad json"],
        ["experiment", "ds", "--trials", "0"],
        ["experiment", "nope"],
    ],
)
def test_usage_errors_exit_2(capsys, argv):
    assert run(capsys, *argv)[0] == 2


def test_runtime_error_exit_1(capsys, tmp_path):
    code, _, err = run(capsys, "experiment", "ds", "--n", "100000000", "--trials", "100000", "--output", str(tmp_path))
    assert code == 1
    assert "FeasibilityExceeded" in err


def test_predecessor_of_zero_is_runtime_error(capsys):
    code, _, err = run(capsys, "tau", "--beta", "5/2", "--word", "0,0", "--inverse")
    assert code == 1 and "MinimalPoint" in err


tokens = st.sampled_from(
    ["expand", "tau", "admissible", "orbit", "sigma", "density", "experiment", "ds", "--beta", "5/2", "x",
     "--x", "1/2", "--word", "1,0", "--n", "3", "-1", "--depth", "2", "--bins", "1", "--inverse", "", "--y"]
)


@given(st.lists(tokens, max_size=7))
@settings(max_examples=150, deadline=None)
def test_exit_code_contract(argv):
    if argv[:1] == ["experiment"] or argv[:1] == ["sigma"]:
        return  # slow paths are covered above
    assert run_command(argv) in (0, 1, 2)


def write_cfg(path, body):
    path.write_text(body)
    return str(path)


def test_config_file_and_overrides(capsys, tmp_path):
    cfg = write_cfg(tmp_path / "ds.toml", 'beta = "5/2"\nobservable = "d1"\nplot = true\n[experiment]\nn = 5000\ntrials = 40\nseed = 9\n')
    out_dir = tmp_path / "out"
    code, out, _ = run(capsys, "experiment", "ds", "--config", cfg, "--output", str(out_dir), "--trials", "30")
    assert code == 0
    stem = "ds_5-2_5000_9"
    data = json.loads((out_dir / f"{stem}.json").read_text())
    assert data["inputs"]["trials"] == 30
    # every number on stdout appears verbatim in the JSON summary
    for item in out.split():
        key, _, val = item.partition("=")
        if key in data["summary"]:
            assert json.dumps(data["summary"][key]) == val
    assert (out_dir / f"{stem}.svg").exists()
    before = {p.name: p.read_bytes() for p in out_dir.iterdir()}
    run(capsys, "experiment", "ds", "--config", cfg, "--output", str(out_dir), "--trials", "30", "--workers", "1")
    assert before == {p.name: p.read_bytes() for p in out_dir.iterdir()}


@pytest.mark.parametrize(
    "body",
    ["extra = 1\n", "[experiment]\nsamples = 3\n", "[experiment]\nkind = \"clt\"\n", "not toml ===\n"],
)
def test_bad_config_exit_2(capsys, tmp_path, body):
    cfg = write_cfg(tmp_path / "bad.toml", body)
    assert run(capsys, "experiment", "ds", "--config", cfg, "--output", str(tmp_path))[0] == 2


def test_missing_config_exit_2(capsys, tmp_path):
    assert run(capsys, "experiment", "ds", "--config", str(tmp_path / "none.toml"))[0] == 2


def test_svg_outputs():
    ds = run_experiment(ExperimentConfig(kind="ds", n=2000, trials=50, seed=1))
    svg = render_svg(ds)
    ET.fromstring(svg.encode())
    assert svg == render_svg(ds)
    clt = run_experiment(ExperimentConfig(kind="clt", n=500, trials=300, seed=1))
    svg = render_svg(clt)
    ET.fromstring(svg.encode())
    assert f"KS = {json.dumps(clt.summary['ks_normal'])}" in svg
    llt = run_experiment(ExperimentConfig(kind="llt", n=10))
    ET.fromstring(render_svg(llt).encode())


def test_plot_rejects_non_distributional(tmp_path):
    bre = run_experiment(ExperimentConfig(kind="bre", n=1000, trials=5, seed=1))
    with pytest.raises(UnsupportedKind):
        emit_plot(bre, tmp_path / "x.svg")
    assert not (tmp_path / "x.svg").exists()

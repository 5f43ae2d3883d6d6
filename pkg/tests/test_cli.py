import json

import pytest

from pcr3bp.cli import UsageError, main, parse_energy
from pcr3bp.dynamics import SystemConfig
from pcr3bp.equilibria import critical_values
from pcr3bp.orbits import window_energy


def test_parse_energy():
    cfg = SystemConfig(0.5)
    cv = critical_values(cfg)
    assert parse_energy("L1-0.05", cfg) == cv["L1"] - 0.05
    assert parse_energy("L4 + 0.1", cfg) == cv["L4"] + 0.1
    assert parse_energy("L2", cfg) == cv["L2"]
    assert parse_energy("-1.7", cfg) == -1.7
    assert parse_energy("L1+window", cfg) == window_energy(cfg)
    for bad in ("L6", "L1*2", "foo", "L2+window"):
        with pytest.raises(UsageError):
            parse_energy(bad, cfg)


def test_lagrange_command(tmp_path, capsys):
    assert main(["lagrange", "--mu", "0.5", "--output-dir", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "lagrange.json").read_text())
    l1 = data["points"][0]
    assert l1["label"] == "L1" and abs(l1["q"][0]) <= 1e-15
    assert "U(L2) = U(L3)" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [["lagrange", "--mu", "abc"], ["lagrange", "--mu", "0.7"],
                                  ["hill", "--energy", "L9"], ["homology", "--pair", "nope"],
                                  ["orbit-search", "--type", "other", "--grid", "4"]])
def test_usage_errors(argv, tmp_path):
    with pytest.raises(SystemExit) as exc:
        main([*argv, "--output-dir", str(tmp_path)])
    assert exc.value.code == 2


def test_hill_command(tmp_path):
    assert main(["hill", "--mu", "0.5", "--energy", "L1-0.01", "--resolution", "400",
                 "--output-dir", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "hill.json").read_text())
    assert data["n_components"] == 3
    assert (tmp_path / "hill.svg").read_text().startswith("<?xml")
    assert (tmp_path / "zero_velocity.csv").read_text().startswith("curve_id,x,y")


def test_homology_command(tmp_path, capsys):
    assert main(["homology", "--pair", "Le_Lm", "--degree", "5", "--output-dir", str(tmp_path)]) == 0
    lines = (tmp_path / "homology.csv").read_text().splitlines()
    assert lines[0] == "pair,degree,rank" and all(line.endswith(",0") for line in lines[1:])
    assert len(lines) == 7


def test_config_file_and_override(tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text("[run]\nmu = 0.3\noutput_dir = %s\n\n[homology]\ndegree = 3\n" % (tmp_path / "out"))
    assert main(["homology", "--config", str(ini)]) == 0
    assert json.loads((tmp_path / "out" / "homology.json").read_text())["degree"] == 3
    assert main(["lagrange", "--config", str(ini), "--mu", "0.2"]) == 0
    assert json.loads((tmp_path / "out" / "lagrange.json").read_text())["mu"] == 0.2
    with pytest.raises(SystemExit) as exc:
        main(["lagrange", "--config", str(tmp_path / "missing.ini")])
    assert exc.value.code == 2


def test_failure_exit_code(tmp_path):
    # a perturbation this large breaks the contact condition, which must be reported
    assert main(["contact-check", "--mu", "0.5", "--samples", "500", "--kappa", "50",
                 "--output-dir", str(tmp_path)]) == 1
    rep = json.loads((tmp_path / "failure.json").read_text())
    assert rep["passed"] is False and "reason" in rep


def test_orbit_search_command(tmp_path):
    assert main(["orbit-search", "--mu", "0.5", "--energy", "L1+0.02", "--type", "symmetric-periodic",
                 "--grid", "30", "--crossings", "1", "--output-dir", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "search.json").read_text())
    assert data["oracle"]["pair"] == "Fix_Fix"
    assert data["report"]["found"] == len(data["orbits"])
    for o in data["orbits"]:
        assert (tmp_path / o["trajectory_csv_path"]).exists()
    assert (tmp_path / "orbits.svg").exists()


def test_critical_energy_rejected(tmp_path):
    assert main(["contact-check", "--mu", "0.5", "--energy", "L1", "--samples", "100",
                 "--output-dir", str(tmp_path)]) == 1

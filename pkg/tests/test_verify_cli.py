import json
import re

import pytest

from calibrated_necks.cli import main
from calibrated_necks.verify import RunConfig, run_all


@pytest.mark.parametrize("argv", [
    ["verify", "--epsilon", "0"],
    ["verify", "--necks", "-1"],
    ["verify", "--big-n", "5"],
    ["verify", "--only", "nosuch"],
    ["verify", "--zmin", "-1"],
])
def test_bad_config_exits_2(argv, tmp_path, capsys):
    assert main(argv + ["--out", str(tmp_path)]) == 2
    assert "error" in capsys.readouterr().err


def test_only_filter_and_report(tmp_path, capsys):
    out = str(tmp_path)
    assert main(["verify", "--only", "slitplane,forms", "--out", out]) == 0
    doc = json.loads((tmp_path / "report.json").read_text())
    suites = {c["suite"] for c in doc["certificates"]}
    assert suites == {"slitplane", "forms"}
    assert doc["passed"] and doc["failed"] == []
    capsys.readouterr()
    assert main(["report", "--out", out]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == len(doc["certificates"]) and all(line.startswith("PASS ") for line in lines)


def test_report_payload_is_deterministic():
    config = RunConfig(only=("slitplane", "chart")).validate()
    a, b = run_all(config), run_all(config)
    assert json.dumps(a.payload(), sort_keys=True) == json.dumps(b.payload(), sort_keys=True)


def test_construct_without_necks(tmp_path):
    assert main(["construct", "--necks", "0", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "atlas.json").read_text())
    assert doc["necks"] == []
    assert [p["zone"] for p in doc["patches"]] == ["seed"]


def test_construct_default(tmp_path):
    assert main(["construct", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "atlas.json").read_text())
    assert len(doc["necks"]) == 3
    zones = [p["zone"] for p in doc["patches"]]
    assert zones.count("collar") == 6 and zones.count("hole") == 6 and zones.count("neck") == 3


def test_export_mesh_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["export-mesh", "--necks", "1", "--out", str(d)]) == 0
    assert (a / "surface.mesh").read_bytes() == (b / "surface.mesh").read_bytes()
    chi = (a / "chi.txt").read_text()
    assert re.search(r"^chi -1$", chi, re.MULTILINE)
    first = (a / "surface.mesh").read_text().splitlines()[0].split()
    assert first[0] == "v" and len(first) == 5
    for token in first[1:]:
        mantissa = token.split("e")[0].lstrip("-").replace(".", "")
        assert len(mantissa) == 17


def test_branched_mesh_exits_1(tmp_path, capsys):
    assert main(["export-mesh", "--variant", "branched", "--out", str(tmp_path)]) == 1
    assert "error" in capsys.readouterr().err

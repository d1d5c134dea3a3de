from __future__ import annotations

import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from hillbloch.cli import BUILTINS, RunConfig, builtin_potential, main, resolve_potential
from hillbloch.errors import ConfigError
from hillbloch.potential import mean_spectrum


def run(tmp_path, *args):
    # argparse failures exit through SystemExit; fold them into a return code
    try:
        return main([*args, "--out", str(tmp_path)])
    except SystemExit as exc:
        return exc.code


def read(tmp_path, name):
    return json.loads((tmp_path / name).read_text())


@pytest.mark.parametrize("name", BUILTINS)
def test_builtins_load(name):
    p = builtin_potential(name)
    assert p.name == name and p.m >= 1


@pytest.mark.parametrize("name,mu", [
    ("free", [0.0]),
    ("constant", [1.0, 4.0]),
    ("mu013", [0.0, 1.0, 3.0]),
    ("mu012", [0.0, 1.0, 2.0]),
])
def test_builtin_means(name, mu):
    assert mean_spectrum(builtin_potential(name)).mu == pytest.approx(mu, abs=1e-12)


def test_unknown_builtin():
    with pytest.raises(ConfigError):
        resolve_potential("no-such-potential", 1)


def test_random_source_is_seeded():
    a = resolve_potential("random:2:2", 7)
    b = resolve_potential("random:2:2", 7)
    assert a.m == 2 and a.degree == 2
    assert all(np.array_equal(x, y) for (_, x), (_, y) in zip(a.blocks(), b.blocks()))


def test_free_has_no_gaps(tmp_path):
    assert run(tmp_path, "spectrum", "--potential", "free") == 0
    data = read(tmp_path, "gaps.json")
    assert data["gaps"] == []


def test_mathieu_gaps_match_oracle(tmp_path):
    assert run(tmp_path, "spectrum", "--potential", "mathieu") == 0
    data = read(tmp_path, "gaps.json")
    assert len(data["gaps"]) > 0
    check = data["oracle_edge_check"]
    assert check["points"] and check["max_distance"] <= 1e-6
    header = (tmp_path / "bands.csv").read_text().splitlines()[0].split(",")
    assert header[0] == "t" and header[1] == "lambda_1"
    assert (tmp_path / "bands.svg").read_text().startswith("<?xml")


def test_demo_census_emitted(tmp_path):
    assert run(tmp_path, "spectrum", "--potential", "demo-d-holds") == 0
    census = read(tmp_path, "gaps.json")["census"]
    assert census["label"] == "consistency demonstration, not a proof"
    assert census["condition"]["holds"] is True
    assert isinstance(census["upper_uniformly_smaller"], bool)


@pytest.mark.parametrize("name,holds,extra", [
    ("mu013", True, None),
    ("mu012", False, [3, 2, 1]),
    ("seeded-m2", False, None),
])
def test_condition(tmp_path, name, holds, extra):
    assert run(tmp_path, "condition", "--potential", name) == 0
    data = read(tmp_path, "condition.json")
    assert data["holds"] is holds
    if extra is not None:
        assert data["violation"]["i"] == extra
    if name == "seeded-m2":
        assert data["reason"] == "fewer than three simple eigenvalues"


def test_verify_constant_passes(tmp_path):
    rc = run(tmp_path, "verify", "--potential", "constant", "--k-max", "16", "--pairs", "5")
    assert rc == 0
    data = read(tmp_path, "verify.json")
    assert data["checks"] == {"decay": "PASS", "concentration": "PASS"}
    for entry in data["decay"]["per_j"]:
        assert max(abs(r["value"]) for r in entry["residual"]["table"]) <= 1e-9


@pytest.mark.parametrize("args", [
    ["verify", "--k-min", "2"],
    ["verify", "--k-min", "1", "--k-max", "20"],
    ["spectrum", "--grid-size", "66"],
    ["spectrum", "--workers", "0"],
    ["spectrum", "--no-such-flag"],
    ["spectrum", "--potential", "does/not/exist.json"],
])
def test_usage_errors_exit_1(tmp_path, args):
    assert run(tmp_path, *args) == 1


def test_computation_error_exits_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"m": 1, "blocks": [{"n": 0, "re": [[0.0]], "im": [[1.0]]}]}))
    assert run(tmp_path, "condition", "--potential", str(bad)) == 2


def test_config_file_then_flags(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"potential": "mu012", "tol_sum": 1e-6}))
    assert run(tmp_path, "condition", "--config", str(cfg)) == 0
    assert read(tmp_path, "condition.json")["potential"] == "mu012"
    assert run(tmp_path, "condition", "--config", str(cfg), "--potential", "mu013") == 0
    assert read(tmp_path, "condition.json")["potential"] == "mu013"


def test_config_rejects_unknown_keys(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"potenshul": "free"}))
    assert run(tmp_path, "condition", "--config", str(cfg)) == 1


def test_config_defaults_validate():
    assert RunConfig().validate().grid_size == 128


def test_oracle_check_command(tmp_path):
    rc = run(tmp_path, "oracle-check", "--potential", "mathieu", "--oracle-count", "3")
    assert rc == 0
    data = read(tmp_path, "oracle_check.json")
    assert data["status"] == "PASS" and data["max_difference"] <= 1e-6
    assert data["t"] == pytest.approx(1.0)


def _svg_shape(text):
    root = ET.fromstring(text)
    return [(el.tag, sorted(el.attrib), el.get("class")) for el in root.iter()]


def test_outputs_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["spectrum", "--potential", "random:2:1", "--seed", "5", "--lam-max",
            str((2 * math.pi * 5) ** 2)]
    assert run(a, *args) == 0 and run(b, *args) == 0
    for name in ("bands.csv", "gaps.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert _svg_shape((a / "bands.svg").read_text()) == _svg_shape((b / "bands.svg").read_text())


def test_svg_has_band_per_column(tmp_path):
    assert run(tmp_path, "spectrum", "--potential", "mathieu") == 0
    root = ET.fromstring((tmp_path / "bands.svg").read_text())
    ns = "{http://www.w3.org/2000/svg}"
    bands = [el for el in root.iter(ns + "polyline") if el.get("class") == "band"]
    gaps = [el for el in root.iter(ns + "rect") if el.get("class") == "gap"]
    header = (tmp_path / "bands.csv").read_text().splitlines()[0].split(",")
    assert len(bands) == len(header) - 1
    assert len(gaps) == len(read(tmp_path, "gaps.json")["gaps"])

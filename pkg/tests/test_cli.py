import csv
import io
import json
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ghzdist.cli import (
    EXIT_CONFIG,
    EXIT_IO,
    EXIT_OK,
    Axis,
    ConfigError,
    SweepConfig,
    decision_grid,
    main,
    run_parent_fidelity_sweep,
    run_validation,
)
from ghzdist.models import NetworkParams

GOLDEN = Path(__file__).parent / "golden"
CASES = {
    "parent_fidelity": ["parent-fidelity"],
    "parent_rate": ["parent-rate"],
    "boundary_rate": ["boundary", "--metric", "rate"],
    "boundary_fidelity": ["boundary", "--metric", "fidelity"],
    "curves_rate": ["curves", "--metric", "rate"],
    "curves_fidelity": ["curves", "--metric", "fidelity"],
}


def rows(text):
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body))))


def run(tmp_path, name, *extra):
    out = tmp_path / f"{name}.csv"
    args = CASES[name] + ["--config", str(GOLDEN / f"{name}.json"), "--out", str(out), *extra]
    assert main(args) == EXIT_OK
    return out.read_bytes()


@pytest.mark.parametrize("name", sorted(CASES))
def test_golden_byte_identical(tmp_path, name):
    assert run(tmp_path, name) == (GOLDEN / f"{name}.csv").read_bytes()


@pytest.mark.parametrize("name", sorted(CASES))
def test_worker_count_irrelevant(tmp_path, name):
    assert run(tmp_path, name, "--workers", "8") == run(tmp_path, name, "--workers", "1")


def test_boundary_side_file(tmp_path):
    edge = tmp_path / "edge.csv"
    run(tmp_path, "boundary_fidelity", "--boundary-out", str(edge))
    assert edge.read_bytes() == (GOLDEN / "boundary_fidelity_edge.csv").read_bytes()


def test_csv_format(tmp_path):
    text = run(tmp_path, "curves_rate").decode()
    assert "\r" not in text
    lines = text.splitlines()
    assert lines[0].startswith("# ghzdist ")
    cfg = json.loads(lines[1].removeprefix("# config: "))
    assert cfg["params"]["q_bsm"] == 0.9
    assert "# value_scale: log" in lines
    assert any("illustrative" in line for line in lines if line.startswith("#"))
    for r in rows(text):
        for v in r.values():
            assert float(repr(float(v))) == float(v)


def test_parent_fidelity_rows():
    cfg = SweepConfig.from_dict(json.loads((GOLDEN / "parent_fidelity.json").read_text()))
    for r in rows(run_parent_fidelity_sweep(cfg)):
        assert float(r["fid_measurement"]) >= float(r["fid_source"])


def test_parent_fidelity_zero_difference_without_memory_noise():
    cfg = SweepConfig(params=NetworkParams(p_mem=1.0, f_src=1.0),
                      axes=[Axis("p_bsm", 0.5, 1.0, 6), Axis("n_users", explicit=(2, 3, 4))])
    assert all(abs(float(r["difference"])) < 1e-14 for r in rows(run_parent_fidelity_sweep(cfg)))


def test_rate_grid_q_bsm_one_repeater_wins_eventually():
    cfg = SweepConfig(axes=[Axis("q_bsm", explicit=(1.0,)), Axis("L0_in", 0.0, 200.0, 21)])
    with pytest.raises(ConfigError):
        decision_grid(cfg, "rate")  # degenerate noise axis
    cfg = SweepConfig(axes=[Axis("q_bsm", explicit=(1.0, 0.99)), Axis("L0_in", 0.0, 200.0, 21)])
    g = decision_grid(cfg, "rate")
    assert g.winner[0, 0] == "m1"
    assert g.boundary("m2")[0] is not None


def test_seed_flag_overrides_config(tmp_path):
    out = tmp_path / "a.csv"
    main(["--seed", "11", "parent-rate", "--config", str(GOLDEN / "parent_rate.json"), "--out", str(out)])
    assert '"seed":11' in out.read_text().splitlines()[1]


class TestErrors:
    def test_missing_config(self, tmp_path):
        assert main(["parent-rate", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG

    def test_bad_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{")
        assert main(["parent-rate", "--config", str(p)]) == EXIT_CONFIG

    @pytest.mark.parametrize("cfg", [
        {"axes": [{"name": "bogus", "min": 0, "max": 1, "steps": 3}]},
        {"axes": [{"name": "L0_in", "min": 1, "max": 1, "steps": 3}]},
        {"axes": [{"name": "L0_in", "min": 0, "max": 1, "steps": 1}]},
        {"params": {"p_bsm": 2.0}},
        {"modes": {"rate": "guess"}},
        {"surprise": 1},
    ])
    def test_invalid_configs(self, tmp_path, cfg):
        p = tmp_path / "c.json"
        p.write_text(json.dumps(cfg))
        assert main(["curves", "--metric", "rate", "--config", str(p)]) == EXIT_CONFIG

    def test_wrong_axis_count(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"axes": [{"name": "L0_in", "min": 0, "max": 1, "steps": 3}]}))
        assert main(["boundary", "--metric", "rate", "--config", str(p)]) == EXIT_CONFIG

    def test_unwritable_output(self, tmp_path):
        out = tmp_path / "missing_dir" / "x.csv"
        args = ["parent-rate", "--config", str(GOLDEN / "parent_rate.json"), "--out", str(out)]
        assert main(args) == EXIT_IO

    def test_bad_metric_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["curves", "--metric", "speed"])
        assert exc.value.code == 2


@given(st.floats(-1e3, 1e3, allow_nan=False), st.floats(1e-3, 1e3), st.integers(2, 40))
def test_axis_values_span_range(lo, width, steps):
    ax = Axis("L0_in", lo, lo + width, steps)
    vals = ax.values()
    assert len(vals) == steps
    assert vals[0] == pytest.approx(lo) and vals[-1] == pytest.approx(lo + width)


def test_integer_axis_rounds():
    assert Axis("n_users", 2, 5, 4).values() == [2, 3, 4, 5]


def test_validation_small(tmp_path):
    cfg = SweepConfig(trials=200_000, seed=3)
    report, ok = run_validation(cfg)
    assert ok and report["hard_checks_pass"]
    assert report["axioms"]["pass"]
    assert report["fused_fidelity_vs_oracle"]["g_function_pass"]
    for p in report["nested_rate_vs_mc"]["points"]:
        assert "pass" not in p
        assert p["verbatim"]["clamped_points"] > 0


def test_validate_reproducible(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["validate", "--trials", "140000", "--out", str(a)]) == EXIT_OK
    assert main(["validate", "--trials", "140000", "--workers", "4", "--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()

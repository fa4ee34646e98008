"""Scenario documents: validation, deterministic runs, and exports."""

import csv
import filecmp
import json
import os

import jsonschema
import numpy as np
import pytest

from fluxlock import RunResult, ScenarioValidationError, parse_scenario, scenario

DOC = """
# two slaves locked to one master, plus a taste of every element kind
[grid]
dt = 1.0
n = 8192

[laser master]
kind = linear
amplitude = 1e4

[laser slave_a]
kind = phasor
amplitude = 800
drift_rate = 0.5

[laser slave_b]
kind = phasor
amplitude = 800
drift_rate = 0.5

[control lock]
type = dual_feedforward
slaves = slave_a, slave_b
master = master
mixing_angle = 0.7853981633974483
actuation = rotation

[delay echo_line]
input = slave_b
lag = 16

[analysis beat_level]
type = psd
signal = lock.beat
segment_length = 1024
band = 0.3, 3.0
compare = locked_beat
compare_params = mixing_angle=0.7853981633974483, slave_amplitude=800, master_amplitude=1e4
tolerance = 0.15

[analysis drift_tail]
type = power_law
signal = slave_a
segment_length = 1024
band = 0.02, 0.1

[analysis beat_spread]
type = variance
signal = lock.beat

[run]
seed = 11
traces = lock.beat, slave_a, echo_line
"""

BAD = """
[grid]
dt = 0.1
n = 4096

[laser src]
kind = linear
amplitude = 100
wobble = 3

[delay d1]
input = nothing
lag = 0.25

[splitter s1]
inputs = d1, s1.a
mixing_angle = 0.5

[analysis a1]
type = psd
signal = src
segment_length = 512
compare = coherent_quadrature
band = 0.1, 1.0

[run]
seed = -4
"""


@pytest.fixture(scope="module")
def result():
    return scenario.run(parse_scenario(DOC))


class TestParsing:
    def test_echo_carries_resolved_defaults(self):
        cfg = parse_scenario(DOC)
        assert cfg.seed == 11
        assert cfg.echo["grid"] == {"dt": 1.0, "n": 8192, "t0": 0.0}
        assert cfg.echo["laser master"]["drift_rate"] == 0.0  # filled in
        assert cfg.echo["control lock"]["gain_scale"] == 1.0

    def test_all_errors_reported_at_once(self):
        with pytest.raises(ScenarioValidationError) as info:
            parse_scenario(BAD)
        errors = info.value.errors
        assert len(errors) == 7
        assert all(e.startswith("line ") for e in errors)
        lines = [int(e.split(":", 1)[0].split()[1]) for e in errors]
        assert lines == sorted(lines)
        joined = "\n".join(errors)
        assert "unknown key 'wobble'" in joined
        assert "unknown signal 'nothing'" in joined
        assert "not a non-negative multiple of the grid step" in joined
        assert "wiring cycle: s1 -> s1" in joined
        assert "missing required key 'tolerance'" in joined
        assert "seed must be >= 0" in joined
        assert "7 problems" in str(info.value)

    def test_unknown_signal_hint_lists_available(self):
        with pytest.raises(ScenarioValidationError) as info:
            parse_scenario(BAD)
        hint = next(e for e in info.value.errors if "unknown signal 'nothing'" in e)
        assert "src" in hint

    def test_missing_grid_and_laser(self):
        with pytest.raises(ScenarioValidationError) as info:
            parse_scenario("[run]\nseed = 1\n")
        joined = "\n".join(info.value.errors)
        assert "missing required [grid]" in joined
        assert "at least one [laser" in joined

    def test_name_collision(self):
        doc = DOC + "\n[laser master]\nkind = linear\namplitude = 5\n"
        with pytest.raises(ScenarioValidationError) as info:
            parse_scenario(doc)
        assert any("collides" in e for e in info.value.errors)


class TestRun:
    def test_result_shape(self, result):
        assert isinstance(result, RunResult)
        assert sorted(result.traces) == ["echo_line", "lock.beat", "slave_a"]
        assert sorted(result.spectra) == ["beat_level", "drift_tail"]
        assert sorted(result.reports) == ["beat_level", "beat_spread", "drift_tail"]
        assert result.seed == 11
        assert result.warnings == ()

    def test_comparison_report_verdict(self, result):
        rep = result.reports["beat_level"]
        assert rep["type"] == "comparison"
        assert rep["passed"] is True
        assert rep["ratio"] == pytest.approx(1.0, abs=0.15)

    def test_power_law_sees_walk_tail(self, result):
        rep = result.reports["drift_tail"]
        assert rep["passed"] is None  # descriptive: no expected exponent given
        assert rep["exponent"] == pytest.approx(-2.0, abs=0.3)

    def test_seed_override_beats_config(self):
        cfg = parse_scenario(DOC)
        a = scenario.run(cfg)
        b = scenario.run(cfg, seed=12)
        assert a.seed == 11 and b.seed == 12
        assert not np.array_equal(a.traces["slave_a"].samples, b.traces["slave_a"].samples)

    def test_same_seed_same_samples(self):
        cfg = parse_scenario(DOC)
        a = scenario.run(cfg)
        b = scenario.run(cfg)
        for name in a.traces:
            np.testing.assert_array_equal(a.traces[name].samples, b.traces[name].samples)

    def test_traces_all_and_none(self):
        base = DOC.replace("traces = lock.beat, slave_a, echo_line", "traces = all")
        res = scenario.run(parse_scenario(base))
        assert {"master", "slave_a", "slave_b", "lock.beat", "lock.a"} <= set(res.traces)
        res = scenario.run(parse_scenario(base.replace("traces = all", "traces = none")))
        assert res.traces == {}

    def test_unused_element_warns(self):
        doc = DOC.replace("traces = lock.beat, slave_a, echo_line", "traces = lock.beat")
        res = scenario.run(parse_scenario(doc))
        assert len(res.warnings) == 1
        assert "delay echo_line" in res.warnings[0]

    def test_runtime_failure_names_the_element(self):
        doc = DOC.replace("actuation = rotation", "actuation = rotation\nactuator_limit = 1e-9")
        with pytest.raises(Exception) as info:
            scenario.run(parse_scenario(doc))
        assert "scenario element 'control lock'" in str(info.value)


class TestExport:
    def test_reruns_are_byte_identical(self, result, tmp_path):
        cfg = parse_scenario(DOC)
        a, b = tmp_path / "a", tmp_path / "b"
        scenario.export(result, str(a))
        scenario.export(scenario.run(cfg), str(b))
        for name in ("traces.csv", "psd.csv", "reports.json", "manifest.json"):
            assert filecmp.cmp(a / name, b / name, shallow=False), name

    def test_files_use_lf_endings(self, result, tmp_path):
        scenario.export(result, str(tmp_path))
        for name in ("traces.csv", "psd.csv", "reports.json", "manifest.json"):
            assert b"\r" not in (tmp_path / name).read_bytes(), name

    def test_traces_csv_round_trips_exactly(self, result, tmp_path):
        scenario.export(result, str(tmp_path))
        with open(tmp_path / "traces.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        header, data = rows[0], np.array(rows[1:], dtype=np.float64)
        assert header[0] == "t [s]"
        np.testing.assert_array_equal(data[:, 0], result.traces["slave_a"].grid.times)
        i_re = header.index("slave_a.re [sqrt(Hz)]")
        i_im = header.index("slave_a.im [sqrt(Hz)]")
        np.testing.assert_array_equal(data[:, i_re], result.traces["slave_a"].samples.real)
        np.testing.assert_array_equal(data[:, i_im], result.traces["slave_a"].samples.imag)
        i_beat = header.index("lock.beat [a.u.]")
        np.testing.assert_array_equal(data[:, i_beat], result.traces["lock.beat"].samples)

    def test_psd_csv_matches_spectra(self, result, tmp_path):
        # the two spectra here have different axes (the increment estimator
        # drops the zero bin), so the file interleaves (omega, psd) pairs
        scenario.export(result, str(tmp_path))
        with open(tmp_path / "psd.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        header = rows[0]
        for name in ("beat_level", "drift_tail"):
            i_om = header.index(f"{name}.omega [rad/s]")
            i_psd = header.index(f"{name} [psd]")
            est = result.spectra[name]
            got_om = np.array([r[i_om] for r in rows[1:] if r[i_om] != ""], dtype=np.float64)
            got_psd = np.array([r[i_psd] for r in rows[1:] if r[i_psd] != ""], dtype=np.float64)
            np.testing.assert_array_equal(got_om, est.omega)
            np.testing.assert_array_equal(got_psd, est.psd)

    def test_psd_csv_shared_axis_layout(self, tmp_path):
        doc = DOC.replace("type = power_law", "type = psd").replace(
            "band = 0.02, 0.1", "band = 0.02, 0.1\ntolerance = 10\ncompare = 0.5"
        )
        res = scenario.run(parse_scenario(doc))
        scenario.export(res, str(tmp_path))
        with open(tmp_path / "psd.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0][0] == "omega [rad/s]"
        data = np.array(rows[1:], dtype=np.float64)  # rectangular: shared axis
        col = rows[0].index("beat_level [psd]")
        np.testing.assert_array_equal(data[:, col], res.spectra["beat_level"].psd)

    def test_manifest_contents(self, result, tmp_path):
        manifest = scenario.export(result, str(tmp_path))
        on_disk = json.loads((tmp_path / "manifest.json").read_text())
        assert on_disk == manifest
        assert manifest["schema_version"] == scenario.SCHEMA_VERSION
        assert manifest["seed"] == 11
        assert manifest["kernel_backend"] in ("numba", "python")
        assert manifest["config_echo"]["grid"]["n"] == 8192
        assert "wall" not in json.dumps(manifest)  # no wall-clock noise in exports

    def _schema(self, name):
        path = os.path.join(os.path.dirname(__file__), "..", "docs", "schemas", name)
        with open(path) as fh:
            return json.load(fh)

    def test_manifest_validates_against_schema(self, result, tmp_path):
        scenario.export(result, str(tmp_path))
        payload = json.loads((tmp_path / "manifest.json").read_text())
        jsonschema.validate(payload, self._schema("manifest.schema.json"))

    def test_reports_validate_against_schema(self, result, tmp_path):
        scenario.export(result, str(tmp_path))
        payload = json.loads((tmp_path / "reports.json").read_text())
        jsonschema.validate(payload, self._schema("reports.schema.json"))

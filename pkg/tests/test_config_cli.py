"""Config schema validation and the CLI surface."""

import json

import numpy as np
import pytest

from duhamel.cli import main
from duhamel.config import ConfigError, load_config
from duhamel.io import read_trajectory
from duhamel.suites import suite_bounds


def write_config(tmp_path, body, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(body))
    return str(path)


def controlled_heat_config(**overrides):
    cfg = {
        "schema": 1,
        "kind": "controlled-heat",
        "grid": {"points": [64], "extent": [6.283185307179586], "origin": [0.0]},
        "series": {"time_steps": 16, "output_times": [0.5, 1.0]},
        "controlled_heat": {"initial": "1 + 0.5*cos(x)", "forcing": 0.5, "horizon": 1.0},
    }
    cfg.update(overrides)
    return cfg


class TestConfigValidation:
    def test_valid_config_loads(self, tmp_path):
        cfg = load_config(write_config(tmp_path, controlled_heat_config()))
        assert cfg.kind == "controlled-heat"
        assert cfg.grid.points == (64,)
        assert cfg.series.time_steps == 16

    def test_unknown_top_level_key(self, tmp_path):
        with pytest.raises(ConfigError) as err:
            load_config(write_config(tmp_path, controlled_heat_config(bogus=1)))
        assert any(e["path"] == "bogus" for e in err.value.errors)

    def test_unknown_nested_key(self, tmp_path):
        body = controlled_heat_config()
        body["series"]["stray"] = 2
        with pytest.raises(ConfigError) as err:
            load_config(write_config(tmp_path, body))
        assert any("stray" in e["path"] for e in err.value.errors)

    def test_schema_version_checked(self, tmp_path):
        with pytest.raises(ConfigError) as err:
            load_config(write_config(tmp_path, controlled_heat_config(schema=99)))
        assert any(e["path"] == "schema" for e in err.value.errors)

    def test_bad_expression_reported_with_path(self, tmp_path):
        body = controlled_heat_config()
        body["controlled_heat"]["initial"] = "tan(x)"
        with pytest.raises(ConfigError) as err:
            load_config(write_config(tmp_path, body))
        assert any("initial" in e["path"] for e in err.value.errors)

    def test_spacing_xor_extent(self, tmp_path):
        body = controlled_heat_config()
        body["grid"]["spacing"] = [0.1]
        with pytest.raises(ConfigError) as err:
            load_config(write_config(tmp_path, body))
        assert any("spacing or extent" in e["message"] for e in err.value.errors)

    def test_missing_kind_section(self, tmp_path):
        body = controlled_heat_config()
        del body["controlled_heat"]
        with pytest.raises(ConfigError):
            load_config(write_config(tmp_path, body))


class TestSolveCommand:
    def test_controlled_heat_artifacts(self, tmp_path, capsys):
        path = write_config(tmp_path, controlled_heat_config())
        rc = main(["solve", path, "-o", str(tmp_path / "out")])
        assert rc == 0
        names = {p.name for p in (tmp_path / "out").iterdir()}
        assert {"G.json", "G_0000.csf", "G_0001.csf", "ceiling.jsonl",
                "termwise.jsonl", "manifest.json"} <= names
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["exit_status"] == 0
        assert not manifest["not_converged"]

    def test_zero_velocity_nse(self, tmp_path):
        body = {
            "schema": 1,
            "kind": "nse",
            "grid": {"points": [64], "extent": [6.283185307179586], "origin": [0.0]},
            "series": {"time_steps": 8, "output_times": [0.25, 0.5]},
            "nse": {"velocity": ["0"], "anchor": [0.0], "anchor_value": 0.0,
                    "speed_bound": 1.0, "horizon": 0.5},
        }
        path = write_config(tmp_path, body)
        rc = main(["solve", path, "-o", str(tmp_path / "out")])
        assert rc == 0
        u = read_trajectory(tmp_path / "out", "u")
        assert max(np.max(np.abs(s.components[0])) for _, s in u) < 1e-12

    def test_invalid_config_exits_2_with_payload(self, tmp_path, capsys):
        path = write_config(tmp_path, controlled_heat_config(bogus=True))
        rc = main(["solve", path])
        captured = capsys.readouterr()
        assert rc == 2
        payload = json.loads(captured.err)
        assert payload["errors"][0]["path"] == "bogus"

    def test_rotational_velocity_exits_2_with_residual(self, tmp_path, capsys):
        body = {
            "schema": 1,
            "kind": "nse",
            "grid": {"points": [48, 48], "extent": [6.283185307179586] * 2,
                     "origin": [0.0, 0.0]},
            "nse": {"velocity": ["-sin(y)", "sin(x)"], "anchor": [0.0, 0.0],
                    "anchor_value": 0.0, "speed_bound": 2.0, "horizon": 0.25},
        }
        path = write_config(tmp_path, body)
        rc = main(["solve", path, "-o", str(tmp_path / "out")])
        captured = capsys.readouterr()
        assert rc == 2
        payload = json.loads(captured.err)
        assert payload["errors"][0]["curl_residual"] > 1.0

    def test_not_converged_exits_3(self, tmp_path):
        body = controlled_heat_config()
        body["series"]["depth_max"] = 1
        body["controlled_heat"]["forcing"] = "2 + sin(x)"
        path = write_config(tmp_path, body)
        rc = main(["solve", path, "-o", str(tmp_path / "out")])
        assert rc == 3
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["not_converged"]


class TestDeterminism:
    def test_byte_identical_reruns(self, tmp_path):
        body = {
            "schema": 1,
            "kind": "nse",
            "seed": 11,
            "grid": {"points": [128], "extent": [6.283185307179586], "origin": [0.0]},
            "series": {"time_steps": 16, "output_times": [0.25, 0.5]},
            "nse": {"velocity": ["sin(x)/(1+0.5*cos(x))"], "anchor": [0.0],
                    "anchor_value": 0.0, "speed_bound": 2.0, "horizon": 0.5},
        }
        path = write_config(tmp_path, body)
        for run in ("a", "b"):
            assert main(["solve", path, "-o", str(tmp_path / run)]) == 0
        names = sorted(p.name for p in (tmp_path / "a").iterdir() if p.suffix == ".csf")
        assert names
        for name in names:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestVerifyCommand:
    def test_unknown_suite_is_usage_error(self, capsys):
        assert main(["verify", "nonsense"]) == 2

    def test_parabolic_suite_passes(self, capsys):
        rc = main(["verify", "parabolic"])
        out = capsys.readouterr().out
        assert rc == 0
        assert "suite 'parabolic': PASS" in out

    def test_injected_m_underestimate_fails(self):
        result = suite_bounds(trials=4, potentials=0, inject_m_underestimate=True)
        assert not result.passed
        ceiling = [c for c in result.checks if c.label.startswith("ceiling")]
        assert ceiling and not ceiling[0].passed


class TestBenchCommand:
    def test_depth_sweep_matches_tail(self, tmp_path):
        import math

        body = controlled_heat_config()
        body["controlled_heat"]["initial"] = "1"
        body["series"] = {"time_steps": 16, "output_times": [1.0], "rel_tolerance": 1e-14,
                          "depth_max": 20}
        body["bench"] = {"axis": "depth", "values": [1, 2, 4, 8, 12]}
        path = write_config(tmp_path, body)
        out_csv = tmp_path / "bench.csv"
        assert main(["bench", path, "-o", str(out_csv)]) == 0
        rows = out_csv.read_text().strip().split("\n")
        assert rows[0].split(",")[0] == "sweep_axis"
        for row in rows[1:]:
            _, value, _, terms, err = row.split(",")
            d = int(value)
            tail = math.exp(0.5) - sum(0.5**k / math.factorial(k) for k in range(d + 1))
            assert abs(float(err) - tail) <= 0.1 * tail
            assert int(terms) == d + 1

    def test_missing_sweep_is_usage_error(self, tmp_path, capsys):
        path = write_config(tmp_path, controlled_heat_config())
        assert main(["bench", path]) == 2

    def test_grid_sweep_monotone_timing_column_present(self, tmp_path):
        body = controlled_heat_config()
        body["bench"] = {"axis": "grid", "values": [64, 128]}
        path = write_config(tmp_path, body)
        out_csv = tmp_path / "bench.csv"
        assert main(["bench", path, "-o", str(out_csv)]) == 0
        rows = out_csv.read_text().strip().split("\n")[1:]
        times = [float(r.split(",")[2]) for r in rows]
        assert len(times) == 2 and all(t >= 0 for t in times)


class TestInspectCommand:
    def test_prints_header(self, tmp_path, capsys):
        path = write_config(tmp_path, controlled_heat_config())
        main(["solve", path, "-o", str(tmp_path / "out")])
        capsys.readouterr()
        rc = main(["inspect", str(tmp_path / "out" / "G_0000.csf")])
        out = capsys.readouterr().out
        assert rc == 0
        assert "ndim:     1" in out
        assert "periodic" in out

    def test_rejects_non_csf(self, tmp_path, capsys):
        path = tmp_path / "x.bin"
        path.write_bytes(b"garbage")
        assert main(["inspect", str(path)]) == 2


class TestBurgersFixtureEndToEnd:
    def test_solver_artifacts_match_closed_form(self, tmp_path):
        body = {
            "schema": 1,
            "kind": "nse",
            "grid": {"points": [256], "extent": [6.283185307179586], "origin": [0.0]},
            "series": {"depth_max": 16, "rel_tolerance": 1e-12, "time_steps": 32,
                       "output_times": [0.25, 0.5]},
            "nse": {"velocity": ["sin(x)/(1+0.5*cos(x))"], "anchor": [0.0],
                    "anchor_value": 0.0, "speed_bound": 2.0, "horizon": 0.5},
        }
        path = write_config(tmp_path, body)
        assert main(["solve", path, "-o", str(tmp_path / "out")]) == 0
        u = read_trajectory(tmp_path / "out", "u")
        x = u.grid.coords(0)
        for t in (0.25, 0.5):
            got = u.at_time(t).components[0]
            want = np.exp(-t) * np.sin(x) / (1 + 0.5 * np.exp(-t) * np.cos(x))
            assert np.max(np.abs(got - want)) <= 1e-4

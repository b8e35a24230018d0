import json
import subprocess
import sys

import numpy as np
import pytest

from fpfnav.cli import cli_dispatch
from fpfnav.cli_io import (
    BUNDLED,
    bundled_config,
    load_scenario,
    parse_scenario,
    read_design_map,
    read_trajectory,
    run_summary,
    scenario_from_dict,
    scenario_to_dict,
    serialize_scenario,
    trajectory_header,
    write_design_map,
    write_trajectory,
)
from fpfnav.dynamics import Trajectory
from fpfnav.errors import ConfigError
from fpfnav.fpf_core import DesignMapEntry, design_map
from fpfnav.scenario import Metrics, RunResult, assemble


def bundled_doc(name="pentagon"):
    return json.loads(bundled_config(name).read_text())


def tiny_result():
    # one state, two robots
    traj = Trajectory(
        times=np.array([0.0]),
        va_positions=np.array([[0.1, -0.2]]),
        va_velocities=np.zeros((1, 2)),
        positions=np.array([[[1 / 3, 2 / 7], [-np.pi, np.e]]]),
        velocities=np.array([[[1e-300, -0.0], [0.5, 1.5]]]),
        robot_forces=np.array([[[0.1, 0.2], [0.3, 0.4]]]),
        va_forces=np.zeros((1, 2)),
        ids=(4, 9),
        body_radii=np.array([0.016, 0.016]),
    )
    metrics = Metrics(np.zeros(1), np.ones(1), np.full(1, np.nan), traj.robot_forces)
    return RunResult(traj, [], metrics, "converged")


class TestParse:
    @pytest.mark.parametrize("name", BUNDLED)
    def test_round_trip(self, name):
        s = load_scenario(bundled_config(name))
        again = parse_scenario(serialize_scenario(s))
        assert again == s
        assert serialize_scenario(again) == serialize_scenario(s)

    def test_round_trip_keeps_optional_values(self):
        doc = bundled_doc()
        doc["integrator"]["damping_va"] = 1.25
        doc["body_radius"] = 0.02
        doc["goal"]["literal_attraction"] = True
        s = scenario_from_dict(doc)
        assert parse_scenario(serialize_scenario(s)) == s

    def test_unit_gain_names_rule(self):
        doc = bundled_doc()
        doc["fpf"]["k_v"] = 1.0
        with pytest.raises(ConfigError) as err:
            scenario_from_dict(doc)
        assert err.value.kind == "invariant"
        assert err.value.key == "fpf.k_v"
        assert "k_v > 1" in str(err.value)

    def test_unknown_top_level_key(self):
        doc = bundled_doc()
        doc["speling_mistake"] = 3
        with pytest.raises(ConfigError) as err:
            scenario_from_dict(doc)
        assert err.value.kind == "unknown_key"
        assert "speling_mistake" in str(err.value)

    def test_unknown_nested_key(self):
        doc = bundled_doc()
        doc["integrator"]["dtt"] = 0.1
        with pytest.raises(ConfigError) as err:
            scenario_from_dict(doc)
        assert err.value.kind == "unknown_key" and "integrator.dtt" in str(err.value)

    def test_missing_key(self):
        doc = bundled_doc()
        del doc["seeding"]["seed"]
        with pytest.raises(ConfigError) as err:
            scenario_from_dict(doc)
        assert (err.value.kind, err.value.key) == ("missing_key", "seeding.seed")

    def test_syntax_error(self):
        with pytest.raises(ConfigError) as err:
            parse_scenario('{"schema_version": 1,')
        assert err.value.kind == "syntax"

    def test_schema_version(self):
        doc = bundled_doc()
        doc["schema_version"] = 99
        with pytest.raises(ConfigError) as err:
            scenario_from_dict(doc)
        assert err.value.kind == "schema_version"

    @pytest.mark.parametrize(
        "path,value",
        [(("n_robots",), 0), (("integrator", "dt"), -0.1), (("safety", "min_robot_clearance"), 0.0),
         (("goal", "lambda"), 0.0), (("n_robots",), "five"), (("seeding", "low"), [1, 2, 3])],
    )
    def test_invariant_violations(self, path, value):
        doc = bundled_doc()
        target = doc
        for k in path[:-1]:
            target = target[k]
        target[path[-1]] = value
        with pytest.raises(ConfigError) as err:
            scenario_from_dict(doc)
        assert err.value.kind == "invariant"
        assert err.value.key.startswith(path[0])

    def test_polyline_obstacle(self):
        doc = bundled_doc()
        doc["obstacles"] = [{"name": "wall", "polyline": [[0, 2], [1, 2]], "spacing": 0.5, "k_r": 0.5, "sigma_o": 3.0}]
        (obs,) = scenario_from_dict(doc).obstacles
        assert obs.source_points.tolist() == [[0, 2], [0.5, 2], [1, 2]]
        written = scenario_to_dict(scenario_from_dict(doc))["obstacles"][0]
        assert written["points"] == [[0, 2], [0.5, 2], [1, 2]]

    def test_obstacle_needs_one_shape(self):
        doc = bundled_doc()
        doc["obstacles"] = [{"points": [[0, 2]], "polyline": [[0, 2], [1, 2]], "spacing": 0.5, "k_r": 1, "sigma_o": 1}]
        with pytest.raises(ConfigError):
            scenario_from_dict(doc)


class TestTrajectoryCsv:
    def test_column_arithmetic(self, tmp_path):
        out = write_trajectory(tiny_result(), tmp_path / "t.csv")
        lines = out.read_text().splitlines()
        assert len(lines) == 2
        assert all(len(line.split(",")) == 15 for line in lines)
        assert lines[0] == ",".join(trajectory_header((4, 9)))
        assert lines[0].startswith("t,qv_x,qv_y,r4_x,r4_y,r4_vx,r4_vy,r4_Fx,r4_Fy,r9_x")

    def test_bit_exact_reread(self, tmp_path):
        result = tiny_result()
        header, table = read_trajectory(write_trajectory(result, tmp_path / "t.csv"))
        traj = result.trajectory
        assert np.array_equal(table[:, 3:5], traj.positions[:, 0])
        assert np.array_equal(table[:, 9:11], traj.positions[:, 1])
        assert table[0, 5] == 1e-300

    def test_run_rows_and_exactness(self, tmp_path):
        result = assemble(load_scenario(bundled_config("pentagon")))
        header, table = read_trajectory(write_trajectory(result, tmp_path / "p.csv"))
        traj = result.trajectory
        assert table.shape == (len(traj), 3 + 6 * 5)
        assert np.array_equal(table[:, 0], traj.times)
        assert np.array_equal(table[:, 1:3], traj.va_positions)
        for a in range(5):
            assert np.array_equal(table[:, 3 + 6 * a : 5 + 6 * a], traj.positions[:, a])
            assert np.array_equal(table[:, 7 + 6 * a : 9 + 6 * a], traj.robot_forces[:, a])

    def test_unwritable_destination(self, tmp_path):
        with pytest.raises(OSError):
            write_trajectory(tiny_result(), tmp_path / "missing" / "t.csv")

    def test_no_temp_files_left(self, tmp_path):
        write_trajectory(tiny_result(), tmp_path / "t.csv")
        assert [p.name for p in tmp_path.iterdir()] == ["t.csv"]


class TestDesignMapCsv:
    def test_single_entry(self, tmp_path):
        entries = design_map((1.5, 2.0), (2.0, 2.4), 1)
        lines = write_design_map(entries, tmp_path / "m.csv").read_text().splitlines()
        assert lines[0] == "k_v,varsigma,scaled_radius"
        assert len(lines) == 2
        k_v, vs, r = lines[1].split(",")
        assert (float(k_v), float(vs)) == (2.0, 2.4) and abs(float(r) - 0.80) <= 0.02

    def test_missing_cell_is_na(self, tmp_path):
        out = write_design_map([DesignMapEntry(1.1, 1.1, None), DesignMapEntry(2.0, 2.4, 0.8)], tmp_path / "m.csv")
        assert out.read_text().splitlines()[1] == "1.1000000000000001,1.1000000000000001,NA"
        assert read_design_map(out)[0].scaled_radius is None

    def test_full_grid_lines_and_round_trip(self, tmp_path):
        entries = design_map((1.0, 2.5), (1.0, 2.5), 50)
        out = write_design_map(entries, tmp_path / "m.csv")
        assert len(out.read_text().splitlines()) == 2501
        assert read_design_map(out) == entries

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            write_design_map([], tmp_path / "m.csv")


class TestSummary:
    def test_counts_match(self):
        s = load_scenario(bundled_config("pentagon"))
        result = assemble(s)
        summary = run_summary(result, s, "assemble")
        assert summary["collision_event_count"] == len(result.collision_events)
        assert summary["steps"] == result.steps
        assert summary["termination"] == "converged"
        assert summary["final_metrics"]["formation_ok"] is True
        assert summary["parameters"]["fpf"] == {"k_v": 2.0, "sigma1": 1.0, "sigma2": 2.4}
        json.dumps(summary)


def run_cli(*args):
    return cli_dispatch([str(a) for a in args])


class TestCli:
    @pytest.mark.parametrize("name", BUNDLED)
    def test_check_bundled(self, name):
        assert run_cli("check", "--config", bundled_config(name)) == 0

    def test_check_bad_gain(self, tmp_path, capsys):
        doc = bundled_doc()
        doc["fpf"]["k_v"] = 0.5
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps(doc))
        assert run_cli("check", "--config", cfg) == 1
        assert "k_v > 1" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert run_cli("check", "--config", tmp_path / "nope.json") == 1

    @pytest.mark.parametrize("argv", [["frobnicate"], [], ["check"], ["design-map", "--grid", "x", "--out", "m.csv"]])
    def test_usage_errors(self, argv, capsys):
        assert cli_dispatch(argv) == 1
        assert "usage" in capsys.readouterr().err

    def test_design_map(self, tmp_path):
        out = tmp_path / "map.csv"
        assert run_cli("design-map", "--grid", 5, "--out", out) == 0
        assert len(out.read_text().splitlines()) == 26

    def test_design_map_bad_range(self, tmp_path):
        assert run_cli("design-map", "--kv-min", 2, "--kv-max", 1, "--out", tmp_path / "m.csv") == 1

    def test_assemble_outputs(self, tmp_path):
        traj, summ = tmp_path / "a.csv", tmp_path / "a.json"
        assert run_cli("assemble", "--config", bundled_config("pentagon"), "--out-traj", traj, "--out-summary", summ) == 0
        summary = json.loads(summ.read_text())
        assert summary["termination"] == "converged"
        assert len(traj.read_text().splitlines()) == summary["steps"] + 2

    def test_non_convergence_exit_code(self, tmp_path):
        doc = bundled_doc()
        doc["integrator"]["max_steps"] = 5
        cfg = tmp_path / "short.json"
        cfg.write_text(json.dumps(doc))
        code = run_cli("assemble", "--config", cfg, "--out-traj", tmp_path / "a.csv", "--out-summary", tmp_path / "a.json")
        assert code == 2
        assert json.loads((tmp_path / "a.json").read_text())["termination"] == "max_steps"

    def test_byte_identical_outputs(self, tmp_path):
        cfg = bundled_config("decagon")
        for tag in ("a", "b"):
            run_cli("assemble", "--config", cfg, "--out-traj", tmp_path / f"{tag}.csv", "--out-summary", tmp_path / f"{tag}.json")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_navigate_narrow_passage(self, tmp_path):
        traj, summ = tmp_path / "n.csv", tmp_path / "n.json"
        assert run_cli("navigate", "--config", bundled_config("narrow_passage"), "--out-traj", traj, "--out-summary", summ) == 0
        summary = json.loads(summ.read_text())
        assert summary["termination"] == "goal_reached"
        assert summary["collision_event_count"] == 0
        assert "qualitative" in summary["parameters"]["notes"]
        assert summary["passage"]["steps_near_obstacles"] > 0

    def test_module_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "fpfnav", "check", "--config", str(bundled_config("pentagon"))],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0 and proc.stdout.startswith("ok:")

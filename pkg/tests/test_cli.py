import csv
import json

import pytest

from conftest import open_box, svc
from piperoute.cli import main
from piperoute.geometry import Cuboid
from piperoute.instances import data_path, load_solution, save_scenario, save_solution
from piperoute.solution import Solution


def _drop_time(text):
    rows = list(csv.reader(text.splitlines()))
    keep = [i for i, h in enumerate(rows[0]) if not h.startswith("Time_")]
    return [[r[i] for i in keep] for r in rows]


@pytest.fixture
def scenario_file(tmp_path):
    p = tmp_path / "sc.json"
    assert main(["generate", "--d", "9", "--s", "3", "--o", "3", "--seed", "2", "--out", str(p)]) == 0
    return p


@pytest.mark.parametrize("method", ["exact", "h1", "h2"])
def test_solve_validate_export(tmp_path, scenario_file, method):
    out = tmp_path / f"{method}.json"
    assert main(["solve", str(scenario_file), "--method", method, "--time-limit", "30", "--out", str(out)]) == 0
    sol = load_solution(out)
    assert sol.meta["method"] == method
    assert (tmp_path / f"{method}.log").exists()
    assert main(["validate", str(scenario_file), str(out)]) == 0
    obj = tmp_path / "r.obj"
    assert main(["export", str(scenario_file), str(out), "--tubes", "--out", str(obj)]) == 0
    assert "o service_0_tube" in obj.read_text()


def test_solve_reads_config_block(tmp_path, capsys):
    out = tmp_path / "ex1.json"
    # the packaged example has no method in its config, so give one
    assert main(["solve", str(data_path("example1.json")), "--method", "h2", "--out", str(out)]) == 0
    assert "all checks passed" in capsys.readouterr().out


def test_missing_method_is_usage_error(tmp_path, scenario_file):
    assert main(["solve", str(scenario_file), "--out", str(tmp_path / "x.json")]) == 1


def test_bad_input_files(tmp_path):
    assert main(["solve", str(tmp_path / "nope.json"), "--method", "h2"]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema_version": 1}))
    assert main(["solve", str(bad), "--method", "h2"]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["--help"]) == 0


def test_walled_off_terminal_exits_2(tmp_path):
    wall = Cuboid((1.4, 0, 0), (1.6, 2, 2))
    sc = open_box((4, 3, 3), [svc(0, (0, 1, 1), (3, 1, 1))], [wall])
    p = tmp_path / "walled.json"
    save_scenario(sc, p)
    for method in ("exact", "h1", "h2"):
        assert main(["solve", str(p), "--method", method, "--out", str(tmp_path / "o.json")]) == 2


def test_validate_rejects_broken_solution(tmp_path, scenario_file):
    out = tmp_path / "s.json"
    assert main(["solve", str(scenario_file), "--method", "h2", "--out", str(out)]) == 0
    sol = load_solution(out)
    k = sorted(sol.arcs)[0]
    broken = Solution({kk: (v[1:] if kk == k else v) for kk, v in sol.arcs.items()}, objective=sol.objective)
    save_solution(broken, tmp_path / "b.json")
    assert main(["validate", str(scenario_file), str(tmp_path / "b.json")]) == 1


def test_benchmark_deterministic(tmp_path):
    args = ["benchmark", "--d", "9", "--s", "2,3", "--o", "0,3", "--g", "2", "--seed", "5",
            "--methods", "exact,h1,h2", "--node-limit", "3000", "--threads", "1"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert _drop_time(a.read_text()) == _drop_time(b.read_text())
    assert len(_drop_time(a.read_text())) == 1 + 4 + 1


def test_benchmark_zero_instances(tmp_path, capsys):
    out = tmp_path / "z.csv"
    assert main(["benchmark", "--d", "9", "--s", "2", "--o", "0", "--g", "", "--methods", "h2", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 1 and lines[0].startswith("d,s,o,Vars")
    assert "0 instances" in capsys.readouterr().out

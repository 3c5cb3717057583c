import json

import pytest

from bendolp.cli import main, parse_overrides


def write_scene(tmp_path, doc, name="scene.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc), encoding="utf-8")
    return str(p)


def test_compile_example(tmp_path, example_path, capsys):
    assert main(["compile", "--scene", example_path, "--out", str(tmp_path)]) == 0
    text = (tmp_path / "BENDCELL.JBI").read_text()
    assert text.startswith("/JOB\n//NAME BENDCELL\n")


def test_compile_name_and_speed_override(tmp_path, example_path):
    code = main(
        ["compile", "--scene", example_path, "--out", str(tmp_path), "--name", "CELL2", "--override", "move_speed=169"]
    )
    assert code == 0
    movl = [l for l in (tmp_path / "CELL2.JBI").read_text().splitlines() if l.startswith("MOVL")]
    assert movl and all(l.endswith("V=169.00") for l in movl)


def test_unmappable_pose_exit_2(tmp_path, doc, capsys):
    doc["tools"][4]["pose"]["position"][2] = 1300.0  # step_4A between window and first ladder line
    scene = write_scene(tmp_path, doc)
    assert main(["compile", "--scene", scene, "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "UnmappablePose" in err and "step_4A" in err


def test_check_ok(example_path, capsys):
    assert main(["check", "--scene", example_path]) == 0
    assert capsys.readouterr().out.startswith("OK")


def test_check_missing_pickup(tmp_path, doc):
    doc["tools"] = doc["tools"][1:]
    assert main(["check", "--scene", write_scene(tmp_path, doc)]) == 2


def test_check_missing_regrasp_warns(tmp_path, doc, capsys):
    doc["tools"] = [t for t in doc["tools"] if t["name"] != "step_5B"]
    assert main(["check", "--scene", write_scene(tmp_path, doc)]) == 0
    out = capsys.readouterr()
    assert "OK" in out.out and "MissingRegrasp" in out.err and "step_5A" in out.err
    assert list(tmp_path.iterdir()) == [tmp_path / "scene.json"]


def test_missing_file_exit_1(tmp_path):
    assert main(["check", "--scene", str(tmp_path / "nope.json")]) == 1


def test_bad_override_exit_2(example_path, tmp_path):
    assert main(["compile", "--scene", example_path, "--out", str(tmp_path), "--override", "bogus=1"]) == 2
    assert main(["compile", "--scene", example_path, "--out", str(tmp_path), "--override", "move_speed=-1"]) == 2
    assert main(["compile", "--scene", example_path, "--out", str(tmp_path), "--override", "move_speed"]) == 2


def test_parse_overrides():
    params, plant, name = parse_overrides(["approach_offset=0,0,80", "pinch_delay=inf", "piece_count=2", "name=X"])
    assert params == {"approach_offset": (0.0, 0.0, 80.0), "piece_count": 2}
    assert plant == {"pinch_delay": float("inf")} and name == "X"


def test_simulate_clean(tmp_path, example_path, capsys):
    assert main(["simulate", "--scene", example_path, "--out", str(tmp_path)]) == 0
    assert "0 collisions, 0 unreachable" in capsys.readouterr().out
    for f in ("trace.jsonl", "report.txt", "sim.json", "path_xy.svg", "path_xz.svg"):
        assert (tmp_path / f).exists()


def test_simulate_collision_exit_4(tmp_path, doc, capsys):
    # a box around the pre-press waypoint
    doc["collision_world"].append({"id": "intruder", "min": [-50, 550, 1050], "max": [50, 650, 1150]})
    assert main(["simulate", "--scene", write_scene(tmp_path, doc), "--out", str(tmp_path)]) == 4
    out = capsys.readouterr().out
    assert "collision with intruder" in out
    sim = json.loads((tmp_path / "sim.json").read_text())
    assert [c["box_id"] for c in sim["collisions"]] == ["intruder"]


def test_simulate_dead_plant_exit_4(tmp_path, example_path, capsys):
    code = main(
        [
            "simulate",
            "--scene",
            example_path,
            "--out",
            str(tmp_path),
            "--override",
            "pinch_delay=inf",
            "--max-steps",
            "400",
        ]
    )
    assert code == 4
    assert "StepBudgetExceeded" in capsys.readouterr().out
    last = (tmp_path / "trace.jsonl").read_text().splitlines()[-1]
    assert json.loads(last)["error"].startswith("StepBudgetExceeded")


def test_simulate_from_job_file(tmp_path, example_path):
    assert main(["compile", "--scene", example_path, "--out", str(tmp_path)]) == 0
    job = str(tmp_path / "BENDCELL.JBI")
    out = tmp_path / "sim"
    assert main(["simulate", "--scene", example_path, "--job", job, "--out", str(out)]) == 0


def test_bad_job_file_exit_2(tmp_path, example_path):
    job = tmp_path / "bad.JBI"
    job.write_text("/JOB\n//NAME X\n//POS\n///NPOS 0,0,0,0,0,0\n//INST\nMOVL P0001 V=1\nEND\n")
    assert main(["simulate", "--scene", example_path, "--job", str(job), "--out", str(tmp_path)]) == 2


def test_plot(tmp_path, example_path, capsys):
    assert main(["plot", "--scene", example_path, "--out", str(tmp_path)]) == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == ["path_xy.svg", "path_xz.svg"]


def test_bad_dt(tmp_path, example_path):
    assert main(["simulate", "--scene", example_path, "--out", str(tmp_path), "--dt", "0"]) == 2


def test_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2

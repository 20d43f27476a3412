from __future__ import annotations

import io
import json

import pytest

from expmem.cli import main

APPLE = "stm/apple_plate_container"


def run(*argv, prompt=None):
    out = io.StringIO()
    code = main(list(argv), out=out, prompt=prompt or (lambda s: ""))
    return code, out.getvalue()


def test_run_reflective_succeeds(tmp_path):
    code, text = run("run", "--scenario", APPLE, "--backend", "scripted-reflective", "--out", str(tmp_path))
    assert code == 0
    assert text.strip().endswith("Task completed after 4 steps and 2 attempt(s).")
    log = [json.loads(x) for x in (tmp_path / "episode.jsonl").read_text().splitlines()]
    assert [r["type"] for r in log].count("step") == 4
    assert (tmp_path / "transcript.txt").read_text() == text


def test_run_naive_fails():
    code, _ = run("run", "--scenario", APPLE, "--backend", "scripted-naive", "--memory", "none")
    assert code == 1


def test_run_missing_scenario():
    assert run("run", "--scenario", "stm/no_such_thing")[0] == 2


def test_run_ltm_needs_store():
    assert run("run", "--scenario", APPLE, "--memory", "stm+ltm")[0] == 2


def test_bad_flag_is_usage_error():
    assert run("run", "--scenario", APPLE, "--memory", "lots")[0] == 2


def test_interactive_note(tmp_path):
    notes = iter(["The container is occluding the apple.", "", "", ""])
    code, text = run("run", "--scenario", APPLE, "--interactive", prompt=lambda s: next(notes))
    assert code == 0
    assert "step 0: pick(apple) -> grasp_blocked" in text
    assert "Observation from human: The container is occluding the apple." in text


def test_write_back_persists(tmp_path):
    store = tmp_path / "store.jsonl"
    code, _ = run(
        "run", "--scenario", APPLE, "--memory", "stm+ltm", "--store", str(store),
        "--write-back", "--retrieval", "none",
    )
    assert code == 0
    code, text = run("memory", "--store", str(store), "ls")
    assert code == 0 and text.count("\n") == 1
    assert text.startswith("0\tPut the apple on the plate.")


def test_suite_command(tmp_path):
    code, text = run("suite", "--suite", "stm", "--out", str(tmp_path))
    assert code == 0
    assert "naive: 0/4 = 0.000" in text and "reflective: 4/4 = 1.000" in text
    rows = (tmp_path / "stm.jsonl").read_text().splitlines()
    assert len(rows) == 8
    assert (tmp_path / "stm.txt").read_text().splitlines()[-1].startswith("total")


def test_suite_missing_store_is_usage_error(tmp_path):
    assert run("suite", "--suite", "ltm", "--store", str(tmp_path / "nope.jsonl"))[0] == 2


def test_memory_fillers_show_export(tmp_path):
    store = tmp_path / "m.jsonl"
    code, text = run("memory", "--store", str(store), "seed-fillers", "96")
    assert code == 0 and "store now holds 96" in text
    code, text = run("memory", "--store", str(store), "ls")
    assert len(text.splitlines()) == 96
    code, text = run("memory", "--store", str(store), "show", "5")
    assert code == 0 and json.loads(text)["id"] == 5
    assert run("memory", "--store", str(store), "show", "500")[0] == 2
    copy = tmp_path / "copy.jsonl"
    assert run("memory", "--store", str(store), "export", str(copy))[0] == 0
    assert copy.read_bytes() == store.read_bytes()


def test_corrupt_store_is_usage_error(tmp_path):
    store = tmp_path / "bad.jsonl"
    store.write_text("{not json\n")
    assert run("memory", "--store", str(store), "ls")[0] == 2


@pytest.fixture
def logged(tmp_path):
    out = tmp_path / "ep"
    assert run("run", "--scenario", "stm/bowl_apple_inside", "--out", str(out))[0] == 0
    return out / "episode.jsonl"


def test_replay_matches(logged):
    code, text = run("replay", str(logged))
    assert code == 0
    assert text.strip().endswith("replay matches the log")


def test_replay_detects_edited_action(logged):
    lines = logged.read_text().splitlines()
    recs = [json.loads(x) for x in lines]
    step = next(i for i, r in enumerate(recs) if r["type"] == "step" and r["action"]["skill"] == "pick" and r["step"] == 1)
    recs[step]["action"]["target_object"] = "bowl"
    logged.write_text("".join(json.dumps(r) + "\n" for r in recs))
    code, text = run("replay", str(logged))
    assert code == 4
    assert "step 1 diverged" in text


def test_replay_wrong_scenario(logged):
    assert run("replay", str(logged), "--scenario", APPLE)[0] == 2


def test_replay_not_a_log(tmp_path):
    p = tmp_path / "x.jsonl"
    p.write_text('{"type": "step"}\n')
    assert run("replay", str(p))[0] == 2

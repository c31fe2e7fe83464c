import json

import numpy as np
import pytest

from graphpit import io
from graphpit.cli import main


@pytest.fixture(scope="session")
def meeting_dir(tmp_path_factory, meeting):
    path = tmp_path_factory.mktemp("cli") / "meeting_0000"
    io.write_meeting(meeting, path)
    return str(path)


def run(capsys, *argv):
    assert main(list(argv)) == 0
    return capsys.readouterr().out


def fail(capsys, *argv):
    with pytest.raises(SystemExit) as info:
        main(list(argv))
    return info.value.code, json.loads(capsys.readouterr().err)


def test_colorings_edgeless(tmp_path, capsys):
    doc = {"schema_version": 1, "sample_rate": 8000, "num_samples": 100, "utterances": [
        {"id": i, "speaker": i, "start_sample": 30 * i, "end_sample": 30 * i + 20} for i in range(3)]}
    path = tmp_path / "a.json"
    path.write_text(json.dumps(doc))
    lines = run(capsys, "colorings", "--annotation", str(path), "--channels", "2").splitlines()
    assert len(lines) == 8
    assert json.loads(lines[0]) == [1, 1, 1] and json.loads(lines[-1]) == [2, 2, 2]
    counted = json.loads(run(capsys, "colorings", "--annotation", str(path), "--count-only"))
    assert counted == {"num_colorings": 8}
    limited = run(capsys, "colorings", "--annotation", str(path), "--limit", "3").splitlines()
    assert len(limited) == 3


def test_stitch_eval_matches_no_stitch(tmp_path, capsys, meeting_dir):
    for name, extra in (("a", []), ("b", ["--no-stitch"])):
        run(capsys, "stitch-eval", "--meeting", meeting_dir, "--plan", "1,2,1",
            "--separator", "oracle:4", "--report", str(tmp_path / f"{name}.json"), *extra)
    a = json.loads((tmp_path / "a.json").read_text())
    b = json.loads((tmp_path / "b.json").read_text())
    assert a["config"]["min_alignment_gap"] > 0
    assert abs(a["mean_sdri"] - b["mean_sdri"]) < 1e-6
    assert a["config"]["overhead"] == pytest.approx(1.0, abs=0.05)


def test_stitch_eval_deterministic(tmp_path, capsys, meeting_dir):
    for name in ("a", "b"):
        run(capsys, "stitch-eval", "--meeting", meeting_dir, "--separator", "oracle:1:20",
            "--seed", "3", "--report", str(tmp_path / f"{name}.json"),
            "--streams-out", str(tmp_path / f"{name}_streams"))
    a = json.loads((tmp_path / "a.json").read_text())
    b = json.loads((tmp_path / "b.json").read_text())
    a.pop("created"), b.pop("created")
    assert a == b
    assert a["mean_sdr_plain"] == pytest.approx(20.0, abs=0.5)
    assert io.read_streams(tmp_path / "a_streams")[0].shape[0] == 2


def test_usage_error_exit_code(capsys, meeting_dir):
    code, err = fail(capsys, "stitch-eval", "--meeting", meeting_dir, "--plan", "1,2",
                     "--report", "x.json")
    assert code == 2 and err["error"] == "UsageError"
    code, err = fail(capsys, "colorings")
    assert code == 2 and "annotation" in err["message"]
    code, _ = fail(capsys, "separate", "--meeting", meeting_dir, "--separator", "magic", "--out", "x")
    assert code == 2


def test_contract_error_exit_code(tmp_path, capsys, meeting_dir):
    code, err = fail(capsys, "stitch-eval", "--meeting", meeting_dir, "--channels", "1",
                     "--report", str(tmp_path / "r.json"))
    assert code == 3 and err["error"] == "InfeasibleError"
    code, err = fail(capsys, "segment-stats", "--meeting", str(tmp_path / "nowhere"))
    assert code == 3 and err["exit_code"] == 3


def test_segment_stats_trend(capsys, meeting_dir):
    doc = json.loads(run(capsys, "segment-stats", "--meeting", meeting_dir,
                         "--segment-lengths", "2.4,16"))
    short, long = doc["segments"]
    assert short["fraction_violating_constraint"] < long["fraction_violating_constraint"]
    assert short["shift"] == 2.4


def test_simulate(tmp_path, capsys):
    config = tmp_path / "c.json"
    config.write_text(json.dumps({"target_length": 20.0, "num_speakers_range": [2, 3]}))
    doc = json.loads(run(capsys, "simulate", "--config", str(config), "--out", str(tmp_path / "o"),
                         "--count", "2", "--seed", "5"))
    assert [m["directory"].rsplit("/", 1)[-1] for m in doc["meetings"]] == ["meeting_0000", "meeting_0001"]
    first = io.read_meeting(doc["meetings"][0]["directory"])
    assert first.config.rng_seed == doc["meetings"][0]["seed"]
    assert 18 <= first.num_samples / first.sample_rate <= 22


def test_separate_and_loss(tmp_path, capsys, meeting_dir):
    doc = json.loads(run(capsys, "separate", "--meeting", meeting_dir, "--plan", "0,30,0",
                         "--out", str(tmp_path / "seg")))
    outputs, plan = io.read_segment_outputs(tmp_path / "seg")
    assert len(outputs) == doc["num_segments"] and plan.current == 30

    meeting = io.read_meeting(meeting_dir)
    run(capsys, "stitch-eval", "--meeting", meeting_dir, "--no-stitch",
        "--report", str(tmp_path / "r.json"), "--streams-out", str(tmp_path / "est"))
    loss = json.loads(run(capsys, "loss", "--meeting", meeting_dir, "--estimates",
                          str(tmp_path / "est"), "--start", "0", "--end", "8"))
    assert loss["objective"] == "graph-pit"
    assert loss["loss"] < -19
    assert loss["segment"] == [0, 8 * meeting.sample_rate]
    speakers = {u.speaker for u in meeting.intervals if u.start < 8 * meeting.sample_rate}
    if len(speakers) <= 2:
        upit = json.loads(run(capsys, "loss", "--meeting", meeting_dir, "--estimates",
                              str(tmp_path / "est"), "--start", "0", "--end", "8",
                              "--objective", "upit"))
        assert upit["loss"] >= loss["loss"] - 1e-9


def test_loss_length_mismatch(tmp_path, capsys, meeting_dir):
    io.write_streams(tmp_path / "est", np.zeros((2, 100)), 8000)
    code, err = fail(capsys, "loss", "--meeting", meeting_dir, "--estimates", str(tmp_path / "est"))
    assert code == 3

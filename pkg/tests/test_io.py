import json
import os
import struct

import numpy as np
import pytest
from scipy.io import wavfile

from graphpit import io
from graphpit.css import SegmentPlan, oracle_separator, separate_segments
from graphpit.errors import FormatError


def test_wav_roundtrip_and_scipy_agrees(tmp_path, rng):
    x = rng.standard_normal(1001) * 0.3
    path = tmp_path / "x.wav"
    io.write_wav(path, x, 16000)
    back = io.read_wav(path)
    assert back.sample_rate == 16000
    np.testing.assert_array_equal(back.samples, x.astype(np.float32).astype(np.float64))
    rate, data = wavfile.read(path)
    assert rate == 16000 and data.dtype == np.float32
    np.testing.assert_array_equal(data, x.astype(np.float32))


def test_reads_scipy_written_file(tmp_path, rng):
    x = rng.standard_normal(500).astype(np.float32)
    path = tmp_path / "s.wav"
    wavfile.write(path, 8000, x)
    np.testing.assert_array_equal(io.read_wav(path).samples, x)


def test_wav_rejects_multichannel(tmp_path):
    with pytest.raises(FormatError):
        io.write_wav(tmp_path / "x.wav", np.zeros((2, 10)), 8000)


def test_wav_not_riff(tmp_path):
    path = tmp_path / "bad.wav"
    path.write_bytes(b"hello world, not audio")
    with pytest.raises(FormatError, match="offset 0"):
        io.read_wav(path)


def test_wav_truncated(tmp_path):
    path = tmp_path / "t.wav"
    io.write_wav(path, np.ones(100), 8000)
    path.write_bytes(path.read_bytes()[:-10])
    with pytest.raises(FormatError, match="truncated"):
        io.read_wav(path)


def test_wav_pcm16_rejected(tmp_path):
    path = tmp_path / "p.wav"
    wavfile.write(path, 8000, np.zeros(10, dtype=np.int16))
    with pytest.raises(FormatError, match="32-bit IEEE float"):
        io.read_wav(path)


def test_wav_missing_data(tmp_path):
    fmt = struct.pack("<HHIIHH", 3, 1, 8000, 32000, 4, 32)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    path = tmp_path / "n.wav"
    path.write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)
    with pytest.raises(FormatError, match="no data chunk"):
        io.read_wav(path)


def test_meeting_roundtrip(tmp_path, short_meeting):
    io.write_meeting(short_meeting, tmp_path / "m")
    back = io.read_meeting(tmp_path / "m")
    assert back.intervals == short_meeting.intervals
    assert back.speaker_gains_db == short_meeting.speaker_gains_db
    assert back.noise_snr_db == short_meeting.noise_snr_db
    assert back.config == short_meeting.config
    assert back.sample_rate == short_meeting.sample_rate
    assert [u.synth_seed for u in back.utterances] == [u.synth_seed for u in short_meeting.utterances]
    pairs = [(back.mixture.samples, short_meeting.mixture.samples), (back.noise, short_meeting.noise)]
    pairs += [(a.samples, b.samples) for a, b in zip(back.utterances, short_meeting.utterances)]
    for got, want in pairs:
        assert np.all(np.abs(got - want) <= 2.0 ** -20 * np.maximum(np.abs(want), 1e-30) + 1e-45)


def test_missing_utterance_file(tmp_path, short_meeting):
    io.write_meeting(short_meeting, tmp_path / "m")
    os.remove(tmp_path / "m" / "utterances" / "utt_0001.wav")
    with pytest.raises(FormatError, match="utterance 1 refers to missing file"):
        io.read_meeting(tmp_path / "m")


def test_no_annotation(tmp_path):
    with pytest.raises(FormatError, match="no meeting.json"):
        io.read_meeting(tmp_path)


def _annotation(utterances):
    return {"schema_version": 1, "sample_rate": 8000, "num_samples": 1000, "utterances": utterances}


def test_annotation_start_after_end():
    doc = _annotation([{"id": 4, "speaker": 0, "start_sample": 50, "end_sample": 50}])
    with pytest.raises(FormatError, match="utterance 4"):
        io.parse_annotation(doc)


@pytest.mark.parametrize("doc,message", [
    ({"schema_version": 2}, "schema_version"),
    (_annotation([{"id": 0, "speaker": 0, "start_sample": 0}]), "end_sample"),
    (_annotation([{"id": 0, "speaker": 0, "start_sample": 0, "end_sample": 2000}]), "outside"),
    (_annotation([{"id": 0, "speaker": 0, "start_sample": 0, "end_sample": 10},
                  {"id": 0, "speaker": 1, "start_sample": 0, "end_sample": 10}]), "duplicate"),
])
def test_annotation_errors(doc, message):
    with pytest.raises(FormatError, match=message):
        io.parse_annotation(doc)


def test_bad_json_reports_line(tmp_path):
    path = tmp_path / "x.json"
    path.write_text('{\n  "a": 1,\n  oops\n}')
    with pytest.raises(FormatError, match="line 3"):
        io.load_json(path)


def test_find_meetings(tmp_path, short_meeting):
    for name in ("b", "a"):
        io.write_meeting(short_meeting, tmp_path / name)
    assert io.find_meetings(str(tmp_path)) == [str(tmp_path / "a"), str(tmp_path / "b")]
    assert io.find_meetings(str(tmp_path / "a")) == [str(tmp_path / "a")]
    with pytest.raises(FormatError):
        io.find_meetings(str(tmp_path / "a" / "utterances"))


def test_streams_roundtrip(tmp_path, rng):
    streams = rng.standard_normal((3, 200))
    io.write_streams(tmp_path, streams, 8000)
    back, rate = io.read_streams(tmp_path)
    assert rate == 8000
    np.testing.assert_array_equal(back, streams.astype(np.float32))


def test_segment_outputs_roundtrip(tmp_path, short_meeting):
    plan = SegmentPlan(1, 2, 1, short_meeting.sample_rate)
    outputs = separate_segments(short_meeting.mixture, plan, oracle_separator(short_meeting, 2))
    io.write_segment_outputs(tmp_path, outputs, plan, {"note": "x"})
    back, back_plan = io.read_segment_outputs(tmp_path)
    assert back_plan == plan
    assert json.loads((tmp_path / "segments.json").read_text())["config"] == {"note": "x"}
    for a, b in zip(outputs, back):
        assert (a.index, a.start, a.left_pad, a.right_pad) == (b.index, b.start, b.left_pad, b.right_pad)
        np.testing.assert_array_equal(b.streams, a.streams.astype(np.float32))

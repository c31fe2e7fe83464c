"""On-disk formats: 32-bit float WAV, meeting annotations and segment outputs.

A meeting directory holds::

    meeting.json            annotation (schema_version 1)
    mixture.wav             the mixture
    noise.wav               the additive noise
    utterances/utt_0000.wav gain-scaled utterance samples over [start, end)
"""
import json
import os
import struct

import numpy as np

from .audio import Waveform
from .css import SegmentOutput, SegmentPlan
from .errors import FormatError
from .meeting_sim import Meeting, MeetingConfig, MeetingUtterance
from .overlap_graph import UtteranceInterval

SCHEMA_VERSION = 1
WAVE_FORMAT_IEEE_FLOAT = 3
WAVE_FORMAT_EXTENSIBLE = 0xFFFE


def write_wav(path, samples, sample_rate):
    """Write mono little-endian IEEE float32 PCM."""
    data = np.asarray(samples, dtype="<f4")
    if data.ndim != 1:
        raise FormatError(f"{path}: only mono audio is supported, got shape {data.shape}")
    payload = data.tobytes()
    fmt = struct.pack("<HHIIHH", WAVE_FORMAT_IEEE_FLOAT, 1, int(sample_rate),
                      int(sample_rate) * 4, 4, 32)
    # Non-PCM formats carry a 'fact' chunk with the frame count.
    fact = struct.pack("<I", len(data))
    body = (b"WAVE"
            + b"fmt " + struct.pack("<I", len(fmt)) + fmt
            + b"fact" + struct.pack("<I", len(fact)) + fact
            + b"data" + struct.pack("<I", len(payload)) + payload)
    with open(path, "wb") as f:
        f.write(b"RIFF" + struct.pack("<I", len(body)) + body)


def read_wav(path):
    """Read a mono float32 WAV written by :func:`write_wav` (or any compliant writer).

    Returns a float64 :class:`Waveform`.
    """
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise FormatError(f"{path}: offset 0: not a RIFF/WAVE file")
    offset = 12
    fmt = None
    data = None
    while offset + 8 <= len(raw):
        chunk_id = raw[offset:offset + 4]
        (size,) = struct.unpack_from("<I", raw, offset + 4)
        start = offset + 8
        if start + size > len(raw):
            raise FormatError(
                f"{path}: offset {offset}: chunk {chunk_id!r} of {size} bytes is truncated")
        if chunk_id == b"fmt ":
            if size < 16:
                raise FormatError(f"{path}: offset {offset}: fmt chunk too short ({size} bytes)")
            fmt = struct.unpack_from("<HHIIHH", raw, start)
            fmt_offset = offset
        elif chunk_id == b"data":
            data = raw[start:start + size]
            data_offset = offset
        offset = start + size + (size & 1)
    if fmt is None:
        raise FormatError(f"{path}: no fmt chunk")
    if data is None:
        raise FormatError(f"{path}: no data chunk")
    tag, channels, rate, _, block_align, bits = fmt
    if tag == WAVE_FORMAT_EXTENSIBLE and len(raw) >= fmt_offset + 8 + 26:
        (tag,) = struct.unpack_from("<H", raw, fmt_offset + 8 + 24)
    if tag != WAVE_FORMAT_IEEE_FLOAT or bits != 32:
        raise FormatError(
            f"{path}: offset {fmt_offset}: expected 32-bit IEEE float, got format {tag}/{bits} bit")
    if channels != 1 or block_align != 4:
        raise FormatError(f"{path}: offset {fmt_offset}: expected mono, got {channels} channels")
    if len(data) % 4:
        raise FormatError(
            f"{path}: offset {data_offset}: data size {len(data)} is not a multiple of 4")
    samples = np.frombuffer(data, dtype="<f4").astype(np.float64)
    if not np.all(np.isfinite(samples)):
        raise FormatError(f"{path}: offset {data_offset}: non-finite samples")
    return Waveform(samples, rate)


def _dump_json(path, document):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(document, f, indent=2, sort_keys=False)
        f.write("\n")


def load_json(path):
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from None


def meeting_annotation(meeting):
    """The JSON annotation document of ``meeting``."""
    return {
        "schema_version": SCHEMA_VERSION,
        "sample_rate": meeting.sample_rate,
        "num_samples": meeting.num_samples,
        "mixture_file": "mixture.wav",
        "noise_file": "noise.wav",
        "noise_snr_db": meeting.noise_snr_db,
        "target_overlap_ratio": meeting.target_overlap_ratio,
        "speakers": [{"id": k, "gain_db": g} for k, g in sorted(meeting.speaker_gains_db.items())],
        "utterances": [
            {
                "id": u.interval.id,
                "speaker": u.interval.speaker,
                "start_sample": u.interval.start,
                "end_sample": u.interval.end,
                "gain_db": u.gain_db,
                "synth_seed": u.synth_seed,
                "file": f"utterances/utt_{u.interval.id:04d}.wav",
            }
            for u in meeting.utterances
        ],
        "generator": None if meeting.config is None else {
            "seed": meeting.config.rng_seed, "config": meeting.config.to_dict()},
    }


def write_meeting(meeting, directory):
    os.makedirs(os.path.join(directory, "utterances"), exist_ok=True)
    annotation = meeting_annotation(meeting)
    write_wav(os.path.join(directory, "mixture.wav"), meeting.mixture.samples, meeting.sample_rate)
    write_wav(os.path.join(directory, "noise.wav"), meeting.noise, meeting.sample_rate)
    for utt, record in zip(meeting.utterances, annotation["utterances"]):
        write_wav(os.path.join(directory, record["file"]), utt.samples, meeting.sample_rate)
    _dump_json(os.path.join(directory, "meeting.json"), annotation)


def _require(record, key, where):
    if key not in record:
        raise FormatError(f"{where}: missing field {key!r}")
    return record[key]


def parse_annotation(document, where="meeting.json"):
    """Validate an annotation document; returns the utterance intervals."""
    version = document.get("schema_version")
    if version != SCHEMA_VERSION:
        raise FormatError(f"{where}: unsupported schema_version {version!r}")
    for key in ("sample_rate", "num_samples", "utterances"):
        _require(document, key, where)
    intervals = []
    seen = set()
    for i, record in enumerate(document["utterances"]):
        loc = f"{where}: utterances[{i}]"
        uid = _require(record, "id", loc)
        start = _require(record, "start_sample", loc)
        end = _require(record, "end_sample", loc)
        if uid in seen:
            raise FormatError(f"{loc}: duplicate utterance id {uid}")
        seen.add(uid)
        if not start < end:
            raise FormatError(f"{loc}: utterance {uid} has start_sample {start} >= end_sample {end}")
        if start < 0 or end > document["num_samples"]:
            raise FormatError(f"{loc}: utterance {uid} lies outside the meeting")
        intervals.append(UtteranceInterval(uid, _require(record, "speaker", loc), start, end))
    return intervals


def read_meeting(directory):
    where = os.path.join(directory, "meeting.json")
    if not os.path.isfile(where):
        raise FormatError(f"{directory}: no meeting.json")
    document = load_json(where)
    intervals = parse_annotation(document, where)
    rate = document["sample_rate"]

    def load(name, expected_length, what):
        path = os.path.join(directory, name)
        if not os.path.isfile(path):
            raise FormatError(f"{where}: {what} refers to missing file {name}")
        wav = read_wav(path)
        if wav.sample_rate != rate:
            raise FormatError(f"{path}: sample rate {wav.sample_rate} != {rate}")
        if len(wav) != expected_length:
            raise FormatError(f"{path}: {len(wav)} samples, expected {expected_length}")
        return wav.samples

    mixture = load(document.get("mixture_file", "mixture.wav"), document["num_samples"], "mixture")
    noise_file = document.get("noise_file")
    noise = (load(noise_file, document["num_samples"], "noise") if noise_file
             else np.zeros(document["num_samples"]))
    utterances = []
    for utt, record in zip(intervals, document["utterances"]):
        samples = load(_require(record, "file", where), utt.length, f"utterance {utt.id}")
        utterances.append(MeetingUtterance(
            utt, np.array(samples), record.get("gain_db", 0.0), record.get("synth_seed")))
    generator = document.get("generator")
    config = MeetingConfig.from_dict(generator["config"]) if generator else None
    return Meeting(
        mixture=Waveform(mixture, rate),
        utterances=utterances,
        speaker_gains_db={s["id"]: s["gain_db"] for s in document.get("speakers", [])},
        noise=np.array(noise),
        noise_snr_db=document.get("noise_snr_db"),
        target_overlap_ratio=document.get("target_overlap_ratio"),
        config=config,
    )


def find_meetings(path):
    """A meeting directory itself, or the sorted meeting subdirectories of ``path``."""
    if os.path.isfile(os.path.join(path, "meeting.json")):
        return [path]
    if not os.path.isdir(path):
        raise FormatError(f"{path}: no such directory")
    found = sorted(os.path.join(path, d) for d in os.listdir(path)
                   if os.path.isfile(os.path.join(path, d, "meeting.json")))
    if not found:
        raise FormatError(f"{path}: contains no meeting directories")
    return found


def write_streams(directory, streams, sample_rate):
    """Write ``(N, T)`` streams as ``channel_1.wav`` ... ``channel_N.wav``."""
    os.makedirs(directory, exist_ok=True)
    for n, stream in enumerate(streams):
        write_wav(os.path.join(directory, f"channel_{n + 1}.wav"), stream, sample_rate)


def read_streams(directory):
    """Read consecutive ``channel_<n>.wav`` files; returns ``(streams, sample_rate)``."""
    channels = []
    n = 1
    while os.path.isfile(os.path.join(directory, f"channel_{n}.wav")):
        channels.append(read_wav(os.path.join(directory, f"channel_{n}.wav")))
        n += 1
    if not channels:
        raise FormatError(f"{directory}: no channel_1.wav")
    if len({(len(c), c.sample_rate) for c in channels}) != 1:
        raise FormatError(f"{directory}: channels differ in length or sample rate")
    return np.stack([c.samples for c in channels]), channels[0].sample_rate


def write_segment_outputs(directory, outputs, plan, config=None):
    """Write separated segments plus a ``segments.json`` index."""
    os.makedirs(directory, exist_ok=True)
    records = []
    for out in outputs:
        files = []
        for n, stream in enumerate(out.streams):
            name = f"seg_{out.index:04d}_ch{n + 1}.wav"
            write_wav(os.path.join(directory, name), stream, plan.sample_rate)
            files.append(name)
        records.append({"index": out.index, "start_sample": out.start,
                        "left_pad": out.left_pad, "right_pad": out.right_pad, "files": files})
    _dump_json(os.path.join(directory, "segments.json"), {
        "schema_version": SCHEMA_VERSION,
        "plan": {"history": plan.history, "current": plan.current,
                 "future": plan.future, "sample_rate": plan.sample_rate},
        "segments": records,
        "config": config or {},
    })


def read_segment_outputs(directory):
    """Inverse of :func:`write_segment_outputs`; returns ``(outputs, plan)``."""
    where = os.path.join(directory, "segments.json")
    document = load_json(where)
    if document.get("schema_version") != SCHEMA_VERSION:
        raise FormatError(f"{where}: unsupported schema_version")
    plan = SegmentPlan(**document["plan"])
    outputs = []
    for record in document["segments"]:
        streams = np.stack([read_wav(os.path.join(directory, name)).samples
                            for name in record["files"]])
        outputs.append(SegmentOutput(record["index"], record["start_sample"], streams,
                                     record["left_pad"], record["right_pad"]))
    return outputs, plan

"""Simulated meetings with synthetic speech-like utterances.

Utterances are placed one after another. Each new onset either follows a
short silence, or overlaps the running tail by an amount steered towards
the meeting's target overlap ratio. Speakers are chosen least-talked first
so that speaking time stays balanced.
"""
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import signal as sps

from .audio import Waveform, white_noise
from .errors import ContractError
from .overlap_graph import UtteranceInterval

MIN_UTTERANCE = 2.0
MAX_UTTERANCE = 10.0
SILENCE_RANGE = (0.1, 2.0)
SPEAKER_BALANCE = 0.3
OVERLAP_TOLERANCE = 0.05
LENGTH_TOLERANCE = 0.1
MAX_RETRIES = 100


@dataclass(frozen=True)
class MeetingConfig:
    num_speakers_range: tuple = (5, 8)
    overlap_ratio_range: tuple = (0.2, 0.4)
    target_length: float = 120.0
    silence_probability: float = 0.1
    speaker_gain_range_db: tuple = (0.0, 5.0)
    noise_snr_range_db: tuple = (20.0, 30.0)
    sample_rate: int = 8000
    rng_seed: int = 0
    max_concurrency: int = 2

    def __post_init__(self):
        for name in ("num_speakers_range", "overlap_ratio_range",
                     "speaker_gain_range_db", "noise_snr_range_db"):
            value = tuple(getattr(self, name))
            if len(value) != 2 or value[0] > value[1]:
                raise ContractError(f"{name} must be an ordered pair, got {value}")
            object.__setattr__(self, name, value)
        lo, _ = self.num_speakers_range
        if lo < 1 or any(int(k) != k for k in self.num_speakers_range):
            raise ContractError("num_speakers_range must hold positive integers")
        if not (0 <= self.overlap_ratio_range[0] and self.overlap_ratio_range[1] < 1):
            raise ContractError("overlap ratios must lie in [0, 1)")
        if not 0 <= self.silence_probability <= 1:
            raise ContractError("silence_probability must lie in [0, 1]")
        if self.max_concurrency is not None and self.max_concurrency < 1:
            raise ContractError("max_concurrency must be at least 1 (or None)")
        if self.target_length <= 0 or self.sample_rate <= 0:
            raise ContractError("target_length and sample_rate must be positive")

    def to_dict(self):
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, data):
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ContractError(f"unknown config keys: {sorted(unknown)}")
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in data.items()})


@dataclass(frozen=True)
class MeetingUtterance:
    """One utterance: its interval, its gain-scaled samples over that interval."""

    interval: UtteranceInterval
    samples: np.ndarray
    gain_db: float
    synth_seed: object = None

    def padded(self, num_samples):
        out = np.zeros(num_samples)
        out[self.interval.start:self.interval.end] = self.samples
        return out


@dataclass
class Meeting:
    mixture: Waveform
    utterances: list
    speaker_gains_db: dict
    noise: np.ndarray
    noise_snr_db: float
    target_overlap_ratio: float = None
    config: MeetingConfig = None
    extra: dict = field(default_factory=dict)

    @property
    def sample_rate(self):
        return self.mixture.sample_rate

    @property
    def num_samples(self):
        return len(self.mixture)

    @property
    def intervals(self):
        return [u.interval for u in self.utterances]

    @property
    def speakers(self):
        return sorted(self.speaker_gains_db)

    def clean_mixture(self):
        out = np.zeros(self.num_samples)
        for utt in self.utterances:
            out[utt.interval.start:utt.interval.end] += utt.samples
        return out


def synth_utterance(rng, num_samples, sample_rate=8000):
    """Speech-like noise: two random resonances under a syllable-rate envelope.

    Output has unit RMS and depends only on the state of ``rng``.
    """
    if num_samples < 0.1 * sample_rate:
        raise ContractError(
            f"utterance of {num_samples} samples is shorter than 0.1 s at {sample_rate} Hz")
    # Uniform excitation is cheaper to draw and is Gaussian-like once
    # filtered. Filtering runs in single precision for speed.
    x = rng.random(num_samples, dtype=np.float32)
    x -= 0.5
    a = np.ones(1)
    for lo, hi in ((250.0, 900.0), (900.0, 2500.0)):
        freq = min(rng.uniform(lo, hi), 0.45 * sample_rate)
        radius = np.exp(-np.pi * rng.uniform(80.0, 200.0) / sample_rate)
        a = np.convolve(a, [1.0, -2 * radius * np.cos(2 * np.pi * freq / sample_rate),
                            radius ** 2])
    x = sps.lfilter(np.ones(1, dtype=np.float32), a.astype(np.float32), x)
    # The envelope is smooth, so it is held constant over 2.5 ms blocks.
    block = max(1, sample_rate // 400)
    centers = (np.arange(-(-num_samples // block)) + 0.5) * (block / sample_rate)
    rate = rng.uniform(3.0, 6.0)
    syllables = np.sin(np.pi * rate * centers + rng.uniform(0, np.pi)) ** 2
    drift = 1.0 + 0.5 * np.sin(2 * np.pi * rng.uniform(0.1, 0.5) * centers
                               + rng.uniform(0, 2 * np.pi))
    envelope = (0.1 + syllables) * drift
    full = num_samples // block * block
    x[:full].reshape(-1, block)[...] *= envelope[:full // block, None]
    x[full:] *= envelope[-1]
    x = x.astype(np.float64)
    x *= 1 / np.sqrt(np.dot(x, x) / num_samples)
    return x


def _coverage(intervals):
    """Samples covered by at least one and by at least two intervals."""
    events = sorted([(s, 1) for s, _ in intervals] + [(e, -1) for _, e in intervals])
    speech = overlap = active = 0
    last = None
    for pos, delta in events:
        if last is not None:
            if active >= 1:
                speech += pos - last
            if active >= 2:
                overlap += pos - last
        active += delta
        last = pos
    return speech, overlap


def overlap_ratio(utterances):
    """Fraction of speech samples where at least two utterances are active."""
    utterances = list(utterances)
    if not utterances:
        raise ContractError("overlap_ratio needs at least one utterance")
    speech, overlap = _coverage([(u.start, u.end) for u in utterances])
    return overlap / speech


def _earliest_onset(placed, tail, room, horizon):
    """Earliest onset >= tail - horizon keeping at most ``room`` utterances active before tail."""
    lo = tail - horizon
    near = [(s, e) for _, s, e in placed if e > lo]
    points = sorted({tail, lo} | {x for s, e in near for x in (s, e) if lo < x < tail},
                    reverse=True)
    onset = tail
    for hi, low in zip(points, points[1:]):
        if sum(1 for s, e in near if s <= low and e >= hi) > room:
            break
        onset = low
    return onset


def _place(rng, num_speakers, target, config):
    sr = config.sample_rate
    target_len = round(config.target_length * sr)
    min_d, max_d = round(MIN_UTTERANCE * sr), round(MAX_UTTERANCE * sr)
    placed = []  # (speaker, start, end)
    spoken = [0] * num_speakers
    busy_until = [0] * num_speakers
    tail = 0
    while tail < (1 - LENGTH_TOLERANCE / 2) * target_len:
        d = int(rng.integers(min_d, max_d + 1))
        if not placed:
            onset = 0
        elif rng.random() < config.silence_probability:
            onset = tail + round(rng.uniform(*SILENCE_RANGE) * sr)
        else:
            speech, overlap = _coverage([(s, e) for _, s, e in placed])
            wanted = (target * (speech + d) - overlap) / (1 + target)
            latest = max(placed, key=lambda p: p[2])
            limit = min(d, latest[2] - latest[1]) - 1
            if config.max_concurrency is not None:
                earliest = _earliest_onset(placed, tail, config.max_concurrency - 1, limit)
                limit = tail - earliest
            onset = tail - int(np.clip(wanted * rng.uniform(0.5, 1.5), 0, limit))
        # Keep the last utterance from running far past the target length.
        d = min(d, max(min_d, round((1 + LENGTH_TOLERANCE / 2) * target_len) - onset))
        free = [k for k in range(num_speakers) if busy_until[k] <= onset]
        if not free:
            onset = tail
            free = list(range(num_speakers))
        least = min(spoken[k] for k in free)
        speaker = int(rng.choice([k for k in free if spoken[k] == least]))
        placed.append((speaker, onset, onset + d))
        spoken[speaker] += d
        busy_until[speaker] = onset + d
        tail = max(tail, onset + d)
    return placed


def _layout_problems(placed, num_speakers, target, config):
    problems = []
    target_len = config.target_length * config.sample_rate
    total = max(e for _, _, e in placed)
    if abs(total - target_len) > LENGTH_TOLERANCE * target_len:
        problems.append(f"length {total / config.sample_rate:.2f} s")
    speech, overlap = _coverage([(s, e) for _, s, e in placed])
    if abs(overlap / speech - target) > OVERLAP_TOLERANCE:
        problems.append(f"overlap ratio {overlap / speech:.3f} vs target {target:.3f}")
    if config.max_concurrency is not None:
        events = sorted([(s, 1) for _, s, _ in placed] + [(e, -1) for _, _, e in placed])
        active = peak = 0
        for _, delta in events:
            active += delta
            peak = max(peak, active)
        if peak > config.max_concurrency:
            problems.append(f"{peak} concurrent utterances")
    spoken = np.zeros(num_speakers)
    for k, s, e in placed:
        spoken[k] += e - s
    mean = spoken.mean()
    if np.any(np.abs(spoken - mean) > SPEAKER_BALANCE * mean):
        problems.append(f"unbalanced speaking time {np.round(spoken / config.sample_rate, 1)}")
    return problems


def simulate_meeting(config=MeetingConfig()):
    """Generate one meeting; a pure function of ``config`` (including its seed)."""
    rng = np.random.default_rng(config.rng_seed)
    lo, hi = config.num_speakers_range
    num_speakers = int(rng.integers(lo, hi + 1))
    target = float(rng.uniform(*config.overlap_ratio_range))
    gains = [float(g) for g in rng.uniform(*config.speaker_gain_range_db, size=num_speakers)]
    snr_db = float(rng.uniform(*config.noise_snr_range_db))
    failures = []
    for _ in range(MAX_RETRIES):
        placed = _place(rng, num_speakers, target, config)
        problems = _layout_problems(placed, num_speakers, target, config)
        if not problems:
            break
        failures.append("; ".join(problems))
    else:
        raise ContractError(
            f"no valid layout after {MAX_RETRIES} attempts (seed {config.rng_seed}, "
            f"{num_speakers} speakers, target ratio {target:.3f}); last: {failures[-1]}")

    placed.sort(key=lambda p: (p[1], p[2], p[0]))
    num_samples = max(e for _, _, e in placed)
    utterances = []
    clean = np.zeros(num_samples)
    for index, (speaker, start, end) in enumerate(placed):
        seed = int(rng.integers(2 ** 32))
        source = synth_utterance(np.random.default_rng(seed), end - start, config.sample_rate)
        scaled = source
        scaled *= 10 ** (gains[speaker] / 20)
        utterances.append(MeetingUtterance(
            UtteranceInterval(index, speaker, start, end), scaled, gains[speaker], seed))
        clean[start:end] += scaled
    noise = white_noise(clean, snr_db, rng)
    clean += noise
    clean.flags.writeable = False
    return Meeting(
        mixture=Waveform(clean, config.sample_rate),
        utterances=utterances,
        speaker_gains_db=dict(enumerate(gains)),
        noise=noise,
        noise_snr_db=snr_db,
        target_overlap_ratio=target,
        config=config,
    )


@dataclass(frozen=True)
class SpeakerHistogram:
    """Distinct speakers per analysis window."""

    counts: dict
    num_segments: int

    def fraction_at_most(self, num_channels):
        return sum(v for k, v in self.counts.items() if k <= num_channels) / self.num_segments

    def fraction_above(self, num_channels):
        return 1.0 - self.fraction_at_most(num_channels)


def segment_speaker_histogram(meeting, segment_length, shift):
    """Count the distinct active speakers in windows of ``segment_length`` seconds.

    Windows start every ``shift`` seconds from 0 until one reaches the end
    of the meeting; the last may be shorter.
    """
    if not segment_length >= shift > 0:
        raise ContractError("need segment_length >= shift > 0")
    sr = meeting.sample_rate
    length = round(segment_length * sr)
    hop = round(shift * sr)
    total = meeting.num_samples
    num_windows = 1 if length >= total else math.ceil((total - length) / hop) + 1
    counts = {}
    for i in range(num_windows):
        lo, hi = i * hop, i * hop + length
        speakers = {u.speaker for u in meeting.intervals if max(u.start, lo) < min(u.end, hi)}
        counts[len(speakers)] = counts.get(len(speakers), 0) + 1
    return SpeakerHistogram(dict(sorted(counts.items())), num_windows)

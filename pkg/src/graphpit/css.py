"""Segment-wise separation and stitching into continuous output streams.

A separator is any callable ``separator(segment, offset) -> (N, len(segment))``
where ``segment`` is the zero-padded mixture slice starting at absolute
sample ``offset`` (negative for the first segments when history context is
used). A separator may set ``concurrent_safe = True`` to allow
:func:`separate_segments` to call it from several threads.
"""
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .audio import add_white_noise
from .errors import ContractError, InfeasibleError
from .overlap_graph import build_overlap_graph, enumerate_colorings, max_concurrency
from .pit import SegmentTargets, build_intermediate_targets


def _to_samples(seconds, sample_rate, name):
    exact = seconds * sample_rate
    count = round(exact)
    if abs(exact - count) > 1e-6:
        raise ContractError(f"{name}={seconds} s is not a whole number of samples")
    return count


@dataclass(frozen=True)
class SegmentPlan:
    """History, current and future context lengths in seconds."""

    history: float
    current: float
    future: float
    sample_rate: int

    def __post_init__(self):
        if not self.current > 0:
            raise ContractError("current context must be positive")
        if self.history < 0 or self.future < 0:
            raise ContractError("history and future context must be non-negative")
        if self.sample_rate <= 0:
            raise ContractError("sample_rate must be positive")
        for name in ("history", "current", "future"):
            _to_samples(getattr(self, name), self.sample_rate, name)

    @property
    def history_samples(self):
        return _to_samples(self.history, self.sample_rate, "history")

    @property
    def current_samples(self):
        return _to_samples(self.current, self.sample_rate, "current")

    @property
    def future_samples(self):
        return _to_samples(self.future, self.sample_rate, "future")

    @property
    def segment_samples(self):
        return self.history_samples + self.current_samples + self.future_samples

    @property
    def overhead(self):
        """Extra separated audio relative to the input: ``(T_h + T_f) / T_c``."""
        return (self.history + self.future) / self.current

    @classmethod
    def whole(cls, total_samples, sample_rate):
        """A single segment spanning ``total_samples`` without context."""
        return cls(0.0, total_samples / sample_rate, 0.0, sample_rate)


@dataclass(frozen=True)
class SegmentOutput:
    index: int
    start: int
    streams: np.ndarray
    left_pad: int = 0
    right_pad: int = 0

    @property
    def num_channels(self):
        return self.streams.shape[0]


def plan_segments(total_samples, plan):
    """Absolute ``(start, end)`` ranges of all segments.

    Ranges are in the unclipped geometry: the first may start before 0 and
    the last may end after ``total_samples``; those parts are zero-padded
    when separating. Segment ``i`` has its current context at
    ``[i * T_c, (i + 1) * T_c)``.
    """
    if total_samples <= 0:
        raise ContractError("total_samples must be positive")
    hop = plan.current_samples
    count = math.ceil(total_samples / hop)
    return [(i * hop - plan.history_samples, i * hop + hop + plan.future_samples)
            for i in range(count)]


def _padded_slice(x, start, end):
    out = np.zeros((*x.shape[:-1], end - start))
    lo, hi = max(start, 0), min(end, x.shape[-1])
    if lo < hi:
        out[..., lo - start:hi - start] = x[..., lo:hi]
    return out


def separate_segments(mixture, plan, separator, workers=None):
    """Run ``separator`` on every planned segment independently."""
    x = np.asarray(getattr(mixture, "samples", mixture), dtype=np.float64)
    total = len(x)
    ranges = plan_segments(total, plan)

    def run(item):
        index, (start, end) = item
        streams = np.asarray(separator(_padded_slice(x, start, end), start), dtype=np.float64)
        if streams.ndim != 2 or streams.shape[1] != end - start:
            raise ContractError(
                f"separator returned shape {streams.shape} for segment {index} "
                f"of length {end - start}")
        return SegmentOutput(index, start, streams,
                             left_pad=max(0, -start), right_pad=max(0, end - total))

    if workers and workers > 1 and getattr(separator, "concurrent_safe", False):
        with ThreadPoolExecutor(workers) as pool:
            outputs = list(pool.map(run, enumerate(ranges)))
    else:
        outputs = [run(item) for item in enumerate(ranges)]
    if len({o.num_channels for o in outputs}) > 1:
        raise ContractError("separator changed its channel count between segments")
    return outputs


@dataclass(frozen=True)
class Alignment:
    """Channel permutation chosen for one segment boundary.

    ``permutation[n]`` is the channel of the later segment that continues
    global channel ``n``. ``gap`` is the cost difference between the best
    and second-best permutation (0 when ambiguous).
    """

    permutation: tuple
    cost: float
    gap: float


def align_segments(outputs, plan, total_samples):
    """Global channel order for each segment by pairwise squared-difference matching.

    Segment 0 keeps its channel order. Each later segment is compared with
    its already aligned predecessor over their shared region (history plus
    future context, clipped to the meeting), trying the identity first and
    then the remaining permutations in lexicographic order; the first
    minimum wins. Returns the per-segment permutations and the boundary
    alignments.
    """
    if not outputs:
        return [], []
    num_channels = outputs[0].num_channels
    if any(o.num_channels != num_channels for o in outputs):
        raise ContractError("segments disagree on the number of channels")
    perms = list(itertools.permutations(range(num_channels)))
    permutations = [tuple(range(num_channels))]
    alignments = []
    previous = outputs[0].streams
    for prev, nxt in zip(outputs, outputs[1:]):
        length = prev.streams.shape[1]
        lo = max(nxt.start, 0)
        hi = min(prev.start + length, total_samples)
        if lo < hi:
            a = previous[:, lo - prev.start:hi - prev.start]
            b = nxt.streams[:, lo - nxt.start:hi - nxt.start]
            pair = np.array([[np.sum((a[i] - b[j]) ** 2) for j in range(num_channels)]
                             for i in range(num_channels)])
            costs = [sum(pair[n, p[n]] for n in range(num_channels)) for p in perms]
        else:
            costs = [0.0] * len(perms)
        best = min(range(len(perms)), key=lambda k: costs[k])
        ordered = sorted(costs)
        gap = ordered[1] - ordered[0] if len(ordered) > 1 else 0.0
        perm = perms[best]
        alignments.append(Alignment(perm, float(costs[best]), float(gap)))
        previous = nxt.streams[list(perm)]
        permutations.append(perm)
    return permutations, alignments


def stitch(outputs, plan, total_samples):
    """Continuous ``(N, total_samples)`` streams from aligned current contexts."""
    permutations, _ = align_segments(outputs, plan, total_samples)
    if not outputs:
        raise ContractError("nothing to stitch")
    out = np.zeros((outputs[0].num_channels, total_samples))
    hop = plan.current_samples
    for output, perm in zip(outputs, permutations):
        lo = output.start + plan.history_samples
        hi = min(lo + hop, total_samples)
        local = lo - output.start
        out[:, lo:hi] = output.streams[list(perm), local:local + hi - lo]
    return out


def identity_separator(num_channels=2):
    """Separator that copies the mixture slice to every channel."""
    def separator(segment, offset):
        return np.tile(segment, (num_channels, 1))

    separator.concurrent_safe = True
    separator.num_channels = num_channels
    return separator


def first_coloring(graph, num_channels):
    return next(enumerate_colorings(graph, num_channels), None)


class OracleSeparator:
    """Stand-in separator that returns slices of ground-truth channel streams.

    The streams are the intermediate targets of the whole meeting under the
    coloring picked by ``coloring_policy(graph, num_channels)``. Each call can
    shuffle channels (seeded by ``shuffle_seed`` and the segment offset) and
    add white noise at ``snr_db`` per channel, measured against the active
    (nonzero) samples of the clean channel slice; all-zero channel slices
    stay silent.
    """

    concurrent_safe = True

    def __init__(self, meeting, num_channels=2, coloring_policy=first_coloring,
                 shuffle_seed=None, snr_db=None, noise_seed=0):
        targets = SegmentTargets.from_meeting(meeting)
        graph = build_overlap_graph(targets.utterances)
        coloring = coloring_policy(graph, num_channels)
        if coloring is None:
            concurrency = max_concurrency(targets.utterances)
            raise InfeasibleError(
                f"oracle separator needs {concurrency} channels, has {num_channels}",
                concurrency=concurrency, num_channels=num_channels)
        self.meeting = meeting
        self.num_channels = num_channels
        self.coloring = tuple(coloring)
        self.streams = build_intermediate_targets(targets, coloring, num_channels)
        self.shuffle_seed = shuffle_seed
        self.snr_db = snr_db
        self.noise_seed = noise_seed

    def clean_slice(self, offset, length):
        return _padded_slice(self.streams, offset, offset + length)

    def permutation(self, offset):
        if self.shuffle_seed is None:
            return tuple(range(self.num_channels))
        rng = np.random.default_rng([self.shuffle_seed, offset + 2 ** 40])
        return tuple(int(c) for c in rng.permutation(self.num_channels))

    def __call__(self, segment, offset):
        out = self.clean_slice(offset, len(segment))
        if self.snr_db is not None:
            rng = np.random.default_rng([self.noise_seed, offset + 2 ** 40])
            for n in range(self.num_channels):
                if np.any(out[n]):
                    out[n] = add_white_noise(out[n], self.snr_db, rng, active_only=True)
        return out[list(self.permutation(offset))]


def oracle_separator(meeting, num_channels=2, coloring_policy=first_coloring,
                     shuffle_seed=None, snr_db=None, noise_seed=0):
    """Build an :class:`OracleSeparator`; raises if the meeting needs more channels."""
    return OracleSeparator(meeting, num_channels, coloring_policy,
                           shuffle_seed, snr_db, noise_seed)

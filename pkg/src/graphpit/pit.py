"""Utterance-level PIT and graph-based PIT over a pluggable signal loss.

A base loss is any function ``(reference, estimate) -> float``. Estimates
are arrays of shape ``(num_channels, num_samples)``.
"""
import functools
import itertools
from dataclasses import dataclass

import numpy as np

from .audio import TsdrParams, eps_tsdr_loss, neg_sdr_loss
from .errors import ContractError, InfeasibleError
from .overlap_graph import (
    UtteranceInterval,
    build_overlap_graph,
    count_colorings,
    enumerate_colorings,
    max_concurrency,
)


@dataclass(frozen=True)
class SegmentTargets:
    """Utterances scoped to one segment, each zero-padded to the segment length.

    ``signals[i]`` belongs to ``utterances[i]`` and is zero outside its
    segment-relative interval.
    """

    utterances: tuple
    signals: np.ndarray

    def __post_init__(self):
        utterances = tuple(self.utterances)
        signals = np.array(self.signals, dtype=np.float64)
        if signals.ndim != 2 or len(signals) != len(utterances):
            raise ContractError(
                f"expected {len(utterances)} signals of equal length, got shape {signals.shape}")
        length = signals.shape[1]
        for utt, sig in zip(utterances, signals):
            if utt.start < 0 or utt.end > length:
                raise ContractError(
                    f"utterance {utt.id} [{utt.start}, {utt.end}) exceeds segment length {length}")
            if np.any(sig[:utt.start]) or np.any(sig[utt.end:]):
                raise ContractError(f"utterance {utt.id} has samples outside its interval")
        object.__setattr__(self, "utterances", utterances)
        object.__setattr__(self, "signals", signals)

    @property
    def segment_length(self):
        return self.signals.shape[1]

    @property
    def speakers(self):
        return sorted({u.speaker for u in self.utterances})

    @classmethod
    def from_meeting(cls, meeting, start=0, stop=None):
        """Crop a meeting's scaled utterances to ``[start, stop)``."""
        stop = meeting.num_samples if stop is None else stop
        if not start < stop:
            raise ContractError(f"empty segment [{start}, {stop})")
        utterances, signals = [], []
        for mu in meeting.utterances:
            utt = mu.interval
            lo, hi = max(utt.start, start), min(utt.end, stop)
            if lo >= hi:
                continue
            sig = np.zeros(stop - start)
            sig[lo - start:hi - start] = mu.samples[lo - utt.start:hi - utt.start]
            utterances.append(UtteranceInterval(utt.id, utt.speaker, lo - start, hi - start))
            signals.append(sig)
        return cls(tuple(utterances), np.reshape(signals, (len(signals), stop - start)))


@dataclass(frozen=True)
class PitResult:
    """Minimal loss and the assignment attaining it.

    For uPIT, ``assignment[k]`` is the channel of the k-th speaker in
    ``speakers`` order. For Graph-PIT it is the coloring, one channel per
    utterance. Channels are 0-based.
    """

    loss: float
    assignment: tuple
    objective: str
    num_candidates: int
    speakers: tuple = ()


def speaker_targets(targets):
    """Per-speaker sums of utterance signals, sorted by speaker id."""
    out = []
    for speaker in targets.speakers:
        rows = [i for i, u in enumerate(targets.utterances) if u.speaker == speaker]
        out.append((speaker, targets.signals[rows].sum(axis=0)))
    return out


def _check_estimates(targets, estimates):
    estimates = np.asarray(estimates, dtype=np.float64)
    if estimates.ndim != 2 or estimates.shape[0] < 1:
        raise ContractError(f"estimates must have shape (N, T), got {estimates.shape}")
    if estimates.shape[1] != targets.segment_length:
        raise ContractError(
            f"estimate length {estimates.shape[1]} != segment length {targets.segment_length}")
    return estimates


def upit_loss(targets, estimates, base_loss):
    """Minimum over speaker-to-channel permutations of the summed base loss.

    Speakers beyond K are all-zero padding targets and count towards the
    loss. Raises :class:`ContractError` when there are more speakers than
    channels.
    """
    estimates = _check_estimates(targets, estimates)
    num_channels = len(estimates)
    spk = speaker_targets(targets)
    if len(spk) > num_channels:
        raise ContractError(
            f"uPIT needs at most {num_channels} speakers per segment, got {len(spk)}")
    padded = [sig for _, sig in spk]
    padded += [np.zeros(targets.segment_length)] * (num_channels - len(spk))
    pair_loss = np.array([[base_loss(t, e) for e in estimates] for t in padded])
    best = None
    count = 0
    for perm in itertools.permutations(range(num_channels)):
        count += 1
        total = sum(pair_loss[k, perm[k]] for k in range(num_channels))
        if best is None or total < best[0]:
            best = (total, perm)
    return PitResult(float(best[0]), tuple(best[1][:len(spk)]), "upit", count,
                     tuple(s for s, _ in spk))


def build_intermediate_targets(targets, coloring, num_channels):
    """Sum the utterances of each channel under ``coloring``.

    Returns an array of shape ``(num_channels, segment_length)``; unused
    channels are all-zero.
    """
    coloring = tuple(coloring)
    if len(coloring) != len(targets.utterances):
        raise ContractError(
            f"coloring has {len(coloring)} entries for {len(targets.utterances)} utterances")
    if any(not 0 <= c < num_channels for c in coloring):
        raise ContractError(f"coloring {coloring} uses channels outside 0..{num_channels - 1}")
    graph = build_overlap_graph(targets.utterances)
    if not graph.is_proper(coloring):
        raise ContractError(f"coloring {coloring} puts overlapping utterances on one channel")
    out = np.zeros((num_channels, targets.segment_length))
    for channel, sig in zip(coloring, targets.signals):
        out[channel] += sig
    return out


def graph_pit_loss(targets, estimates, base_loss, max_colorings=None):
    """Minimum over all proper colorings of the summed per-channel base loss.

    Ties resolve to the lexicographically smallest coloring. With
    ``max_colorings`` set, refuses (before evaluating anything) when the
    coloring set is larger.
    """
    estimates = _check_estimates(targets, estimates)
    num_channels = len(estimates)
    graph = build_overlap_graph(targets.utterances)
    if max_colorings is not None:
        total = count_colorings(graph, num_channels)
        if total > max_colorings:
            raise ContractError(
                f"{total} colorings exceed the limit of {max_colorings}")

    # A channel's loss depends only on which utterances it holds.
    @functools.lru_cache(maxsize=None)
    def channel_loss(channel, members):
        target = targets.signals[list(members)].sum(axis=0) if members \
            else np.zeros(targets.segment_length)
        return base_loss(target, estimates[channel])

    best = None
    count = 0
    for coloring in enumerate_colorings(graph, num_channels):
        count += 1
        members = [[] for _ in range(num_channels)]
        for u, c in enumerate(coloring):
            members[c].append(u)
        total = sum(channel_loss(n, tuple(m)) for n, m in enumerate(members))
        if best is None or total < best[0]:
            best = (total, coloring)
    if best is None:
        concurrency = max_concurrency(targets.utterances)
        raise InfeasibleError(
            f"no proper coloring with {num_channels} channels: "
            f"{concurrency} utterances are active at once",
            concurrency=concurrency, num_channels=num_channels)
    return PitResult(float(best[0]), best[1], "graph-pit", count)


def evaluate_assignment(targets, estimates, base_loss, result):
    """Recompute the objective at ``result.assignment``."""
    estimates = np.asarray(estimates, dtype=np.float64)
    if result.objective == "graph-pit":
        tilde = build_intermediate_targets(targets, result.assignment, len(estimates))
        return float(sum(base_loss(t, e) for t, e in zip(tilde, estimates)))
    spk = dict(speaker_targets(targets))
    total = sum(base_loss(spk[s], estimates[c]) for s, c in zip(result.speakers, result.assignment))
    silent = np.zeros(targets.segment_length)
    total += sum(base_loss(silent, estimates[c])
                 for c in range(len(estimates)) if c not in result.assignment)
    return float(total)


def parse_base_loss(text):
    """Build a base loss from a string: ``tsdr[:sdr_max[:epsilon]]`` or ``sdr``."""
    name, *args = text.split(":")
    if name == "tsdr":
        try:
            values = [float(a) for a in args]
        except ValueError:
            raise ContractError(f"bad base loss parameters in {text!r}") from None
        if len(values) > 2:
            raise ContractError(f"too many parameters in {text!r}")
        return functools.partial(eps_tsdr_loss, params=TsdrParams(*values))
    if name == "sdr" and not args:
        return neg_sdr_loss
    raise ContractError(f"unknown base loss {text!r}")

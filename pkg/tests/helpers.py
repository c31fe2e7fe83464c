import numpy as np

from graphpit.overlap_graph import UtteranceInterval
from graphpit.pit import SegmentTargets


def make_segment(rng, layout, length):
    """SegmentTargets from ``[(speaker, start, end), ...]`` filled with noise."""
    utts, signals = [], []
    for i, (speaker, start, end) in enumerate(layout):
        sig = np.zeros(length)
        sig[start:end] = rng.standard_normal(end - start)
        utts.append(UtteranceInterval(i, speaker, start, end))
        signals.append(sig)
    return SegmentTargets(tuple(utts), np.array(signals).reshape(len(utts), length))


def random_layout(rng, num_speakers, length, max_utts=3):
    """Per-speaker non-overlapping utterances on a segment of ``length`` samples."""
    layout = []
    for k in range(num_speakers):
        cuts = np.sort(rng.choice(np.arange(1, length), size=2 * int(rng.integers(1, max_utts + 1)),
                                  replace=False))
        for start, end in cuts.reshape(-1, 2):
            layout.append((k, int(start), int(end)))
    return layout

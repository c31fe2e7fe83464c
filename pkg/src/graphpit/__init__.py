"""Graph-based permutation invariant training and continuous speech separation tools."""

from .audio import (
    SDR_CAP,
    TsdrParams,
    Waveform,
    add_white_noise,
    eps_tsdr_loss,
    neg_sdr_loss,
    sdr,
    sdr_improvement,
)
from .css import (
    SegmentOutput,
    SegmentPlan,
    align_segments,
    identity_separator,
    oracle_separator,
    plan_segments,
    separate_segments,
    stitch,
)
from .errors import ContractError, FormatError, InfeasibleError, UndefinedMetricError
from .evaluation import evaluate_meeting
from .meeting_sim import (
    Meeting,
    MeetingConfig,
    MeetingUtterance,
    overlap_ratio,
    segment_speaker_histogram,
    simulate_meeting,
    synth_utterance,
)
from .overlap_graph import (
    OverlapGraph,
    UtteranceInterval,
    brute_force_colorings,
    build_overlap_graph,
    connected_components,
    count_colorings,
    enumerate_colorings,
    max_concurrency,
)
from .pit import (
    PitResult,
    SegmentTargets,
    build_intermediate_targets,
    graph_pit_loss,
    parse_base_loss,
    speaker_targets,
    upit_loss,
)

__version__ = "0.1.0"

"""Command line interface.

Exit codes: 0 success, 2 usage error, 3 contract or infeasibility error.
Errors are reported as a JSON object on stderr.
"""
import argparse
import json
import os
import sys

import numpy as np

from . import io
from .css import (
    SegmentPlan,
    align_segments,
    identity_separator,
    oracle_separator,
    separate_segments,
    stitch,
)
from .errors import ContractError, InfeasibleError
from .evaluation import evaluate_meeting
from .meeting_sim import MeetingConfig, segment_speaker_histogram, simulate_meeting
from .overlap_graph import build_overlap_graph, count_colorings, enumerate_colorings
from .pit import SegmentTargets, graph_pit_loss, parse_base_loss, upit_loss

EXIT_USAGE = 2
EXIT_CONTRACT = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _fail("UsageError", f"{self.prog}: {message}", EXIT_USAGE)


def _fail(kind, message, code):
    json.dump({"error": kind, "message": message, "exit_code": code}, sys.stderr)
    sys.stderr.write("\n")
    sys.exit(code)


def _emit(document, path=None):
    text = json.dumps(document, indent=2) + "\n"
    if path:
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _floats(text, count=None, name="value"):
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"{name}: expected comma-separated numbers, got {text!r}") from None
    if count is not None and len(values) != count:
        raise UsageError(f"{name}: expected {count} values, got {len(values)}")
    return values


def parse_plan(text, sample_rate):
    history, current, future = _floats(text, 3, "--plan")
    return SegmentPlan(history, current, future, sample_rate)


def parse_separator(text):
    """``identity`` or ``oracle[:shuffle-seed][:snr]`` -> dict of options."""
    name, *args = text.split(":")
    if name == "identity" and not args:
        return {"name": "identity"}
    if name != "oracle" or len(args) > 2:
        raise UsageError(f"--separator: unknown separator {text!r}")
    args += [""] * (2 - len(args))
    try:
        seed = int(args[0]) if args[0] else None
        snr = float(args[1]) if args[1] else None
    except ValueError:
        raise UsageError(f"--separator: bad oracle options in {text!r}") from None
    return {"name": "oracle", "shuffle_seed": seed, "snr_db": snr}


def build_separator(options, meeting, num_channels, noise_seed):
    if options["name"] == "identity":
        return identity_separator(num_channels)
    return oracle_separator(meeting, num_channels, shuffle_seed=options["shuffle_seed"],
                            snr_db=options["snr_db"], noise_seed=noise_seed)


def _single_meeting(path):
    found = io.find_meetings(path)
    if len(found) != 1:
        raise UsageError(f"--meeting: expected one meeting directory, found {len(found)}")
    return io.read_meeting(found[0])


def cmd_simulate(args):
    data = io.load_json(args.config) if args.config else {}
    if args.seed is not None:
        data["rng_seed"] = args.seed
    base = MeetingConfig.from_dict(data)
    os.makedirs(args.out, exist_ok=True)
    written = []
    for m in range(args.count):
        seed = int(np.random.SeedSequence([base.rng_seed, m]).generate_state(1)[0])
        config = MeetingConfig.from_dict({**base.to_dict(), "rng_seed": seed})
        directory = os.path.join(args.out, f"meeting_{m:04d}")
        io.write_meeting(simulate_meeting(config), directory)
        written.append({"directory": directory, "seed": seed})
    _emit({"schema_version": 1, "meetings": written})


def cmd_segment_stats(args):
    lengths = _floats(args.segment_lengths, name="--segment-lengths")
    meetings = [io.read_meeting(d) for d in io.find_meetings(args.meeting)]
    rows = []
    for length in lengths:
        shift = args.shift if args.shift is not None else length
        counts = {}
        within = []
        for meeting in meetings:
            hist = segment_speaker_histogram(meeting, length, min(shift, length))
            for k, v in hist.counts.items():
                counts[k] = counts.get(k, 0) + v
            within.append(hist.fraction_at_most(args.channels))
        total = sum(counts.values())
        pooled = sum(v for k, v in counts.items() if k <= args.channels) / total
        rows.append({
            "segment_length": length,
            "shift": min(shift, length),
            "num_segments": total,
            "histogram": {str(k): v for k, v in sorted(counts.items())},
            "fraction_within_constraint": pooled,
            "fraction_violating_constraint": 1.0 - pooled,
            "mean_fraction_within_constraint": float(np.mean(within)),
        })
    _emit({"schema_version": 1, "num_meetings": len(meetings),
           "channels": args.channels, "segments": rows})


def cmd_separate(args):
    meeting = _single_meeting(args.meeting)
    plan = parse_plan(args.plan, meeting.sample_rate)
    options = parse_separator(args.separator)
    separator = build_separator(options, meeting, args.channels, args.seed)
    outputs = separate_segments(meeting.mixture, plan, separator)
    io.write_segment_outputs(args.out, outputs, plan,
                             {"separator": options, "channels": args.channels, "seed": args.seed})
    _emit({"schema_version": 1, "num_segments": len(outputs), "out": args.out})


def cmd_stitch_eval(args):
    meeting = _single_meeting(args.meeting)
    total = meeting.num_samples
    if args.no_stitch:
        plan = SegmentPlan.whole(total, meeting.sample_rate)
    else:
        plan = parse_plan(args.plan, meeting.sample_rate)
    options = parse_separator(args.separator)
    separator = build_separator(options, meeting, args.channels, args.seed)
    outputs = separate_segments(meeting.mixture, plan, separator)
    _, alignments = align_segments(outputs, plan, total)
    streams = stitch(outputs, plan, total)
    if args.streams_out:
        io.write_streams(args.streams_out, streams, meeting.sample_rate)
    config = {
        "meeting": os.path.basename(os.path.normpath(args.meeting)),
        "plan": None if args.no_stitch else
        {"history": plan.history, "current": plan.current, "future": plan.future},
        "stitching": not args.no_stitch,
        "num_segments": len(outputs),
        "overhead": (len(outputs) * plan.segment_samples - total) / total,
        "min_alignment_gap": min((a.gap for a in alignments), default=None),
        "separator": options,
        "channels": args.channels,
        "seed": args.seed,
    }
    _emit(evaluate_meeting(meeting, streams, config=config), args.report)


def cmd_colorings(args):
    document = io.load_json(args.annotation)
    graph = build_overlap_graph(io.parse_annotation(document, args.annotation))
    if args.count_only:
        _emit({"num_colorings": count_colorings(graph, args.channels)})
        return
    count = 0
    for coloring in enumerate_colorings(graph, args.channels):
        sys.stdout.write(json.dumps([c + 1 for c in coloring]) + "\n")
        count += 1
        if args.limit is not None and count >= args.limit:
            break


def cmd_loss(args):
    meeting = _single_meeting(args.meeting)
    estimates, rate = io.read_streams(args.estimates)
    if rate != meeting.sample_rate or estimates.shape[1] != meeting.num_samples:
        raise ContractError("estimates do not match the meeting's length or sample rate")
    start = round(args.start * rate) if args.start is not None else 0
    stop = round(args.end * rate) if args.end is not None else meeting.num_samples
    targets = SegmentTargets.from_meeting(meeting, start, stop)
    base_loss = parse_base_loss(args.base_loss)
    segment = estimates[:, start:stop]
    if args.objective == "upit":
        result = upit_loss(targets, segment, base_loss)
    else:
        result = graph_pit_loss(targets, segment, base_loss, max_colorings=args.max_colorings)
    document = {
        "schema_version": 1,
        "objective": result.objective,
        "base_loss": args.base_loss,
        "loss": result.loss,
        "num_candidates": result.num_candidates,
        "segment": [start, stop],
    }
    if result.objective == "upit":
        document["assignment"] = {str(s): c + 1 for s, c in zip(result.speakers, result.assignment)}
    else:
        document["assignment"] = {str(u.id + 1): c + 1
                                  for u, c in zip(targets.utterances, result.assignment)}
    _emit(document)


def build_parser():
    parser = _Parser(prog="graphpit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate simulated meetings")
    p.add_argument("--config", help="JSON file with MeetingConfig fields")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("segment-stats", help="speakers-per-segment statistics")
    p.add_argument("--meeting", required=True, help="meeting directory or a parent of several")
    p.add_argument("--segment-lengths", default="2,4,8,16")
    p.add_argument("--shift", type=float, help="window shift in seconds (default: length)")
    p.add_argument("--channels", type=int, default=2)
    p.set_defaults(func=cmd_segment_stats)

    for name, func, help_ in (("separate", cmd_separate, "separate a meeting segment-wise"),
                              ("stitch-eval", cmd_stitch_eval, "separate, stitch and evaluate")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--meeting", required=True)
        p.add_argument("--plan", default="1,2,1", help="T_h,T_c,T_f in seconds")
        p.add_argument("--separator", default="oracle")
        p.add_argument("--channels", type=int, default=2)
        p.add_argument("--seed", type=int, default=0, help="noise seed of the oracle separator")
        p.set_defaults(func=func)
        if name == "separate":
            p.add_argument("--out", required=True)
        else:
            p.add_argument("--report", required=True)
            p.add_argument("--no-stitch", action="store_true",
                           help="process the whole meeting as one segment")
            p.add_argument("--streams-out", help="also write the stitched streams here")

    p = sub.add_parser("colorings", help="enumerate proper channel colorings")
    p.add_argument("--annotation", required=True)
    p.add_argument("--channels", type=int, default=2)
    p.add_argument("--count-only", action="store_true")
    p.add_argument("--limit", type=int)
    p.set_defaults(func=cmd_colorings)

    p = sub.add_parser("loss", help="uPIT or Graph-PIT loss of estimates")
    p.add_argument("--meeting", required=True)
    p.add_argument("--estimates", required=True, help="directory with channel_<n>.wav")
    p.add_argument("--objective", choices=("upit", "graph-pit"), default="graph-pit")
    p.add_argument("--base-loss", default="tsdr:20:1e-6")
    p.add_argument("--start", type=float, help="segment start in seconds")
    p.add_argument("--end", type=float, help="segment end in seconds")
    p.add_argument("--max-colorings", type=int, default=10 ** 6)
    p.set_defaults(func=cmd_loss)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except UsageError as e:
        _fail("UsageError", str(e), EXIT_USAGE)
    except InfeasibleError as e:
        _fail("InfeasibleError", str(e), EXIT_CONTRACT)
    except ContractError as e:
        _fail(type(e).__name__, str(e), EXIT_CONTRACT)
    except OSError as e:
        _fail("OSError", str(e), EXIT_CONTRACT)
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Subcommands: rewheel (candidate-ID report), decode (angle/speed CSV),
logfilter (keep only OBD + steering frames), infer (log -> GPX), compare
(two GPX files -> accuracy row), synth (scenario file -> log + truth), and
tune (grid search). Every subcommand is non-interactive and deterministic;
failures print a one-line ``error: ...`` and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .canlog import IdFilter, LogParseError, filter_frames, read_log, write_log
from .geokin import VehiclePose, VehicleSpec
from .inference import InferenceError, InferenceParams, infer_path
from .mapmatch import ExternalMatcher, GraphMatcher, MatchServiceError
from .obd import decode_speed_response
from .reveng import (
    AngleDecodeError,
    candidate_report_csv,
    compute_change_stats,
    decode_angle,
    format_candidate_report,
    load_decoder_sheet,
    lookup_vehicle,
    rank_swa_candidates,
)
from .roadgraph import GraphFormatError, RoadGraph
from .synthgen import ScenarioError, load_scenario, manifest_for, simulate
from .trackeval import GpxError, comparison_csv_row, compare_tracks, load_gpx, save_gpx
from .tuner import TuneTrack, grid_search, marginal_curves, rows_to_csv

MATCHER_URL_ENV = "CANPATH_MATCHER_URL"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # single-line, machine-readable
        raise UsageError(message)


def _read_frames(path: str, strict: bool = False):
    source = sys.stdin if path == "-" else path
    frames, skipped = read_log(source, strict=strict)
    if skipped:
        shown = ", ".join(str(line_no) for line_no, _ in skipped[:5])
        more = "" if len(skipped) <= 5 else f" (+{len(skipped) - 5} more)"
        print(f"warning: skipped {len(skipped)} unparseable lines: {shown}{more}", file=sys.stderr)
    return frames


def _parse_start(text: str) -> VehiclePose:
    parts = text.split(",")
    if len(parts) != 3:
        raise UsageError("--start expects lat,lon,bearing")
    try:
        lat, lon, bearing = (float(p) for p in parts)
    except ValueError:
        raise UsageError(f"--start has a non-numeric component in {text!r}") from None
    return VehiclePose(lat=lat, lon=lon, bearing=bearing)


def _parse_params(text: str | None) -> InferenceParams:
    if not text:
        return InferenceParams()
    values = {}
    for item in text.split(","):
        if "=" not in item:
            raise UsageError(f"--params entries look like key=value, got {item!r}")
        key, value = item.split("=", 1)
        key = key.strip()
        if key not in ("t_window", "speed_max", "steer_max", "max_interpolation_points"):
            raise UsageError(f"unknown parameter {key!r}")
        try:
            values[key] = int(value) if key == "max_interpolation_points" else float(value)
        except ValueError:
            raise UsageError(f"--params {key} has a non-numeric value {value!r}") from None
    try:
        return InferenceParams(**values)
    except ValueError as exc:
        raise UsageError(f"--params: {exc}") from None


def _resolve_vehicle(args) -> tuple:
    """Decoder + vehicle spec from --model / --decoder-file / --wheelbase."""
    wheelbase = args.wheelbase
    steer_max = getattr(args, "steer_max", None)
    if getattr(args, "decoder_file", None):
        sheet = load_decoder_sheet(args.decoder_file)
        if args.model:
            entry = sheet.get(" ".join(args.model.lower().split()))
            if entry is None:
                raise UsageError(f"model {args.model!r} not in decoder file")
        else:
            if len(sheet) != 1:
                raise UsageError("--decoder-file has several models; pick one with --model")
            entry = next(iter(sheet.values()))
    elif args.model:
        entry = lookup_vehicle(args.model)
        if entry is None:
            raise UsageError(
                f"unknown model {args.model!r}: supply --decoder-file and --wheelbase"
            )
    else:
        raise UsageError("one of --model or --decoder-file is required")
    if wheelbase is None:
        wheelbase = entry.wheelbase
    if wheelbase is None:
        raise UsageError(f"no wheelbase on record for {args.model!r}: pass --wheelbase")
    spec = VehicleSpec(
        wheelbase=wheelbase,
        steer_max=35.0 if steer_max is None else steer_max,
        model=args.model or "",
    )
    return entry.decoder, spec


def _make_matcher(spec: str | None):
    if spec is None or spec == "none":
        if spec is None and os.environ.get(MATCHER_URL_ENV):
            return ExternalMatcher(os.environ[MATCHER_URL_ENV])
        return None
    if spec.startswith("internal:"):
        return GraphMatcher(RoadGraph.load(spec[len("internal:"):]))
    if spec.startswith("external:"):
        return ExternalMatcher(spec[len("external:"):])
    if spec == "external":
        url = os.environ.get(MATCHER_URL_ENV)
        if not url:
            raise UsageError(f"--matcher external needs a URL or {MATCHER_URL_ENV}")
        return ExternalMatcher(url)
    raise UsageError(f"--matcher must be internal:<graph>, external:<url> or none, got {spec!r}")


def _write_or_print(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fp:
            fp.write(text)
    else:
        sys.stdout.write(text)


# -- subcommand handlers --------------------------------------------------------


def _cmd_rewheel(args) -> int:
    frames = _read_frames(args.log, strict=args.strict)
    stats = compute_change_stats(frames)
    ranked = rank_swa_candidates(stats, id_ceiling=int(args.ceiling, 16))
    if args.csv:
        _write_or_print(candidate_report_csv(ranked), args.out)
    else:
        _write_or_print(format_candidate_report(ranked), args.out)
    return 0


def _cmd_decode(args) -> int:
    decoder, _vehicle = _resolve_vehicle(args)
    frames = _read_frames(args.log, strict=args.strict)
    lines = ["timestamp,signal,value"]
    for frame in frames:
        if frame.id == decoder.id:
            try:
                sample = decode_angle(decoder, frame)
            except AngleDecodeError:
                continue
            lines.append(f"{sample.timestamp:.6f},angle_deg,{sample.angle_deg:.4f}")
        else:
            reading = decode_speed_response(frame)
            if reading is not None:
                lines.append(f"{reading.timestamp:.6f},speed_kmh,{reading.speed_kmh}")
    _write_or_print("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_logfilter(args) -> int:
    swa_id = int(args.swa_id, 16)
    id_filter = IdFilter(((0x7E8, 0x7FF), (swa_id, 0x7FF)))
    frames = _read_frames(args.log, strict=args.strict)
    kept = filter_frames(frames, id_filter)
    if args.out:
        write_log(kept, args.out)
    else:
        write_log(kept, sys.stdout)
    return 0


def _cmd_infer(args) -> int:
    # flag-only validation first, file I/O after
    start = _parse_start(args.start)
    params = _parse_params(args.params)
    decoder, vehicle = _resolve_vehicle(args)
    matcher = _make_matcher(args.matcher)
    frames = _read_frames(args.log, strict=args.strict)
    result = infer_path(frames, decoder, vehicle, start, params, matcher)
    out = args.out or os.path.splitext(args.log)[0] + "_inferred.gpx"
    with open(out, "w", encoding="utf-8") as fp:
        fp.write(result.gpx)
    report = result.diagnostics.report()
    print(f"wrote {out} ({len(result.track)} points)")
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fp:
            fp.write(report)
    else:
        sys.stdout.write(report)
    return 0


def _cmd_compare(args) -> int:
    track_a = load_gpx(args.gpx_a)
    track_b = load_gpx(args.gpx_b)
    result = compare_tracks(
        track_a, track_b, match_epsilon=args.epsilon, spacing_m=args.spacing
    )
    name = os.path.splitext(os.path.basename(args.gpx_a))[0]
    print(comparison_csv_row(name, track_a, result))
    return 0


def _cmd_synth(args) -> int:
    scenario = load_scenario(args.scenario)
    result = simulate(scenario)
    out_dir = args.out_dir or os.path.dirname(os.path.abspath(args.scenario))
    os.makedirs(out_dir, exist_ok=True)
    log_file = os.path.join(out_dir, f"{scenario.name}.log")
    truth_file = os.path.join(out_dir, f"{scenario.name}_truth.gpx")
    manifest_file = os.path.join(out_dir, f"{scenario.name}_manifest.json")
    write_log(result.frames, log_file)
    save_gpx(result.truth, truth_file)
    manifest = manifest_for(scenario, result, log_file, truth_file)
    with open(manifest_file, "w", encoding="utf-8") as fp:
        json.dump(manifest, fp, indent=2)
        fp.write("\n")
    print(f"wrote {log_file}")
    print(f"wrote {truth_file}")
    print(f"wrote {manifest_file}")
    return 0


def _cmd_tune(args) -> int:
    with open(args.manifest, "r", encoding="utf-8") as fp:
        doc = json.load(fp)
    base = os.path.dirname(os.path.abspath(args.manifest))

    def resolve(path):
        return path if os.path.isabs(path) else os.path.join(base, path)

    graph = RoadGraph.load(resolve(doc["graph"]))
    tracks = []
    for entry in doc["tracks"]:
        frames, _ = read_log(resolve(entry["log"]), strict=False)
        truth = load_gpx(resolve(entry["truth"]))
        lat, lon, bearing = entry["start"]
        if "model" in entry:
            found = lookup_vehicle(entry["model"])
            if found is None:
                raise UsageError(f"unknown model {entry['model']!r} in manifest")
            decoder, wheelbase = found.decoder, entry.get("wheelbase", found.wheelbase)
        else:
            sheet = load_decoder_sheet(resolve(entry["decoder_file"]))
            found = next(iter(sheet.values()))
            decoder, wheelbase = found.decoder, entry.get("wheelbase", found.wheelbase)
        tracks.append(
            TuneTrack(
                name=entry.get("name", os.path.basename(entry["log"])),
                frames=tuple(frames),
                truth=truth,
                start=VehiclePose(lat, lon, bearing),
                decoder=decoder,
                vehicle=VehicleSpec(wheelbase=wheelbase),
            )
        )
    grids = {k: tuple(v) for k, v in doc.get("grids", {}).items()} or None
    rows = grid_search(tracks, graph, grids=grids, workers=args.workers)
    csv_text = rows_to_csv(rows)
    _write_or_print(csv_text, args.out)
    best = rows[0]
    print(
        f"best: t_window={best.params.t_window} speed_max={best.params.speed_max} "
        f"steer_max={best.params.steer_max} "
        f"max_interpolation_points={best.params.max_interpolation_points} "
        f"mean_accuracy={best.mean_accuracy:.4f}",
        file=sys.stderr,
    )
    if args.marginals:
        curves = marginal_curves(rows, grids)
        with open(args.marginals, "w", encoding="utf-8") as fp:
            fp.write("parameter,value,mean_accuracy\n")
            for name, curve in curves.items():
                for value, acc in curve:
                    fp.write(f"{name},{value},{acc:.4f}\n")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="canpath", description=__doc__)
    parser.add_argument("--version", action="version", version=f"canpath {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rewheel", help="rank likely steering-angle IDs in a wiggle log")
    p.add_argument("log")
    p.add_argument("--ceiling", default="300", help="hex ID ceiling (default 300)")
    p.add_argument("--strict", action="store_true", help="abort on unparseable lines")
    p.add_argument("--csv", action="store_true", help="emit CSV instead of a table")
    p.add_argument("--out", help="write the report to a file")
    p.set_defaults(func=_cmd_rewheel)

    p = sub.add_parser("decode", help="decode a log into an angle/speed time-series CSV")
    p.add_argument("log")
    p.add_argument("--strict", action="store_true", help="abort on unparseable lines")
    p.add_argument("--model", help="known vehicle model")
    p.add_argument("--decoder-file", help="decoder sheet file")
    p.add_argument("--wheelbase", type=float)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("logfilter", help="keep only OBD responses and one steering ID")
    p.add_argument("log")
    p.add_argument("--strict", action="store_true", help="abort on unparseable lines")
    p.add_argument("--swa-id", required=True, help="steering-angle CAN ID in hex")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_logfilter)

    p = sub.add_parser("infer", help="reconstruct the driven path from a log")
    p.add_argument("log")
    p.add_argument("--strict", action="store_true", help="abort on unparseable lines")
    p.add_argument("--start", required=True, help="lat,lon,bearing at departure")
    p.add_argument("--model")
    p.add_argument("--decoder-file")
    p.add_argument("--wheelbase", type=float)
    p.add_argument("--steer-max", type=float, dest="steer_max")
    p.add_argument("--params", help="t_window=0.1,speed_max=50,... overrides")
    p.add_argument("--matcher", help="internal:<graph file> | external:<url> | none")
    p.add_argument("--out", help="output GPX (default: <log>_inferred.gpx)")
    p.add_argument("--report", help="write the diagnostics report to a file")
    p.set_defaults(func=_cmd_infer)

    p = sub.add_parser("compare", help="similarity of two GPX tracks")
    p.add_argument("gpx_a")
    p.add_argument("gpx_b")
    p.add_argument("--epsilon", type=float, default=10.0, help="match distance in meters")
    p.add_argument("--spacing", type=float, default=None, help="resample spacing in meters")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("synth", help="simulate a scenario file into a log + truth GPX")
    p.add_argument("scenario")
    p.add_argument("--out-dir")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("tune", help="grid-search inference parameters over logged tracks")
    p.add_argument("manifest")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="write the grid CSV to a file")
    p.add_argument("--marginals", help="write per-parameter curves to a file")
    p.set_defaults(func=_cmd_tune)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except BrokenPipeError:
        # downstream consumer (e.g. head) closed the pipe; exit quietly
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0
    except UsageError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return 2
    except (
        LogParseError,
        GraphFormatError,
        GpxError,
        InferenceError,
        ScenarioError,
        MatchServiceError,
        FileNotFoundError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

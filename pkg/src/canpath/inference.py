"""End-to-end path reconstruction from a filtered CAN log.

The log is cut into fixed windows anchored at the first frame. Each window
averages the decoded steering angles and OBD speeds (holding the previous
value when a category has no frames), advances the pose with the bicycle
model plus a geodesic forward step, and buffers the dead-reckoned point.
Every max_interpolation_points windows the buffer is snapped to the road
network; the length difference between the snapped and dead-reckoned
polylines is carried into the next window's travel so the track does not
fall behind.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

from .canlog import CanFrame
from .geokin import (
    LatLon,
    VehiclePose,
    VehicleSpec,
    apply_heading,
    geodesic_forward,
    geodesic_inverse,
    kinematic_step,
    polyline_length,
)
from .mapmatch import UnmatchedGapError
from .obd import decode_speed_response
from .reveng import AngleDecodeError, AngleDecoder, decode_angle
from .trackeval import Track, write_gpx


class InferenceError(ValueError):
    pass


@dataclass(frozen=True)
class InferenceParams:
    t_window: float = 0.1  # seconds
    speed_max: float = 50.0  # km/h; faster windows are forced straight
    steer_max: float = 35.0  # degrees; physical steering limit
    max_interpolation_points: int = 30  # windows per map-matching batch

    def __post_init__(self):
        if self.t_window <= 0 or self.speed_max <= 0 or self.max_interpolation_points <= 0:
            raise ValueError("all inference parameters must be positive")
        if not 0 < self.steer_max <= 90:
            raise ValueError("steer_max must be in (0, 90] degrees")


@dataclass(frozen=True)
class WindowAggregate:
    avg_angle_deg: float
    avg_speed_ms: float
    angle_samples: int = 0
    speed_samples: int = 0


@dataclass
class InferenceState:
    pose: VehiclePose
    carry_distance: float = 0.0
    pending_points: list[LatLon] = field(default_factory=list)
    window_counter: int = 0
    inferred_track: list[LatLon] = field(default_factory=list)


@dataclass
class Diagnostics:
    windows: int = 0
    batches_matched: int = 0
    fallback_spans: list[tuple[int, int]] = field(default_factory=list)
    total_carry: float = 0.0

    def report(self) -> str:
        lines = [
            f"windows processed: {self.windows}",
            f"batches matched: {self.batches_matched}",
            f"fallback spans: {len(self.fallback_spans)}",
        ]
        for start, end in self.fallback_spans:
            lines.append(f"  raw points kept for track indices {start}-{end}")
        lines.append(f"total carry distance: {self.total_carry:.2f} m")
        return "\n".join(lines) + "\n"


@dataclass
class InferenceResult:
    track: Track
    gpx: str
    diagnostics: Diagnostics


def window_aggregate(
    frames: Sequence[CanFrame], decoder: AngleDecoder, previous: WindowAggregate
) -> WindowAggregate:
    """Mean decoded angle (degrees) and speed (m/s) over one window.

    OBD responses arrive slower than angle broadcasts, so a category with
    no frames inherits the previous window's value instead of zeroing out.
    """
    angles = []
    speeds = []
    for frame in frames:
        if frame.id == decoder.id:
            try:
                angles.append(decode_angle(decoder, frame).angle_deg)
            except AngleDecodeError:
                continue
        else:
            reading = decode_speed_response(frame)
            if reading is not None:
                speeds.append(reading.speed_kmh)
    avg_angle = sum(angles) / len(angles) if angles else previous.avg_angle_deg
    avg_speed = (sum(speeds) / len(speeds)) / 3.6 if speeds else previous.avg_speed_ms
    return WindowAggregate(
        avg_angle_deg=avg_angle,
        avg_speed_ms=avg_speed,
        angle_samples=len(angles),
        speed_samples=len(speeds),
    )


def clamp_steer(angle_deg: float, steer_max: float) -> float:
    return max(-steer_max, min(steer_max, angle_deg))


def straighten_if_fast(
    pose: VehiclePose,
    prev_window_start: LatLon | None,
    speed_ms: float,
    speed_max_kmh: float,
) -> VehiclePose:
    """Above the turning speed limit, force the bearing to the previous
    window's travel direction: a car cannot turn at that speed."""
    if prev_window_start is None:
        return pose
    if speed_ms * 3.6 <= speed_max_kmh + 1e-9:
        return pose
    distance, bearing = geodesic_inverse(prev_window_start, pose.position)
    if distance <= 0.0:
        return pose
    return replace(pose, bearing=bearing)


def infer_path(
    frames: Sequence[CanFrame],
    decoder: AngleDecoder,
    vehicle: VehicleSpec,
    start: VehiclePose,
    params: InferenceParams | None = None,
    matcher=None,
) -> InferenceResult:
    """Reconstruct the driven path from a steering+speed CAN log.

    ``matcher`` is any object with ``match(points) -> MatchResult`` (see
    mapmatch.GraphMatcher / ExternalMatcher); None disables snapping and
    yields the raw dead-reckoned track. Output is deterministic: identical
    inputs produce identical GPX bytes. When a batch cannot be matched the
    raw points are kept and noted in the diagnostics; the run never aborts
    mid-track.
    """
    params = params or InferenceParams()
    if not frames:
        raise InferenceError("empty log: nothing to infer")
    frames = sorted(frames, key=lambda f: f.timestamp)

    def decodable(frame: CanFrame) -> bool:
        if frame.id != decoder.id:
            return False
        try:
            decode_angle(decoder, frame)
        except AngleDecodeError:
            return False
        return True

    if not any(decodable(f) for f in frames):
        raise InferenceError(f"no decodable steering frames for ID 0x{decoder.id:03X}")

    t0 = frames[0].timestamp
    t_end = frames[-1].timestamp
    n_windows = int((t_end - t0) / params.t_window) + 1

    state = InferenceState(pose=start)
    diag = Diagnostics()
    aggregate = WindowAggregate(avg_angle_deg=0.0, avg_speed_ms=0.0)
    prev_window_start: LatLon | None = None
    frame_idx = 0

    def flush_batch() -> None:
        nonlocal state, prev_window_start
        if not state.pending_points:
            return
        if matcher is None:
            state.inferred_track.extend(state.pending_points)
        else:
            first = len(state.inferred_track)
            try:
                result = matcher.match(list(state.pending_points))
            except UnmatchedGapError:
                state.inferred_track.extend(state.pending_points)
                diag.fallback_spans.append((first, len(state.inferred_track) - 1))
            else:
                state.inferred_track.extend(result.matched_points)
                carry = abs(
                    polyline_length(result.matched_points) - polyline_length(state.pending_points)
                )
                state.carry_distance = carry
                diag.total_carry += carry
                diag.batches_matched += 1
                last_lat, last_lon = result.matched_points[-1]
                state.pose = VehiclePose(last_lat, last_lon, state.pose.bearing)
                # The previous window's travel chord must share the snapped
                # frame, or the straightening correction whips the bearing
                # around the snap discontinuity. The matched images of the
                # last two window positions give the on-road chord.
                if len(result.matched_points) >= 2:
                    prev_window_start = result.matched_points[-2]
                else:
                    prev_window_start = None
        state.pending_points.clear()

    for k in range(n_windows):
        window_end = t0 + (k + 1) * params.t_window
        window_frames = []
        while frame_idx < len(frames) and frames[frame_idx].timestamp < window_end:
            window_frames.append(frames[frame_idx])
            frame_idx += 1
        if k == n_windows - 1:
            # the final frame sits exactly on the last window's closing edge
            while frame_idx < len(frames):
                window_frames.append(frames[frame_idx])
                frame_idx += 1

        aggregate = window_aggregate(window_frames, decoder, aggregate)
        distance = aggregate.avg_speed_ms * params.t_window
        if state.carry_distance > 0:
            distance += state.carry_distance
            state.carry_distance = 0.0

        angle = clamp_steer(aggregate.avg_angle_deg, params.steer_max)
        step = kinematic_step(aggregate.avg_speed_ms, angle, vehicle.wheelbase, params.t_window)
        state.pose = apply_heading(state.pose, step.heading_delta)
        window_start = state.pose.position
        state.pose = straighten_if_fast(
            state.pose, prev_window_start, aggregate.avg_speed_ms, params.speed_max
        )
        lat, lon = geodesic_forward(state.pose, distance)
        state.pose = VehiclePose(lat, lon, state.pose.bearing)
        state.pending_points.append((lat, lon))
        prev_window_start = window_start
        state.window_counter += 1
        diag.windows += 1

        if len(state.pending_points) >= params.max_interpolation_points:
            flush_batch()

    flush_batch()

    track = Track(points=tuple(state.inferred_track))
    return InferenceResult(track=track, gpx=write_gpx(track), diagnostics=diag)

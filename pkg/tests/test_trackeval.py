import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from canpath.geokin import geodesic_inverse
from canpath.trackeval import (
    GpxError,
    Track,
    compare_tracks,
    comparison_csv_row,
    nw_align,
    read_gpx,
    resample_track,
    write_gpx,
)

from helpers import DEG_M, brute_force_nw_score

BASE = (44.65, 10.92)
M_LAT = 1.0 / DEG_M  # degrees per meter of northing


def track_from_meters(*offsets_m):
    """Track whose points sit offsets_m meters east of a base point."""
    lat0, lon0 = BASE
    m_lon = 1.0 / (DEG_M * math.cos(math.radians(lat0)))
    return Track(points=tuple((lat0, lon0 + d * m_lon) for d in offsets_m))


# -- GPX I/O ---------------------------------------------------------------------


def test_gpx_roundtrip_three_points():
    track = Track(points=((44.65, 10.92), (44.6501, 10.9201), (44.6502, 10.9202)))
    back = read_gpx(write_gpx(track))
    for got, want in zip(back.points, track.points):
        assert got == pytest.approx(want, abs=1e-7)


def test_gpx_write_is_idempotent():
    track = Track(points=((44.65, 10.92), (44.6501, 10.9201)))
    once = write_gpx(read_gpx(write_gpx(track)))
    twice = write_gpx(read_gpx(once))
    assert once == twice


def test_gpx_multi_segment_concatenates():
    text = """<?xml version="1.0"?>
<gpx version="1.1" creator="x" xmlns="http://www.topografix.com/GPX/1/1">
 <trk><trkseg>
  <trkpt lat="44.65" lon="10.92"/><trkpt lat="44.651" lon="10.921"/>
 </trkseg><trkseg>
  <trkpt lat="44.652" lon="10.922"/><trkpt lat="44.653" lon="10.923"/><trkpt lat="44.654" lon="10.924"/>
 </trkseg></trk>
</gpx>"""
    assert len(read_gpx(text)) == 5


def test_gpx_missing_lon_is_an_error():
    text = """<gpx version="1.1"><trk><trkseg>
      <trkpt lat="44.65"/>
    </trkseg></trk></gpx>"""
    with pytest.raises(GpxError, match="trkpt 0: missing lon"):
        read_gpx(text)


def test_gpx_malformed_markup():
    with pytest.raises(GpxError, match="malformed"):
        read_gpx("<gpx><trk>")


def test_gpx_times_roundtrip():
    track = Track(points=((44.65, 10.92), (44.651, 10.921)), times=(0.0, 1.0))
    back = read_gpx(write_gpx(track))
    assert back.times == (0.0, 1.0)


# -- alignment -------------------------------------------------------------------


def test_identical_tracks_align_fully():
    track = track_from_meters(0, 20, 40)
    result = nw_align(track, track)
    assert result.matched_pairs == 3
    assert result.accuracy == 1.0
    assert result.score == 3
    assert result.flags_a == (True, True, True)


def test_middle_point_off_by_50m():
    a = track_from_meters(0, 20, 40)
    b = Track(points=(a.points[0], (a.points[1][0] + 50 * M_LAT, a.points[1][1]), a.points[2]))
    result = nw_align(a, b)
    # hand enumeration over length-3 alignments: pairing all three scores
    # +1-1+1=1 and beats any gapped alternative; two pairs match
    assert result.matched_pairs == 2
    assert result.accuracy == pytest.approx(2 / 3)
    assert result.score == 1


def test_empty_vs_track():
    empty = Track(points=())
    full = track_from_meters(0, 20, 40)
    result = nw_align(empty, full)
    assert result.matched_pairs == 0
    assert result.accuracy == 0.0
    assert result.score == -3


def test_both_empty_tracks_are_identical():
    result = nw_align(Track(points=()), Track(points=()))
    assert result.accuracy == 1.0


def test_alignment_result_consistency():
    a = track_from_meters(0, 15, 30, 45)
    b = track_from_meters(0, 30, 45)
    result = nw_align(a, b)
    # score of the traceback equals the DP optimum: matched - mismatched - gaps
    assert result.score == 2 * result.matched_pairs - result.aligned_length
    assert result.matched_pairs <= min(len(a), len(b))


def _random_track(rng, n):
    lat0, lon0 = BASE
    pts = []
    for _ in range(n):
        pts.append((lat0 + rng.uniform(-30, 30) * M_LAT, lon0 + rng.uniform(-30, 30) * M_LAT))
    return Track(points=tuple(pts))


def test_dp_score_equals_enumeration_on_random_pairs():
    rng = random.Random(42)
    for _ in range(40):
        a = _random_track(rng, rng.randint(0, 6))
        b = _random_track(rng, rng.randint(0, 6))
        if len(a) == 0 and len(b) == 0:
            continue
        got = nw_align(a, b).score
        want = brute_force_nw_score(a, b, 10.0)
        assert got == want


def test_accuracy_symmetry():
    rng = random.Random(99)
    for _ in range(20):
        a = _random_track(rng, rng.randint(1, 6))
        b = _random_track(rng, rng.randint(1, 6))
        assert nw_align(a, b).accuracy == pytest.approx(nw_align(b, a).accuracy)


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_accuracy_monotone_in_epsilon(data):
    rng = random.Random(data.draw(st.integers(min_value=0, max_value=10_000)))
    a = _random_track(rng, rng.randint(1, 6))
    b = _random_track(rng, rng.randint(1, 6))
    accs = [nw_align(a, b, match_epsilon=eps).accuracy for eps in (40.0, 20.0, 10.0, 5.0)]
    assert all(x >= y - 1e-12 for x, y in zip(accs, accs[1:]))


def test_self_accuracy_one_for_any_nonempty():
    rng = random.Random(7)
    for n in range(1, 7):
        track = _random_track(rng, n)
        assert nw_align(track, track).accuracy == 1.0


# -- resampling & comparison ---------------------------------------------------------


def test_resample_spacing_and_endpoints():
    track = track_from_meters(0, 100)
    resampled = resample_track(track, 10.0)
    assert len(resampled) == 11
    assert resampled.points[0] == track.points[0]
    assert resampled.points[-1] == pytest.approx(track.points[-1], abs=1e-12)
    for p, q in zip(resampled.points, resampled.points[1:]):
        assert geodesic_inverse(p, q)[0] == pytest.approx(10.0, abs=0.01)


def test_resample_short_track_unchanged():
    track = track_from_meters(5)
    assert resample_track(track, 10.0).points == track.points


def test_compare_tracks_rate_invariant():
    dense = track_from_meters(*range(0, 501, 1))  # one point per meter
    sparse = track_from_meters(*range(0, 501, 25))  # one per 25 m
    raw = nw_align(dense, sparse)
    assert raw.accuracy < 0.1  # raw alignment is dominated by the count ratio
    result = compare_tracks(dense, sparse)
    assert result.accuracy == 1.0


def test_compare_tracks_separates_real_divergence():
    a = track_from_meters(*range(0, 501, 10))
    lat0, lon0 = BASE
    m_lon = 1.0 / (DEG_M * math.cos(math.radians(lat0)))
    # same start, veers 100 m north over the second half
    points = []
    for d in range(0, 501, 10):
        north = max(0, d - 250) * 0.4
        points.append((lat0 + north * M_LAT, lon0 + d * m_lon))
    b = Track(points=tuple(points))
    result = compare_tracks(a, b)
    assert result.accuracy < 0.8


def test_comparison_csv_row():
    track = track_from_meters(0, 1000)
    row = comparison_csv_row("demo", track, nw_align(track, track))
    assert row == "demo,1.000,1.0000"


def test_compare_tracks_can_match_both_sides_first():
    from canpath.mapmatch import GraphMatcher, MatcherConfig
    from helpers import offset_point, straight_graph

    graph = straight_graph()
    # both recordings of the same drive, with opposite lateral GPS bias
    a = Track(points=tuple(offset_point(graph, 1, d, north_m=6.0) for d in range(0, 201, 10)))
    b = Track(points=tuple(offset_point(graph, 1, d, north_m=-6.0) for d in range(0, 201, 10)))
    biased = compare_tracks(a, b, match_epsilon=10.0)
    snapped = compare_tracks(a, b, match_epsilon=10.0, matcher=GraphMatcher(graph, MatcherConfig()))
    assert snapped.accuracy == 1.0
    assert snapped.accuracy >= biased.accuracy

import pytest

from canpath.inference import InferenceParams
from canpath.scenarios import merge_graphs, tuning_graph, tuning_suite, turn_left_90
from canpath.synthgen import simulate
from canpath.tuner import (
    DEFAULT_GRIDS,
    GridRow,
    TuneTrack,
    evaluate_track,
    find_row,
    grid_search,
    marginal_curves,
    rows_to_csv,
)


def _track_for(scenario):
    sim = simulate(scenario)
    return TuneTrack(
        name=scenario.name,
        frames=tuple(sim.frames),
        truth=sim.truth,
        start=sim.start,
        decoder=scenario.decoder,
        vehicle=scenario.vehicle,
    )


SMALL_GRIDS = {
    "t_window": (0.1, 1.0),
    "speed_max": (50.0,),
    "steer_max": (35.0,),
    "max_interpolation_points": (10, 30),
}


@pytest.fixture(scope="module")
def one_track():
    scenario = turn_left_90()
    return _track_for(scenario), scenario.graph


def test_single_combination_single_track(one_track):
    track, graph = one_track
    rows = grid_search(
        [track],
        graph,
        grids={
            "t_window": (0.1,),
            "speed_max": (50.0,),
            "steer_max": (35.0,),
            "max_interpolation_points": (30,),
        },
    )
    assert len(rows) == 1
    assert rows[0].params == InferenceParams()
    assert rows[0].mean_accuracy > 0.9


def test_row_count_equals_grid_product(one_track):
    track, graph = one_track
    rows = grid_search([track], graph, grids=SMALL_GRIDS)
    assert len(rows) == 2 * 1 * 1 * 2
    assert rows == sorted(rows, key=lambda r: -r.mean_accuracy) or all(
        rows[i].mean_accuracy >= rows[i + 1].mean_accuracy for i in range(len(rows) - 1)
    )


def test_default_grids_shape():
    sizes = [len(v) for v in DEFAULT_GRIDS.values()]
    assert sorted(sizes) == [4, 5, 5, 5]
    product = 1
    for s in sizes:
        product *= s
    assert product == 500


def test_failed_track_scores_zero(one_track):
    track, graph = one_track
    broken = TuneTrack(
        name="no-steering",
        frames=tuple(f for f in track.frames if f.id != track.decoder.id),
        truth=track.truth,
        start=track.start,
        decoder=track.decoder,
        vehicle=track.vehicle,
    )
    rows = grid_search(
        [track, broken],
        graph,
        grids={
            "t_window": (0.1,),
            "speed_max": (50.0,),
            "steer_max": (35.0,),
            "max_interpolation_points": (30,),
        },
    )
    assert rows[0].per_track[1] == 0.0
    assert rows[0].per_track[0] > 0.9
    assert rows[0].mean_accuracy == pytest.approx(rows[0].per_track[0] / 2)


def test_parallel_equals_serial():
    suite = tuning_suite()
    graph = tuning_graph(suite)
    tracks = [_track_for(sc) for sc in suite]
    serial = grid_search(tracks, graph, grids=SMALL_GRIDS, workers=1)
    parallel = grid_search(tracks, graph, grids=SMALL_GRIDS, workers=2)
    assert serial == parallel


def test_find_row_and_marginals(one_track):
    track, graph = one_track
    rows = grid_search([track], graph, grids=SMALL_GRIDS)
    row = find_row(rows, t_window=1.0, max_interpolation_points=10)
    assert row is not None and row.params.t_window == 1.0
    curves = marginal_curves(rows, SMALL_GRIDS)
    assert [v for v, _ in curves["t_window"]] == [0.1, 1.0]
    assert len(curves["max_interpolation_points"]) == 2


def test_csv_shape(one_track):
    track, graph = one_track
    rows = grid_search([track], graph, grids=SMALL_GRIDS)
    lines = rows_to_csv(rows).strip().splitlines()
    assert lines[0] == "t_window,speed_max,steer_max,max_interpolation_points,mean_accuracy"
    assert len(lines) == 1 + len(rows)
    assert all(line.count(",") == 4 for line in lines[1:])


def test_grid_search_requires_tracks(one_track):
    _track, graph = one_track
    with pytest.raises(ValueError):
        grid_search([], graph)

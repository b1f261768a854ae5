"""Shared test fixtures and independent brute-force oracles.

The oracles search exhaustively (candidate-sequence products, alignment
enumeration, simple-path enumeration) so the dynamic programs they check
cannot share their search strategy.
"""

from __future__ import annotations

import itertools
import math

from canpath.geokin import EARTH_RADIUS_M, geodesic_inverse
from canpath.mapmatch import MatcherConfig, candidates_for_point, sequence_logweight
from canpath.roadgraph import RoadGraph
from canpath.scenarios import ORIGIN, PathBuilder, assemble_graph
from canpath.trackeval import GAP_SCORE, MATCH_SCORE, MISMATCH_SCORE, Track

DEG_M = EARTH_RADIUS_M * math.pi / 180.0  # meters per degree of latitude

# -- tiny graphs ------------------------------------------------------------------


def straight_graph() -> RoadGraph:
    """One 200 m east-west edge."""
    pb = PathBuilder(heading=90.0)
    return assemble_graph({1: pb.straight(200).take()})


def two_edge_straight() -> RoadGraph:
    """A straight road split into two collinear edges of 100 m."""
    pb = PathBuilder(heading=90.0)
    return assemble_graph({1: pb.straight(100).take(), 2: pb.straight(100).take()})


def y_junction() -> RoadGraph:
    """100 m stem north, then left and right branches at 45 degrees."""
    pb = PathBuilder(heading=0.0)
    stem = pb.straight(100).take()
    left = pb.branch(heading=315.0).straight(100).take()
    right = pb.branch(heading=45.0).straight(100).take()
    return assemble_graph({1: stem, 2: left, 3: right})


def grid3() -> RoadGraph:
    """3x3 street grid, 100 m spacing; edge ids: horizontal 1-6, vertical 7-12."""
    paths = {}
    edge_id = 1
    for row in range(3):
        for col in range(2):
            a = (100.0 * col, 100.0 * row)
            b = (100.0 * (col + 1), 100.0 * row)
            paths[edge_id] = [a, b]
            edge_id += 1
    for col in range(3):
        for row in range(2):
            a = (100.0 * col, 100.0 * row)
            b = (100.0 * col, 100.0 * (row + 1))
            paths[edge_id] = [a, b]
            edge_id += 1
    return assemble_graph(paths)


def triangle_graph() -> RoadGraph:
    """3-4-5 triangle: sides 300, 400, 500 m."""
    a, b, c = (0.0, 0.0), (300.0, 0.0), (0.0, 400.0)
    return assemble_graph({1: [a, b], 2: [a, c], 3: [b, c]})


def arc_graph(radius: float = 30.0) -> RoadGraph:
    """Single edge: 40 m in, a 180-degree arc, 40 m out."""
    pb = PathBuilder(heading=0.0)
    return assemble_graph({1: pb.straight(40).arc(radius, 180).straight(40).take()})


def offset_point(graph: RoadGraph, edge_id: int, offset_m: float, east_m: float = 0.0, north_m: float = 0.0):
    """A lat/lon near an edge: the point at offset_m along it, nudged east/north."""
    lat, lon = graph.point_at_offset(edge_id, offset_m)
    dlat = north_m / DEG_M
    dlon = east_m / (DEG_M * math.cos(math.radians(lat)))
    return (lat + dlat, lon + dlon)


# -- brute-force oracles ------------------------------------------------------------


def brute_force_best_match_score(graph: RoadGraph, points, config: MatcherConfig) -> float:
    """Best HMM log-weight over ALL candidate assignments, by enumeration."""
    candidate_lists = [candidates_for_point(graph, lat, lon, config) for lat, lon in points]
    assert all(candidate_lists), "oracle fixture must have candidates everywhere"
    best = -math.inf
    for chosen in itertools.product(*candidate_lists):
        best = max(best, sequence_logweight(graph, points, chosen, config))
    return best


def match_score_of_result(graph: RoadGraph, points, result, config: MatcherConfig) -> float:
    """Log-weight of a matcher's returned edge sequence, rebuilt from candidates."""
    chosen = []
    for (lat, lon), edge_id in zip(points, result.edge_ids):
        cands = [c for c in candidates_for_point(graph, lat, lon, config) if c.edge_id == edge_id]
        assert len(cands) == 1
        chosen.append(cands[0])
    return sequence_logweight(graph, points, chosen, config)


def brute_force_nw_score(a: Track, b: Track, epsilon: float) -> int:
    """Best global alignment score, taken as the max over the full enumeration."""
    return max(enumerate_alignment_scores(a, b, epsilon))


def enumerate_alignment_scores(a: Track, b: Track, epsilon: float) -> list[int]:
    """Scores of every complete alignment (no memoization), for small tracks."""
    pa, pb = a.points, b.points
    scores: list[int] = []

    def walk(i: int, j: int, acc: int) -> None:
        if i == len(pa) and j == len(pb):
            scores.append(acc)
            return
        if i < len(pa) and j < len(pb):
            s = MATCH_SCORE if geodesic_inverse(pa[i], pb[j])[0] <= epsilon else MISMATCH_SCORE
            walk(i + 1, j + 1, acc + s)
        if i < len(pa):
            walk(i + 1, j, acc + GAP_SCORE)
        if j < len(pb):
            walk(i, j + 1, acc + GAP_SCORE)

    walk(0, 0, 0)
    return scores


def all_simple_path_distances(graph: RoadGraph, start_node: int, end_node: int) -> list[float]:
    """Lengths of every simple node path between two nodes (DFS enumeration)."""
    out: list[float] = []

    def dfs(node: int, seen: set[int], acc: float) -> None:
        if node == end_node:
            out.append(acc)
            return
        for edge in graph.edges.values():
            steps = [(edge.node_from, edge.node_to)]
            if edge.bidirectional:
                steps.append((edge.node_to, edge.node_from))
            for u, v in steps:
                if u == node and v not in seen:
                    dfs(v, seen | {v}, acc + edge.length_m)

    dfs(start_node, {start_node}, 0.0)
    return out

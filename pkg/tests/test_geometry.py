from __future__ import annotations

import json
import math
import random
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from expmem.errors import InvalidInput, NoFeasibleGrasp
from expmem.geometry import (
    AnnotatedView,
    Candidate,
    CandidateSet,
    GraspHypothesis,
    Point2,
    RasterMask,
    Reachability,
    annotate,
    best_grasp_index,
    candidate_placements,
    candidate_push_endpoints,
    farthest_point_sample,
    location_score,
    select_grasp,
)

coords = st.integers(min_value=-50, max_value=50)
point_lists = st.lists(st.builds(Point2, coords, coords), min_size=1, max_size=64)


def always(_g) -> bool:
    return True


def line(*xs: float) -> list[Point2]:
    return [Point2(x, 0.0) for x in xs]


# farthest_point_sample


def test_fps_k1_returns_seed():
    assert farthest_point_sample(line(0, 1, 2), 1, 0) == [0]


def test_fps_three_collinear_points():
    # after 0, point 2 is at distance 2 and point 1 at distance 1
    assert farthest_point_sample(line(0, 1, 2), 3, 0) == [0, 2, 1]


def test_fps_ties_go_to_lowest_index():
    # points 0 and 2 are both at distance 1 from the seed
    assert farthest_point_sample(line(-1, 0, 1), 2, 1) == [1, 0]


def test_fps_rejects_bad_input():
    with pytest.raises(InvalidInput):
        farthest_point_sample([], 1, 0)
    with pytest.raises(InvalidInput):
        farthest_point_sample(line(0, 1), 3, 0)
    with pytest.raises(InvalidInput):
        farthest_point_sample(line(0, 1), 1, 5)


def _min_dist(p: Point2, chosen: list[Point2]) -> float:
    return min((p.x - q.x) ** 2 + (p.y - q.y) ** 2 for q in chosen)


@given(point_lists, st.data())
def test_fps_greedy_maximin_property(points, data):
    k = data.draw(st.integers(1, len(points)))
    seed = data.draw(st.integers(0, len(points) - 1))
    order = farthest_point_sample(points, k, seed)
    assert order[0] == seed
    assert len(set(order)) == k
    assert all(0 <= i < len(points) for i in order)
    for step in range(1, k):
        chosen = [points[i] for i in order[:step]]
        j = order[step]
        rest = [i for i in range(len(points)) if i not in order[:step]]
        best = max(_min_dist(points[i], chosen) for i in rest)
        assert _min_dist(points[j], chosen) == best
        # lowest index among the maximisers
        assert j == min(i for i in rest if _min_dist(points[i], chosen) == best)


@given(point_lists)
def test_fps_exhaustion_is_a_permutation(points):
    assert sorted(farthest_point_sample(points, len(points), 0)) == list(range(len(points)))


@given(point_lists)
def test_fps_deterministic(points):
    k = len(points)
    assert farthest_point_sample(points, k, 0) == farthest_point_sample(points, k, 0)


# candidate_placements


def test_placements_single_cell_clamps_k():
    mask = RasterMask(1, 1, [True])
    cands = candidate_placements(mask, 3)
    assert cands.labels == [1]
    assert cands.location(1) == Point2(0, 0)


def test_placements_strip():
    # cells x=0..9, centroid 4.5: x=4 and x=5 tie, the first (4) seeds;
    # the farthest cell from 4 is 9
    mask = RasterMask(10, 1, [True] * 10)
    cands = candidate_placements(mask, 2)
    assert [c.location for c in cands] == [Point2(4, 0), Point2(9, 0)]


def test_placements_full_square_center():
    cands = candidate_placements(RasterMask(3, 3, [True] * 9), 1)
    assert cands.location(1) == Point2(1, 1)


def test_placements_reject_empty_mask():
    with pytest.raises(InvalidInput):
        candidate_placements(RasterMask(4, 4), 2)


@given(st.lists(st.booleans(), min_size=24, max_size=24).filter(any), st.integers(1, 8))
def test_placements_inside_mask(bits, k):
    mask = RasterMask(6, 4, bits)
    cands = candidate_placements(mask, k)
    assert cands.labels == list(range(1, min(k, mask.count) + 1))
    for c in cands:
        assert mask.contains(c.location)
        assert c.mask.contains(c.location)


# candidate_push_endpoints


def test_push_right_unit_step():
    cands = candidate_push_endpoints(Point2(5, 5), "right", 1, 3)
    assert cands.labels == [1, 2, 3]
    assert [c.location for c in cands] == [Point2(6, 5), Point2(7, 5), Point2(8, 5)]


def test_push_left_step_two():
    cands = candidate_push_endpoints(Point2(5, 5), "left", 2, 2)
    assert [c.location.x for c in cands] == [3, 1]


def test_push_half_steps():
    cands = candidate_push_endpoints(Point2(0, 0), "right", 0.5, 4)
    assert [c.location.x for c in cands] == [0.5, 1.0, 1.5, 2.0]


@pytest.mark.parametrize("direction,step,count", [("up", 1, 1), ("left", 0, 1), ("right", -1, 1), ("right", 1, 0)])
def test_push_rejects_bad_input(direction, step, count):
    with pytest.raises(InvalidInput):
        candidate_push_endpoints(Point2(0, 0), direction, step, count)


# location_score


def _g(x: float, y: float, conf: float = 0.5, approach: str = "top") -> GraspHypothesis:
    return GraspHypothesis(Point2(x, y), approach, conf)


def test_location_score_examples():
    assert location_score(_g(3, 4), Point2(3, 4), 10) == 1.0
    assert location_score(_g(0, 0), Point2(3, 4), 5) == 0.0
    assert location_score(_g(0, 0), Point2(1, 0), 4) == 0.75


def test_location_score_rejects_nonpositive_diag():
    with pytest.raises(InvalidInput):
        location_score(_g(0, 0), Point2(0, 0), 0)


@given(coords, coords, coords, coords, st.floats(0.1, 200))
def test_location_score_range(x, y, cx, cy, diag):
    s = location_score(_g(x, y), Point2(cx, cy), diag)
    assert 0.0 <= s <= 1.0
    assert (s == 1.0) == ((x, y) == (cx, cy))


@given(st.floats(-1, 1), st.floats(-1, 1), st.lists(st.floats(0, 100), min_size=2, max_size=10))
def test_location_score_decreasing_along_ray(dx, dy, ts):
    norm = math.hypot(dx, dy)
    if norm < 1e-3:
        return
    ux, uy = dx / norm, dy / norm
    scores = [location_score(_g(t * ux, t * uy), Point2(0, 0), 50.0) for t in sorted(ts)]
    assert all(a >= b for a, b in zip(scores, scores[1:]))


# select_grasp


def test_select_singleton():
    g = _g(1, 1, 0.3)
    assert select_grasp([g], always) is g


def test_select_location_beats_confidence():
    # products 0.9 * 0.1 = 0.09 against 0.5 * 1.0 = 0.5
    far = _g(9, 0, 0.9)
    near = _g(0, 0, 0.5)
    assert select_grasp([far, near], always, Point2(0, 0), 10) is near


def test_select_without_location_is_confidence_argmax():
    hyps = [_g(0, 0, 0.2), _g(1, 0, 0.8), _g(2, 0, 0.5)]
    assert best_grasp_index(hyps, always) == 1


def test_select_no_feasible():
    with pytest.raises(NoFeasibleGrasp):
        select_grasp([_g(0, 0, 0.9)], lambda g: False)


def test_reachability_predicate():
    reach = Reachability((0, 0, 10, 10), {"top": ((0, 0, 2, 2),)})
    assert reach(_g(5, 5))
    assert not reach(_g(11, 5))
    assert not reach(_g(1, 1, approach="top"))
    assert reach(_g(1, 1, approach="side-left"))


def _drumstick(fixtures_dir: Path):
    data = json.loads((fixtures_dir / "drumstick.json").read_text())
    hyps = [GraspHypothesis(Point2(h["x"], h["y"]), h["approach"], h["confidence"]) for h in data["hypotheses"]]
    w, h = data["raster"]
    return hyps, Point2(*data["handle_cell"]), math.hypot(w, h)


def test_annotation_picks_handle_with_location_and_confidence_without(fixtures_dir):
    hyps, handle, diag = _drumstick(fixtures_dir)
    most_confident = max(hyps, key=lambda g: g.confidence)
    handle_proximal = min(hyps, key=lambda g: g.position.distance(handle))
    assert most_confident is not handle_proximal
    assert select_grasp(hyps, always) is most_confident
    assert select_grasp(hyps, always, handle, diag) is handle_proximal


instances = st.lists(
    st.tuples(coords, coords, st.floats(0, 1), st.sampled_from(["top", "side-left", "side-right"]), st.booleans()),
    min_size=1,
    max_size=32,
)


@given(instances, st.one_of(st.none(), st.tuples(coords, coords)), st.floats(1, 300))
def test_select_matches_exhaustive_oracle(rows, chosen, diag):
    hyps = [GraspHypothesis(Point2(x, y), a, c) for x, y, c, a, _ in rows]
    ok = {id(h) for h, row in zip(hyps, rows) if row[4]}
    feasible = lambda g: id(g) in ok  # noqa: E731
    loc = Point2(*chosen) if chosen else None
    if not ok:
        with pytest.raises(NoFeasibleGrasp):
            best_grasp_index(hyps, feasible, loc, diag)
        return
    scores = []
    for i, (x, y, c, _, f) in enumerate(rows):
        if not f:
            continue
        s_loc = 1.0 if loc is None else 1.0 - min(1.0, math.hypot(x - loc.x, y - loc.y) / diag)
        scores.append((-(c * s_loc), i))
    expected = min(scores)[1]
    got = best_grasp_index(hyps, feasible, loc, diag)
    assert got == expected
    assert rows[got][4]


@given(instances, st.tuples(coords, coords), st.floats(0.01, 1.0))
def test_select_invariant_under_confidence_scaling(rows, chosen, factor):
    # scale down so confidences stay in [0, 1]; use exact power-of-two factors
    # to avoid rounding flipping near-ties
    factor = 2.0 ** -round(-math.log2(factor))
    hyps = [GraspHypothesis(Point2(x, y), a, c) for x, y, c, a, _ in rows]
    scaled = [GraspHypothesis(h.position, h.approach_label, h.confidence * factor) for h in hyps]
    loc = Point2(*chosen)
    assert best_grasp_index(hyps, always, loc, 80.0) == best_grasp_index(scaled, always, loc, 80.0)


def test_infeasible_never_selected_even_if_most_confident():
    rng = random.Random(7)
    for _ in range(50):
        hyps = [_g(rng.randint(0, 40), rng.randint(0, 30), rng.random()) for _ in range(10)]
        best = max(range(10), key=lambda i: hyps[i].confidence)
        chosen = select_grasp(hyps, lambda g, b=hyps[best]: g is not b)
        assert chosen is not hyps[best]


# annotate


def test_annotate_empty():
    view = annotate(RasterMask(4, 4, [True] * 16), CandidateSet())
    assert view.labels == []


def test_annotate_labels_passthrough():
    base = RasterMask(5, 5, [True] * 25)
    cands = candidate_placements(base, 3)
    view = annotate(base, cands)
    assert view.labels == [1, 2, 3]
    for label in view.labels:
        assert view.candidates.location(label) == cands.location(label)


def test_annotate_round_trip():
    base = RasterMask(8, 6, [True] * 48)
    cands = candidate_placements(base, 4)
    view = annotate(base, cands, origin=Point2(2.5, 1))
    back = AnnotatedView.from_json(view.to_json())
    assert back == view
    assert [c.location for c in back.candidates] == [c.location for c in cands]


def test_candidate_set_rejects_bad_labels():
    with pytest.raises(InvalidInput):
        CandidateSet((Candidate(2, Point2(0, 0)),))


def test_mask_bits_length_checked():
    with pytest.raises(InvalidInput):
        RasterMask(2, 2, [True])

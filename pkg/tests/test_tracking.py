import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import greedy_oracle, total_distance
from tactip_lab import experiments, imagery, simulator as sim
from tactip_lab.imagery import FormatError, MarkerSet, ParameterError
from tactip_lab.tracking import (AugmentSpec, DataError, VectorField, average_vector, euclidean_distance,
                                 load_marker_model, match_points, predict_markers, read_marker_labels,
                                 save_marker_model, shift_frame, track, train_marker_model, vector_field,
                                 write_marker_labels, zoom_frame)

coords = st.floats(-50, 50, allow_nan=False).map(lambda v: round(v, 1))
point_sets = st.lists(st.tuples(coords, coords), min_size=0, max_size=8)


def test_distance_examples():
    assert euclidean_distance((0, 0), (0, 0)) == 0.0
    assert euclidean_distance((0, 0), (3, 4)) == 5.0


@given(st.tuples(coords, coords), st.tuples(coords, coords))
def test_distance_symmetric(a, b):
    assert euclidean_distance(a, b) == euclidean_distance(b, a) >= 0


def test_two_point_example():
    o = MarkerSet([(0, 0), (10, 0)])
    c = MarkerSet([(1, 0), (9, 0)])
    a = match_points(o, c, max_dist=5)
    assert a.pairs == [(0, 0), (1, 1)]
    field = vector_field(o, c, a)
    assert field.displacements.tolist() == [[1.0, 0.0], [-1.0, 0.0]]


def test_identical_sets_pair_by_identity():
    pts = np.random.default_rng(1).uniform(0, 100, (20, 2))
    a = match_points(MarkerSet(pts), MarkerSet(pts), max_dist=1.0)
    assert sorted(a.pairs) == [(i, i) for i in range(20)]
    assert not track(MarkerSet(pts), MarkerSet(pts), 1.0).displacements.any()


def test_empty_sets_leave_everything_unmatched():
    a = match_points(MarkerSet(np.zeros((0, 2))), MarkerSet([(1, 1)]), 3.0)
    assert a.pairs == [] and a.unmatched_currents == [0]
    with pytest.raises(ParameterError):
        match_points(MarkerSet([(0, 0)]), MarkerSet([(0, 0)]), 0.0)


def test_ties_prefer_lower_indices():
    o = MarkerSet([(0, 0), (2, 0)])
    c = MarkerSet([(1, 0)])
    assert match_points(o, c, 5).pairs == [(0, 0)]


@given(point_sets, point_sets, st.floats(0.5, 40))
def test_matches_greedy_oracle(o, c, max_dist):
    a = match_points(MarkerSet(o), MarkerSet(c), max_dist)
    want = greedy_oracle(o, c, max_dist)
    assert a.pairs == want


@given(point_sets, point_sets, st.floats(0.5, 40))
def test_assignment_is_partial_injection(o, c, max_dist):
    a = match_points(MarkerSet(o), MarkerSet(c), max_dist)
    used_o = [i for i, _ in a.pairs]
    used_c = [j for _, j in a.pairs]
    assert len(set(used_o)) == len(used_o) and len(set(used_c)) == len(used_c)
    assert sorted(used_o + a.unmatched_origins) == list(range(len(o)))
    assert sorted(used_c + a.unmatched_currents) == list(range(len(c)))
    assert all(math.dist(o[i], c[j]) <= max_dist for i, j in a.pairs)


@given(point_sets, point_sets, st.floats(0.5, 40), st.floats(0.1, 1.0))
def test_total_distance_shrinks_with_max_dist(o, c, max_dist, factor):
    wide = match_points(MarkerSet(o), MarkerSet(c), max_dist)
    narrow = match_points(MarkerSet(o), MarkerSet(c), max_dist * factor)
    assert total_distance(o, c, narrow.pairs) <= total_distance(o, c, wide.pairs) + 1e-9


@given(st.floats(-2, 2), st.floats(-2, 2))
def test_translation_adds_to_every_displacement(dx, dy):
    o = sim.rest_layout()
    field = track(MarkerSet(o), MarkerSet(o + [dx, dy]))
    assert field.count == len(o)
    assert np.allclose(field.displacements, [dx, dy])


@given(st.lists(st.tuples(coords, coords), min_size=1, max_size=10), st.floats(-3, 3))
def test_average_vector_is_linear(disp, k):
    d = np.array(disp)
    f = VectorField.from_displacements(np.zeros_like(d), d)
    g = VectorField.from_displacements(np.zeros_like(d), k * d)
    assert np.allclose(average_vector(g), k * np.array(average_vector(f)), atol=1e-9)


def test_average_vector_examples():
    f = VectorField.from_displacements(np.zeros((5, 2)), np.tile([2.0, 0.0], (5, 1)))
    assert average_vector(f) == (2.0, 0.0)
    with pytest.raises(ParameterError):
        average_vector(VectorField(np.zeros((0, 2)), np.zeros((0, 2))))


def test_vector_field_checks_indices():
    from tactip_lab.tracking import Assignment
    with pytest.raises(IndexError):
        vector_field(MarkerSet([(0, 0)]), MarkerSet([(1, 1)]), Assignment([(0, 3)]))


def test_central_press_averages_to_small_vector():
    rest = sim.rest_layout()
    s = sim.Simulator(sim.DEFAULT_CONFIG.noiseless(), seed=0)
    s.contact_centre = np.array([63.5, 63.5])
    res = None
    for a in sim.press_script(0.8).actions():
        res = s.step(a)
    field = VectorField(rest, res.positions)
    mags = np.hypot(*field.displacements.T)
    assert np.hypot(*average_vector(field)) < 0.1 * mags.mean()


def test_shift_and_zoom_frames():
    bits = np.zeros((9, 9), np.uint8)
    bits[4, 4] = 1
    moved = shift_frame(bits, 2, -1)
    assert moved[3, 6] == 1 and moved.sum() == 1
    assert np.array_equal(zoom_frame(bits, 1.0), bits)


def test_single_sample_interpolated_at_small_alpha():
    rng = np.random.default_rng(0)
    bits = (rng.random((64, 64)) > 0.7).astype(np.uint8)
    pts = rng.uniform(0, 64, (133, 2))
    model = train_marker_model([(bits, pts)] * 3, alpha=1e-8)
    assert np.allclose(predict_markers(model, bits).points, pts, atol=1e-6)


def test_marker_model_validates_inputs():
    bits = np.zeros((64, 64), np.uint8)
    with pytest.raises(DataError):
        train_marker_model([])
    with pytest.raises(DataError):
        train_marker_model([(bits, np.zeros((10, 2)))])
    with pytest.raises(ParameterError):
        train_marker_model([(bits, np.zeros((133, 2)))], alpha=0)


@pytest.fixture(scope="module")
def small_model():
    samples = experiments.marker_training_set(50, seed=5)
    return train_marker_model(samples, 150.0, AugmentSpec(copies=4, seed=5))


def test_marker_model_recovers_rest_and_translations(small_model):
    rest = sim.rest_layout()
    frame = sim.render(rest, sim.NOISY_CONFIG, np.random.default_rng(9))
    bits = imagery.adaptive_threshold(frame).bits
    pred = predict_markers(small_model, bits)
    assert pred.count == 133
    assert np.hypot(*(pred.points - rest).T).max() < 2.0
    errors = []
    for dx, dy in [(3, 0), (-4, 2), (0, -5), (6, 6)]:
        p = predict_markers(small_model, shift_frame(bits, dx, dy)).points
        errors.append(np.hypot(*(p - rest - [dx, dy]).T).mean())
    assert np.mean(errors) < 2.0


@given(st.integers(0, 2 ** 31))
def test_marker_model_always_returns_133(small_model, seed):
    bits = (np.random.default_rng(seed).random((128, 128)) > 0.5).astype(np.uint8)
    assert predict_markers(small_model, bits).count == 133


def test_marker_model_file_roundtrip(tmp_path, small_model):
    save_marker_model(tmp_path / "m.tacr", small_model)
    back = load_marker_model(tmp_path / "m.tacr")
    assert np.array_equal(back.weights, small_model.weights)
    assert np.array_equal(back.bias, small_model.bias)
    assert back.alpha == small_model.alpha and back.feature_side == small_model.feature_side
    raw = (tmp_path / "m.tacr").read_bytes()
    (tmp_path / "bad.tacr").write_bytes(b"NOPE" + raw[4:])
    with pytest.raises(FormatError):
        load_marker_model(tmp_path / "bad.tacr")
    (tmp_path / "short.tacr").write_bytes(raw[:-8])
    with pytest.raises(FormatError):
        load_marker_model(tmp_path / "short.tacr")


def test_marker_label_file_roundtrip(tmp_path):
    labels = {3: np.arange(266, dtype=float).reshape(133, 2), 7: np.zeros((133, 2))}
    write_marker_labels(tmp_path / "l.txt", labels)
    back = read_marker_labels(tmp_path / "l.txt")
    assert sorted(back) == [3, 7]
    assert np.allclose(back[3], labels[3])
    (tmp_path / "bad.txt").write_text("1 2 3\n")
    with pytest.raises(DataError):
        read_marker_labels(tmp_path / "bad.txt")

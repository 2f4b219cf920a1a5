import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from tactip_lab import simulator as sim
from tactip_lab.contact import ForceGrid, cell_edges, contact_detected, contact_series
from tactip_lab.imagery import GrayFrame, ParameterError

frames_8 = arrays(np.uint8, (8, 8), elements=st.integers(0, 255))


def quadrant_frame(value=40):
    data = np.zeros((4, 4), np.uint8)
    data[:2, :2] = value
    return GrayFrame(data)


def test_hand_computed_quadrant_example():
    grid = ForceGrid(2, gamma=0.0, first_frame=GrayFrame(np.zeros((4, 4), np.uint8)))
    raw, global_mean = grid.raw_change(quadrant_frame())
    assert raw[0, 0] == 40.0 and global_mean == 10.0
    grid.update(quadrant_frame())
    assert np.allclose(grid.activation, [[30.0, 0.0], [0.0, 0.0]], atol=1e-12, rtol=0)
    flag, total = contact_detected(grid, 10.0)
    assert flag is True or flag == np.True_
    assert abs(total - 30.0) < 1e-12


def test_fresh_grid_reports_no_contact():
    flag, total = contact_detected(ForceGrid(3))
    assert not flag and total == 0.0


def test_threshold_is_strict_and_non_negative():
    grid = ForceGrid(2, gamma=0.0, first_frame=GrayFrame(np.zeros((4, 4), np.uint8)))
    grid.update(quadrant_frame())
    assert not contact_detected(grid, 30.0)[0]
    with pytest.raises(ParameterError):
        contact_detected(grid, -1.0)


def test_first_update_only_sets_reference():
    grid = ForceGrid(2)
    grid.update(quadrant_frame())
    assert grid.total() == 0.0 and grid.prev_frame is not None


def test_identical_frames_decay_by_gamma():
    grid = ForceGrid(2, gamma=4.0, first_frame=GrayFrame(np.zeros((4, 4), np.uint8)))
    grid.update(quadrant_frame())
    assert grid.activation[0, 0] == 26.0
    seen = []
    for _ in range(8):
        grid.update(quadrant_frame())
        seen.append(grid.activation[0, 0])
    assert seen[:6] == [22.0, 18.0, 14.0, 10.0, 6.0, 2.0]
    assert seen[6:] == [0.0, 0.0]


def test_release_fades_within_peak_over_gamma_frames():
    gamma = 5.0
    script = sim.StimulusScript().idle(3).press(0.8, 12).release(30)
    run = sim.run_trial(script, sim.NOISY_CONFIG, seed=3)
    series = contact_series(run.frames, gamma=gamma)
    flags = np.array([f for _, _, f in series])
    totals = np.array([t for _, t, _ in series])
    pressing = np.arange(4, 12)
    assert flags[pressing].any()
    release_start = 15
    peak = totals[:release_start + 8].max()
    quiet = release_start + 8 + int(np.ceil(peak / gamma))
    assert not flags[quiet:].any()


def test_mismatched_frame_shape_rejected():
    grid = ForceGrid(2, first_frame=GrayFrame(np.zeros((4, 4), np.uint8)))
    with pytest.raises(ParameterError):
        grid.update(GrayFrame(np.zeros((4, 5), np.uint8)))


@pytest.mark.parametrize("kwargs", [{"grid_size": 0}, {"gamma": -1.0}])
def test_bad_parameters_rejected(kwargs):
    with pytest.raises(ParameterError):
        ForceGrid(**kwargs)


def test_frame_smaller_than_grid_rejected():
    with pytest.raises(ParameterError):
        ForceGrid(5, first_frame=GrayFrame(np.zeros((4, 4), np.uint8)))


@given(st.integers(1, 40), st.integers(1, 10))
def test_cell_edges_tile_the_axis(length, cells):
    if cells > length:
        return
    edges = cell_edges(length, cells)
    assert edges[0] == 0 and edges[-1] == length
    sizes = np.diff(edges)
    assert (sizes >= 1).all()
    assert (sizes[:-1] == length // cells).all()


def test_cell_bounds_cover_each_pixel_once():
    grid = ForceGrid(3, first_frame=GrayFrame(np.zeros((11, 7), np.uint8)))
    cover = np.zeros((11, 7), int)
    for y0, y1, x0, x1 in grid.cell_bounds():
        cover[y0:y1, x0:x1] += 1
    assert (cover == 1).all()


@given(st.lists(frames_8, min_size=2, max_size=6), st.floats(0, 20))
def test_activations_never_negative(frames, gamma):
    grid = ForceGrid(3, gamma)
    for f in frames:
        grid.update(GrayFrame(f))
        assert (grid.activation >= 0).all()


@given(st.lists(frames_8, min_size=2, max_size=4), st.floats(0.5, 20))
def test_constant_stream_reaches_zero(frames, gamma):
    grid = ForceGrid(2, gamma)
    for f in frames:
        grid.update(GrayFrame(f))
    steps = int(np.ceil(grid.activation.max() / gamma)) + 1
    prev = grid.total()
    for _ in range(steps):
        grid.update(GrayFrame(frames[-1]))
        assert grid.total() <= prev
        prev = grid.total()
    assert grid.total() == 0.0


@given(frames_8, st.integers(0, 3), st.integers(0, 3), st.integers(1, 255), st.floats(0, 5))
def test_change_in_one_cell_never_raises_others(base, ci, cj, delta, gamma):
    grid = ForceGrid(4, gamma)
    rng = np.random.default_rng(int(base.sum()))
    grid.activation = rng.random((4, 4)) * 10
    grid.update(GrayFrame(base))
    before = grid.activation.copy()
    changed = base.astype(int)
    changed[2 * ci:2 * ci + 2, 2 * cj:2 * cj + 2] = (changed[2 * ci:2 * ci + 2, 2 * cj:2 * cj + 2] + delta) % 256
    grid.update(GrayFrame(changed))
    mask = np.ones((4, 4), bool)
    mask[ci, cj] = False
    assert (grid.activation[mask] <= before[mask]).all()


@given(st.integers(0, 2), st.integers(0, 2), st.integers(1, 200), st.floats(0, 5))
def test_translating_stimulus_by_a_cell_translates_activation(ci, cj, level, gamma):
    def run(i, j):
        grid = ForceGrid(4, gamma, first_frame=GrayFrame(np.zeros((12, 12), np.uint8)))
        data = np.zeros((12, 12), np.uint8)
        data[3 * i:3 * i + 3, 3 * j:3 * j + 3] = level
        grid.update(GrayFrame(data))
        return grid.activation

    a = run(ci, cj)
    b = run(ci + 1, cj + 1)
    assert np.allclose(np.roll(a, (1, 1), axis=(0, 1)), b)


def test_uniform_brightness_change_cancels():
    grid = ForceGrid(3, 0.0, first_frame=GrayFrame(np.full((9, 9), 50, np.uint8)))
    grid.update(GrayFrame(np.full((9, 9), 90, np.uint8)))
    assert grid.total() == 0.0

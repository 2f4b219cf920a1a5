"""End-to-end acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line through the ``criterion`` fixture before
asserting, so the summary lists every criterion even when one fails.
"""

import filecmp
import math
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from gradcheck import check_layer, check_network, numeric_grad, rel_error
from oracles import greedy_oracle, total_distance
from tactip_lab import cli, experiments, imagery, simulator as sim
from tactip_lab.classify import models, sweep
from tactip_lab.classify.layers import Conv2D, Dense, Dropout, Flatten, Reshape, Sigmoid
from tactip_lab.classify.training import train_sgd
from tactip_lab.contact import ForceGrid
from tactip_lab.imagery import GrayFrame, MarkerSet
from tactip_lab.pressure import (MonotoneCalibration, magnitude_sum, mean_absolute_error, predict_pressure,
                                 train_pressure_model)
from tactip_lab.tracking import match_points, predict_markers

# training accuracy on the texture tasks saturates within about 10 epochs
TEXTURE_EPOCHS = 40
STATE_EPOCHS = 200  # an upper bound; training stops at 100% train accuracy
SWEEP_EPOCHS = 10


@pytest.fixture(scope="module")
def marker_model():
    return experiments.fit_marker_model(300, seed=0)


def _frames_from(scripts, config, seed):
    """(frame, true positions) for every step of every script."""
    out = []
    for k, script in enumerate(scripts):
        s = sim.Simulator(config, script.surface, seed=seed + k)
        for action in script.actions():
            res = s.step(action)
            out.append((s.render(res.positions), res.positions))
    return out


def _mixed_scripts():
    return [sim.press_script(0.8, "hard"), sim.shear_script((1.0, 0.5), "soft", depth=0.6, frames=15),
            sim.shear_script((-1.0, 0.0), "slippery", depth=0.5, frames=15),
            sim.press_script(0.3, "soft"), sim.StimulusScript().idle(30)]


def test_c01_closed_loop_marker_recovery(criterion):
    cfg = sim.DEFAULT_CONFIG.noiseless()
    frames = _frames_from(_mixed_scripts(), cfg, seed=1)[:100]
    assert len(frames) == 100
    start = time.perf_counter()
    found = [imagery.extract_centroids(imagery.binarize(f)) for f, _ in frames]
    elapsed = time.perf_counter() - start
    counts_ok = all(m.count == 133 for m in found)
    worst = 0.0
    for m, (_, truth) in zip(found, frames):
        if m.count == 133:
            d = np.hypot(*(m.points[:, None, :] - truth[None, :, :]).transpose(2, 0, 1)).min(axis=1)
            worst = max(worst, float(d.max()))
    passed = counts_ok and worst < 0.5 and elapsed < 10
    criterion(1, "closed-loop marker recovery", passed,
              f"133 every frame={counts_ok}, worst error {worst:.3f} px, {elapsed:.2f} s")
    assert passed


def test_c02_glare_removed_and_markers_predicted(criterion, marker_model):
    cfg = replace(sim.NOISY_CONFIG, glare=sim.GlareSpec(area=250.0))
    frames = _frames_from(_mixed_scripts(), cfg, seed=2)[:100]
    gx, gy = (int(round(v)) for v in cfg.glare.position)
    removed = counts = 0
    for frame, _ in frames:
        binary = imagery.adaptive_threshold(frame)
        labels, _ = imagery.label_components(binary)
        glare = labels == labels[gy, gx]
        cleaned = imagery.remove_large_blobs(binary)
        removed += int(glare.sum() > 100 and not cleaned.bits[glare].any())
        counts += int(predict_markers(marker_model, binary).count == 133)
    passed = removed == len(frames) and counts == len(frames)
    criterion(2, "glare removal", passed,
              f"glare removed in {removed}/{len(frames)}, 133 markers in {counts}/{len(frames)}")
    assert passed


def test_c03_force_grid_oracle(criterion):
    grid = ForceGrid(2, gamma=0.0, first_frame=GrayFrame(np.zeros((4, 4), np.uint8)))
    data = np.zeros((4, 4), np.uint8)
    data[:2, :2] = 40
    grid.update(GrayFrame(data))
    example = float(np.abs(grid.activation - [[30.0, 0.0], [0.0, 0.0]]).max())
    rng = np.random.default_rng(3)
    negative = stuck = peaks = 0
    for _ in range(10_000):
        gamma = float(rng.uniform(0.5, 20.0))
        a = rng.integers(0, 256, (8, 8), dtype=np.uint8)
        if rng.random() < 0.5:
            b = rng.integers(0, 256, (8, 8), dtype=np.uint8)
        else:
            # a localized change builds a real peak in one cell
            b = a.copy()
            i, j = rng.integers(0, 7, 2)
            b[i:i + 2, j:j + 2] = rng.integers(0, 256, (2, 2))
        g = ForceGrid(4, gamma, first_frame=GrayFrame(a))
        b = GrayFrame(b)
        g.update(b)
        negative += int((g.activation < 0).any())
        peak = g.activation.max()
        peaks += int(peak > gamma)
        for _ in range(int(math.ceil(peak / gamma))):
            g.update(b)
        stuck += int(g.total() != 0.0)
    passed = example < 1e-12 and negative == 0 and stuck == 0
    criterion(3, "force grid oracle", passed,
              f"example error {example:.1e}, negative {negative}, not decayed {stuck} of 10000 "
              f"({peaks} above gamma)")
    assert passed


def test_c04_matching_oracle(criterion):
    rng = np.random.default_rng(4)
    mismatched = not_injective = 0
    for _ in range(1000):
        o = np.round(rng.uniform(0, 20, (int(rng.integers(0, 9)), 2)), 1)
        c = np.round(rng.uniform(0, 20, (int(rng.integers(0, 9)), 2)), 1)
        max_dist = float(rng.uniform(1, 15))
        a = match_points(MarkerSet(o), MarkerSet(c), max_dist)
        expected = greedy_oracle(o, c, max_dist)
        mismatched += int(total_distance(o, c, a.pairs) != total_distance(o, c, expected))
        left = [i for i, _ in a.pairs]
        right = [j for _, j in a.pairs]
        not_injective += int(len(set(left)) != len(left) or len(set(right)) != len(right))
    passed = mismatched == 0 and not_injective == 0
    criterion(4, "matching oracle", passed, f"distance mismatches {mismatched}, non-injective {not_injective}")
    assert passed


def _mean_magnitude(vectors):
    return float(np.mean([math.hypot(*v) for v in vectors]))


def test_c05_direction_separability(criterion, marker_model):
    # both marker models must pass
    trials = experiments.direction_experiment(30, kind="hard", seed=5, marker_model=marker_model)
    reg = {s: [t.regression_model for t in trials if t.sensation == s] for s in ("left", "right", "center")}
    vec = {s: [t.vector_model for t in trials if t.sensation == s] for s in ("left", "right", "center")}
    left_x = [v[0] for v in reg["left"]]
    right_x = [v[0] for v in reg["right"]]
    separated = max(left_x) < 0 < min(right_x)

    def ratio(by):
        return _mean_magnitude(by["center"]) / _mean_magnitude(by["left"] + by["right"])

    vec_separated = max(v[0] for v in vec["left"]) < 0 < min(v[0] for v in vec["right"])
    passed = separated and vec_separated and ratio(reg) < 0.25 and ratio(vec) < 0.25
    criterion(5, "direction separability", passed,
              f"regression: left max x {max(left_x):.2f}, right min x {min(right_x):.2f}, "
              f"centre/shear {ratio(reg):.3f}; centroid tracking: separated={vec_separated}, "
              f"centre/shear {ratio(vec):.3f}")
    assert passed


def test_c06_slip_attenuation(criterion, marker_model):
    reg, vec = {}, {}
    for kind in ("hard", "slippery"):
        trials = experiments.direction_experiment(30, kind=kind, seed=6, marker_model=marker_model,
                                                  sensations=("left", "right"))
        reg[kind] = _mean_magnitude([t.regression_model for t in trials])
        vec[kind] = _mean_magnitude([t.vector_model for t in trials])
    ratio = reg["slippery"] / reg["hard"]
    vec_ratio = vec["slippery"] / vec["hard"]
    passed = ratio < 0.3 and vec_ratio < 0.3
    criterion(6, "slip attenuation", passed,
              f"regression: slippery {reg['slippery']:.2f} px, hard {reg['hard']:.2f} px, ratio {ratio:.3f}; "
              f"centroid tracking ratio {vec_ratio:.3f}")
    assert passed


def test_c07_pressure_regression(criterion, marker_model):
    samples = experiments.pressure_dataset(500, marker_model, seed=7)
    order = np.random.default_rng(7).permutation(len(samples))
    test_idx, train_idx = order[:100], order[100:]
    train = [samples[i] for i in train_idx]
    test = [samples[i] for i in test_idx]
    model = train_pressure_model(train)
    truth = [s.pressure for s in test]
    mae = mean_absolute_error([predict_pressure(model, s.vectors) for s in test], truth)
    base = MonotoneCalibration([magnitude_sum(s.vectors) for s in train], [s.pressure for s in train])
    base_mae = mean_absolute_error(base([magnitude_sum(s.vectors) for s in test]), truth)
    passed = mae < 1.25 and mae < base_mae
    criterion(7, "pressure regression", passed, f"ridge MAE {mae:.3f}, monotone baseline MAE {base_mae:.3f}")
    assert passed


def test_c08_soft_hard_divergence(criterion, marker_model):
    model = train_pressure_model(experiments.pressure_dataset(500, marker_model, seed=8))
    low, high = 0.2, 1.0
    ranges = {}
    for kind in ("soft", "hard"):
        sweep_ = experiments.depth_sweep([low, high], kind, 100, marker_model, seed=80 + len(kind))
        ranges[kind] = {d: [predict_pressure(model, s.vectors) for s in v] for d, v in sweep_.items()}

    def span(kind, d):
        return min(ranges[kind][d]), max(ranges[kind][d])

    overlap_low = span("soft", low)[1] >= span("hard", low)[0] and span("hard", low)[1] >= span("soft", low)[0]
    apart_high = span("soft", high)[1] < span("hard", high)[0]
    passed = overlap_low and apart_high
    criterion(8, "soft/hard divergence", passed,
              "depth {}: soft {:.1f}-{:.1f} hard {:.1f}-{:.1f}; depth {}: soft {:.1f}-{:.1f} hard {:.1f}-{:.1f}".format(
                  low, *span("soft", low), *span("hard", low), high, *span("soft", high), *span("hard", high)))
    assert passed


def _train_cnn(task, T, epochs, seed=0, **kw):
    X, y = task.stacks(T, "train")
    model = models.build_cnn(task.frame_shape, T, task.classes, seed=seed)
    start = time.perf_counter()
    result = train_sgd(model, X, y, epochs=epochs, seed=seed, **kw)
    return model, result, time.perf_counter() - start


def test_c09_texture_and_state_classification(criterion):
    parts, passed, limit = [], True, 600.0
    for pair in ("lego", "concrete"):
        task = experiments.texture_task(pair, seed=9)
        model, _, secs = _train_cnn(task, 10, epochs=TEXTURE_EPOCHS)
        acc = models.evaluate(model, *task.stacks(10, "test"))
        passed &= acc >= 0.99 and secs < limit
        parts.append(f"{pair} {acc:.4f} in {secs:.0f} s")
    task = experiments.surface_state_task(seed=9)
    model, result, secs = _train_cnn(task, 10, epochs=STATE_EPOCHS, target_accuracy=1.0)
    train_acc = models.evaluate(model, *task.stacks(10, "train"))
    passed &= train_acc == 1.0 and secs < limit
    parts.append(f"states train {train_acc:.4f} in {secs:.0f} s")
    criterion(9, "texture and state classification", passed, ", ".join(parts))
    assert passed


def test_c10_accuracy_rises_with_T(criterion):
    tasks = {}

    def run(T, seed):
        if seed not in tasks:
            tasks[seed] = experiments.temporal_task(seed=seed)
        task = tasks[seed]
        model, _, _ = _train_cnn(task, T, epochs=SWEEP_EPOCHS, seed=seed)
        return models.evaluate(model, *task.stacks(T, "test"))

    result = sweep.t_sweep(run, range(1, 11), trials=20, seed=0, workers=1)
    rho = result.spearman()
    gain = result.row(10).mean - result.row(1).mean
    passed = rho > 0 and gain >= 0.05
    means = " ".join(f"{m:.3f}" for m in result.means())
    criterion(10, "accuracy rises with T", passed, f"Spearman {rho:.3f}, T10-T1 {gain:+.3f}, means {means}")
    assert passed


def test_c11_gradient_checks(criterion):
    rng = np.random.default_rng(11)
    layers = {
        "dense": (Dense(6, 4, rng, False), rng.normal(size=(3, 6))),
        "dense_after_sigmoid": (Dense(6, 4, rng, True), rng.random((3, 6))),
        "conv": (Conv2D(2, 3, 3, 1, rng), rng.normal(size=(2, 2, 6, 5))),
        "strided_conv": (Conv2D(2, 3, 4, 2, rng), rng.normal(size=(2, 2, 9, 8))),
        "sigmoid": (Sigmoid(), rng.normal(size=(3, 5)) * 3),
        "flatten": (Flatten(), rng.normal(size=(2, 3, 2, 2))),
        "reshape": (Reshape(4, 3), rng.normal(size=(2, 12))),
    }
    errors = {name: max(check_layer(layer, x, rng).values()) for name, (layer, x) in layers.items()}
    drop = Dropout(0.2, np.random.default_rng(0))
    x = rng.normal(size=(4, 6))
    proj = rng.normal(size=x.shape)
    drop.forward(x, train=True)
    mask = drop._mask.copy()
    errors["dropout"] = rel_error(drop.backward(proj), numeric_grad(lambda: float((x * mask * proj).sum()), x))
    errors["fnn"] = check_network(models.build_fnn(2, ("a", "b", "c"), markers=3, hidden=(5, 4), dropout=0.0, seed=1),
                                  rng.normal(size=(4, 12)), np.array([0, 1, 2, 1]))
    errors["cnn"] = check_network(models.build_cnn((10, 9), 2, ("a", "b"), filters=2, size=4, stride=2, hidden=6,
                                                   dropout=0.0, seed=1),
                                  rng.random((3, 180)), np.array([0, 1, 1]))
    worst = max(errors, key=errors.get)
    passed = errors[worst] < 1e-4
    criterion(11, "gradient checks", passed, f"{len(errors)} checks, worst {worst} relative error {errors[worst]:.2e}")
    assert passed


def _pipeline(root: Path):
    root.mkdir()
    (root / "a.txt").write_text("surface=hard\nidle 2\npress 0.6 8\nshear 1,0 2 6\nrelease 4\n")
    (root / "b.txt").write_text("surface=slippery\nidle 2\npress 0.6 8\nshear -1,0 2 6\nrelease 4\n")
    steps = [
        ["simulate", "--script", root / "a.txt", root / "b.txt", "--trials", 2, "--noise", "noisy", "--glare",
         "--seed", 12, "-o", root / "rec"],
        ["preprocess", "-i", root / "rec", "-o", root / "pre"],
        ["contact", "-i", root / "rec", "-o", root / "contact"],
        ["train-markers", "-i", root / "rec", "--augment-copies", 1, "--seed", 12, "-o", root / "markers"],
        ["track", "-i", root / "rec", "--model", root / "markers" / "markers.tacr", "-o", root / "track"],
        ["plot", "--kind", "direction", "-i", root / "track" / "trials.csv", "-o", root / "plot"],
        ["train-classifier", "--data", root / "rec", "--T", 3, "--epochs", 3, "--seed", 12, "-o", root / "clf"],
        ["eval", "--model", root / "clf" / "classifier.tacn", "-i", root / "rec", "-o", root / "eval"],
        ["sweep-t", "--tmin", 1, "--tmax", 2, "--trials", 2, "--arch", "fnn", "--task-trials", 3, "--frames", 10,
         "--epochs", 2, "--seed", 12, "-o", root / "sweep"],
    ]
    return [cli.main([str(a) for a in step]) for step in steps]


def test_c12_cli_reruns_are_byte_identical(criterion, tmp_path):
    codes = [_pipeline(tmp_path / run) for run in ("first", "second")]
    first, second = tmp_path / "first", tmp_path / "second"
    files = sorted(p.relative_to(first) for p in first.rglob("*") if p.is_file() and p.suffix != ".svg")
    differing = [str(p) for p in files if not filecmp.cmp(first / p, second / p, shallow=False)]
    ok_codes = all(c == 0 for run in codes for c in run)
    passed = ok_codes and not differing and len(files) > 10
    criterion(12, "CLI determinism", passed,
              f"{len(files)} files compared, differing: {differing or 'none'}, exit codes {codes[0]}")
    assert passed

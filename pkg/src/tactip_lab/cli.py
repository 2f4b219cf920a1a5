"""Command-line entry point: simulate, preprocess, track, train, evaluate and plot.

Every subcommand writes its outputs under the directory given by -o/--out.
Exit status is 0 on success, 1 for configuration errors and 2 for data or
file-format errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import contact, datasets, experiments, imagery, pressure, simulator as sim, tracking
from .classify import models, sweep, training
from .svgplot import Chart

CONFIG_ERRORS = (imagery.ParameterError, sim.ScriptError)
DATA_ERRORS = (imagery.FormatError, tracking.DataError, pressure.FitError, training.TrainingError,
               FileNotFoundError, IsADirectoryError, NotADirectoryError)

TASKS = ("lego", "concrete", "states", "temporal")


class ConfigError(Exception):
    """Bad flag combination or value."""


class Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; those are configuration errors here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _out_dir(args) -> Path:
    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _f(v: float) -> str:
    return f"{v:.6f}"


def _positive(kind):
    def parse(text):
        v = kind(text)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
        return v
    return parse


def _trials(manifest):
    """(trial_id, [row positions]) in file order."""
    out: dict[int, list[int]] = {}
    for i, row in enumerate(manifest):
        out.setdefault(row.trial_id, []).append(i)
    return list(out.items())


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

NOISE_PRESETS = {"clean": sim.DEFAULT_CONFIG, "noisy": sim.NOISY_CONFIG, "rig": sim.RIG_CONFIG}


def cmd_simulate(args) -> int:
    scripts = [sim.load_script(p) for p in args.script]
    config = NOISE_PRESETS[args.noise]
    if args.glare:
        config = replace(config, glare=sim.GlareSpec(area=args.glare_area))
    run = sim.generate_dataset(scripts, config, seed=args.seed, trials=args.trials)
    rec = datasets.recording_from_run(run)
    out = _out_dir(args)
    datasets.save_recording(out, rec)
    print(f"wrote {len(rec.frames)} frames in {len(scripts) * args.trials} trials to {out}")
    return 0


# ---------------------------------------------------------------------------
# preprocess / contact
# ---------------------------------------------------------------------------

def cmd_preprocess(args) -> int:
    rec = datasets.load_recording(args.input)
    out = _out_dir(args)
    binary, lines = [], []
    for row, frame in zip(rec.manifest, rec.frames):
        raw = imagery.adaptive_threshold(frame, args.window, args.offset)
        large = sum(1 for b in imagery.find_blobs(raw) if b.area > args.max_area)
        clean = imagery.remove_large_blobs(raw, args.max_area)
        pts = imagery.extract_centroids(clean, args.min_area).points
        binary.append(clean.to_gray())
        lines.append(json.dumps({"frame_index": row.frame_index, "count": len(pts), "large_blobs": large,
                                 "points": np.round(pts, 6).tolist()}))
    imagery.write_container(out / "binary.tacf", binary)
    (out / "centroids.jsonl").write_text("\n".join(lines) + "\n")
    print(f"preprocessed {len(binary)} frames")
    return 0


def cmd_contact(args) -> int:
    rec = datasets.load_recording(args.input)
    out = _out_dir(args)
    rows, hits = [], 0
    for _, idx in _trials(rec.manifest):
        series = contact.contact_series([rec.frames[i] for i in idx], args.grid, args.gamma, args.threshold)
        for i, (_, total, flag) in zip(idx, series):
            row = rec.manifest[i]
            rows.append((row.frame_index, _f(total), int(flag), row.trial_id, int(row.contact)))
            hits += flag == row.contact
    _write_rows(out / "contact.csv", ("frame_index", "total_activation", "contact_flag", "trial_id",
                                          "true_contact"), rows)
    _write_json(out / "summary.json", {"frames": len(rows), "agreement": hits / max(len(rows), 1),
                                       "grid": args.grid, "gamma": args.gamma, "threshold": args.threshold})
    print(f"contact agreement with ground truth: {hits}/{len(rows)}")
    return 0


# ---------------------------------------------------------------------------
# track
# ---------------------------------------------------------------------------

def cmd_track(args) -> int:
    rec = datasets.load_recording(args.input)
    model = tracking.load_marker_model(args.model) if args.model else None
    out = _out_dir(args)

    def locate(frame):
        if model is not None:
            return tracking.predict_markers(model, imagery.adaptive_threshold(frame, args.window, args.offset))
        return imagery.extract_centroids(imagery.binarize(frame, args.window, args.offset, args.max_area))

    lines, trial_rows, samples = [], [], []
    for tid, idx in _trials(rec.manifest):
        origin = locate(rec.frames[idx[0]])
        field = None
        for i in idx:
            current = locate(rec.frames[i])
            if model is not None:
                field = tracking.VectorField(origin.points, current.points)
            else:
                field = tracking.track(origin, current, args.max_dist)
            avg = tracking.average_vector(field) if field.count else (0.0, 0.0)
            lines.append(json.dumps({
                "frame_index": rec.manifest[i].frame_index, "trial_id": tid, "count": field.count,
                "average": [round(avg[0], 6), round(avg[1], 6)],
                "magnitude_sum": round(pressure.magnitude_sum(field), 6),
                "points": np.round(current.points, 6).tolist(),
            }))
        last = rec.manifest[idx[-1]]
        surface = last.surface or last.label
        avg = tracking.average_vector(field) if field.count else (0.0, 0.0)
        trial_rows.append((tid, surface, last.label, _f(avg[0]), _f(avg[1]), field.count,
                           _f(pressure.magnitude_sum(field)), "" if last.pressure is None else _f(last.pressure)))
        if model is not None and surface in pressure.PRESSURE_SURFACES and last.pressure is not None:
            samples.append(pressure.PressureSample(field, last.pressure, surface))
    (out / "vectors.jsonl").write_text("\n".join(lines) + "\n")
    _write_rows(out / "trials.csv", ("trial_id", "surface", "label", "avg_x", "avg_y", "count",
                                     "magnitude_sum", "pressure"), trial_rows)
    if samples:
        pressure.write_pressure_dataset(out / "pressure.txt", samples)
    print(f"tracked {len(lines)} frames in {len(trial_rows)} trials")
    return 0


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

def cmd_train_markers(args) -> int:
    samples = []
    for path in args.input:
        rec = datasets.load_recording(path)
        if rec.markers is None:
            raise tracking.DataError(f"{path}: recording has no {datasets.MARKERS_NAME}")
        for row, frame in zip(rec.manifest, rec.frames):
            if row.frame_index in rec.markers:
                bits = imagery.adaptive_threshold(frame, args.window, args.offset)
                samples.append((bits, rec.markers[row.frame_index]))
    augment = None
    if args.augment_copies:
        augment = tracking.AugmentSpec(args.augment_copies, args.max_shift, seed=args.seed)
    model = tracking.train_marker_model(samples, args.alpha, augment, args.feature_side)
    out = _out_dir(args)
    tracking.save_marker_model(out / "markers.tacr", model)
    err = [np.linalg.norm(tracking.predict_markers(model, b).points - p, axis=1).mean() for b, p in samples]
    _write_json(out / "metrics.json", {"frames": len(samples), "alpha": args.alpha,
                                       "train_mean_error_px": float(np.mean(err))})
    print(f"trained on {len(samples)} frames, mean training error {np.mean(err):.3f} px")
    return 0


def _split_indices(n: int, fraction: float, seed: int):
    perm = np.random.default_rng(seed).permutation(n)
    n_test = min(max(1, int(round(fraction * n))), n - 1)
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def cmd_train_pressure(args) -> int:
    samples = pressure.read_pressure_dataset(args.input)
    if len(samples) < 3:
        raise pressure.FitError("need at least three samples to hold some out")
    train, test = _split_indices(len(samples), args.test_fraction, args.seed)
    model = pressure.train_pressure_model([samples[i] for i in train], args.alpha)
    mags = np.array([pressure.magnitude_sum(s.vectors) for s in samples])
    truth = np.array([s.pressure for s in samples])
    baseline = pressure.MonotoneCalibration(mags[train], truth[train])
    pred = np.array([pressure.predict_pressure(model, s.vectors) for s in samples])
    base = baseline(mags)
    out = _out_dir(args)
    pressure.save_pressure_model(out / "pressure.tacr", model)
    test_set = set(test.tolist())
    rows = [(i, "test" if i in test_set else "train", s.surface, _f(s.pressure), _f(pred[i]), _f(base[i]))
            for i, s in enumerate(samples)]
    _write_rows(out / "predictions.csv", ("index", "split", "surface", "true", "predicted", "baseline"), rows)
    metrics = {
        "train": len(train), "test": len(test), "alpha": args.alpha,
        "mae": pressure.mean_absolute_error(pred[test], truth[test]),
        "baseline_mae": pressure.mean_absolute_error(base[test], truth[test]),
    }
    _write_json(out / "metrics.json", metrics)
    print(f"held-out MAE {metrics['mae']:.3f} (monotone magnitude-sum baseline {metrics['baseline_mae']:.3f})")
    return 0


def _task_builder(args):
    """seed -> FrameTask for the chosen built-in task or recording."""
    features = "image" if args.arch == "cnn" else "vector"
    kw = {"max_T": args.max_T, "features": features}
    if getattr(args, "task_trials", None):
        kw["trials"] = args.task_trials
    if getattr(args, "frames", None):
        kw["frames"] = args.frames
    if args.data:
        rec = datasets.load_recording(args.data)
        mm = tracking.load_marker_model(args.marker_model) if args.marker_model else None
        return lambda seed: experiments.task_from_recording(rec, args.max_T, seed=seed, features=features,
                                                            marker_model=mm)
    if args.task in ("lego", "concrete"):
        return lambda seed: experiments.texture_task(args.task, seed=seed, **kw)
    if args.task == "states":
        return lambda seed: experiments.surface_state_task(seed=seed, **kw)
    return lambda seed: experiments.temporal_task(seed=seed, **kw)


def _build_model(args, task, T, seed):
    if args.arch == "cnn":
        return models.build_cnn(task.frame_shape, T, task.classes, seed=seed)
    return models.build_fnn(T, task.classes, markers=task.frame_shape[0] // 2, seed=seed)


def _curve_rows(curve):
    return [(c.epoch, _f(c.loss), _f(c.accuracy), "" if c.val_accuracy is None else _f(c.val_accuracy))
            for c in curve]


def cmd_train_classifier(args) -> int:
    args.max_T = args.T
    task = _task_builder(args)(args.seed)
    X, y = task.stacks(args.T, "train")
    Xv, yv = task.stacks(args.T, "test")
    if len(X) == 0:
        raise tracking.DataError("no training stacks")
    model = _build_model(args, task, args.T, args.seed)
    result = training.train_sgd(model, X, y, args.epochs, args.lr, args.batch, args.seed,
                                Xv if len(Xv) else None, yv if len(yv) else None)
    out = _out_dir(args)
    models.save_model(out / "classifier.tacn", model)
    _write_rows(out / "curve.csv", ("epoch", "loss", "accuracy", "val_accuracy"), _curve_rows(result.curve))
    _plot_curve(out / "curve.svg", [c.epoch for c in result.curve], [c.accuracy for c in result.curve],
                None, [c.val_accuracy for c in result.curve])
    metrics = {"arch": args.arch, "T": args.T, "classes": list(task.classes), "train_stacks": len(X),
               "test_stacks": len(Xv), "train_accuracy": models.evaluate(model, X, y),
               "test_accuracy": models.evaluate(model, Xv, yv) if len(Xv) else None,
               "epochs": len(result.curve)}
    _write_json(out / "metrics.json", metrics)
    print(f"train accuracy {metrics['train_accuracy']:.3f}, held-out {metrics['test_accuracy']}")
    return 0


def cmd_sweep_t(args) -> int:
    if args.tmin < 1 or args.tmax < args.tmin:
        raise ConfigError("need 1 <= tmin <= tmax")
    args.max_T = args.tmax
    build = _task_builder(args)
    seeds = [sweep.trial_seed(args.seed, k) for k in range(args.trials)]
    tasks = {s: build(s) for s in seeds}

    def run(T, s):
        task = tasks[s]
        X, y = task.stacks(T, "train")
        Xv, yv = task.stacks(T, "test")
        model = _build_model(args, task, T, s)
        training.train_sgd(model, X, y, args.epochs, args.lr, args.batch, s)
        return models.evaluate(model, Xv, yv)

    result = sweep.t_sweep(run, range(args.tmin, args.tmax + 1), args.trials, args.seed)
    out = _out_dir(args)
    result.write_csv(out / "sweep.csv")
    _plot_sweep(out / "sweep.svg", result)
    rho = result.spearman()
    _write_json(out / "summary.json", {"spearman": None if np.isnan(rho) else rho, "trials": args.trials,
                                       "task": args.task, "arch": args.arch,
                                       "means": {str(r.T): r.mean for r in result.rows}})
    print(result.to_csv(), end="")
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def cmd_eval(args) -> int:
    head = Path(args.model).read_bytes()[:20]
    out = _out_dir(args)
    if head[:4] == models.MODEL_MAGIC:
        return _eval_classifier(args, out)
    if head[:4] == tracking.MODEL_MAGIC and len(head) == 20 and int.from_bytes(head[16:20], "little") == 1:
        return _eval_pressure(args, out)
    if head[:4] == tracking.MODEL_MAGIC:
        return _eval_markers(args, out)
    raise imagery.FormatError(f"{args.model}: unrecognised model file", 0)


def _eval_pressure(args, out) -> int:
    model = pressure.load_pressure_model(args.model)
    samples = pressure.read_pressure_dataset(args.input, marker_count=model.marker_count)
    pred = [pressure.predict_pressure(model, s.vectors) for s in samples]
    rows = [(i, s.surface, _f(s.pressure), _f(p)) for i, (s, p) in enumerate(zip(samples, pred))]
    _write_rows(out / "predictions.csv", ("index", "surface", "true", "predicted"), rows)
    mae = pressure.mean_absolute_error(pred, [s.pressure for s in samples]) if samples else None
    _write_json(out / "metrics.json", {"samples": len(samples), "mae": mae})
    print(f"pressure MAE {mae}")
    return 0


def _eval_markers(args, out) -> int:
    model = tracking.load_marker_model(args.model)
    rec = datasets.load_recording(args.input)
    if rec.markers is None:
        raise tracking.DataError(f"{args.input}: recording has no {datasets.MARKERS_NAME}")
    rows = []
    for row, frame in zip(rec.manifest, rec.frames):
        if row.frame_index not in rec.markers:
            continue
        pts = tracking.predict_markers(model, imagery.adaptive_threshold(frame, args.window, args.offset)).points
        err = np.linalg.norm(pts - rec.markers[row.frame_index], axis=1)
        rows.append((row.frame_index, len(pts), _f(err.mean()), _f(err.max())))
    _write_rows(out / "markers.csv", ("frame_index", "count", "mean_error", "max_error"), rows)
    _write_json(out / "metrics.json", {"frames": len(rows),
                                       "mean_error_px": float(np.mean([float(r[2]) for r in rows])) if rows else None})
    print(f"evaluated {len(rows)} frames")
    return 0


def _eval_classifier(args, out) -> int:
    model = models.load_model(args.model)
    arch = model.arch
    rec = datasets.load_recording(args.input)
    mm = tracking.load_marker_model(args.marker_model) if args.marker_model else None
    features = "image" if arch["arch"] == "cnn" else "vector"
    side = arch["frame_shape"][1] if features == "image" else experiments.CLASSIFIER_SIDE
    task = experiments.task_from_recording(rec, arch["T"], side=side, features=features, marker_model=mm,
                                           classes=model.classes, test_fraction=0.0)
    ends = np.sort(np.concatenate([task.train_ends, task.test_ends]))
    if not len(ends):
        raise tracking.DataError("no gated stacks with a label the model knows")
    task.train_ends = ends
    X, y = task.stacks(arch["T"], "train")
    pred = model.scores(X).argmax(axis=1)
    rows = [(rec.manifest[e].frame_index, model.classes[t], model.classes[p]) for e, t, p in zip(ends, y, pred)]
    _write_rows(out / "predictions.csv", ("frame_index", "label", "predicted"), rows)
    cm = models.confusion_matrix(model, X, y)
    _write_rows(out / "confusion.csv", ("label",) + model.classes,
                [(c,) + tuple(int(v) for v in cm[i]) for i, c in enumerate(model.classes)])
    _write_json(out / "metrics.json", {"stacks": len(y), "accuracy": float((pred == y).mean())})
    print(f"accuracy {(pred == y).mean():.3f} on {len(y)} stacks")
    return 0


# ---------------------------------------------------------------------------
# plots
# ---------------------------------------------------------------------------

def _plot_curve(path, epochs, acc, band=None, val=None):
    chart = Chart("Training accuracy", "epoch", "accuracy")
    chart.add(epochs, acc, "train", band)
    if val is not None and all(v is not None for v in val):
        chart.add(epochs, val, "held-out")
    chart.save(path)


def _plot_sweep(path, result):
    chart = Chart("Accuracy against stack length", "T (frames)", "held-out accuracy")
    chart.add([r.T for r in result.rows], [r.mean for r in result.rows], "mean", [r.std for r in result.rows])
    chart.save(path)


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def cmd_plot(args) -> int:
    rows = _read_csv(args.input)
    if not rows:
        raise tracking.DataError(f"{args.input}: no rows")
    out = _out_dir(args)
    col = lambda name: np.array([float(r[name]) for r in rows])
    try:
        if args.kind == "direction":
            chart = Chart("Average vectors", "x (px)", "y (px)")
            for g in sorted({r[args.group] for r in rows}):
                sel = [r for r in rows if r[args.group] == g]
                chart.add([float(r["avg_x"]) for r in sel], [float(r["avg_y"]) for r in sel], g, style="points")
        elif args.kind == "pressure":
            chart = Chart("Predicted against true pressure", "true", "predicted", diagonal=True)
            for g in sorted({r.get("surface", "") for r in rows}):
                sel = [r for r in rows if r.get("surface", "") == g]
                chart.add([float(r["true"]) for r in sel], [float(r["predicted"]) for r in sel], g, style="points")
        elif args.kind == "curve":
            if "accuracy_mean" in rows[0]:
                _plot_curve(out / "curve.svg", col("epoch"), col("accuracy_mean"), col("accuracy_std"))
            else:
                val = [float(r["val_accuracy"]) if r["val_accuracy"] else None for r in rows]
                _plot_curve(out / "curve.svg", col("epoch"), col("accuracy"), None, val)
            return 0
        else:
            chart = Chart("Accuracy against stack length", "T (frames)", "held-out accuracy")
            chart.add(col("T"), col("mean"), "mean", col("std"))
    except KeyError as exc:
        raise tracking.DataError(f"{args.input}: missing column {exc.args[0]!r}") from None
    chart.save(out / f"{args.kind}.svg")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = Parser(prog="tactip-lab", description=__doc__.splitlines()[0], formatter_class=fmt)
    sub = p.add_subparsers(dest="command", required=True, parser_class=Parser)

    def add(name, func, help_text, aliases=()):
        sp = sub.add_parser(name, help=help_text, description=help_text, formatter_class=fmt, aliases=list(aliases))
        sp.set_defaults(func=func)
        return sp

    def common(sp, seed=True, inp=None):
        sp.add_argument("-o", "--out", required=True, help="output directory")
        if inp:
            sp.add_argument("-i", "--input", required=True, help=inp)
        if seed:
            sp.add_argument("--seed", type=int, default=0, help="random seed")

    def imaging(sp):
        sp.add_argument("--window", type=int, default=imagery.DEFAULT_WINDOW, help="threshold window (odd, px)")
        sp.add_argument("--offset", type=float, default=imagery.DEFAULT_OFFSET, help="threshold offset above local mean")

    sp = add("simulate", cmd_simulate, "run stimulus scripts through the synthetic sensor")
    sp.add_argument("--script", nargs="+", required=True, help="script file(s); each runs --trials times")
    sp.add_argument("--trials", type=_positive(int), default=1, help="repetitions per script")
    sp.add_argument("--noise", choices=tuple(NOISE_PRESETS), default="clean",
                    help="sensor preset: clean, noisy imaging, or noisy imaging with rig placement")
    sp.add_argument("--glare", action="store_true", help="add a static glare blob")
    sp.add_argument("--glare-area", type=_positive(float), default=sim.GlareSpec().area, help="glare area (px)")
    common(sp)

    sp = add("preprocess", cmd_preprocess, "binarise frames, remove glare and extract marker centroids")
    common(sp, seed=False, inp="recording directory")
    imaging(sp)
    sp.add_argument("--max-area", type=_positive(int), default=imagery.DEFAULT_MAX_AREA,
                    help="components larger than this are removed as glare (px)")
    sp.add_argument("--min-area", type=int, default=imagery.DEFAULT_MIN_AREA, help="smallest accepted marker (px)")

    sp = add("contact", cmd_contact, "receptive-field grid contact detection")
    common(sp, seed=False, inp="recording directory")
    sp.add_argument("--grid", type=_positive(int), default=contact.DEFAULT_GRID, help="cells per side")
    sp.add_argument("--gamma", type=float, default=contact.DEFAULT_GAMMA, help="per-update decay")
    sp.add_argument("--threshold", type=float, default=contact.DEFAULT_THRESHOLD, help="contact threshold on the grid total")

    sp = add("track", cmd_track, "displacement vectors from each trial's first frame")
    common(sp, seed=False, inp="recording directory")
    sp.add_argument("--model", default=None, help="marker model (.tacr); centroid matching when omitted")
    sp.add_argument("--max-dist", type=_positive(float), default=tracking.DEFAULT_MAX_DIST,
                    help="largest accepted match distance (px)")
    sp.add_argument("--max-area", type=_positive(int), default=imagery.DEFAULT_MAX_AREA, help="glare area cut-off (px)")
    imaging(sp)

    sp = add("train-markers", cmd_train_markers, "fit the ridge marker localiser on labelled recordings")
    sp.add_argument("-i", "--input", nargs="+", required=True, help="recording directories with marker labels")
    common(sp)
    imaging(sp)
    sp.add_argument("--alpha", type=_positive(float), default=tracking.DEFAULT_ALPHA, help="ridge penalty")
    sp.add_argument("--feature-side", type=_positive(int), default=tracking.FEATURE_SIDE, help="feature grid side")
    sp.add_argument("--augment-copies", type=int, default=0, help="shifted/zoomed copies per frame (0 = none)")
    sp.add_argument("--max-shift", type=int, default=10, help="largest augmentation shift (px)")

    sp = add("train-pressure", cmd_train_pressure, "fit the ridge pressure model and the monotone baseline")
    common(sp, inp="pressure dataset (text lines)")
    sp.add_argument("--alpha", type=_positive(float), default=tracking.DEFAULT_ALPHA, help="ridge penalty")
    sp.add_argument("--test-fraction", type=float, default=0.2, help="share of samples held out")

    def classifier_flags(sp, T_default=10):
        sp.add_argument("--arch", choices=("fnn", "cnn"), default="cnn", help="vector FNN or image CNN")
        sp.add_argument("--task", choices=TASKS, default="lego", help="built-in simulated task")
        sp.add_argument("--data", default=None, help="recording directory to use instead of --task")
        sp.add_argument("--marker-model", default=None, help="marker model for FNN vectors from --data")
        sp.add_argument("--task-trials", type=_positive(int), default=None,
                        help="trials per class in the built-in task (task default when omitted)")
        sp.add_argument("--frames", type=_positive(int), default=None,
                        help="drag frames per trial (task default when omitted)")
        sp.add_argument("--epochs", type=_positive(int), default=training.EPOCHS, help="SGD epochs")
        sp.add_argument("--lr", type=_positive(float), default=training.LEARNING_RATE, help="learning rate")
        sp.add_argument("--batch", type=_positive(int), default=training.BATCH, help="minibatch size")

    sp = add("train-classifier", cmd_train_classifier, "train a surface classifier on T-frame stacks")
    common(sp)
    sp.add_argument("--T", type=_positive(int), default=10, help="frames per stack")
    classifier_flags(sp)

    sp = add("sweep-t", cmd_sweep_t, "held-out accuracy against T over seeded trials")
    common(sp)
    sp.add_argument("--tmin", type=int, default=1, help="smallest T")
    sp.add_argument("--tmax", type=int, default=10, help="largest T")
    sp.add_argument("--trials", type=_positive(int), default=20, help="seeded trials per T")
    classifier_flags(sp)
    sp.set_defaults(task="temporal")

    sp = add("eval", cmd_eval, "evaluate a saved model (marker, pressure or classifier)", aliases=("pressure-eval",))
    common(sp, seed=False, inp="pressure dataset or recording directory")
    sp.add_argument("--model", required=True, help="model file (.tacr or .tacn)")
    sp.add_argument("--marker-model", default=None, help="marker model for FNN vector inputs")
    imaging(sp)

    sp = add("plot", cmd_plot, "SVG plot from a CSV written by another subcommand")
    common(sp, seed=False, inp="CSV file")
    sp.add_argument("--kind", choices=("direction", "pressure", "curve", "sweep"), required=True,
                    help="direction: trials.csv; pressure: predictions.csv; curve: curve.csv; sweep: sweep.csv")
    sp.add_argument("--group", default="surface", help="column that colours direction points")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, *CONFIG_ERRORS) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (*DATA_ERRORS, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

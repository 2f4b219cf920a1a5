"""Simulator-backed experiments: direction, slip, pressure and surface classification."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import imagery, simulator as sim
from .classify.stacking import stack_sequence
from .datasets import LABELS, Manifest, Recording, gate_and_split, stack_candidates
from .pressure import PressureSample
from .tracking import (AugmentSpec, DataError, RidgeMarkerModel, VectorField, average_vector, predict_markers,
                       track, train_marker_model)

CLASSIFIER_SIDE = 32


# ---------------------------------------------------------------------------
# Marker model
# ---------------------------------------------------------------------------

def _final_state(script: sim.StimulusScript, config: sim.SensorConfig, seed: int):
    s = sim.Simulator(config, script.surface, seed=seed)
    res = None
    for action in script.actions():
        res = s.step(action)
    return s, res


def marker_training_set(n: int, config: sim.SensorConfig = sim.NOISY_CONFIG, seed: int = 0,
                        glare_fraction: float = 0.2):
    """Labelled (binary bits, true positions) pairs over presses, shears and rest."""
    rng = np.random.default_rng(seed)
    glare_cfg = replace(config, glare=sim.GlareSpec())
    out = []
    for k in range(n):
        kind = str(rng.choice(["hard", "soft", "slippery"]))
        depth = float(rng.uniform(0.0, 1.0))
        mode = int(rng.integers(0, 3))
        if mode == 0:
            script = sim.press_script(depth, kind)
        elif mode == 1:
            script = sim.shear_script(rng.normal(size=2), kind, depth=max(depth, 0.1),
                                      speed=float(rng.uniform(0.0, 2.0)), frames=int(rng.integers(1, 15)))
        else:
            script = sim.StimulusScript().idle(3)
        cfg = glare_cfg if rng.random() < glare_fraction else config
        s, res = _final_state(script, cfg, seed * 100003 + k)
        frame = s.render(res.positions)
        out.append((imagery.adaptive_threshold(frame).bits, res.positions))
    return out


def fit_marker_model(n: int = 300, seed: int = 0, alpha: float = 150.0,
                     augment: AugmentSpec | None = None) -> RidgeMarkerModel:
    return train_marker_model(marker_training_set(n, seed=seed), alpha, augment)


# ---------------------------------------------------------------------------
# Direction / slip (average vectors)
# ---------------------------------------------------------------------------

DIRECTIONS = {"left": (-1.0, 0.0), "right": (1.0, 0.0), "center": None}


@dataclass
class DirectionTrial:
    sensation: str
    surface: str
    depth: float
    vector_model: tuple[float, float] | None  # average vector from centroid tracking
    regression_model: tuple[float, float] | None  # from the ridge marker model
    truth: tuple[float, float]
    tracked: int  # vectors found by centroid tracking


def direction_trial(sensation: str, kind: str, seed: int, depth: float | None = None,
                    marker_model: RidgeMarkerModel | None = None,
                    config: sim.SensorConfig = sim.RIG_CONFIG) -> DirectionTrial:
    rng = np.random.default_rng([seed, 7])
    if depth is None:
        depth = float(rng.uniform(0.3, 0.9))
    if sensation == "center":
        script = sim.press_script(depth, kind)
    else:
        script = sim.shear_script(DIRECTIONS[sensation], kind, depth=depth, speed=2.0, frames=15)
    s = sim.Simulator(config, script.surface, seed=seed)
    first = s.render(s.positions())
    res = None
    for action in script.actions():
        res = s.step(action)
    last = s.render(res.positions)
    b0 = imagery.binarize(first)
    b1 = imagery.binarize(last)
    field = track(imagery.extract_centroids(b0), imagery.extract_centroids(b1))
    vec = average_vector(field) if field.count else None
    reg = None
    if marker_model is not None:
        o = predict_markers(marker_model, imagery.adaptive_threshold(first))
        c = predict_markers(marker_model, imagery.adaptive_threshold(last))
        reg = average_vector(VectorField(o.points, c.points))
    return DirectionTrial(sensation, kind, depth, vec, reg, res.mean_displacement, field.count)


def direction_experiment(trials: int = 30, kind: str = "hard", seed: int = 0,
                         marker_model: RidgeMarkerModel | None = None,
                         sensations=("left", "right", "center")) -> list[DirectionTrial]:
    out = []
    for si, sensation in enumerate(sensations):
        for t in range(trials):
            out.append(direction_trial(sensation, kind, seed + 1000 * si + t, marker_model=marker_model))
    return out


# ---------------------------------------------------------------------------
# Pressure
# ---------------------------------------------------------------------------

def pressure_sample(depth: float, kind: str, seed: int, marker_model: RidgeMarkerModel,
                    config: sim.SensorConfig = sim.NOISY_CONFIG) -> PressureSample:
    """Vectors from the marker model between the untouched and the settled press frame."""
    s = sim.Simulator(config, sim.surface(kind), seed=seed)
    first = s.render(s.positions())
    res = None
    for action in sim.press_script(depth, kind, idle=1).actions():
        res = s.step(action)
    last = s.render(res.positions)
    o = predict_markers(marker_model, imagery.adaptive_threshold(first))
    c = predict_markers(marker_model, imagery.adaptive_threshold(last))
    return PressureSample(VectorField(o.points, c.points), res.force, kind)


def pressure_dataset(n: int, marker_model: RidgeMarkerModel, seed: int = 0,
                     surfaces=("hard", "soft")) -> list[PressureSample]:
    rng = np.random.default_rng([seed, 11])
    out = []
    for k in range(n):
        kind = str(surfaces[int(rng.integers(len(surfaces)))])
        depth = float(rng.uniform(0.0, 1.0))
        out.append(pressure_sample(depth, kind, seed * 100003 + k + 1, marker_model))
    return out


def depth_sweep(depths, kind: str, trials: int, marker_model: RidgeMarkerModel, seed: int = 0):
    """{depth: [PressureSample, ...]} for repeated presses at each commanded depth."""
    out = {}
    for di, d in enumerate(depths):
        out[d] = [pressure_sample(d, kind, seed + 7919 * di + t, marker_model) for t in range(trials)]
    return out


# ---------------------------------------------------------------------------
# Surface classification
# ---------------------------------------------------------------------------

TEXTURE_PAIRS = {
    "lego": ("lego", "smooth_wood"),
    "concrete": ("concrete", "smooth_wood"),
}


@dataclass
class FrameTask:
    """Per-frame classifier inputs plus split stack end indices.

    ``inputs`` is (frames, h, w) for images or (frames, 266) for vectors.
    Stacks for any T <= max_T end at the same frames, so accuracies across
    T compare like with like.
    """

    inputs: np.ndarray
    targets: np.ndarray  # class index per frame
    classes: tuple[str, ...]
    train_ends: np.ndarray
    test_ends: np.ndarray
    max_T: int

    def stacks(self, T: int, part: str = "train") -> tuple[np.ndarray, np.ndarray]:
        if T > self.max_T:
            raise ValueError(f"task was built for T <= {self.max_T}")
        ends = self.train_ends if part == "train" else self.test_ends
        return stack_sequence(self.inputs, ends, T), self.targets[ends]

    @property
    def frame_shape(self) -> tuple[int, ...]:
        return self.inputs.shape[1:]


def classifier_frame(frame, side: int = CLASSIFIER_SIDE) -> np.ndarray:
    """Binary frame reduced to side x side pixel coverage, the CNN's per-frame input."""
    bits = imagery.adaptive_threshold(frame).bits
    return imagery.downsample(bits, side)


def build_task(scripts_by_class: dict[str, list[sim.StimulusScript]], seed: int = 0, max_T: int = 10,
               side: int = CLASSIFIER_SIDE, stride: int = 2, test_fraction: float = 0.25,
               config: sim.SensorConfig = sim.RIG_CONFIG, keep_labels=("no_touch",),
               features: str = "image") -> FrameTask:
    """Simulate every script once as its own trial and cut it into stacks.

    The k-th script of every class runs with the same simulator seed, so
    sensor placement (contact offset, tilt, depth offset) is matched across
    classes and cannot stand in for the surface. Matched trials stay
    together on one side of the train/test split. Recording starts with the
    first drag frame when a script has one, so the approach and press are
    not part of any stack. Frames are gated by the ground-truth contact
    flag; classes named in ``keep_labels`` are exempt, so no-touch trials
    still yield examples.

    ``features="image"`` gives downsampled binary frames for the CNN;
    ``"vector"`` gives the 266 marker displacements from rest for the FNN.
    """
    if features not in ("image", "vector"):
        raise ValueError(f"unknown feature kind {features!r}")
    classes = tuple(scripts_by_class)
    pairs = min(len(v) for v in scripts_by_class.values())
    if pairs < 2:
        raise ValueError("every class needs at least two scripts")
    inputs, targets, rows, pair_of = [], [], [], []
    trial = 0
    for ci, cls in enumerate(classes):
        for k, script in enumerate(scripts_by_class[cls][:pairs]):
            s = sim.Simulator(config, script.surface, seed=seed * 100003 + k)
            recording = not any(a.kind == "shear" for _, a in script.steps)
            for action in script.actions():
                res = s.step(action)
                recording = recording or action.kind == "shear"
                if not recording:
                    continue
                if features == "image":
                    inputs.append(classifier_frame(s.render(res.positions), side))
                else:
                    inputs.append((res.positions - s.rest).ravel())
                targets.append(ci)
                pair_of.append(k)
                # the class name stands in for the label so gating sees no_touch trials
                rows.append({"frame_index": len(rows), "trial_id": trial, "label": cls,
                             "contact": int(res.contact)})
            trial += 1
    manifest = Manifest.from_records(rows)
    cands = np.array(stack_candidates(manifest, manifest.contact_flags, max_T, keep_labels), dtype=int)
    if not len(cands):
        raise DataError("no contact frames with enough history to form a stack")
    n_test = min(max(1, int(round(test_fraction * pairs))), pairs - 1)
    test_pairs = np.random.default_rng(seed).permutation(pairs)[:n_test]
    is_test = np.isin(np.array(pair_of)[cands], test_pairs)
    train = cands[~is_test][::stride]
    test = cands[is_test][::stride]
    return FrameTask(np.array(inputs), np.array(targets), classes, train, test, max_T)


def _slide(kind_or_spec, rng, frames: int, depth_range=(0.5, 0.6)):
    """The rig's repeated drag: fixed direction and speed, depth varying slightly."""
    spec = kind_or_spec if isinstance(kind_or_spec, sim.SurfaceSpec) else sim.surface(kind_or_spec)
    return sim.slide_script(spec.kind, depth=float(rng.uniform(*depth_range)), direction=(1.0, 0.0),
                            speed=1.0, frames=frames, surface_spec=spec)


def texture_task(pair: str = "lego", trials: int = 40, frames: int = 30, seed: int = 0,
                 max_T: int = 10, **kw) -> FrameTask:
    """Textured surface vs smooth wood, both dragged under identical scripts."""
    rng = np.random.default_rng([seed, 13])
    rough, smooth = TEXTURE_PAIRS[pair]
    scripts = {rough: [], smooth: []}
    for _ in range(trials):
        for kind in (rough, smooth):
            scripts[kind].append(_slide(kind, rng, frames))
    return build_task(scripts, seed=seed, max_T=max_T, **kw)


def surface_state_task(trials: int = 8, frames: int = 30, seed: int = 0, max_T: int = 10, **kw) -> FrameTask:
    """{soft, hard, slippery, no_touch}: drag on each surface, or no contact at all."""
    rng = np.random.default_rng([seed, 17])
    scripts = {"soft": [], "hard": [], "slippery": [], "no_touch": []}
    for _ in range(trials):
        for kind in ("soft", "hard", "slippery"):
            scripts[kind].append(_slide(kind, rng, frames))
        scripts["no_touch"].append(sim.StimulusScript().idle(frames + 10))
    return build_task(scripts, seed=seed, max_T=max_T, **kw)


def temporal_task(trials: int = 12, frames: int = 30, seed: int = 0, max_T: int = 10,
                  amplitude: float = 0.8, coherence: float = 1.0, memory: float = 0.0,
                  **kw) -> FrameTask:
    """Two classes that look alike frame by frame and differ only over time.

    Both displace the markers by the same random texture distribution; in
    "dynamic" it drifts with frame-to-frame correlation ``memory`` (0 redraws
    it every frame), in "frozen" it is drawn once and held for the trial.
    """
    rng = np.random.default_rng([seed, 19])
    specs = {
        "dynamic": sim.SurfaceSpec("concrete", texture_amplitude=amplitude, texture_mode="random",
                                   texture_coherence=coherence, texture_memory=memory),
        "frozen": sim.SurfaceSpec("concrete", texture_amplitude=amplitude, texture_mode="frozen",
                                  texture_coherence=coherence),
    }
    scripts = {name: [] for name in specs}
    for _ in range(trials):
        state = rng.bit_generator.state
        for name, spec in specs.items():
            # identical drag parameters for the two classes
            rng.bit_generator.state = state
            scripts[name].append(_slide(spec, rng, frames))
    return build_task(scripts, seed=seed, max_T=max_T, **kw)


def task_from_recording(rec: Recording, max_T: int, seed: int = 0, side: int = CLASSIFIER_SIDE,
                        features: str = "image", marker_model: RidgeMarkerModel | None = None,
                        test_fraction: float = 0.25, classes=None, keep_labels=("no_touch",)) -> FrameTask:
    """Classifier task from a saved recording, labelled and gated by its manifest.

    Vector features are marker displacements from each trial's first frame,
    taken from ``marker_model`` predictions when given, else from the
    recording's marker labels.
    """
    manifest = rec.manifest
    if len(rec.frames) != len(manifest):
        raise DataError(f"{len(rec.frames)} frames but {len(manifest)} manifest rows")
    present = set(manifest.labels)
    if classes is None:
        classes = tuple(l for l in LABELS if l in present) + tuple(sorted(present - set(LABELS)))
    index = {c: i for i, c in enumerate(classes)}
    if features == "image":
        inputs = np.array([classifier_frame(f, side) for f in rec.frames])
    elif features == "vector":
        if marker_model is not None:
            pts = [predict_markers(marker_model, imagery.adaptive_threshold(f)).points for f in rec.frames]
        elif rec.markers is not None:
            try:
                pts = [rec.markers[row.frame_index] for row in manifest]
            except KeyError as exc:
                raise DataError(f"no marker labels for frame {exc.args[0]}") from None
        else:
            raise DataError("vector features need a marker model or marker labels")
        inputs, origin, prev_trial = [], None, None
        for row, p in zip(manifest, pts):
            if row.trial_id != prev_trial:
                origin, prev_trial = p, row.trial_id
            inputs.append((p - origin).ravel())
        inputs = np.array(inputs)
    else:
        raise ValueError(f"unknown feature kind {features!r}")
    split = gate_and_split(manifest, manifest.contact_flags, max_T, seed=seed,
                           test_fraction=test_fraction, keep_labels=keep_labels)
    keep = lambda idx: np.array([i for i in idx if manifest[i].label in index], dtype=int)
    targets = np.array([index.get(lab, -1) for lab in manifest.labels])
    return FrameTask(inputs, targets, tuple(classes), keep(split.train), keep(split.test), max_T)

"""Deterministic synthetic TacTip.

The membrane is modelled as a displacement field over a fixed hexagonal
marker layout:

* pressing pushes markers radially outward from the contact centre, scaled
  by depth and attenuated by surface compliance;
* shearing adds a lateral offset proportional to drag speed and to how well
  the surface grips the membrane (slip coupling);
* textured surfaces add per-marker jitter while sliding;
* releasing relaxes everything exponentially back to rest.

Markers are rendered as bright anti-aliased discs on a dark background.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .imagery import GrayFrame

# membrane response constants
PRESS_GAIN = 6.5  # px of radial amplitude per cm of effective depth
PRESS_SIGMA = 30.0  # px, width of the press footprint
SHEAR_GAIN = 1.5  # px of lateral offset per px/frame of drag speed
SHEAR_SIGMA = 45.0  # px, width of the shear footprint
RESPONSE_RATE = 0.35  # fraction of the remaining gap closed per frame
FORCE_SCALE = 100.0  # normalised force per cm of effective depth
CONTACT_DEPTH = 0.01  # cm
SETTLE_EPS = 1e-4

SURFACE_KINDS = ("hard", "soft", "slippery", "lego", "concrete", "smooth_wood")
TEXTURE_MODES = ("none", "periodic", "random", "frozen")


class ScriptError(ValueError):
    """Malformed stimulus script or an invalid action sequence."""


@dataclass(frozen=True)
class SurfaceSpec:
    kind: str = "hard"
    compliance: float = 0.0
    slip_coupling: float = 1.0
    texture_amplitude: float = 0.0  # px
    texture_period: float = 0.0  # px; 0 for aperiodic
    texture_mode: str = "none"
    # share of the random texture that moves the whole contact patch together
    texture_coherence: float = 0.0
    # frame-to-frame correlation of a random texture; 0 redraws it independently every frame
    texture_memory: float = 0.0

    def __post_init__(self):
        if self.kind not in SURFACE_KINDS:
            raise ScriptError(f"unknown surface kind {self.kind!r}")
        if not 0.0 <= self.compliance <= 1.0 or not 0.0 <= self.slip_coupling <= 1.0:
            raise ScriptError("compliance and slip_coupling must lie in [0, 1]")
        if self.texture_mode not in TEXTURE_MODES:
            raise ScriptError(f"unknown texture mode {self.texture_mode!r}")
        if not 0.0 <= self.texture_coherence <= 1.0:
            raise ScriptError("texture_coherence must lie in [0, 1]")
        if not 0.0 <= self.texture_memory < 1.0:
            raise ScriptError("texture_memory must lie in [0, 1)")


SURFACES = {
    "hard": SurfaceSpec("hard"),
    "soft": SurfaceSpec("soft", compliance=0.4, slip_coupling=0.9),
    "slippery": SurfaceSpec("slippery", slip_coupling=0.15),
    "lego": SurfaceSpec("lego", texture_amplitude=2.5, texture_period=8.0, texture_mode="periodic"),
    "concrete": SurfaceSpec("concrete", texture_amplitude=0.3, texture_mode="random"),
    "smooth_wood": SurfaceSpec("smooth_wood"),
}


def surface(kind: str) -> SurfaceSpec:
    try:
        return SURFACES[kind]
    except KeyError:
        raise ScriptError(f"unknown surface kind {kind!r}") from None


@dataclass(frozen=True)
class GlareSpec:
    position: tuple[float, float] = (92.0, 36.0)
    area: float = 250.0
    level: int = 255


@dataclass(frozen=True)
class SensorConfig:
    width: int = 128
    height: int = 128
    marker_count: int = 133
    spacing: float = 8.5
    marker_radius: float = 3.0
    background: int = 20
    marker_level: int = 230
    glare: GlareSpec | None = None
    pixel_noise: float = 0.0  # grey levels, std
    marker_jitter: float = 0.0  # px, std, per frame
    contact_jitter: float = 3.0  # px, std of contact centre per trial
    tilt_std: float = 0.5  # px per cm of depth, uniform lateral bias per trial
    depth_jitter: float = 0.03  # cm, std per trial
    seed: int = 0

    def noiseless(self) -> "SensorConfig":
        return replace(self, pixel_noise=0.0, marker_jitter=0.0)


DEFAULT_CONFIG = SensorConfig()
NOISY_CONFIG = SensorConfig(pixel_noise=4.0, marker_jitter=0.08)
# a drag rig repeats its placement far more tightly than a hand-held press
RIG_CONFIG = SensorConfig(pixel_noise=4.0, marker_jitter=0.08, contact_jitter=0.5, tilt_std=0.1, depth_jitter=0.01)


def rest_layout(config: SensorConfig = DEFAULT_CONFIG) -> np.ndarray:
    """``marker_count`` hexagonal-lattice points nearest the image centre, ordered by (y, x)."""
    cx, cy = (config.width - 1) / 2.0, (config.height - 1) / 2.0
    s = config.spacing
    rows = int(math.ceil(math.sqrt(config.marker_count))) + 4
    pts = []
    for j in range(-rows, rows + 1):
        y = j * s * math.sqrt(3) / 2
        shift = 0.5 * s if j % 2 else 0.0
        for i in range(-rows, rows + 1):
            pts.append((i * s + shift, y))
    pts = np.array(pts)
    r = np.hypot(pts[:, 0], pts[:, 1])
    ang = np.arctan2(pts[:, 1], pts[:, 0])
    order = np.lexsort((ang, np.round(r, 9)))
    chosen = pts[order[:config.marker_count]] + np.array([cx, cy])
    lo = 2 * config.marker_radius
    if (chosen[:, 0] < lo).any() or (chosen[:, 1] < lo).any() \
            or (chosen[:, 0] > config.width - 1 - lo).any() or (chosen[:, 1] > config.height - 1 - lo).any():
        raise ValueError("rest layout does not fit inside the frame; reduce spacing or marker count")
    return chosen[np.lexsort((chosen[:, 0], chosen[:, 1]))]


# ---------------------------------------------------------------------------
# Scripts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Action:
    kind: str  # idle | press | shear | release
    depth: float = 0.0
    direction: tuple[float, float] = (0.0, 0.0)
    speed: float = 0.0


@dataclass
class StimulusScript:
    steps: list[tuple[int, Action]] = field(default_factory=list)
    surface: SurfaceSpec = field(default_factory=lambda: SURFACES["hard"])

    def __post_init__(self):
        for duration, action in self.steps:
            if duration < 1:
                raise ScriptError("step durations must be >= 1")
            if action.kind == "press" and not 0.0 <= action.depth <= 1.0:
                raise ScriptError(f"press depth {action.depth} outside [0, 1] cm")

    @property
    def frame_count(self) -> int:
        return sum(d for d, _ in self.steps)

    def actions(self):
        for duration, action in self.steps:
            for _ in range(duration):
                yield action

    # builders
    def _add(self, frames: int, action: Action) -> "StimulusScript":
        self.steps.append((frames, action))
        self.__post_init__()
        return self

    def idle(self, frames: int) -> "StimulusScript":
        return self._add(frames, Action("idle"))

    def press(self, depth: float, frames: int) -> "StimulusScript":
        return self._add(frames, Action("press", depth=depth))

    def shear(self, direction, speed: float, frames: int) -> "StimulusScript":
        d = np.asarray(direction, dtype=float)
        norm = float(np.hypot(*d))
        if norm == 0:
            raise ScriptError("shear direction must be non-zero")
        return self._add(frames, Action("shear", direction=(d[0] / norm, d[1] / norm), speed=speed))

    def release(self, frames: int) -> "StimulusScript":
        return self._add(frames, Action("release"))


def parse_script(text: str) -> StimulusScript:
    """Parse the line-oriented script format.

    ::

        surface=lego
        idle 5
        press 0.4 30
        shear 1,0 2 60
        release 20
    """
    script = StimulusScript()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            if line.startswith("surface="):
                script.surface = surface(line.split("=", 1)[1].strip())
                continue
            parts = line.split()
            cmd = parts[0]
            if cmd == "idle" and len(parts) == 2:
                script.idle(int(parts[1]))
            elif cmd == "press" and len(parts) == 3:
                script.press(float(parts[1]), int(parts[2]))
            elif cmd == "shear" and len(parts) == 4:
                dx, dy = (float(v) for v in parts[1].split(","))
                script.shear((dx, dy), float(parts[2]), int(parts[3]))
            elif cmd == "release" and len(parts) == 2:
                script.release(int(parts[1]))
            else:
                raise ScriptError(f"unrecognised command {line!r}")
        except (ValueError, ScriptError) as exc:
            raise ScriptError(f"line {lineno}: {exc}") from None
    if not script.steps:
        raise ScriptError("script has no steps")
    return script


def format_script(script: StimulusScript) -> str:
    lines = [f"surface={script.surface.kind}"]
    for duration, a in script.steps:
        if a.kind == "press":
            lines.append(f"press {a.depth:g} {duration}")
        elif a.kind == "shear":
            lines.append(f"shear {a.direction[0]:g},{a.direction[1]:g} {a.speed:g} {duration}")
        else:
            lines.append(f"{a.kind} {duration}")
    return "\n".join(lines) + "\n"


def load_script(path: str | Path) -> StimulusScript:
    return parse_script(Path(path).read_text())


# ---------------------------------------------------------------------------
# Membrane state
# ---------------------------------------------------------------------------

@dataclass
class StepResult:
    positions: np.ndarray
    force: float
    mean_displacement: tuple[float, float]
    contact: bool
    depth: float


class Simulator:
    """One trial: a sensor in contact with one surface, advanced a frame at a time."""

    def __init__(self, config: SensorConfig = DEFAULT_CONFIG, surface_spec: SurfaceSpec | None = None,
                 seed: int | None = None):
        self.config = config
        self.surface = surface_spec or SURFACES["hard"]
        self.rng = np.random.default_rng(config.seed if seed is None else seed)
        self.rest = rest_layout(config)
        n = len(self.rest)
        centre = np.array([(config.width - 1) / 2.0, (config.height - 1) / 2.0])
        self.contact_centre = centre + self.rng.normal(0.0, config.contact_jitter, 2) if config.contact_jitter else centre
        self.tilt = self.rng.normal(0.0, config.tilt_std, 2) if config.tilt_std else np.zeros(2)
        self.depth_offset = float(self.rng.normal(0.0, config.depth_jitter)) if config.depth_jitter else 0.0
        rel = self.rest - self.contact_centre
        dist2 = (rel ** 2).sum(axis=1)
        self._press_basis = rel / PRESS_SIGMA * np.exp(-dist2 / (2 * PRESS_SIGMA ** 2))[:, None]
        self._shear_weight = np.exp(-dist2 / (2 * SHEAR_SIGMA ** 2))[:, None]
        self._frozen = self._random_texture(n)
        self._held: np.ndarray | None = None
        self._phase = self.rng.uniform(0, 2 * np.pi)

        self.depth = 0.0
        self.depth_target = 0.0
        self.lateral = np.zeros(2)
        self.lateral_target = np.zeros(2)
        self.slide = 0.0
        self.slide_dir = np.array([1.0, 0.0])
        self.sliding = False

    # -- dynamics ---------------------------------------------------------
    def _advance(self, action: Action) -> None:
        if action.kind == "press":
            self.depth_target = max(0.0, action.depth + self.depth_offset) if action.depth > 0 else 0.0
            self.lateral_target = np.zeros(2)
            self.sliding = False
        elif action.kind == "shear":
            if self.depth_target <= 0.0:
                raise ScriptError("shear requires the sensor to be pressed first")
            d = np.asarray(action.direction, dtype=float)
            self.lateral_target = d * action.speed * SHEAR_GAIN * self.surface.slip_coupling
            self.slide += action.speed
            self.slide_dir = d
            self.sliding = action.speed > 0
        elif action.kind == "release":
            self.depth_target = 0.0
            self.lateral_target = np.zeros(2)
            self.sliding = False
        elif action.kind == "idle":
            self.lateral_target = np.zeros(2)
            self.sliding = False
        else:
            raise ScriptError(f"unknown action {action.kind!r}")
        self.depth += RESPONSE_RATE * (self.depth_target - self.depth)
        self.lateral = self.lateral + RESPONSE_RATE * (self.lateral_target - self.lateral)
        if abs(self.depth - self.depth_target) < SETTLE_EPS:
            self.depth = self.depth_target
        if np.abs(self.lateral - self.lateral_target).max() < SETTLE_EPS:
            self.lateral = self.lateral_target.copy()

    def _random_texture(self, n: int) -> np.ndarray:
        """Unit-variance per-marker draws, a ``texture_coherence`` share of them common to all markers."""
        noise = self.rng.normal(0.0, 1.0, (n, 2))
        c = self.surface.texture_coherence
        if c:
            noise = c * self.rng.normal(0.0, 1.0, 2) + np.sqrt(1.0 - c * c) * noise
        return noise

    def _texture(self) -> np.ndarray:
        s = self.surface
        if s.texture_mode == "none" or s.texture_amplitude == 0 or self.depth <= CONTACT_DEPTH:
            return 0.0
        amp = s.texture_amplitude * self._shear_weight
        if s.texture_mode == "frozen":
            return amp * self._frozen
        if not self.sliding:
            return 0.0
        if s.texture_mode == "random":
            fresh = self._random_texture(len(self.rest))
            rho = s.texture_memory
            if rho and self._held is not None:
                # AR(1) step that keeps unit variance
                fresh = rho * self._held + np.sqrt(1.0 - rho * rho) * fresh
            self._held = fresh
            return amp * fresh
        # periodic studs passing under the membrane
        along = self.rest @ self.slide_dir + self.slide
        across = self.rest @ np.array([-self.slide_dir[1], self.slide_dir[0]])
        phase = 2 * np.pi * along / s.texture_period + self._phase
        bump = np.sin(phase) * np.cos(2 * np.pi * across / s.texture_period)
        return amp * bump[:, None] * self.slide_dir[None, :]

    def positions(self) -> np.ndarray:
        eff = max(self.depth, 0.0) * (1.0 - self.surface.compliance)
        pos = self.rest + PRESS_GAIN * eff * self._press_basis
        pos = pos + self._shear_weight * self.lateral + self.tilt * max(self.depth, 0.0)
        pos = pos + self._texture()
        if self.config.marker_jitter:
            pos = pos + self.rng.normal(0.0, self.config.marker_jitter, pos.shape)
        return pos

    def force(self) -> float:
        eff = max(self.depth, 0.0) * (1.0 - self.surface.compliance)
        return float(np.clip(FORCE_SCALE * eff, 0.0, 100.0))

    def step(self, action: Action) -> StepResult:
        self._advance(action)
        pos = self.positions()
        disp = (pos - self.rest).mean(axis=0)
        return StepResult(pos, self.force(), (float(disp[0]), float(disp[1])),
                          self.depth > CONTACT_DEPTH, self.depth)

    def render(self, positions: np.ndarray) -> GrayFrame:
        return render(positions, self.config, self.rng)


def step(sim: Simulator, action: Action) -> StepResult:
    return sim.step(action)


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

def render(positions: np.ndarray, config: SensorConfig = DEFAULT_CONFIG,
           rng: np.random.Generator | None = None) -> GrayFrame:
    """Draw anti-aliased marker discs, optional glare and pixel noise."""
    h, w = config.height, config.width
    img = np.full((h, w), float(config.background))
    r = config.marker_radius
    amp = config.marker_level - config.background
    half = int(math.ceil(r + 1))
    for x, y in np.asarray(positions, dtype=float).reshape(-1, 2):
        x0, x1 = max(int(math.floor(x)) - half, 0), min(int(math.floor(x)) + half + 2, w)
        y0, y1 = max(int(math.floor(y)) - half, 0), min(int(math.floor(y)) + half + 2, h)
        if x0 >= x1 or y0 >= y1:
            continue
        yy, xx = np.mgrid[y0:y1, x0:x1]
        cover = np.clip(r + 0.5 - np.hypot(xx - x, yy - y), 0.0, 1.0)
        np.maximum(img[y0:y1, x0:x1], config.background + amp * cover, out=img[y0:y1, x0:x1])
    if config.glare is not None:
        g = config.glare
        gr = math.sqrt(g.area / math.pi)
        yy, xx = np.mgrid[0:h, 0:w]
        cover = np.clip(gr + 0.5 - np.hypot(xx - g.position[0], yy - g.position[1]), 0.0, 1.0)
        img = np.maximum(img, config.background + (g.level - config.background) * cover)
    if config.pixel_noise:
        if rng is None:
            rng = np.random.default_rng(config.seed)
        img = img + rng.normal(0.0, config.pixel_noise, img.shape)
    return GrayFrame(np.clip(np.rint(img), 0, 255).astype(np.uint8))


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------

@dataclass
class SimulatedRun:
    frames: list[GrayFrame]
    rows: list[dict]
    positions: list[np.ndarray]  # ground-truth marker positions per frame


def run_trial(script: StimulusScript, config: SensorConfig, seed: int, trial_id: int = 0,
              first_index: int = 0) -> SimulatedRun:
    sim = Simulator(config, script.surface, seed=seed)
    frames, rows, positions = [], [], []
    for k, action in enumerate(script.actions()):
        res = sim.step(action)
        frame = sim.render(res.positions)
        idx = first_index + k
        frame.timestamp = idx
        frames.append(frame)
        positions.append(res.positions)
        rows.append({
            "frame_index": idx,
            "trial_id": trial_id,
            "label": script.surface.kind if res.contact else "no_touch",
            "pressure": round(res.force, 6),
            "contact": int(res.contact),
            "disp_x": round(res.mean_displacement[0], 6),
            "disp_y": round(res.mean_displacement[1], 6),
            "depth": round(res.depth, 6),
            "surface": script.surface.kind,
        })
    return SimulatedRun(frames, rows, positions)


def generate_dataset(script: StimulusScript | list[StimulusScript], config: SensorConfig = DEFAULT_CONFIG,
                     seed: int = 0, trials: int = 1) -> SimulatedRun:
    """Run ``trials`` repetitions of each script; trial k uses seed ``seed + k``."""
    scripts = script if isinstance(script, list) else [script]
    out = SimulatedRun([], [], [])
    trial = 0
    for sc in scripts:
        for _ in range(trials):
            run = run_trial(sc, config, seed + trial, trial_id=trial, first_index=len(out.frames))
            out.frames += run.frames
            out.rows += run.rows
            out.positions += run.positions
            trial += 1
    return out


# ready-made scripts used by experiments and tests

def press_script(depth: float, kind: str = "hard", settle: int = 15, idle: int = 2) -> StimulusScript:
    return StimulusScript(surface=surface(kind)).idle(idle).press(depth, settle)


def shear_script(direction, kind: str = "hard", depth: float = 0.5, speed: float = 2.0,
                 frames: int = 20, idle: int = 2) -> StimulusScript:
    return (StimulusScript(surface=surface(kind)).idle(idle).press(depth, 10)
            .shear(direction, speed, frames))


def slide_script(kind: str, depth: float = 0.6, direction=(1.0, 0.0), speed: float = 1.0,
                 frames: int = 40, surface_spec: SurfaceSpec | None = None) -> StimulusScript:
    sc = StimulusScript(surface=surface_spec or surface(kind))
    return sc.idle(2).press(depth, 8).shear(direction, speed, frames)

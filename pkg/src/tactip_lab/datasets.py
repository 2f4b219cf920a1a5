"""Frame containers + manifests on disk, validation, contact gating and splits."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .imagery import FormatError, GrayFrame, read_container, write_container
from .tracking import DataError, read_marker_labels, write_marker_labels

LABELS = ("soft", "hard", "slippery", "no_touch", "lego", "concrete", "smooth_wood")
SURFACE_STATES = ("soft", "hard", "slippery", "no_touch")
MANIFEST_COLUMNS = ("frame_index", "trial_id", "label", "pressure", "contact", "disp_x", "disp_y", "depth",
                    "surface")

CONTAINER_NAME = "frames.tacf"
MANIFEST_NAME = "manifest.csv"
MARKERS_NAME = "markers.txt"


@dataclass
class ManifestRow:
    frame_index: int
    label: str
    contact: bool
    trial_id: int
    pressure: float | None = None
    disp_x: float = 0.0
    disp_y: float = 0.0
    depth: float = 0.0
    surface: str = ""  # surface under the sensor, recorded even when not in contact

    @classmethod
    def from_dict(cls, d: dict) -> "ManifestRow":
        return cls(
            frame_index=int(d["frame_index"]),
            label=str(d["label"]),
            contact=bool(int(d["contact"])),
            trial_id=int(d["trial_id"]),
            pressure=None if d.get("pressure") in (None, "") else float(d["pressure"]),
            disp_x=float(d.get("disp_x") or 0.0),
            disp_y=float(d.get("disp_y") or 0.0),
            depth=float(d.get("depth") or 0.0),
            surface=str(d.get("surface") or ""),
        )

    def as_record(self) -> dict:
        return {
            "frame_index": self.frame_index,
            "trial_id": self.trial_id,
            "label": self.label,
            "pressure": "" if self.pressure is None else f"{self.pressure:.6f}",
            "contact": int(self.contact),
            "disp_x": f"{self.disp_x:.6f}",
            "disp_y": f"{self.disp_y:.6f}",
            "depth": f"{self.depth:.6f}",
            "surface": self.surface,
        }


class Manifest(list):
    """List of ManifestRow with CSV round-tripping."""

    @classmethod
    def from_records(cls, records) -> "Manifest":
        return cls(r if isinstance(r, ManifestRow) else ManifestRow.from_dict(r) for r in records)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=MANIFEST_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in self:
            w.writerow(row.as_record())
        return buf.getvalue()

    @property
    def contact_flags(self) -> np.ndarray:
        return np.array([r.contact for r in self], dtype=bool)

    @property
    def trial_ids(self) -> np.ndarray:
        return np.array([r.trial_id for r in self], dtype=int)

    @property
    def labels(self) -> list[str]:
        return [r.label for r in self]


def write_manifest(path: str | Path, manifest: Manifest) -> None:
    Path(path).write_text(manifest.to_csv())


def read_manifest(path: str | Path) -> Manifest:
    """Parse a manifest CSV. Malformed rows raise FormatError naming the line."""
    text = Path(path).read_text()
    reader = csv.DictReader(io.StringIO(text))
    missing = {"frame_index", "trial_id", "label", "contact"} - set(reader.fieldnames or ())
    if missing:
        raise FormatError(f"{path}: manifest header lacks {sorted(missing)}", 0)
    rows = Manifest()
    for lineno, rec in enumerate(reader, start=2):
        try:
            rows.append(ManifestRow.from_dict(rec))
        except (TypeError, ValueError) as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from None
    return rows


@dataclass
class ValidationReport:
    findings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.findings

    def __str__(self) -> str:
        return "ok" if self.ok else "\n".join(self.findings)


def validate(manifest: Manifest, frames: list[GrayFrame] | None = None,
             vocabulary=LABELS) -> ValidationReport:
    """Check row/frame counts, label vocabulary and index monotonicity."""
    report = ValidationReport()
    if frames is not None and len(frames) != len(manifest):
        report.findings.append(f"manifest has {len(manifest)} rows but container has {len(frames)} frames")
    prev = None
    for i, row in enumerate(manifest):
        if row.label not in vocabulary:
            report.findings.append(f"row {i} (frame {row.frame_index}): unknown label {row.label!r}")
        if prev is not None and row.frame_index <= prev:
            report.findings.append(f"row {i}: frame_index {row.frame_index} not greater than {prev}")
        if row.pressure is not None and row.pressure < 0:
            report.findings.append(f"row {i}: negative pressure {row.pressure}")
        prev = row.frame_index
    return report


# ---------------------------------------------------------------------------
# Run directories: frames.tacf + manifest.csv (+ markers.txt)
# ---------------------------------------------------------------------------

@dataclass
class Recording:
    frames: list[GrayFrame]
    manifest: Manifest
    markers: dict[int, np.ndarray] | None = None


def save_recording(directory: str | Path, rec: Recording) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    try:
        write_container(d / CONTAINER_NAME, rec.frames)
        write_manifest(d / MANIFEST_NAME, rec.manifest)
        if rec.markers is not None:
            write_marker_labels(d / MARKERS_NAME, rec.markers)
    except OSError as exc:
        raise OSError(f"writing recording under {d}: {exc}") from exc


def load_recording(directory: str | Path) -> Recording:
    d = Path(directory)
    frames = read_container(d / CONTAINER_NAME)
    manifest = read_manifest(d / MANIFEST_NAME)
    markers = read_marker_labels(d / MARKERS_NAME) if (d / MARKERS_NAME).exists() else None
    return Recording(frames, manifest, markers)


def recording_from_run(run) -> Recording:
    """Wrap a simulator run (frames, manifest dicts, true positions)."""
    manifest = Manifest.from_records(run.rows)
    markers = {row.frame_index: p for row, p in zip(manifest, run.positions)}
    return Recording(run.frames, manifest, markers)


# ---------------------------------------------------------------------------
# Gating and splitting
# ---------------------------------------------------------------------------

@dataclass
class Split:
    train: list[int]
    test: list[int]
    seed: int
    test_trials: list[int] = field(default_factory=list)


def stack_candidates(manifest: Manifest, contact, T: int, keep_labels=()) -> list[int]:
    """Row indices that can end a T-frame stack.

    A row qualifies when it is gated as contact (or carries one of
    ``keep_labels``, which is how no-touch examples enter a 4-state task)
    and has T-1 predecessors in the same trial.
    """
    contact = np.asarray(contact, dtype=bool)
    if len(contact) != len(manifest):
        raise DataError(f"{len(contact)} contact flags for {len(manifest)} manifest rows")
    out = []
    run_start = 0
    for i, row in enumerate(manifest):
        if i > 0 and manifest[i - 1].trial_id != row.trial_id:
            run_start = i
        if i - run_start < T - 1:
            continue
        if contact[i] or row.label in keep_labels:
            out.append(i)
    return out


def gate_and_split(manifest: Manifest, contact, T: int, seed: int = 0, test_fraction: float = 0.25,
                   keep_labels=()) -> Split:
    """Gate stack candidates and split them by whole trials, stratified by label.

    Each trial is assigned the majority label of its candidates; within each
    label, a seeded shuffle sends ``test_fraction`` of the trials (at least
    one when the label has two or more trials) to the test side.
    """
    cands = stack_candidates(manifest, contact, T, keep_labels)
    if not cands:
        raise DataError("no contact frames with enough history to form a stack")
    rng = np.random.default_rng(seed)
    by_trial: dict[int, list[int]] = {}
    for i in cands:
        by_trial.setdefault(manifest[i].trial_id, []).append(i)
    trial_label = {}
    for tid, idx in by_trial.items():
        labels, counts = np.unique([manifest[i].label for i in idx], return_counts=True)
        trial_label[tid] = labels[np.argmax(counts)]
    test_trials: list[int] = []
    for label in sorted(set(trial_label.values())):
        trials = sorted(t for t, lab in trial_label.items() if lab == label)
        if len(trials) < 2:
            continue
        n_test = max(1, int(round(test_fraction * len(trials))))
        n_test = min(n_test, len(trials) - 1)
        perm = rng.permutation(len(trials))
        test_trials += [trials[k] for k in perm[:n_test]]
    test_set = set(test_trials)
    train = [i for i in cands if manifest[i].trial_id not in test_set]
    test = [i for i in cands if manifest[i].trial_id in test_set]
    return Split(train, test, seed, sorted(test_trials))

"""On-disk formats: recording CSV, label sidecars, manifests, frame dumps.

Recording CSV: header ``index,s1,s2,s3,s4``, one decimal-text voltage row
per sample. Label sidecar: ``class_id,true_start,true_end``. Manifest:
``key=value`` lines. Imported real captures must be converted to this
layout first.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .detector import GestureFrame
from .errors import InvalidParameterError
from .signals import NUM_SENSORS, GestureEvent, LabeledRecording, RawStream
from .simulate import PhysicsParams

RECORDING_HEADER = ["index", "s1", "s2", "s3", "s4"]
LABELS_HEADER = ["class_id", "true_start", "true_end"]
FRAME_INDEX_HEADER = ["k", "start", "end"]
MANIFEST_NAME = "manifest.txt"


def save_recording(path: str | Path, stream: RawStream) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORDING_HEADER)
        for i, row in stream.rows():
            writer.writerow([i] + [f"{v:.6f}" for v in row])


def load_recording(path: str | Path, sampling_rate: float | None = None) -> RawStream:
    """Read a recording CSV; the rate comes from a sibling manifest unless given."""
    path = Path(path)
    if sampling_rate is None:
        manifest_path = path.parent / MANIFEST_NAME
        if manifest_path.exists():
            manifest = load_manifest(manifest_path)
            sampling_rate = float(manifest.get("sampling_rate", 53.0))
        else:
            sampling_rate = 53.0
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != RECORDING_HEADER:
            raise InvalidParameterError(
                f"{path}: expected header {','.join(RECORDING_HEADER)}"
            )
        for line in reader:
            if not line:
                continue
            rows.append([float(v) for v in line[1 : 1 + NUM_SENSORS]])
    if not rows:
        raise InvalidParameterError(f"{path}: recording holds no samples")
    return RawStream(sampling_rate=sampling_rate, values=np.asarray(rows).T)


def labels_path_for(recording_path: str | Path) -> Path:
    p = Path(recording_path)
    return p.with_name(p.stem + ".labels.csv")


def save_labels(path: str | Path, events: list[GestureEvent]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LABELS_HEADER)
        for ev in events:
            writer.writerow([ev.class_id, ev.start, ev.end])


def load_labels(path: str | Path) -> list[GestureEvent]:
    events = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != LABELS_HEADER:
            raise InvalidParameterError(f"{path}: expected header {','.join(LABELS_HEADER)}")
        for line in reader:
            if not line:
                continue
            events.append(
                GestureEvent(class_id=int(line[0]), start=int(line[1]), end=int(line[2]))
            )
    return events


def save_manifest(path: str | Path, entries: dict) -> None:
    lines = [f"{key}={value}" for key, value in entries.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def load_manifest(path: str | Path) -> dict[str, str]:
    out: dict[str, str] = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#") or "=" not in line:
            continue
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def manifest_entries(
    seed: int, sampling_rate: float, params: PhysicsParams, **extra
) -> dict:
    entries = {"seed": seed, "sampling_rate": sampling_rate}
    entries.update(
        {
            "dielectric_constant": params.dielectric_constant,
            "plate_area": params.plate_area,
            "coulomb_constant": params.coulomb_constant,
            "charge_q1": params.charge_q1,
            "charge_q2": params.charge_q2,
            "distance_min": params.distance_min,
            "distance_max": params.distance_max,
            "capacity_omega": params.capacity_omega,
            "discharge_period": params.discharge_period,
            "idle_sigma": params.idle_sigma,
            "baselines": ",".join(str(b) for b in params.baselines),
        }
    )
    entries.update(extra)
    return entries


def save_dataset(
    out_dir: str | Path,
    recordings: list[LabeledRecording],
    manifest: dict,
) -> list[Path]:
    """Write rec_NNNN.csv + rec_NNNN.labels.csv per recording plus one manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, rec in enumerate(recordings, start=1):
        rec_path = out_dir / f"rec_{i:04d}.csv"
        save_recording(rec_path, rec.stream)
        save_labels(labels_path_for(rec_path), rec.events)
        paths.append(rec_path)
    save_manifest(out_dir / MANIFEST_NAME, manifest)
    return paths


def load_dataset(data_dir: str | Path) -> list[LabeledRecording]:
    data_dir = Path(data_dir)
    manifest_path = data_dir / MANIFEST_NAME
    rate = None
    if manifest_path.exists():
        rate = float(load_manifest(manifest_path).get("sampling_rate", 53.0))
    recordings = []
    for rec_path in sorted(data_dir.glob("rec_*.csv")):
        if rec_path.name.endswith(".labels.csv"):
            continue
        stream = load_recording(rec_path, sampling_rate=rate)
        labels_file = labels_path_for(rec_path)
        events = load_labels(labels_file) if labels_file.exists() else []
        recordings.append(LabeledRecording(stream=stream, events=events))
    if not recordings:
        raise InvalidParameterError(f"{data_dir}: no rec_*.csv recordings found")
    return recordings


def save_frames(out_dir: str | Path, frames: list[GestureFrame]) -> Path:
    """Write frames_index.csv plus one frame_NNNN.csv block per frame."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    index_path = out_dir / "frames_index.csv"
    with open(index_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FRAME_INDEX_HEADER)
        for frame in frames:
            writer.writerow([frame.k, frame.start, frame.end])
    for frame in frames:
        if frame.channels is None:
            continue
        with open(out_dir / f"frame_{frame.k:04d}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(RECORDING_HEADER)
            for offset in range(frame.channels.shape[1]):
                writer.writerow(
                    [frame.start + offset]
                    + [f"{v:.6f}" for v in frame.channels[:, offset]]
                )
    return index_path


def load_frame_index(path: str | Path) -> list[GestureFrame]:
    frames = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != FRAME_INDEX_HEADER:
            raise InvalidParameterError(f"{path}: expected header {','.join(FRAME_INDEX_HEADER)}")
        for line in reader:
            if not line:
                continue
            frames.append(GestureFrame(k=int(line[0]), start=int(line[1]), end=int(line[2])))
    return frames

"""Dataset files.

Detections are JSON Lines: a header object, then one record per detection::

    {"frame": 0, "bbox": [x, y, w, h], "score": 0.9, "app": [...], "paf": [...], "actions": [...]}

Ground truth and tracks are CSV with columns ``frame,id,x,y,w,h,labels``;
``labels`` is a ``;``-separated list of class indices (empty = none/Unknown).
Track files add an optional ``scores`` column parallel to ``labels``.
Floats are written with ``repr``, which round-trips every finite double.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .model import (
    OKUTAMA_CLASSES,
    BBox,
    DatasetConfig,
    Observation,
    TrackRow,
    ValidationError,
    validate_observation,
)

FORMAT_VERSION = 1
GT_COLUMNS = ["frame", "id", "x", "y", "w", "h", "labels"]
TRACK_COLUMNS = GT_COLUMNS + ["scores"]


class DataError(ValidationError):
    """A malformed or invalid input file; the message names the line."""


@dataclass(frozen=True)
class DatasetHeader:
    version: int = FORMAT_VERSION
    class_names: tuple[str, ...] = OKUTAMA_CLASSES
    appearance_dim: int = 128
    paf_rgb_dim: int = 2048
    paf_flow_dim: int = 2048
    fps: float = 30.0
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if min(self.appearance_dim, self.paf_rgb_dim, self.paf_flow_dim) <= 0:
            raise ValidationError("header dimensions must be positive")

    @property
    def paf_dim(self) -> int:
        return self.paf_rgb_dim + self.paf_flow_dim

    def dataset_config(self) -> DatasetConfig:
        return DatasetConfig(self.appearance_dim, self.paf_rgb_dim, self.paf_flow_dim, self.class_names, self.fps)

    @classmethod
    def from_config(cls, cfg: DatasetConfig, provenance: dict | None = None) -> "DatasetHeader":
        return cls(FORMAT_VERSION, cfg.class_names, cfg.appearance_dim, cfg.paf_rgb_dim,
                   cfg.paf_flow_dim, cfg.fps, provenance or {})

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "class_names": list(self.class_names),
            "appearance_dim": self.appearance_dim,
            "paf_rgb_dim": self.paf_rgb_dim,
            "paf_flow_dim": self.paf_flow_dim,
            "fps": self.fps,
            "provenance": self.provenance,
        }


def _header_from(d: dict) -> DatasetHeader:
    if d.get("version") != FORMAT_VERSION:
        raise DataError(f"line 1: unsupported format version {d.get('version')!r}")
    try:
        return DatasetHeader(
            version=d["version"],
            class_names=tuple(d.get("class_names", OKUTAMA_CLASSES)),
            appearance_dim=int(d["appearance_dim"]),
            paf_rgb_dim=int(d.get("paf_rgb_dim", 2048)),
            paf_flow_dim=int(d.get("paf_flow_dim", 2048)),
            fps=float(d.get("fps", 30.0)),
            provenance=d.get("provenance", {}),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"line 1: bad header: {e}") from e


def parse_detections_text(text: str) -> tuple[DatasetHeader, list[Observation]]:
    lines = text.splitlines()
    if not lines:
        raise DataError("line 1: missing header")
    try:
        header = _header_from(json.loads(lines[0]))
    except json.JSONDecodeError as e:
        raise DataError(f"line 1: malformed JSON: {e}") from e
    cfg = header.dataset_config()
    out = []
    for n, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            obs = Observation(
                frame=rec["frame"],
                bbox=BBox(*[float(v) for v in rec["bbox"]]),
                det_score=float(rec["score"]),
                appearance=rec["app"],
                paf=rec["paf"],
                action_scores=rec.get("actions", [0.0] * cfg.n_classes),
            )
            out.append(validate_observation(obs, cfg))
        except json.JSONDecodeError as e:
            raise DataError(f"line {n}: malformed JSON: {e}") from e
        except (KeyError, TypeError, ValueError) as e:
            raise DataError(f"line {n}: {e}") from e
    return header, out


def parse_detections(path) -> tuple[DatasetHeader, list[Observation]]:
    return parse_detections_text(Path(path).read_text())


def detections_text(header: DatasetHeader, observations: Iterable[Observation]) -> str:
    buf = io.StringIO()
    buf.write(json.dumps(header.to_dict(), sort_keys=True) + "\n")
    for o in observations:
        rec = {
            "frame": int(o.frame),
            "bbox": o.bbox.as_list(),
            "score": o.det_score,
            "app": o.appearance.tolist(),
            "paf": o.paf.tolist(),
            "actions": o.action_scores.tolist(),
        }
        buf.write(json.dumps(rec) + "\n")
    return buf.getvalue()


def write_detections(path, header: DatasetHeader, observations: Iterable[Observation]) -> None:
    Path(path).write_text(detections_text(header, observations))


def _split_ints(field: str, n: int) -> list[int]:
    field = field.strip()
    if not field:
        return []
    try:
        return [int(v) for v in field.split(";")]
    except ValueError as e:
        raise DataError(f"line {n}: bad label list {field!r}") from e


def parse_rows_text(text: str) -> list[TrackRow]:
    """Parse a ground-truth or track CSV; duplicate ``(frame, id)`` is an error."""
    rows = []
    seen = set()
    for n, rec in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not rec or (n == 1 and rec[0].strip() == "frame"):
            continue
        if len(rec) not in (7, 8):
            raise DataError(f"line {n}: expected 7 or 8 columns, got {len(rec)}")
        try:
            frame, tid = int(rec[0]), int(rec[1])
            box = BBox(*(float(v) for v in rec[2:6]))
        except ValueError as e:
            raise DataError(f"line {n}: {e}") from e
        if frame < 0:
            raise DataError(f"line {n}: negative frame")
        if (frame, tid) in seen:
            raise DataError(f"line {n}: duplicate (frame, id) = ({frame}, {tid})")
        seen.add((frame, tid))
        labels = _split_ints(rec[6], n)
        scores: tuple = ()
        if len(rec) == 8 and rec[7].strip():
            try:
                vals = [float(v) for v in rec[7].split(";")]
            except ValueError as e:
                raise DataError(f"line {n}: bad score list") from e
            if len(vals) != len(labels):
                raise DataError(f"line {n}: scores and labels differ in length")
            scores = tuple(zip(labels, vals))
        rows.append(TrackRow(frame, tid, box, frozenset(labels), scores))
    return rows


def parse_ground_truth(path) -> list[TrackRow]:
    return parse_rows_text(Path(path).read_text())


parse_tracks = parse_ground_truth


def rows_text(rows: Sequence[TrackRow], with_scores: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACK_COLUMNS if with_scores else GT_COLUMNS)
    for r in sorted(rows, key=lambda r: (r.frame, r.id)):
        labels = sorted(r.labels)
        rec = [r.frame, r.id, *(repr(float(v)) for v in r.bbox.as_list()), ";".join(map(str, labels))]
        if with_scores:
            sc = dict(r.scores)
            rec.append(";".join(repr(float(sc[c])) for c in labels) if sc else "")
        w.writerow(rec)
    return buf.getvalue()


def write_tracks(rows: Sequence[TrackRow], path) -> None:
    Path(path).write_text(rows_text(rows, with_scores=True))


def write_ground_truth(rows: Sequence[TrackRow], path) -> None:
    Path(path).write_text(rows_text(rows, with_scores=False))

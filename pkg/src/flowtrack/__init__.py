"""Multi-cue tracking-by-detection with min-cost flow data association."""

from .model import (
    BBox,
    DatasetConfig,
    Observation,
    Trajectory,
    TrackRow,
    ValidationError,
    validate_observation,
    trajectory_push,
)

__version__ = "0.1.0"

__all__ = [
    "BBox",
    "DatasetConfig",
    "Observation",
    "Trajectory",
    "TrackRow",
    "ValidationError",
    "validate_observation",
    "trajectory_push",
]

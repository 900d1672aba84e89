"""Head pose values, Euler/rotation conversion and clip handling.

Angles are radians.  The Euler convention is intrinsic roll-pitch-yaw, i.e.
``R = Rx(roll) @ Ry(pitch) @ Rz(yaw)``.  Translations are dimensionless model
units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, EmptyResultError, ParseError, ShapeError
from .tables import read_frame_table, write_frame_table

POSE_COLUMNS = ("roll", "pitch", "yaw", "tx", "ty", "tz")
DEFAULT_CLIP_LENGTH = 5
DEFAULT_FPS = 25.0


def wrap_angle(theta: float) -> float:
    """Map an angle into (-pi, pi].  Values already in range are returned unchanged."""
    if -math.pi < theta <= math.pi:
        return theta
    w = math.remainder(theta, 2.0 * math.pi)
    return math.pi if w <= -math.pi else w


@dataclass(frozen=True)
class PoseFrame:
    euler: tuple[float, float, float] = (0.0, 0.0, 0.0)
    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        euler = tuple(float(v) for v in self.euler)
        translation = tuple(float(v) for v in self.translation)
        if len(euler) != 3 or len(translation) != 3:
            raise ShapeError("PoseFrame needs 3 Euler angles and 3 translation components")
        if not all(math.isfinite(v) for v in euler + translation):
            raise DomainError(f"non-finite pose component in {euler + translation}")
        for v in euler:
            if not -math.pi < v <= math.pi:
                raise DomainError(f"Euler angle {v} outside (-pi, pi]")
        object.__setattr__(self, "euler", euler)
        object.__setattr__(self, "translation", translation)

    @classmethod
    def from_vector(cls, v: Sequence[float], wrap: bool = False) -> "PoseFrame":
        v = [float(x) for x in v]
        if len(v) != 6:
            raise ShapeError(f"pose vector must have 6 entries, got {len(v)}")
        euler = v[:3]
        if wrap:
            if not all(math.isfinite(x) for x in euler):
                raise DomainError(f"non-finite pose component in {v}")
            euler = [wrap_angle(x) for x in euler]
        return cls(tuple(euler), tuple(v[3:]))

    def as_vector(self) -> np.ndarray:
        return np.array(self.euler + self.translation, dtype=np.float64)

    def rotation(self) -> np.ndarray:
        return euler_to_rotation(self.euler)


@dataclass(frozen=True)
class PoseClip:
    frames: tuple[PoseFrame, ...]
    fps: float = DEFAULT_FPS

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        if len(self.frames) < 1:
            raise EmptyResultError("a clip needs at least one frame")
        if not self.fps > 0:
            raise DomainError(f"fps must be positive, got {self.fps}")

    def __len__(self) -> int:
        return len(self.frames)

    def as_array(self) -> np.ndarray:
        return np.stack([f.as_vector() for f in self.frames])


@dataclass(frozen=True, eq=False)
class OffsetClip:
    """Per-frame pose differences relative to the first frame of a clip, shape (t, 6)."""

    offsets: np.ndarray

    def __post_init__(self):
        off = np.array(self.offsets, dtype=np.float64)
        if off.ndim != 2 or off.shape[1] != 6 or off.shape[0] < 1:
            raise ShapeError(f"offsets must have shape (t, 6), got {off.shape}")
        if np.any(off[0] != 0.0):
            raise DomainError("first offset of a clip must be exactly zero")
        off.setflags(write=False)
        object.__setattr__(self, "offsets", off)

    def __len__(self) -> int:
        return self.offsets.shape[0]

    def __eq__(self, other):
        if not isinstance(other, OffsetClip):
            return NotImplemented
        return np.array_equal(self.offsets, other.offsets)

    def flat(self) -> np.ndarray:
        return self.offsets.reshape(-1)


def _axis_rotations(roll: float, pitch: float, yaw: float):
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]])
    ry = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
    rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    return rx, ry, rz


def euler_to_rotation(euler: Sequence[float]) -> np.ndarray:
    """Rotation matrix ``Rx(roll) @ Ry(pitch) @ Rz(yaw)`` for a radian triple."""
    roll, pitch, yaw = (float(v) for v in euler)
    if not all(math.isfinite(v) for v in (roll, pitch, yaw)):
        raise DomainError(f"non-finite Euler angles {euler!r}")
    rx, ry, rz = _axis_rotations(roll, pitch, yaw)
    return rx @ ry @ rz


def rotation_to_euler(rot: np.ndarray, tol: float = 1e-6) -> tuple[float, float, float]:
    """Inverse of :func:`euler_to_rotation`.

    Pitch is returned in [-pi/2, pi/2].  At gimbal lock (|R[0, 2]| == 1) roll
    and yaw are not separable; roll is set to 0 and the whole in-plane angle
    goes to yaw.
    """
    rot = np.asarray(rot, dtype=np.float64)
    if rot.shape != (3, 3):
        raise ShapeError(f"rotation must be 3x3, got {rot.shape}")
    if not np.all(np.isfinite(rot)):
        raise DomainError("non-finite rotation matrix")
    if np.max(np.abs(rot.T @ rot - np.eye(3))) > tol or abs(np.linalg.det(rot) - 1.0) > tol:
        raise DomainError("matrix is not a proper rotation (orthonormal, det +1)")
    s = min(1.0, max(-1.0, rot[0, 2]))
    if abs(s) < 1.0:
        pitch = math.asin(s)
        roll = math.atan2(-rot[1, 2], rot[2, 2])
        yaw = math.atan2(-rot[0, 1], rot[0, 0])
    else:
        pitch = math.copysign(math.pi / 2, s)
        roll = 0.0
        yaw = math.atan2(rot[1, 0], rot[1, 1])
    return wrap_angle(roll), pitch, wrap_angle(yaw)


def segment_clips(
    trajectory: Sequence[PoseFrame], t: int = DEFAULT_CLIP_LENGTH, stride: int | None = None,
    fps: float = DEFAULT_FPS,
) -> list[PoseClip]:
    """Cut a trajectory into length-``t`` clips starting every ``stride`` frames.

    A trailing window shorter than ``t`` is dropped.  ``stride`` defaults to ``t``.
    """
    stride = t if stride is None else stride
    if t < 2:
        raise DomainError(f"clip length must be >= 2, got {t}")
    if stride < 1:
        raise DomainError(f"stride must be >= 1, got {stride}")
    frames = list(trajectory)
    if len(frames) < t:
        raise EmptyResultError(
            f"trajectory has {len(frames)} frames, fewer than one clip of {t}"
        )
    return [
        PoseClip(tuple(frames[s : s + t]), fps)
        for s in range(0, len(frames) - t + 1, stride)
    ]


def clip_to_offsets(clip: PoseClip | np.ndarray) -> OffsetClip:
    arr = clip.as_array() if isinstance(clip, PoseClip) else np.asarray(clip, dtype=np.float64)
    return OffsetClip(arr - arr[0])


def offsets_batch(clips: Iterable[PoseClip]) -> np.ndarray:
    """Stack the offsets of many clips into an (n, t, 6) array."""
    return np.stack([clip_to_offsets(c).offsets for c in clips])


def trajectory_array(frames: Sequence[PoseFrame]) -> np.ndarray:
    return np.stack([f.as_vector() for f in frames]) if frames else np.zeros((0, 6))


def frames_from_array(arr: np.ndarray, wrap: bool = False) -> list[PoseFrame]:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 6:
        raise ShapeError(f"trajectory array must have shape (n, 6), got {arr.shape}")
    return [PoseFrame.from_vector(row, wrap=wrap) for row in arr]


def write_trajectory(path: str | Path, frames: Sequence[PoseFrame]) -> None:
    write_frame_table(path, POSE_COLUMNS, trajectory_array(frames))


def read_trajectory(path: str | Path) -> list[PoseFrame]:
    _, arr = read_frame_table(path, POSE_COLUMNS)
    try:
        return frames_from_array(arr)
    except DomainError as exc:
        raise ParseError(f"{path}: {exc}") from exc

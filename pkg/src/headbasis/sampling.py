"""One-to-many inference: audio -> center feature -> epsilon-ball samples ->
decoded offset clips -> stitched pose trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, EmptyResultError, ShapeError
from .encoders import AUDIO_FRAME_DIM, encode_audio_weights
from .motion_space import MotionBasisBank, reconstruct
from .nets import SmallNet
from .pose import OffsetClip, PoseFrame, frames_from_array

# Head facing the camera at the desk face model's working distance.
NEUTRAL_POSE = PoseFrame(translation=(0.0, 0.0, 10.0))

@dataclass(frozen=True)
class SampleConfig:
    epsilon: float = 1.0
    seed: int = 0
    num_samples: int = 1

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise DomainError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.num_samples < 1:
            raise DomainError(f"num_samples must be >= 1, got {self.num_samples}")


@dataclass(frozen=True, eq=False)
class FeatureWindow:
    """2k+1 consecutive per-frame feature vectors centred on frame ``center``."""

    features: np.ndarray
    center: int
    k: int

    def middle(self) -> np.ndarray:
        return self.features[self.k]


def center_feature(bank: MotionBasisBank, w_audio: np.ndarray) -> np.ndarray:
    return reconstruct(bank, w_audio)


def _ball_point(center: np.ndarray, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    dim = center.size
    direction = rng.standard_normal(dim)
    norm = np.linalg.norm(direction)
    while norm == 0.0:
        direction = rng.standard_normal(dim)
        norm = np.linalg.norm(direction)
    radius = epsilon * rng.random() ** (1.0 / dim)
    step = (radius / norm) * direction
    sample = center + step
    # rounding in center + step can push the distance a few ulps past epsilon;
    # shrink by a growing factor so this ends even when epsilon ~ ulp(center)
    shrink = 1e-12
    while np.linalg.norm(sample - center) > epsilon:
        step *= 1.0 - shrink
        shrink = min(2.0 * shrink, 1.0)
        sample = center + step
    return sample


def sample_motion(center: np.ndarray, cfg: SampleConfig, rng=None) -> list[np.ndarray]:
    """Draw ``cfg.num_samples`` features uniformly from the closed ball of
    radius ``cfg.epsilon`` around ``center``.

    Uniform over the ball means a uniform direction and radius
    ``epsilon * u**(1/C)``.  ``rng`` overrides ``cfg.seed`` when given.
    """
    center = np.asarray(center, dtype=np.float64)
    if center.ndim != 1:
        raise ShapeError(f"center must be a vector, got shape {center.shape}")
    rng = np.random.default_rng(cfg.seed if rng is None else rng)
    return [_ball_point(center, cfg.epsilon, rng) for _ in range(cfg.num_samples)]


def decode_pose(decoder: SmallNet, feature: np.ndarray) -> OffsetClip | list[OffsetClip]:
    """Map motion feature(s) to offset clip(s).

    The decoder predicts frames 2..t; the first frame's offset is zero by
    construction.  A batch of features returns a list of clips.
    """
    out = np.asarray(decoder(feature))
    if out.shape[-1] % 6:
        raise ShapeError(f"decoder output dim {out.shape[-1]} is not a multiple of 6")
    if out.ndim == 1:
        return OffsetClip(np.vstack([np.zeros((1, 6)), out.reshape(-1, 6)]))
    return [OffsetClip(np.vstack([np.zeros((1, 6)), row.reshape(-1, 6)])) for row in out]


def stitch_array(offsets: Sequence[np.ndarray], initial: np.ndarray) -> np.ndarray:
    """Array form of :func:`stitch_clips`; angles are not wrapped."""
    if len(offsets) == 0:
        raise EmptyResultError("nothing to stitch")
    anchor = np.asarray(initial, dtype=np.float64)
    parts = []
    for j, off in enumerate(offsets):
        off = np.asarray(off, dtype=np.float64)
        seg = anchor + off
        parts.append(seg if j == 0 else seg[1:])
        anchor = seg[-1]
    return np.vstack(parts)


def stitch_clips(clips: Sequence[OffsetClip], initial: PoseFrame) -> list[PoseFrame]:
    """Chain offset clips: each clip starts from the last pose of the previous one.

    The leading zero offset of every clip after the first is dropped, so n
    clips of length t give ``t + (n - 1) * (t - 1)`` frames.
    """
    if len(clips) == 0:
        raise EmptyResultError("nothing to stitch")
    arr = stitch_array([c.offsets for c in clips], initial.as_vector())
    return frames_from_array(arr, wrap=True)


def assemble_window(expression_seq, motion_offset_seq, i: int, k: int = 8) -> FeatureWindow:
    expr = np.asarray(expression_seq, dtype=np.float64)
    motion = np.asarray(motion_offset_seq, dtype=np.float64)
    if expr.ndim != 2 or motion.ndim != 2 or expr.shape[0] != motion.shape[0]:
        raise ShapeError(f"sequences must be (T, d) with equal T: {expr.shape}, {motion.shape}")
    n = expr.shape[0]
    if n < 1 or not 0 <= i < n:
        raise IndexError(f"frame index {i} out of range for {n} frames")
    if k < 0:
        raise DomainError("window half-width must be >= 0")
    rows = np.clip(np.arange(i - k, i + k + 1), 0, n - 1)
    return FeatureWindow(np.hstack([expr[rows], motion[rows]]), i, k)


def probe_basis(
    bank: MotionBasisBank,
    decoder: SmallNet,
    basis_index: int,
    initial: PoseFrame | None = None,
    num_clips: int = 4,
) -> list[PoseFrame]:
    """Decode one basis vector as a clip and repeat it ``num_clips`` times."""
    if not 0 <= basis_index < bank.num_basis:
        raise IndexError(f"basis index {basis_index} out of range 0..{bank.num_basis - 1}")
    if num_clips < 1:
        raise DomainError("num_clips must be >= 1")
    clip = decode_pose(decoder, bank.basis[basis_index])
    return stitch_clips([clip] * num_clips, initial or PoseFrame())


def audio_clip_blocks(audio_frames: np.ndarray, t: int) -> np.ndarray:
    """Cut a (T, 256) audio feature sequence into flattened clip blocks.

    Consecutive clips share one boundary frame (stride t-1), matching the
    frame count of stitched trajectories.  A trailing partial clip is
    edge-padded.
    """
    a = np.asarray(audio_frames, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != AUDIO_FRAME_DIM:
        raise ShapeError(f"audio must be (T, {AUDIO_FRAME_DIM}), got {a.shape}")
    if a.shape[0] < 1:
        raise EmptyResultError("empty audio")
    n_clips = max(1, -(-(a.shape[0] - 1) // (t - 1)))
    blocks = []
    for j in range(n_clips):
        rows = np.clip(np.arange(j * (t - 1), j * (t - 1) + t), 0, a.shape[0] - 1)
        blocks.append(a[rows].reshape(-1))
    return np.stack(blocks)


def sample_trajectories(
    bank: MotionBasisBank,
    audio_net: SmallNet,
    decoder: SmallNet,
    audio_frames: np.ndarray,
    cfg: SampleConfig,
    t: int,
    initial: PoseFrame | None = None,
) -> list[np.ndarray]:
    """Generate ``cfg.num_samples`` stitched pose trajectories for one audio track.

    Each returned array is (L, 6) with L = t + (n-1)(t-1) for n audio clips.
    Sample j draws from its own child of ``cfg.seed`` so samples are
    reproducible independently of how many are requested.
    """
    blocks = audio_clip_blocks(audio_frames, t)
    centers = center_feature(bank, encode_audio_weights(audio_net, blocks))
    initial = (initial or PoseFrame()).as_vector()
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.num_samples)
    out = []
    for child in children:
        rng = np.random.default_rng(child)
        feats = np.stack([_ball_point(c, cfg.epsilon, rng) for c in centers])
        clips = decode_pose(decoder, feats)
        out.append(stitch_array([c.offsets for c in clips], initial))
    return out

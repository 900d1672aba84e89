"""Evaluation metrics on pose trajectories and landmark sequences."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import EmptyResultError, ShapeError
from .pose import PoseFrame, trajectory_array


def _as_trajectory(traj) -> np.ndarray:
    if len(traj) and isinstance(traj[0], PoseFrame):
        return trajectory_array(traj)
    arr = np.asarray(traj, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 6:
        raise ShapeError(f"trajectory must be (L, 6), got {arr.shape}")
    return arr


def diversity_metric(trajectories: Sequence) -> float:
    """Mean over trajectories of the channel-averaged std over time of the
    three Euler angles.

    Trajectories are (L, 6) arrays or lists of :class:`PoseFrame`; all must
    share one length L >= 2.  Std is the population std (ddof=0).
    """
    if len(trajectories) == 0:
        raise EmptyResultError("no trajectories")
    arrs = [_as_trajectory(t) for t in trajectories]
    lengths = {a.shape[0] for a in arrs}
    if len(lengths) != 1:
        raise ShapeError(f"trajectories differ in length: {sorted(lengths)}")
    if lengths.pop() < 2:
        raise EmptyResultError("diversity needs trajectories of at least 2 frames")
    stacked = np.stack(arrs)[:, :, :3]
    return float(np.mean(np.std(stacked, axis=1).mean(axis=1)))


def lmd_metric(pred, target) -> float:
    """Mean Euclidean distance between corresponding landmarks.

    Inputs are (..., N, 2) arrays of equal shape, e.g. (T, N, 2) sequences.
    """
    p = np.asarray(pred, dtype=np.float64)
    q = np.asarray(target, dtype=np.float64)
    if p.shape != q.shape:
        raise ShapeError(f"landmark shapes differ: {p.shape} vs {q.shape}")
    if p.ndim < 2 or p.shape[-1] != 2:
        raise ShapeError(f"landmarks must be (..., N, 2), got {p.shape}")
    if p.size == 0:
        raise EmptyResultError("no landmarks to compare")
    return float(np.mean(np.linalg.norm(p - q, axis=-1)))

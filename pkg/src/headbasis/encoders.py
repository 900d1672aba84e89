"""The four task networks and their encode/extract entry points.

Shapes (t = clip length, C = feature dim, S = number of bases):

* motion encoder:   6t -> 64 (tanh) -> C, output scaled to unit norm
* audio encoder:    256t -> 64 (relu) -> S, softmaxed into basis weights
* expression net:   256 + identity_dim -> 64 (relu) -> D_exp
* pose decoder:     C -> 64 (tanh) -> 6(t-1)
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateQueryError, ShapeError
from .motion_space import softmax
from .nets import SmallNet
from .pose import OffsetClip

AUDIO_FRAME_DIM = 256
HIDDEN = 64


POSE_OFFSET_SCALE = 0.1  # typical |offset| in rad / model units


def build_motion_encoder(t: int, dim: int, rng=None, hidden: int = HIDDEN) -> SmallNet:
    return SmallNet.build([6 * t, hidden, dim], ["tanh", "linear"], rng,
                          input_gain=1.0 / POSE_OFFSET_SCALE, hidden_bias_std=0.1)


def build_audio_encoder(t: int, num_basis: int, rng=None, hidden: int = HIDDEN) -> SmallNet:
    # zero output layer: training starts from uniform weights
    return SmallNet.build([AUDIO_FRAME_DIM * t, hidden, num_basis], ["relu", "linear"], rng,
                          zero_last=True)


def build_expression_net(identity_dim: int, exp_dim: int, rng=None, hidden: int = HIDDEN) -> SmallNet:
    return SmallNet.build([AUDIO_FRAME_DIM + identity_dim, hidden, exp_dim], ["relu", "linear"], rng)


def build_pose_decoder(t: int, dim: int, rng=None, hidden: int = HIDDEN) -> SmallNet:
    return SmallNet.build([dim, hidden, 6 * (t - 1)], ["tanh", "linear"], rng)


def unit_normalize(x: np.ndarray) -> np.ndarray:
    """Scale vector(s) along the last axis to unit Euclidean norm."""
    x = np.asarray(x, dtype=np.float64)
    norm = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(norm <= 1e-12):
        raise DegenerateQueryError("cannot normalize a (near) zero vector")
    return x / norm


def unit_normalize_backward(x: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. ``x`` of a loss whose gradient w.r.t. ``unit_normalize(x)`` is ``grad``."""
    x = np.asarray(x, dtype=np.float64)
    norm = np.linalg.norm(x, axis=-1, keepdims=True)
    u = x / norm
    return (grad - u * np.sum(u * grad, axis=-1, keepdims=True)) / norm


def encode_motion(motion_net: SmallNet, clip: OffsetClip | np.ndarray) -> np.ndarray:
    """Offset clip(s) -> unit-norm clip-level motion feature(s).

    Accepts an :class:`OffsetClip`, a (t, 6) array, or a batch (n, t, 6).
    """
    off = clip.offsets if isinstance(clip, OffsetClip) else np.asarray(clip, dtype=np.float64)
    if off.ndim == 2:
        x = off.reshape(-1)
    elif off.ndim == 3:
        x = off.reshape(off.shape[0], -1)
    else:
        raise ShapeError(f"offsets must be (t, 6) or (n, t, 6), got {off.shape}")
    if x.shape[-1] != motion_net.input_dim:
        raise ShapeError(
            f"motion encoder expects {motion_net.input_dim // 6} frames, got {x.shape[-1] // 6}"
        )
    return unit_normalize(motion_net(x))


def encode_audio_weights(audio_net: SmallNet, audio: np.ndarray) -> np.ndarray:
    """Flattened t x 256 audio block(s) -> basis weights (softmax of logits, unit scale)."""
    return softmax(audio_net(audio))


def expression_input(audio_frame: np.ndarray, identity_embedding: np.ndarray) -> np.ndarray:
    a = np.asarray(audio_frame, dtype=np.float64)
    e = np.asarray(identity_embedding, dtype=np.float64)
    if a.shape[-1] != AUDIO_FRAME_DIM:
        raise ShapeError(f"audio frame must have {AUDIO_FRAME_DIM} entries, got {a.shape[-1]}")
    if a.ndim == 2 and e.ndim == 1:
        e = np.broadcast_to(e, (a.shape[0], e.size))
    return np.concatenate([a, e], axis=-1)


def extract_expression(expr_net: SmallNet, audio_frame: np.ndarray,
                       identity_embedding: np.ndarray) -> np.ndarray:
    return expr_net(expression_input(audio_frame, identity_embedding))

"""Post-training diagnostics on a synthetic corpus.

These quantify how well the learned motion space behaves: whether audio
picks the same basis the motion does, whether clips survive an
encode/decode round trip, and which Euler channel each class's favourite
basis moves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoders import encode_motion
from .errors import EmptyResultError
from .pose import trajectory_array
from .sampling import probe_basis
from .synth import CLASS_CHANNELS, Corpus
from .training import Model

EULER_NAMES = ("roll", "pitch", "yaw")


def basis_agreement(model: Model, corpus: Corpus) -> float:
    """Fraction of clips whose argmax basis under w_visual and w_audio coincide."""
    if len(corpus) == 0:
        raise EmptyResultError("no clips")
    w_vis = model.visual_weights(corpus.offsets)
    w_aud = model.audio_weights(corpus.audio)
    return float(np.mean(w_vis.argmax(axis=1) == w_aud.argmax(axis=1)))


def autoencoding_error(model: Model, corpus: Corpus) -> float:
    """Mean absolute Euler-angle error (rad) of decode(encode(clip)) vs the clip.

    The first offset is zero by construction on both sides, so only frames
    1..t-1 are compared.
    """
    if len(corpus) == 0:
        raise EmptyResultError("no clips")
    off = corpus.offsets
    feats = encode_motion(model.motion_net, off)
    pred = model.decoder(feats).reshape(len(corpus), -1, 6)
    return float(np.mean(np.abs(pred[:, :, :3] - off[:, 1:, :3])))


@dataclass(frozen=True)
class ClassProbe:
    label: str
    basis: int  # basis with maximal mean attention over the class
    attention: float  # that mean attention
    dominant: int  # Euler channel with the largest std in the probe trajectory
    expected: tuple[int, ...]  # generating channels of the class

    @property
    def matches(self) -> bool:
        # a class without a generating channel (still) cannot match
        return self.dominant in self.expected


def class_probes(model: Model, corpus: Corpus, num_clips: int = 4) -> list[ClassProbe]:
    """Probe the favourite basis of every class present in ``corpus``."""
    w = model.visual_weights(corpus.offsets)
    labels = np.array(corpus.labels)
    out = []
    for label in dict.fromkeys(corpus.labels):
        mean_w = w[labels == label].mean(axis=0)
        b = int(mean_w.argmax())
        traj = trajectory_array(probe_basis(model.bank, model.decoder, b, num_clips=num_clips))
        dominant = int(np.std(traj[:, :3], axis=0).argmax())
        out.append(ClassProbe(label, b, float(mean_w[b]), dominant, CLASS_CHANNELS[label]))
    return out

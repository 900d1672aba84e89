"""Staged training.

Stage 1 fits the motion encoder, the basis bank and the pose decoder on the
basis L1 loss plus an L1 offset-reconstruction loss.  Stage 2 fits the audio
encoder to the (frozen) visual attention weights with KL divergence.  Stage 3
fits the expression network and the per-subject identity embeddings on the
landmark-weighted expression loss.

All randomness derives from ``cfg.seed`` and the (stage, epoch) pair, so a
run interrupted at any step and resumed from its checkpoint reproduces the
uninterrupted run bit for bit.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .config import TrainConfig
from .encoders import (build_audio_encoder, build_expression_net, build_motion_encoder,
                       build_pose_decoder, encode_motion, expression_input, unit_normalize,
                       unit_normalize_backward)
from .errors import ProjectionError, ShapeError, TrainingError
from .face import expression_loss, project_landmarks, reconstruct_shape
from .motion_space import MotionBasisBank, attention_weights, basis_loss, cosine_distances, \
    kl_loss, softmax
from .nets import SGDMomentum, SmallNet
from .pose import PoseFrame
from .synth import Corpus, split_indices

log = logging.getLogger(__name__)

STAGES = (1, 2, 3)


@dataclass(eq=False)
class Model:
    bank: MotionBasisBank
    motion_net: SmallNet
    audio_net: SmallNet
    expr_net: SmallNet
    decoder: SmallNet
    embeddings: np.ndarray  # (n_subjects, identity_dim)

    @classmethod
    def init(cls, cfg: TrainConfig, num_subjects: int, exp_dim: int) -> "Model":
        seeds = np.random.SeedSequence(cfg.seed).spawn(6)
        rngs = [np.random.default_rng(s) for s in seeds]
        return cls(
            bank=MotionBasisBank.random(cfg.num_basis, cfg.feature_dim, cfg.kappa, rngs[0]),
            motion_net=build_motion_encoder(cfg.clip_len, cfg.feature_dim, rngs[1], cfg.hidden),
            audio_net=build_audio_encoder(cfg.clip_len, cfg.num_basis, rngs[2], cfg.hidden),
            expr_net=build_expression_net(cfg.identity_dim, exp_dim, rngs[3], cfg.hidden),
            decoder=build_pose_decoder(cfg.clip_len, cfg.feature_dim, rngs[4], cfg.hidden),
            embeddings=0.1 * rngs[5].standard_normal((num_subjects, cfg.identity_dim)),
        )

    def nets(self) -> dict[str, SmallNet]:
        return {"E_m": self.motion_net, "E_a": self.audio_net,
                "extractor": self.expr_net, "decoder": self.decoder}

    def visual_weights(self, offsets: np.ndarray) -> np.ndarray:
        feats = encode_motion(self.motion_net, offsets)
        return attention_weights(cosine_distances(self.bank, feats), self.bank.kappa)

    def audio_weights(self, audio: np.ndarray) -> np.ndarray:
        return softmax(self.audio_net(audio.reshape(audio.shape[0], -1)))


@dataclass(eq=False)
class Checkpoint:
    """Everything needed to use or resume a training run."""

    config: TrainConfig
    model: Model
    stage: int = 1  # stage to run next
    step: int = 0  # steps already done in that stage
    velocity: dict[str, np.ndarray] = field(default_factory=dict)
    history: dict[int, list[tuple[int, float]]] = field(default_factory=dict)

    @property
    def finished(self) -> bool:
        return self.stage > len(STAGES)


def _batch_indices(n: int, batch: int, seed: int, stage: int, step: int) -> np.ndarray:
    """Indices of the ``step``-th minibatch: seeded reshuffle every epoch."""
    batch = min(batch, n)
    per_epoch = n // batch
    epoch, pos = divmod(step, per_epoch)
    perm = np.random.default_rng([seed, stage, epoch]).permutation(n)
    return perm[pos * batch : (pos + 1) * batch]


# --- per-stage losses -------------------------------------------------------

def stage1_loss(model: Model, offsets: np.ndarray, lambda_rec: float, grads: bool = True):
    """Mean over clips of ``L_basis + lambda_rec * L_rec`` and parameter gradients.

    ``L_rec`` is the L1 offset error of the decoder applied to both the
    encoded feature and its basis reconstruction, so that the bases
    themselves decode to motion.  Returns ``(total, basis_term, rec_term,
    grads)``; grads is None when not requested.
    """
    n = offsets.shape[0]
    x = offsets.reshape(n, -1)
    target = offsets[:, 1:].reshape(n, -1)
    raw, m_cache = model.motion_net.forward(x)
    feat = unit_normalize(raw)
    b_cache = model.bank.forward(feat)
    l_basis, g_feat, g_recon = basis_loss(feat, b_cache.recon)
    both = np.vstack([feat, b_cache.recon])
    pred, d_cache = model.decoder.forward(both)
    resid = pred - np.vstack([target, target])
    l_rec = 0.5 * float(np.sum(np.abs(resid)))
    l_basis /= n
    l_rec /= n
    total = l_basis + lambda_rec * l_rec
    if not grads:
        return total, l_basis, l_rec, None
    g_dec, g_both = model.decoder.backward(d_cache, 0.5 * lambda_rec * np.sign(resid) / n)
    g_basis, g_feat_bank = model.bank.backward(b_cache, g_recon / n + g_both[n:])
    g_raw = unit_normalize_backward(raw, g_feat / n + g_feat_bank + g_both[:n])
    g_m, _ = model.motion_net.backward(m_cache, g_raw)
    return total, l_basis, l_rec, {"bank": {"basis": g_basis}, "E_m": g_m, "decoder": g_dec}


def stage2_loss(model: Model, audio: np.ndarray, w_visual: np.ndarray, grads: bool = True):
    n = audio.shape[0]
    logits, cache = model.audio_net.forward(audio.reshape(n, -1))
    w_audio = softmax(logits)
    loss, g_logits = kl_loss(w_visual, w_audio)
    if not grads:
        return loss / n, None
    g_a, _ = model.audio_net.backward(cache, g_logits / n)
    return loss / n, {"E_a": g_a}


@dataclass(eq=False)
class FrameSet:
    """Per-frame stage-3 samples flattened out of a corpus."""

    audio: np.ndarray  # (m, 256)
    betas: np.ndarray  # (m, D_exp)
    poses: list  # m PoseFrames
    subjects: np.ndarray  # (m,)
    alphas: np.ndarray  # (m, D_id)
    targets: np.ndarray  # (m, N, 2) landmarks from the true coefficients

    @classmethod
    def from_corpus(cls, corpus: Corpus) -> "FrameSet":
        t = corpus.clip_len
        poses = [PoseFrame.from_vector(p) for p in corpus.poses.reshape(-1, 6)]
        subjects = np.repeat(corpus.subjects, t)
        alphas = corpus.identities[subjects]
        betas = corpus.betas.reshape(-1, corpus.betas.shape[2])
        targets = np.stack([
            project_landmarks(reconstruct_shape(corpus.face, a, b), corpus.face, p)
            for a, b, p in zip(alphas, betas, poses)
        ])
        return cls(corpus.audio.reshape(-1, corpus.audio.shape[2]), betas, poses, subjects,
                   alphas, targets)

    def __len__(self) -> int:
        return self.audio.shape[0]


def stage3_loss(model: Model, frames: FrameSet, idx: np.ndarray, face, lambda_ldmk: float,
                grads: bool = True):
    n = len(idx)
    emb = model.embeddings[frames.subjects[idx]]
    x = expression_input(frames.audio[idx], emb)
    pred, cache = model.expr_net.forward(x)
    total = 0.0
    g_pred = np.zeros_like(pred)
    for r, i in enumerate(idx):
        loss, g = expression_loss(pred[r], frames.betas[i], face, frames.poses[i],
                                  frames.targets[i], lambda_ldmk, frames.alphas[i])
        total += loss
        g_pred[r] = g
    if not grads:
        return total / n, None
    g_x, g_in = model.expr_net.backward(cache, g_pred / n)
    g_emb = np.zeros_like(model.embeddings)
    np.add.at(g_emb, frames.subjects[idx], g_in[:, -model.embeddings.shape[1]:])
    return total / n, {"extractor": g_x, "embeddings": {"table": g_emb}}


# --- driver -----------------------------------------------------------------

def _param_groups(model: Model, stage: int) -> dict[str, dict[str, np.ndarray]]:
    if stage == 1:
        return {"bank": model.bank.params(), "E_m": model.motion_net.params(),
                "decoder": model.decoder.params()}
    if stage == 2:
        return {"E_a": model.audio_net.params()}
    return {"extractor": model.expr_net.params(), "embeddings": {"table": model.embeddings}}


def _after_update(model: Model, stage: int) -> None:
    if stage == 1:
        model.bank.renormalize()
        model.motion_net.touch()
        model.decoder.touch()
    elif stage == 2:
        model.audio_net.touch()
    else:
        model.expr_net.touch()


class StageData:
    """Training-split arrays each stage consumes, built once per run."""

    def __init__(self, corpus: Corpus, cfg: TrainConfig):
        if len(corpus) == 0:
            raise ShapeError("empty corpus")
        if corpus.clip_len != cfg.clip_len:
            raise ShapeError(f"corpus clips have {corpus.clip_len} frames, config wants "
                             f"{cfg.clip_len}")
        train_idx, _ = split_indices(len(corpus), cfg.holdout_fraction, cfg.seed)
        self.train = corpus.subset(train_idx)
        self.offsets = self.train.offsets
        self.audio = self.train.audio.reshape(len(self.train), -1)
        self.face = corpus.face
        self._w_visual = None
        self._frames = None

    def w_visual(self, model: Model) -> np.ndarray:
        if self._w_visual is None:
            self._w_visual = model.visual_weights(self.offsets)
        return self._w_visual

    def frames(self) -> FrameSet:
        if self._frames is None:
            self._frames = FrameSet.from_corpus(self.train)
        return self._frames

    def size(self, stage: int) -> int:
        return len(self.frames()) if stage == 3 else len(self.train)


def stage_objective(model: Model, data: StageData, cfg: TrainConfig, stage: int,
                    idx: np.ndarray | None = None, grads: bool = True):
    """Loss (and gradients) of one stage on training rows ``idx`` (all rows if None)."""
    try:
        return _objective(model, data, cfg, stage, idx, grads)
    except ProjectionError as exc:
        # targets were projected when the data was built, so this comes from
        # a predicted expression blowing up
        raise TrainingError(f"stage {stage} diverged: {exc}") from exc


def _objective(model, data, cfg, stage, idx, grads):
    if idx is None:
        idx = np.arange(data.size(stage))
    if stage == 1:
        total, _, _, g = stage1_loss(model, data.offsets[idx], cfg.lambda_rec, grads)
        return total, g
    if stage == 2:
        return stage2_loss(model, data.audio[idx], data.w_visual(model)[idx], grads)
    return stage3_loss(model, data.frames(), idx, data.face, cfg.lambda_ldmk, grads)


def train(
    corpus: Corpus,
    cfg: TrainConfig,
    resume: Checkpoint | None = None,
    stop_after: int | None = None,
) -> Checkpoint:
    """Run (or continue) the three training stages.

    ``stop_after`` caps the number of optimizer steps taken in this call; the
    returned checkpoint then records where to resume.  A resumed run uses the
    config passed here, so step counts may be extended.
    """
    if resume is None:
        ckpt = Checkpoint(cfg, Model.init(cfg, corpus.identities.shape[0], corpus.face.exp_dim))
    else:
        ckpt = resume
        ckpt.config = cfg
    model = ckpt.model
    data = StageData(corpus, cfg)
    opt = SGDMomentum(cfg.momentum)
    opt.velocity = ckpt.velocity
    budget = math.inf if stop_after is None else stop_after

    while ckpt.stage <= len(STAGES) and budget > 0:
        stage = ckpt.stage
        n_steps = cfg.stage_steps(stage)
        history = ckpt.history.setdefault(stage, [])
        if ckpt.step == 0 and not history:
            history.append((0, _checked(stage_objective(model, data, cfg, stage, grads=False)[0],
                                        stage)))
        n = data.size(stage)
        while ckpt.step < n_steps and budget > 0:
            idx = _batch_indices(n, cfg.batch_size, cfg.seed, stage, ckpt.step)
            loss, grads = stage_objective(model, data, cfg, stage, idx)
            _checked(loss, stage)
            lr = cfg.learning_rate(ckpt.step)
            for group, params in _param_groups(model, stage).items():
                opt.step(params, grads[group], lr, prefix=f"s{stage}/{group}/")
            _after_update(model, stage)
            ckpt.step += 1
            budget -= 1
            if ckpt.step % cfg.log_every == 0 or ckpt.step == n_steps:
                full = _checked(stage_objective(model, data, cfg, stage, grads=False)[0], stage)
                history.append((ckpt.step, full))
                log.debug("stage %d step %d loss %.6g", stage, ckpt.step, full)
        if ckpt.step >= n_steps:
            log.info("stage %d done: loss %.6g -> %.6g", stage, history[0][1], history[-1][1])
            ckpt.stage += 1
            ckpt.step = 0
    ckpt.velocity = opt.velocity
    return ckpt


def _checked(loss: float, stage: int) -> float:
    if not math.isfinite(loss):
        raise TrainingError(f"stage {stage} diverged: loss became {loss}")
    return float(loss)

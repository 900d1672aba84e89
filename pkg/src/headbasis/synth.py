"""Synthetic paired corpus: head-motion clips, audio proxy blocks and
expression coefficient sequences, plus its on-disk directory layout.

Motion classes are sinusoids on one Euler channel each (nod = pitch,
shake = yaw, tilt = roll), amplitude 0.2 rad, period 20 frames.  Every clip
is one gesture starting near zero phase (uniform jitter of +-phase_jitter).
The audio proxy per frame is a fixed class pattern, plus a fixed linear
embedding of the frame's expression coefficients, plus Gaussian noise.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .encoders import AUDIO_FRAME_DIM
from .errors import DomainError, ParseError
from .face import FaceModel, load_desk_face_model, project_landmarks, reconstruct_shape
from .pose import (DEFAULT_FPS, PoseFrame, frames_from_array, read_trajectory, segment_clips,
                   write_trajectory)
from .tables import read_frame_table, write_frame_table

CLASS_CHANNELS = {
    "still": (),
    "nod": (1,),
    "shake": (2,),
    "tilt": (0,),
    "nod+shake": (1, 2),
}
DEFAULT_CLASSES = ("still", "nod", "shake", "tilt", "nod+shake")
AMPLITUDE = 0.2
PERIOD = 20.0


@dataclass(frozen=True)
class SynthConfig:
    classes: tuple[str, ...] = DEFAULT_CLASSES
    subjects: int = 4
    clips_per_class: int = 50
    noise: float = 0.01
    audio_noise: float = 0.1
    phase_jitter: float = np.pi / 8
    clip_len: int = 5
    fps: float = DEFAULT_FPS
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        unknown = [c for c in self.classes if c not in CLASS_CHANNELS]
        if unknown or not self.classes:
            raise DomainError(f"unknown or empty motion classes {unknown or self.classes}")
        if self.subjects < 1 or self.clips_per_class < 1:
            raise DomainError("subjects and clips_per_class must be >= 1")
        if self.noise < 0 or self.audio_noise < 0 or self.phase_jitter < 0:
            raise DomainError("noise levels must be >= 0")
        if self.clip_len < 2:
            raise DomainError("clip_len must be >= 2")


@dataclass(eq=False)
class Corpus:
    """Paired clips.  Arrays share the leading clip axis n."""

    poses: np.ndarray  # (n, t, 6) absolute poses
    audio: np.ndarray  # (n, t, 256)
    betas: np.ndarray  # (n, t, D_exp)
    labels: list[str]
    subjects: np.ndarray  # (n,) subject index
    identities: np.ndarray  # (n_subjects, D_id) identity coefficients
    fps: float = DEFAULT_FPS
    face: FaceModel = field(default_factory=load_desk_face_model)

    def __len__(self) -> int:
        return self.poses.shape[0]

    @property
    def clip_len(self) -> int:
        return self.poses.shape[1]

    @property
    def offsets(self) -> np.ndarray:
        return self.poses - self.poses[:, :1]

    def subset(self, idx) -> "Corpus":
        idx = np.asarray(idx, dtype=np.int64)
        return Corpus(self.poses[idx], self.audio[idx], self.betas[idx],
                      [self.labels[i] for i in idx], self.subjects[idx], self.identities,
                      self.fps, self.face)

    def landmarks(self, i: int) -> np.ndarray:
        """Ground-truth projected landmarks of clip ``i``, shape (t, N, 2)."""
        alpha = self.identities[self.subjects[i]]
        return np.stack([
            project_landmarks(reconstruct_shape(self.face, alpha, beta), self.face,
                              PoseFrame.from_vector(pose))
            for pose, beta in zip(self.poses[i], self.betas[i])
        ])


def class_patterns(classes, seed: int) -> dict[str, np.ndarray]:
    """Fixed +-1 audio pattern per motion class, keyed by class name."""
    out = {}
    for name in classes:
        tag = sorted(CLASS_CHANNELS).index(name)
        rng = np.random.default_rng([seed, 1, tag])
        out[name] = rng.choice([-1.0, 1.0], size=AUDIO_FRAME_DIM)
    return out


def expression_projection(exp_dim: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng([seed, 2])
    return rng.standard_normal((AUDIO_FRAME_DIM, exp_dim)) / np.sqrt(exp_dim)


def motion_curve(label: str, t: int, phases: np.ndarray) -> np.ndarray:
    """Noise-free Euler angle offsets of a class clip, shape (t, 3)."""
    frames = np.arange(t)
    angles = np.zeros((t, 3))
    for k, ch in enumerate(CLASS_CHANNELS[label]):
        angles[:, ch] = AMPLITUDE * np.sin(2 * np.pi * frames / PERIOD + phases[k])
    return angles


def synth_dataset(cfg: SynthConfig, face: FaceModel | None = None) -> Corpus:
    face = face or load_desk_face_model()
    rng = np.random.default_rng(cfg.seed)
    t = cfg.clip_len
    patterns = class_patterns(cfg.classes, cfg.seed)
    proj = expression_projection(face.exp_dim, cfg.seed)
    identities = 0.3 * rng.standard_normal((cfg.subjects, face.id_dim))
    poses, audio, betas, labels, subjects = [], [], [], [], []
    for label in cfg.classes:
        for _ in range(cfg.clips_per_class):
            phases = rng.uniform(-cfg.phase_jitter, cfg.phase_jitter, size=2)
            base = np.concatenate([rng.uniform(-0.2, 0.2, 3),
                                   rng.uniform(-0.5, 0.5, 2), [10.0 + rng.uniform(-0.5, 0.5)]])
            pose = np.tile(base, (t, 1))
            pose[:, :3] += motion_curve(label, t, phases)
            pose += cfg.noise * rng.standard_normal((t, 6))
            beta = 0.3 * rng.standard_normal(face.exp_dim) \
                + np.cumsum(0.05 * rng.standard_normal((t, face.exp_dim)), axis=0)
            block = patterns[label] + beta @ proj.T \
                + cfg.audio_noise * rng.standard_normal((t, AUDIO_FRAME_DIM))
            poses.append(pose)
            audio.append(block)
            betas.append(beta)
            labels.append(label)
            subjects.append(int(rng.integers(cfg.subjects)))
    return Corpus(np.array(poses), np.array(audio), np.array(betas), labels,
                  np.array(subjects, dtype=np.int64), identities, cfg.fps, face)


def split_indices(n: int, holdout_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded clip-level (train, held-out) split."""
    perm = np.random.default_rng([seed, 3]).permutation(n)
    n_hold = int(round(n * holdout_fraction))
    if n - n_hold < 1:
        raise DomainError("hold-out fraction leaves no training clips")
    return np.sort(perm[n_hold:]), np.sort(perm[:n_hold])


AUDIO_COLUMNS = tuple(f"a{i}" for i in range(AUDIO_FRAME_DIM))


def beta_columns(dim: int) -> tuple[str, ...]:
    return tuple(f"b{i}" for i in range(dim))


def landmark_columns(n: int) -> tuple[str, ...]:
    return tuple(c for i in range(n) for c in (f"x{i}", f"y{i}"))


def write_audio(path, audio_frames: np.ndarray) -> None:
    write_frame_table(path, AUDIO_COLUMNS, audio_frames)


def read_audio(path) -> np.ndarray:
    return read_frame_table(path, AUDIO_COLUMNS)[1]


def write_landmarks(path, landmarks: np.ndarray) -> None:
    lm = np.asarray(landmarks, dtype=np.float64)
    write_frame_table(path, landmark_columns(lm.shape[1]), lm.reshape(lm.shape[0], -1))


def read_landmarks(path) -> np.ndarray:
    cols, arr = read_frame_table(path)
    if len(cols) % 2 or cols != list(landmark_columns(len(cols) // 2)):
        raise ParseError(f"{path}: not a landmark table")
    return arr.reshape(arr.shape[0], -1, 2)


def save_corpus(corpus: Corpus, out_dir: str | Path) -> None:
    """Write a corpus as one pose/audio/beta/landmark table per clip plus a manifest."""
    out = Path(out_dir)
    clips = out / "clips"
    clips.mkdir(parents=True, exist_ok=True)
    with (out / "manifest.csv").open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["clip", "label", "subject"])
        for i, (label, subj) in enumerate(zip(corpus.labels, corpus.subjects)):
            w.writerow([f"clip_{i:05d}", label, int(subj)])
    with (out / "subjects.csv").open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject", *(f"alpha{j}" for j in range(corpus.identities.shape[1]))])
        for s, row in enumerate(corpus.identities):
            w.writerow([s, *(repr(float(v)) for v in row)])
    (out / "meta.txt").write_text(f"fps={corpus.fps!r}\n", encoding="utf-8")
    for i in range(len(corpus)):
        stem = clips / f"clip_{i:05d}"
        write_trajectory(f"{stem}.pose.csv", frames_from_array(corpus.poses[i]))
        write_audio(f"{stem}.audio.csv", corpus.audio[i])
        write_frame_table(f"{stem}.beta.csv", beta_columns(corpus.betas.shape[2]), corpus.betas[i])
        write_landmarks(f"{stem}.ldmk.csv", corpus.landmarks(i))


def load_corpus(data_dir: str | Path, clip_len: int | None = None) -> Corpus:
    """Read a corpus directory written by :func:`save_corpus`.

    Pose files longer than ``clip_len`` are cut into consecutive clips
    (stride ``clip_len``); audio and beta tables are cut the same way.
    """
    root = Path(data_dir)
    try:
        with (root / "manifest.csv").open(encoding="utf-8", newline="") as fh:
            manifest = list(csv.DictReader(fh))
        with (root / "subjects.csv").open(encoding="utf-8", newline="") as fh:
            identities = np.array([[float(v) for v in row[1:]] for row in list(csv.reader(fh))[1:]])
    except (OSError, ValueError, KeyError) as exc:
        raise ParseError(f"{root}: cannot read corpus index: {exc}") from exc
    fps = DEFAULT_FPS
    meta = root / "meta.txt"
    if meta.exists():
        for line in meta.read_text(encoding="utf-8").splitlines():
            if line.startswith("fps="):
                fps = float(line.split("=", 1)[1])
    face = load_desk_face_model()
    poses, audio, betas, labels, subjects = [], [], [], [], []
    for row in manifest:
        stem = root / "clips" / row["clip"]
        traj = read_trajectory(f"{stem}.pose.csv")
        t = clip_len or len(traj)
        a = read_audio(f"{stem}.audio.csv")
        _, b = read_frame_table(f"{stem}.beta.csv", beta_columns(face.exp_dim))
        if not len(traj) == a.shape[0] == b.shape[0]:
            raise ParseError(f"{stem}: pose/audio/beta frame counts differ")
        for j, clip in enumerate(segment_clips(traj, t, t, fps)):
            rows = slice(j * t, j * t + t)
            poses.append(clip.as_array())
            audio.append(a[rows])
            betas.append(b[rows])
            labels.append(row["label"])
            subjects.append(int(row["subject"]))
    return Corpus(np.array(poses), np.array(audio), np.array(betas), labels,
                  np.array(subjects, dtype=np.int64), identities, fps, face)


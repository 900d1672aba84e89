"""Linear 3D morphable face model, landmark projection and expression losses.

Shapes are flat ``3V`` vectors laid out ``(x0, y0, z0, x1, ...)``; bases are
``3V x D`` matrices, so ``shape = mean + B_id @ alpha + B_exp @ beta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import DomainError, ParseError, ProjectionError, ShapeError
from .pose import PoseFrame, euler_to_rotation
from .tables import format_float

FIXTURE_HEADER = "# headbasis face model v1"
DEFAULT_FOCAL = 10.0
# 68-point convention: nose 27-35, inner mouth 60-67
HEAVY_LANDMARKS = tuple(range(27, 36)) + tuple(range(60, 68))
HEAVY_WEIGHT = 20.0


@dataclass(frozen=True, eq=False)
class FaceModel:
    mean_shape: np.ndarray
    identity_basis: np.ndarray
    expression_basis: np.ndarray
    landmark_indices: np.ndarray
    landmark_weights: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean_shape, dtype=np.float64).reshape(-1)
        b_id = np.array(self.identity_basis, dtype=np.float64)
        b_exp = np.array(self.expression_basis, dtype=np.float64)
        idx = np.array(self.landmark_indices, dtype=np.int64).reshape(-1)
        w = np.array(self.landmark_weights, dtype=np.float64).reshape(-1)
        if mean.size % 3:
            raise ShapeError("mean shape length must be a multiple of 3")
        n_vert = mean.size // 3
        if b_id.ndim != 2 or b_id.shape[0] != mean.size:
            raise ShapeError(f"identity basis must be ({mean.size}, D_id), got {b_id.shape}")
        if b_exp.ndim != 2 or b_exp.shape[0] != mean.size:
            raise ShapeError(f"expression basis must be ({mean.size}, D_exp), got {b_exp.shape}")
        if not all(np.all(np.isfinite(a)) for a in (mean, b_id, b_exp)):
            raise DomainError("non-finite face model entries")
        if idx.size != w.size:
            raise ShapeError("one weight per landmark required")
        if np.any(idx < 0) or np.any(idx >= n_vert) or len(set(idx.tolist())) != idx.size:
            raise DomainError("landmark indices must be distinct valid vertex indices")
        if not np.all(np.isin(w, (1.0, HEAVY_WEIGHT))):
            raise DomainError("landmark weights must be 1 or 20")
        for name, arr in (("mean_shape", mean), ("identity_basis", b_id),
                          ("expression_basis", b_exp), ("landmark_indices", idx),
                          ("landmark_weights", w)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def num_vertices(self) -> int:
        return self.mean_shape.size // 3

    @property
    def id_dim(self) -> int:
        return self.identity_basis.shape[1]

    @property
    def exp_dim(self) -> int:
        return self.expression_basis.shape[1]

    @property
    def num_landmarks(self) -> int:
        return self.landmark_indices.size

    def landmark_expression_basis(self) -> np.ndarray:
        """Rows of the expression basis belonging to landmark vertices, shape (N, 3, D_exp)."""
        return self.expression_basis.reshape(self.num_vertices, 3, -1)[self.landmark_indices]


def canonical_landmarks_68() -> np.ndarray:
    """Rough frontal layout of the 68 standard facial landmarks, shape (68, 3)."""
    pts = []
    for i in range(17):  # jaw, left ear to right ear through the chin
        a = math.pi * i / 16
        pts.append((-0.9 * math.cos(a), 0.2 - 1.0 * math.sin(a), 0.0))
    for side in (-1, 1):  # brows
        xs = np.linspace(-0.75, -0.15, 5) if side < 0 else np.linspace(0.15, 0.75, 5)
        for x in xs:
            pts.append((x, 0.55 + 0.05 * (1 - abs(abs(x) - 0.45) / 0.3), 0.0))
    for k in range(4):  # nose bridge
        pts.append((0.0, 0.35 - 0.15 * k, 0.15 + 0.1 * k))
    for x in np.linspace(-0.2, 0.2, 5):  # nose base
        pts.append((x, -0.15, 0.3 - abs(x)))
    for cx in (-0.4, 0.4):  # eyes, 6 points each
        for k in range(6):
            a = math.pi * k / 3
            pts.append((cx - 0.15 * math.cos(a), 0.3 + 0.07 * math.sin(a), 0.0))
    for k in range(12):  # outer lips
        a = 2 * math.pi * k / 12
        pts.append((-0.35 * math.cos(a), -0.5 + 0.15 * math.sin(a), 0.1))
    for k in range(8):  # inner lips
        a = 2 * math.pi * k / 8
        pts.append((-0.2 * math.cos(a), -0.5 + 0.06 * math.sin(a), 0.1))
    pts = np.array(pts, dtype=np.float64)
    pts[:, 2] += 0.2 - 0.2 * pts[:, 0] ** 2
    return pts


def make_desk_face_model(id_dim: int = 8, exp_dim: int = 16, seed: int = 0) -> FaceModel:
    """68-vertex model whose vertices sit at the canonical landmarks.

    Identity and expression bases are the columns of one orthonormalized
    seeded Gaussian matrix.
    """
    verts = canonical_landmarks_68()
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((verts.size, id_dim + exp_dim)))
    weights = np.ones(len(verts))
    weights[list(HEAVY_LANDMARKS)] = HEAVY_WEIGHT
    return FaceModel(verts.reshape(-1), q[:, :id_dim], q[:, id_dim:], np.arange(len(verts)), weights)


def write_face_model(path: str | Path, model: FaceModel) -> None:
    lines = [
        FIXTURE_HEADER,
        f"{model.num_vertices} {model.id_dim} {model.exp_dim} {model.num_landmarks}",
        " ".join(format_float(v) for v in model.mean_shape),
    ]
    lines += [" ".join(format_float(v) for v in row) for row in model.identity_basis]
    lines += [" ".join(format_float(v) for v in row) for row in model.expression_basis]
    lines.append(" ".join(str(int(i)) for i in model.landmark_indices))
    lines.append(" ".join(format_float(v) for v in model.landmark_weights))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def parse_face_model(text: str) -> FaceModel:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != FIXTURE_HEADER:
        raise ParseError("missing face model header")
    try:
        n_vert, d_id, d_exp, n_lmk = (int(v) for v in lines[1].split())
        rows = lines[2:]
        if len(rows) != 1 + 2 * 3 * n_vert + 2:
            raise ParseError(f"expected {3 + 6 * n_vert} data lines, got {len(rows)}")
        mean = np.array(rows[0].split(), dtype=np.float64)
        b_id = np.array([r.split() for r in rows[1 : 1 + 3 * n_vert]], dtype=np.float64)
        b_exp = np.array(
            [r.split() for r in rows[1 + 3 * n_vert : 1 + 6 * n_vert]], dtype=np.float64
        )
        idx = np.array(rows[-2].split(), dtype=np.int64)
        w = np.array(rows[-1].split(), dtype=np.float64)
    except ValueError as exc:
        raise ParseError(f"malformed face model: {exc}") from exc
    if mean.size != 3 * n_vert or b_id.shape != (3 * n_vert, d_id) \
            or b_exp.shape != (3 * n_vert, d_exp) or idx.size != n_lmk or w.size != n_lmk:
        raise ParseError("face model section sizes disagree with header")
    try:
        return FaceModel(mean, b_id, b_exp, idx, w)
    except (DomainError, ShapeError) as exc:
        raise ParseError(f"invalid face model: {exc}") from exc


def read_face_model(path: str | Path) -> FaceModel:
    return parse_face_model(Path(path).read_text(encoding="utf-8"))


def load_desk_face_model() -> FaceModel:
    """The packaged 68-vertex fixture (same as ``make_desk_face_model()``)."""
    text = resources.files("headbasis").joinpath("data/face68.txt").read_text(encoding="utf-8")
    return parse_face_model(text)


def reconstruct_shape(model: FaceModel, alpha=None, beta=None) -> np.ndarray:
    alpha = np.zeros(model.id_dim) if alpha is None else np.asarray(alpha, dtype=np.float64)
    beta = np.zeros(model.exp_dim) if beta is None else np.asarray(beta, dtype=np.float64)
    if alpha.shape != (model.id_dim,) or beta.shape != (model.exp_dim,):
        raise ShapeError(
            f"expected alpha ({model.id_dim},), beta ({model.exp_dim},); "
            f"got {alpha.shape}, {beta.shape}"
        )
    return model.mean_shape + model.identity_basis @ alpha + model.expression_basis @ beta


def _posed_landmarks(shape, model, pose):
    shape = np.asarray(shape, dtype=np.float64)
    if shape.shape != model.mean_shape.shape:
        raise ShapeError(f"shape must have length {model.mean_shape.size}, got {shape.shape}")
    verts = shape.reshape(-1, 3)[model.landmark_indices]
    rot = euler_to_rotation(pose.euler)
    posed = verts @ rot.T + np.asarray(pose.translation)
    if np.any(posed[:, 2] <= 0):
        raise ProjectionError("landmark behind or on the camera plane after posing")
    return posed, rot


def project_landmarks(shape, model: FaceModel, pose: PoseFrame, focal: float = DEFAULT_FOCAL):
    """Pose the landmark vertices and project them: ``(x, y) * focal / z``. Returns (N, 2)."""
    posed, _ = _posed_landmarks(shape, model, pose)
    return focal * posed[:, :2] / posed[:, 2:3]


def landmark_loss(predicted, target, omega):
    """Weighted mean squared landmark distance and its gradient w.r.t. ``predicted``."""
    p = np.asarray(predicted, dtype=np.float64)
    q = np.asarray(target, dtype=np.float64)
    w = np.asarray(omega, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 2 or w.shape != (p.shape[0],):
        raise ShapeError(f"landmark shapes disagree: {p.shape}, {q.shape}, weights {w.shape}")
    n = p.shape[0]
    diff = p - q
    loss = float(np.sum(w * np.sum(diff * diff, axis=1)) / n)
    return loss, (2.0 / n) * w[:, None] * diff


def expression_loss(
    beta_pred,
    beta_true,
    model: FaceModel,
    pose: PoseFrame,
    target_landmarks,
    lambda_ldmk: float = 0.02,
    alpha=None,
    focal: float = DEFAULT_FOCAL,
):
    """``||beta_pred - beta_true||_2 + lambda * landmark_loss`` and d/d(beta_pred).

    Predicted landmarks come from projecting the shape rebuilt with
    ``beta_pred`` (and ``alpha``, default zeros) under ``pose``.
    """
    if lambda_ldmk < 0:
        raise DomainError("lambda_ldmk must be non-negative")
    bp = np.asarray(beta_pred, dtype=np.float64)
    bt = np.asarray(beta_true, dtype=np.float64)
    if bp.shape != bt.shape:
        raise ShapeError(f"beta shapes differ: {bp.shape} vs {bt.shape}")
    err = bp - bt
    l2 = float(np.linalg.norm(err))
    grad = err / l2 if l2 > 0 else np.zeros_like(err)
    if lambda_ldmk == 0:
        return l2, grad

    shape = reconstruct_shape(model, alpha, bp)
    posed, rot = _posed_landmarks(shape, model, pose)
    z = posed[:, 2:3]
    pred = focal * posed[:, :2] / z
    ldmk, g_uv = landmark_loss(pred, target_landmarks, model.landmark_weights)
    g_posed = np.empty_like(posed)
    g_posed[:, :2] = focal * g_uv / z
    g_posed[:, 2] = -focal * np.sum(g_uv * posed[:, :2], axis=1) / z[:, 0] ** 2
    g_verts = g_posed @ rot
    grad = grad + lambda_ldmk * np.einsum("nk,nkd->d", g_verts, model.landmark_expression_basis())
    return l2 + lambda_ldmk * ldmk, grad

"""Clip-level motion basis bank with cosine/softmax addressing.

A query feature is compared to every basis vector by cosine similarity, the
similarities are turned into attention weights by a scaled softmax, and the
query is reconstructed as the attention-weighted sum of basis vectors.  All
functions accept a single vector or a batch (leading axis).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DegenerateQueryError, DomainError, ShapeError

NORM_EPS = 1e-12
KL_FLOOR = 1e-12


def _as_batch(x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return x[None, :], True
    if x.ndim == 2:
        return x, False
    raise ShapeError(f"expected a vector or a batch of vectors, got shape {x.shape}")


@dataclass(eq=False)
class MotionBasisBank:
    """S learnable C-dimensional basis vectors and the softmax scale kappa."""

    basis: np.ndarray
    kappa: float = 10.0
    version: int = field(default=0, compare=False)

    def __post_init__(self):
        self.basis = np.array(self.basis, dtype=np.float64)
        if self.basis.ndim != 2 or self.basis.shape[0] < 2 or self.basis.shape[1] < 2:
            raise ShapeError(f"basis must be (S>=2, C>=2), got {self.basis.shape}")
        if not np.all(np.isfinite(self.basis)):
            raise DomainError("non-finite basis entries")
        if np.any(np.linalg.norm(self.basis, axis=1) <= NORM_EPS):
            raise DegenerateQueryError("basis vectors must have positive norm")
        self.kappa = float(self.kappa)
        if not self.kappa > 0:
            raise DomainError(f"kappa must be positive, got {self.kappa}")

    @classmethod
    def random(cls, num_basis: int, dim: int, kappa: float = 10.0, rng=None) -> "MotionBasisBank":
        rng = np.random.default_rng(rng)
        b = rng.standard_normal((num_basis, dim))
        b /= np.linalg.norm(b, axis=1, keepdims=True)
        return cls(b, kappa)

    @property
    def num_basis(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def params(self) -> dict[str, np.ndarray]:
        return {"basis": self.basis}

    def renormalize(self) -> None:
        norms = np.linalg.norm(self.basis, axis=1, keepdims=True)
        if np.any(norms <= NORM_EPS):
            raise DegenerateQueryError("a basis vector collapsed to zero norm")
        self.basis /= norms
        self.version += 1

    def forward(self, query: np.ndarray) -> "BankCache":
        return bank_forward(self, query)

    def backward(self, cache, grad_recon, grad_weights=None):
        return bank_backward(self, cache, grad_recon, grad_weights)


def cosine_distances(bank: MotionBasisBank | np.ndarray, query: np.ndarray) -> np.ndarray:
    basis = bank.basis if isinstance(bank, MotionBasisBank) else np.asarray(bank, dtype=np.float64)
    q, single = _as_batch(query)
    if q.shape[1] != basis.shape[1]:
        raise ShapeError(f"query dim {q.shape[1]} != basis dim {basis.shape[1]}")
    qn = np.linalg.norm(q, axis=1)
    bn = np.linalg.norm(basis, axis=1)
    if np.any(qn <= NORM_EPS):
        raise DegenerateQueryError("query has (near) zero norm")
    if np.any(bn <= NORM_EPS):
        raise DegenerateQueryError("basis vector has (near) zero norm")
    d = (q @ basis.T) / np.outer(qn, bn)
    d = np.clip(d, -1.0, 1.0)
    return d[0] if single else d


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def attention_weights(distances: np.ndarray, kappa: float) -> np.ndarray:
    """Softmax of ``kappa * distances`` along the last axis."""
    if not kappa > 0:
        raise DomainError(f"kappa must be positive, got {kappa}")
    d = np.asarray(distances, dtype=np.float64)
    if not np.all(np.isfinite(d)):
        raise DomainError("non-finite distances")
    return softmax(kappa * d)


def reconstruct(bank: MotionBasisBank | np.ndarray, weights: np.ndarray) -> np.ndarray:
    basis = bank.basis if isinstance(bank, MotionBasisBank) else np.asarray(bank, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape[-1] != basis.shape[0]:
        raise ShapeError(f"{w.shape[-1]} weights for {basis.shape[0]} basis vectors")
    return w @ basis


def basis_loss(feature: np.ndarray, recon: np.ndarray):
    """L1 distance between a feature and its reconstruction.

    Returns ``(loss, grad_feature, grad_recon)``; for a batch the loss is the
    sum over the batch.  The subgradient at a zero residual is 0.
    """
    f = np.asarray(feature, dtype=np.float64)
    r = np.asarray(recon, dtype=np.float64)
    if f.shape != r.shape:
        raise ShapeError(f"shape mismatch {f.shape} vs {r.shape}")
    diff = f - r
    g = np.sign(diff)
    return float(np.sum(np.abs(diff))), g, -g


def kl_loss(w_visual: np.ndarray, w_audio: np.ndarray):
    """KL(w_visual || w_audio) and its gradient w.r.t. the audio-side logits.

    ``w_audio`` is assumed to be ``softmax(logits)``; the visual side is a
    fixed target.  For a batch the loss is summed.  Audio weights are floored
    at 1e-12 inside the log; ``0 * log 0`` counts as 0.
    """
    p = np.asarray(w_visual, dtype=np.float64)
    q = np.asarray(w_audio, dtype=np.float64)
    if p.shape != q.shape:
        raise ShapeError(f"shape mismatch {p.shape} vs {q.shape}")
    qf = np.maximum(q, KL_FLOOR)
    pos = p > 0
    terms = np.zeros_like(p)
    terms[pos] = p[pos] * (np.log(p[pos]) - np.log(qf[pos]))
    # d/dz sum_i p_i (log p_i - log softmax(z)_i) = softmax(z) - p, using sum(p) = 1
    grad_logits = q - p
    return float(np.sum(terms)), grad_logits


@dataclass(eq=False)
class BankCache:
    query: np.ndarray
    query_norm: np.ndarray
    basis_norm: np.ndarray
    distances: np.ndarray
    weights: np.ndarray
    recon: np.ndarray
    single: bool
    version: int


def bank_forward(bank: MotionBasisBank, query: np.ndarray) -> BankCache:
    q, single = _as_batch(query)
    d = cosine_distances(bank, q)
    w = attention_weights(d, bank.kappa)
    return BankCache(
        query=q,
        query_norm=np.linalg.norm(q, axis=1),
        basis_norm=np.linalg.norm(bank.basis, axis=1),
        distances=d,
        weights=w,
        recon=w @ bank.basis,
        single=single,
        version=bank.version,
    )


def bank_backward(bank: MotionBasisBank, cache: BankCache, grad_recon, grad_weights=None):
    """Backpropagate through cosine addressing, softmax and reconstruction.

    ``grad_recon`` is dL/d(recon) and ``grad_weights`` an optional extra
    dL/d(weights).  Returns ``(grad_basis (S, C), grad_query)``, the query
    gradient shaped like the query passed to forward.
    """
    if cache.version != bank.version:
        raise ContractError("bank parameters changed since this forward pass")
    gr, _ = _as_batch(grad_recon)
    if gr.shape != cache.recon.shape:
        raise ShapeError(f"grad_recon shape {gr.shape} != {cache.recon.shape}")
    basis = bank.basis
    w = cache.weights
    g_w = gr @ basis.T
    if grad_weights is not None:
        gw, _ = _as_batch(grad_weights)
        g_w = g_w + gw
    g_basis = w.T @ gr
    # softmax backward, then the kappa scale
    g_d = bank.kappa * w * (g_w - np.sum(g_w * w, axis=1, keepdims=True))
    q = cache.query
    qn = cache.query_norm[:, None]
    bn = cache.basis_norm[None, :]
    d = cache.distances
    # d_ij = b_j . q_i / (|b_j| |q_i|)
    coef = g_d / (qn * bn)
    g_basis += coef.T @ q - (np.sum(g_d * d, axis=0) / cache.basis_norm**2)[:, None] * basis
    g_query = coef @ basis - (np.sum(g_d * d, axis=1, keepdims=True) / qn**2) * q
    if cache.single:
        g_query = g_query[0]
    return g_basis, g_query

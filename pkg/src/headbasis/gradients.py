"""Finite-difference checks of every hand-written gradient.

Each ``check_*`` function builds one seeded random instance and returns a
:class:`GradCheckReport`.  :func:`run_suite` sweeps many seeds;
:func:`check_model` checks the three stage objectives of a trained model.
Non-smooth points (relu kinks, L1 residual signs, the norm at zero) are
excluded by comparing the kink pattern at the perturbed point with the
unperturbed one.
"""

from __future__ import annotations

import numpy as np

from .encoders import AUDIO_FRAME_DIM, unit_normalize, unit_normalize_backward
from .face import FaceModel, expression_loss, landmark_loss, load_desk_face_model, \
    project_landmarks, reconstruct_shape
from .motion_space import MotionBasisBank, basis_loss, kl_loss, softmax
from .nets import GradCheckReport, SmallNet, grad_check, net_forward
from .pose import PoseFrame

H = 1e-5


def _merge(reports: dict[str, GradCheckReport], tol: float) -> GradCheckReport:
    errors, worst = {}, {}
    for prefix, rep in reports.items():
        for k, v in rep.errors.items():
            errors[f"{prefix}.{k}"] = v
        for k, v in rep.worst_index.items():
            worst[f"{prefix}.{k}"] = v
    return GradCheckReport(errors, tol, worst)


def _pattern(*arrays) -> tuple:
    return tuple(np.signbit(a).tobytes() for a in arrays)


def check_bank(seed: int, tol: float = 1e-4) -> GradCheckReport:
    """L_basis(F, F~(F)) + <c, w(F)> w.r.t. the basis vectors and the query."""
    rng = np.random.default_rng([seed, 11])
    s, c, n = int(rng.integers(2, 6)), int(rng.integers(2, 6)), int(rng.integers(1, 4))
    bank = MotionBasisBank(rng.standard_normal((s, c)), kappa=float(rng.uniform(1, 10)))
    params = {"basis": bank.basis, "query": rng.standard_normal((n, c))}
    coef = rng.standard_normal((n, s))

    def loss_and_grads():
        cache = bank.forward(params["query"])
        l1, g_f, g_r = basis_loss(params["query"], cache.recon)
        g_b, g_q = bank.backward(cache, g_r, coef)
        return l1 + float(np.sum(coef * cache.weights)), {"basis": g_b, "query": g_q + g_f}

    def kinks():
        return _pattern(params["query"] - bank.forward(params["query"]).recon)

    base = kinks()
    return grad_check(params, loss_and_grads, tol, H, skip=lambda: kinks() != base)


def check_kl(seed: int, tol: float = 1e-4) -> GradCheckReport:
    """KL(w_visual || softmax(z)) w.r.t. the logits z."""
    rng = np.random.default_rng([seed, 12])
    n, s = int(rng.integers(1, 4)), int(rng.integers(2, 8))
    target = softmax(rng.standard_normal((n, s)) * 2)
    params = {"logits": rng.standard_normal((n, s))}

    def loss_and_grads():
        loss, g = kl_loss(target, softmax(params["logits"]))
        return loss, {"logits": g}

    return grad_check(params, loss_and_grads, tol, H)


def _random_net(rng) -> SmallNet:
    depth = int(rng.integers(1, 4))
    dims = [int(d) for d in rng.integers(2, 7, size=depth + 1)]
    acts = [str(a) for a in rng.choice(["linear", "relu", "tanh"], size=depth)]
    net = SmallNet.build(dims, acts, rng)
    for layer in net.layers:  # nonzero biases exercise the bias gradient
        layer.bias[:] = 0.3 * rng.standard_normal(layer.bias.shape)
    return net


def check_net(seed: int, tol: float = 1e-4) -> GradCheckReport:
    """<c, net(x)> w.r.t. every weight, bias and the input."""
    rng = np.random.default_rng([seed, 13])
    net = _random_net(rng)
    n = int(rng.integers(1, 4))
    x = rng.standard_normal((n, net.input_dim))
    coef = rng.standard_normal((n, net.output_dim))
    params = dict(net.params(), x=x)

    def loss_and_grads():
        out, cache = net_forward(net, x)
        grads, g_in = net.backward(cache, coef)
        return float(np.sum(coef * out)), dict(grads, x=g_in)

    def kinks():
        _, cache = net_forward(net, x)
        return _pattern(*[z for layer, z in zip(net.layers, cache.pre) if layer.activation == "relu"])

    base = kinks()
    return grad_check(params, loss_and_grads, tol, H, skip=lambda: kinks() != base)


def check_normalize(seed: int, tol: float = 1e-4) -> GradCheckReport:
    rng = np.random.default_rng([seed, 14])
    n, c = int(rng.integers(1, 4)), int(rng.integers(2, 8))
    params = {"x": rng.standard_normal((n, c))}
    coef = rng.standard_normal((n, c))

    def loss_and_grads():
        x = params["x"]
        return float(np.sum(coef * unit_normalize(x))), {"x": unit_normalize_backward(x, coef)}

    return grad_check(params, loss_and_grads, tol, H)


def _random_pose(rng) -> PoseFrame:
    return PoseFrame.from_vector(np.concatenate([rng.uniform(-0.4, 0.4, 3),
                                                 rng.uniform(-0.5, 0.5, 2),
                                                 [rng.uniform(8.0, 12.0)]]))


def check_landmark(seed: int, tol: float = 1e-6) -> GradCheckReport:
    """Weighted landmark loss w.r.t. the predicted points (quadratic, so tight)."""
    rng = np.random.default_rng([seed, 15])
    n = int(rng.integers(1, 10))
    omega = rng.choice([1.0, 20.0], size=n)
    target = rng.standard_normal((n, 2))
    params = {"pred": rng.standard_normal((n, 2))}

    def loss_and_grads():
        loss, g = landmark_loss(params["pred"], target, omega)
        return loss, {"pred": g}

    return grad_check(params, loss_and_grads, tol, H)


def check_expression(seed: int, tol: float = 1e-4, face: FaceModel | None = None) -> GradCheckReport:
    """L2 + lambda * landmark term w.r.t. the predicted expression coefficients."""
    face = face or load_desk_face_model()
    rng = np.random.default_rng([seed, 16])
    alpha = 0.3 * rng.standard_normal(face.id_dim)
    beta_true = 0.3 * rng.standard_normal(face.exp_dim)
    pose = _random_pose(rng)
    target = project_landmarks(reconstruct_shape(face, alpha, beta_true), face, pose)
    lam = float(rng.choice([0.02, 1.0]))
    params = {"beta": beta_true + 0.3 * rng.standard_normal(face.exp_dim)}

    def loss_and_grads():
        loss, g = expression_loss(params["beta"], beta_true, face, pose, target, lam, alpha)
        return loss, {"beta": g}

    return grad_check(params, loss_and_grads, tol, H)


CHECKS = {
    "bank": check_bank,
    "kl": check_kl,
    "net": check_net,
    "normalize": check_normalize,
    "landmark": check_landmark,
    "expression": check_expression,
}


def run_suite(seeds=range(100), tol: float = 1e-4) -> dict[str, GradCheckReport]:
    """Run every instance check over ``seeds``; one merged report per check.

    The landmark loss is checked at the tighter of ``tol`` and 1e-6.
    """
    face = load_desk_face_model()
    out = {}
    for name, fn in CHECKS.items():
        reports = {}
        for seed in seeds:
            if name == "expression":
                reports[str(seed)] = fn(seed, tol, face)
            elif name == "landmark":
                reports[str(seed)] = fn(seed, min(tol, 1e-6))
            else:
                reports[str(seed)] = fn(seed, tol)
        out[name] = _merge(reports, min(tol, 1e-6) if name == "landmark" else tol)
    return out


MODEL_FLOOR = 1e-5


def check_model(model, cfg, face: FaceModel | None = None, seed: int = 0, tol: float = 1e-4,
                max_entries: int | None = 200) -> dict[str, GradCheckReport]:
    """Check the stage-1/2/3 objectives of ``model`` on small random batches.

    Parameters larger than ``max_entries`` are spot-checked on a random
    subset of entries.  The stage objectives are O(1) sums of many terms, so
    their central differences carry ~1e-10 of rounding noise; entries whose
    true gradient is exactly zero (e.g. balanced L1 signs) are therefore
    judged against an absolute floor of ``MODEL_FLOOR`` rather than 1e-6.
    """
    from .training import FrameSet, stage1_loss, stage2_loss, stage3_loss

    face = face or load_desk_face_model()
    rng = np.random.default_rng([seed, 17])
    t = cfg.clip_len
    reports = {}

    offsets = 0.1 * rng.standard_normal((3, t, 6))
    offsets[:, 0] = 0.0
    p1 = {"basis": model.bank.basis, **{f"E_m.{k}": v for k, v in model.motion_net.params().items()},
          **{f"decoder.{k}": v for k, v in model.decoder.params().items()}}

    def s1():
        loss, _, _, g = stage1_loss(model, offsets, cfg.lambda_rec)
        flat = {"basis": g["bank"]["basis"]}
        flat.update({f"E_m.{k}": v for k, v in g["E_m"].items()})
        flat.update({f"decoder.{k}": v for k, v in g["decoder"].items()})
        return loss, flat

    def s1_kinks():
        n = offsets.shape[0]
        feat = unit_normalize(model.motion_net(offsets.reshape(n, -1)))
        recon = model.bank.forward(feat).recon
        pred = model.decoder(np.vstack([feat, recon]))
        target = np.tile(offsets[:, 1:].reshape(n, -1), (2, 1))
        return _pattern(feat - recon, pred - target)

    base1 = s1_kinks()
    reports["stage1"] = grad_check(p1, s1, tol, H, skip=lambda: s1_kinks() != base1,
                                   floor=MODEL_FLOOR, max_entries=max_entries, rng=rng)

    audio_dim = model.audio_net.input_dim
    audio = rng.standard_normal((2, audio_dim))
    w_vis = softmax(3 * rng.standard_normal((2, cfg.num_basis)))
    p2 = {f"E_a.{k}": v for k, v in model.audio_net.params().items()}

    def s2():
        loss, g = stage2_loss(model, audio, w_vis)
        return loss, {f"E_a.{k}": v for k, v in g["E_a"].items()}

    def s2_kinks():
        _, cache = net_forward(model.audio_net, audio)
        return _pattern(*[z for lay, z in zip(model.audio_net.layers, cache.pre)
                          if lay.activation == "relu"])

    base2 = s2_kinks()
    reports["stage2"] = grad_check(p2, s2, tol, H, skip=lambda: s2_kinks() != base2,
                                   floor=MODEL_FLOOR, max_entries=max_entries, rng=rng)

    m = 3
    n_subj = model.embeddings.shape[0]
    subjects = rng.integers(n_subj, size=m)
    alphas = 0.3 * rng.standard_normal((m, face.id_dim))
    betas = 0.3 * rng.standard_normal((m, face.exp_dim))
    poses = [_random_pose(rng) for _ in range(m)]
    targets = np.stack([project_landmarks(reconstruct_shape(face, a, b), face, p)
                        for a, b, p in zip(alphas, betas, poses)])
    frames = FrameSet(rng.standard_normal((m, AUDIO_FRAME_DIM)), betas, poses, subjects, alphas,
                      targets)
    idx = np.arange(m)
    p3 = {**{f"extractor.{k}": v for k, v in model.expr_net.params().items()},
          "embeddings": model.embeddings}

    def s3():
        loss, g = stage3_loss(model, frames, idx, face, cfg.lambda_ldmk)
        flat = {f"extractor.{k}": v for k, v in g["extractor"].items()}
        flat["embeddings"] = g["embeddings"]["table"]
        return loss, flat

    def s3_kinks():
        x = np.hstack([frames.audio, model.embeddings[subjects]])
        _, cache = net_forward(model.expr_net, x)
        return _pattern(*[z for lay, z in zip(model.expr_net.layers, cache.pre)
                          if lay.activation == "relu"])

    base3 = s3_kinks()
    reports["stage3"] = grad_check(p3, s3, tol, H, skip=lambda: s3_kinks() != base3,
                                   floor=MODEL_FLOOR, max_entries=max_entries, rng=rng)
    return reports

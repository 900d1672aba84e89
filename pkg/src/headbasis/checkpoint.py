"""Versioned plain-text checkpoints.

Layout (one item per line, floats written with ``repr`` so a save/load
round trip is bit exact)::

    headbasis-checkpoint v1
    [config]
    num_basis=8
    ...
    [progress]
    stage=2
    step=130
    [motion_space]
    shape 8 32
    kappa 10.0
    <S*C values, row-major>
    [net E_m]
    layers 2
    dims 30 64 32
    activations tanh linear
    <W0 values> / <b0 values> / <W1 values> / <b1 values>
    ... (E_a, extractor, decoder)
    [embeddings]
    shape 4 8
    <values>
    [velocity]
    array s1/E_m/W0 64 30
    <values>
    [history]
    1 0 4.87
    [end]

Blank lines are ignored.  Anything after ``[end]`` is ignored too.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .config import TrainConfig
from .errors import DomainError, ParseError
from .motion_space import MotionBasisBank
from .nets import Layer, SmallNet
from .training import Checkpoint, Model

MAGIC = "headbasis-checkpoint"
VERSION = 1
NET_NAMES = ("E_m", "E_a", "extractor", "decoder")


def _values(arr: np.ndarray) -> str:
    return " ".join(repr(float(v)) for v in np.asarray(arr, dtype=np.float64).reshape(-1))


def _shape(arr: np.ndarray) -> str:
    return " ".join(str(d) for d in arr.shape)


def dumps(ckpt: Checkpoint) -> str:
    m = ckpt.model
    out = [f"{MAGIC} v{VERSION}", "[config]", ckpt.config.to_text().rstrip("\n"),
           "[progress]", f"stage={ckpt.stage}", f"step={ckpt.step}",
           "[motion_space]", f"shape {_shape(m.bank.basis)}", f"kappa {m.bank.kappa!r}",
           _values(m.bank.basis)]
    for name, net in m.nets().items():
        dims = [net.input_dim] + [layer.weight.shape[0] for layer in net.layers]
        out += [f"[net {name}]", f"layers {len(net.layers)}",
                "dims " + " ".join(map(str, dims)),
                "activations " + " ".join(layer.activation for layer in net.layers)]
        for layer in net.layers:
            out += [_values(layer.weight), _values(layer.bias)]
    out += ["[embeddings]", f"shape {_shape(m.embeddings)}", _values(m.embeddings)]
    out.append("[velocity]")
    for key in sorted(ckpt.velocity):
        v = ckpt.velocity[key]
        if any(c.isspace() for c in key):
            raise DomainError(f"velocity key {key!r} contains whitespace")
        out += [f"array {key} {_shape(v)}".rstrip(), _values(v)]
    out.append("[history]")
    for stage in sorted(ckpt.history):
        out += [f"{stage} {step} {loss!r}" for step, loss in ckpt.history[stage]]
    out.append("[end]")
    return "\n".join(out) + "\n"


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    Path(path).write_text(dumps(ckpt), encoding="utf-8")


class _Lines:
    """Cursor over the non-blank lines of a checkpoint."""

    def __init__(self, text: str):
        self.lines = [ln.strip() for ln in text.splitlines()]
        self.lines = [ln for ln in self.lines if ln]
        self.pos = 0

    def next(self, what: str) -> str:
        if self.pos >= len(self.lines):
            raise ParseError(f"checkpoint truncated: expected {what}")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def peek(self) -> str | None:
        return self.lines[self.pos] if self.pos < len(self.lines) else None

    def expect(self, header: str) -> None:
        line = self.next(header)
        if line != header:
            raise ParseError(f"expected {header!r}, got {line[:40]!r}")

    def keyword(self, key: str) -> list[str]:
        parts = self.next(key).split()
        if not parts or parts[0] != key:
            raise ParseError(f"expected a {key!r} line, got {' '.join(parts)[:40]!r}")
        return parts[1:]

    def ints(self, key: str) -> list[int]:
        try:
            return [int(p) for p in self.keyword(key)]
        except ValueError as exc:
            raise ParseError(f"bad integers on {key!r} line") from exc

    def array(self, shape, what: str) -> np.ndarray:
        line = self.next(what)
        try:
            vals = np.array([float(v) for v in line.split()], dtype=np.float64)
        except ValueError as exc:
            raise ParseError(f"{what}: non-numeric value") from exc
        want = int(np.prod(shape)) if len(shape) else 1
        if vals.size != want:
            raise ParseError(f"{what}: expected {want} values, got {vals.size}")
        if not np.all(np.isfinite(vals)):
            raise ParseError(f"{what}: non-finite value")
        return vals.reshape(shape)


def _key_value(line: str, key: str) -> int:
    k, _, v = line.partition("=")
    if k != key:
        raise ParseError(f"expected {key}=..., got {line[:40]!r}")
    try:
        return int(v)
    except ValueError as exc:
        raise ParseError(f"bad value for {key}: {v!r}") from exc


def loads(text: str) -> Checkpoint:
    cur = _Lines(text)
    head = cur.next("header")
    if head != f"{MAGIC} v{VERSION}":
        if head.startswith(MAGIC):
            raise ParseError(f"unsupported checkpoint version {head[len(MAGIC):].strip()!r}")
        raise ParseError("not an headbasis checkpoint")
    cur.expect("[config]")
    cfg_lines = []
    while cur.peek() is not None and not cur.peek().startswith("["):
        cfg_lines.append(cur.next("config"))
    config = TrainConfig.from_text("\n".join(cfg_lines))
    cur.expect("[progress]")
    stage = _key_value(cur.next("stage"), "stage")
    step = _key_value(cur.next("step"), "step")
    if not 1 <= stage <= 4 or step < 0:
        raise ParseError(f"invalid progress stage={stage} step={step}")

    try:
        cur.expect("[motion_space]")
        shape = cur.ints("shape")
        if len(shape) != 2 or shape != [config.num_basis, config.feature_dim]:
            raise ParseError(f"motion space shape {shape} disagrees with config")
        kappa = cur.keyword("kappa")
        if len(kappa) != 1:
            raise ParseError("malformed kappa line")
        bank = MotionBasisBank(cur.array(shape, "basis"), float(kappa[0]))

        nets = {}
        for name in NET_NAMES:
            cur.expect(f"[net {name}]")
            counts = cur.ints("layers")
            dims = cur.ints("dims")
            acts = cur.keyword("activations")
            n_layers = counts[0] if len(counts) == 1 else 0
            if n_layers < 1 or len(dims) != n_layers + 1 or len(acts) != n_layers:
                raise ParseError(f"net {name}: inconsistent layer description")
            layers = []
            for i in range(n_layers):
                w = cur.array((dims[i + 1], dims[i]), f"{name} W{i}")
                b = cur.array((dims[i + 1],), f"{name} b{i}")
                layers.append(Layer(w, b, acts[i]))
            nets[name] = SmallNet(layers)

        cur.expect("[embeddings]")
        emb_shape = cur.ints("shape")
        if len(emb_shape) != 2 or emb_shape[1] != config.identity_dim:
            raise ParseError(f"embedding shape {emb_shape} disagrees with config")
        embeddings = cur.array(emb_shape, "embeddings")

        cur.expect("[velocity]")
        velocity = {}
        while cur.peek() is not None and cur.peek().startswith("array "):
            parts = cur.next("velocity").split()
            try:
                vshape = tuple(int(p) for p in parts[2:])
            except (ValueError, IndexError) as exc:
                raise ParseError("malformed velocity header") from exc
            if len(parts) < 2:
                raise ParseError("malformed velocity header")
            velocity[parts[1]] = cur.array(vshape, f"velocity {parts[1]}")

        cur.expect("[history]")
        history: dict[int, list[tuple[int, float]]] = {}
        while cur.peek() is not None and not cur.peek().startswith("["):
            parts = cur.next("history").split()
            if len(parts) != 3:
                raise ParseError(f"malformed history line {' '.join(parts)!r}")
            try:
                history.setdefault(int(parts[0]), []).append((int(parts[1]), float(parts[2])))
            except ValueError as exc:
                raise ParseError(f"malformed history line {' '.join(parts)!r}") from exc
        cur.expect("[end]")
    except ParseError:
        raise
    except ValueError as exc:  # shape and domain errors from the constructors
        raise ParseError(f"inconsistent checkpoint: {exc}") from exc

    model = Model(bank, nets["E_m"], nets["E_a"], nets["extractor"], nets["decoder"], embeddings)
    _check_model(model, config)
    return Checkpoint(config, model, stage, step, velocity, history)


def _check_model(model: Model, cfg: TrainConfig) -> None:
    t, c, s = cfg.clip_len, cfg.feature_dim, cfg.num_basis
    want = {
        "E_m": (6 * t, c),
        "E_a": (model.audio_net.input_dim, s),
        "extractor": (model.expr_net.input_dim, model.expr_net.output_dim),
        "decoder": (c, 6 * (t - 1)),
    }
    for name, net in model.nets().items():
        if (net.input_dim, net.output_dim) != want[name]:
            raise ParseError(f"net {name} dims {(net.input_dim, net.output_dim)} disagree with "
                             f"config (want {want[name]})")
    if model.audio_net.input_dim % t:
        raise ParseError("audio encoder input is not a whole number of frames")
    if model.expr_net.input_dim - cfg.identity_dim <= 0:
        raise ParseError("expression net input too small for identity embedding")


def load_checkpoint(path: str | Path) -> Checkpoint:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read checkpoint {path}: {exc}") from exc
    return loads(text)

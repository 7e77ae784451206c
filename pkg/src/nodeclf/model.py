"""The end-to-end classifier and its training loop.

A feature vector x is encoded into the hidden space (h0 = E x + e), the
hidden state flows from t=0 to t=1 under the learned derivative, and a
linear softmax head reads the terminal state.  Head and encoder gradients
are closed-form chain-rule terms; the gradient through the flow itself
comes from :func:`nodeclf.adjoint.backward`, so no intermediate states
are stored.

Training is plain Adam over seeded shuffled mini-batches.  Everything is
deterministic: the same data, config, and seed reproduce the model bit
for bit.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Optional, Sequence

from . import _backend, adjoint
from .dynamics import DynamicsParams, ParamGrad
from .errors import ConfigError, DimensionError, SolverError, TrainingError
from .linalg import Matrix, Vector, new_buffer
from .odesolve import SolverConfig, solve
from .text import TfidfModel, transform


@dataclass
class NodeClassifier:
    """Encoder, flow dynamics, softmax head, and solver settings."""

    enc_w: Matrix
    enc_b: Vector
    dynamics: DynamicsParams
    head_w: Matrix
    head_b: Vector
    solver: SolverConfig
    label_names: list[str]

    def __post_init__(self):
        d = self.dynamics.d
        if self.enc_w.rows != d or self.enc_b.dim != d:
            raise DimensionError(
                f"encoder maps to dim {self.enc_w.rows} (bias {self.enc_b.dim}), "
                f"dynamics dimension is {d}"
            )
        if self.head_w.cols != d:
            raise DimensionError(
                f"head reads dim {self.head_w.cols}, dynamics dimension is {d}"
            )
        if self.head_b.dim != self.head_w.rows:
            raise DimensionError(
                f"head bias has dim {self.head_b.dim}, head has "
                f"{self.head_w.rows} rows"
            )
        if self.head_w.rows < 2:
            raise ConfigError("classifier needs at least 2 classes")
        if len(self.label_names) != self.head_w.rows:
            raise ConfigError(
                f"{len(self.label_names)} label names for {self.head_w.rows} classes"
            )

    @property
    def n_features(self) -> int:
        return self.enc_w.cols

    @property
    def hidden_dim(self) -> int:
        return self.dynamics.d

    @property
    def n_classes(self) -> int:
        return self.head_w.rows

    def copy(self) -> "NodeClassifier":
        return NodeClassifier(
            enc_w=self.enc_w.copy(),
            enc_b=self.enc_b.copy(),
            dynamics=self.dynamics.copy(),
            head_w=self.head_w.copy(),
            head_b=self.head_b.copy(),
            solver=self.solver,
            label_names=list(self.label_names),
        )

    def param_arrays(self) -> list[tuple[str, object]]:
        """Named flat parameter buffers, in a fixed order."""
        return [
            ("encoder.weight", self.enc_w.data),
            ("encoder.bias", self.enc_b.data),
            ("dynamics.weight", self.dynamics.w.data),
            ("dynamics.bias", self.dynamics.b.data),
            ("head.weight", self.head_w.data),
            ("head.bias", self.head_b.data),
        ]


@dataclass
class ModelGrad:
    """Gradient for every parameter group of a :class:`NodeClassifier`."""

    enc_w: Matrix
    enc_b: Vector
    dynamics: ParamGrad
    head_w: Matrix
    head_b: Vector

    def arrays(self) -> list[object]:
        return [self.enc_w.data, self.enc_b.data, self.dynamics.dw.data,
                self.dynamics.db.data, self.head_w.data, self.head_b.data]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    l2_penalty: float = 0.0

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0.0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        for name in ("adam_beta1", "adam_beta2"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ConfigError(f"{name} must be in [0, 1), got {v}")
        if self.l2_penalty < 0.0:
            raise ConfigError(f"l2_penalty must be >= 0, got {self.l2_penalty}")


@dataclass
class LabeledDataset:
    """Texts with class indices."""

    examples: list[tuple[str, int]]

    def __post_init__(self):
        for text, label in self.examples:
            if label < 0:
                raise ConfigError(f"negative class index {label}")

    def __len__(self) -> int:
        return len(self.examples)

    def n_classes_present(self) -> int:
        return len({label for _, label in self.examples})


def init_classifier(n_features: int, hidden_dim: int, n_classes: int,
                    label_names: Optional[Sequence[str]] = None,
                    solver: Optional[SolverConfig] = None,
                    seed: int = 0) -> NodeClassifier:
    """Fresh classifier with uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights.

    Weight draws happen row-major in a fixed group order (encoder,
    dynamics, head); biases start at zero.  The same seed reproduces the
    same model bit for bit.
    """
    if n_classes < 2:
        raise ConfigError(f"n_classes must be >= 2, got {n_classes}")
    if label_names is None:
        label_names = [str(i) for i in range(n_classes)]
    rng = random.Random(seed)

    def uniform_matrix(rows: int, cols: int, fan_in: int) -> Matrix:
        bound = 1.0 / math.sqrt(fan_in)
        m = Matrix.zeros(rows, cols)
        data = m.data
        for i in range(rows * cols):
            data[i] = rng.uniform(-bound, bound)
        return m

    return NodeClassifier(
        enc_w=uniform_matrix(hidden_dim, n_features, n_features),
        enc_b=Vector.zeros(hidden_dim),
        dynamics=DynamicsParams(
            uniform_matrix(hidden_dim, hidden_dim, hidden_dim),
            Vector.zeros(hidden_dim),
        ),
        head_w=uniform_matrix(n_classes, hidden_dim, hidden_dim),
        head_b=Vector.zeros(n_classes),
        solver=solver if solver is not None else SolverConfig(),
        label_names=list(label_names),
    )


def _make_rhs(p: DynamicsParams):
    out = Vector.zeros(p.d)
    w, b, d = p.w.data, p.b.data, p.d
    K = _backend.kernels

    def rhs(t: float, h: Vector) -> Vector:
        K.relu_affine_into(out.data, w, b, d, h.data)
        return out

    return rhs


def _encode(m: NodeClassifier, x: Vector) -> Vector:
    if x.dim != m.n_features:
        raise DimensionError(
            f"feature vector has dim {x.dim}, model expects {m.n_features}"
        )
    h0 = Vector.zeros(m.hidden_dim)
    K = _backend.kernels
    K.matvec_into(h0.data, m.enc_w.data, m.hidden_dim, m.n_features, x.data)
    K.acc_scaled(h0.data, 1.0, m.enc_b.data)
    return h0


def _logits(m: NodeClassifier, h1: Vector) -> Vector:
    out = Vector.zeros(m.n_classes)
    K = _backend.kernels
    K.matvec_into(out.data, m.head_w.data, m.n_classes, m.hidden_dim, h1.data)
    K.acc_scaled(out.data, 1.0, m.head_b.data)
    return out


def _log_softmax(logits: Vector) -> tuple[Vector, Vector]:
    """(probabilities, log-probabilities), computed stably."""
    top = max(logits.data)
    exps = [math.exp(v - top) for v in logits.data]
    total = math.fsum(exps)
    log_total = math.log(total)
    probs = Vector.of(e / total for e in exps)
    logps = Vector.of((v - top) - log_total for v in logits.data)
    return probs, logps


def forward(m: NodeClassifier, x: Vector) -> tuple[Vector, Vector]:
    """Class probabilities and the terminal hidden state for one input."""
    h0 = _encode(m, x)
    h1, _ = solve(_make_rhs(m.dynamics), h0, 0.0, 1.0, m.solver)
    probs, _ = _log_softmax(_logits(m, h1))
    return probs, h1


def _l2_value(m: NodeClassifier, l2: float) -> float:
    if l2 == 0.0:
        return 0.0
    total = 0.0
    for _, arr in m.param_arrays():
        for v in arr:
            total += v * v
    return 0.5 * l2 * total


def loss(m: NodeClassifier, batch: Sequence[tuple[Vector, int]],
         l2_penalty: float = 0.0) -> float:
    """Mean cross-entropy of the true classes, plus an optional L2 term."""
    if len(batch) == 0:
        raise ConfigError("loss needs a non-empty batch")
    total = 0.0
    for x, label in batch:
        if not 0 <= label < m.n_classes:
            raise ConfigError(f"label {label} out of range for {m.n_classes} classes")
        h0 = _encode(m, x)
        h1, _ = solve(_make_rhs(m.dynamics), h0, 0.0, 1.0, m.solver)
        _, logps = _log_softmax(_logits(m, h1))
        total -= logps[label]
    return total / len(batch) + _l2_value(m, l2_penalty)


def _grad_and_loss(m: NodeClassifier, batch: Sequence[tuple[Vector, int]],
                   l2_penalty: float = 0.0) -> tuple[ModelGrad, float]:
    if len(batch) == 0:
        raise ConfigError("grad needs a non-empty batch")
    K = _backend.kernels
    d = m.hidden_dim
    nv = m.n_features
    C = m.n_classes
    g = ModelGrad(
        enc_w=Matrix.zeros(d, nv),
        enc_b=Vector.zeros(d),
        dynamics=ParamGrad.zeros(d),
        head_w=Matrix.zeros(C, d),
        head_b=Vector.zeros(C),
    )
    total = 0.0
    dlogits = new_buffer(C)
    dh1 = Vector.zeros(d)
    for idx, (x, label) in enumerate(batch):
        if not 0 <= label < C:
            raise ConfigError(f"label {label} out of range for {C} classes")
        try:
            h0 = _encode(m, x)
            h1, _ = solve(_make_rhs(m.dynamics), h0, 0.0, 1.0, m.solver)
        except SolverError as e:
            raise type(e)(f"example {idx}: {e}", *_solver_err_args(e)) from e
        probs, logps = _log_softmax(_logits(m, h1))
        total -= logps[label]

        K.copy_into(dlogits, probs.data)
        dlogits[label] -= 1.0
        K.outer_acc(g.head_w.data, C, d, 1.0, dlogits, h1.data)
        K.acc_scaled(g.head_b.data, 1.0, dlogits)
        K.matvec_t_into(dh1.data, m.head_w.data, C, d, dlogits)

        try:
            dh0, pg = adjoint.backward(m.dynamics, h1, dh1, 0.0, 1.0, m.solver)
        except SolverError as e:
            raise type(e)(f"example {idx}: {e}", *_solver_err_args(e)) from e
        K.acc_scaled(g.dynamics.dw.data, 1.0, pg.dw.data)
        K.acc_scaled(g.dynamics.db.data, 1.0, pg.db.data)
        K.outer_acc(g.enc_w.data, d, nv, 1.0, dh0.data, x.data)
        K.acc_scaled(g.enc_b.data, 1.0, dh0.data)

    inv = 1.0 / len(batch)
    for arr in g.arrays():
        K.scale_into(arr, inv, arr)
    if l2_penalty != 0.0:
        for garr, (_, parr) in zip(g.arrays(), m.param_arrays()):
            K.acc_scaled(garr, l2_penalty, parr)
    return g, total / len(batch) + _l2_value(m, l2_penalty)


def _solver_err_args(e: SolverError) -> tuple:
    if hasattr(e, "stats"):
        return (e.stats,)
    if hasattr(e, "t"):
        return (e.t,)
    return ()


def grad(m: NodeClassifier, batch: Sequence[tuple[Vector, int]],
         l2_penalty: float = 0.0) -> ModelGrad:
    """Mean parameter gradient of :func:`loss` over ``batch``."""
    g, _ = _grad_and_loss(m, batch, l2_penalty)
    return g


def train(m: NodeClassifier, data: LabeledDataset, cfg: TrainConfig,
          tfidf: TfidfModel) -> tuple[NodeClassifier, list[float]]:
    """Adam training over seeded shuffled mini-batches.

    Returns a trained copy of ``m`` (the input is left untouched) and the
    per-epoch mean training loss.  Identical inputs and seed reproduce the
    result bit for bit.
    """
    if len(data) == 0:
        raise ConfigError("training data is empty")
    if data.n_classes_present() < 2:
        raise ConfigError("training data contains a single class")
    features = [transform(tfidf, text) for text, _ in data.examples]
    labels = [label for _, label in data.examples]
    for label in labels:
        if label >= m.n_classes:
            raise ConfigError(
                f"label {label} out of range for {m.n_classes} classes"
            )

    model = m.copy()
    if cfg.epochs == 0:
        return model, []

    K = _backend.kernels
    params = [arr for _, arr in model.param_arrays()]
    moment1 = [new_buffer(len(arr)) for arr in params]
    moment2 = [new_buffer(len(arr)) for arr in params]
    rng = random.Random(cfg.seed)
    n = len(features)
    order = list(range(n))
    curve: list[float] = []
    step = 0
    for epoch in range(cfg.epochs):
        rng.shuffle(order)
        epoch_loss = 0.0
        for start in range(0, n, cfg.batch_size):
            chunk = order[start:start + cfg.batch_size]
            batch = [(features[i], labels[i]) for i in chunk]
            g, batch_loss = _grad_and_loss(model, batch, cfg.l2_penalty)
            if not math.isfinite(batch_loss):
                raise TrainingError(
                    f"non-finite loss in epoch {epoch}", epoch=epoch
                )
            epoch_loss += batch_loss * len(chunk)
            step += 1
            bc1 = 1.0 - cfg.adam_beta1 ** step
            bc2 = 1.0 - cfg.adam_beta2 ** step
            for parr, m1, m2, garr in zip(params, moment1, moment2, g.arrays()):
                K.adam_step(parr, m1, m2, garr, cfg.learning_rate,
                            cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps,
                            bc1, bc2)
        curve.append(epoch_loss / n)
    return model, curve


def predict(m: NodeClassifier, tfidf: TfidfModel, text: str) -> tuple[int, Vector]:
    """Predicted class index (ties broken toward the lowest index) and probabilities."""
    probs, _ = forward(m, transform(tfidf, text))
    best = 0
    for i in range(1, m.n_classes):
        if probs[i] > probs[best]:
            best = i
    return best, probs

"""Multi-task multi-modal artwork classifier.

A two-layer tanh encoder projects 2048-d visual features into the 128-d
context-embedding space; the predicted context is concatenated with the
visual features and three linear heads score artist, style, and genre.
The combined objective blends per-task cross-entropy (weighted, batch
mean) with the mean squared projection error, balanced by gamma.

Three modes share one code path:

* ``multimodal``        - heads see concat(visual, predicted context).
* ``regularization_only`` - heads see visual only; the projection loss
  still trains the encoder (context as a pure regularization signal).
* ``visual_only``       - no encoder; heads on visual features alone.

All math is float64 numpy with hand-derived gradients and an explicit
Adam update, so training is deterministic given (seed, dataset, config).
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError

CHECKPOINT_MAGIC = b"AGCK"
CHECKPOINT_VERSION = 1

TASKS = ("artist", "style", "genre")
MODES = ("multimodal", "regularization_only", "visual_only")


@dataclass
class ModelConfig:
    num_artists: int
    num_styles: int
    num_genres: int
    visual_dim: int = 2048
    context_dim: int = 128
    encoder_hidden: int = 512
    gamma: float = 0.4
    lambda_artist: float = 0.5
    lambda_style: float = 0.2
    lambda_genre: float = 0.2
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 32
    epochs: int = 10
    seed: int = 0
    mode: str = "multimodal"

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ValidationError(f"unknown mode {self.mode!r}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValidationError("gamma must be in [0, 1]")
        for task in TASKS:
            if getattr(self, f"lambda_{task}") < 0:
                raise ValidationError("task weights must be >= 0")
        for name in (
            "visual_dim",
            "context_dim",
            "encoder_hidden",
            "num_artists",
            "num_styles",
            "num_genres",
            "batch_size",
        ):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1")
        if self.epochs < 0:
            raise ValidationError("epochs must be >= 0")

    def num_classes(self, task: str) -> int:
        return {
            "artist": self.num_artists,
            "style": self.num_styles,
            "genre": self.num_genres,
        }[task]

    def task_weight(self, task: str) -> float:
        return getattr(self, f"lambda_{task}")

    @property
    def uses_encoder(self) -> bool:
        return self.mode != "visual_only"

    @property
    def uses_context(self) -> bool:
        return self.mode in ("multimodal", "regularization_only")

    @property
    def head_input_dim(self) -> int:
        if self.mode == "multimodal":
            return self.visual_dim + self.context_dim
        return self.visual_dim

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        cfg = cls(**data)
        cfg.validate()
        return cfg


@dataclass
class LabeledInstance:
    artwork: int
    visual: np.ndarray
    labels: tuple[int, int, int]  # (artist, style, genre) class indices
    context: np.ndarray | None = None


@dataclass
class EncoderParams:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray


@dataclass
class HeadParams:
    W: np.ndarray
    b: np.ndarray


@dataclass
class ClassifierParams:
    encoder: EncoderParams | None
    heads: dict[str, HeadParams]

    def items(self):
        """(name, array) pairs in a fixed order shared with gradients."""
        if self.encoder is not None:
            yield "encoder.W1", self.encoder.W1
            yield "encoder.b1", self.encoder.b1
            yield "encoder.W2", self.encoder.W2
            yield "encoder.b2", self.encoder.b2
        for task in TASKS:
            yield f"head.{task}.W", self.heads[task].W
            yield f"head.{task}.b", self.heads[task].b


Gradients = dict[str, np.ndarray]


@dataclass
class ForwardTrace:
    """Batch activations cached for the backward pass."""

    visual: np.ndarray  # (N, visual_dim)
    hidden: np.ndarray | None  # (N, encoder_hidden)
    predicted_context: np.ndarray | None  # (N, context_dim), in (-1, 1)
    features: np.ndarray  # head input, (N, head_input_dim)
    logits: dict[str, np.ndarray]  # task -> (N, classes)


def init_params(config: ModelConfig) -> ClassifierParams:
    """Seeded Glorot-uniform weights, zero biases."""
    config.validate()
    rng = np.random.default_rng(config.seed)

    def glorot(fan_out: int, fan_in: int) -> np.ndarray:
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=(fan_out, fan_in))

    encoder = None
    if config.uses_encoder:
        encoder = EncoderParams(
            W1=glorot(config.encoder_hidden, config.visual_dim),
            b1=np.zeros(config.encoder_hidden),
            W2=glorot(config.context_dim, config.encoder_hidden),
            b2=np.zeros(config.context_dim),
        )
    heads = {}
    for task in TASKS:
        k = config.num_classes(task)
        heads[task] = HeadParams(W=glorot(k, config.head_input_dim), b=np.zeros(k))
    return ClassifierParams(encoder, heads)


def encoder_forward(visual: np.ndarray, params: ClassifierParams) -> np.ndarray:
    """tanh(W2 tanh(W1 x + b1) + b2); output entries lie strictly in (-1, 1)."""
    if params.encoder is None:
        raise ValidationError("params have no encoder (visual_only mode)")
    enc = params.encoder
    visual = np.asarray(visual, dtype=np.float64)
    if visual.shape != (enc.W1.shape[1],):
        raise ValidationError(
            f"visual vector has shape {visual.shape}, expected ({enc.W1.shape[1]},)"
        )
    hidden = np.tanh(enc.W1 @ visual + enc.b1)
    return np.tanh(enc.W2 @ hidden + enc.b2)


def mse_loss(p: np.ndarray, u: np.ndarray) -> float:
    """Squared L2 distance (summed over dimensions, no normalization)."""
    p = np.asarray(p, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if p.shape != u.shape:
        raise ValidationError(f"shape mismatch: {p.shape} vs {u.shape}")
    diff = p - u
    return float(diff @ diff)


def cross_entropy(logits: np.ndarray, class_index: int) -> float:
    """-log softmax(logits)[class], stabilized against overflow."""
    z = np.asarray(logits, dtype=np.float64)
    if not 0 <= class_index < z.shape[0]:
        raise IndexError(f"class {class_index} out of range for {z.shape[0]} logits")
    m = z.max()
    return float(m + np.log(np.exp(z - m).sum()) - z[class_index])


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _stack_batch(
    batch, config: ModelConfig
) -> tuple[np.ndarray, np.ndarray | None, dict[str, np.ndarray]]:
    visual = _stack_visual(batch, config)
    context = None
    if config.uses_context:
        missing = [inst.artwork for inst in batch if inst.context is None]
        if missing:
            raise ValidationError(
                f"mode {config.mode} requires context vectors; "
                f"missing for artwork {missing[0]}"
            )
        context = np.stack(
            [np.asarray(inst.context, dtype=np.float64) for inst in batch]
        )
        if context.shape[1] != config.context_dim:
            raise ValidationError(
                f"context dim {context.shape[1]} != configured {config.context_dim}"
            )
    labels = {}
    for t, task in enumerate(TASKS):
        idx = np.array([inst.labels[t] for inst in batch], dtype=np.int64)
        k = config.num_classes(task)
        if idx.min() < 0 or idx.max() >= k:
            raise IndexError(f"{task} label out of range [0, {k})")
        labels[task] = idx
    return visual, context, labels


def forward(batch, params: ClassifierParams, config: ModelConfig) -> ForwardTrace:
    """Run the model on a batch (sequence of LabeledInstance).

    In multimodal mode the heads always consume the *predicted* context,
    never the true one, so training and test-time inputs match. Contexts
    are not required here; only the loss and backward pass read them.
    """
    if isinstance(batch, LabeledInstance):
        batch = [batch]
    visual = _stack_visual(batch, config)
    hidden = None
    predicted = None
    if config.uses_encoder:
        enc = params.encoder
        hidden = np.tanh(visual @ enc.W1.T + enc.b1)
        predicted = np.tanh(hidden @ enc.W2.T + enc.b2)
    features = (
        np.concatenate([visual, predicted], axis=1)
        if config.mode == "multimodal"
        else visual
    )
    logits = {
        task: features @ params.heads[task].W.T + params.heads[task].b
        for task in TASKS
    }
    return ForwardTrace(visual, hidden, predicted, features, logits)


def _stack_visual(batch, config: ModelConfig) -> np.ndarray:
    if not batch:
        raise ValidationError("batch must be non-empty")
    visual = np.stack([np.asarray(inst.visual, dtype=np.float64) for inst in batch])
    if visual.shape[1] != config.visual_dim:
        raise ValidationError(
            f"visual dim {visual.shape[1]} != configured {config.visual_dim}"
        )
    return visual


def total_loss(batch, trace: ForwardTrace, config: ModelConfig) -> float:
    """(1 - gamma) * sum_i lambda_i * mean_j CE + gamma * mean_j MSE.

    Per-task sums are taken as batch means so the gamma balance does not
    depend on batch size; visual_only mode reduces to the weighted
    classification term.
    """
    if isinstance(batch, LabeledInstance):
        batch = [batch]
    _, context, labels = _stack_batch(batch, config)
    n = len(batch)
    cls_term = 0.0
    for task in TASKS:
        z = trace.logits[task]
        idx = labels[task]
        m = z.max(axis=1)
        lse = m + np.log(np.exp(z - m[:, None]).sum(axis=1))
        ce = lse - z[np.arange(n), idx]
        cls_term += config.task_weight(task) * float(ce.mean())
    if not config.uses_context:
        return cls_term
    diff = trace.predicted_context - context
    mse_term = float((diff * diff).sum(axis=1).mean())
    return (1.0 - config.gamma) * cls_term + config.gamma * mse_term


def backward(
    batch, trace: ForwardTrace, params: ClassifierParams, config: ModelConfig
) -> Gradients:
    """Analytic gradients of total_loss for every parameter tensor.

    In multimodal mode the classification error flows through the
    concatenated predicted context back into the encoder, alongside the
    projection error.
    """
    if isinstance(batch, LabeledInstance):
        batch = [batch]
    _, context, labels = _stack_batch(batch, config)
    n = len(batch)
    grads: Gradients = {}
    cls_scale = (1.0 - config.gamma) if config.uses_context else 1.0

    d_features = np.zeros_like(trace.features)
    for task in TASKS:
        z = trace.logits[task]
        s = softmax(z)
        s[np.arange(n), labels[task]] -= 1.0
        dz = (cls_scale * config.task_weight(task) / n) * s
        grads[f"head.{task}.W"] = dz.T @ trace.features
        grads[f"head.{task}.b"] = dz.sum(axis=0)
        d_features += dz @ params.heads[task].W

    if config.uses_encoder:
        p = trace.predicted_context
        d_p = (2.0 * config.gamma / n) * (p - context)
        if config.mode == "multimodal":
            d_p = d_p + d_features[:, config.visual_dim :]
        enc = params.encoder
        d_a2 = d_p * (1.0 - p * p)
        grads["encoder.W2"] = d_a2.T @ trace.hidden
        grads["encoder.b2"] = d_a2.sum(axis=0)
        d_h = d_a2 @ enc.W2
        d_a1 = d_h * (1.0 - trace.hidden * trace.hidden)
        grads["encoder.W1"] = d_a1.T @ trace.visual
        grads["encoder.b1"] = d_a1.sum(axis=0)
    return grads


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def init_adam(params: ClassifierParams) -> AdamState:
    state = AdamState()
    for name, tensor in params.items():
        state.m[name] = np.zeros_like(tensor)
        state.v[name] = np.zeros_like(tensor)
    return state


def adam_step(
    params: ClassifierParams,
    grads: Gradients,
    state: AdamState,
    config: ModelConfig,
) -> tuple[ClassifierParams, AdamState]:
    """One in-place Adam update with bias correction."""
    state.t += 1
    b1, b2, eps = config.beta1, config.beta2, config.epsilon
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    for name, tensor in params.items():
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != tensor.shape:
            raise ValidationError(f"gradient shape mismatch for {name}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        tensor -= config.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return params, state


@dataclass
class EpochLog:
    epoch: int
    loss: float
    val_accuracy: dict[str, float] | None = None

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "loss": self.loss,
            "val_accuracy": dict(self.val_accuracy) if self.val_accuracy else None,
        }


def predict(
    instance: LabeledInstance, params: ClassifierParams, config: ModelConfig
) -> tuple[int, int, int]:
    """Per-task argmax of the logits; ties break to the lowest class index."""
    trace = forward([instance], params, config)
    return tuple(int(np.argmax(trace.logits[task][0])) for task in TASKS)


def train(
    dataset: list[LabeledInstance],
    config: ModelConfig,
    val_set: list[LabeledInstance] | None = None,
) -> tuple[ClassifierParams, list[EpochLog]]:
    """Mini-batch Adam training; returns final params and per-epoch log."""
    config.validate()
    if not dataset:
        raise ValidationError("dataset must be non-empty")
    _stack_batch(dataset[:1], config)  # surface context/shape errors early
    params = init_params(config)
    state = init_adam(params)
    shuffle_rng = np.random.default_rng(config.seed + 1)
    log: list[EpochLog] = []
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(len(dataset))
        losses = []
        for start in range(0, len(dataset), config.batch_size):
            batch = [dataset[i] for i in order[start : start + config.batch_size]]
            trace = forward(batch, params, config)
            losses.append(total_loss(batch, trace, config))
            grads = backward(batch, trace, params, config)
            adam_step(params, grads, state, config)
        val_acc = None
        if val_set:
            val_acc = accuracy(params, config, val_set)
        log.append(EpochLog(epoch + 1, float(np.mean(losses)), val_acc))
    return params, log


def accuracy(
    params: ClassifierParams, config: ModelConfig, instances: list[LabeledInstance]
) -> dict[str, float]:
    """Fraction of correct argmax predictions per task."""
    if not instances:
        raise ValidationError("instance list must be non-empty")
    trace = forward(instances, params, config)
    out = {}
    for t, task in enumerate(TASKS):
        pred = trace.logits[task].argmax(axis=1)
        truth = np.array([inst.labels[t] for inst in instances])
        out[task] = float((pred == truth).mean())
    return out


# -- checkpoint persistence -----------------------------------------------------


def _write_tensor(fh, name: str, tensor: np.ndarray) -> None:
    name_b = name.encode("utf-8")
    fh.write(struct.pack("<H", len(name_b)))
    fh.write(name_b)
    arr = np.ascontiguousarray(tensor, dtype="<f8")
    fh.write(struct.pack("<B", arr.ndim))
    for d in arr.shape:
        fh.write(struct.pack("<Q", d))
    fh.write(arr.tobytes())


def save_checkpoint(
    path: str | Path,
    params: ClassifierParams,
    config: ModelConfig,
    adam_state: AdamState | None = None,
    label_vocab: dict | None = None,
) -> None:
    """Versioned binary checkpoint: config, label vocab, named f64 tensors."""
    tensors: list[tuple[str, np.ndarray]] = [
        (f"param.{name}", arr) for name, arr in params.items()
    ]
    if adam_state is not None:
        tensors.extend((f"adam.m.{n}", a) for n, a in adam_state.m.items())
        tensors.extend((f"adam.v.{n}", a) for n, a in adam_state.v.items())
    meta = {
        "config": config.to_dict(),
        "adam_t": adam_state.t if adam_state is not None else None,
        "label_vocab": label_vocab,
    }
    meta_b = json.dumps(meta, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<H", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(meta_b)))
        fh.write(meta_b)
        fh.write(struct.pack("<I", len(tensors)))
        for name, tensor in tensors:
            _write_tensor(fh, name, tensor)


@dataclass
class CheckpointBundle:
    config: ModelConfig
    params: ClassifierParams
    adam_state: AdamState | None
    label_vocab: dict | None


def load_checkpoint(
    path: str | Path, expect_config: ModelConfig | None = None
) -> CheckpointBundle:
    """Read a checkpoint; optionally verify it matches an expected config."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 10 or data[:4] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: not a checkpoint file")
    (version,) = struct.unpack_from("<H", data, 4)
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    offset = 6
    (meta_len,) = struct.unpack_from("<I", data, offset)
    offset += 4
    try:
        meta = json.loads(data[offset : offset + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: bad checkpoint metadata: {exc}") from None
    offset += meta_len
    config = ModelConfig.from_dict(meta["config"])
    if expect_config is not None and config.to_dict() != expect_config.to_dict():
        raise ValidationError("checkpoint config does not match expected config")
    (tensor_count,) = struct.unpack_from("<I", data, offset)
    offset += 4
    tensors: dict[str, np.ndarray] = {}
    for _ in range(tensor_count):
        if offset + 2 > len(data):
            raise FormatError(f"{path}: truncated checkpoint")
        (name_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        name = data[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (ndim,) = struct.unpack_from("<B", data, offset)
        offset += 1
        shape = struct.unpack_from(f"<{ndim}Q", data, offset)
        offset += 8 * ndim
        count = int(np.prod(shape)) if ndim else 1
        end = offset + 8 * count
        if end > len(data):
            raise FormatError(f"{path}: truncated tensor {name!r}")
        tensors[name] = (
            np.frombuffer(data, dtype="<f8", count=count, offset=offset)
            .reshape(shape)
            .copy()
        )
        offset = end
    if offset != len(data):
        raise FormatError(f"{path}: trailing bytes in checkpoint")

    template = init_params(config)
    for name, tensor in template.items():
        stored = tensors.get(f"param.{name}")
        if stored is None:
            raise FormatError(f"{path}: missing tensor param.{name}")
        if stored.shape != tensor.shape:
            raise FormatError(
                f"{path}: tensor param.{name} has shape {stored.shape}, "
                f"expected {tensor.shape}"
            )
        tensor[...] = stored
    adam_state = None
    if meta.get("adam_t") is not None:
        adam_state = AdamState(t=int(meta["adam_t"]))
        for name, tensor in template.items():
            m = tensors.get(f"adam.m.{name}")
            v = tensors.get(f"adam.v.{name}")
            if m is None or v is None or m.shape != tensor.shape or v.shape != tensor.shape:
                raise FormatError(f"{path}: incomplete Adam state for {name}")
            adam_state.m[name] = m
            adam_state.v[name] = v
    return CheckpointBundle(config, template, adam_state, meta.get("label_vocab"))

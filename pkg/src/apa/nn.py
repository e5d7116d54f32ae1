"""Dense layers, an APA-gated channel-attention block and an SGD trainer.

The model is a plain sequence of layers.  ``Model.forward`` records the graph;
``Model.backward`` takes dL/dlogits and returns the gradient of every
parameter, including the (kappa, lam) pair of each adaptive activation site.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

import numpy as np

from . import autograd as ag
from .activations import ActivationKind, ActivationParams, Kind
from .autograd import NumericError, StateError, Tensor
from .datagen import SampledDataset, rng_for

REPORT_VERSION = 1

# Extra stream ids below the data streams in datagen.
INIT_STREAM, SHUFFLE_STREAM = 10, 11


class DivergenceError(RuntimeError):
    pass


def glorot(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, (fan_out, fan_in))


class ActivationSite:
    """An activation whose (kappa, lam) live as trainable 1x1 tensors when parametric."""

    def __init__(self, kind: ActivationKind, name: str):
        self.kind = kind
        self.name = name
        self.kappa = self.lam = None
        if kind.parametric:
            self.kappa = ag.parameter(kind.params.kappa, f"{name}.kappa")
            self.lam = ag.parameter(kind.params.lam, f"{name}.lambda")

    def __call__(self, x: Tensor) -> Tensor:
        if self.kind.parametric:
            return ag.adaptive(x, self.kappa, self.lam, linear_unit=self.kind.tag is Kind.AGLU)
        return ag.fixed(x, self.kind)

    def parameters(self) -> dict[str, Tensor]:
        if not self.kind.parametric:
            return {}
        out = {}
        if self.kind.params.learn_kappa:
            out[self.kappa.name] = self.kappa
        if self.kind.params.learn_lam:
            out[self.lam.name] = self.lam
        return out

    def current(self) -> ActivationParams | None:
        if not self.kind.parametric:
            return None
        p = self.kind.params
        return ActivationParams(self.kappa.item(), self.lam.item(), p.learn_kappa, p.learn_lam)


class DenseLayer:
    """``act(x W^T + b^T)`` with W of shape (out, in) and b of shape (out, 1)."""

    def __init__(self, W, b, activation: ActivationKind, name: str = "dense"):
        self.name = name
        self.W = ag.parameter(np.asarray(W, dtype=np.float64), f"{name}.W")
        self.b = ag.parameter(np.asarray(b, dtype=np.float64).reshape(-1, 1), f"{name}.b")
        if self.b.shape[0] != self.W.shape[0]:
            raise ValueError("bias length must match the output width")
        self.act = ActivationSite(activation, f"{name}.act")

    @property
    def in_features(self) -> int:
        return self.W.shape[1]

    def __call__(self, x: Tensor, ctx: "ForwardContext") -> Tensor:
        if x.shape[1] != self.in_features:
            raise ValueError(f"{self.name}: expected width {self.in_features}, got {x.shape[1]}")
        pre = ag.add(ag.matmul(x, ag.transpose(self.W)), ag.transpose(self.b))
        return self.act(pre)

    def parameters(self) -> dict[str, Tensor]:
        return {self.W.name: self.W, self.b.name: self.b, **self.act.parameters()}

    def sites(self) -> list[ActivationSite]:
        return [self.act] if self.act.kind.parametric else []


class ChannelAttentionBlock:
    """``X' = gate(MLP(pool(X))) * X`` with a two-layer bottleneck MLP.

    Inputs are (n, C) so the global average pool is the identity.  Optional
    extras: LayerNorm on the pooled descriptor before the MLP, and dropout on
    the gate vector after the gate nonlinearity.
    """

    def __init__(self, channels: int, reduction: int, gate: ActivationKind, rng: np.random.Generator,
                 dropout: float = 0.0, layernorm: bool = False, name: str = "attn"):
        if channels % reduction:
            raise ValueError(f"{channels} channels not divisible by reduction {reduction}")
        if gate.tag not in (Kind.SIGMOID, Kind.APA):
            raise ValueError("gate must be SIGMOID or APA")
        if not 0.0 <= dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        hidden = channels // reduction
        self.name = name
        self.channels = channels
        self.dropout = dropout
        self.squeeze = DenseLayer(glorot(rng, hidden, channels), np.zeros(hidden),
                                  ActivationKind(Kind.RELU), f"{name}.squeeze")
        self.excite = DenseLayer(glorot(rng, channels, hidden), np.zeros(channels),
                                 ActivationKind(Kind.IDENTITY), f"{name}.excite")
        self.gate = ActivationSite(gate, f"{name}.gate")
        self.ln_gain = self.ln_bias = None
        if layernorm:
            self.ln_gain = ag.parameter(np.ones((1, channels)), f"{name}.ln.gain")
            self.ln_bias = ag.parameter(np.zeros((1, channels)), f"{name}.ln.bias")

    @property
    def in_features(self) -> int:
        return self.channels

    def attend(self, x: Tensor, ctx: "ForwardContext") -> tuple[Tensor, Tensor]:
        if x.shape[1] != self.channels:
            raise ValueError(f"{self.name}: expected {self.channels} channels, got {x.shape[1]}")
        pooled = x
        if self.ln_gain is not None:
            pooled = ag.layer_norm(pooled, self.ln_gain, self.ln_bias)
        gates = self.gate(self.excite(self.squeeze(pooled, ctx), ctx))
        g = gates
        if ctx.train and self.dropout > 0.0:
            keep = ctx.rng.random(gates.shape) >= self.dropout
            g = ag.scale_by_mask(gates, keep / (1.0 - self.dropout))
        return ag.mul(g, x), gates

    def __call__(self, x: Tensor, ctx: "ForwardContext") -> Tensor:
        out, gates = self.attend(x, ctx)
        ctx.gates.append(gates.data)
        return out

    def parameters(self) -> dict[str, Tensor]:
        params = {**self.squeeze.parameters(), **self.excite.parameters(), **self.gate.parameters()}
        if self.ln_gain is not None:
            params[self.ln_gain.name] = self.ln_gain
            params[self.ln_bias.name] = self.ln_bias
        return params

    def sites(self) -> list[ActivationSite]:
        return self.squeeze.sites() + self.excite.sites() + ([self.gate] if self.gate.kind.parametric else [])


def channel_attention_forward(block: ChannelAttentionBlock, X) -> tuple[np.ndarray, np.ndarray]:
    """Inference-mode attention: returns (X', gates)."""
    out, gates = block.attend(Tensor(X), ForwardContext(train=False))
    return out.data, gates.data


@dataclass
class ForwardContext:
    train: bool = False
    rng: np.random.Generator | None = None
    gates: list[np.ndarray] = field(default_factory=list)


class Model:
    def __init__(self, layers: list):
        if not layers:
            raise ValueError("model needs at least one layer")
        self.layers = layers
        self._logits: Tensor | None = None
        self.features: np.ndarray | None = None
        self.gates: list[np.ndarray] = []

    def parameters(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for layer in self.layers:
            out.update(layer.parameters())
        return out

    def sites(self) -> list[ActivationSite]:
        return [s for layer in self.layers for s in layer.sites()]

    def num_parameters(self) -> int:
        return sum(p.data.size for p in self.parameters().values())

    def forward(self, batch, train: bool = False, rng: np.random.Generator | None = None) -> Tensor:
        """Logits for ``batch``; records the graph for ``backward``.

        ``features`` keeps the input of the last layer (penultimate features)
        and ``gates`` the gate values of each attention block.
        """
        x = batch if isinstance(batch, Tensor) else Tensor(batch)
        if x.shape[1] != self.layers[0].in_features:
            raise ValueError(f"input width {x.shape[1]} != {self.layers[0].in_features}")
        ctx = ForwardContext(train=train, rng=rng)
        for layer in self.layers[:-1]:
            x = layer(x, ctx)
        self.features = x.data
        logits = self.layers[-1](x, ctx)
        self.gates = ctx.gates
        self._logits = logits
        return logits

    def backward(self, loss_grad) -> dict[str, np.ndarray]:
        """Gradients of every parameter given dL/dlogits; consumes the recorded graph."""
        if self._logits is None:
            raise StateError("backward called without a recorded forward pass")
        params = self.parameters()
        for p in params.values():
            p.zero_grad()
        self._logits.backward(loss_grad)
        self._logits = None
        return {k: (np.zeros_like(p.data) if p.grad is None else p.grad) for k, p in params.items()}

    def predict(self, x) -> np.ndarray:
        logits = self.forward(x).data
        self._logits = None
        return logits

    def state_dict(self) -> dict[str, list]:
        return {k: p.data.tolist() for k, p in self.parameters().items()}

    def load_state_dict(self, state: dict[str, list]) -> None:
        params = self.parameters()
        for k, v in state.items():
            arr = np.asarray(v, dtype=np.float64)
            if arr.shape != params[k].data.shape:
                raise ValueError(f"shape mismatch for {k}")
            params[k].data = arr


# --------------------------------------------------------------------------
# Configuration and construction

@dataclass
class ModelConfig:
    in_dim: int
    num_classes: int
    hidden: int = 32
    blocks: int = 1
    hidden_act: str = "aglu"
    gate: str = "sigmoid"
    reduction: int = 4
    gate_dropout: float = 0.0
    layernorm: bool = False

    def __post_init__(self):
        for name in ("in_dim", "num_classes", "hidden", "blocks", "reduction"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        Kind(self.hidden_act)
        if Kind(self.gate) not in (Kind.SIGMOID, Kind.APA):
            raise ValueError(f"gate must be 'sigmoid' or 'apa', got {self.gate!r}")
        if self.hidden % self.reduction:
            raise ValueError("hidden must be divisible by reduction")
        if not 0.0 <= self.gate_dropout < 1.0:
            raise ValueError("gate_dropout must lie in [0, 1)")


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 128
    lr: float = 0.05
    momentum: float = 0.9
    seed: int = 0
    loss: str = "softmax-ce"
    lam_min: float = 1e-4
    lam_max: float = 1e4
    aglu_kappa_init: tuple[float, float] = (0.8, 1.2)
    aglu_lam_init: tuple[float, float] = (1e-4, 1.0)
    gate_kappa_init: tuple[float, float] = (-1.0, 0.0)
    gate_lam_init: tuple[float, float] = (1e-4, 1.0)

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("learning rate must be > 0")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs >= 0 and batch_size >= 1 required")
        if not 0 < self.lam_min < self.lam_max:
            raise ValueError("need 0 < lam_min < lam_max")
        if self.loss not in LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}")
        for name in ("aglu_kappa_init", "aglu_lam_init", "gate_kappa_init", "gate_lam_init"):
            setattr(self, name, tuple(float(v) for v in getattr(self, name)))


def _site_kind(tag: str, rng, kappa_range, lam_range) -> ActivationKind:
    kind = Kind(tag)
    if kind in (Kind.APA, Kind.AGLU):
        return ActivationKind(kind, ActivationParams(rng.uniform(*kappa_range), rng.uniform(*lam_range)))
    return ActivationKind(kind)


def build_model(cfg: ModelConfig, train: TrainConfig) -> Model:
    """Dense+act -> attention, repeated ``blocks`` times, then a linear head."""
    rng = rng_for(train.seed, INIT_STREAM)
    layers: list = []
    width = cfg.in_dim
    for i in range(cfg.blocks):
        act = _site_kind(cfg.hidden_act, rng, train.aglu_kappa_init, train.aglu_lam_init)
        layers.append(DenseLayer(glorot(rng, cfg.hidden, width), np.zeros(cfg.hidden), act, f"block{i}.dense"))
        gate = _site_kind(cfg.gate, rng, train.gate_kappa_init, train.gate_lam_init)
        layers.append(ChannelAttentionBlock(cfg.hidden, cfg.reduction, gate, rng, cfg.gate_dropout,
                                            cfg.layernorm, f"block{i}.attn"))
        width = cfg.hidden
    layers.append(DenseLayer(glorot(rng, cfg.num_classes, width), np.zeros(cfg.num_classes),
                             ActivationKind(Kind.IDENTITY), "head"))
    return Model(layers)


# --------------------------------------------------------------------------
# Losses: (mean loss, dL/dlogits)

def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    n = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logz
    loss = -float(logp[np.arange(n), labels].mean())
    grad = np.exp(logp)
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


def sigmoid_bce(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """One-vs-all binary cross-entropy summed over classes, averaged over rows."""
    n = logits.shape[0]
    y = np.zeros_like(logits)
    y[np.arange(n), labels] = 1.0
    loss = float((np.logaddexp(0.0, logits) - y * logits).sum() / n)
    p = np.exp(-np.logaddexp(0.0, -logits))
    return loss, (p - y) / n


LOSSES: dict[str, Callable] = {"softmax-ce": softmax_cross_entropy, "sigmoid-bce": sigmoid_bce}


def numerical_gradients(model: Model, x, labels, loss: str = "softmax-ce", h: float = 1e-6) -> dict[str, np.ndarray]:
    """Central-difference gradient of the mean loss for every parameter entry."""
    fn = LOSSES[loss]
    out = {}
    for name, p in model.parameters().items():
        g = np.zeros_like(p.data)
        for idx in np.ndindex(p.data.shape):
            orig = p.data[idx]
            step = h * max(1.0, abs(orig))
            p.data[idx] = orig + step
            up = fn(model.predict(x), labels)[0]
            p.data[idx] = orig - step
            down = fn(model.predict(x), labels)[0]
            p.data[idx] = orig
            g[idx] = (up - down) / (2 * step)
        out[name] = g
    return out


# --------------------------------------------------------------------------
# Training and evaluation

def evaluate_grouped(model: Model, dataset: SampledDataset, groups: list[str] | None = None) -> dict[str, Any]:
    """Top-1 accuracy per frequency group plus overall accuracy.

    Groups without any evaluated sample are reported as ``None``.
    """
    groups = dataset.groups if groups is None else groups
    pred = model.predict(dataset.features).argmax(axis=1)
    correct = pred == dataset.labels
    sample_group = np.asarray(groups, dtype=object)[dataset.labels]
    per_group: dict[str, float | None] = {}
    for g in ("many", "medium", "few"):
        mask = sample_group == g
        per_group[g] = float(correct[mask].mean()) if mask.any() else None
    return {"group_acc": per_group, "avg_acc": float(correct.mean())}


def clamp_lambdas(model: Model, lo: float, hi: float) -> None:
    for site in model.sites():
        site.lam.data = np.clip(site.lam.data, lo, hi)


class SGD:
    """SGD with heavy-ball momentum: v <- m v + g; p <- p - lr v."""

    def __init__(self, params: dict[str, Tensor], lr: float, momentum: float):
        self.params = params
        self.lr = lr
        self.momentum = momentum
        self.velocity = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        for k, p in self.params.items():
            v = self.velocity[k]
            v *= self.momentum
            v += grads[k]
            p.data = p.data - self.lr * v


@dataclass
class RunReport:
    config: dict[str, Any]
    per_epoch: list[float]
    final: dict[str, Any]
    params: dict[str, dict[str, list[float]]]
    seed: int
    weights: dict[str, list] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    version: int = REPORT_VERSION

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        d = json.loads(text)
        if d.get("version") != REPORT_VERSION:
            raise ValueError(f"unsupported report version {d.get('version')}")
        return cls(**d)


MODEL_NOTES = [
    "global average pooling is the identity on (n, C) inputs",
    "layernorm (when enabled) is applied to the pooled descriptor before the reduction MLP",
    "gate dropout (when enabled) is applied after the gate nonlinearity",
    "classifier head is a plain linear layer (no cosine scale)",
]


def _snapshot(model: Model, traj: dict[str, dict[str, list[float]]]) -> None:
    for site in model.sites():
        t = traj.setdefault(site.name, {"kappa": [], "lambda": []})
        t["kappa"].append(site.kappa.item())
        t["lambda"].append(site.lam.item())


def train(model: Model, dataset: SampledDataset, cfg: TrainConfig,
          eval_data: SampledDataset | None = None, config_echo: dict | None = None) -> RunReport:
    """Minibatch SGD with momentum; lambdas are clamped after every step.

    The (kappa, lam) of every adaptive site is recorded at initialisation and
    after each epoch.  Final accuracy is measured on ``eval_data`` (defaults to
    the training set).
    """
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    loss_fn = LOSSES[cfg.loss]
    params = model.parameters()
    opt = SGD(params, cfg.lr, cfg.momentum)
    rng = rng_for(cfg.seed, SHUFFLE_STREAM)
    traj: dict[str, dict[str, list[float]]] = {}
    _snapshot(model, traj)
    clamp_lambdas(model, cfg.lam_min, cfg.lam_max)
    per_epoch = []
    n = len(dataset)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n) if cfg.batch_size < n else np.arange(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            try:
                logits = model.forward(dataset.features[idx], train=True, rng=rng)
                loss, dlogits = loss_fn(logits.data, dataset.labels[idx])
                if not math.isfinite(loss):
                    raise NumericError("loss is not finite")
                grads = model.backward(dlogits)
            except NumericError as exc:
                raise DivergenceError(f"diverged at epoch {epoch}, batch starting {start}: {exc}") from exc
            opt.step(grads)
            clamp_lambdas(model, cfg.lam_min, cfg.lam_max)
            total += loss * idx.size
        per_epoch.append(total / n)
        _snapshot(model, traj)
    final = evaluate_grouped(model, eval_data if eval_data is not None else dataset)
    final["train_acc"] = evaluate_grouped(model, dataset)["avg_acc"]
    return RunReport(
        config=config_echo if config_echo is not None else {"train": asdict(cfg)},
        per_epoch=per_epoch,
        final=final,
        params=traj,
        seed=cfg.seed,
        weights=model.state_dict(),
        notes=list(MODEL_NOTES),
    )

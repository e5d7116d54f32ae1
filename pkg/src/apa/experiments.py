"""Toy long-tail runs and the paired-seed APA-vs-Sigmoid gate comparison."""

from __future__ import annotations

import json
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Any

from .datagen import LongTailSpec, SampledDataset, make_longtail
from .nn import Model, ModelConfig, RunReport, TrainConfig, build_model, train
from .stats import covariances, nc1


def _plain(obj: Any) -> Any:
    # tuples -> lists so that a parsed report compares equal to the emitted one
    return json.loads(json.dumps(obj))


@dataclass
class ToyConfig:
    data: LongTailSpec = field(default_factory=LongTailSpec)
    hidden: int = 32
    blocks: int = 1
    hidden_act: str = "relu"
    gate: str = "apa"
    reduction: int = 4
    gate_dropout: float = 0.0
    layernorm: bool = False
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        self.model_config()

    def model_config(self) -> ModelConfig:
        return ModelConfig(self.data.dim, self.data.num_classes, self.hidden, self.blocks, self.hidden_act,
                           self.gate, self.reduction, self.gate_dropout, self.layernorm)

    def to_dict(self) -> dict[str, Any]:
        return _plain(asdict(self))

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ToyConfig":
        d = dict(d)
        data = LongTailSpec(**d.pop("data", {}))
        tr = TrainConfig(**d.pop("train", {}))
        return cls(data=data, train=tr, **d)

    def with_seed(self, seed: int) -> "ToyConfig":
        return replace(self, data=replace(self.data, seed=seed), train=replace(self.train, seed=seed))


def build(cfg: ToyConfig) -> tuple[Model, SampledDataset, SampledDataset]:
    return build_model(cfg.model_config(), cfg.train), make_longtail(cfg.data, "train"), make_longtail(cfg.data, "test")


def features_nc1(model: Model, data: SampledDataset) -> float:
    model.predict(data.features)
    return nc1(covariances(model.features, data.labels, data.num_classes))


def run_toy(cfg: ToyConfig) -> tuple[RunReport, Model]:
    """Generate data, train, evaluate on the balanced test split and add NC1 of the penultimate features."""
    model, train_ds, test_ds = build(cfg)
    report = train(model, train_ds, cfg.train, eval_data=test_ds, config_echo=cfg.to_dict())
    report.final["nc1"] = features_nc1(model, test_ds)
    report.final["class_counts"] = train_ds.class_counts
    report.final["groups"] = train_ds.groups
    return report, model


def rebuild(report: RunReport) -> tuple[ToyConfig, Model]:
    """Reconstruct a trained model from the weights stored in a report."""
    cfg = ToyConfig.from_dict(report.config)
    model = build_model(cfg.model_config(), cfg.train)
    model.load_state_dict(report.weights)
    return cfg, model


# --------------------------------------------------------------------------
# Paired-seed gate comparison

@dataclass
class PairedRow:
    seed: int
    gate: str
    few_acc: float
    avg_acc: float
    nc1: float


def _one(args) -> PairedRow:
    cfg, seed, gate = args
    report, _ = run_toy(replace(cfg, gate=gate).with_seed(seed))
    return PairedRow(seed, gate, report.final["group_acc"]["few"], report.final["avg_acc"], report.final["nc1"])


def paired_gate_runs(cfg: ToyConfig, seeds, gates=("sigmoid", "apa"), workers: int = 1) -> list[PairedRow]:
    """Train one model per (seed, gate); results come back in (seed, gate) order."""
    jobs = [(cfg, s, g) for s in seeds for g in gates]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_one, jobs))
    return [_one(j) for j in jobs]


@dataclass
class PairedSummary:
    metric: str
    apa_mean: float
    sigmoid_mean: float
    mean_diff: float
    effect_size: float
    per_seed: list[tuple[int, float, float]]


def summarize(rows: list[PairedRow], metric: str) -> PairedSummary:
    """Paired difference apa - sigmoid of ``metric``; effect size is mean/std of the differences."""
    by_seed: dict[int, dict[str, float]] = {}
    for r in rows:
        by_seed.setdefault(r.seed, {})[r.gate] = getattr(r, metric)
    per_seed = [(s, v["apa"], v["sigmoid"]) for s, v in sorted(by_seed.items())]
    diffs = [a - b for _, a, b in per_seed]
    mean = statistics.fmean(diffs)
    sd = statistics.stdev(diffs) if len(diffs) > 1 else 0.0
    return PairedSummary(
        metric,
        statistics.fmean(a for _, a, _ in per_seed),
        statistics.fmean(b for _, _, b in per_seed),
        mean,
        mean / sd if sd > 0 else math.copysign(math.inf, mean) if mean else 0.0,
        per_seed,
    )


def default_toy(imbalance: float, **overrides) -> ToyConfig:
    """The K=20, d=16, n_max=500 long-tail setup used for the gate comparison."""
    data = LongTailSpec(num_classes=20, dim=16, n_max=500, imbalance=imbalance)
    return ToyConfig(data=data, **overrides)

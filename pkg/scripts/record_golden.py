"""Re-record the golden files used by tests/test_nn.py (run only on intentional changes)."""

import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from conftest import GOLDEN, small_model  # noqa: E402

from apa.datagen import LongTailSpec  # noqa: E402
from apa.experiments import ToyConfig, run_toy  # noqa: E402
from apa.nn import TrainConfig  # noqa: E402

GOLDEN_TOY = ToyConfig(
    data=LongTailSpec(num_classes=6, dim=4, n_max=60, imbalance=10.0, n_test=20, seed=7),
    hidden=8, reduction=2, gate="apa",
    train=TrainConfig(epochs=20, batch_size=32, seed=7),
)


def main():
    GOLDEN.mkdir(exist_ok=True)
    model = small_model(seed=0, hidden_act="aglu", gate="apa", layernorm=True)
    x = np.random.default_rng(42).standard_normal((4, 3))
    (GOLDEN / "two_layer_logits.json").write_text(
        json.dumps({"input": x.tolist(), "logits": model.predict(x).tolist()}, indent=2) + "\n")
    report, _ = run_toy(GOLDEN_TOY)
    (GOLDEN / "toy_run_final.json").write_text(
        json.dumps({"config": GOLDEN_TOY.to_dict(), "final": report.final}, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()

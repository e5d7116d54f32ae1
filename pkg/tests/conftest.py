import json
from pathlib import Path

import numpy as np
import pytest

from apa.nn import ModelConfig, TrainConfig, build_model

GOLDEN = Path(__file__).parent / "golden"


def small_model(seed=0, hidden_act="aglu", gate="apa", layernorm=False, dropout=0.0, in_dim=3, classes=3):
    """At most ~70 parameters: dense(3->4) + attention(4, r=2) + head(4->3)."""
    cfg = ModelConfig(in_dim, classes, hidden=4, reduction=2, hidden_act=hidden_act, gate=gate,
                      layernorm=layernorm, gate_dropout=dropout)
    return build_model(cfg, TrainConfig(seed=seed))


def rel_errors(analytic, numeric, floor=1e-6):
    return np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)


def brute_covariances(f, y):
    """Double-loop transcription of the within/between-class definitions."""
    n, d = f.shape
    classes = sorted(set(y.tolist()))
    k = len(classes)
    means = {c: sum(f[j] for j in range(n) if y[j] == c) / sum(1 for j in range(n) if y[j] == c) for c in classes}
    glob = sum(f[j] for j in range(n)) / n
    sw = np.zeros((d, d))
    for c in classes:
        for j in range(n):
            if y[j] == c:
                v = f[j] - means[c]
                for a in range(d):
                    for b in range(d):
                        sw[a, b] += v[a] * v[b]
    sw /= n
    sb = np.zeros((d, d))
    for c in classes:
        v = means[c] - glob
        for a in range(d):
            for b in range(d):
                sb[a, b] += v[a] * v[b]
    return sw, sb / k


def load_golden(name):
    return json.loads((GOLDEN / name).read_text())


@pytest.fixture
def batch():
    rng = np.random.default_rng(123)
    return rng.standard_normal((6, 3)), rng.integers(0, 3, 6)


# One line per acceptance criterion, shown in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)

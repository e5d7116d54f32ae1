"""Finite-difference oracle for the closed-form APA/AGLU derivatives.

The oracle differentiates the double-exponent formula in mpmath at 60 digits,
so it shares no code with the softplus path it checks.  A double-precision
central difference cannot reach 1e-5 relative error when lam is near 1e-3
(the function varies on the scale of lam itself), hence the extended precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from . import activations as act
from .activations import ActivationParams

DPS = 60
STEP = mpmath.mpf("1e-20")
# Below this magnitude both sides are compared absolutely (double underflow).
REL_FLOOR = 1e-250


def _mp_apa(z, kappa, lam):
    return (lam * mpmath.exp(-kappa * z) + 1) ** (-1 / lam)


def _mp_aglu(z, kappa, lam):
    return z * _mp_apa(z, kappa, lam)


# name -> (analytic function, mp forward, index of the differentiated argument)
DERIVATIVES = {
    "apa_grad_input": (act.apa_grad_input, _mp_apa, 0),
    "apa_grad_kappa": (act.apa_grad_kappa, _mp_apa, 1),
    "apa_grad_lambda": (act.apa_grad_lambda, _mp_apa, 2),
    "aglu_grad_input": (act.aglu_grad_input, _mp_aglu, 0),
    "aglu_grad_kappa": (act.aglu_grad_kappa, _mp_aglu, 1),
    "aglu_grad_lambda": (act.aglu_grad_lambda, _mp_aglu, 2),
}


def central_difference(f, args: tuple[float, float, float], index: int) -> float:
    """Central difference of ``f`` in argument ``index`` at 60-digit precision."""
    with mpmath.workdps(DPS):
        x = [mpmath.mpf(a) for a in args]
        h = STEP * max(1, abs(x[index]))
        hi, lo = list(x), list(x)
        hi[index] += h
        lo[index] -= h
        return float((f(*hi) - f(*lo)) / (2 * h))


def relative_error(analytic: float, reference: float) -> float:
    return abs(analytic - reference) / max(abs(reference), REL_FLOOR)


def probe_set(n: int, seed: int) -> np.ndarray:
    """``n`` probes (z, kappa, lam): z in [-10, 10], kappa in [-3, 3], lam log-uniform in [1e-3, 1e3]."""
    rng = np.random.default_rng(seed)
    z = rng.uniform(-10.0, 10.0, n)
    kappa = rng.uniform(-3.0, 3.0, n)
    lam = 10.0 ** rng.uniform(-3.0, 3.0, n)
    return np.column_stack([z, kappa, lam])


@dataclass
class DerivativeResult:
    name: str
    max_rel_error: float
    worst_probe: tuple[float, float, float]
    finite: bool = True


@dataclass
class GradCheckReport:
    probes: int
    seed: int
    results: list[DerivativeResult] = field(default_factory=list)

    @property
    def max_rel_error(self) -> float:
        return max((r.max_rel_error for r in self.results), default=0.0)

    @property
    def all_finite(self) -> bool:
        return all(r.finite for r in self.results)


def check_derivative(name: str, probes: np.ndarray) -> DerivativeResult:
    analytic, forward, index = DERIVATIVES[name]
    worst, worst_probe, finite = -1.0, (math.nan,) * 3, True
    for z, kappa, lam in probes:
        a = analytic(float(z), ActivationParams(kappa, lam))
        if not math.isfinite(a):
            finite = False
            continue
        err = relative_error(a, central_difference(forward, (z, kappa, lam), index))
        if err > worst:
            worst, worst_probe = err, (float(z), float(kappa), float(lam))
    return DerivativeResult(name, max(worst, 0.0), worst_probe, finite)


def run_grad_check(probes: int = 1000, seed: int = 0) -> GradCheckReport:
    pts = probe_set(probes, seed)
    report = GradCheckReport(probes, seed)
    for name in DERIVATIVES:
        report.results.append(check_derivative(name, pts))
    return report

"""Adaptive Parametric Activation (APA), AGLU and the reference activation set.

    APA(z; kappa, lam)  = (lam * exp(-kappa z) + 1) ** (-1 / lam)
    AGLU(z; kappa, lam) = z * APA(z; kappa, lam)

Everything is evaluated in log space through softplus,

    APA = exp(-softplus(ln lam - kappa z) / lam),

so no intermediate overflows for any finite ``kappa * z``.  The functions accept
python floats or numpy arrays and broadcast elementwise.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np

GELU_KAPPA = 1.702


class DomainError(ValueError):
    """Raised for non-finite inputs or an invalid activation parameter."""


@dataclass
class ActivationParams:
    """The learnable (kappa, lam) pair of one activation site.

    ``lam`` stands for the asymmetry parameter lambda (a python keyword).
    """

    kappa: float = 1.0
    lam: float = 1.0
    learn_kappa: bool = True
    learn_lam: bool = True

    def __post_init__(self) -> None:
        self.kappa = float(self.kappa)
        self.lam = float(self.lam)
        if not math.isfinite(self.kappa):
            raise DomainError(f"kappa must be finite, got {self.kappa}")
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise DomainError(f"lam must be finite and > 0, got {self.lam}")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ActivationParams":
        return cls(**d)


class Kind(str, enum.Enum):
    APA = "apa"
    AGLU = "aglu"
    RELU = "relu"
    SIGMOID = "sigmoid"
    GUMBEL = "gumbel"
    SILU = "silu"
    GELU = "gelu"
    PRELU = "prelu"
    ELU = "elu"
    MISH = "mish"
    IDENTITY = "identity"


_NEEDS_PARAMS = {Kind.APA, Kind.AGLU}
_SINGLE_KAPPA = {Kind.PRELU: 0.25, Kind.ELU: 1.0}


@dataclass
class ActivationKind:
    """An activation tag plus its parameters.

    APA/AGLU need ``params``; PRELU/ELU use only ``params.kappa`` (a default is
    filled in); the fixed activations refuse parameters.
    """

    tag: Kind
    params: ActivationParams | None = None

    def __post_init__(self) -> None:
        self.tag = Kind(self.tag)
        if self.tag in _NEEDS_PARAMS and self.params is None:
            raise DomainError(f"{self.tag.value} requires ActivationParams")
        if self.tag in _SINGLE_KAPPA and self.params is None:
            self.params = ActivationParams(kappa=_SINGLE_KAPPA[self.tag], learn_lam=False)
        if self.tag not in _NEEDS_PARAMS and self.tag not in _SINGLE_KAPPA and self.params is not None:
            raise DomainError(f"{self.tag.value} takes no parameters")

    @property
    def parametric(self) -> bool:
        return self.tag in _NEEDS_PARAMS

    def to_dict(self) -> dict[str, Any]:
        return {"tag": self.tag.value, "params": None if self.params is None else self.params.to_dict()}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ActivationKind":
        params = d.get("params")
        return cls(Kind(d["tag"]), None if params is None else ActivationParams.from_dict(params))


def _check(z, kappa: float, lam: float) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise DomainError("non-finite input")
    if not math.isfinite(kappa):
        raise DomainError(f"kappa must be finite, got {kappa}")
    if not (math.isfinite(lam) and lam > 0):
        raise DomainError(f"lam must be finite and > 0, got {lam}")
    return z


def _out(x: np.ndarray):
    return float(x) if x.ndim == 0 else x


def softplus(x, beta: float = 1.0):
    """``(1/beta) * ln(1 + exp(beta * x))`` without overflow, any nonzero beta."""
    x = np.asarray(x, dtype=np.float64)
    return np.logaddexp(0.0, beta * x) / beta


def _log1p_exp(t: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, t)


def _apa(z: np.ndarray, kappa: float, lam: float) -> np.ndarray:
    # exp((1/lam) * softplus(kappa z - ln lam, beta=-1))
    return np.exp(-_log1p_exp(math.log(lam) - kappa * z) / lam)


def _inv_lam_plus_exp(z: np.ndarray, kappa: float, lam: float) -> np.ndarray:
    """``1 / (lam + exp(kappa z))`` computed in log space."""
    return np.exp(-np.logaddexp(math.log(lam), kappa * z))


_SERIES_CUTOFF = 0.1
_SERIES_TERMS = 24


def _lam_bracket(t: np.ndarray) -> np.ndarray:
    """``ln(1+u) - u/(1+u)`` with ``u = exp(t)``.

    The two terms cancel to O(u^2) for small u, so below the cutoff the
    alternating series sum_{n>=2} (-1)^n (n-1)/n u^n is used instead.
    """
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t)
    small = t < math.log(_SERIES_CUTOFF)
    big = ~small
    tb = t[big]
    out[big] = _log1p_exp(tb) - 0.5 * (1.0 + np.tanh(0.5 * tb))
    u = np.exp(t[small])
    acc = np.zeros_like(u)
    for n in range(_SERIES_TERMS, 1, -1):
        acc = acc * u + (-1) ** n * (n - 1) / n
    out[small] = acc * u * u
    return out


def apa_forward(z, p: ActivationParams):
    """APA value, in [0, 1] (open interval up to floating-point underflow)."""
    z = _check(z, p.kappa, p.lam)
    return _out(_apa(z, p.kappa, p.lam))


def apa_naive(z, p: ActivationParams):
    """Double-exponent form ``(lam e^{-kappa z} + 1)^(-1/lam)``; test oracle only."""
    z = np.asarray(z, dtype=np.float64)
    with np.errstate(over="ignore"):
        return _out(np.power(p.lam * np.exp(-p.kappa * z) + 1.0, -1.0 / p.lam))


def aglu_forward(z, p: ActivationParams):
    z = _check(z, p.kappa, p.lam)
    return _out(z * _apa(z, p.kappa, p.lam))


def apa_grad_input(z, p: ActivationParams):
    z = _check(z, p.kappa, p.lam)
    return _out(p.kappa * _apa(z, p.kappa, p.lam) * _inv_lam_plus_exp(z, p.kappa, p.lam))


def apa_grad_kappa(z, p: ActivationParams):
    z = _check(z, p.kappa, p.lam)
    return _out(z * _apa(z, p.kappa, p.lam) * _inv_lam_plus_exp(z, p.kappa, p.lam))


def apa_grad_lambda(z, p: ActivationParams):
    """d APA / d lam = APA * (ln(1+u) - u/(1+u)) / lam^2 with u = lam e^{-kappa z}."""
    z = _check(z, p.kappa, p.lam)
    t = math.log(p.lam) - p.kappa * z
    return _out(_apa(z, p.kappa, p.lam) * _lam_bracket(t) / (p.lam * p.lam))


def aglu_grad_input(z, p: ActivationParams):
    z = _check(z, p.kappa, p.lam)
    eta = _apa(z, p.kappa, p.lam)
    return _out(p.kappa * z * eta * _inv_lam_plus_exp(z, p.kappa, p.lam) + eta)


def aglu_grad_kappa(z, p: ActivationParams):
    z = _check(z, p.kappa, p.lam)
    return _out(z * z * _apa(z, p.kappa, p.lam) * _inv_lam_plus_exp(z, p.kappa, p.lam))


def aglu_grad_lambda(z, p: ActivationParams):
    """Exact d AGLU / d lam.

    Differentiating the exponent -1/lam contributes ``ln(1+u)/lam^2``, so the
    sign of the result follows sign(z) rather than -sign(z).
    """
    z = _check(z, p.kappa, p.lam)
    t = math.log(p.lam) - p.kappa * z
    return _out(z * _apa(z, p.kappa, p.lam) * _lam_bracket(t) / (p.lam * p.lam))


def sigmoid(z):
    # Same arithmetic as APA at kappa = lam = 1, so the two agree bit for bit.
    z = np.asarray(z, dtype=np.float64)
    return _out(np.exp(-_log1p_exp(math.log(1.0) - 1.0 * z) / 1.0))


def gumbel(z):
    z = np.asarray(z, dtype=np.float64)
    with np.errstate(over="ignore"):
        return _out(np.exp(-np.exp(-z)))


def reference_forward(kind: ActivationKind, z):
    """Evaluate one of the non-adaptive activations."""
    if kind.tag in _NEEDS_PARAMS:
        raise DomainError("reference_forward does not evaluate APA/AGLU")
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise DomainError("non-finite input")
    tag = kind.tag
    if tag is Kind.RELU:
        out = np.maximum(0.0, z)
    elif tag is Kind.SIGMOID:
        out = np.asarray(sigmoid(z))
    elif tag is Kind.GUMBEL:
        out = np.asarray(gumbel(z))
    elif tag is Kind.SILU:
        out = z * sigmoid(z)
    elif tag is Kind.GELU:
        out = z * sigmoid(GELU_KAPPA * z)
    elif tag is Kind.MISH:
        out = z * np.tanh(_log1p_exp(z))
    elif tag is Kind.PRELU:
        out = np.maximum(0.0, z) + kind.params.kappa * np.minimum(0.0, z)
    elif tag is Kind.ELU:
        out = np.maximum(0.0, z) + kind.params.kappa * np.expm1(np.minimum(0.0, z))
    elif tag is Kind.IDENTITY:
        out = z.copy()
    else:  # pragma: no cover
        raise DomainError(f"unknown activation {tag}")
    return _out(np.asarray(out, dtype=np.float64))


def activate(kind: ActivationKind, z):
    """Forward pass for any activation kind."""
    if kind.tag is Kind.APA:
        return apa_forward(z, kind.params)
    if kind.tag is Kind.AGLU:
        return aglu_forward(z, kind.params)
    return reference_forward(kind, z)


# --------------------------------------------------------------------------
# Unification identities

PROBE_GRID = (-5.0, -2.0, -0.5, 0.0, 0.5, 2.0, 5.0)

# Large enough that the ln(lam)/lam residual stays under 1e-5 on the grid.
IDENTITY_LAMBDA = 1e8
GUMBEL_LAMBDA = 1e-6
RELU_KAPPA = 100.0


@dataclass
class IdentityResult:
    name: str
    max_deviation: float
    tolerance: float
    exact: bool

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tolerance


def _identities():
    r = lambda tag: (lambda z: reference_forward(ActivationKind(tag), z))  # noqa: E731
    prelu1 = ActivationKind(Kind.PRELU, ActivationParams(kappa=1.0, learn_lam=False))
    return [
        ("sigmoid", True, lambda z: apa_forward(z, ActivationParams(1.0, 1.0)), r(Kind.SIGMOID)),
        ("gumbel", False, lambda z: apa_forward(z, ActivationParams(1.0, GUMBEL_LAMBDA)), r(Kind.GUMBEL)),
        ("silu", True, lambda z: aglu_forward(z, ActivationParams(1.0, 1.0)), r(Kind.SILU)),
        ("gelu", True, lambda z: aglu_forward(z, ActivationParams(GELU_KAPPA, 1.0)), r(Kind.GELU)),
        ("relu", False, lambda z: aglu_forward(z, ActivationParams(RELU_KAPPA, 1.0)), r(Kind.RELU)),
        ("identity", False, lambda z: aglu_forward(z, ActivationParams(1.0, IDENTITY_LAMBDA)), r(Kind.IDENTITY)),
        ("prelu", False, lambda z: aglu_forward(z, ActivationParams(1.0, IDENTITY_LAMBDA)),
         lambda z: reference_forward(prelu1, z)),
    ]


def limits_check(tolerance: float = 1e-5, grid=PROBE_GRID) -> list[IdentityResult]:
    """Check the special cases APA/AGLU reduce to on ``grid``.

    The kappa = lam = 1 style identities are held to zero deviation; the limit
    identities (evaluated at large/small finite parameters) use ``tolerance``.
    """
    if not tolerance > 0:
        raise DomainError("tolerance must be > 0")
    z = np.asarray(grid, dtype=np.float64)
    results = []
    for name, exact, adaptive, reference in _identities():
        dev = float(np.max(np.abs(np.asarray(adaptive(z)) - np.asarray(reference(z)))))
        results.append(IdentityResult(name, dev, 0.0 if exact else tolerance, exact))
    return results

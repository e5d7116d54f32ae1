import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from apa import activations as act
from apa.activations import ActivationKind, ActivationParams, DomainError, Kind


def P(kappa, lam):
    return ActivationParams(kappa, lam)


def naive_apa(z, kappa, lam):
    return (lam * math.exp(-kappa * z) + 1.0) ** (-1.0 / lam)


def naive_aglu(z, kappa, lam):
    return z * naive_apa(z, kappa, lam)


def fd(f, args, index, h=1e-5):
    hi, lo = list(args), list(args)
    hi[index] += h
    lo[index] -= h
    return (f(*hi) - f(*lo)) / (2 * h)


def rel(a, b):
    return abs(a - b) / abs(b)


class TestForward:
    def test_sigmoid_at_zero(self):
        assert act.apa_forward(0.0, P(1, 1)) == 0.5

    @pytest.mark.parametrize("z", [-2.0, 0.0, 2.0])
    def test_small_lambda_is_gumbel(self, z):
        assert abs(act.apa_forward(z, P(1, 1e-6)) - math.exp(-math.exp(-z))) < 1e-5

    def test_logistic_value(self):
        expected = 1.0 / (1.0 + math.exp(-3.0))
        assert act.apa_forward(3.0, P(1, 1)) == pytest.approx(expected, rel=1e-15)
        assert expected == pytest.approx(0.95257, abs=1e-5)

    def test_aglu_zero(self):
        assert act.aglu_forward(0.0, P(0.3, 7.0)) == 0.0

    def test_aglu_silu(self):
        assert act.aglu_forward(1.0, P(1, 1)) == pytest.approx(1.0 / (1.0 + math.exp(-1.0)), rel=1e-15)

    def test_aglu_large_kappa_is_relu(self):
        assert abs(act.aglu_forward(-2.0, P(50, 1))) < 1e-6
        assert abs(act.aglu_forward(2.0, P(50, 1)) - 2.0) < 1e-6

    def test_vectorised_matches_scalar(self):
        z = np.linspace(-4, 4, 9)
        p = P(0.7, 2.5)
        vec = act.aglu_forward(z, p)
        assert isinstance(vec, np.ndarray)
        np.testing.assert_array_equal(vec, [act.aglu_forward(float(v), p) for v in z])

    @pytest.mark.parametrize("z", [math.nan, math.inf, -math.inf])
    def test_non_finite_input(self, z):
        with pytest.raises(DomainError):
            act.apa_forward(z, P(1, 1))

    def test_invalid_lambda(self):
        with pytest.raises(DomainError):
            ActivationParams(1.0, 0.0)
        with pytest.raises(DomainError):
            ActivationParams(1.0, -1.0)
        with pytest.raises(DomainError):
            ActivationParams(math.inf, 1.0)


class TestDerivatives:
    def test_zero_points(self):
        assert act.aglu_grad_kappa(0.0, P(1, 1)) == 0.0
        assert act.aglu_grad_lambda(0.0, P(1, 1)) == 0.0
        assert act.apa_grad_kappa(0.0, P(1, 1)) == 0.0
        assert act.aglu_grad_input(0.0, P(1, 1)) == 0.5
        assert act.apa_grad_input(0.0, P(1, 1)) == 0.25

    @pytest.mark.parametrize("point", [(1.3, 0.7, 2.0), (-2.5, 1.702, 1.0)])
    def test_aglu_kappa_fd(self, point):
        z, k, lam = point
        assert rel(act.aglu_grad_kappa(z, P(k, lam)), fd(naive_aglu, point, 1)) < 1e-5

    def test_aglu_lambda_fd(self):
        z, k, lam = point = (0.9, -0.5, 0.3)
        assert rel(act.aglu_grad_lambda(z, P(k, lam)), fd(naive_aglu, point, 2)) < 1e-5

    def test_aglu_input_fd(self):
        z, k, lam = point = (2.0, 1.0, 0.01)
        assert rel(act.aglu_grad_input(z, P(k, lam)), fd(naive_aglu, point, 0)) < 1e-5
        assert rel(act.aglu_grad_input(0.0, P(1, 1)), fd(naive_aglu, (0.0, 1.0, 1.0), 0)) < 1e-5

    def test_aglu_input_relu_slope(self):
        assert abs(act.aglu_grad_input(2.0, P(50, 1)) - 1.0) < 1e-4

    def test_apa_lambda_fd(self):
        assert rel(act.apa_grad_lambda(1.0, P(1, 1)), fd(naive_apa, (1.0, 1.0, 1.0), 2)) < 1e-5

    @pytest.mark.parametrize("z", [-1.0, 1.0])
    def test_aglu_lambda_sign_follows_z(self, z):
        # d/dlam of (1+u)^(-1/lam) is >= 0, so the sign is that of z.
        g = act.aglu_grad_lambda(z, P(1, 1))
        assert math.copysign(1.0, g) == math.copysign(1.0, z)
        assert math.copysign(1.0, fd(naive_aglu, (z, 1.0, 1.0), 2)) == math.copysign(1.0, z)

    def test_lambda_gradient_needs_log_term(self):
        # Dropping ln(1+u)/lam^2 from the derivative gives the wrong value.
        z, k, lam = 0.9, -0.5, 0.3
        eta = naive_apa(z, k, lam)
        without_log = -(z / lam) * eta / (lam + math.exp(k * z))
        assert rel(without_log, fd(naive_aglu, (z, k, lam), 2)) > 1.0

    def test_lambda_bracket_series_branch(self):
        # ln(1+u) - u/(1+u) = u^2/2 - 2u^3/3 + ... for small u
        for u in (1e-12, 1e-6, 1e-3, 0.05):
            expected = math.log1p(u) - u / (1 + u) if u > 1e-3 else u * u / 2 - 2 * u ** 3 / 3 + 3 * u ** 4 / 4
            got = float(act._lam_bracket(np.array(math.log(u))))
            assert got == pytest.approx(expected, rel=1e-9)

    def test_large_arguments_stay_finite(self):
        for name in ("apa_grad_input", "apa_grad_kappa", "apa_grad_lambda",
                     "aglu_grad_input", "aglu_grad_kappa", "aglu_grad_lambda"):
            f = getattr(act, name)
            for z in (-500.0, 500.0):
                assert math.isfinite(f(z, P(1.0, 1.0))), name


class TestStability:
    @pytest.mark.parametrize("kz", [-500.0, 500.0, -5000.0, 5000.0])
    def test_finite_at_extremes(self, kz):
        v = act.apa_forward(kz, P(1.0, 1.0))
        assert math.isfinite(v) and 0.0 <= v <= 1.0

    def test_naive_overflows_where_stable_does_not(self):
        p = P(1.0, 0.5)
        with np.errstate(over="raise"):
            with pytest.raises(FloatingPointError):
                np.power(p.lam * np.exp(np.float64(800.0)) + 1.0, -1.0 / p.lam)
        assert math.isfinite(act.apa_forward(-800.0, p))

    def test_stable_matches_naive(self):
        rng = np.random.default_rng(3)
        z = rng.uniform(-30, 30, 20000)
        kappa = rng.uniform(-3, 3, 20000)
        lam = 10 ** rng.uniform(-1, 1, 20000)
        for zi, ki, li in zip(z[:2000], kappa[:2000], lam[:2000]):
            p = P(ki, li)
            assert act.apa_forward(zi, p) == pytest.approx(act.apa_naive(zi, p), rel=1e-10)


class TestProperties:
    @given(st.floats(-50, 50), st.floats(-5, 5), st.floats(1e-3, 1e3))
    def test_aglu_is_z_times_apa(self, z, k, lam):
        p = P(k, lam)
        assert act.aglu_forward(z, p) == z * act.apa_forward(z, p)

    @given(st.floats(-30, 30), st.floats(-3, 3), st.floats(0.1, 10))
    def test_range(self, z, k, lam):
        v = act.apa_forward(z, P(k, lam))
        assert 0.0 < v < 1.0 or (v == 1.0 and k * z > 30)

    @given(st.floats(1e-2, 3), st.floats(1e-2, 1e2))
    @settings(max_examples=50)
    def test_monotone_in_z(self, k, lam):
        z = np.linspace(-10, 10, 10_000)
        up = act.apa_forward(z, P(k, lam))
        down = act.apa_forward(z, P(-k, lam))
        assert np.all(np.diff(up) >= 0) and np.all(np.diff(down) <= 0)
        assert up[-1] > up[0] and down[-1] < down[0]

    @given(st.floats(-1e6, 1e6), st.floats(1e-4, 1e4), st.booleans())
    def test_params_round_trip(self, k, lam, learn):
        p = ActivationParams(k, lam, learn, not learn)
        q = ActivationParams.from_dict(json.loads(json.dumps(p.to_dict())))
        assert q == p and q.kappa.hex() == p.kappa.hex() and q.lam.hex() == p.lam.hex()

    @given(st.floats(-20, 20))
    def test_deterministic(self, z):
        p = P(0.4, 3.0)
        assert act.aglu_grad_lambda(z, p) == act.aglu_grad_lambda(z, p)


class TestReference:
    def ref(self, tag, z, kappa=None):
        params = None if kappa is None else ActivationParams(kappa, 1.0, learn_lam=False)
        return act.reference_forward(ActivationKind(tag, params), z)

    def test_values(self):
        assert self.ref(Kind.RELU, -3.0) == 0.0
        assert self.ref(Kind.MISH, 0.0) == 0.0
        assert self.ref(Kind.ELU, -1.0, kappa=1.0) == pytest.approx(math.exp(-1) - 1, rel=1e-15)
        assert self.ref(Kind.ELU, -1.0, kappa=1.0) == pytest.approx(-0.63212, abs=1e-5)
        assert self.ref(Kind.PRELU, -2.0, kappa=0.1) == pytest.approx(-0.2)
        assert self.ref(Kind.IDENTITY, 1.5) == 1.5
        assert self.ref(Kind.GUMBEL, 0.0) == pytest.approx(math.exp(-1))
        assert self.ref(Kind.GELU, 1.0) == pytest.approx(1.0 / (1 + math.exp(-1.702)))
        assert self.ref(Kind.MISH, 1.0) == pytest.approx(math.tanh(math.log1p(math.e)))

    def test_kind_validation(self):
        with pytest.raises(DomainError):
            ActivationKind(Kind.APA)
        with pytest.raises(DomainError):
            ActivationKind(Kind.RELU, ActivationParams())
        assert ActivationKind(Kind.PRELU).params.kappa == 0.25
        with pytest.raises(DomainError):
            act.reference_forward(ActivationKind(Kind.AGLU, ActivationParams()), 1.0)
        with pytest.raises(DomainError):
            act.reference_forward(ActivationKind(Kind.RELU), math.nan)

    def test_kind_round_trip(self):
        k = ActivationKind(Kind.AGLU, ActivationParams(1.1, 0.4))
        assert ActivationKind.from_dict(json.loads(json.dumps(k.to_dict()))) == k


class TestLimits:
    def test_all_pass(self):
        results = act.limits_check(1e-5)
        assert [r.name for r in results] == ["sigmoid", "gumbel", "silu", "gelu", "relu", "identity", "prelu"]
        assert all(r.passed for r in results)

    def test_sigmoid_zero_deviation_at_zero(self):
        (sig,) = [r for r in act.limits_check(1e-5, grid=(0.0,)) if r.name == "sigmoid"]
        assert sig.max_deviation == 0.0

    def test_gumbel_at_one(self):
        (g,) = [r for r in act.limits_check(1e-5, grid=(1.0,)) if r.name == "gumbel"]
        assert g.max_deviation < 1e-5

    def test_relu_at_minus_five(self):
        (r,) = [r for r in act.limits_check(1e-5, grid=(-5.0,)) if r.name == "relu"]
        assert r.max_deviation < 1e-6

    def test_tight_tolerance_reports_failures(self):
        results = act.limits_check(1e-12)
        assert not all(r.passed for r in results)
        assert all(r.passed for r in results if r.exact)

    def test_bad_tolerance(self):
        with pytest.raises(DomainError):
            act.limits_check(0.0)

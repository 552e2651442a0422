"""Kernel catalog, L1 norms, cumulative integrals and forcing terms."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

import volterra_blowup as vb
from volterra_blowup.errors import DomainError
from volterra_blowup.kernels import validate_forcing

E = math.e


def kernel_catalog():
    return [
        vb.power_decay(1.0, 0.0),
        vb.power_decay(2.0, 1.0),
        vb.power_decay(1.0, 2.0),
        vb.stretched_exp(1.0, 1.0),
        vb.stretched_exp(4.0, 0.5),
        vb.inverse_gamma(1.0),
        vb.t_exp_decay(1.0),
    ]


class TestKernelEval:
    def test_point_values(self):
        assert vb.power_decay(1.0, 0.0).w(17.3) == 1.0
        assert vb.stretched_exp(2.0, 1.0).w(0.0) == 2.0
        assert vb.inverse_gamma(1.0).w(1.0) == pytest.approx(1.0, rel=1e-12)

    def test_negative_time_rejected(self):
        with pytest.raises(DomainError):
            vb.stretched_exp(1.0, 1.0).w(-0.5)

    def test_w0_matches_eval(self):
        for k in kernel_catalog():
            assert k.w0 == pytest.approx(k.w(0.0), abs=1e-300)

    def test_nonnegative_and_continuous_on_range(self):
        # continuity as a refinement property: the largest jump between
        # neighbouring samples must shrink when the grid is halved (true
        # for any uniformly continuous kernel, Lipschitz or not)
        for k in kernel_catalog():
            coarse = np.linspace(0.0, 100.0, 10001)
            fine = np.linspace(0.0, 100.0, 20001)
            vc, vf = k.w(coarse), k.w(fine)
            assert np.all(vf >= 0.0), k.label
            jump_c = np.max(np.abs(np.diff(vc)))
            jump_f = np.max(np.abs(np.diff(vf)))
            assert jump_f <= 0.85 * jump_c + 1e-12, k.label


class TestL1Norm:
    def test_closed_forms(self):
        assert vb.stretched_exp(1.0, 1.0).l1_norm() == pytest.approx(1.0)
        assert vb.stretched_exp(3.5, 1.0).l1_norm() == pytest.approx(3.5)
        assert vb.power_decay(1.0, 2.0).l1_norm() == pytest.approx(1.0)
        assert vb.t_exp_decay(2.0).l1_norm() == pytest.approx(2.0)

    def test_nonintegrable_is_inf(self):
        assert vb.power_decay(1.0, 0.0).l1_norm() == math.inf
        assert vb.power_decay(1.0, 1.0).l1_norm() == math.inf
        assert vb.power_decay(1.0, 0.7).l1_norm() == math.inf

    def test_inverse_gamma_numeric(self):
        ref, _ = quad(lambda t: 1.0 / math.gamma(t + 1.0), 0.0, 60.0, limit=400)
        assert vb.inverse_gamma(1.0).l1_norm() == pytest.approx(ref, rel=1e-6)


class TestCumulative:
    def test_against_quadrature(self):
        for k in kernel_catalog():
            for t in (0.0, 0.3, 2.0, 11.0):
                ref, _ = quad(lambda u: float(k.w(u)), 0.0, t, limit=200)
                assert k.cumulative(t) == pytest.approx(ref, rel=1e-8, abs=1e-12), k.label

    def test_tail_bounds_hold(self):
        for k in kernel_catalog():
            tail = k.l1_tail(5.0)
            if tail is None or not math.isfinite(tail):
                continue
            ref, _ = quad(lambda u: float(k.w(u)), 5.0, np.inf, limit=400)
            assert tail >= ref * (1.0 - 1e-9), k.label


class TestForcing:
    def test_zero(self):
        z = vb.zero_forcing()
        assert z.h(3.0) == 0.0 and z.H(7.0) == 0.0
        validate_forcing(z)

    def test_power_growth(self):
        f = vb.power_growth(2.0)
        assert f.H(3.0) == pytest.approx(9.0)
        assert f.h(3.0) == pytest.approx(6.0)
        validate_forcing(f)
        validate_forcing(vb.power_growth(1.0))

    def test_rate_scale_round_trip(self):
        ll = vb.log_linear()
        K = 0.5 * math.sqrt(2.0)
        f = vb.rate_scale(K, ll)
        for t in (0.5, 3.0, 11.0, 29.0):
            assert ll.fu_from_log(float(f.log_H(t))) == pytest.approx(
                K * t, rel=2e-6, abs=2e-6)
        # H(0) = FU^{-1}(0) = 1 by construction; running integral of h is H - 1
        assert f.H(0.0) == pytest.approx(1.0)
        validate_forcing(f, t_max=30.0)

    def test_h_matches_H_derivative(self):
        ll = vb.log_linear()
        f = vb.rate_scale(1.0, ll)
        d = 1e-6
        for t in (1.0, 4.0, 9.0):
            fd = (f.H(t + d) - f.H(t - d)) / (2.0 * d)
            assert f.h(t) == pytest.approx(fd, rel=1e-4)

    def test_H_nonnegative_sampled(self):
        for forcing in (vb.zero_forcing(), vb.power_growth(1.0),
                        vb.power_growth(2.0)):
            ts = np.linspace(0.0, 50.0, 101)
            assert np.all(np.asarray(forcing.H(ts)) >= 0.0)
            hv = np.asarray(forcing.h(ts[1:]))
            H = np.asarray(forcing.H(ts))
            if np.all(hv >= 0.0):
                assert np.all(np.diff(H) >= -1e-12)


class TestIds:
    def test_kernel_ids(self):
        k = vb.kernel_from_id("power_decay:omega=1,alpha=0")
        assert k.kind == "power_decay" and k.params == (1.0, 0.0)
        assert vb.kernel_from_id("stretched_exp:omega=1,gamma=1").kind == "stretched_exp"
        assert vb.kernel_from_id("inverse_gamma:omega=1").w0 == 1.0
        assert vb.kernel_from_id("t_exp_decay").w0 == 0.0

    def test_forcing_ids(self):
        assert vb.forcing_from_id("zero").is_zero
        assert vb.forcing_from_id("power_growth:alpha=2").params == (2.0,)
        ll = vb.log_linear()
        assert vb.forcing_from_id("rate_scale:K=0.5", ll).params == (0.5,)
        with pytest.raises(DomainError):
            vb.forcing_from_id("rate_scale:K=0.5")

    def test_unknown_kernel_rejected(self):
        with pytest.raises(DomainError):
            vb.kernel_from_id("gaussian")

"""Unit tests for the shared quadrature and acceleration machinery."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from volterra_blowup.errors import DivergentAcceleration
from volterra_blowup.quadrature import (
    Convergence,
    aitken,
    aitken_limit,
    gauss_panels,
    graded_edges,
    integrate_log_interval,
    ladder_integral,
    tail_integral,
)


def test_gauss_panels_polynomial_exact():
    edges = np.linspace(0.0, 2.0, 5)
    val = gauss_panels(lambda x: 3.0 * x ** 2, edges)
    assert abs(val - 8.0) < 1e-13


def test_integrate_log_interval_matches_quad():
    # integral of 1/u over [1, e^3] equals 3
    val = integrate_log_interval(lambda v: np.ones_like(v), 0.0, 3.0)
    assert abs(val - 3.0) < 1e-13
    # integral of u^{-3/2} over [1, 1e8] = 2 (1 - 1e-4) exactly
    val = integrate_log_interval(lambda v: np.exp(-0.5 * v), 0.0, math.log(1e8))
    ref = 2.0 * (1.0 - 1e-4)
    assert abs(val - ref) < 1e-12 * abs(ref)
    # moderate range cross-check against adaptive quadrature
    val = integrate_log_interval(lambda v: np.exp(-0.5 * v), 0.0, math.log(50.0))
    ref, _ = quad(lambda u: u ** -1.5, 1.0, 50.0, limit=200)
    assert abs(val - ref) < 1e-10 * abs(ref)


def test_integrate_log_interval_signed():
    fwd = integrate_log_interval(lambda v: np.exp(v), 0.0, 1.0)
    assert abs(fwd - (math.e - 1.0)) < 1e-12
    assert integrate_log_interval(lambda v: np.exp(v), 1.0, 0.0) == -fwd
    assert integrate_log_interval(lambda v: np.exp(v), 1.0, 1.0) == 0.0


def test_graded_edges_cover_interval():
    edges = graded_edges(-3.0, 250.0)
    assert edges[0] == -3.0 and edges[-1] == 250.0
    assert np.all(np.diff(edges) > 0)


class TestAitken:
    def test_geometric(self):
        seq = [1.0 - 2.0 ** -n for n in range(1, 9)]
        limit, err = aitken_limit(seq)
        assert abs(limit - 1.0) < 1e-6
        assert err < 1e-4

    def test_constant(self):
        limit, err, diverged = aitken([3.5] * 6)
        assert limit == 3.5
        assert err == 0.0
        assert not diverged

    def test_harmonic_flagged(self):
        sums = np.cumsum(1.0 / np.arange(1.0, 20.0))
        limit, err, diverged = aitken(list(sums))
        # no finite limit: either the flag trips or the error stays large
        assert diverged or err > 1e-2 * abs(limit)

    def test_aitken_limit_raises_on_growing_increments(self):
        sums = list(np.cumsum(2.0 ** np.arange(1.0, 13.0)))
        with pytest.raises(DivergentAcceleration):
            aitken_limit(sums)

    def test_too_short(self):
        with pytest.raises(ValueError):
            aitken([1.0, 2.0])


class TestLadder:
    CUTOFFS = tuple(10.0 ** k for k in range(2, 13))

    def test_geometric_decay_converges(self):
        # density e^{-v/2}: integrand u^{-3/2}, convergent
        res = ladder_integral(lambda v: np.exp(-0.5 * v), 0.0, self.CUTOFFS)
        assert res.verdict is Convergence.CONVERGED
        assert res.tail is not None
        exact = 2.0  # integral of u^{-3/2} over [1, inf)
        assert abs(res.total + res.tail - exact) < 1e-3 * exact

    def test_constant_density_diverges(self):
        res = ladder_integral(lambda v: np.ones_like(v), 0.0, self.CUTOFFS)
        assert res.verdict is Convergence.DIVERGED

    def test_log_type_diverges(self):
        # integrand 1/(u sqrt(log u)) from u = e: non-summable decades
        res = ladder_integral(
            lambda v: 1.0 / np.sqrt(np.maximum(v, 1e-9)), 1.0, self.CUTOFFS)
        assert res.verdict is Convergence.DIVERGED

    def test_partials_nondecreasing(self):
        res = ladder_integral(lambda v: np.exp(-0.5 * v), 0.0, self.CUTOFFS)
        assert np.all(np.diff(res.partials) > 0)


def test_tail_integral_power_law():
    # integral of u^{-2} over [10, inf) = 0.1; density e^{-v}
    val, err = tail_integral(lambda v: np.exp(-v), math.log(10.0))
    assert abs(val - 0.1) < 1e-9
    assert err < 1e-6

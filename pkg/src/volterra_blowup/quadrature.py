"""Shared quadrature and sequence-acceleration machinery.

Everything that has to decide whether an improper integral converges, or
evaluate one accurately, funnels through this module: the Osgood
classifier, the rate functionals, and kernel L1 norms all use the same
geometric-ladder logic so that their verdicts are comparable.

Integrands over (0, inf) are handled in log space: the caller supplies a
*density* d(v) with d(v) = g(e^v) * e^v, so that

    integral of g over [a, b]  ==  integral of d over [log a, log b].

Densities must accept numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .errors import DivergentAcceleration

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)

#: Default geometric factor between ladder rungs for tail integrals.
TAIL_RUNG_FACTOR = 4.0


def gauss_panels(density: Callable, edges: np.ndarray) -> float:
    """Integrate `density` over consecutive panels given by `edges`.

    16-point Gauss-Legendre per panel; all nodes are evaluated in a single
    vectorized call.
    """
    edges = np.asarray(edges, dtype=float)
    if edges.size < 2:
        return 0.0
    a, b = edges[:-1], edges[1:]
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    pts = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    vals = np.asarray(density(pts.ravel()), dtype=float).reshape(pts.shape)
    return float(np.dot(half, vals @ _GL_WEIGHTS))


def graded_edges(lo: float, hi: float, *, base: float = 0.25, growth: float = 0.08) -> np.ndarray:
    """Panel edges on [lo, hi] whose width scales with |v|.

    Near the origin panels have width `base`; far out they grow like
    growth * |v|, which keeps the panel count logarithmic in the range
    while leaving Gauss-Legendre error negligible for the smooth,
    power-law-like densities used here.
    """
    if hi <= lo:
        return np.array([lo, hi]) if hi == lo else np.array([lo])
    edges = [lo]
    v = lo
    while v < hi:
        v = v + max(base, growth * abs(v))
        if v >= hi:
            break
        edges.append(v)
    edges.append(hi)
    return np.asarray(edges)


def integrate_log_interval(density: Callable, v_lo: float, v_hi: float) -> float:
    """Signed integral of `density` over [v_lo, v_hi] with graded panels."""
    if v_hi == v_lo:
        return 0.0
    if v_hi < v_lo:
        return -integrate_log_interval(density, v_hi, v_lo)
    return gauss_panels(density, graded_edges(v_lo, v_hi))


# ---------------------------------------------------------------------------
# Sequence acceleration
# ---------------------------------------------------------------------------

def aitken(seq: Sequence[float], *, sweeps: int = 2) -> tuple[float, float, bool]:
    """Iterated Aitken delta-squared acceleration.

    Returns (limit, err, diverged). `err` is the magnitude of the last
    correction actually applied; `diverged` is set when the accelerated
    increments fail to contract, which is the signature of a sequence
    without a finite limit (or one outside Aitken's reach).
    """
    cur = [float(x) for x in seq]
    if len(cur) < 3:
        raise ValueError("need at least 3 samples to accelerate")
    limit = cur[-1]
    err = abs(cur[-1] - cur[-2])
    diverged = False
    raw = np.abs(np.diff(cur))
    if len(raw) >= 3 and np.all(np.diff(raw[-4:]) > 0) and raw[-1] > 1.5 * raw[-3]:
        # Growing increments: Aitken would produce the geometric anti-limit,
        # which is not a limit of the sequence.
        diverged = True
    for _ in range(sweeps):
        if len(cur) < 3:
            break
        nxt = []
        for i in range(len(cur) - 2):
            d1 = cur[i + 1] - cur[i]
            d2 = cur[i + 2] - cur[i + 1]
            den = d2 - d1
            if den == 0.0 or abs(den) < 1e-300:
                # Sequence is (numerically) exactly linear here; the limit is
                # already resolved to machine precision.
                nxt.append(cur[i + 2])
                continue
            nxt.append(cur[i + 2] - d2 * d2 / den)
        if not nxt:
            break
        raw_inc = [abs(cur[i + 1] - cur[i]) for i in range(len(cur) - 1)]
        acc_inc = [abs(nxt[i + 1] - nxt[i]) for i in range(len(nxt) - 1)]
        if acc_inc:
            # Contraction check: acceleration should beat the raw increments
            # and its own increments should shrink along the sweep. Ignore
            # increments at machine level: that is convergence, not failure.
            machine = 3e-15 * max(abs(nxt[-1]), 1e-300)
            if (acc_inc[-1] > machine
                    and acc_inc[-1] > 0.75 * max(acc_inc[0], 1e-300)
                    and acc_inc[-1] > 0.5 * raw_inc[-1]):
                diverged = True
        new_limit = nxt[-1]
        err = abs(new_limit - limit) + (acc_inc[-1] if acc_inc else 0.0)
        limit = new_limit
        cur = nxt
    return limit, err, diverged


def aitken_limit(seq: Sequence[float], *, sweeps: int = 2) -> tuple[float, float]:
    """Like `aitken` but raises DivergentAcceleration instead of flagging."""
    limit, err, diverged = aitken(seq, sweeps=sweeps)
    if diverged:
        raise DivergentAcceleration(
            f"accelerated increments do not contract (last estimate {limit:.6g})"
        )
    return limit, err


# ---------------------------------------------------------------------------
# Geometric ladders for improper integrals
# ---------------------------------------------------------------------------

class Convergence(Enum):
    CONVERGED = "converged"
    DIVERGED = "diverged"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class LadderResult:
    """Outcome of a geometric-ladder examination of an improper integral.

    `cutoffs[k]` is the upper limit of rung k, `increments[k]` the integral
    over that rung, and `partials[k]` the cumulative integral from the
    ladder start. `tail` extrapolates the remainder beyond the last cutoff
    (None unless the ladder converged).
    """

    cutoffs: tuple[float, ...]
    increments: tuple[float, ...]
    partials: tuple[float, ...]
    verdict: Convergence
    ratio: float | None
    tail: float | None
    tail_err: float

    @property
    def total(self) -> float:
        return self.partials[-1] if self.partials else 0.0


def _fit_power_law(increments: np.ndarray) -> tuple[float, float, float]:
    """Fit increments ~ c * k^(-p) and ~ c * q^k over the same window.

    Returns (p, power-law max log-residual, geometric max log-residual).
    The residual comparison discriminates slowly-geometric decay (which is
    summable) from genuine power-law decay (summable only for p > 1).
    """
    k = np.arange(1.0, len(increments) + 1.0)
    y = np.log(increments)
    x = np.log(k)
    slope, intercept = np.polyfit(x, y, 1)
    resid_pow = float(np.max(np.abs(y - (slope * x + intercept))))
    gslope, gintercept = np.polyfit(k, y, 1)
    resid_geo = float(np.max(np.abs(y - (gslope * k + gintercept))))
    return -float(slope), resid_pow, resid_geo


def ladder_integral(
    density: Callable,
    v_start: float,
    cutoffs: Sequence[float],
    *,
    finite_ratio: float = 0.9,
    diverge_ratio: float = 0.99,
) -> LadderResult:
    """Integrate `density` from v_start over a geometric cutoff ladder.

    `cutoffs` are in the original (u) variable; rung k covers
    [log cutoffs[k-1], log cutoffs[k]] with the first rung starting at
    v_start. Classification of the remainder:

      converged  -- tail increment ratios all <= finite_ratio, so the
                    remainder is geometrically summable and extrapolated;
      diverged   -- increments non-summable: ratios >= diverge_ratio,
                    increasing increments, or a clean power-law fit with
                    exponent <= 1;
      undecided  -- anything else (an honest answer, not an error).
    """
    cutoffs = [float(c) for c in cutoffs]
    if len(cutoffs) < 4:
        raise ValueError("ladder needs at least 4 cutoffs")
    edges_v = [v_start] + [math.log(c) for c in cutoffs]
    increments = []
    partial = 0.0
    partials = []
    for lo, hi in zip(edges_v[:-1], edges_v[1:]):
        inc = integrate_log_interval(density, lo, hi)
        increments.append(inc)
        partial += inc
        partials.append(partial)
    inc_arr = np.asarray(increments[1:] if len(increments) > 1 else increments)
    # Rung 0 spans v_start..cutoffs[0] and is not comparable to the decade
    # rungs, so ratio analysis uses rungs 1..end.
    result_common = dict(
        cutoffs=tuple(cutoffs),
        increments=tuple(increments),
        partials=tuple(partials),
    )
    if np.any(~np.isfinite(inc_arr)) or np.any(inc_arr < 0.0):
        return LadderResult(verdict=Convergence.UNDECIDED, ratio=None, tail=None,
                            tail_err=math.inf, **result_common)
    if np.any(inc_arr == 0.0):
        # Increments that underflow to zero after a positive, decaying start
        # mean the integrand has collapsed below float resolution: that is
        # convergence with a negligible remainder, not an open question.
        nz = np.nonzero(inc_arr > 0.0)[0]
        if nz.size >= 2 and nz[-1] == nz.size - 1 and partial > 0.0 \
                and inc_arr[nz[-1]] < inc_arr[nz[0]]:
            return LadderResult(verdict=Convergence.CONVERGED, ratio=0.0,
                                tail=0.0, tail_err=float(inc_arr[nz[-1]]),
                                **result_common)
        return LadderResult(verdict=Convergence.UNDECIDED, ratio=None, tail=None,
                            tail_err=math.inf, **result_common)
    tail_n = min(6, len(inc_arr) - 1)
    ratios = inc_arr[-tail_n:] / inc_arr[-tail_n - 1:-1]
    r_hi, r_lo = float(np.max(ratios)), float(np.min(ratios))
    r_fit = float(np.exp(np.mean(np.log(ratios))))
    if r_hi <= finite_ratio:
        tail_mid = inc_arr[-1] * r_fit / (1.0 - r_fit)
        tail_hi = inc_arr[-1] * r_hi / (1.0 - r_hi)
        tail_lo = inc_arr[-1] * r_lo / (1.0 - r_lo)
        return LadderResult(verdict=Convergence.CONVERGED, ratio=r_fit,
                            tail=float(tail_mid),
                            tail_err=float(0.5 * (tail_hi - tail_lo) + 1e-300),
                            **result_common)
    if r_lo >= diverge_ratio or np.all(np.diff(inc_arr[-tail_n - 1:]) >= 0.0):
        return LadderResult(verdict=Convergence.DIVERGED, ratio=r_fit, tail=None,
                            tail_err=math.inf, **result_common)
    # Increments decay but not geometrically; test for a non-summable
    # power-law model Delta_k ~ c * k^(-p), p <= 1 (constants, log-type
    # integrands and the harmonic borderline all land here).
    p, resid = _fit_power_law(inc_arr[max(0, len(inc_arr) - 8):])
    if p <= 1.02 and resid <= 0.1:
        return LadderResult(verdict=Convergence.DIVERGED, ratio=r_fit, tail=None,
                            tail_err=math.inf, **result_common)
    return LadderResult(verdict=Convergence.UNDECIDED, ratio=r_fit, tail=None,
                        tail_err=math.inf, **result_common)


def tail_integral(
    density: Callable,
    v_start: float,
    *,
    rungs: int = 28,
    factor: float = TAIL_RUNG_FACTOR,
) -> tuple[float, float]:
    """Value of the improper integral of `density` from v_start to infinity.

    The upper limit is pushed out geometrically (the 1/u reciprocal-
    substitution picture: each rung multiplies the cutoff by `factor`,
    i.e. shrinks the reciprocal endpoint toward zero) and the partial
    values are Aitken-accelerated to the limit. Returns (value, err).

    Only meaningful when the integral converges; the caller is expected to
    have classified it first.
    """
    lv = math.log(factor)
    partials = []
    total = 0.0
    v = v_start
    inc = math.inf
    for _ in range(rungs):
        inc = integrate_log_interval(density, v, v + lv)
        total += inc
        partials.append(total)
        v += lv
        if total > 0 and inc < 1e-15 * total:
            # The remainder is below float resolution of the value itself.
            return total, max(inc, 4e-16 * total)
    if len(partials) < 4:
        return partials[-1], abs(partials[-1] - partials[0])
    limit, err, diverged = aitken(partials[-10:])
    if diverged or not math.isfinite(limit):
        raise DivergentAcceleration("tail integral does not settle; is it convergent?")
    return limit, err

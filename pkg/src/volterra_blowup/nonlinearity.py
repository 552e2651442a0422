"""Nonlinearities and the integral functionals that grade their growth.

A positive nonlinearity f on (0, inf) is summarized by three transforms:

    Fbar(x) = integral of f over [0, x]          (running integral)
    FB(x)   = integral of 1/sqrt(Fbar) over [x, inf)
    FU(x)   = integral of 1/sqrt(Fbar) over [1, x]   (negative for x < 1)

The Osgood dichotomy is whether FB is finite: if it is, memory equations
driven by f explode in finite time and FB(x(t)) is asymptotically linear
in (T - t); if not, solutions are global and FU(x(t)) is asymptotically
linear in t. Because the decision involves improper integrals, the
numerical classifier is three-valued: FINITE, INFINITE or UNDECIDED.

Evaluators come in pairs, plain and log-domain: `log_f_from_log(v)`
returns log f(e^v) and stays usable long after f(x) itself has left
float range. Everything downstream (classification, FU at astronomically
large arguments, the solver's log-space mode) is built on the log forms.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, QuadratureError, UndecidedError
from .quadrature import (
    Convergence,
    aitken,
    gauss_panels,
    graded_edges,
    integrate_log_interval,
    ladder_integral,
    tail_integral,
)

__all__ = [
    "NonlinearitySpec",
    "OsgoodClass",
    "OsgoodVerdict",
    "FunctionalTable",
    "GrowthMap",
    "power_plus_one",
    "log_linear",
    "pure_power",
    "custom",
    "nonlinearity_from_id",
    "classify_osgood",
    "check_osgood_equivalence",
    "test_superexponential",
    "test_preserves_superexponential",
    "superexponential_preservation_report",
]

#: Default cutoff ladder for the Osgood classifier: decades from 1e2 to 1e12.
DEFAULT_CUTOFFS: tuple[float, ...] = tuple(float(10.0 ** k) for k in range(2, 13))

#: Ratio threshold below which ladder increments count as geometric decay.
FINITE_RATIO = 0.9
#: Ratio threshold above which increments count as non-summable outright.
DIVERGE_RATIO = 0.99

_SUPEREXP_THRESHOLD_LOG = math.log(1e-3)


class OsgoodClass(Enum):
    FINITE = "finite"        # blow-up integral converges -> finite-time explosion
    INFINITE = "infinite"    # integral diverges -> global solutions
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class OsgoodVerdict:
    classification: OsgoodClass
    partial_integral_at_cutoffs: tuple[tuple[float, float], ...]
    extrapolated_tail: float | None
    increment_ratio: float | None

    @property
    def is_finite(self) -> bool:
        return self.classification is OsgoodClass.FINITE

    @property
    def is_infinite(self) -> bool:
        return self.classification is OsgoodClass.INFINITE


@dataclass(frozen=True)
class NonlinearitySpec:
    """A positive nonlinearity with monotonicity metadata and log-domain twins.

    `params` and `kind` identify catalog members; `catalog_id` is the
    config-file spelling ("power_plus_one:beta=2.0") when one exists.
    """

    kind: str
    params: tuple[float, ...]
    label: str
    is_increasing: bool
    is_superlinear: bool
    fn: Callable = field(repr=False)
    fbar_fn: Callable = field(repr=False)
    log_f_fn: Callable = field(repr=False)
    log_fbar_fn: Callable = field(repr=False)
    catalog_id: str | None = None

    # -- plain evaluators ---------------------------------------------------

    def f(self, x):
        """f(x) for x >= 0 (scalar or array)."""
        arr = np.asarray(x, dtype=float)
        if np.any(arr < 0.0):
            raise DomainError(f"{self.label}: f demands x >= 0")
        with np.errstate(over="ignore"):
            out = self.fn(arr)
        return float(out) if np.isscalar(x) or arr.ndim == 0 else out

    def fbar(self, x):
        """Running integral Fbar(x) for x >= 0."""
        arr = np.asarray(x, dtype=float)
        if np.any(arr < 0.0):
            raise DomainError(f"{self.label}: Fbar demands x >= 0")
        with np.errstate(over="ignore"):
            out = self.fbar_fn(arr)
        return float(out) if np.isscalar(x) or arr.ndim == 0 else out

    # -- log-domain evaluators ----------------------------------------------

    def log_f_from_log(self, v):
        """log f(e^v), stable for |v| far beyond float range of e^v."""
        with np.errstate(over="ignore", divide="ignore"):
            out = self.log_f_fn(np.asarray(v, dtype=float))
        return float(out) if np.isscalar(v) else out

    def log_fbar_from_log(self, v):
        """log Fbar(e^v), same contract as `log_f_from_log`."""
        with np.errstate(over="ignore", divide="ignore"):
            out = self.log_fbar_fn(np.asarray(v, dtype=float))
        return float(out) if np.isscalar(v) else out

    # -- densities for the improper integrals --------------------------------

    def _osgood_density(self, v):
        # integrand of the blow-up test in log space: e^v / sqrt(Fbar(e^v))
        return np.exp(v - 0.5 * self.log_fbar_fn(v))

    def _equivalence_density(self, v):
        # integrand of the companion test 1/sqrt(x f(x)) in log space
        return np.exp(0.5 * v - 0.5 * self.log_f_fn(v))

    # -- rate functionals -----------------------------------------------------

    def fu_from_log(self, v: float) -> float:
        """FU(x) given v = log x."""
        with np.errstate(over="ignore", divide="ignore"):
            return integrate_log_interval(self._osgood_density, 0.0, float(v))

    def fu(self, x: float, rel_tol: float = 1e-10) -> float:
        """FU(x) = integral of 1/sqrt(Fbar) over [1, x]; negative for x < 1."""
        if x <= 0.0:
            raise DomainError("FU demands x > 0")
        return self.fu_from_log(math.log(x))

    def fb_from_log(self, v: float, rel_tol: float = 1e-6) -> float:
        """FB(x) given v = log x. Requires an Osgood-finite nonlinearity."""
        verdict = self.osgood()
        if verdict.classification is not OsgoodClass.FINITE:
            raise DomainError(
                f"{self.label}: FB is undefined (Osgood verdict "
                f"{verdict.classification.value})"
            )
        with np.errstate(over="ignore", divide="ignore"):
            value, err = tail_integral(self._osgood_density, float(v))
        if not math.isfinite(value) or err > rel_tol * abs(value):
            raise UndecidedError(
                f"{self.label}: FB tail did not converge to rel tol {rel_tol:g} "
                f"(value {value:.6g}, err {err:.2g})"
            )
        return value

    def fb(self, x: float, rel_tol: float = 1e-6) -> float:
        """FB(x) = integral of 1/sqrt(Fbar) over [x, inf)."""
        if x <= 0.0:
            raise DomainError("FB demands x > 0")
        return self.fb_from_log(math.log(x), rel_tol=rel_tol)

    def invert_fu_log(self, target: float, rel_tol: float = 1e-9) -> float:
        """v with FU(e^v) = target; monotone bracketing plus Brent."""
        from scipy.optimize import brentq

        verdict = self.osgood()
        if verdict.classification is OsgoodClass.FINITE:
            sup = self.fb(1.0)
            if target >= sup * (1.0 - 1e-12):
                raise DomainError(
                    f"{self.label}: FU is bounded by FB(1) = {sup:.6g}; "
                    f"target {target:.6g} is out of range"
                )
        if target == 0.0:
            return 0.0
        # Bracket by doubling in v.
        if target > 0.0:
            lo, hi = 0.0, 1.0
            while self.fu_from_log(hi) < target:
                lo, hi = hi, hi * 2.0
                if hi > 1e9:
                    raise DomainError("FU inversion bracket exceeded v = 1e9")
        else:
            lo, hi = -1.0, 0.0
            while self.fu_from_log(lo) > target:
                lo, hi = lo * 2.0, lo
                if lo < -1e9:
                    raise DomainError("FU inversion bracket exceeded v = -1e9")
        v = brentq(lambda vv: self.fu_from_log(vv) - target, lo, hi,
                   xtol=1e-13 * max(1.0, abs(hi)), rtol=8.9e-16)
        return float(v)

    def invert_fu(self, target: float, rel_tol: float = 1e-9) -> float:
        """x with |FU(x) - target| <= rel_tol * max(1, target)."""
        v = self.invert_fu_log(target, rel_tol=rel_tol)
        achieved = self.fu_from_log(v)
        if abs(achieved - target) > rel_tol * max(1.0, abs(target)):
            raise QuadratureError(
                f"FU inversion met |FU - target| = {abs(achieved - target):.2g} "
                f"> tol for target {target:.6g}"
            )
        with np.errstate(over="ignore"):
            return float(np.exp(v))

    def osgood(self, tol: float = 0.05) -> OsgoodVerdict:
        """Cached Osgood classification with default ladder settings."""
        return classify_osgood(self, tol=tol)


# ---------------------------------------------------------------------------
# Catalog
# ---------------------------------------------------------------------------

def power_plus_one(beta: float) -> NonlinearitySpec:
    """f(x) = (1 + x)^beta. Superlinear for beta > 1; Osgood-finite then."""
    if beta <= 0.0:
        raise DomainError("power_plus_one demands beta > 0")
    bp1 = beta + 1.0

    def f(x):
        return np.exp(beta * np.log1p(x))

    def fbar(x):
        return np.expm1(bp1 * np.log1p(x)) / bp1

    def log_f(v):
        return beta * np.logaddexp(0.0, v)

    def log_fbar(v):
        m = bp1 * np.logaddexp(0.0, v)
        small = m < 30.0
        out = np.where(
            small,
            np.log(np.expm1(np.where(small, m, 1.0))),
            m + np.log1p(-np.exp(-np.where(small, 30.0, m))),
        )
        return out - math.log(bp1)

    return NonlinearitySpec(
        kind="power_plus_one", params=(beta,), label=f"(1+x)^{beta:g}",
        is_increasing=True, is_superlinear=beta > 1.0,
        fn=f, fbar_fn=fbar, log_f_fn=log_f, log_fbar_fn=log_fbar,
        catalog_id=f"power_plus_one:beta={beta:g}",
    )


def log_linear() -> NonlinearitySpec:
    """f(x) = (x + e) log(x + e). Superlinear but Osgood-infinite."""
    e = math.e

    def f(x):
        xe = x + e
        return xe * np.log(xe)

    def _fbar_closed(x):
        xe = x + e
        return (xe * xe * (2.0 * np.log(xe) - 1.0) - e * e) / 4.0

    def fbar(x):
        x = np.asarray(x, dtype=float)
        # The closed form cancels catastrophically near 0; switch to the
        # series e*x + x^2 + x^3/(6e) below 1e-4 (truncation ~ 1e-13 rel).
        small = x < 1e-4
        xs = np.where(small, x, 0.0)
        series = e * xs + xs * xs + xs ** 3 / (6.0 * e)
        closed = _fbar_closed(np.where(small, 1.0, x))
        return np.where(small, series, closed)

    def log_f(v):
        lxe = np.logaddexp(v, 1.0)          # log(x + e)
        return lxe + np.log(lxe)

    def log_fbar(v):
        v = np.asarray(v, dtype=float)
        big = v > 330.0
        # direct branch: Fbar still in float range below e^330
        direct = np.log(fbar(np.exp(np.where(big, 0.0, v))))
        lxe = np.logaddexp(v, 1.0)
        asym = 2.0 * lxe + np.log(2.0 * lxe - 1.0) - math.log(4.0)
        return np.where(big, asym, direct)

    return NonlinearitySpec(
        kind="log_linear", params=(), label="(x+e)log(x+e)",
        is_increasing=True, is_superlinear=True,
        fn=f, fbar_fn=fbar, log_f_fn=log_f, log_fbar_fn=log_fbar,
        catalog_id="log_linear",
    )


def pure_power(p: float) -> NonlinearitySpec:
    """f(x) = x^p. Superlinear iff p > 1 (p = 1 is the linear borderline)."""
    if p <= 0.0:
        raise DomainError("pure_power demands p > 0")
    pp1 = p + 1.0

    def f(x):
        return np.asarray(x, dtype=float) ** p

    def fbar(x):
        return np.asarray(x, dtype=float) ** pp1 / pp1

    def log_f(v):
        return p * np.asarray(v, dtype=float)

    def log_fbar(v):
        return pp1 * np.asarray(v, dtype=float) - math.log(pp1)

    return NonlinearitySpec(
        kind="pure_power", params=(p,), label=f"x^{p:g}",
        is_increasing=True, is_superlinear=p > 1.0,
        fn=f, fbar_fn=fbar, log_f_fn=log_f, log_fbar_fn=log_fbar,
        catalog_id=f"pure_power:p={p:g}",
    )


class _CumulativeQuadrature:
    """Fbar for custom f by cached piecewise adaptive quadrature from 0."""

    def __init__(self, f: Callable):
        self._f = f
        self._anchors: list[tuple[float, float]] = [(0.0, 0.0)]

    def _value(self, x: float) -> float:
        base_x, base_v = max(
            (a for a in self._anchors if a[0] <= x), key=lambda a: a[0]
        )
        inc, _ = quad(self._f, base_x, x, epsabs=0.0, epsrel=1e-11, limit=200)
        val = base_v + inc
        if x >= 2.0 * self._anchors[-1][0] and x > 1.0:
            self._anchors.append((x, val))
        return val

    def __call__(self, x):
        arr = np.asarray(x, dtype=float)
        if arr.ndim == 0:
            return self._value(float(arr))
        return np.array([self._value(xi) for xi in arr.ravel()]).reshape(arr.shape)


def custom(
    f: Callable,
    *,
    fbar: Callable | None = None,
    log_f: Callable | None = None,
    log_fbar: Callable | None = None,
    is_increasing: bool = True,
    is_superlinear: bool = True,
    label: str = "custom",
) -> NonlinearitySpec:
    """Wrap a user-supplied nonlinearity.

    Missing pieces are derived: Fbar by adaptive quadrature, log forms by
    taking logs of the plain values. The derived log forms fail once the
    plain value leaves float range (~1e300); callers that need larger
    arguments must pass explicit log-domain evaluators or accept
    UNDECIDED/aborted outcomes there.
    """
    fbar_fn = fbar if fbar is not None else _CumulativeQuadrature(f)

    def default_log_f(v):
        with np.errstate(over="ignore"):
            val = f(np.exp(v))
        out = np.log(val)
        if not np.all(np.isfinite(np.atleast_1d(out))):
            raise DomainError(
                f"{label}: plain evaluator overflowed; supply log_f for "
                "arguments beyond ~1e300"
            )
        return out

    def default_log_fbar(v):
        with np.errstate(over="ignore"):
            val = fbar_fn(np.exp(v))
        out = np.log(val)
        if not np.all(np.isfinite(np.atleast_1d(out))):
            raise DomainError(
                f"{label}: Fbar overflowed; supply log_fbar for arguments "
                "beyond ~1e300"
            )
        return out

    return NonlinearitySpec(
        kind="custom", params=(), label=label,
        is_increasing=is_increasing, is_superlinear=is_superlinear,
        fn=f, fbar_fn=fbar_fn,
        log_f_fn=log_f if log_f is not None else default_log_f,
        log_fbar_fn=log_fbar if log_fbar is not None else default_log_fbar,
    )


def nonlinearity_from_id(spec_id: str) -> NonlinearitySpec:
    """Resolve a config-file id like "power_plus_one:beta=2.0"."""
    from .scenarios import parse_spec_id  # local import to avoid a cycle

    name, params = parse_spec_id(spec_id)
    if name == "power_plus_one":
        return power_plus_one(params.pop("beta"))
    if name == "log_linear":
        if params:
            raise DomainError(f"log_linear takes no parameters, got {params}")
        return log_linear()
    if name == "pure_power":
        return pure_power(params.pop("p"))
    raise DomainError(f"unknown nonlinearity id {spec_id!r}")


# ---------------------------------------------------------------------------
# Osgood classification
# ---------------------------------------------------------------------------

@functools.lru_cache(maxsize=256)
def _classify_cached(spec: NonlinearitySpec, eta: float, cutoffs: tuple[float, ...],
                     tol: float) -> OsgoodVerdict:
    try:
        ladder = ladder_integral(
            spec._osgood_density, math.log(eta), cutoffs,
            finite_ratio=FINITE_RATIO, diverge_ratio=DIVERGE_RATIO,
        )
    except (DomainError, OverflowError):
        return OsgoodVerdict(OsgoodClass.UNDECIDED, (), None, None)
    partials = tuple(zip(ladder.cutoffs, ladder.partials))
    if ladder.verdict is Convergence.CONVERGED:
        total_with_tail = ladder.total + (ladder.tail or 0.0)
        if ladder.tail is not None and ladder.tail <= tol * total_with_tail:
            return OsgoodVerdict(OsgoodClass.FINITE, partials, ladder.tail,
                                 ladder.ratio)
        return OsgoodVerdict(OsgoodClass.UNDECIDED, partials, ladder.tail,
                             ladder.ratio)
    if ladder.verdict is Convergence.DIVERGED:
        return OsgoodVerdict(OsgoodClass.INFINITE, partials, None, ladder.ratio)
    return OsgoodVerdict(OsgoodClass.UNDECIDED, partials, None, ladder.ratio)


def classify_osgood(
    spec: NonlinearitySpec,
    eta: float = 1.0,
    cutoff_ladder: Sequence[float] | None = None,
    tol: float = 0.05,
) -> OsgoodVerdict:
    """Three-valued Osgood test on a geometric cutoff ladder.

    Computes I(K) = integral of 1/sqrt(Fbar) over [eta, K] for K on the
    ladder. FINITE needs geometric increment decay (fitted ratio < 0.9)
    plus an extrapolated remainder below `tol` relative to the whole;
    INFINITE needs a non-summable increment model; everything else is
    UNDECIDED, which is a legal verdict rather than an error.
    """
    if eta <= 0.0:
        raise DomainError("classify_osgood demands eta > 0")
    cutoffs = tuple(cutoff_ladder) if cutoff_ladder is not None else DEFAULT_CUTOFFS
    return _classify_cached(spec, float(eta), cutoffs, float(tol))


def check_osgood_equivalence(
    spec: NonlinearitySpec,
    cutoff_ladder: Sequence[float] | None = None,
    tol: float = 0.05,
) -> bool:
    """Do the two convergence tests agree for this (increasing) nonlinearity?

    Classifies both integral criteria -- 1/sqrt(x f(x)) and
    1/sqrt(Fbar(x)) -- with the same ladder; UNDECIDED agrees with
    anything.
    """
    cutoffs = tuple(cutoff_ladder) if cutoff_ladder is not None else DEFAULT_CUTOFFS
    primary = classify_osgood(spec, 1.0, cutoffs, tol).classification
    try:
        companion_ladder = ladder_integral(
            spec._equivalence_density, 0.0, cutoffs,
            finite_ratio=FINITE_RATIO, diverge_ratio=DIVERGE_RATIO,
        )
    except (DomainError, OverflowError):
        return True
    companion = {
        Convergence.CONVERGED: OsgoodClass.FINITE,
        Convergence.DIVERGED: OsgoodClass.INFINITE,
        Convergence.UNDECIDED: OsgoodClass.UNDECIDED,
    }[companion_ladder.verdict]
    if OsgoodClass.UNDECIDED in (primary, companion):
        return True
    return primary is companion


# ---------------------------------------------------------------------------
# Superexponential growth testers (sampled falsification, not proof)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GrowthMap:
    """A positive map with an optional log-domain evaluator.

    `log_fn(x)` returns log g(x) with a *plain* argument; supplying it
    keeps the ratio tests usable where g itself overflows.
    """

    fn: Callable | None = None
    log_fn: Callable | None = None
    label: str = "growth-map"

    def log_at(self, x):
        if self.log_fn is not None:
            return np.asarray(self.log_fn(np.asarray(x, dtype=float)), dtype=float)
        if self.fn is None:
            raise DomainError(f"{self.label}: neither fn nor log_fn supplied")
        with np.errstate(over="ignore"):
            vals = np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log(vals)


DEFAULT_EPSILONS: tuple[float, ...] = (0.25, 1.0, 4.0)
DEFAULT_X_LADDER: tuple[float, ...] = tuple(np.geomspace(4.0, 65536.0, 15))


def _as_growth_map(g) -> GrowthMap:
    if isinstance(g, GrowthMap):
        return g
    return GrowthMap(fn=g)


def _ratio_tail_vanishes(diffs: np.ndarray) -> bool:
    """Do the log-ratios decrease and end below the threshold?"""
    d = diffs[np.isfinite(diffs)]
    if d.size < 5:
        raise DomainError(
            "too few finite samples: supply a log-domain evaluator for this map"
        )
    decreasing = bool(np.all(np.diff(d) <= 1e-9))
    return decreasing and d[-1] < _SUPEREXP_THRESHOLD_LOG and d[-1] <= d[0] - 1.0


def test_superexponential(
    g,
    epsilons: Sequence[float] = DEFAULT_EPSILONS,
    x_ladder: Sequence[float] = DEFAULT_X_LADDER,
) -> bool:
    """Sampled test of g(x - eps)/g(x) -> 0 for every eps.

    True only when, for each eps, the sampled log-ratios are decreasing
    and fall below 1e-3 by the end of the ladder. A constant ratio
    (plain exponentials) or a ratio tending to 1 (powers) fails.
    """
    gm = _as_growth_map(g)
    xs = np.asarray(x_ladder, dtype=float)
    for eps in epsilons:
        mask = xs > eps
        if mask.sum() < 5:
            raise DomainError("x ladder too short for the largest epsilon")
        x = xs[mask]
        diffs = gm.log_at(x - eps) - gm.log_at(x)
        if not _ratio_tail_vanishes(diffs):
            return False
    return True


def _structural_shortcut(spec: NonlinearitySpec) -> str | None:
    """Check the sampled sufficient conditions for preservation.

    Returns a short tag naming the first condition that holds:
    "ratio-increasing" (f(x)/x eventually nondecreasing), "convex"
    (increasing and convex), "regularly-varying" (f(2x)/f(x) settles to a
    positive power), else None.
    """
    xs = np.geomspace(10.0, 1e8, 41)
    with np.errstate(over="ignore"):
        fx = np.asarray(spec.f(xs), dtype=float)
    if np.all(np.isfinite(fx)) and np.all(fx > 0):
        ratio = fx / xs
        tail = ratio[len(ratio) // 2:]
        if np.all(np.diff(tail) >= -1e-12 * tail[:-1]):
            return "ratio-increasing"
        if np.all(np.diff(fx) > 0):
            convex = True
            for x in np.geomspace(10.0, 1e6, 9):
                d = 0.1 * x
                second = spec.f(x + d) - 2.0 * spec.f(x) + spec.f(x - d)
                if second < -1e-9 * spec.f(x):
                    convex = False
                    break
            if convex:
                return "convex"
        alpha = np.log2(np.asarray(spec.f(2.0 * xs), dtype=float) / fx)
        tail_a = alpha[len(alpha) // 2:]
        if tail_a[-1] > 0.05 and np.max(np.abs(tail_a - tail_a[-1])) <= 0.05 * abs(tail_a[-1]):
            return "regularly-varying"
    return None


def superexponential_preservation_report(
    spec: NonlinearitySpec,
    witnesses: Sequence[GrowthMap] | None = None,
    epsilons: Sequence[float] = DEFAULT_EPSILONS,
    x_ladder: Sequence[float] = DEFAULT_X_LADDER,
) -> dict:
    """Evidence that f maps superexponential growth to superexponential growth.

    Returns {"shortcut": tag or None, "witness_ratios": {(label, eps): array
    of log f(g(x-eps)) - log f(g(x))}, "passes": bool}. The witness arrays
    are reported even when a structural shortcut already decides the
    question, so borderline maps can be inspected rather than asserted.
    """
    if witnesses is None:
        witnesses = (GrowthMap(log_fn=lambda x: x * x, label="exp(x^2)"),)
    for w in witnesses:
        if not test_superexponential(w, epsilons, x_ladder):
            raise DomainError(f"witness {w.label} is not superexponential")
    shortcut = _structural_shortcut(spec)
    xs = np.asarray(x_ladder, dtype=float)
    ratios: dict[tuple[str, float], np.ndarray] = {}
    witness_pass = True
    for w in witnesses:
        for eps in epsilons:
            mask = xs > eps
            x = xs[mask]
            diffs = (
                np.asarray(spec.log_f_from_log(w.log_at(x - eps)), dtype=float)
                - np.asarray(spec.log_f_from_log(w.log_at(x)), dtype=float)
            )
            ratios[(w.label, float(eps))] = diffs
            if not _ratio_tail_vanishes(diffs):
                witness_pass = False
    return {
        "shortcut": shortcut,
        "witness_ratios": ratios,
        "passes": shortcut is not None or witness_pass,
    }


def test_preserves_superexponential(
    spec: NonlinearitySpec,
    witnesses: Sequence[GrowthMap] | None = None,
    epsilons: Sequence[float] = DEFAULT_EPSILONS,
    x_ladder: Sequence[float] = DEFAULT_X_LADDER,
) -> bool:
    """Sampled test that f preserves superexponential growth.

    Returns True immediately when a structural sufficient condition holds
    (f(x)/x eventually increasing; increasing and convex; regularly
    varying with positive index), otherwise falls back to direct witness
    ratios f(g(x - eps))/f(g(x)) -> 0.
    """
    report = superexponential_preservation_report(spec, witnesses, epsilons, x_ladder)
    return bool(report["passes"])


# ---------------------------------------------------------------------------
# Functional tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FunctionalTable:
    """Dense samples of Fbar/FB/FU with monotone interpolation.

    A convenience layer for plotting and bulk evaluation; the accuracy-
    critical paths integrate directly. FB columns are absent for
    Osgood-infinite nonlinearities.
    """

    grid: np.ndarray
    fbar_values: np.ndarray
    fu_values: np.ndarray
    fb_values: np.ndarray | None
    _fu_interp: PchipInterpolator = field(repr=False)
    _fbar_interp: PchipInterpolator = field(repr=False)
    _fb_interp: PchipInterpolator | None = field(repr=False)

    @classmethod
    def build(cls, spec: NonlinearitySpec, x_min: float = 1e-2,
              x_max: float = 1e8, points: int = 97) -> "FunctionalTable":
        if not (0.0 < x_min < 1.0 < x_max):
            raise DomainError("table grid must straddle x = 1")
        grid = np.unique(np.concatenate([np.geomspace(x_min, x_max, points), [1.0]]))
        v = np.log(grid)
        fbar_vals = np.asarray(spec.fbar(grid), dtype=float)
        # FU accumulates exactly once over the grid segments.
        fu_vals = np.zeros_like(v)
        i1 = int(np.searchsorted(grid, 1.0))
        for i in range(i1 + 1, len(v)):
            fu_vals[i] = fu_vals[i - 1] + integrate_log_interval(
                spec._osgood_density, v[i - 1], v[i])
        for i in range(i1 - 1, -1, -1):
            fu_vals[i] = fu_vals[i + 1] - integrate_log_interval(
                spec._osgood_density, v[i], v[i + 1])
        fb_vals = None
        fb_interp = None
        if spec.osgood().classification is OsgoodClass.FINITE:
            fb_vals = np.array([spec.fb_from_log(vi) for vi in v])
            if np.any(np.diff(fb_vals) >= 0.0):
                raise QuadratureError("FB table is not strictly decreasing")
            fb_interp = PchipInterpolator(v, fb_vals)
        if np.any(np.diff(fbar_vals) <= 0.0) or np.any(np.diff(fu_vals) <= 0.0):
            raise QuadratureError("functional table lost strict monotonicity")
        return cls(grid=grid, fbar_values=fbar_vals, fu_values=fu_vals,
                   fb_values=fb_vals,
                   _fu_interp=PchipInterpolator(v, fu_vals),
                   _fbar_interp=PchipInterpolator(v, fbar_vals),
                   _fb_interp=fb_interp)

    def fu(self, x):
        return self._fu_interp(np.log(x))

    def fbar(self, x):
        return self._fbar_interp(np.log(x))

    def fb(self, x):
        if self._fb_interp is None:
            raise DomainError("FB is not tabulated for an Osgood-infinite spec")
        return self._fb_interp(np.log(x))

    def complement_residual(self) -> float:
        """max |FU(x) + FB(x) - FB(1)| over the grid (identity check)."""
        if self.fb_values is None:
            raise DomainError("FB is not tabulated for an Osgood-infinite spec")
        fb1 = self.fb_values[int(np.searchsorted(self.grid, 1.0))]
        return float(np.max(np.abs(self.fu_values + self.fb_values - fb1)))

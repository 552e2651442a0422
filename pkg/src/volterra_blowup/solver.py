"""Adaptive product-integration solver for forced nonlinear memory equations.

The equation is

    x'(t) = h(t) + integral over [0, t] of w(t - s) f(x(s)) ds,  x(0) > 0.

Discretization: second-order product-trapezoid in time. The memory
integral is evaluated on the stored (nonuniform) grid by trapezoidal
product quadrature; the implicit current-point contribution
w(0) * (dt/2) * f(x_new) is resolved by damped fixed-point iteration.
Step sizes are controlled by step doubling (one full step against two
half steps) measured against `rel_tol`; the two half-step nodes are the
ones committed, so the stored grid is exactly the grid the convolution
saw.

Blow-up handling: the solver records the times at which x first crosses
x0 * R^n (R = `crossing_ratio`). When x exceeds `blowup_threshold`, or the
step pins at `min_step` with x' increasing, the crossing times are
Aitken-accelerated; a contracting acceleration with a limit beyond the
current time is declared BlowUpDetected(T_est, T_err). A *divergent*
acceleration is the signature of a global superexponential solution that
merely grew past the threshold, so the solver raises the threshold and
continues rather than mislabeling the run.

Overflow handling: once log x (or log f(x)) nears float range the solver
switches to integrating log x with the same product-trapezoid weights
combined by log-sum-exp. The switch requires log-domain evaluators on the
nonlinearity (all catalog members have them) and zero forcing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .errors import (
    DivergentAcceleration,
    DomainError,
    InsufficientCrossings,
)
from .kernels import ForcingSpec, KernelSpec, zero_forcing
from .nonlinearity import NonlinearitySpec
from .quadrature import aitken

__all__ = [
    "SolverConfig",
    "Trajectory",
    "ReachedHorizon",
    "BlowUpDetected",
    "Aborted",
    "solve",
    "convolution_term",
    "estimate_blowup_time",
    "residual_check",
    "trajectory_to_csv",
    "crossings_to_csv",
]

# Representation switch thresholds: log x beyond which x leaves the range
# where f(x) and the convolution sums are safely representable.
_LOG_SWITCH = 460.0      # x ~ 1e200
_LOGF_SWITCH = 630.0     # f(x) ~ 1e273

ABORT_NONCONVERGENT = "non-convergent implicit step at minimum step size"
ABORT_POSITIVITY = "positivity loss (x reached zero)"
ABORT_OVERFLOW = "state overflow without log-domain evaluators or with nonzero forcing"
ABORT_NODE_BUDGET = "node budget exceeded"
ABORT_COLLAPSE = "step collapse without a geometric blow-up signature"

_SAFETY = 0.7
_GROW_CAP = 2.0
_SHRINK_CAP = 0.2
_MAX_FIXED_POINT = 8


@dataclass(frozen=True)
class SolverConfig:
    initial_step: float = 1e-3
    min_step: float = 1e-12
    max_step: float = 1.0
    rel_tol: float = 1e-6
    blowup_threshold: float = 1e12
    crossing_ratio: float = 2.0
    t_end: float = 10.0
    fixed_step: bool = False
    force_log_space: bool = False
    max_nodes: int = 4_000_000

    def validate(self) -> None:
        if not (0.0 < self.min_step <= self.initial_step <= self.max_step):
            raise DomainError("steps must satisfy 0 < min <= initial <= max")
        if not (0.0 < self.rel_tol <= 1e-2):
            raise DomainError("rel_tol must lie in (0, 1e-2]")
        if self.crossing_ratio <= 1.0:
            raise DomainError("crossing_ratio must exceed 1")
        if self.t_end < 0.0:
            raise DomainError("t_end must be nonnegative")


@dataclass(frozen=True)
class ReachedHorizon:
    t_end: float


@dataclass(frozen=True)
class BlowUpDetected:
    t_est: float
    t_err: float


@dataclass(frozen=True)
class Aborted:
    reason: str


Status = Union[ReachedHorizon, BlowUpDetected, Aborted]


@dataclass
class Trajectory:
    """A computed solution path.

    `values` equals the stepped x in the linear phase and +inf where the
    solution outgrew float range; `log_values` stays exact throughout.
    `crossings` holds (level, time) pairs at which x first exceeded
    x0 * R^n.
    """

    times: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    log_values: np.ndarray
    log_derivs: np.ndarray       # d(log x)/dt
    f_values: np.ndarray         # f(x) on the grid (inf once overflowed)
    status: Status
    crossings: list[tuple[float, float]]
    config: SolverConfig
    problem: str = "volterra"
    overflowed: bool = False

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.times, prepend=self.times[0])

    def value_log_at(self, t) -> np.ndarray:
        """log x interpolated on the stored grid."""
        return np.interp(np.asarray(t, dtype=float), self.times, self.log_values)


class _FixedPointFail(Exception):
    """Implicit iteration did not contract at this step size."""


class _PositivityLoss(Exception):
    """The iterate left (0, inf); only possible with negative forcing."""


# ---------------------------------------------------------------------------
# History storage
# ---------------------------------------------------------------------------

class _History:
    """Grow-only arrays for the committed grid, in linear and log form."""

    __slots__ = ("t", "x", "lx", "dx", "dlx", "fv", "lfv", "fmax", "lfmax",
                 "n", "log_mode")

    _ARRAYS = ("t", "x", "lx", "dx", "dlx", "fv", "lfv", "fmax", "lfmax")

    def __init__(self, cap: int = 4096):
        for name in self._ARRAYS:
            setattr(self, name, np.empty(cap, dtype=float))
        self.n = 0
        self.log_mode = False

    def _grow(self) -> None:
        for name in self._ARRAYS:
            arr = getattr(self, name)
            new = np.empty(2 * arr.size, dtype=float)
            new[: self.n] = arr[: self.n]
            setattr(self, name, new)

    def append_linear(self, t: float, x: float, dx: float, fval: float) -> None:
        if self.n == self.t.size:
            self._grow()
        i = self.n
        self.t[i] = t
        self.x[i] = x
        self.lx[i] = math.log(x)
        self.dx[i] = dx
        self.dlx[i] = dx / x
        self.fv[i] = fval
        self.lfv[i] = math.log(fval) if fval > 0.0 else -math.inf
        self.fmax[i] = max(self.fmax[i - 1] if i else 0.0, fval)
        self.lfmax[i] = max(self.lfmax[i - 1] if i else -math.inf, self.lfv[i])
        self.n = i + 1

    def append_log(self, t: float, lx: float, dlx: float, lfval: float) -> None:
        if self.n == self.t.size:
            self._grow()
        i = self.n
        self.t[i] = t
        self.lx[i] = lx
        self.dlx[i] = dlx
        self.lfv[i] = lfval
        self.x[i] = math.exp(lx) if lx < 709.0 else math.inf
        self.dx[i] = self.x[i] * dlx if self.x[i] < 1e300 else math.inf
        self.fv[i] = math.exp(lfval) if lfval < 709.0 else math.inf
        self.fmax[i] = max(self.fmax[i - 1] if i else 0.0, self.fv[i])
        self.lfmax[i] = max(self.lfmax[i - 1] if i else -math.inf, lfval)
        self.n = i + 1

    def pop(self, k: int) -> None:
        self.n -= k


def _trapezoid_coeffs(s: np.ndarray, t_new: float) -> np.ndarray:
    """Composite trapezoid node weights on the grid {s_0..s_m-1, t_new}.

    The weight of the node at t_new itself, (t_new - s_m-1)/2, is left to
    the caller because that node is the implicit unknown.
    """
    m = s.size
    c = np.empty(m, dtype=float)
    if m == 1:
        c[0] = 0.5 * (t_new - s[0])
        return c
    c[0] = 0.5 * (s[1] - s[0])
    if m > 2:
        c[1:-1] = 0.5 * (s[2:] - s[:-2])
    c[-1] = 0.5 * (s[-1] - s[-2]) + 0.5 * (t_new - s[-1])
    return c


class _VolterraConv:
    """Product-trapezoid memory integral over the stored history.

    `linear_parts(t)` returns (base, coeff) with I(t) = base + coeff * f_new;
    `log_parts` is the log-space twin combined by log-sum-exp. History
    older than window index j0 is dropped only when the kernel supplies an
    L1 tail bound and the dropped mass is provably below `trunc_frac`
    times the current integral magnitude.
    """

    def __init__(self, kernel: KernelSpec, hist: _History, rel_tol: float):
        self.kernel = kernel
        self.hist = hist
        self.j0 = 0
        self.trunc_frac = 1e-3 * rel_tol
        self.i_mag = 0.0
        self.log_i_mag = -math.inf
        self._cache: dict = {}
        self._cache_log: dict = {}

    def note_accepted(self, value: float, log_value: float) -> None:
        self.i_mag = value
        self.log_i_mag = log_value
        self._cache.clear()
        self._cache_log.clear()

    def advance_window(self, t_new: float) -> None:
        hist = self.hist
        if self.kernel.l1_tail_fn is None:
            return
        log_frac = math.log(self.trunc_frac)
        while hist.n - self.j0 >= 16:
            j = self.j0 + 1
            bound = self.kernel.l1_tail(t_new - hist.t[j])
            if bound is None or not math.isfinite(bound):
                return
            if hist.log_mode:
                if bound > 0.0:
                    if not math.isfinite(self.log_i_mag):
                        return
                    if math.log(bound) + hist.lfmax[j] > self.log_i_mag + log_frac:
                        return
            else:
                if self.i_mag <= 0.0:
                    return
                if bound * hist.fmax[j] > self.trunc_frac * self.i_mag:
                    return
            self.j0 = j

    def linear_parts(self, t_new: float) -> tuple[float, float]:
        hist = self.hist
        key = (t_new, hist.n, self.j0)
        got = self._cache.get(key)
        if got is not None:
            return got
        s = hist.t[self.j0: hist.n]
        fv = hist.fv[self.j0: hist.n]
        kv = self.kernel.wn(t_new - s)
        c = _trapezoid_coeffs(s, t_new)
        base = float(np.dot(c, kv * fv))
        coeff = 0.5 * self.kernel.w0 * (t_new - s[-1])
        self._cache[key] = (base, coeff)
        return base, coeff

    def log_parts(self, t_new: float) -> tuple[float, float]:
        hist = self.hist
        key = (t_new, hist.n, self.j0)
        got = self._cache_log.get(key)
        if got is not None:
            return got
        s = hist.t[self.j0: hist.n]
        lfv = hist.lfv[self.j0: hist.n]
        with np.errstate(divide="ignore"):
            terms = (np.log(_trapezoid_coeffs(s, t_new))
                     + np.log(self.kernel.wn(t_new - s)) + lfv)
        m = float(np.max(terms))
        if math.isfinite(m):
            log_base = m + math.log(float(np.sum(np.exp(terms - m))))
        else:
            log_base = -math.inf
        w0 = self.kernel.w0
        log_coeff = (math.log(0.5 * w0 * (t_new - s[-1]))
                     if w0 > 0.0 and t_new > s[-1] else -math.inf)
        self._cache_log[key] = (log_base, log_coeff)
        return log_base, log_coeff


# ---------------------------------------------------------------------------
# Implicit node resolution
# ---------------------------------------------------------------------------

def _implicit_linear(hist: _History, conv, forcing: ForcingSpec,
                     nl: NonlinearitySpec, t_new: float, rel_tol: float):
    """Solve x = const + k f(x) at t_new; returns (x, dx, f(x))."""
    i = hist.n - 1
    x_prev, dx_prev, t_prev = hist.x[i], hist.dx[i], hist.t[i]
    h = t_new - t_prev
    h_t = float(forcing.h_fn(np.asarray(t_new, dtype=float)))
    base, coeff = conv.linear_parts(t_new)
    const = x_prev + 0.5 * h * (dx_prev + h_t + base)
    k = 0.5 * h * coeff
    x = max(x_prev + h * dx_prev, 1e-300)
    tol = 0.02 * rel_tol * max(abs(x_prev), 1e-300)
    with np.errstate(over="ignore"):
        fval = float(nl.fn(np.asarray(x, dtype=float)))
    for it in range(_MAX_FIXED_POINT):
        if not math.isfinite(fval):
            raise _FixedPointFail
        x_next = const + k * fval
        if x_next <= 0.0:
            raise _PositivityLoss
        if it >= 4:
            x_next = 0.5 * (x + x_next)
        done = abs(x_next - x) <= tol
        x = x_next
        with np.errstate(over="ignore"):
            fval = float(nl.fn(np.asarray(x, dtype=float)))
        if done:
            if not math.isfinite(fval):
                raise _FixedPointFail
            dx = h_t + base + coeff * fval
            return x, dx, fval
    raise _FixedPointFail


def _implicit_log(hist: _History, conv, nl: NonlinearitySpec,
                  t_new: float, rel_tol: float):
    """Log-space twin: solve lx = const + (h/2) exp(logI(lx) - lx)."""
    i = hist.n - 1
    lx_prev, dlx_prev, t_prev = hist.lx[i], hist.dlx[i], hist.t[i]
    h = t_new - t_prev
    log_base, log_coeff = conv.log_parts(t_new)
    const = lx_prev + 0.5 * h * dlx_prev
    lx = lx_prev + h * dlx_prev
    tol = 0.02 * rel_tol

    def log_i_of(lf: float) -> float:
        term = log_coeff + lf
        m = max(log_base, term)
        if not math.isfinite(m):
            return -math.inf
        return m + math.log(math.exp(log_base - m) + math.exp(term - m))

    lf = float(nl.log_f_fn(np.asarray(lx, dtype=float)))
    for it in range(_MAX_FIXED_POINT):
        if not math.isfinite(lf):
            raise _FixedPointFail
        log_i = log_i_of(lf)
        dlx = math.exp(log_i - lx) if math.isfinite(log_i) else 0.0
        lx_next = const + 0.5 * h * dlx
        if it >= 4:
            lx_next = 0.5 * (lx + lx_next)
        done = abs(lx_next - lx) <= tol
        lx = lx_next
        lf = float(nl.log_f_fn(np.asarray(lx, dtype=float)))
        if done:
            log_i = log_i_of(lf)
            dlx = math.exp(log_i - lx) if math.isfinite(log_i) else 0.0
            return lx, dlx, lf
    raise _FixedPointFail


# ---------------------------------------------------------------------------
# Blow-up bookkeeping
# ---------------------------------------------------------------------------

class _CrossingWatch:
    """Times at which log x first exceeds log x0 + n log R (n = 1, 2, ...)."""

    def __init__(self, lx0: float, ratio: float):
        self.lx0 = lx0
        self.log_r = math.log(ratio)
        self.next_n = 1
        self.crossings: list[tuple[float, float]] = []

    def observe(self, hist: _History, i_from: int) -> None:
        for i in range(max(i_from, 1), hist.n):
            la, lb = hist.lx[i - 1], hist.lx[i]
            ta, tb = hist.t[i - 1], hist.t[i]
            while lb >= self.lx0 + self.next_n * self.log_r:
                target = self.lx0 + self.next_n * self.log_r
                t_c = ta + (target - la) * (tb - ta) / (lb - la) if lb > la else tb
                self.crossings.append((target, t_c))
                self.next_n += 1


def _accelerate_crossings(times: Sequence[float], t_last: float) -> tuple[float, float]:
    if len(times) < 6:
        raise InsufficientCrossings(
            f"blow-up estimation needs >= 6 crossings, have {len(times)}"
        )
    tail = list(times[-20:])
    # A genuine blow-up crosses geometric levels at geometrically shrinking
    # intervals; ratios near 1 are the signature of global growth.
    inc = np.diff(tail[-9:])
    if np.any(inc <= 0.0):
        raise DivergentAcceleration("crossing increments are not decreasing")
    ratios = inc[1:] / inc[:-1]
    if float(np.mean(ratios)) >= 0.97 or float(np.max(ratios)) >= 1.0:
        raise DivergentAcceleration(
            "crossing increments do not decay geometrically (not a blow-up)"
        )
    limit, err, diverged = aitken(tail, sweeps=2)
    if diverged:
        raise DivergentAcceleration("crossing times do not accelerate to a limit")
    if not math.isfinite(limit) or not limit > t_last:
        raise DivergentAcceleration(
            f"accelerated blow-up time {limit:.6g} does not lie beyond t = {t_last:.6g}"
        )
    err = float(max(err, 1e-15 * max(1.0, abs(limit))))
    if err > 0.25 * (limit - t_last):
        raise DivergentAcceleration(
            f"blow-up time estimate too uncertain (err {err:.3g} vs margin "
            f"{limit - t_last:.3g})"
        )
    return float(limit), err


def estimate_blowup_time(traj: Trajectory, config: SolverConfig | None = None) -> tuple[float, float]:
    """(T_est, T_err) by Aitken acceleration of the crossing-time records.

    Raises InsufficientCrossings (< 6 recorded) or DivergentAcceleration
    (the crossing times do not contract toward a finite limit beyond the
    last grid time).
    """
    return _accelerate_crossings([t for _, t in traj.crossings],
                                 float(traj.times[-1]))


# ---------------------------------------------------------------------------
# The adaptive loop
# ---------------------------------------------------------------------------

def _advance(hist: _History, conv, forcing: ForcingSpec, nl: NonlinearitySpec,
             cfg: SolverConfig, watch: _CrossingWatch) -> Status:
    t = hist.t[hist.n - 1]
    h = min(cfg.initial_step, cfg.max_step, max(cfg.t_end - t, cfg.min_step))
    log_threshold = (math.log(cfg.blowup_threshold)
                     if math.isfinite(cfg.blowup_threshold) else math.inf)
    minstep_streak = 0
    can_log = forcing.is_zero
    if cfg.force_log_space:
        hist.log_mode = True
    # Per-step acceptance runs a decade below rel_tol so that accumulated
    # drift (what the integrated-form residual sees) stays near rel_tol.
    tol = 0.1 * cfg.rel_tol

    def step_once(t0: float, step: float) -> None:
        t_new = t0 + step
        if hist.log_mode:
            lx, dlx, lf = _implicit_log(hist, conv, nl, t_new, cfg.rel_tol)
            hist.append_log(t_new, lx, dlx, lf)
        else:
            x, dx, fval = _implicit_linear(hist, conv, forcing, nl, t_new, cfg.rel_tol)
            hist.append_linear(t_new, x, dx, fval)

    while True:
        if t >= cfg.t_end or cfg.t_end - t <= 1e-15 * cfg.t_end:
            return ReachedHorizon(cfg.t_end)
        if hist.n + 2 > cfg.max_nodes:
            return Aborted(ABORT_NODE_BUDGET)
        h = min(max(h, cfg.min_step), cfg.max_step)
        if t + h >= cfg.t_end:
            h = cfg.t_end - t
        conv.advance_window(t + h)
        n_before = hist.n

        if cfg.fixed_step:
            try:
                step_once(t, h)
            except _PositivityLoss:
                return Aborted(ABORT_POSITIVITY)
            except (_FixedPointFail, DomainError, OverflowError):
                return Aborted(ABORT_NONCONVERGENT)
            err_ok = True
        else:
            # step-doubling control: one h-step (discarded) vs two h/2-steps
            while True:
                at_floor = h <= cfg.min_step * 1.000001
                try:
                    step_once(t, h)
                    coarse = hist.lx[hist.n - 1] if hist.log_mode else hist.x[hist.n - 1]
                    hist.pop(1)
                    step_once(t, 0.5 * h)
                    step_once(t + 0.5 * h, 0.5 * h)
                except _PositivityLoss:
                    hist.pop(hist.n - n_before)
                    if at_floor:
                        return Aborted(ABORT_POSITIVITY)
                    h = max(0.5 * h, cfg.min_step)
                    continue
                except (_FixedPointFail, DomainError, OverflowError):
                    hist.pop(hist.n - n_before)
                    if at_floor:
                        return Aborted(ABORT_NONCONVERGENT)
                    h = max(0.5 * h, cfg.min_step)
                    continue
                fine = hist.lx[hist.n - 1] if hist.log_mode else hist.x[hist.n - 1]
                err = abs(fine - coarse)
                if hist.log_mode:
                    # absolute error on log x == relative error on x
                    scale = 1.0
                else:
                    scale = max(abs(fine), abs(hist.x[n_before - 1]))
                err_ok = err <= tol * scale
                if err_ok or at_floor:
                    if err > 0.0:
                        h_next = h * min(_GROW_CAP, max(
                            _SHRINK_CAP,
                            _SAFETY * (tol * scale / err) ** (1.0 / 3.0)))
                    else:
                        h_next = h * _GROW_CAP
                    break
                hist.pop(hist.n - n_before)
                h = max(cfg.min_step,
                        h * max(_SHRINK_CAP,
                                _SAFETY * (tol * scale / err) ** (1.0 / 3.0)))

        i_last = hist.n - 1
        t = hist.t[i_last]
        if hist.log_mode:
            log_conv = hist.lx[i_last] + math.log(max(hist.dlx[i_last], 1e-300))
            conv.note_accepted(math.inf, log_conv)
        else:
            conv_val = hist.dx[i_last] - float(forcing.h_fn(np.asarray(t, dtype=float)))
            conv.note_accepted(abs(conv_val), -math.inf)
        watch.observe(hist, n_before)

        if not cfg.fixed_step:
            increasing = (hist.dlx[i_last] >= hist.dlx[n_before - 1]) if hist.log_mode \
                else (hist.dx[i_last] >= hist.dx[n_before - 1])
            pinned = (not err_ok) and increasing
            minstep_streak = minstep_streak + 1 if pinned else 0
            h = h_next

        threshold_hit = hist.lx[i_last] >= log_threshold
        if threshold_hit or minstep_streak >= 10:
            try:
                t_est, t_err = _accelerate_crossings(
                    [tc for _, tc in watch.crossings], t)
                return BlowUpDetected(t_est, t_err)
            except InsufficientCrossings:
                if minstep_streak >= 10:
                    return Aborted(ABORT_COLLAPSE)
                log_threshold += 6.0 * watch.log_r
            except DivergentAcceleration:
                if minstep_streak >= 10:
                    return Aborted(ABORT_COLLAPSE)
                # Non-summable crossing increments: global superexponential
                # growth, not blow-up. Raise the threshold and keep going.
                log_threshold += 20.0 * watch.log_r

        if not hist.log_mode and (hist.lx[i_last] > _LOG_SWITCH
                                  or hist.lfv[i_last] > _LOGF_SWITCH):
            if not can_log:
                return Aborted(ABORT_OVERFLOW)
            try:
                nl.log_f_fn(np.asarray(hist.lx[i_last], dtype=float))
            except (DomainError, OverflowError):
                return Aborted(ABORT_OVERFLOW)
            hist.log_mode = True


def solve(kernel: KernelSpec, nonlinearity: NonlinearitySpec,
          forcing: ForcingSpec | None, x0: float,
          config: SolverConfig) -> Trajectory:
    """Integrate the forced memory equation from x(0) = x0.

    Returns a Trajectory whose status is ReachedHorizon, BlowUpDetected
    (with the Aitken-accelerated blow-up time and its error estimate) or
    Aborted.
    """
    config.validate()
    if x0 <= 0.0:
        raise DomainError("x0 must be positive")
    forcing = forcing if forcing is not None else zero_forcing()
    if config.force_log_space and not forcing.is_zero:
        raise DomainError("log-space integration supports zero forcing only")
    hist = _History()
    f0 = float(nonlinearity.fn(np.asarray(x0, dtype=float)))
    dx0 = float(forcing.h_fn(np.asarray(0.0)))  # memory integral is empty at t = 0
    hist.append_linear(0.0, x0, dx0, f0)
    conv = _VolterraConv(kernel, hist, config.rel_tol)
    watch = _CrossingWatch(math.log(x0), config.crossing_ratio)
    status = _advance(hist, conv, forcing, nonlinearity, config, watch)
    return _trajectory_from_history(hist, status, watch, config, problem="volterra")


def _trajectory_from_history(hist: _History, status: Status,
                             watch: _CrossingWatch, config: SolverConfig,
                             problem: str, start: int = 0) -> Trajectory:
    n = hist.n
    sl = slice(start, n)
    lx = hist.lx[sl].copy()
    overflowed = bool(np.any(lx >= 709.0))
    if overflowed:
        with np.errstate(over="ignore"):
            values = np.where(lx < 709.0, np.exp(np.minimum(lx, 708.0)), np.inf)
    else:
        values = hist.x[sl].copy()
    crossings = [(math.exp(lvl) if lvl < 709.0 else math.inf, tc)
                 for lvl, tc in watch.crossings]
    return Trajectory(
        times=hist.t[sl].copy(), values=values, derivs=hist.dx[sl].copy(),
        log_values=lx, log_derivs=hist.dlx[sl].copy(),
        f_values=hist.fv[sl].copy(), status=status, crossings=crossings,
        config=config, problem=problem, overflowed=overflowed,
    )


# ---------------------------------------------------------------------------
# Standalone product quadrature and consistency checks
# ---------------------------------------------------------------------------

def convolution_term(traj: Trajectory, kernel: KernelSpec,
                     nonlinearity: NonlinearitySpec, t: float) -> float:
    """Product-trapezoid value of the memory integral at time t.

    Mirrors the solver's quadrature on the trajectory's own grid; t may
    fall between nodes (the last panel is split with an interpolated
    integrand value). Empty history (t = 0) integrates to 0.
    """
    times = traj.times
    if t < times[0] - 1e-12 or t > times[-1] + 1e-12:
        raise DomainError("t outside the stored trajectory")
    if t <= times[0]:
        return 0.0
    fv = traj.f_values
    i = int(np.searchsorted(times, t, side="left"))
    if i < times.size and times[i] == t:
        s = times[: i]
        f_t = fv[i]
    else:
        s = times[: i]
        frac = (t - times[i - 1]) / (times[i] - times[i - 1])
        f_t = fv[i - 1] + frac * (fv[i] - fv[i - 1])
    if s.size == 0:
        return 0.0
    c = _trapezoid_coeffs(s, t)
    kv = kernel.wn(t - s)
    return float(np.dot(c, kv * fv[: s.size]) + 0.5 * kernel.w0 * (t - s[-1]) * f_t)


def residual_check(traj: Trajectory, kernel: KernelSpec,
                   nonlinearity: NonlinearitySpec, forcing: ForcingSpec | None,
                   x0: float, max_points: int = 2000) -> float:
    """Max abs residual of the integrated form on the stored grid.

    Verifies x(t) = x0 + H(t) + integral of W(t-s) f(x(s)) ds with W the
    cumulative kernel, via the same product-trapezoid rule (the node at
    s = t carries weight W(0) = 0 and drops out). Applies to horizon runs
    whose values stayed in float range.
    """
    if not isinstance(traj.status, ReachedHorizon):
        raise DomainError("residual check applies to horizon runs")
    if traj.overflowed:
        raise DomainError("residual check needs values within float range")
    forcing = forcing if forcing is not None else zero_forcing()
    times, values, fv = traj.times, traj.values, traj.f_values
    n = times.size
    if n == 1:
        return 0.0
    idx = np.arange(1, n) if n <= max_points else np.unique(
        np.linspace(1, n - 1, max_points).astype(int))
    worst = 0.0
    for i in idx:
        s = times[: i]
        c = _trapezoid_coeffs(s, times[i])
        wv = kernel.cumulative(times[i] - s)
        q = float(np.dot(c, wv * fv[: i]))
        resid = x0 + float(forcing.H_fn(np.asarray(times[i], dtype=float))) + q - values[i]
        worst = max(worst, abs(resid))
    return worst


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------

def trajectory_to_csv(traj: Trajectory, path: str | Path,
                      meta: dict | None = None) -> None:
    """Write `t,x,dx,step` rows plus a status footer comment.

    Runs that outgrew float range gain a trailing log_x column so the
    data stays usable past overflow.
    """
    lines = []
    meta = meta or {}
    meta_str = " ".join(f"{k}={v}" for k, v in meta.items())
    lines.append(f"# problem={traj.problem}" + (f" {meta_str}" if meta_str else ""))
    steps = traj.steps
    if traj.overflowed:
        lines.append("t,x,dx,step,log_x")
        for i in range(traj.times.size):
            lines.append(f"{traj.times[i]:.17g},{traj.values[i]:.17g},"
                         f"{traj.derivs[i]:.17g},{steps[i]:.17g},{traj.log_values[i]:.17g}")
    else:
        lines.append("t,x,dx,step")
        for i in range(traj.times.size):
            lines.append(f"{traj.times[i]:.17g},{traj.values[i]:.17g},"
                         f"{traj.derivs[i]:.17g},{steps[i]:.17g}")
    status = traj.status
    if isinstance(status, BlowUpDetected):
        lines.append(f"# status=blowup T_est={status.t_est:.17g} T_err={status.t_err:.3g}")
    elif isinstance(status, ReachedHorizon):
        lines.append(f"# status=horizon t_end={status.t_end:.17g}")
    else:
        lines.append(f"# status=aborted reason={status.reason}")
    Path(path).write_text("\n".join(lines) + "\n")


def crossings_to_csv(traj: Trajectory, path: str | Path) -> None:
    lines = ["level,t"]
    for level, tc in traj.crossings:
        lines.append(f"{level:.17g},{tc:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")

"""Independent comparison solvers used as oracles for the memory equation.

Three auxiliary problems bound or approximate the full equation and have
their own growth laws, which makes them useful cross-checks:

  * bounded-delay equations with a constant gain or a kernel weight,
        z'(t) = C * integral of f(z) over [t - delta, t]
        y'(t) = integral of w(t - s) f(y(s)) ds over [t - delta, t],
    integrated by the same product-trapezoid machinery over a sliding
    window (global solutions satisfy FU(z(t))/t -> sqrt(2C));
  * the second-order ODE z'' = f(z), whose energy identity
    (z')^2/2 - Fbar(z) = const is an exact invariant;
  * the auxiliary IVP y' = sqrt(Fbar(y)), y(0) = 1, whose solution is
    exactly the inverse of FU (so FU(y(t)) = t identically).

The ODE problems use adaptive RK4 with the same step-doubling control
and blow-up detection as the main solver; the auxiliary IVP integrates
log y throughout, which keeps it usable at superexponential scales.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import DivergentAcceleration, DomainError, InsufficientCrossings
from .kernels import KernelSpec, zero_forcing
from .nonlinearity import NonlinearitySpec, OsgoodClass
from .solver import (
    ABORT_COLLAPSE,
    ABORT_NODE_BUDGET,
    ABORT_NONCONVERGENT,
    Aborted,
    BlowUpDetected,
    ReachedHorizon,
    SolverConfig,
    Status,
    Trajectory,
    _accelerate_crossings,
    _advance,
    _CrossingWatch,
    _History,
    _trajectory_from_history,
    _trapezoid_coeffs,
)

__all__ = [
    "DelayProblem",
    "solve_delay",
    "solve_delay_kernel",
    "solve_second_order",
    "solve_aux_ivp",
]


@dataclass(frozen=True)
class DelayProblem:
    """A bounded-delay comparison problem.

    Exactly one of `gain` (constant weight C) or `kernel` (weight
    w(t - s)) must be given. `psi` is the positive initial function on
    [-delta, 0].
    """

    delta: float
    psi: Callable
    gain: float | None = None
    kernel: KernelSpec | None = None

    def validate(self) -> None:
        if self.delta <= 0.0:
            raise DomainError("delay window delta must be positive")
        if (self.gain is None) == (self.kernel is None):
            raise DomainError("specify exactly one of gain or kernel")
        if self.gain is not None and self.gain <= 0.0:
            raise DomainError("gain must be positive")
        ts = np.linspace(-self.delta, 0.0, 65)
        vals = np.asarray([float(self.psi(t)) for t in ts])
        if np.any(~np.isfinite(vals)) or np.any(vals <= 0.0):
            raise DomainError("initial function psi must be positive and finite")


class _SlidingConv:
    """Product-trapezoid integral over the sliding window [t - delta, t].

    Same (base, coeff) interface as the full-history integrator. The
    window edge t - delta falls inside a stored panel; the integrand
    there is interpolated linearly, which keeps second order. Requires
    steps <= delta so the edge never outruns the stored grid.
    """

    def __init__(self, hist: _History, delta: float,
                 gain: float | None, kernel: KernelSpec | None):
        self.hist = hist
        self.delta = delta
        self.gain = gain
        self.kernel = kernel
        self._cache: dict = {}
        self._cache_log: dict = {}

    @property
    def w_at_zero(self) -> float:
        return self.gain if self.gain is not None else self.kernel.w0

    def _weights(self, u: np.ndarray) -> np.ndarray:
        if self.gain is not None:
            return np.full_like(u, self.gain)
        return np.asarray(self.kernel.wn(u), dtype=float)

    def note_accepted(self, value: float, log_value: float) -> None:
        self._cache.clear()
        self._cache_log.clear()

    def advance_window(self, t_new: float) -> None:
        pass  # the window is recomputed exactly at every evaluation

    def _grid(self, t_new: float):
        hist = self.hist
        lo = t_new - self.delta
        n = hist.n
        if lo < hist.t[0] - 1e-12:
            raise DomainError("window extends before the stored pre-history")
        lo = max(lo, hist.t[0])
        j = int(np.searchsorted(hist.t[:n], lo, side="right"))
        if j >= n:
            raise DomainError("step exceeded the delay window")
        frac = ((lo - hist.t[j - 1]) / (hist.t[j] - hist.t[j - 1])
                if j >= 1 and hist.t[j] > hist.t[j - 1] else 0.0)
        return lo, j, frac

    def linear_parts(self, t_new: float) -> tuple[float, float]:
        key = (t_new, self.hist.n)
        got = self._cache.get(key)
        if got is not None:
            return got
        hist = self.hist
        lo, j, frac = self._grid(t_new)
        f_edge = hist.fv[j - 1] + frac * (hist.fv[j] - hist.fv[j - 1])
        s = np.concatenate([[lo], hist.t[j: hist.n]])
        fvals = np.concatenate([[f_edge], hist.fv[j: hist.n]])
        c = _trapezoid_coeffs(s, t_new)
        kv = self._weights(t_new - s)
        base = float(np.dot(c, kv * fvals))
        coeff = 0.5 * self.w_at_zero * (t_new - s[-1])
        self._cache[key] = (base, coeff)
        return base, coeff

    def log_parts(self, t_new: float) -> tuple[float, float]:
        key = (t_new, self.hist.n)
        got = self._cache_log.get(key)
        if got is not None:
            return got
        hist = self.hist
        lo, j, frac = self._grid(t_new)
        lf_edge = hist.lfv[j - 1] + frac * (hist.lfv[j] - hist.lfv[j - 1])
        s = np.concatenate([[lo], hist.t[j: hist.n]])
        lfvals = np.concatenate([[lf_edge], hist.lfv[j: hist.n]])
        with np.errstate(divide="ignore"):
            terms = (np.log(_trapezoid_coeffs(s, t_new))
                     + np.log(self._weights(t_new - s)) + lfvals)
        m = float(np.max(terms))
        log_base = (m + math.log(float(np.sum(np.exp(terms - m))))
                    if math.isfinite(m) else -math.inf)
        w0 = self.w_at_zero
        log_coeff = (math.log(0.5 * w0 * (t_new - s[-1]))
                     if w0 > 0.0 and t_new > s[-1] else -math.inf)
        self._cache_log[key] = (log_base, log_coeff)
        return log_base, log_coeff


def _solve_delay_problem(problem: DelayProblem, nonlinearity: NonlinearitySpec,
                         config: SolverConfig, problem_tag: str) -> Trajectory:
    problem.validate()
    config.validate()
    cfg = replace(config,
                  max_step=min(config.max_step, problem.delta),
                  initial_step=min(config.initial_step, problem.delta,
                                   config.max_step))
    hist = _History()
    npre = int(min(4097, max(65, math.ceil(problem.delta / cfg.initial_step) + 1)))
    ts_pre = np.linspace(-problem.delta, 0.0, npre)
    psi_vals = np.asarray([float(problem.psi(t)) for t in ts_pre])
    f_vals = np.asarray(nonlinearity.fn(psi_vals), dtype=float)
    for t, x, fv in zip(ts_pre, psi_vals, f_vals):
        hist.append_linear(float(t), float(x), 0.0, float(fv))
    conv = _SlidingConv(hist, problem.delta, problem.gain, problem.kernel)
    # derivative at t = 0 over the full initial window
    c = _trapezoid_coeffs(ts_pre[:-1], 0.0)
    kv = conv._weights(0.0 - ts_pre[:-1])
    dz0 = float(np.dot(c, kv * f_vals[:-1]) + 0.5 * conv.w_at_zero
                * (0.0 - ts_pre[-2]) * 0.0)
    # _trapezoid_coeffs already charges the last stored panel; add the
    # endpoint value with its own trapezoid weight.
    dz0 += 0.5 * conv.w_at_zero * (ts_pre[-1] - ts_pre[-2]) * f_vals[-1]
    i0 = hist.n - 1
    hist.dx[i0] = dz0
    hist.dlx[i0] = dz0 / psi_vals[-1]
    watch = _CrossingWatch(math.log(psi_vals[-1]), cfg.crossing_ratio)
    status = _advance(hist, conv, zero_forcing(), nonlinearity, cfg, watch)
    return _trajectory_from_history(hist, status, watch, cfg,
                                    problem=problem_tag, start=npre - 1)


def solve_delay(problem: DelayProblem, nonlinearity: NonlinearitySpec,
                config: SolverConfig) -> Trajectory:
    """Integrate z'(t) = C * integral of f(z) over [t - delta, t]."""
    if problem.gain is None:
        raise DomainError("solve_delay needs a gain; use solve_delay_kernel")
    return _solve_delay_problem(problem, nonlinearity, config, "delay_gain")


def solve_delay_kernel(problem: DelayProblem, nonlinearity: NonlinearitySpec,
                       config: SolverConfig) -> Trajectory:
    """Integrate y'(t) = integral of w(t-s) f(y(s)) over [t - delta, t]."""
    if problem.kernel is None:
        raise DomainError("solve_delay_kernel needs a kernel")
    return _solve_delay_problem(problem, nonlinearity, config, "delay_kernel")


# ---------------------------------------------------------------------------
# RK4 problems
# ---------------------------------------------------------------------------

def _rk4_step(rhs, t: float, y: np.ndarray, h: float) -> np.ndarray:
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = rhs(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _rk4_adaptive(rhs, y0: np.ndarray, cfg: SolverConfig, *,
                  log_value: Callable, problem_tag: str,
                  value_fn: Callable, deriv_fn: Callable,
                  f_of_state: Callable) -> Trajectory:
    """Adaptive RK4 with the shared blow-up detection contract.

    `log_value(y)` is the log of the watched scalar; crossings, threshold
    raises and Aitken estimation mirror the product-integration solver.
    """
    cfg.validate()
    times = [0.0]
    states = [np.asarray(y0, dtype=float)]
    watch = _CrossingWatch(log_value(states[0]), cfg.crossing_ratio)
    log_threshold = (math.log(cfg.blowup_threshold)
                     if math.isfinite(cfg.blowup_threshold) else math.inf)
    t = 0.0
    h = min(cfg.initial_step, cfg.max_step)
    status: Status | None = None
    minstep_streak = 0
    last_lv = log_value(states[0])
    while status is None:
        if t >= cfg.t_end or cfg.t_end - t <= 1e-15 * cfg.t_end:
            status = ReachedHorizon(cfg.t_end)
            break
        if len(times) > cfg.max_nodes:
            status = Aborted(ABORT_NODE_BUDGET)
            break
        h = min(max(h, cfg.min_step), cfg.max_step)
        if t + h >= cfg.t_end:
            h = cfg.t_end - t
        y = states[-1]
        while True:
            at_floor = h <= cfg.min_step * 1.000001
            with np.errstate(over="ignore", invalid="ignore"):
                coarse = _rk4_step(rhs, t, y, h)
                mid = _rk4_step(rhs, t, y, 0.5 * h)
                fine = _rk4_step(rhs, t + 0.5 * h, mid, 0.5 * h)
            finite = np.all(np.isfinite(coarse)) and np.all(np.isfinite(fine))
            if finite:
                scale = np.maximum(np.abs(fine), np.maximum(np.abs(y), 1e-12))
                err = float(np.max(np.abs(fine - coarse) / scale))
                if cfg.fixed_step or err <= cfg.rel_tol or at_floor:
                    h_next = (h * min(_RK4_GROW, max(0.2, 0.9 * (cfg.rel_tol / err) ** 0.2))
                              if err > 0.0 else h * _RK4_GROW)
                    break
            if at_floor:
                status = Aborted(ABORT_NONCONVERGENT)
                break
            h = max(0.5 * h if not finite else
                    h * max(0.2, 0.9 * (cfg.rel_tol / max(err, 1e-300)) ** 0.2),
                    cfg.min_step)
        if status is not None:
            break
        pinned = (not cfg.fixed_step) and h <= cfg.min_step * 1.000001 \
            and err > cfg.rel_tol
        t_mid, t_new = t + 0.5 * h, t + h
        times.extend([t_mid, t_new])
        states.extend([mid, fine])
        lv_mid, lv_new = log_value(mid), log_value(fine)
        for (ta, la), (tb, lb) in (((t, last_lv), (t_mid, lv_mid)),
                                   ((t_mid, lv_mid), (t_new, lv_new))):
            while lb >= watch.lx0 + watch.next_n * watch.log_r:
                target = watch.lx0 + watch.next_n * watch.log_r
                t_c = ta + (target - la) * (tb - ta) / (lb - la) if lb > la else tb
                watch.crossings.append((target, t_c))
                watch.next_n += 1
        increasing = lv_new >= last_lv
        minstep_streak = minstep_streak + 1 if (pinned and increasing) else 0
        last_lv = lv_new
        t = t_new
        if not cfg.fixed_step:
            h = h_next
        if lv_new >= log_threshold or minstep_streak >= 10:
            try:
                t_est, t_err = _accelerate_crossings(
                    [tc for _, tc in watch.crossings], t)
                status = BlowUpDetected(t_est, t_err)
            except InsufficientCrossings:
                if minstep_streak >= 10:
                    status = Aborted(ABORT_COLLAPSE)
                else:
                    log_threshold += 6.0 * watch.log_r
            except DivergentAcceleration:
                if minstep_streak >= 10:
                    status = Aborted(ABORT_COLLAPSE)
                else:
                    log_threshold += 20.0 * watch.log_r

    t_arr = np.asarray(times)
    lx = np.asarray([log_value(s) for s in states])
    values = np.asarray([value_fn(s) for s in states])
    derivs = np.asarray([deriv_fn(ti, s) for ti, s in zip(times, states)])
    with np.errstate(over="ignore", invalid="ignore"):
        fv = np.asarray([f_of_state(s) for s in states])
        dlx = np.where(np.isfinite(values) & (values > 0.0),
                       derivs / np.where(values > 0.0, values, 1.0), 0.0)
    crossings = [(math.exp(l) if l < 709.0 else math.inf, tc)
                 for l, tc in watch.crossings]
    return Trajectory(
        times=t_arr, values=values, derivs=derivs, log_values=lx,
        log_derivs=dlx, f_values=fv, status=status, crossings=crossings,
        config=cfg, problem=problem_tag,
        overflowed=bool(np.any(~np.isfinite(values))),
    )


_RK4_GROW = 2.5


def solve_second_order(nonlinearity: NonlinearitySpec, z0: float, dz0: float,
                       t_end: float, config: SolverConfig) -> Trajectory:
    """Integrate z'' = f(z) by adaptive RK4 with blow-up detection.

    The returned trajectory carries z in `values` and z' in `derivs`;
    the energy (z')^2/2 - Fbar(z) is conserved by the exact flow and
    makes a sharp accuracy check.
    """
    if z0 <= 0.0:
        raise DomainError("z0 must be positive")
    cfg = replace(config, t_end=t_end)

    def rhs(t, y):
        return np.array([y[1], float(nonlinearity.fn(np.asarray(y[0], dtype=float)))])

    return _rk4_adaptive(
        rhs, np.array([z0, dz0]), cfg,
        log_value=lambda y: math.log(y[0]) if y[0] > 0 else -math.inf,
        problem_tag="second_order",
        value_fn=lambda y: y[0],
        deriv_fn=lambda t, y: y[1],
        f_of_state=lambda y: float(nonlinearity.fn(np.asarray(y[0], dtype=float))),
    )


def solve_aux_ivp(nonlinearity: NonlinearitySpec, t_end: float,
                  config: SolverConfig) -> Trajectory:
    """Integrate y' = sqrt(Fbar(y)), y(0) = 1, in log space.

    The solution inverts FU, so FU(y(t)) = t is an exact identity to
    test against. Requires an Osgood-infinite nonlinearity for an
    unrestricted horizon; for a finite one the solution explodes at
    FB(1) and horizons near or past that are rejected.
    """
    verdict = nonlinearity.osgood()
    if verdict.classification is OsgoodClass.FINITE:
        sup = nonlinearity.fb(1.0)
        if t_end >= 0.95 * sup:
            raise DomainError(
                f"auxiliary solution explodes at t = FB(1) = {sup:.6g}; "
                f"t_end = {t_end:.6g} is out of reach"
            )
    cfg = replace(config, t_end=t_end)

    def rhs(t, y):
        lv = float(nonlinearity.log_fbar_fn(np.asarray(y[0], dtype=float)))
        return np.array([math.exp(0.5 * lv - y[0])])

    def value(y):
        return math.exp(y[0]) if y[0] < 709.0 else math.inf

    def deriv(t, y):
        v = value(y)
        return v * rhs(t, y)[0] if math.isfinite(v) else math.inf

    return _rk4_adaptive(
        rhs, np.array([0.0]), cfg,
        log_value=lambda y: y[0],
        problem_tag="aux_ivp",
        value_fn=value,
        deriv_fn=deriv,
        f_of_state=lambda y: math.exp(min(
            float(nonlinearity.log_f_fn(np.asarray(y[0], dtype=float))), 709.0)),
    )

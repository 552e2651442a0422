"""Memory kernels w and forcing terms (h, H).

Kernels carry exactly the metadata the rate theory keys on: the value at
zero w(0) (which sets every rate constant), the L1 norm (finite L1 gates
the global growth law), and enough tail information to let the solver
drop provably negligible history. Forcing terms travel as the pair
(h, H) with H the running integral of h.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import gamma as _gamma_fn, gammainc, gammaincc

from .errors import DomainError, UndecidedError
from .nonlinearity import NonlinearitySpec
from .quadrature import Convergence, integrate_log_interval, ladder_integral, tail_integral

__all__ = [
    "KernelSpec",
    "ForcingSpec",
    "power_decay",
    "stretched_exp",
    "inverse_gamma",
    "t_exp_decay",
    "custom_kernel",
    "kernel_from_id",
    "zero_forcing",
    "power_growth",
    "rate_scale",
    "custom_forcing",
    "forcing_from_id",
]

_L1_LADDER = tuple(float(4.0 ** k) for k in range(1, 14))


@dataclass(frozen=True)
class KernelSpec:
    """A continuous nonnegative memory kernel on [0, inf)."""

    kind: str
    params: tuple[float, ...]
    label: str
    w0: float  # value at zero, matches w(0) exactly
    wn: Callable = field(repr=False)
    cumulative_fn: Callable | None = field(repr=False, default=None)
    l1_closed: float | None = None
    l1_tail_fn: Callable | None = field(repr=False, default=None)
    catalog_id: str | None = None

    def w(self, t):
        """Kernel value at t >= 0."""
        arr = np.asarray(t, dtype=float)
        if np.any(arr < 0.0):
            raise DomainError(f"{self.label}: kernel demands t >= 0")
        out = self.wn(arr)
        return float(out) if np.isscalar(t) or arr.ndim == 0 else out

    def cumulative(self, t):
        """W(t) = integral of w over [0, t]."""
        arr = np.asarray(t, dtype=float)
        if np.any(arr < 0.0):
            raise DomainError(f"{self.label}: cumulative demands t >= 0")
        if self.cumulative_fn is not None:
            out = self.cumulative_fn(arr)
        else:
            out = _numeric_cumulative(self)(arr)
        return float(out) if np.isscalar(t) or arr.ndim == 0 else out

    def l1_norm(self, tol: float = 1e-8) -> float:
        """The L1 norm of w; math.inf when non-integrable.

        Raises UndecidedError when the ladder cannot settle the question,
        so an unknown norm can never masquerade as a number.
        """
        if self.l1_closed is not None:
            return self.l1_closed
        def density(v):
            return np.exp(v) * self.wn(np.exp(v))
        head = integrate_log_interval(density, math.log(1e-12), 0.0)
        ladder = ladder_integral(density, 0.0, _L1_LADDER)
        if ladder.verdict is Convergence.DIVERGED:
            return math.inf
        if ladder.verdict is Convergence.UNDECIDED:
            raise UndecidedError(f"{self.label}: L1 norm undecided at the ladder")
        value, err = tail_integral(density, 0.0)
        if err > max(tol * value, 1e-14):
            raise UndecidedError(f"{self.label}: L1 tail converged only to {err:.2g}")
        return head + value

    def l1_tail(self, u: float) -> float | None:
        """Upper bound on the integral of w over [u, inf).

        None when no usable bound is available (then history can never be
        truncated); math.inf for non-integrable kernels.
        """
        if self.l1_tail_fn is None:
            return None
        return float(self.l1_tail_fn(float(u)))


def _numeric_cumulative(spec: KernelSpec) -> Callable:
    # Cached monotone interpolant of the cumulative integral; rebuilt in
    # doubling windows on demand.
    cache: dict[str, object] = {"t_max": 0.0, "interp": None}

    def cumulative(arr: np.ndarray) -> np.ndarray:
        t_need = float(np.max(arr)) if arr.size else 0.0
        if cache["interp"] is None or t_need > cache["t_max"]:
            t_max = max(8.0, 2.0 * t_need)
            grid = np.linspace(0.0, t_max, 2049)
            mids = 0.5 * (grid[:-1] + grid[1:])
            h = grid[1] - grid[0]
            # Simpson per panel keeps the table accurate to ~1e-12 for the
            # smooth catalog/custom kernels this fallback serves.
            vals = np.concatenate([
                [0.0],
                np.cumsum(h / 6.0 * (spec.wn(grid[:-1]) + 4.0 * spec.wn(mids)
                                     + spec.wn(grid[1:]))),
            ])
            cache["t_max"] = t_max
            cache["interp"] = PchipInterpolator(grid, vals)
        return cache["interp"](arr)

    return cumulative


# ---------------------------------------------------------------------------
# Kernel catalog
# ---------------------------------------------------------------------------

def power_decay(omega: float = 1.0, alpha: float = 0.0) -> KernelSpec:
    """w(t) = omega * (1 + t)^(-alpha); integrable only for alpha > 1."""
    if omega <= 0.0 or alpha < 0.0:
        raise DomainError("power_decay demands omega > 0 and alpha >= 0")

    def w(t):
        return omega * (1.0 + t) ** (-alpha)

    if alpha == 1.0:
        def cum(t):
            return omega * np.log1p(t)
    else:
        def cum(t):
            return omega * ((1.0 + t) ** (1.0 - alpha) - 1.0) / (1.0 - alpha)

    if alpha > 1.0:
        l1 = omega / (alpha - 1.0)
        def l1_tail(u):
            return omega * (1.0 + u) ** (1.0 - alpha) / (alpha - 1.0)
    else:
        l1 = math.inf
        l1_tail = None

    return KernelSpec(
        kind="power_decay", params=(omega, alpha),
        label=f"{omega:g}(1+t)^-{alpha:g}", w0=omega,
        wn=w, cumulative_fn=cum, l1_closed=l1, l1_tail_fn=l1_tail,
        catalog_id=f"power_decay:omega={omega:g},alpha={alpha:g}",
    )


def stretched_exp(omega: float = 1.0, gamma: float = 1.0) -> KernelSpec:
    """w(t) = omega * exp(-t^gamma)."""
    if omega <= 0.0 or gamma <= 0.0:
        raise DomainError("stretched_exp demands omega > 0 and gamma > 0")
    g_inv = 1.0 / gamma
    gamma_factor = _gamma_fn(g_inv) / gamma  # integral of exp(-t^gamma)

    def w(t):
        return omega * np.exp(-np.asarray(t, dtype=float) ** gamma)

    def cum(t):
        return omega * gamma_factor * gammainc(g_inv, np.asarray(t, dtype=float) ** gamma)

    def l1_tail(u):
        return omega * gamma_factor * gammaincc(g_inv, u ** gamma)

    return KernelSpec(
        kind="stretched_exp", params=(omega, gamma),
        label=f"{omega:g}exp(-t^{gamma:g})", w0=omega,
        wn=w, cumulative_fn=cum, l1_closed=omega * gamma_factor,
        l1_tail_fn=l1_tail,
        catalog_id=f"stretched_exp:omega={omega:g},gamma={gamma:g}",
    )


def inverse_gamma(omega: float = 1.0) -> KernelSpec:
    """w(t) = omega / Gamma(t + 1).

    Gamma is evaluated by scipy's Lanczos-class implementation (relative
    error well under 1e-12), without which this member would be
    untestable.
    """
    if omega <= 0.0:
        raise DomainError("inverse_gamma demands omega > 0")

    def w(t):
        return omega / _gamma_fn(np.asarray(t, dtype=float) + 1.0)

    def l1_tail(u):
        # For u >= 2 the integrand shrinks by at least 1/(u+1) per unit,
        # so the tail is dominated by a crude geometric envelope.
        if u < 2.0:
            return omega * 3.0
        return 2.0 * omega / _gamma_fn(u + 1.0)

    return KernelSpec(
        kind="inverse_gamma", params=(omega,),
        label=f"{omega:g}/Gamma(t+1)", w0=omega,
        wn=w, cumulative_fn=None, l1_closed=None, l1_tail_fn=l1_tail,
        catalog_id=f"inverse_gamma:omega={omega:g}",
    )


def t_exp_decay(omega: float = 1.0) -> KernelSpec:
    """w(t) = omega * t * exp(-t): the degenerate member with w(0) = 0."""
    if omega <= 0.0:
        raise DomainError("t_exp_decay demands omega > 0")

    def w(t):
        t = np.asarray(t, dtype=float)
        return omega * t * np.exp(-t)

    def cum(t):
        t = np.asarray(t, dtype=float)
        return omega * (1.0 - (1.0 + t) * np.exp(-t))

    def l1_tail(u):
        return omega * (1.0 + u) * math.exp(-u)

    return KernelSpec(
        kind="t_exp_decay", params=(omega,),
        label=f"{omega:g}t*exp(-t)", w0=0.0,
        wn=w, cumulative_fn=cum, l1_closed=omega, l1_tail_fn=l1_tail,
        catalog_id=f"t_exp_decay:omega={omega:g}",
    )


def custom_kernel(
    w: Callable,
    *,
    w0: float | None = None,
    cumulative: Callable | None = None,
    l1: float | None = None,
    l1_tail: Callable | None = None,
    label: str = "custom",
) -> KernelSpec:
    """Wrap a user kernel; w0 defaults to w(0) evaluated once."""
    value0 = float(w(np.asarray(0.0))) if w0 is None else float(w0)
    if value0 < 0.0:
        raise DomainError("kernel value at zero must be >= 0")
    return KernelSpec(
        kind="custom", params=(), label=label, w0=value0,
        wn=w, cumulative_fn=cumulative, l1_closed=l1, l1_tail_fn=l1_tail,
    )


def kernel_from_id(spec_id: str) -> KernelSpec:
    """Resolve a config-file id like "stretched_exp:omega=1,gamma=1"."""
    from .scenarios import parse_spec_id

    name, params = parse_spec_id(spec_id)
    if name == "power_decay":
        return power_decay(params.pop("omega", 1.0), params.pop("alpha", 0.0))
    if name == "stretched_exp":
        return stretched_exp(params.pop("omega", 1.0), params.pop("gamma", 1.0))
    if name == "inverse_gamma":
        return inverse_gamma(params.pop("omega", 1.0))
    if name == "t_exp_decay":
        return t_exp_decay(params.pop("omega", 1.0))
    raise DomainError(f"unknown kernel id {spec_id!r}")


# ---------------------------------------------------------------------------
# Forcing terms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ForcingSpec:
    """A forcing term h with its running integral H.

    h may be negative; the standing hypothesis is on H, which must stay
    nonnegative. `log_H` keeps rate-scale forcings usable where H itself
    overflows.
    """

    kind: str
    params: tuple[float, ...]
    label: str
    h_fn: Callable = field(repr=False)
    H_fn: Callable = field(repr=False)
    log_H_fn: Callable | None = field(repr=False, default=None)
    catalog_id: str | None = None

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"

    def h(self, t):
        arr = np.asarray(t, dtype=float)
        if np.any(arr < 0.0):
            raise DomainError(f"{self.label}: forcing demands t >= 0")
        out = self.h_fn(arr)
        return float(out) if np.isscalar(t) or arr.ndim == 0 else out

    def H(self, t):
        arr = np.asarray(t, dtype=float)
        if np.any(arr < 0.0):
            raise DomainError(f"{self.label}: forcing demands t >= 0")
        out = self.H_fn(arr)
        return float(out) if np.isscalar(t) or arr.ndim == 0 else out

    def log_H(self, t):
        """log H(t); -inf where H vanishes."""
        arr = np.asarray(t, dtype=float)
        if self.log_H_fn is not None:
            out = self.log_H_fn(arr)
        else:
            with np.errstate(divide="ignore"):
                out = np.log(self.H_fn(arr))
        return float(out) if np.isscalar(t) or arr.ndim == 0 else out


def zero_forcing() -> ForcingSpec:
    def zero(t):
        return np.zeros_like(np.asarray(t, dtype=float))

    return ForcingSpec(kind="zero", params=(), label="0",
                       h_fn=zero, H_fn=zero, catalog_id="zero")


def power_growth(alpha: float) -> ForcingSpec:
    """H(t) = t^alpha with h = H' (alpha > 0)."""
    if alpha <= 0.0:
        raise DomainError("power_growth demands alpha > 0")

    def H(t):
        return np.asarray(t, dtype=float) ** alpha

    def h(t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            return alpha * t ** (alpha - 1.0)

    def log_H(t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            return alpha * np.log(t)

    return ForcingSpec(kind="power_growth", params=(alpha,),
                       label=f"t^{alpha:g}", h_fn=h, H_fn=H, log_H_fn=log_H,
                       catalog_id=f"power_growth:alpha={alpha:g}")


class _RateScaleTable:
    """Cached log H(t) for H = FU^{-1}(K t), built by adaptive refinement."""

    def __init__(self, nonlinearity: NonlinearitySpec, K: float):
        self._spec = nonlinearity
        self._K = K
        self._t_max = 0.0
        self._interp: PchipInterpolator | None = None

    def _build(self, t_max: float) -> None:
        spec, K = self._spec, self._K
        ts = [0.0]
        vs = [0.0]
        t = 0.0
        # Grid in FU-target space; the inverse map curves hardest near the
        # origin, so the node spacing is graded.
        target = 0.0
        while t < t_max:
            target += 0.01 if target < 0.5 else (0.025 if target < 2.0 else 0.05)
            t = target / K
            ts.append(t)
            vs.append(spec.invert_fu_log(target))
        self._t_max = ts[-1]
        self._interp = PchipInterpolator(np.asarray(ts), np.asarray(vs))

    def log_H(self, t: np.ndarray) -> np.ndarray:
        t_need = float(np.max(t)) if np.asarray(t).size else 0.0
        if self._interp is None or t_need > self._t_max:
            self._build(max(16.0, 2.0 * t_need))
        return self._interp(t)


def rate_scale(K: float, nonlinearity: NonlinearitySpec) -> ForcingSpec:
    """H(t) = FU^{-1}(K t): forcing calibrated to grow at FU-rate K.

    h is the exact derivative K * sqrt(Fbar(H(t))). Note H(0) = 1 rather
    than 0: this kind is defined through the inverse functional, and the
    running integral of h is H(t) - 1, which is nonnegative as required.
    """
    if K <= 0.0:
        raise DomainError("rate_scale demands K > 0")
    table = _RateScaleTable(nonlinearity, K)

    def log_H(t):
        return table.log_H(np.asarray(t, dtype=float))

    def H(t):
        with np.errstate(over="ignore"):
            return np.exp(log_H(t))

    def h(t):
        v = log_H(t)
        with np.errstate(over="ignore"):
            return K * np.exp(0.5 * nonlinearity.log_fbar_from_log(v))

    return ForcingSpec(kind="rate_scale", params=(K,),
                       label=f"FU^-1({K:g}t)", h_fn=h, H_fn=H, log_H_fn=log_H,
                       catalog_id=f"rate_scale:K={K:g}")


def custom_forcing(h: Callable, H: Callable, *, label: str = "custom") -> ForcingSpec:
    return ForcingSpec(kind="custom", params=(), label=label, h_fn=h, H_fn=H)


def forcing_from_id(spec_id: str, nonlinearity: NonlinearitySpec | None = None) -> ForcingSpec:
    """Resolve a forcing id; rate_scale needs the scenario's nonlinearity."""
    from .scenarios import parse_spec_id

    name, params = parse_spec_id(spec_id)
    if name == "zero":
        return zero_forcing()
    if name == "power_growth":
        return power_growth(params.pop("alpha"))
    if name == "rate_scale":
        if nonlinearity is None:
            raise DomainError("rate_scale forcing needs the nonlinearity")
        return rate_scale(params.pop("K"), nonlinearity)
    raise DomainError(f"unknown forcing id {spec_id!r}")


def validate_forcing(forcing: ForcingSpec, t_max: float = 100.0) -> None:
    """Sampled hypothesis checks: H >= 0, and H' = h by finite differences.

    For kinds defined by integrating h, H(0) = 0 is also enforced;
    rate-scale forcing starts at H(0) = 1 by construction and is exempt.
    """
    ts = np.linspace(0.0, t_max, 101)
    H = np.asarray(forcing.H(ts), dtype=float)
    finite = np.isfinite(H)
    if np.any(H[finite] < -1e-12):
        raise DomainError(f"{forcing.label}: H must stay nonnegative")
    if forcing.kind != "rate_scale" and abs(float(forcing.H(0.0))) > 1e-12:
        raise DomainError(f"{forcing.label}: H(0) must be 0")
    ts_fd = np.linspace(0.5, min(t_max, 32.0), 17)
    d = 1e-5
    hd = (np.asarray(forcing.H(ts_fd + d)) - np.asarray(forcing.H(ts_fd - d))) / (2 * d)
    hv = np.asarray(forcing.h(ts_fd), dtype=float)
    mask = np.isfinite(hd) & np.isfinite(hv)
    scale = np.maximum(1.0, np.abs(hv[mask]))
    if np.any(np.abs(hd[mask] - hv[mask]) > 1e-4 * scale):
        raise DomainError(f"{forcing.label}: H' does not match h at sampled points")

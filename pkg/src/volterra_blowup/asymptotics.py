"""Rate diagnostics: turning trajectories into banded limit statements.

The growth theory predicts

    FB(x(t)) / (T - t)  ->  sqrt(2 w(0))   for exploding solutions,
    FU(x(t)) / t        ->  sqrt(2 w(0))   for global ones (integrable w),
    FU(x(t)) / t        ->  0              when w(0) = 0,

and, for forced equations, that the growth law survives exactly when
limsup FU(H(t))/t <= sqrt(2 w(0)). Limits are rendered as Aitken
extrapolations of finite samples with an explicit error band: a verdict
of CONSISTENT means the extrapolated limit matches the target within
max(rel_band * target, limit_err), INCONSISTENT means it misses by more
than three bands, and INCONCLUSIVE covers everything the finite run
cannot settle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DivergentAcceleration, DomainError
from .kernels import ForcingSpec
from .nonlinearity import NonlinearitySpec, OsgoodClass
from .quadrature import aitken
from .solver import BlowUpDetected, ReachedHorizon, Trajectory

__all__ = [
    "RateVerdict",
    "RateDiagnostic",
    "PerturbationClass",
    "aitken_extrapolate",
    "blowup_rate_diagnostic",
    "growth_rate_diagnostic",
    "perturbation_criterion",
]

#: Default relative half-width of the acceptance band around the target.
DEFAULT_REL_BAND = 0.05

#: For targets of zero (degenerate kernels) the final sample must fall
#: below this fraction of the w(0) = 1 reference rate sqrt(2).
ZERO_DECAY_FRACTION = 0.2


class RateVerdict(Enum):
    CONSISTENT = "consistent"
    INCONSISTENT = "inconsistent"
    INCONCLUSIVE = "inconclusive"


class PerturbationClass(Enum):
    PRESERVING = "preserving"
    NON_PRESERVING = "non-preserving"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class RateDiagnostic:
    functional: str                      # "blowup_rate" | "growth_rate"
    samples: tuple[tuple[float, float], ...]
    extrapolated_limit: float
    limit_err: float
    target: float
    verdict: RateVerdict
    detail: str = ""

    def to_csv(self, path: str | Path) -> None:
        lines = ["t,value"]
        for t, v in self.samples:
            lines.append(f"{t:.17g},{v:.17g}")
        lines.append(
            f"# functional={self.functional} limit={self.extrapolated_limit:.10g} "
            f"err={self.limit_err:.3g} target={self.target:.10g} "
            f"verdict={self.verdict.value.upper()}"
        )
        Path(path).write_text("\n".join(lines) + "\n")


def aitken_extrapolate(samples: Sequence[float]) -> tuple[float, float]:
    """Delta-squared acceleration of a sample tail: (limit, err).

    Raises DivergentAcceleration when the accelerated increments grow
    instead of contracting.
    """
    if len(samples) < 3:
        raise DomainError("need at least 3 samples to extrapolate")
    limit, err, diverged = aitken(list(samples), sweeps=2)
    if diverged:
        raise DivergentAcceleration("sample sequence does not accelerate to a limit")
    return float(limit), float(err)


def _banded_verdict(limit: float, limit_err: float, target: float,
                    rel_band: float) -> RateVerdict:
    band = max(rel_band * abs(target), limit_err)
    gap = abs(limit - target)
    if gap <= band:
        return RateVerdict.CONSISTENT
    if gap > 3.0 * band:
        return RateVerdict.INCONSISTENT
    return RateVerdict.INCONCLUSIVE


def blowup_rate_diagnostic(traj: Trajectory, nonlinearity: NonlinearitySpec,
                           w0: float, rel_band: float = DEFAULT_REL_BAND) -> RateDiagnostic:
    """Check FB(x(t))/(T - t) -> sqrt(2 w0) on the crossing subsequence.

    Uses the geometric crossings rather than the raw grid (log-uniform in
    x, so FB stays well conditioned), extrapolates by Aitken, and folds
    the blow-up time uncertainty into the error band through the
    sensitivity r * T_err / (T - t).
    """
    if not isinstance(traj.status, BlowUpDetected):
        raise DomainError("blow-up rate diagnostic needs a BlowUpDetected run")
    if w0 <= 0.0:
        raise DomainError("blow-up rate diagnostic needs w(0) > 0")
    if nonlinearity.osgood().classification is not OsgoodClass.FINITE:
        raise DomainError("nonlinearity must classify as Osgood-finite")
    t_est, t_err = traj.status.t_est, traj.status.t_err
    target = math.sqrt(2.0 * w0)
    t_last = float(traj.times[-1])
    if t_err / max(t_est - t_last, 1e-300) > 0.1:
        return RateDiagnostic(
            functional="blowup_rate", samples=(), extrapolated_limit=math.nan,
            limit_err=math.inf, target=target, verdict=RateVerdict.INCONCLUSIVE,
            detail="blow-up time uncertainty dominates the remaining horizon",
        )
    lx0 = traj.log_values[0]
    log_r = math.log(traj.config.crossing_ratio)
    samples = []
    for level, t_c in traj.crossings:
        if not math.isfinite(level):
            continue
        log_level = math.log(level)
        if log_level < lx0 + 3.5 * log_r:
            continue  # skip the transient head
        remaining = t_est - t_c
        if remaining <= 20.0 * t_err:
            continue  # too close to T for the estimate's accuracy
        r = nonlinearity.fb_from_log(log_level) / remaining
        samples.append((t_c, r))
    if len(samples) < 4:
        return RateDiagnostic(
            functional="blowup_rate", samples=tuple(samples),
            extrapolated_limit=math.nan, limit_err=math.inf, target=target,
            verdict=RateVerdict.INCONCLUSIVE, detail="too few usable crossings",
        )
    values = [v for _, v in samples]
    try:
        limit, err = aitken_extrapolate(values)
    except DivergentAcceleration:
        limit, err = values[-1], abs(values[-1] - values[-2])
    sensitivity = limit * t_err / max(t_est - samples[-1][0], 1e-300)
    limit_err = err + abs(sensitivity)
    verdict = _banded_verdict(limit, limit_err, target, rel_band)
    return RateDiagnostic(
        functional="blowup_rate", samples=tuple(samples),
        extrapolated_limit=float(limit), limit_err=float(limit_err),
        target=target, verdict=verdict,
    )


def growth_rate_diagnostic(traj: Trajectory, nonlinearity: NonlinearitySpec,
                           w0: float, rel_band: float = DEFAULT_REL_BAND,
                           *, n_samples: int = 8,
                           zero_decay_fraction: float = ZERO_DECAY_FRACTION) -> RateDiagnostic:
    """Check FU(x(t))/t -> sqrt(2 w0) (or -> 0 when w0 = 0) on dyadic times.

    Samples t_end/2^k, ..., t_end, extrapolates by Aitken for positive
    targets. For the degenerate target 0 no finite run can pin a limit,
    so CONSISTENT is rendered as: samples strictly decreasing over the
    last decade and the final value below `zero_decay_fraction` times the
    sqrt(2) reference rate.
    """
    if not isinstance(traj.status, ReachedHorizon):
        raise DomainError("growth rate diagnostic needs a ReachedHorizon run")
    if nonlinearity.osgood().classification is not OsgoodClass.INFINITE:
        raise DomainError("nonlinearity must classify as Osgood-infinite")
    t_end = float(traj.times[-1])
    ts = [t_end / 2.0 ** k for k in range(n_samples - 1, -1, -1)]
    ts = [t for t in ts if t >= 16.0 * t_end / 2.0 ** n_samples]
    samples = []
    for t in ts:
        lx = float(traj.value_log_at(t))
        samples.append((t, nonlinearity.fu_from_log(lx) / t))
    values = [v for _, v in samples]
    if w0 > 0.0:
        target = math.sqrt(2.0 * w0)
        try:
            limit, err = aitken_extrapolate(values)
        except DivergentAcceleration:
            limit, err = values[-1], abs(values[-1] - values[-2])
        # Non-monotone samples beyond the extrapolation noise cannot be
        # trusted as a converging sequence.
        diffs = np.diff(values)
        if np.any(diffs > 0.0) and np.any(diffs < 0.0):
            swing = float(np.max(np.abs(diffs)))
            if swing > 0.02 * abs(limit) and swing > 3.0 * err:
                return RateDiagnostic(
                    functional="growth_rate", samples=tuple(samples),
                    extrapolated_limit=float(limit), limit_err=math.inf,
                    target=target, verdict=RateVerdict.INCONCLUSIVE,
                    detail="samples oscillate beyond the noise band",
                )
        verdict = _banded_verdict(limit, err, target, rel_band)
        return RateDiagnostic(
            functional="growth_rate", samples=tuple(samples),
            extrapolated_limit=float(limit), limit_err=float(err),
            target=target, verdict=verdict,
        )
    # Degenerate kernel: target 0.
    decade = [(t, v) for t, v in samples if t >= t_end / 10.0 - 1e-12]
    vals = [v for _, v in decade]
    decreasing = len(vals) >= 3 and all(b < a for a, b in zip(vals, vals[1:]))
    threshold = zero_decay_fraction * math.sqrt(2.0)
    final = values[-1]
    if decreasing and final <= threshold:
        verdict = RateVerdict.CONSISTENT
        detail = ""
    elif not decreasing and len(vals) >= 3 and vals[-1] > vals[0]:
        verdict = RateVerdict.INCONSISTENT
        detail = "samples increase where decay toward 0 is required"
    else:
        verdict = RateVerdict.INCONCLUSIVE
        detail = (f"final sample {final:.4g} above the decay threshold "
                  f"{threshold:.4g}" if final > threshold else
                  "tail not monotonically decreasing")
    return RateDiagnostic(
        functional="growth_rate", samples=tuple(samples),
        extrapolated_limit=float(final), limit_err=float(abs(values[-1] - values[-2])),
        target=0.0, verdict=verdict, detail=detail,
    )


def perturbation_criterion(forcing: ForcingSpec, nonlinearity: NonlinearitySpec,
                           w0: float, t_ladder: Sequence[float] | None = None,
                           band: float = DEFAULT_REL_BAND) -> PerturbationClass:
    """Classify a forcing term by limsup FU(H(t))/t against sqrt(2 w0).

    PRESERVING when the running-maximum estimate stays <= target*(1+band),
    NON_PRESERVING when it reaches target*(1+3*band), INCONCLUSIVE in the
    gap. The limsup is estimated from the ladder tail (transient heads are
    discounted); an increasing tail is extrapolated upward by Aitken.
    """
    if nonlinearity.osgood().classification is not OsgoodClass.INFINITE:
        raise DomainError("perturbation criterion needs an Osgood-infinite nonlinearity")
    if w0 <= 0.0:
        raise DomainError("perturbation criterion needs w(0) > 0")
    ladder = (np.asarray(t_ladder, dtype=float) if t_ladder is not None
              else np.geomspace(2.0, 2048.0, 11))
    vals = []
    for t in ladder:
        log_h = float(forcing.log_H(t))
        if not math.isfinite(log_h):
            # H(t) = 0: FU(0+) may diverge to -inf (harmless for a limsup).
            vals.append(-math.inf)
            continue
        vals.append(nonlinearity.fu_from_log(log_h) / t)
    tail = [v for v in vals[-3:] if math.isfinite(v)]
    limsup_est = max(tail) if tail else -math.inf
    finite_vals = [v for v in vals if math.isfinite(v)]
    if len(finite_vals) >= 4 and finite_vals[-1] > finite_vals[-2] > finite_vals[-3]:
        try:
            limit, _ = aitken_extrapolate(finite_vals)
            limsup_est = max(limsup_est, limit)
        except DivergentAcceleration:
            return PerturbationClass.INCONCLUSIVE
    target = math.sqrt(2.0 * w0)
    if limsup_est <= target * (1.0 + band):
        return PerturbationClass.PRESERVING
    if limsup_est >= target * (1.0 + 3.0 * band):
        return PerturbationClass.NON_PRESERVING
    return PerturbationClass.INCONCLUSIVE

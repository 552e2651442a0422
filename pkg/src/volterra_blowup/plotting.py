"""Figure rendering for trajectories and rate diagnostics.

Figures are written straight to files next to the CSV output; no
interactive backend is ever required.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .asymptotics import RateDiagnostic
from .nonlinearity import OsgoodVerdict
from .solver import BlowUpDetected, Trajectory

LOG10_E = math.log10(math.e)


def save_trajectory_png(traj: Trajectory, path: str | Path, title: str = "") -> None:
    """Two panels: log10 x(t) (exact even past float overflow) and step sizes."""
    fig, (ax0, ax1) = plt.subplots(
        2, 1, figsize=(7.0, 5.6), sharex=True,
        gridspec_kw={"height_ratios": [3, 1]},
    )
    ax0.plot(traj.times, traj.log_values * LOG10_E, lw=1.2, color="#1f77b4")
    ax0.set_ylabel("log10 x(t)")
    if isinstance(traj.status, BlowUpDetected):
        ax0.axvline(traj.status.t_est, color="#d62728", ls="--", lw=1.0,
                    label=f"T_est = {traj.status.t_est:.6g}")
        ax0.legend(loc="upper left", frameon=False)
    if traj.crossings:
        cts = [t for _, t in traj.crossings]
        lvls = [math.log10(lv) if math.isfinite(lv) else np.nan
                for lv, _ in traj.crossings]
        ax0.plot(cts, lvls, ".", ms=3.0, color="#ff7f0e", alpha=0.6)
    steps = traj.steps
    ax1.semilogy(traj.times[1:], steps[1:], lw=0.8, color="#2ca02c")
    ax1.set_xlabel("t")
    ax1.set_ylabel("step")
    if title:
        ax0.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)


def save_diagnostic_png(diag: RateDiagnostic, path: str | Path, title: str = "") -> None:
    """Rate-functional samples with the target line and extrapolated limit."""
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    ts = [t for t, _ in diag.samples]
    vs = [v for _, v in diag.samples]
    ax.plot(ts, vs, "o-", ms=4, lw=1.0, color="#1f77b4", label=diag.functional)
    ax.axhline(diag.target, color="#d62728", ls="--", lw=1.0,
               label=f"target {diag.target:.6g}")
    if math.isfinite(diag.extrapolated_limit):
        ax.axhline(diag.extrapolated_limit, color="#2ca02c", ls=":", lw=1.0,
                   label=f"extrapolated {diag.extrapolated_limit:.6g}")
    ax.set_xlabel("t")
    ax.set_ylabel("rate functional")
    ax.legend(frameon=False)
    ax.set_title(title or f"verdict: {diag.verdict.value}")
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)


def save_osgood_png(verdict: OsgoodVerdict, path: str | Path, title: str = "") -> None:
    """Partial blow-up integrals against the cutoff ladder."""
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    if verdict.partial_integral_at_cutoffs:
        cutoffs = [c for c, _ in verdict.partial_integral_at_cutoffs]
        partials = [p for _, p in verdict.partial_integral_at_cutoffs]
        ax.semilogx(cutoffs, partials, "o-", ms=4, lw=1.0, color="#1f77b4")
    ax.set_xlabel("cutoff K")
    ax.set_ylabel("integral up to K")
    ax.set_title(title or f"classification: {verdict.classification.value}")
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)

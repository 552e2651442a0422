"""Scenario execution: classification-aware solving plus requested diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .asymptotics import (
    PerturbationClass,
    RateDiagnostic,
    blowup_rate_diagnostic,
    growth_rate_diagnostic,
    perturbation_criterion,
)
from .errors import ConfigError, UndecidedError
from .kernels import ForcingSpec, KernelSpec
from .nonlinearity import NonlinearitySpec, OsgoodClass, OsgoodVerdict, classify_osgood
from .scenarios import Scenario
from .solver import Trajectory, solve

__all__ = ["ScenarioResult", "run_scenario"]


@dataclass
class ScenarioResult:
    scenario: Scenario
    kernel: KernelSpec
    nonlinearity: NonlinearitySpec
    forcing: ForcingSpec
    verdict: OsgoodVerdict
    trajectory: Trajectory | None
    diagnostics: dict[str, RateDiagnostic]
    perturbation: PerturbationClass | None


def run_scenario(scenario: Scenario, *, solve_trajectory: bool = True) -> ScenarioResult:
    """Classify, solve and diagnose one scenario.

    Osgood-infinite nonlinearities cannot blow up, so the blow-up
    threshold is lifted for them: global superexponential solutions are
    allowed to grow past any fixed level without tripping detection.
    """
    kernel, nl, forcing = scenario.resolve()
    verdict = classify_osgood(nl)
    config = scenario.solver_config()
    if verdict.classification is OsgoodClass.INFINITE:
        config = replace(config, blowup_threshold=math.inf)
    traj = solve(kernel, nl, forcing, scenario.x0, config) if solve_trajectory else None

    diagnostics: dict[str, RateDiagnostic] = {}
    perturbation: PerturbationClass | None = None
    for diag in scenario.diagnostics:
        if diag == "classify":
            continue
        if diag == "blowup_rate":
            if traj is None:
                raise ConfigError("blowup_rate diagnostic needs a trajectory")
            diagnostics[diag] = blowup_rate_diagnostic(
                traj, nl, kernel.w0, scenario.rel_band)
        elif diag == "growth_rate":
            if traj is None:
                raise ConfigError("growth_rate diagnostic needs a trajectory")
            try:
                norm = kernel.l1_norm()
            except UndecidedError as exc:
                raise ConfigError(str(exc)) from exc
            if not math.isfinite(norm):
                raise ConfigError("growth_rate diagnostic needs an integrable kernel")
            diagnostics[diag] = growth_rate_diagnostic(
                traj, nl, kernel.w0, scenario.rel_band)
        elif diag == "perturbation":
            perturbation = perturbation_criterion(
                forcing, nl, kernel.w0, band=scenario.rel_band)
    return ScenarioResult(
        scenario=scenario, kernel=kernel, nonlinearity=nl, forcing=forcing,
        verdict=verdict, trajectory=traj, diagnostics=diagnostics,
        perturbation=perturbation,
    )

"""Command-line front end: classify, solve, rates and sweep subcommands.

Exit codes are the machine contract:

    0  success
    1  configuration error
    2  inconclusive / undecided / inconsistent outcome
    3  solver abort

Every run is deterministic; there is no random state anywhere.
"""

from __future__ import annotations

import argparse
import itertools
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .asymptotics import PerturbationClass, RateVerdict
from .errors import ConfigError, VolterraError
from .nonlinearity import OsgoodClass, check_osgood_equivalence
from .runner import run_scenario
from .scenarios import (
    Scenario,
    load_scenario,
    parse_spec_id,
    save_scenario,
    scenario_to_string,
    with_overrides,
)
from .solver import Aborted, BlowUpDetected, ReachedHorizon, crossings_to_csv, trajectory_to_csv

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INCONCLUSIVE = 2
EXIT_ABORT = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="volterra-blowup",
        description="Solve nonlinear memory equations, classify blow-up and "
                    "verify growth-rate laws.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("classify", "Osgood classification of the scenario's nonlinearity"),
        ("solve", "integrate the scenario and export the trajectory"),
        ("rates", "integrate and run the requested rate diagnostics"),
        ("sweep", "run a parameter grid of scenarios"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="scenario INI file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--rel-tol", type=float, default=None,
                       help="override the scenario's solver tolerance")
        p.add_argument("--t-end", type=float, default=None,
                       help="override the scenario's horizon")
        p.add_argument("--threads", type=int, default=1,
                       help="worker processes for sweep cells")
        p.add_argument("--seedless", action="store_true",
                       help="accepted for interface compatibility; runs are "
                            "always deterministic")
        p.add_argument("--no-plots", action="store_true",
                       help="skip figure rendering")
        if name == "sweep":
            p.add_argument("--emit-configs", action="store_true",
                           help="write one scenario file per grid cell")
    return parser


def _load(args) -> Scenario:
    scenario = load_scenario(args.config)
    return with_overrides(scenario, rel_tol=args.rel_tol, t_end=args.t_end)


def cmd_classify(args) -> int:
    scenario = _load(args)
    _, nl, _ = scenario.resolve()
    verdict = nl.osgood()
    label = {
        OsgoodClass.FINITE: "FINITE -> blow-up predicted",
        OsgoodClass.INFINITE: "INFINITE -> global solution predicted",
        OsgoodClass.UNDECIDED: "UNDECIDED at the working ladder",
    }[verdict.classification]
    print(f"scenario:        {scenario.name}")
    print(f"nonlinearity:    {scenario.nonlinearity_id}")
    print(f"classification:  {label}")
    print(f"{'cutoff':>12}  {'integral up to cutoff':>22}")
    for cutoff, partial in verdict.partial_integral_at_cutoffs:
        print(f"{cutoff:12.4g}  {partial:22.12g}")
    if verdict.extrapolated_tail is not None:
        print(f"extrapolated tail beyond ladder: {verdict.extrapolated_tail:.4g}")
    agree = check_osgood_equivalence(nl)
    print("criterion equivalence (1/sqrt(x f(x)) vs 1/sqrt(Fbar)): "
          + ("agree" if agree else "DISAGREE"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["cutoff,partial_integral"]
    lines += [f"{c:.17g},{p:.17g}" for c, p in verdict.partial_integral_at_cutoffs]
    lines.append(f"# classification={verdict.classification.value} "
                 f"equivalence={'agree' if agree else 'disagree'}")
    (out / f"{scenario.name}_osgood.csv").write_text("\n".join(lines) + "\n")
    if not args.no_plots:
        from .plotting import save_osgood_png
        save_osgood_png(verdict, out / f"{scenario.name}_osgood.png",
                        title=f"{scenario.nonlinearity_id}: {verdict.classification.value}")
    if verdict.classification is OsgoodClass.UNDECIDED:
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def _export_trajectory(result, out: Path, no_plots: bool) -> None:
    scenario = result.scenario
    traj = result.trajectory
    meta = {
        "kernel": scenario.kernel_id,
        "nonlinearity": scenario.nonlinearity_id,
        "forcing": scenario.forcing_id,
        "x0": scenario.x0,
    }
    trajectory_to_csv(traj, out / f"{scenario.name}_trajectory.csv", meta)
    if isinstance(traj.status, BlowUpDetected):
        crossings_to_csv(traj, out / f"{scenario.name}_crossings.csv")
    if not no_plots:
        from .plotting import save_trajectory_png
        save_trajectory_png(traj, out / f"{scenario.name}_trajectory.png",
                            title=scenario.name)


def cmd_solve(args) -> int:
    scenario = _load(args)
    result = run_scenario(scenario)
    traj = result.trajectory
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _export_trajectory(result, out, args.no_plots)
    status = traj.status
    if isinstance(status, BlowUpDetected):
        print(f"{scenario.name}: blow-up detected, T_est = {status.t_est:.10g} "
              f"(err {status.t_err:.2g}); {traj.times.size} nodes")
    elif isinstance(status, ReachedHorizon):
        print(f"{scenario.name}: reached t_end = {status.t_end:g}; "
              f"final x = {traj.values[-1]:.6g} (log x = {traj.log_values[-1]:.6g}); "
              f"{traj.times.size} nodes")
    else:
        print(f"{scenario.name}: ABORTED ({status.reason})")
        return EXIT_ABORT
    return EXIT_OK


_VERDICT_LABEL = {
    RateVerdict.CONSISTENT: "CONSISTENT",
    RateVerdict.INCONSISTENT: "INCONSISTENT",
    RateVerdict.INCONCLUSIVE: "INCONCLUSIVE",
}

_FUNCTIONAL_LABEL = {"blowup_rate": "BlowUpRate", "growth_rate": "GrowthRate"}


def cmd_rates(args) -> int:
    scenario = _load(args)
    result = run_scenario(scenario)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _export_trajectory(result, out, args.no_plots)
    if isinstance(result.trajectory.status, Aborted):
        print(f"{scenario.name}: ABORTED ({result.trajectory.status.reason})")
        return EXIT_ABORT
    worst = EXIT_OK
    for name, diag in result.diagnostics.items():
        label = _FUNCTIONAL_LABEL.get(name, name)
        print(f"{label} limit≈{diag.extrapolated_limit:.4g} "
              f"target={diag.target:.4g} {_VERDICT_LABEL[diag.verdict]}"
              + (f"  [{diag.detail}]" if diag.detail else ""))
        diag.to_csv(out / f"{scenario.name}_{name}.csv")
        if not args.no_plots:
            from .plotting import save_diagnostic_png
            save_diagnostic_png(diag, out / f"{scenario.name}_{name}.png",
                                title=f"{scenario.name}: {label}")
        if diag.verdict is not RateVerdict.CONSISTENT:
            worst = EXIT_INCONCLUSIVE
    if result.perturbation is not None:
        print(f"Perturbation {result.perturbation.value.upper()} "
              f"(forcing {scenario.forcing_id})")
        if result.perturbation is PerturbationClass.INCONCLUSIVE:
            worst = EXIT_INCONCLUSIVE
    return worst


# ---------------------------------------------------------------------------
# Sweep
# ---------------------------------------------------------------------------

_SWEEP_TARGETS = {
    "nonlinearity.beta": ("nonlinearity_id", "beta"),
    "nonlinearity.p": ("nonlinearity_id", "p"),
    "kernel.omega": ("kernel_id", "omega"),
    "kernel.alpha": ("kernel_id", "alpha"),
    "kernel.gamma": ("kernel_id", "gamma"),
    "forcing.k": ("forcing_id", "K"),
    "forcing.alpha": ("forcing_id", "alpha"),
}


def _rewrite_id(spec_id: str, param: str, value: float) -> str:
    name, params = parse_spec_id(spec_id)
    params[param] = value
    if not params:
        return name
    joined = ",".join(f"{k}={v:g}" for k, v in params.items())
    return f"{name}:{joined}"


def _parse_sweep_grid(path: str) -> tuple[Scenario, list[dict[str, float]]]:
    import configparser

    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.read_string(Path(path).read_text())
    base = load_scenario(path)
    if not parser.has_section("sweep"):
        return base, []
    axes: list[tuple[str, list[float]]] = []
    for key in parser.options("sweep"):
        if key not in _SWEEP_TARGETS:
            raise ConfigError(
                f"unknown sweep axis {key!r}; known: {sorted(_SWEEP_TARGETS)}")
        raw = parser.get("sweep", key)
        values = [float(v) for v in raw.replace(",", " ").split()]
        axes.append((key, values))
    cells = [dict(zip((a for a, _ in axes), combo))
             for combo in itertools.product(*(vals for _, vals in axes))]
    if any(len(vals) == 0 for _, vals in axes):
        cells = []
    return base, cells


def _cell_scenario(base: Scenario, cell: dict[str, float]) -> Scenario:
    scenario = base
    tags = []
    for axis, value in cell.items():
        field, param = _SWEEP_TARGETS[axis]
        scenario = replace(
            scenario, **{field: _rewrite_id(getattr(scenario, field), param, value)})
        tags.append(f"{axis.split('.')[-1]}{value:g}")
    return replace(scenario, name=f"{base.name}_" + "_".join(tags))


def _run_cell(payload: tuple[str, dict[str, float]]) -> dict:
    """Worker entry: rebuild the scenario from its INI text (picklable)."""
    from .scenarios import scenario_from_string

    text, cell = payload
    base = scenario_from_string(text)
    scenario = _cell_scenario(base, cell)
    row = {"name": scenario.name}
    row.update({axis: cell[axis] for axis in sorted(cell)})
    try:
        result = run_scenario(scenario)
    except VolterraError as exc:
        row.update(status="error", error=str(exc))
        return row
    traj = result.trajectory
    if isinstance(traj.status, BlowUpDetected):
        row.update(status="blowup", T_est=f"{traj.status.t_est:.10g}")
    elif isinstance(traj.status, ReachedHorizon):
        row.update(status="horizon")
    else:
        row.update(status="aborted", error=traj.status.reason)
    for name, diag in result.diagnostics.items():
        row[f"{name}_limit"] = f"{diag.extrapolated_limit:.6g}"
        row[f"{name}_verdict"] = diag.verdict.value
    if result.perturbation is not None:
        row["perturbation"] = result.perturbation.value
    return row


def cmd_sweep(args) -> int:
    base, cells = _parse_sweep_grid(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    text = Path(args.config).read_text()
    if args.emit_configs:
        for cell in cells:
            scenario = _cell_scenario(base, cell)
            save_scenario(scenario, out / f"{scenario.name}.ini")
    columns = ["name"]
    for cell in cells[:1]:
        columns += sorted(cell)
    columns += ["status", "T_est", "blowup_rate_limit", "blowup_rate_verdict",
                "growth_rate_limit", "growth_rate_verdict", "perturbation", "error"]
    payloads = [(text, cell) for cell in cells]
    if args.threads > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            rows = list(pool.map(_run_cell, payloads))
    else:
        rows = [_run_cell(p) for p in payloads]
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(str(row.get(c, "")) for c in columns))
    summary = out / "sweep_summary.csv"
    summary.write_text("\n".join(lines) + "\n")
    n_fail = sum(1 for row in rows if row.get("status") in ("error", "aborted"))
    for row in rows:
        print(",".join(str(row.get(c, "")) for c in columns))
    print(f"# sweep: {len(rows)} cells, {n_fail} failed -> {summary}")
    if rows and n_fail == len(rows):
        return EXIT_ABORT
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "classify":
            return cmd_classify(args)
        if args.command == "solve":
            return cmd_solve(args)
        if args.command == "rates":
            return cmd_rates(args)
        if args.command == "sweep":
            return cmd_sweep(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except VolterraError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())

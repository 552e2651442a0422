"""Scenario configs: flat INI files binding kernels, nonlinearities and forcing.

A scenario file looks like

    [scenario]
    name = blowup_beta2
    x0 = 1.0

    [kernel]
    id = power_decay:omega=1,alpha=0

    [nonlinearity]
    id = power_plus_one:beta=2.0

    [forcing]
    id = zero

    [solver]
    rel_tol = 1e-6
    t_end = 10

    [diagnostics]
    requested = blowup_rate
    rel_band = 0.05

Catalog ids are "name" or "name:key=value,key=value".
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError, DomainError, UndecidedError

KNOWN_DIAGNOSTICS = ("classify", "blowup_rate", "growth_rate", "perturbation")


def parse_spec_id(spec_id: str) -> tuple[str, dict[str, float]]:
    """Split "name:key=1,key2=2.0" into (name, {key: value})."""
    spec_id = spec_id.strip()
    if not spec_id:
        raise ConfigError("empty spec id")
    name, _, rest = spec_id.partition(":")
    params: dict[str, float] = {}
    if rest:
        for item in rest.split(","):
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError(f"malformed parameter {item!r} in {spec_id!r}")
            try:
                params[key.strip()] = float(value)
            except ValueError as exc:
                raise ConfigError(f"non-numeric parameter in {spec_id!r}") from exc
    return name.strip(), params


@dataclass(frozen=True)
class Scenario:
    """A fully-resolved run description loaded from one INI file."""

    name: str
    kernel_id: str
    nonlinearity_id: str
    forcing_id: str = "zero"
    x0: float = 1.0
    rel_tol: float = 1e-6
    t_end: float = 10.0
    initial_step: float = 1e-3
    min_step: float = 1e-12
    max_step: float = 1.0
    blowup_threshold: float = 1e12
    crossing_ratio: float = 2.0
    diagnostics: tuple[str, ...] = ()
    rel_band: float = 0.05

    def resolve(self):
        """Instantiate (kernel, nonlinearity, forcing) from the catalog ids."""
        from .kernels import forcing_from_id, kernel_from_id
        from .nonlinearity import nonlinearity_from_id

        try:
            nl = nonlinearity_from_id(self.nonlinearity_id)
            kernel = kernel_from_id(self.kernel_id)
            forcing = forcing_from_id(self.forcing_id, nl)
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
        return kernel, nl, forcing

    def solver_config(self):
        from .solver import SolverConfig

        return SolverConfig(
            initial_step=self.initial_step,
            min_step=self.min_step,
            max_step=self.max_step,
            rel_tol=self.rel_tol,
            blowup_threshold=self.blowup_threshold,
            crossing_ratio=self.crossing_ratio,
            t_end=self.t_end,
        )


_SOLVER_KEYS = {
    "rel_tol": float,
    "t_end": float,
    "initial_step": float,
    "min_step": float,
    "max_step": float,
    "blowup_threshold": float,
    "crossing_ratio": float,
}


def _read_ini(text: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"bad config syntax: {exc}") from exc
    return parser


def scenario_from_string(text: str) -> Scenario:
    parser = _read_ini(text)
    for section in parser.sections():
        if section not in ("scenario", "kernel", "nonlinearity", "forcing",
                           "solver", "diagnostics", "sweep"):
            raise ConfigError(f"unknown section [{section}]")
    if not parser.has_section("scenario"):
        raise ConfigError("missing [scenario] section")
    if not parser.has_option("scenario", "name"):
        raise ConfigError("missing scenario name")
    name = parser.get("scenario", "name").strip()
    try:
        x0 = parser.getfloat("scenario", "x0", fallback=1.0)
    except ValueError as exc:
        raise ConfigError(f"bad x0: {exc}") from exc
    for key in parser.options("scenario"):
        if key not in ("name", "x0"):
            raise ConfigError(f"unknown key {key!r} in [scenario]")
    if x0 <= 0.0:
        raise ConfigError("x0 must be positive")

    def required_id(section: str) -> str:
        if not parser.has_section(section) or not parser.has_option(section, "id"):
            raise ConfigError(f"missing [{section}] id")
        for key in parser.options(section):
            if key != "id":
                raise ConfigError(f"unknown key {key!r} in [{section}]")
        return parser.get(section, "id").strip()

    kernel_id = required_id("kernel")
    nonlinearity_id = required_id("nonlinearity")
    forcing_id = "zero"
    if parser.has_section("forcing"):
        forcing_id = required_id("forcing")

    solver_kwargs = {}
    if parser.has_section("solver"):
        for key in parser.options("solver"):
            if key not in _SOLVER_KEYS:
                raise ConfigError(f"unknown key {key!r} in [solver]")
            try:
                solver_kwargs[key] = _SOLVER_KEYS[key](parser.get("solver", key))
            except ValueError as exc:
                raise ConfigError(f"bad solver value for {key}: {exc}") from exc

    diagnostics: tuple[str, ...] = ()
    rel_band = 0.05
    if parser.has_section("diagnostics"):
        for key in parser.options("diagnostics"):
            if key not in ("requested", "rel_band"):
                raise ConfigError(f"unknown key {key!r} in [diagnostics]")
        raw = parser.get("diagnostics", "requested", fallback="")
        diagnostics = tuple(
            item for item in raw.replace(",", " ").split() if item
        )
        for diag in diagnostics:
            if diag not in KNOWN_DIAGNOSTICS:
                raise ConfigError(f"unknown diagnostic {diag!r}")
        rel_band = parser.getfloat("diagnostics", "rel_band", fallback=0.05)

    scenario = Scenario(
        name=name, kernel_id=kernel_id, nonlinearity_id=nonlinearity_id,
        forcing_id=forcing_id, x0=x0, diagnostics=diagnostics,
        rel_band=rel_band, **solver_kwargs,
    )
    validate_scenario(scenario)
    return scenario


def load_scenario(path: str | Path) -> Scenario:
    return scenario_from_string(Path(path).read_text())


def scenario_to_string(s: Scenario) -> str:
    out = io.StringIO()
    out.write("[scenario]\n")
    out.write(f"name = {s.name}\n")
    out.write(f"x0 = {s.x0!r}\n\n")
    out.write(f"[kernel]\nid = {s.kernel_id}\n\n")
    out.write(f"[nonlinearity]\nid = {s.nonlinearity_id}\n\n")
    out.write(f"[forcing]\nid = {s.forcing_id}\n\n")
    out.write("[solver]\n")
    for key in _SOLVER_KEYS:
        out.write(f"{key} = {getattr(s, key)!r}\n")
    out.write("\n[diagnostics]\n")
    out.write(f"requested = {' '.join(s.diagnostics)}\n")
    out.write(f"rel_band = {s.rel_band!r}\n")
    return out.getvalue()


def save_scenario(s: Scenario, path: str | Path) -> None:
    Path(path).write_text(scenario_to_string(s))


def validate_scenario(s: Scenario) -> None:
    """Resolve ids and enforce hypothesis consistency at load time."""
    from .nonlinearity import OsgoodClass, classify_osgood

    kernel, nl, forcing = s.resolve()
    if s.rel_tol <= 0.0 or s.rel_tol > 1e-2:
        raise ConfigError("rel_tol must lie in (0, 1e-2]")
    if not (0.0 < s.min_step <= s.initial_step <= s.max_step):
        raise ConfigError("step bounds must satisfy 0 < min <= initial <= max")
    if s.crossing_ratio <= 1.0:
        raise ConfigError("crossing_ratio must exceed 1")
    if "growth_rate" in s.diagnostics:
        try:
            norm = kernel.l1_norm()
        except UndecidedError as exc:
            raise ConfigError(
                f"growth_rate diagnostic needs a finite kernel L1 norm: {exc}"
            ) from exc
        if not math.isfinite(norm):
            raise ConfigError(
                "growth_rate diagnostic demands an integrable kernel; "
                f"{kernel.label} has infinite L1 norm"
            )
        if classify_osgood(nl).classification is OsgoodClass.FINITE:
            raise ConfigError(
                "growth_rate diagnostic applies to global solutions, but "
                f"{nl.label} classifies as blow-up"
            )
    if "blowup_rate" in s.diagnostics:
        if classify_osgood(nl).classification is OsgoodClass.INFINITE:
            raise ConfigError(
                "blowup_rate diagnostic applies to exploding solutions, but "
                f"{nl.label} classifies as global"
            )


def with_overrides(s: Scenario, *, rel_tol: float | None = None,
                   t_end: float | None = None) -> Scenario:
    """CLI-level overrides applied on top of a loaded scenario."""
    kwargs = {}
    if rel_tol is not None:
        kwargs["rel_tol"] = rel_tol
    if t_end is not None:
        kwargs["t_end"] = t_end
    return replace(s, **kwargs) if kwargs else s

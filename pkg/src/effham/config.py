"""Run configuration parsing and CSV result tables.

The config format is flat INI-style sections with ``key = value`` lines
(``#`` comments allowed).  Two model kinds exist, discriminated by
``kind``: a cascade atom-field model or a deformed-ladder model.  Unknown
keys are rejected with their location, so typos fail loudly.

Result tables serialise to CSV with '#'-prefixed metadata lines, a header
row and 17-significant-digit numbers: identical config and seed produce
byte-identical files, and reading a table back is bit-exact.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from effham.deformed import (
    StructuralPolynomial,
    Su2HamiltonianSpec,
    build_module,
)
from effham.multilevel import CascadeModelSpec


class ConfigError(ValueError):
    """Malformed or invalid run configuration."""


_MODEL_KEYS = {
    "kind",
    # cascade
    "levels",
    "atoms",
    "couplings",
    "detunings",
    "field_frequency",
    "level_frequencies",
    "max_excitation",
    # deformed
    "phi_coefficients",
    "lowest_weight",
    "dimension",
    "delta",
    "coupling",
}

_RUN_KEYS = {
    "seed",
    "order",
    "resonance_tol",
    "max_steps",
    "target_residual",
    "time_max",
    "time_points",
    "initial_photon",
    "initial_level",
    "initial_index",
    "epsilons",
    "scale",
    "out",
}

_REQUIRED_CASCADE = ("levels", "atoms", "couplings")
_REQUIRED_DEFORMED = ("phi_coefficients", "lowest_weight", "dimension", "delta", "coupling")


@dataclass
class RunConfig:
    """Validated model plus command parameters."""

    kind: str
    cascade: CascadeModelSpec | None = None
    phi_coefficients: tuple[float, ...] = ()
    lowest_weight: float = 0.0
    dimension: int = 0
    delta: float = 0.0
    coupling: float = 0.0
    seed: int = 0
    order: int = 3
    resonance_tol: float | None = None
    max_steps: int = 40
    target_residual: float | None = None
    time_max: float = 50.0
    time_points: int = 401
    initial_photon: int = 4
    initial_level: int = 1
    initial_index: int = 0
    epsilons: tuple[float, ...] = (0.1, 0.05, 0.025)
    scale: str = "energy"
    out: str | None = None
    raw_items: dict[str, str] = field(default_factory=dict)

    def deformed_spec(self) -> Su2HamiltonianSpec:
        if self.kind != "deformed":
            raise ConfigError("model kind is not 'deformed'")
        phi = StructuralPolynomial(self.phi_coefficients)
        module = build_module(phi, self.lowest_weight, self.dimension)
        return Su2HamiltonianSpec(self.delta, self.coupling, module)


def _floats(text: str, where: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse number list {text!r}") from exc


def _one_float(text: str, where: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse number {text!r}") from exc


def _one_int(text: str, where: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse integer {text!r}") from exc


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration document."""
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#",)
    )
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"parse error: {exc}") from exc

    for section in parser.sections():
        if section not in ("model", "run"):
            raise ConfigError(f"[{section}]: unknown section")
        allowed = _MODEL_KEYS if section == "model" else _RUN_KEYS
        for key in parser[section]:
            if key not in allowed:
                raise ConfigError(f"[{section}] {key}: unknown key")

    if not parser.has_section("model"):
        raise ConfigError("[model]: section required")
    model = parser["model"]
    if "kind" not in model:
        raise ConfigError("[model] kind: required")
    kind = model["kind"].strip().lower()
    if kind not in ("cascade", "deformed"):
        raise ConfigError(f"[model] kind: must be 'cascade' or 'deformed', got {kind!r}")

    cfg = RunConfig(kind=kind)
    cfg.raw_items = {
        f"{section}.{key}": " ".join(parser[section][key].split())
        for section in parser.sections()
        for key in parser[section]
    }

    if kind == "cascade":
        for key in _REQUIRED_CASCADE:
            if key not in model:
                raise ConfigError(f"[model] {key}: required")
        has_freq = "level_frequencies" in model
        if not has_freq and "detunings" not in model:
            raise ConfigError("[model] detunings: required (or level_frequencies)")
        n_levels = _one_int(model["levels"], "[model] levels")
        n_atoms = _one_int(model["atoms"], "[model] atoms")
        g = _floats(model["couplings"], "[model] couplings")
        kwargs: dict = {}
        if has_freq:
            if "field_frequency" not in model:
                raise ConfigError("[model] field_frequency: required with level_frequencies")
            kwargs["level_frequencies"] = _floats(
                model["level_frequencies"], "[model] level_frequencies"
            )
            kwargs["field_frequency"] = _one_float(
                model["field_frequency"], "[model] field_frequency"
            )
        else:
            det = _floats(model["detunings"], "[model] detunings")
            if det and det[0] != 0.0:
                raise ConfigError(
                    "[model] detunings: the first detuning must be 0 "
                    "(level 1 is the energy reference)"
                )
            kwargs["detunings_in"] = det
        if "max_excitation" in model:
            try:
                kwargs["max_excitation"] = Fraction(model["max_excitation"].strip())
            except (ValueError, ZeroDivisionError) as exc:
                raise ConfigError(
                    f"[model] max_excitation: cannot parse {model['max_excitation']!r}"
                ) from exc
        try:
            cfg.cascade = CascadeModelSpec(n_levels, n_atoms, g, **kwargs)
        except ValueError as exc:
            raise ConfigError(f"[model]: {exc}") from exc
    else:
        for key in _REQUIRED_DEFORMED:
            if key not in model:
                raise ConfigError(f"[model] {key}: required")
        cfg.phi_coefficients = _floats(
            model["phi_coefficients"], "[model] phi_coefficients"
        )
        cfg.lowest_weight = _one_float(model["lowest_weight"], "[model] lowest_weight")
        cfg.dimension = _one_int(model["dimension"], "[model] dimension")
        cfg.delta = _one_float(model["delta"], "[model] delta")
        cfg.coupling = _one_float(model["coupling"], "[model] coupling")

    if parser.has_section("run"):
        run = parser["run"]
        if "seed" in run:
            cfg.seed = _one_int(run["seed"], "[run] seed")
        if "order" in run:
            cfg.order = _one_int(run["order"], "[run] order")
            if cfg.order not in (1, 2, 3):
                raise ConfigError(f"[run] order: must be 1, 2 or 3, got {cfg.order}")
        if "resonance_tol" in run:
            cfg.resonance_tol = _one_float(run["resonance_tol"], "[run] resonance_tol")
        if "max_steps" in run:
            cfg.max_steps = _one_int(run["max_steps"], "[run] max_steps")
        if "target_residual" in run:
            cfg.target_residual = _one_float(
                run["target_residual"], "[run] target_residual"
            )
        if "time_max" in run:
            cfg.time_max = _one_float(run["time_max"], "[run] time_max")
        if "time_points" in run:
            cfg.time_points = _one_int(run["time_points"], "[run] time_points")
        if "initial_photon" in run:
            cfg.initial_photon = _one_int(run["initial_photon"], "[run] initial_photon")
        if "initial_level" in run:
            cfg.initial_level = _one_int(run["initial_level"], "[run] initial_level")
        if "initial_index" in run:
            cfg.initial_index = _one_int(run["initial_index"], "[run] initial_index")
        if "epsilons" in run:
            cfg.epsilons = _floats(run["epsilons"], "[run] epsilons")
        if "scale" in run:
            cfg.scale = run["scale"].strip()
        if "out" in run:
            cfg.out = run["out"].strip()

    import math

    numeric = list(cfg.epsilons) + [cfg.time_max]
    if cfg.resonance_tol is not None:
        numeric.append(cfg.resonance_tol)
    if not all(math.isfinite(v) for v in numeric):
        raise ConfigError("[run]: all numeric parameters must be finite")
    return cfg


def load_config(path: str | Path) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# result tables
# ---------------------------------------------------------------------------


@dataclass
class ResultTable:
    """Rectangular numeric table plus a metadata block."""

    columns: tuple[str, ...]
    rows: list[tuple[float, ...]]
    metadata: dict[str, str]

    def __post_init__(self) -> None:
        width = len(self.columns)
        for k, row in enumerate(self.rows):
            if len(row) != width:
                raise ValueError(
                    f"row {k} has {len(row)} entries, header has {width}"
                )


def _format_number(x: float) -> str:
    return format(float(x), ".17g")


def write_table(table: ResultTable, path: str | Path) -> None:
    """CSV with leading '#' metadata lines; 17 significant digits, so a
    read-back is bit-exact.  Metadata keys are written sorted for
    deterministic bytes."""
    lines = [f"# {key} = {table.metadata[key]}" for key in sorted(table.metadata)]
    lines.append(",".join(table.columns))
    for row in table.rows:
        lines.append(",".join(_format_number(x) for x in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_table(path: str | Path) -> ResultTable:
    """Parse a table written by :func:`write_table`."""
    metadata: dict[str, str] = {}
    columns: tuple[str, ...] | None = None
    rows: list[tuple[float, ...]] = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                metadata[key.strip()] = value.strip()
            continue
        if columns is None:
            columns = tuple(line.split(","))
            continue
        rows.append(tuple(float(tok) for tok in line.split(",")))
    if columns is None:
        raise ValueError(f"{path}: no header row found")
    return ResultTable(columns, rows, metadata)

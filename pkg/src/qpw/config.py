"""Run configuration: JSON schema, validation, and defaults for the CLI.

A config document has up to five sections, all optional (defaults are the
published reference circuit and the standard numerics):

  circuit:  {"transmons": {ej1, ec1, ej2, ec2, ejc0, ecc},
             "couplings": {g1, g2, g12}}
            or {"capacitances": {c1, c2, cc, c1c, c2c, c12},
                "ej": {ej1, ej2, ejc0}}
  pulse:    FluxPulse template with unit-suffixed keys (theta0_rad, delta_rad,
            omega_GHz, duration_ns, t_rise_ns, t_fall_ns, phase_rad)
  numerics: {dt_ns, levels_per_mode, n_max, fd_step_rad, degeneracy_cutoff_GHz}
  seed:     integer
  output_dir: path

Any malformed document or value violating a module precondition raises a
config error before computation starts.
"""

import json
import math
from dataclasses import dataclass, field

from .calibration import default_pulse_template
from .circuit import (DEFAULT_LEVELS, DEFAULT_N_MAX, REFERENCE_PARAMS,
                      CapacitanceSet, CircuitParams, capacitance_to_energies)
from .errors import ConfigError, InvalidArgumentError
from .pulses import DEFAULT_DT, FluxPulse
from .swt import DEFAULT_FD_STEP, DEGENERACY_CUTOFF


@dataclass
class Numerics:
    """Discretization and perturbation-frame settings shared by commands."""

    dt: float = DEFAULT_DT                      # ns
    levels_per_mode: int = DEFAULT_LEVELS
    n_max: int = DEFAULT_N_MAX
    fd_step: float = DEFAULT_FD_STEP            # rad
    degeneracy_cutoff: float = DEGENERACY_CUTOFF  # GHz

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if not (isinstance(self.levels_per_mode, int) and self.levels_per_mode >= 2):
            raise ConfigError("levels_per_mode must be an integer >= 2")
        if not (isinstance(self.n_max, int) and self.n_max >= self.levels_per_mode):
            raise ConfigError("n_max must be an integer >= levels_per_mode")
        if not (math.isfinite(self.fd_step) and self.fd_step > 0):
            raise ConfigError("fd_step must be positive")
        if not (math.isfinite(self.degeneracy_cutoff) and self.degeneracy_cutoff > 0):
            raise ConfigError("degeneracy_cutoff must be positive")

    def to_json_dict(self) -> dict:
        return {"dt_ns": self.dt, "levels_per_mode": self.levels_per_mode,
                "n_max": self.n_max, "fd_step_rad": self.fd_step,
                "degeneracy_cutoff_GHz": self.degeneracy_cutoff}


@dataclass
class RunConfig:
    """Validated inputs for one CLI invocation."""

    circuit: CircuitParams = field(default_factory=lambda: REFERENCE_PARAMS)
    pulse: FluxPulse = field(default_factory=default_pulse_template)
    numerics: Numerics = field(default_factory=Numerics)
    seed: int = 0
    output_dir: str = "out"

    def __post_init__(self):
        if not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")

    def to_json_dict(self) -> dict:
        return {"circuit": self.circuit.to_json_dict(),
                "pulse": self.pulse.to_json_dict(),
                "numerics": self.numerics.to_json_dict(),
                "seed": self.seed, "output_dir": self.output_dir}


def _require_keys(section: dict, keys, where: str) -> list:
    missing = [k for k in keys if k not in section]
    unknown = [k for k in section if k not in keys]
    if missing:
        raise ConfigError(f"{where}: missing keys {missing}")
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    return [section[k] for k in keys]


def resolve_circuit(doc: dict) -> CircuitParams:
    """Build CircuitParams from either schema variant."""
    if "transmons" in doc or "couplings" in doc:
        if "capacitances" in doc or "ej" in doc:
            raise ConfigError("circuit: give transmons/couplings or "
                              "capacitances/ej, not both")
        tr = _require_keys(doc.get("transmons", {}),
                           ("ej1", "ec1", "ej2", "ec2", "ejc0", "ecc"),
                           "circuit.transmons")
        cp = _require_keys(doc.get("couplings", {}), ("g1", "g2", "g12"),
                           "circuit.couplings")
        return CircuitParams(*map(float, tr + cp))
    if "capacitances" in doc or "ej" in doc:
        cv = _require_keys(doc.get("capacitances", {}),
                           ("c1", "c2", "cc", "c1c", "c2c", "c12"),
                           "circuit.capacitances")
        ej = _require_keys(doc.get("ej", {}), ("ej1", "ej2", "ejc0"),
                           "circuit.ej")
        caps = CapacitanceSet(*map(float, cv))
        return capacitance_to_energies(caps, *map(float, ej))
    raise ConfigError("circuit: expected transmons/couplings or capacitances/ej")


def config_from_dict(doc: dict) -> RunConfig:
    """Validate a parsed config document into a RunConfig."""
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    known = {"circuit", "pulse", "numerics", "seed", "output_dir"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config sections {sorted(unknown)}")
    try:
        circuit = (resolve_circuit(doc["circuit"]) if "circuit" in doc
                   else REFERENCE_PARAMS)
        pulse = (FluxPulse.from_json_dict(doc["pulse"]) if "pulse" in doc
                 else default_pulse_template())
        nm = dict(doc.get("numerics", {}))
        numerics = Numerics(
            dt=float(nm.pop("dt_ns", DEFAULT_DT)),
            levels_per_mode=int(nm.pop("levels_per_mode", DEFAULT_LEVELS)),
            n_max=int(nm.pop("n_max", DEFAULT_N_MAX)),
            fd_step=float(nm.pop("fd_step_rad", DEFAULT_FD_STEP)),
            degeneracy_cutoff=float(nm.pop("degeneracy_cutoff_GHz",
                                           DEGENERACY_CUTOFF)))
        if nm:
            raise ConfigError(f"numerics: unknown keys {sorted(nm)}")
        return RunConfig(circuit=circuit, pulse=pulse, numerics=numerics,
                         seed=int(doc.get("seed", 0)),
                         output_dir=str(doc.get("output_dir", "out")))
    except (KeyError, TypeError, ValueError, InvalidArgumentError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc


def load_config(path: str = None) -> RunConfig:
    """Read and validate a config file; None gives the built-in defaults."""
    if path is None:
        return RunConfig()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(doc)

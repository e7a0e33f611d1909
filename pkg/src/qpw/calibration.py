"""Drive-frequency selection, duration prediction, and duration-search calibration
of parametric exchange rotations, plus spectator-crowding diagnostics.

The drive frequency is the dressed resonance of the targeted pair. The starting
duration comes from the linear rate model T = |theta|/(2*pi*|j'|*delta) +
(t_rise + t_fall)/2, seeded with the measured effective rate (a one-period
stroboscopic propagation) so that the search window brackets the optimum; a
coarse scan plus golden-section refinement then maximizes the trace fidelity to
the target rotation, with drive-phase and virtual-Z freedom applied jointly.
"""

import dataclasses
import math

import numpy as np

from .circuit import (CircuitParams, DEFAULT_LEVELS, DEFAULT_N_MAX,
                      assemble_hamiltonian)
from .errors import CalibrationError, InvalidArgumentError
from .operators import EntanglerPair, LabeledOperator, gate_fidelity, iswap_pair
from .pulses import (DEFAULT_DT, FluxPulse, GateReport, propagate,
                     swap_oscillation_frequency, to_computational_gate,
                     virtual_z_correct)
from .swt import block_diagonalize, pair_coupling, resonance_table

DEFAULT_DELTA = 0.05        # rad, drive amplitude (free knob)
DEFAULT_THETA0 = 0.2 * math.pi  # rad, static flux offset (free knob)
DEFAULT_EDGE = 10.0         # ns, sinusoidal rise / fall span
DEFAULT_WINDOW = 0.15       # fractional duration search half-width
MIN_FIDELITY = 0.9          # below this at every scanned duration -> failure
PHASE_GRID = 16             # coarse drive-phase samples before refinement
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def default_pulse_template(theta0: float = DEFAULT_THETA0,
                           delta: float = DEFAULT_DELTA,
                           t_rise: float = DEFAULT_EDGE,
                           t_fall: float = DEFAULT_EDGE,
                           phase: float = 0.0) -> FluxPulse:
    """Template pulse; omega and duration are placeholders calibrate overwrites."""
    return FluxPulse(theta0=theta0, delta=delta, omega=1.0,
                     duration=max(2.0 * (t_rise + t_fall), 1.0),
                     t_rise=t_rise, t_fall=t_fall, phase=phase)


def predict_duration(j_prime: float, delta: float, theta: float,
                     t_rise: float = DEFAULT_EDGE,
                     t_fall: float = DEFAULT_EDGE) -> float:
    """Linear-model pulse duration for a rotation by theta.

    T = |theta| / (2*pi*|j_prime|*delta) + (t_rise + t_fall)/2, the sinusoidal
    edges each counted as half a span of effective drive.
    """
    if j_prime == 0 or not math.isfinite(j_prime):
        raise InvalidArgumentError("j_prime must be nonzero and finite")
    if delta <= 0 or not math.isfinite(delta):
        raise InvalidArgumentError("delta must be positive")
    if t_rise < 0 or t_fall < 0:
        raise InvalidArgumentError("edge times must be non-negative")
    return abs(theta) / (2.0 * math.pi * abs(j_prime) * delta) + 0.5 * (t_rise + t_fall)


def best_phase_correction(u9: LabeledOperator, pair: EntanglerPair, theta: float,
                          grid: int = PHASE_GRID, tol: float = 1e-4):
    """Maximize trace fidelity over the drive-phase target freedom and virtual Z.

    The target element phase e^{-i*phi} is a genuine degree of freedom beyond the
    per-qutrit Z phases (Z acts on whole rows, phi only on the swapped pair), so
    both are optimized: a coarse phi grid, then golden-section refinement, with a
    closed-form virtual-Z ascent inside each evaluation.

    Returns (corrected gate, z_angles, phi_best, fidelity).
    """
    cache = {}

    def evaluate(phi: float):
        key = round(phi, 9)
        if key not in cache:
            corrected, z_angles = virtual_z_correct(
                u9, iswap_pair(pair, theta, phi))
            fid = gate_fidelity(corrected, iswap_pair(pair, theta, phi))
            cache[key] = (fid, corrected, z_angles, phi)
        return cache[key]

    best = max((evaluate(2.0 * math.pi * k / grid) for k in range(grid)),
               key=lambda rec: rec[0])
    step = 2.0 * math.pi / grid
    a, b = best[3] - step, best[3] + step
    c, d = b - _INVPHI * (b - a), a + _INVPHI * (b - a)
    while b - a > tol:
        if evaluate(c)[0] >= evaluate(d)[0]:
            b, d = d, c
            c = b - _INVPHI * (b - a)
        else:
            a, c = c, d
            d = a + _INVPHI * (b - a)
    best = max(cache.values(), key=lambda rec: rec[0])
    fid, corrected, z_angles, phi = best
    return corrected, z_angles, phi % (2.0 * math.pi), fid


@dataclasses.dataclass
class CalibrationResult:
    """Outcome of a duration-search calibration for one exchange rotation."""

    pulse: FluxPulse
    achieved_angle: float       # rad, sign matching the requested theta
    report: GateReport
    search_trace: list          # (duration_ns, fidelity) in evaluation order
    drive_phase: float = 0.0    # rad, target-phase freedom applied
    j_prime_effective: float = 0.0     # GHz/rad, measured rate used for prediction
    j_prime_perturbative: float = 0.0  # GHz/rad, effective-frame flux derivative
    predicted_duration: float = 0.0    # ns, linear-model seed

    def to_json_dict(self) -> dict:
        return {
            "pulse": self.pulse.to_json_dict(),
            "achieved_angle_rad": self.achieved_angle,
            "drive_phase_rad": self.drive_phase,
            "j_prime_effective_GHz_per_rad": self.j_prime_effective,
            "j_prime_perturbative_GHz_per_rad": self.j_prime_perturbative,
            "predicted_duration_ns": self.predicted_duration,
            "report": self.report.to_json_dict(),
            "search_trace": [{"duration_ns": t, "fidelity": f}
                             for t, f in self.search_trace],
        }


def _target_name(pair: EntanglerPair, theta: float) -> str:
    i, j = pair.state_labels
    return f"iswap_{i}{j}({theta:+.6f})"


def calibrate(params: CircuitParams, target, pulse_template: FluxPulse = None,
              window: float = DEFAULT_WINDOW, *, dt: float = DEFAULT_DT,
              levels_per_mode: int = DEFAULT_LEVELS, n_max: int = DEFAULT_N_MAX,
              coarse_points: int = 9, min_fidelity: float = MIN_FIDELITY,
              refine_tol: float = 0.25, omega_override: float = None,
              validate_final: bool = True) -> CalibrationResult:
    """Calibrate the pulse duration for a target exchange rotation.

    target is (pair, theta) with pair an EntanglerPair and theta the rotation
    angle in radians. The drive frequency is set to the dressed resonance of the
    pair (omega_override replaces it, e.g. for detuning studies); durations are
    scanned over [T0*(1-window), T0*(1+window)] and refined by golden section on
    the corrected trace fidelity. Raises a calibration failure (with the search
    trace attached) if no duration reaches min_fidelity.
    """
    pair, theta = target
    if not isinstance(pair, EntanglerPair):
        raise InvalidArgumentError("target pair must be an EntanglerPair")
    theta = float(theta)
    if not math.isfinite(theta):
        raise InvalidArgumentError("target angle must be finite")
    if not 0.0 < window <= 0.5:
        raise InvalidArgumentError("window must lie in (0, 0.5]")
    tpl = pulse_template if pulse_template is not None else default_pulse_template()
    labels = pair.state_labels

    pc = pair_coupling(params, labels, tpl.theta0,
                       levels_per_mode=levels_per_mode, n_max=n_max)
    if pc.degenerate:
        raise CalibrationError(
            f"pair {labels} is degenerate at theta0={tpl.theta0:.4f}; "
            "no resolvable resonance", trace=[])
    omega = abs(pc.resonance) if omega_override is None else abs(omega_override)
    if omega <= 0:
        raise CalibrationError(f"no resonance for pair {labels}", trace=[])

    # Effective exchange rate at the gate amplitude: one-period stroboscopic
    # measurement; seeding the linear model with it keeps the true optimum
    # inside the search window.
    f_osc, _ = swap_oscillation_frequency(
        params, labels, tpl.delta, tpl.theta0, omega=omega, dt=dt,
        levels_per_mode=levels_per_mode, n_max=n_max)
    j_eff = 2.0 * f_osc / tpl.delta
    if j_eff <= 0:
        raise CalibrationError(
            f"no measurable exchange rate for pair {labels}", trace=[])

    floor = tpl.t_rise + tpl.t_fall
    t0 = predict_duration(j_eff, tpl.delta, theta, tpl.t_rise, tpl.t_fall)
    lo = max(t0 * (1.0 - window), floor)
    hi = max(t0 * (1.0 + window), floor)

    lab = assemble_hamiltonian(params, tpl.theta0, levels_per_mode, n_max)
    frame = block_diagonalize(lab)
    name = _target_name(pair, theta)
    trace = []
    cache = {}

    def evaluate(duration: float):
        key = round(float(duration), 6)
        if key in cache:
            return cache[key]
        pulse = dataclasses.replace(tpl, omega=omega, duration=key)
        u_lab = propagate(params, pulse, dt=dt, levels_per_mode=levels_per_mode,
                          n_max=n_max, validate=False)
        base = to_computational_gate(u_lab, frame, key, pulse=pulse)
        corrected, z_angles, phi, fid = best_phase_correction(base.u9, pair, theta)
        uncorr = gate_fidelity(base.u9, iswap_pair(pair, theta, phi))
        report = GateReport(u9=corrected, fidelity=fid, leakage=base.leakage,
                            duration=key, target_label=name, pulse=pulse,
                            uncorrected_fidelity=uncorr, z_angles=z_angles,
                            raw_u9=base.u9)
        cache[key] = (fid, report, phi)
        trace.append((key, fid))
        return cache[key]

    if hi - lo < 1e-9:           # zero-plateau target (theta = 0): nothing to scan
        grid = [lo]
    else:
        grid = list(np.linspace(lo, hi, coarse_points))
    for duration in grid:
        evaluate(duration)
    best_t = max(cache, key=lambda k: cache[k][0])

    if len(grid) > 1:
        spacing = grid[1] - grid[0]
        a = max(best_t - spacing, lo)
        b = min(best_t + spacing, hi)
        c, d = b - _INVPHI * (b - a), a + _INVPHI * (b - a)
        while b - a > refine_tol:
            if evaluate(c)[0] >= evaluate(d)[0]:
                b, d = d, c
                c = b - _INVPHI * (b - a)
            else:
                a, c = c, d
                d = a + _INVPHI * (b - a)
        best_t = max(cache, key=lambda k: cache[k][0])

    fid, report, phi = cache[best_t]
    if fid < min_fidelity:
        raise CalibrationError(
            f"no duration in [{lo:.2f}, {hi:.2f}] ns reached fidelity "
            f"{min_fidelity} for {name} (best {fid:.4f} at {best_t:.2f} ns)",
            trace=list(trace))
    if validate_final:  # accuracy gate on the returned pulse only
        propagate(params, report.pulse, dt=dt, levels_per_mode=levels_per_mode,
                  n_max=n_max, validate=True)

    i_idx, j_idx = pair.indices
    amp = min(1.0, abs(report.u9.entries[j_idx, i_idx]))
    achieved = math.copysign(2.0 * math.asin(amp), theta) if theta else \
        2.0 * math.asin(amp)
    return CalibrationResult(pulse=report.pulse, achieved_angle=achieved,
                             report=report, search_trace=list(trace),
                             drive_phase=phi, j_prime_effective=j_eff,
                             j_prime_perturbative=pc.j_flux_derivative,
                             predicted_duration=t0)


@dataclasses.dataclass
class FlaggedTransition:
    """A dressed transition lying within the crowding guard of the drive."""

    pair: tuple            # two-qutrit labels
    resonance: float       # GHz, signed dressed splitting
    distance: float        # GHz, | |resonance| - |omega| |
    coupling: complex      # GHz, effective exchange element
    degenerate: bool = False

    def to_json_dict(self) -> dict:
        return {"pair": list(self.pair), "resonance_GHz": self.resonance,
                "distance_GHz": self.distance,
                "coupling_GHz": [self.coupling.real, self.coupling.imag],
                "degenerate": self.degenerate}


def crowding_report(params: CircuitParams, omega: float, flux: float,
                    guard: float = 0.1, *, levels_per_mode: int = DEFAULT_LEVELS,
                    n_max: int = DEFAULT_N_MAX) -> list:
    """Dressed transitions whose |splitting| lies within guard of |omega|.

    A modulation at omega drives any pair whose splitting magnitude is close to
    |omega| regardless of sign, so the distance is | |splitting| - |omega| |.
    The driven pair itself appears at distance ~0; an empty list means a clean
    operating point. Sorted by distance.
    """
    if guard < 0 or not math.isfinite(guard):
        raise InvalidArgumentError("guard must be non-negative")
    omega = abs(omega)
    flagged = []
    for pc in resonance_table(params, flux, levels_per_mode=levels_per_mode,
                              n_max=n_max):
        distance = abs(abs(pc.resonance) - omega)
        if distance <= guard:
            flagged.append(FlaggedTransition(pc.pair, pc.resonance, distance,
                                             pc.j_value, pc.degenerate))
    flagged.sort(key=lambda ft: ft.distance)
    return flagged

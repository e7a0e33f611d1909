"""Shared fixtures.

The calibration fixtures are session-scoped because each one runs minutes of
125-dimensional propagation at the default 1 ps step; the acceptance criteria
and the module-level invariants deliberately reuse the same artifacts.
"""
import json
import math
import time

import pytest
from hypothesis import settings

from qpw.calibration import calibrate, default_pulse_template
from qpw.circuit import REFERENCE_PARAMS, assemble_hamiltonian
from qpw.compiler import compose_simulated_cz, schedule_for_composition
from qpw.operators import EntanglerPair
from qpw.swt import block_diagonalize, resonance_table

settings.register_profile("workbench", deadline=None, max_examples=50)
settings.load_profile("workbench")

OPERATING_FLUX = 0.2 * math.pi
THIRD = 2.0 * math.pi / 3.0


def _timed(label, fn):
    t0 = time.time()
    result = fn()
    print(f"[fixture] {label}: {time.time() - t0:.1f} s", flush=True)
    return result


@pytest.fixture(scope="session")
def ref_params():
    return REFERENCE_PARAMS


@pytest.fixture(scope="session")
def lab_ref():
    """Lab Hamiltonian at Table-1 parameters and the operating flux offset."""
    return assemble_hamiltonian(REFERENCE_PARAMS, OPERATING_FLUX)


@pytest.fixture(scope="session")
def frame_ref(lab_ref):
    """Dressed frame at the operating flux offset."""
    return block_diagonalize(lab_ref)


@pytest.fixture(scope="session")
def table_ref():
    """Spectator resonance table at the operating flux offset."""
    return resonance_table(REFERENCE_PARAMS, OPERATING_FLUX)


@pytest.fixture(scope="session")
def cal_third():
    """Calibrated 2*pi/3 rotations on both exchange pairs (default numerics)."""
    out = {}
    for pair in (EntanglerPair.ISWAP_0110, EntanglerPair.ISWAP_1221):
        out[pair] = _timed(
            f"calibrate {pair.name} at 2pi/3",
            lambda p=pair: calibrate(REFERENCE_PARAMS, (p, THIRD),
                                     pulse_template=default_pulse_template()))
        rep = out[pair].report
        print(f"[fixture] {pair.name}: fidelity {rep.fidelity:.6f} "
              f"leakage {rep.leakage:.2e} duration {rep.duration:.2f} ns",
              flush=True)
    return out


@pytest.fixture(scope="session")
def composition_cals():
    """Calibrated entanglers at the verified composition schedule's angles.

    Drive amplitude is chosen per pair: the 01-10 exchange sits 71 MHz from
    the 12-21 spectator, so it runs at a weaker modulation (longer pulse) to
    keep the off-resonant spectator error down; the 12-21 exchange tolerates
    the faster default.
    """
    deltas = {EntanglerPair.ISWAP_0110: 0.03, EntanglerPair.ISWAP_1221: 0.05}
    out = {}
    for pair, angle in schedule_for_composition():
        out[pair] = _timed(
            f"calibrate {pair.name} at {angle / math.pi:+.4f}pi",
            lambda p=pair, a=angle: calibrate(
                REFERENCE_PARAMS, (p, a),
                pulse_template=default_pulse_template(delta=deltas[p])))
        rep = out[pair].report
        print(f"[fixture] {pair.name}: fidelity {rep.fidelity:.6f} "
              f"leakage {rep.leakage:.2e} duration {rep.duration:.2f} ns",
              flush=True)
    return out


@pytest.fixture(scope="session")
def composed_cz(composition_cals):
    """CZ composed from the simulated entangler blocks and ideal locals."""
    r1 = composition_cals[EntanglerPair.ISWAP_0110].report
    r2 = composition_cals[EntanglerPair.ISWAP_1221].report
    report = compose_simulated_cz(r1, r2)
    print(f"[fixture] composed CZ: fidelity {report.fidelity:.6f} "
          f"(uncorrected {report.uncorrected_fidelity:.6f})", flush=True)
    return report


@pytest.fixture(scope="session")
def fast_config_path(tmp_path_factory):
    """Config with reduced numerics for CLI plumbing tests (not physics grade)."""
    doc = {
        "circuit": {
            "transmons": {"ej1": 13.5, "ec1": 0.28, "ej2": 20.5, "ec2": 0.24,
                          "ejc0": 39.5, "ecc": 0.22},
            "couplings": {"g1": 0.146, "g2": 0.164, "g12": 0.015},
        },
        "numerics": {"dt_ns": 0.002, "levels_per_mode": 3, "n_max": 12},
    }
    path = tmp_path_factory.mktemp("cli") / "fast_config.json"
    path.write_text(json.dumps(doc, indent=2) + "\n")
    return path

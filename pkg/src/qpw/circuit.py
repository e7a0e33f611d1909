"""Circuit quantization: capacitance network, charge-basis transmons, product-space Hamiltonian.

Conventions: all energies are E/h in GHz, time in ns, flux is the dimensionless
argument of the coupler junction modulation (radians), restricted to (-pi/2, pi/2)
so the modulation cos factor stays on its smooth positive branch. Each transmon is
4*E_C*n^2 - E_J*cos(phi) with E_C = e^2/2C.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import InvalidArgumentError, NumericFailure
from .operators import LabeledOperator

E_CHARGE = 1.602176634e-19  # C
PLANCK_H = 6.62607015e-34   # J s

DEFAULT_N_MAX = 25
DEFAULT_LEVELS = 5
FLUX_LIMIT = math.pi / 2


def charging_energy_ghz(c_fF: float) -> float:
    """E_C = e^2 / 2C as a frequency in GHz."""
    return E_CHARGE ** 2 / (2.0 * PLANCK_H * c_fF * 1e-15) / 1e9


@dataclass
class CapacitanceSet:
    """Node and coupling capacitances in femtofarads (order: transmon 1, coupler, transmon 2)."""

    c1: float
    c2: float
    cc: float
    c1c: float
    c2c: float
    c12: float

    def __post_init__(self):
        vals = (self.c1, self.c2, self.cc, self.c1c, self.c2c, self.c12)
        if any(not (math.isfinite(v) and v > 0) for v in vals):
            raise InvalidArgumentError("all capacitances must be finite and positive")
        # intended hierarchy: c12 << c1c, c2c << c1, c2 ~ cc
        worst = max(self.c12 / min(self.c1c, self.c2c),
                    max(self.c1c, self.c2c) / min(self.c1, self.c2, self.cc))
        if worst > 0.2:
            warnings.warn(f"capacitance hierarchy ratio {worst:.2f} exceeds 0.2; "
                          "the approximate inversion may be poor", stacklevel=2)

    def matrix(self) -> np.ndarray:
        return np.array([
            [self.c1 + self.c1c + self.c12, -self.c1c, -self.c12],
            [-self.c1c, self.cc + self.c1c + self.c2c, -self.c2c],
            [-self.c12, -self.c2c, self.c2 + self.c2c + self.c12],
        ])


def invert_capacitance(caps: CapacitanceSet, mode: str = "exact") -> np.ndarray:
    """Inverse of the 3x3 capacitance matrix (order: node 1, coupler, node 2).

    'approximate' is the weak-coupling closed form: reciprocal total node
    capacitances on the diagonal, nearest-neighbor terms C_ic/(C_i*C_c), and an
    end-to-end term combining the direct capacitance with the coupler-mediated
    path. C_i here are the full node capacitances (the matrix diagonals); using
    the junction capacitances alone leaves first-order errors of order C_ic/C_i.
    """
    if mode == "exact":
        m = caps.matrix()
        if abs(np.linalg.det(m)) < 1e-12:
            raise NumericFailure("capacitance matrix is singular")
        return np.linalg.inv(m)
    if mode == "approximate":
        c1 = caps.c1 + caps.c1c + caps.c12
        cc = caps.cc + caps.c1c + caps.c2c
        c2 = caps.c2 + caps.c2c + caps.c12
        thru = (caps.c12 + caps.c1c * caps.c2c / cc) / (c1 * c2)
        return np.array([
            [1.0 / c1, caps.c1c / (c1 * cc), thru],
            [caps.c1c / (c1 * cc), 1.0 / cc, caps.c2c / (c2 * cc)],
            [thru, caps.c2c / (c2 * cc), 1.0 / c2],
        ])
    raise InvalidArgumentError(f"unknown inversion mode {mode!r}")


@dataclass
class CircuitParams:
    """Energy-scale description: junction energies, charging energies, charge couplings (GHz)."""

    ej1: float
    ec1: float
    ej2: float
    ec2: float
    ejc0: float
    ecc: float
    g1: float
    g2: float
    g12: float

    def __post_init__(self):
        for name in ("ej1", "ec1", "ej2", "ec2", "ejc0", "ecc"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InvalidArgumentError(f"{name} must be finite and positive")
        for name in ("g1", "g2", "g12"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidArgumentError(f"{name} must be finite")
        if self.g1 > 0 and self.g2 > 0 and self.g12 > min(self.g1, self.g2):
            warnings.warn("g12 exceeds g1 or g2; outside the intended weak direct-coupling regime",
                          stacklevel=2)
        # dispersive-regime sanity: couplings small against the qubit frequency scale
        scale = math.sqrt(8 * self.ej1 * self.ec1) - self.ec1
        if scale > 0 and max(abs(self.g1), abs(self.g2)) / scale > 0.1:
            warnings.warn("g/frequency ratio exceeds 0.1; perturbative frames may be inaccurate",
                          stacklevel=2)

    def to_json_dict(self) -> dict:
        return {
            "transmons": {"ej1": self.ej1, "ec1": self.ec1, "ej2": self.ej2,
                          "ec2": self.ec2, "ejc0": self.ejc0, "ecc": self.ecc},
            "couplings": {"g1": self.g1, "g2": self.g2, "g12": self.g12},
        }


def capacitance_to_energies(caps: CapacitanceSet, ej1: float, ej2: float,
                            ejc0: float) -> CircuitParams:
    """Charging energies from e^2/2C and charge couplings from the capacitance network."""
    ec1 = charging_energy_ghz(caps.c1)
    ec2 = charging_energy_ghz(caps.c2)
    ecc = charging_energy_ghz(caps.cc)
    g1 = 8.0 * caps.c1c / math.sqrt(caps.c1 * caps.cc) * math.sqrt(ec1 * ecc)
    g2 = 8.0 * caps.c2c / math.sqrt(caps.c2 * caps.cc) * math.sqrt(ec2 * ecc)
    g12 = (8.0 * (1.0 + caps.c1c * caps.c2c / (caps.c12 * caps.cc))
           * caps.c12 / math.sqrt(caps.c1 * caps.c2) * math.sqrt(ec1 * ec2))
    return CircuitParams(ej1, ec1, ej2, ec2, ejc0, ecc, g1, g2, g12)


@dataclass
class TransmonModes:
    """Kept eigenmodes of a single transmon diagonalized in the charge basis."""

    energies: np.ndarray           # GHz, ascending, ground shifted to 0
    charge_basis_vectors: np.ndarray  # columns over n in [-n_max, n_max]
    n_matrix: np.ndarray           # charge operator in the kept eigenbasis
    levels_kept: int

    @property
    def omega01(self) -> float:
        return float(self.energies[1] - self.energies[0])

    @property
    def anharmonicity(self) -> float:
        return float((self.energies[2] - self.energies[1]) - (self.energies[1] - self.energies[0]))


def bare_transmon(ej: float, ec: float, n_max: int = DEFAULT_N_MAX,
                  levels_kept: int = DEFAULT_LEVELS) -> TransmonModes:
    """Diagonalize 4*E_C*n^2 - E_J*cos(phi) over charge states n in [-n_max, n_max]."""
    if levels_kept > 2 * n_max + 1:
        raise InvalidArgumentError("levels_kept exceeds the charge-basis dimension")
    if ec <= 0 or ej < 0:
        raise InvalidArgumentError("need ec > 0 and ej >= 0")
    n = np.arange(-n_max, n_max + 1)
    diag = 4.0 * ec * n.astype(float) ** 2
    off = np.full(2 * n_max, -ej / 2.0)  # cos(phi) couples n to n +- 1
    try:
        vals, vecs = eigh_tridiagonal(diag, off, select="i",
                                      select_range=(0, levels_kept - 1))
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise NumericFailure(f"transmon diagonalization failed: {exc}") from exc
    # gauge: real vectors with positive adjacent charge matrix elements
    if vecs[np.abs(vecs[:, 0]).argmax(), 0] < 0:
        vecs[:, 0] = -vecs[:, 0]
    nvec = n.astype(float)
    for k in range(1, levels_kept):
        if np.dot(vecs[:, k - 1] * nvec, vecs[:, k]) < 0:
            vecs[:, k] = -vecs[:, k]
    n_mat = vecs.T @ (nvec[:, None] * vecs)
    n_mat = 0.5 * (n_mat + n_mat.T)
    return TransmonModes(vals - vals[0], vecs, n_mat, levels_kept)


def _cosphi_matrix(n_max: int) -> np.ndarray:
    """cos(phi) in the charge basis: half on the two adjacent-charge diagonals."""
    m = np.zeros((2 * n_max + 1, 2 * n_max + 1))
    idx = np.arange(2 * n_max)
    m[idx, idx + 1] = 0.5
    m[idx + 1, idx] = 0.5
    return m


@dataclass
class LabHamiltonian:
    """Product-space Hamiltonian split into uncoupled, coupler-interaction, and direct parts.

    Basis labels are (n1, nc, n2) occupation triples of the kept bare eigenmodes at
    the build flux. cosphi_c and ncc2 are the coupler's modulated and static charge
    terms projected onto its kept modes, so the total Hamiltonian is affine in
    u = cos(flux): H(u) = (static parts) - ejc0 * u * cosphi_c.
    """

    h0: LabeledOperator
    hm: LabeledOperator
    hd: LabeledOperator
    flux: float
    params: CircuitParams
    modes: tuple            # (q1, coupler, q2) TransmonModes
    cosphi_c: np.ndarray    # coupler cos(phi) in kept modes
    ncc2: np.ndarray        # coupler 4*ecc*n^2 in kept modes
    levels_per_mode: int

    def total(self) -> LabeledOperator:
        return LabeledOperator(self.h0.entries + self.hm.entries + self.hd.entries,
                               self.h0.labels)

    def static_part(self) -> np.ndarray:
        """Everything in H(u) that does not multiply u = cos(flux)."""
        d = self.levels_per_mode
        i5 = np.eye(d)
        t1, _, t2 = self.modes
        stat = (np.kron(np.kron(np.diag(t1.energies), i5), i5)
                + np.kron(np.kron(i5, self.ncc2), i5)
                + np.kron(np.kron(i5, i5), np.diag(t2.energies)))
        return stat + self.hm.entries + self.hd.entries

    def modulated_part(self) -> np.ndarray:
        """Coefficient of u = cos(flux) in H(u)."""
        d = self.levels_per_mode
        i5 = np.eye(d)
        return -self.params.ejc0 * np.kron(np.kron(i5, self.cosphi_c), i5)

    def at_cos(self, u: float) -> np.ndarray:
        return self.static_part() + u * self.modulated_part()


def product_labels(levels_per_mode: int) -> tuple:
    return tuple((n1, nc, n2)
                 for n1 in range(levels_per_mode)
                 for nc in range(levels_per_mode)
                 for n2 in range(levels_per_mode))


def assemble_hamiltonian(params: CircuitParams, flux: float,
                         levels_per_mode: int = DEFAULT_LEVELS,
                         n_max: int = DEFAULT_N_MAX) -> LabHamiltonian:
    """Tensor-product Hamiltonian over (levels_per_mode)^3 kept bare states at fixed flux."""
    if not abs(flux) < FLUX_LIMIT:
        raise InvalidArgumentError(f"flux {flux:.4f} outside the smooth branch (-pi/2, pi/2)")
    if levels_per_mode < 3:
        raise InvalidArgumentError("need at least 3 levels per mode")
    t1 = bare_transmon(params.ej1, params.ec1, n_max, levels_per_mode)
    t2 = bare_transmon(params.ej2, params.ec2, n_max, levels_per_mode)
    ejc = params.ejc0 * math.cos(flux)
    tc = bare_transmon(ejc, params.ecc, n_max, levels_per_mode)

    labels = product_labels(levels_per_mode)
    d = levels_per_mode
    i5 = np.eye(d)
    h0 = (np.kron(np.kron(np.diag(t1.energies), i5), i5)
          + np.kron(np.kron(i5, np.diag(tc.energies)), i5)
          + np.kron(np.kron(i5, i5), np.diag(t2.energies)))
    hm = (params.g1 * np.kron(np.kron(t1.n_matrix, tc.n_matrix), i5)
          + params.g2 * np.kron(np.kron(i5, tc.n_matrix), t2.n_matrix))
    hd = params.g12 * np.kron(np.kron(t1.n_matrix, i5), t2.n_matrix)

    p = tc.charge_basis_vectors
    cosphi_c = p.T @ _cosphi_matrix(n_max) @ p
    cosphi_c = 0.5 * (cosphi_c + cosphi_c.T)
    # charging term referenced to the build-flux ground energy, so that
    # ncc2 - ejc * cosphi_c is exactly diag(tc.energies)
    ncc2 = np.diag(tc.energies) + ejc * cosphi_c
    return LabHamiltonian(
        h0=LabeledOperator(h0, labels),
        hm=LabeledOperator(hm, labels),
        hd=LabeledOperator(hd, labels),
        flux=flux,
        params=params,
        modes=(t1, tc, t2),
        cosphi_c=cosphi_c,
        ncc2=ncc2,
        levels_per_mode=d,
    )


def coupler_frequency(params: CircuitParams, flux: float,
                      n_max: int = DEFAULT_N_MAX) -> float:
    """First transition frequency of the bare coupler at its flux-tuned junction energy."""
    if not abs(flux) < FLUX_LIMIT:
        raise InvalidArgumentError(f"flux {flux:.4f} outside the smooth branch (-pi/2, pi/2)")
    return bare_transmon(params.ejc0 * math.cos(flux), params.ecc, n_max, 3).omega01


# Reference device parameter set: CLI defaults and the regression suite both use it.
REFERENCE_PARAMS = CircuitParams(ej1=13.5, ec1=0.28, ej2=20.5, ec2=0.24,
                                 ejc0=39.5, ecc=0.220, g1=0.146, g2=0.164, g12=0.015)
REFERENCE_CAPS = CapacitanceSet(c1=69.055, c2=80.564, cc=87.888,
                                c1c=5.728, c2c=7.597, c12=0.045)

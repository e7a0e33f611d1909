"""Perturbative block-diagonalization of the coupled-transmon Hamiltonian.

Builds the first-order generator that decouples the charge interactions, the
second-order effective Hamiltonian split into its diagonal (dressed energies)
and off-diagonal (residual exchange coupling) parts, and the dressed frame used
everywhere downstream: exact eigenvectors labeled by their dominant product
state, exact dressed energies, and effective pair couplings with their flux
derivatives.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .circuit import (DEFAULT_LEVELS, DEFAULT_N_MAX, CircuitParams,
                      LabHamiltonian, assemble_hamiltonian)
from .errors import DegeneracyError, InvalidArgumentError, NumericWarning
from .operators import TWO_QUTRIT_LABELS, LabeledOperator

DEGENERACY_CUTOFF = 1e-3   # GHz: pairs closer than this are excluded from the generator
COUPLING_THRESHOLD = 1e-9  # GHz: interaction element that makes a degenerate pair fatal
OVERLAP_FLOOR = 0.5        # dominant-product-state overlap below this is ambiguous
DEFAULT_FD_STEP = 1e-3     # rad: central-difference step for flux derivatives

# spectator-relevant computational pairs, as (q1 q2) digit strings
RESONANCE_PAIRS = (("01", "10"), ("12", "21"), ("11", "02"), ("11", "20"))


def computational_product_label(label: str) -> tuple:
    """Two-qutrit label 'ab' -> product occupation (a, coupler ground, b)."""
    if label not in TWO_QUTRIT_LABELS:
        raise InvalidArgumentError(f"unknown two-qutrit label {label!r}")
    return (int(label[0]), 0, int(label[1]))


def swt_generator(h: LabHamiltonian, cutoff: float = DEGENERACY_CUTOFF) -> LabeledOperator:
    """First-order generator: S_ij = (H_int)_ij / (E_i - E_j) on non-degenerate pairs.

    Diagonal and near-degenerate entries are zero; a near-degenerate pair that the
    interaction actually couples makes the perturbative frame ill-defined and raises.
    """
    lam = np.real(np.diag(h.h0.entries))
    hm = h.hm.entries
    gaps = lam[:, None] - lam[None, :]
    small = np.abs(gaps) < cutoff
    coupled = np.abs(hm) > COUPLING_THRESHOLD
    bad = small & coupled
    np.fill_diagonal(bad, False)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise DegeneracyError((h.h0.labels[i], h.h0.labels[j]),
                              abs(gaps[i, j]), abs(hm[i, j]))
    s1 = np.zeros_like(hm, dtype=complex)
    np.divide(hm, gaps, out=s1, where=~small)
    return LabeledOperator(s1, h.h0.labels)


@dataclass
class DressedFrame:
    """Second-order effective Hamiltonian plus the exact dressed basis at one flux.

    h_sw0/h_swc are the diagonal/off-diagonal parts of the perturbative effective
    Hamiltonian in the product basis. dressed_energies and modal_matrix come from
    exact diagonalization, with eigenvectors assigned to product labels by maximum
    overlap: column k of modal_matrix is the dressed state labeled labels[k], and
    dressed_energies[k] its exact energy. ambiguous_labels lists assignments whose
    dominant overlap fails the dispersive-regime floor (e.g. resonant pairs).
    """

    flux: float
    s1: LabeledOperator
    h_sw0: LabeledOperator
    h_swc: LabeledOperator
    dressed_energies: np.ndarray
    label_map: dict
    modal_matrix: np.ndarray
    overlaps: np.ndarray
    ambiguous_labels: tuple = ()

    @property
    def labels(self) -> tuple:
        return self.h_sw0.labels

    def index(self, label) -> int:
        if isinstance(label, str):
            label = computational_product_label(label)
        return self.h_sw0.labels.index(tuple(label))

    def dressed_energy(self, label) -> float:
        return float(self.dressed_energies[self.index(label)])

    def effective_energy(self, label) -> float:
        """Perturbative (h_sw0) energy, well defined even at exact degeneracy."""
        k = self.index(label)
        return float(np.real(self.h_sw0.entries[k, k]))

    def is_ambiguous(self, label) -> bool:
        if isinstance(label, str):
            label = computational_product_label(label)
        return tuple(label) in self.ambiguous_labels


def _assign_labels(h_total: np.ndarray, labels: tuple):
    """Exact eigendecomposition with eigenvectors matched to product labels.

    Returns (energies_by_label, modal_matrix, overlaps_by_label, ambiguous) where
    modal_matrix column k is the eigenvector assigned to labels[k], sign-fixed so
    its labels[k] component is positive.
    """
    vals, vecs = np.linalg.eigh(h_total)
    weight = np.abs(vecs) ** 2                      # weight[k, e] = |<label k|eig e>|^2
    row, col = linear_sum_assignment(-weight)       # row is 0..n-1 in order
    energies = vals[col]
    modal = vecs[:, col].astype(complex)
    overlaps = weight[np.arange(len(labels)), col]
    for k in range(modal.shape[1]):
        pivot = modal[k, k]
        if abs(pivot) > 1e-12:
            modal[:, k] *= np.conj(pivot) / abs(pivot)
        else:  # fall back to the largest component
            p = modal[np.abs(modal[:, k]).argmax(), k]
            modal[:, k] *= np.conj(p) / abs(p)
    ambiguous = tuple(labels[k] for k in range(len(labels))
                      if overlaps[k] <= OVERLAP_FLOOR + 1e-6)
    return energies, modal, overlaps, ambiguous


def block_diagonalize(h: LabHamiltonian, cutoff: float = DEGENERACY_CUTOFF) -> DressedFrame:
    """Effective Hamiltonian through second order, split diagonal/off-diagonal.

    H_eff = H_0 + H_direct + [S, H_int] + (1/2)[S, [S, H_0]] with the first-order
    static generator S evaluated at the Hamiltonian's build flux.
    """
    s1 = swt_generator(h, cutoff)
    s = s1.entries
    h0 = h.h0.entries.astype(complex)
    hm = h.hm.entries.astype(complex)
    h_eff = (h0 + h.hd.entries
             + (s @ hm - hm @ s)
             + 0.5 * (s @ (s @ h0 - h0 @ s) - (s @ h0 - h0 @ s) @ s))
    h_eff = 0.5 * (h_eff + h_eff.conj().T)
    diag = np.diag(np.real(np.diag(h_eff)))
    offdiag = h_eff - diag
    energies, modal, overlaps, ambiguous = _assign_labels(h.total().entries, h.h0.labels)
    return DressedFrame(
        flux=h.flux,
        s1=s1,
        h_sw0=LabeledOperator(diag.astype(complex), h.h0.labels),
        h_swc=LabeledOperator(offdiag, h.h0.labels),
        dressed_energies=energies,
        label_map={lab: k for k, lab in enumerate(h.h0.labels)},
        modal_matrix=modal,
        overlaps=overlaps,
        ambiguous_labels=ambiguous,
    )


@dataclass
class PairCoupling:
    """Effective exchange element between two computational states at fixed flux."""

    pair: tuple                 # two-qutrit labels, e.g. ("01", "10")
    j_value: complex            # GHz, <i|h_swc|j>
    j_flux_derivative: float    # GHz/rad
    resonance: float            # GHz, dressed energy difference E_i - E_j
    degenerate: bool = False    # labels mix ~50/50; resonance from perturbative energies

    def conjugate_pair(self) -> "PairCoupling":
        return PairCoupling((self.pair[1], self.pair[0]), np.conj(self.j_value),
                            self.j_flux_derivative, -self.resonance, self.degenerate)


def _coupling_at(frame: DressedFrame, pair: tuple) -> complex:
    i = frame.index(pair[0])
    j = frame.index(pair[1])
    return complex(frame.h_swc.entries[i, j])


def _pair_from_frames(frames: dict, pair: tuple, fd_step: float) -> PairCoupling:
    """Assemble a PairCoupling from frames keyed by flux offset in units of fd_step."""
    f0 = frames[0]
    j0 = _coupling_at(f0, pair)
    d_full = (np.real(_coupling_at(frames[1], pair))
              - np.real(_coupling_at(frames[-1], pair))) / (2 * fd_step)
    d_half = (np.real(_coupling_at(frames[0.5], pair))
              - np.real(_coupling_at(frames[-0.5], pair))) / fd_step
    scale = max(abs(d_full), abs(d_half), 1e-12)
    if abs(d_full - d_half) / scale > 0.10:
        warnings.warn(
            f"flux-derivative step-halving disagreement for {pair}: "
            f"{d_full:.3e} vs {d_half:.3e} GHz/rad at step {fd_step:.1e}",
            NumericWarning, stacklevel=3)
    degenerate = f0.is_ambiguous(pair[0]) or f0.is_ambiguous(pair[1])
    if degenerate:
        resonance = f0.effective_energy(pair[0]) - f0.effective_energy(pair[1])
    else:
        resonance = f0.dressed_energy(pair[0]) - f0.dressed_energy(pair[1])
    return PairCoupling(pair=tuple(pair), j_value=j0, j_flux_derivative=float(d_half),
                        resonance=float(resonance), degenerate=degenerate)


def _frames_for_derivative(params: CircuitParams, flux: float, fd_step: float,
                           levels_per_mode: int, n_max: int, cutoff: float) -> dict:
    if fd_step <= 0:
        raise InvalidArgumentError("fd_step must be positive")
    if abs(flux) + fd_step >= math.pi / 2:
        raise InvalidArgumentError(
            f"flux {flux:.4f} +- fd_step {fd_step:.1e} leaves the smooth branch")
    return {off: block_diagonalize(
                assemble_hamiltonian(params, flux + off * fd_step, levels_per_mode, n_max),
                cutoff)
            for off in (0, 1, -1, 0.5, -0.5)}


def pair_coupling(params: CircuitParams, pair: tuple, flux: float,
                  fd_step: float = DEFAULT_FD_STEP,
                  levels_per_mode: int = DEFAULT_LEVELS, n_max: int = DEFAULT_N_MAX,
                  cutoff: float = DEGENERACY_CUTOFF) -> PairCoupling:
    """Exchange coupling, its flux derivative (central difference), and resonance."""
    frames = _frames_for_derivative(params, flux, fd_step, levels_per_mode, n_max, cutoff)
    return _pair_from_frames(frames, tuple(pair), fd_step)


def resonance_table(params: CircuitParams, flux: float,
                    fd_step: float = DEFAULT_FD_STEP,
                    levels_per_mode: int = DEFAULT_LEVELS, n_max: int = DEFAULT_N_MAX,
                    cutoff: float = DEGENERACY_CUTOFF) -> list:
    """PairCouplings for the spectator-relevant pairs, sorted by |resonance|."""
    frames = _frames_for_derivative(params, flux, fd_step, levels_per_mode, n_max, cutoff)
    table = [_pair_from_frames(frames, pair, fd_step) for pair in RESONANCE_PAIRS]
    table.sort(key=lambda pc: abs(pc.resonance))
    return table


def coupler_excitation_suppression(h: LabHamiltonian, frame: DressedFrame = None,
                                   block: str = "computational") -> dict:
    """Largest matrix element changing the coupler occupation, before vs after dressing.

    Returns the raw and effective maxima (GHz) and their ratio. 'computational'
    scans rows in the coupler-ground qutrit block against every coupler-excited
    column — the couplings the dressing is built to remove. 'full' scans all
    pairs including highly excited states, where the perturbative expansion
    parameter is order one and little suppression should be expected.
    """
    if frame is None:
        frame = block_diagonalize(h)
    labels = np.array(h.h0.labels)
    coupler_occ = labels[:, 1]
    lab_total = h.total().entries
    h_eff = frame.h_sw0.entries + frame.h_swc.entries
    if block == "computational":
        rows = np.array([frame.index(s) for s in TWO_QUTRIT_LABELS])
        cols = np.where(coupler_occ >= 1)[0]
        sel = np.ix_(rows, cols)
        lab_max = float(np.abs(lab_total[sel]).max())
        eff_max = float(np.abs(h_eff[sel]).max())
    elif block == "full":
        differs = coupler_occ[:, None] != coupler_occ[None, :]
        lab_max = float(np.abs(lab_total)[differs].max())
        eff_max = float(np.abs(h_eff)[differs].max())
    else:
        raise InvalidArgumentError(f"unknown suppression block {block!r}")
    return {"lab_max_GHz": lab_max, "effective_max_GHz": eff_max,
            "suppression": lab_max / eff_max if eff_max > 0 else math.inf}


def spectrum_agreement(h: LabHamiltonian, frame: DressedFrame = None,
                       labels: tuple = None) -> dict:
    """Per-label gap between the effective spectrum and the exact spectrum (GHz).

    The effective Hamiltonian h_sw0 + h_swc is diagonalized and its eigenstates
    are label-assigned the same way as the exact ones; for each requested label the
    two energies are compared. Defaults to the computational block (coupler ground,
    both transmons at most doubly excited), where the second-order frame is valid.
    """
    if frame is None:
        frame = block_diagonalize(h)
    eff_energies, _, _, _ = _assign_labels(frame.h_sw0.entries + frame.h_swc.entries,
                                           h.h0.labels)
    if labels is None:
        labels = tuple(computational_product_label(s) for s in TWO_QUTRIT_LABELS)
    out = {}
    for lab in labels:
        k = frame.index(lab)
        out[lab] = {"effective_GHz": float(np.real(eff_energies[k])),
                    "exact_GHz": float(frame.dressed_energies[k]),
                    "mismatch_GHz": float(abs(eff_energies[k]
                                              - frame.dressed_energies[k]))}
    return out

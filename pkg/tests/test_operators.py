"""Gate vocabulary: rotation algebra, entangler blocks, fidelity, ansatz assembly."""
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qpw.errors import InvalidArgumentError
from qpw.operators import (SUBSPACES, TWO_QUTRIT_LABELS, AnsatzParams,
                           EntanglerPair, LabeledOperator, gate_fidelity,
                           identity_gate, iswap_pair, local_chain, local_layer,
                           qutrit_cz, rx, rz)

angles = st.floats(min_value=-4 * math.pi, max_value=4 * math.pi,
                   allow_nan=False, allow_infinity=False)
subspaces = st.sampled_from(SUBSPACES)
pairs = st.sampled_from(list(EntanglerPair))


# ---------------------------------------------------------------- rotations

def test_rotation_zero_angle_is_identity():
    for sub in SUBSPACES:
        assert np.allclose(rx(sub, 0.0).entries, np.eye(3))
        assert np.allclose(rz(sub, 0.0).entries, np.eye(3))


def test_rx_half_angle_block():
    u = rx((0, 1), math.pi / 2).entries
    c, s = math.cos(math.pi / 4), math.sin(math.pi / 4)
    assert np.isclose(u[0, 0], c) and np.isclose(u[1, 1], c)
    assert np.isclose(u[0, 1], -1j * s) and np.isclose(u[1, 0], -1j * s)
    assert np.isclose(u[2, 2], 1.0)  # untouched level


def test_rz_phases():
    u = rz((0, 2), 1.2).entries
    assert np.isclose(u[0, 0], np.exp(-0.6j))
    assert np.isclose(u[2, 2], np.exp(+0.6j))
    assert np.isclose(u[1, 1], 1.0)


@given(subspaces, angles)
def test_rotations_unitary(sub, a):
    assert rx(sub, a).is_unitary()
    assert rz(sub, a).is_unitary()


@given(subspaces, angles)
def test_rotation_inverse(sub, a):
    u = rx(sub, a).entries
    assert np.allclose(u @ rx(sub, -a).entries, np.eye(3), atol=1e-12)


def test_rotation_rejects_bad_subspace():
    with pytest.raises(InvalidArgumentError):
        rx((0, 3), 0.1)
    with pytest.raises(InvalidArgumentError):
        rx((1, 0), 0.1)  # subspaces are the ordered pairs only


def test_rotation_rejects_non_finite_angle():
    with pytest.raises(InvalidArgumentError):
        rz((0, 1), math.inf)


@given(subspaces, st.floats(min_value=-2 * math.pi, max_value=2 * math.pi,
                            allow_nan=False))
def test_rotation_period_is_4pi(sub, a):
    assert np.allclose(rx(sub, a).entries, rx(sub, a + 4 * math.pi).entries,
                       atol=1e-12)
    assert np.allclose(rz(sub, a).entries, rz(sub, a + 4 * math.pi).entries,
                       atol=1e-12)


def test_rotation_2pi_is_not_identity():
    """Half-angle convention: a 2*pi turn flips the subspace sign but leaves the
    third level alone, so it is not even an identity up to global phase."""
    u = rz((0, 1), 2 * math.pi).entries
    assert np.allclose(np.diag(u), [-1.0, -1.0, 1.0])
    labels = ("0", "1", "2")
    fid = gate_fidelity(LabeledOperator(u, labels),
                        LabeledOperator(np.eye(3), labels))
    assert fid < 0.5


# ---------------------------------------------------------------- entangler

def test_iswap_zero_angle_is_identity():
    for pair in EntanglerPair:
        assert np.allclose(iswap_pair(pair, 0.0).entries, np.eye(9))


def test_iswap_block_structure():
    theta, phi = 0.8, 0.3
    u = iswap_pair(EntanglerPair.ISWAP_0110, theta, phi).entries
    i, j = EntanglerPair.ISWAP_0110.indices
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    assert np.isclose(u[i, i], c) and np.isclose(u[j, j], c)
    assert np.isclose(u[i, j], -1j * s * np.exp(-1j * phi))
    assert np.isclose(u[j, i], -1j * s * np.exp(+1j * phi))
    untouched = [k for k in range(9) if k not in (i, j)]
    assert np.allclose(u[np.ix_(untouched, untouched)], np.eye(7))


def test_iswap_pi_fully_swaps_pair():
    u = iswap_pair(EntanglerPair.ISWAP_1221, math.pi).entries
    i, j = EntanglerPair.ISWAP_1221.indices
    assert np.isclose(u[i, i], 0.0) and np.isclose(abs(u[i, j]), 1.0)


@given(pairs, angles, angles)
def test_iswap_unitary(pair, a, phi):
    assert iswap_pair(pair, a, phi).is_unitary()


def test_iswap_pair_indices_match_labels():
    for pair in EntanglerPair:
        i, j = pair.indices
        assert TWO_QUTRIT_LABELS[i] == pair.state_labels[0]
        assert TWO_QUTRIT_LABELS[j] == pair.state_labels[1]


# ---------------------------------------------------------------- fidelity

def test_fidelity_of_equal_gates_is_one():
    cz = qutrit_cz()
    assert np.isclose(gate_fidelity(cz, cz), 1.0)


@given(st.floats(min_value=-math.pi, max_value=math.pi, allow_nan=False))
def test_fidelity_global_phase_invariant(alpha):
    cz = qutrit_cz()
    shifted = LabeledOperator(np.exp(1j * alpha) * cz.entries, cz.labels)
    assert np.isclose(gate_fidelity(shifted, cz), 1.0, atol=1e-12)


def test_fidelity_requires_matching_labels():
    with pytest.raises(InvalidArgumentError):
        gate_fidelity(qutrit_cz(), rx((0, 1), 0.1))


def test_qutrit_cz_diagonal_phases():
    d = np.diag(qutrit_cz().entries)
    omega = np.exp(2j * np.pi / 3)
    for k, lab in enumerate(TWO_QUTRIT_LABELS):
        assert np.isclose(d[k], omega ** (int(lab[0]) * int(lab[1])))


# ---------------------------------------------------------------- local chains

def test_local_chain_zero_angles_identity():
    assert np.allclose(local_chain(np.zeros(9)).entries, np.eye(3))


def test_local_chain_temporal_order():
    """First listed rotation acts first: chain = RX(a3) RZ(a2) RX(a1) per subspace."""
    a = np.zeros(9)
    a[0], a[1] = 0.7, 0.4   # first subspace: RX then RZ
    expect = rz((0, 1), 0.4).entries @ rx((0, 1), 0.7).entries
    assert np.allclose(local_chain(a).entries, expect, atol=1e-12)


def test_local_layer_is_kron_of_chains():
    a = np.linspace(0.1, 1.8, 18)
    u = local_layer(a).entries
    expect = np.kron(local_chain(a[:9]).entries, local_chain(a[9:]).entries)
    assert np.allclose(u, expect, atol=1e-12)


def test_local_chain_rejects_wrong_length():
    with pytest.raises(InvalidArgumentError):
        local_chain(np.zeros(8))
    with pytest.raises(InvalidArgumentError):
        local_layer(np.zeros(19))


@given(st.lists(angles, min_size=9, max_size=9))
def test_local_chain_unitary(nine):
    assert local_chain(np.array(nine)).is_unitary()


# ---------------------------------------------------------------- ansatz params

def test_ansatz_params_roundtrip_json():
    params = AnsatzParams(np.linspace(-1, 1, 18),
                          [(EntanglerPair.ISWAP_0110, -0.5, 0.1,
                            np.linspace(0, 2, 18))])
    back = AnsatzParams.from_json_dict(params.to_json_dict())
    assert np.allclose(back.initial, params.initial)
    assert back.layers[0].entangler is EntanglerPair.ISWAP_0110
    assert np.isclose(back.layers[0].entangler_angle, -0.5)
    assert np.allclose(back.layers[0].local, params.layers[0].local)


def test_ansatz_params_local_vector_roundtrip():
    params = AnsatzParams(np.zeros(18),
                          [(EntanglerPair.ISWAP_1221, 1.0, 0.0, np.ones(18))])
    vec = params.local_vector()
    assert vec.shape == (36,)
    rebuilt = params.with_local_vector(vec * 2.0)
    assert np.allclose(rebuilt.initial, 0.0)
    assert np.allclose(rebuilt.layers[0].local, 2.0)


def test_labeled_operator_validation():
    with pytest.raises(InvalidArgumentError):
        LabeledOperator(np.zeros((2, 3)), ("a", "b"))
    with pytest.raises(InvalidArgumentError):
        LabeledOperator(np.eye(2), ("a", "a"))
    op = identity_gate()
    with pytest.raises(InvalidArgumentError):
        op.index("33")

"""Dense operator kernel and the two-qutrit gate vocabulary.

Basis order for 9-dim operators is row-major in (q1, q2):
|00>, |01>, |02>, |10>, |11>, |12>, |20>, |21>, |22>.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError

TWO_QUTRIT_LABELS = tuple(f"{j}{k}" for j in range(3) for k in range(3))
SUBSPACES = ((0, 1), (0, 2), (1, 2))

UNITARY_TOL = 1e-10
HERMITIAN_TOL = 1e-12


@dataclass
class LabeledOperator:
    """Square complex matrix with an ordered basis-label list."""

    entries: np.ndarray
    labels: tuple

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=complex)
        self.labels = tuple(self.labels)
        n = self.entries.shape[0]
        if self.entries.shape != (n, n):
            raise InvalidArgumentError("entries must be square")
        if len(self.labels) != n or len(set(self.labels)) != n:
            raise InvalidArgumentError("labels must be distinct and match the dimension")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def is_unitary(self, tol: float = UNITARY_TOL) -> bool:
        d = self.entries.conj().T @ self.entries - np.eye(self.dim)
        return np.abs(d).max() < tol

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return np.abs(self.entries - self.entries.conj().T).max() < tol

    def index(self, label) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise InvalidArgumentError(f"label {label!r} not in basis") from None

    def to_json_dict(self) -> dict:
        return {
            "dim": self.dim,
            "labels": [str(l) for l in self.labels],
            "re": self.entries.real.tolist(),
            "im": self.entries.imag.tolist(),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "LabeledOperator":
        m = np.array(d["re"], dtype=float) + 1j * np.array(d["im"], dtype=float)
        if m.shape != (d["dim"], d["dim"]):
            raise InvalidArgumentError("matrix shape does not match declared dim")
        return cls(m, tuple(d["labels"]))


class Axis(enum.Enum):
    X = "X"
    Z = "Z"


class EntanglerPair(enum.Enum):
    """The two iSWAP-type exchange pairs, with their 9-dim basis indices."""

    ISWAP_0110 = (("01", "10"), (1, 3))
    ISWAP_1221 = (("12", "21"), (5, 7))

    @property
    def state_labels(self):
        return self.value[0]

    @property
    def indices(self):
        return self.value[1]


@dataclass
class SubspaceRotation:
    axis: Axis
    subspace: tuple
    angle: float

    def __post_init__(self):
        if isinstance(self.axis, str):
            self.axis = Axis(self.axis.upper())
        self.subspace = tuple(self.subspace)
        if self.subspace not in SUBSPACES:
            raise InvalidArgumentError(f"subspace must be one of {SUBSPACES}")
        if not math.isfinite(self.angle):
            raise InvalidArgumentError("rotation angle must be finite")
        # half-angle convention: the generated unitary has period 4*pi in angle
        self.angle = self.angle % (4 * math.pi)


QUTRIT_LABELS = ("0", "1", "2")


def subspace_rotation(rot: SubspaceRotation) -> LabeledOperator:
    """exp(-i*angle/2 * P) with P the Pauli X or Z embedded on (a, b), identity on the third level."""
    a, b = rot.subspace
    half = rot.angle / 2.0
    u = np.eye(3, dtype=complex)
    if rot.axis is Axis.X:
        u[a, a] = u[b, b] = math.cos(half)
        u[a, b] = u[b, a] = -1j * math.sin(half)
    else:
        u[a, a] = np.exp(-1j * half)
        u[b, b] = np.exp(1j * half)
    return LabeledOperator(u, QUTRIT_LABELS)


def rx(subspace, angle) -> LabeledOperator:
    return subspace_rotation(SubspaceRotation(Axis.X, subspace, angle))


def rz(subspace, angle) -> LabeledOperator:
    return subspace_rotation(SubspaceRotation(Axis.Z, subspace, angle))


def local_chain(angles9) -> LabeledOperator:
    """Single-qutrit chain: subspaces (0,1), (0,2), (1,2), each RX, RZ, RX in temporal order.

    Temporal order maps to right-to-left matrix multiplication.
    """
    angles9 = np.asarray(angles9, dtype=float)
    if angles9.shape != (9,):
        raise InvalidArgumentError("local chain takes 9 angles")
    u = np.eye(3, dtype=complex)
    for s, sub in enumerate(SUBSPACES):
        a1, a2, a3 = angles9[3 * s: 3 * s + 3]
        u = rx(sub, a3).entries @ rz(sub, a2).entries @ rx(sub, a1).entries @ u
    return LabeledOperator(u, QUTRIT_LABELS)


def local_layer(angles18) -> LabeledOperator:
    """Tensor of two single-qutrit chains (q1 angles first)."""
    angles18 = np.asarray(angles18, dtype=float)
    if angles18.shape != (18,):
        raise InvalidArgumentError("local layer takes 18 angles")
    u1 = local_chain(angles18[:9]).entries
    u2 = local_chain(angles18[9:]).entries
    return LabeledOperator(np.kron(u1, u2), TWO_QUTRIT_LABELS)


def iswap_pair(pair: EntanglerPair, angle: float, phase: float = 0.0) -> LabeledOperator:
    """exp(-i*(angle/2)*(e^{-i*phase}|i><j| + e^{i*phase}|j><i|)); identity on the other 7 states."""
    if not (math.isfinite(angle) and math.isfinite(phase)):
        raise InvalidArgumentError("angle and phase must be finite")
    i, j = pair.indices
    half = angle / 2.0
    u = np.eye(9, dtype=complex)
    u[i, i] = u[j, j] = math.cos(half)
    u[i, j] = -1j * math.sin(half) * np.exp(-1j * phase)
    u[j, i] = -1j * math.sin(half) * np.exp(1j * phase)
    return LabeledOperator(u, TWO_QUTRIT_LABELS)


def identity_gate() -> LabeledOperator:
    """9x9 identity on the two-qutrit labels."""
    return LabeledOperator(np.eye(9, dtype=complex), TWO_QUTRIT_LABELS)


def qutrit_cz() -> LabeledOperator:
    """Diagonal two-qutrit controlled-phase gate: entry omega^(j*k) on |jk>, omega = e^{2*pi*i/3}."""
    omega = np.exp(2j * np.pi / 3)
    diag = [omega ** (j * k) for j in range(3) for k in range(3)]
    return LabeledOperator(np.diag(diag), TWO_QUTRIT_LABELS)


def gate_fidelity(u: LabeledOperator, target: LabeledOperator) -> float:
    """|Tr(target^dag u)| / dim; global-phase invariant."""
    if u.dim != target.dim or u.labels != target.labels:
        raise InvalidArgumentError("operands must share dimension and label order")
    return float(abs(np.trace(target.entries.conj().T @ u.entries)) / u.dim)


@dataclass
class AnsatzLayer:
    entangler: EntanglerPair
    entangler_angle: float
    entangler_phase: float
    local: np.ndarray  # 18 angles

    def __post_init__(self):
        self.local = np.asarray(self.local, dtype=float)
        if self.local.shape != (18,):
            raise InvalidArgumentError("layer locals take 18 angles")


@dataclass
class AnsatzParams:
    """Initial 18-angle local layer plus m layers of (entangler, 18 locals)."""

    initial: np.ndarray
    layers: list = field(default_factory=list)

    def __post_init__(self):
        self.initial = np.asarray(self.initial, dtype=float)
        if self.initial.shape != (18,):
            raise InvalidArgumentError("initial layer takes 18 angles")
        self.layers = [
            l if isinstance(l, AnsatzLayer) else AnsatzLayer(*l) for l in self.layers
        ]

    @property
    def local_angle_count(self) -> int:
        return 18 + 18 * len(self.layers)

    def local_vector(self) -> np.ndarray:
        return np.concatenate([self.initial] + [l.local for l in self.layers])

    def with_local_vector(self, vec) -> "AnsatzParams":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.local_angle_count,):
            raise InvalidArgumentError("local vector length mismatch")
        layers = [
            AnsatzLayer(l.entangler, l.entangler_angle, l.entangler_phase,
                        vec[18 + 18 * i: 36 + 18 * i])
            for i, l in enumerate(self.layers)
        ]
        return AnsatzParams(vec[:18], layers)

    def to_json_dict(self) -> dict:
        def split(nine):
            return [
                {"subspace": list(SUBSPACES[s]),
                 "rx_rz_rx_over_pi": [a / math.pi for a in nine[3 * s: 3 * s + 3]]}
                for s in range(3)
            ]

        def layer_locals(v18):
            return {"qudit1": split(v18[:9]), "qudit2": split(v18[9:])}

        return {
            "initial": layer_locals(self.initial.tolist()),
            "layers": [
                {
                    "entangler": l.entangler.name,
                    "angle_over_pi": l.entangler_angle / math.pi,
                    "phase_over_pi": l.entangler_phase / math.pi,
                    "local": layer_locals(l.local.tolist()),
                }
                for l in self.layers
            ],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "AnsatzParams":
        def join(block):
            out = []
            for q in ("qudit1", "qudit2"):
                for row in block[q]:
                    out.extend(a * math.pi for a in row["rx_rz_rx_over_pi"])
            return out

        layers = [
            AnsatzLayer(
                EntanglerPair[l["entangler"]],
                l["angle_over_pi"] * math.pi,
                l.get("phase_over_pi", 0.0) * math.pi,
                join(l["local"]),
            )
            for l in d.get("layers", [])
        ]
        return cls(join(d["initial"]), layers)

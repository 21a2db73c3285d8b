"""Bell-basis state algebra and single-qubit noise channels.

Everything downstream of this module works on the four Bell-diagonal weights
of a two-qubit state, so the basis convention lives here once and for all:
the Bell vectors are ordered |Phi+>, |Psi->, |Psi+>, |Phi->, and the first
weight is the fidelity with respect to |Phi+>.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BELL_BASIS",
    "BellDiagonal",
    "ChannelSpec",
    "TwoQubitDensity",
    "WernerParam",
    "apply_channel",
    "bell_diagonal_of",
    "bell_fidelity",
    "binary_entropy",
    "channel_bell_diagonal",
    "channel_for_fidelity",
    "diagonal_fidelity",
    "ree_rate_bound",
    "werner",
]

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
EIGVAL_FLOOR = -1e-10
WEIGHT_SUM_TOL = 1e-12

_K00, _K01, _K10, _K11 = np.eye(4, dtype=complex)

# Columns: |Phi+>, |Psi->, |Psi+>, |Phi->.
BELL_BASIS = np.column_stack(
    [
        (_K00 + _K11) / math.sqrt(2.0),
        (_K01 - _K10) / math.sqrt(2.0),
        (_K01 + _K10) / math.sqrt(2.0),
        (_K00 - _K11) / math.sqrt(2.0),
    ]
)

_ID2 = np.eye(2, dtype=complex)
_PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
_PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)

CHANNEL_KINDS = ("depolarising", "dephasing", "pauli", "amplitude_damping")


@dataclass(frozen=True, eq=False)
class TwoQubitDensity:
    """A validated 4x4 density matrix in the computational basis |00>..|11>.

    Parameters
    ----------
    matrix : array_like
        Must be Hermitian within 1e-12, have unit trace within 1e-12, and
        have no eigenvalue below -1e-10.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (4, 4):
            raise ValueError(f"expected a 4x4 matrix, got shape {m.shape}")
        if np.abs(m - m.conj().T).max() > HERMITIAN_TOL:
            raise ValueError("matrix is not Hermitian within 1e-12")
        if abs(m.trace().real - 1.0) > TRACE_TOL or abs(m.trace().imag) > TRACE_TOL:
            raise ValueError("matrix trace differs from 1 by more than 1e-12")
        if np.linalg.eigvalsh(m).min() < EIGVAL_FLOOR:
            raise ValueError("matrix has an eigenvalue below -1e-10")
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class BellDiagonal:
    """Bell-diagonal weights (a, b, c, d) for |Phi+>, |Psi->, |Psi+>, |Phi->.

    The weights must be non-negative and sum to 1 within 1e-12. The first
    weight ``a`` is the Bell fidelity.
    """

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        w = (self.a, self.b, self.c, self.d)
        if min(w) < 0.0:
            raise ValueError(f"negative Bell weight in {w}")
        if abs(math.fsum(w) - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"Bell weights {w} sum to {math.fsum(w)!r}, not 1")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.a, self.b, self.c, self.d)

    def density_matrix(self) -> np.ndarray:
        """The 4x4 density matrix in the computational basis."""
        return (BELL_BASIS * np.asarray(self.as_tuple())) @ BELL_BASIS.conj().T


@dataclass(frozen=True)
class WernerParam:
    """Werner state of fidelity F: weights (F, r, r, r) with r = (1-F)/3."""

    F: float

    def __post_init__(self):
        if not 0.25 <= self.F <= 1.0:
            raise ValueError(f"Werner fidelity {self.F} outside [1/4, 1]")

    def to_bell_diagonal(self) -> BellDiagonal:
        r = (1.0 - self.F) / 3.0
        return BellDiagonal(self.F, r, r, r)


def werner(F: float) -> BellDiagonal:
    """Shorthand for WernerParam(F).to_bell_diagonal()."""
    return WernerParam(F).to_bell_diagonal()


@dataclass(frozen=True)
class ChannelSpec:
    """One-qubit noise channel applied to the second half of |Phi+>.

    kind is one of 'depolarising', 'dephasing', 'pauli', 'amplitude_damping'.
    ``p`` is the mixing strength of the first three kinds, ``gamma`` the
    damping strength of the last. ``weights`` holds the (w_z, w_x, w_y)
    split of a pauli channel and must sum to 1 within 1e-12.
    """

    kind: str
    p: float = 0.0
    gamma: float = 0.0
    weights: tuple[float, float, float] = (1.0, 0.0, 0.0)

    def __post_init__(self):
        if self.kind not in CHANNEL_KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if self.kind == "amplitude_damping":
            if not 0.0 <= self.gamma <= 1.0:
                raise ValueError(f"damping strength {self.gamma} outside [0, 1]")
        else:
            if not 0.0 <= self.p <= 1.0:
                raise ValueError(f"channel strength {self.p} outside [0, 1]")
        if self.kind == "pauli":
            w = self.weights
            if len(w) != 3 or min(w) < 0.0 or max(w) > 1.0:
                raise ValueError(f"pauli weights {w} outside [0, 1]")
            if abs(math.fsum(w) - 1.0) > WEIGHT_SUM_TOL:
                raise ValueError(f"pauli weights {w} do not sum to 1")

    @classmethod
    def depolarising(cls, p: float) -> "ChannelSpec":
        return cls("depolarising", p=p)

    @classmethod
    def dephasing(cls, p: float) -> "ChannelSpec":
        return cls("dephasing", p=p)

    @classmethod
    def pauli(cls, p: float, w_z: float, w_x: float, w_y: float) -> "ChannelSpec":
        return cls("pauli", p=p, weights=(w_z, w_x, w_y))

    @classmethod
    def amplitude_damping(cls, gamma: float) -> "ChannelSpec":
        return cls("amplitude_damping", gamma=gamma)


def _kraus_ops(channel: ChannelSpec) -> list[np.ndarray]:
    if channel.kind == "depolarising":
        # (1-p) rho + p I/2  ==  (1-3p/4) rho + (p/4)(X rho X + Y rho Y + Z rho Z)
        p = channel.p
        return [
            math.sqrt(1.0 - 0.75 * p) * _ID2,
            0.5 * math.sqrt(p) * _PAULI_X,
            0.5 * math.sqrt(p) * _PAULI_Y,
            0.5 * math.sqrt(p) * _PAULI_Z,
        ]
    if channel.kind == "dephasing":
        p = channel.p
        return [math.sqrt(1.0 - p) * _ID2, math.sqrt(p) * _PAULI_Z]
    if channel.kind == "pauli":
        p = channel.p
        w_z, w_x, w_y = channel.weights
        return [
            math.sqrt(1.0 - p) * _ID2,
            math.sqrt(p * w_z) * _PAULI_Z,
            math.sqrt(p * w_x) * _PAULI_X,
            math.sqrt(p * w_y) * _PAULI_Y,
        ]
    g = channel.gamma
    return [
        np.array([[1.0, 0.0], [0.0, math.sqrt(1.0 - g)]], dtype=complex),
        np.array([[0.0, math.sqrt(g)], [0.0, 0.0]], dtype=complex),
    ]


def apply_channel(channel: ChannelSpec) -> TwoQubitDensity:
    """Send half of a perfect |Phi+> pair through the channel.

    The channel acts on the second qubit only; the result is the shared
    two-qubit state before any purification.
    """
    phi = BELL_BASIS[:, 0]
    rho = np.outer(phi, phi.conj())
    out = np.zeros_like(rho)
    for k in _kraus_ops(channel):
        op = np.kron(_ID2, k)
        out += op @ rho @ op.conj().T
    return TwoQubitDensity(out)


def bell_diagonal_of(state: TwoQubitDensity) -> BellDiagonal:
    """Project a density matrix onto the Bell-diagonal weights.

    Off-diagonal Bell coherences are discarded, which is exactly what a
    twirl would do; the four weights always sum to the trace.
    """
    m = state.matrix
    vals = []
    for k in range(4):
        v = BELL_BASIS[:, k]
        x = float((v.conj() @ m @ v).real)
        # rounding can leave a tiny negative residue on an exact zero
        vals.append(0.0 if -1e-12 < x < 0.0 else x)
    return BellDiagonal(*vals)


def bell_fidelity(state: BellDiagonal) -> float:
    """Fidelity with |Phi+>, i.e. the first Bell weight."""
    return state.a


def diagonal_fidelity(x: BellDiagonal, y: BellDiagonal) -> float:
    """Fidelity (sum_i sqrt(x_i y_i))^2 between two Bell-diagonal states."""
    s = math.fsum(math.sqrt(xi * yi) for xi, yi in zip(x.as_tuple(), y.as_tuple()))
    return min(s * s, 1.0)


def binary_entropy(x: float) -> float:
    """Binary entropy h(x) in bits."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"entropy argument {x} outside [0, 1]")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -(x * math.log2(x) + (1.0 - x) * math.log2(1.0 - x))


def ree_rate_bound(F_initial: float, F_target: float) -> float:
    """Entropic ceiling (1 - h(F_initial)) / (1 - h(F_target)) on the rate.

    Both fidelities must lie in (1/2, 1]. No protocol mapping Werner pairs of
    fidelity F_initial to pairs of fidelity F_target can beat this rate.
    """
    for name, F in (("F_initial", F_initial), ("F_target", F_target)):
        if not 0.5 < F <= 1.0:
            raise ValueError(f"{name}={F} outside (1/2, 1]")
    return (1.0 - binary_entropy(F_initial)) / (1.0 - binary_entropy(F_target))


def channel_bell_diagonal(channel: ChannelSpec) -> BellDiagonal:
    """Closed-form Bell weights of apply_channel's output.

    Agrees with bell_diagonal_of(apply_channel(channel)) but avoids the
    matrix round trip, so fidelity-parameterised sweeps keep exact floats.
    For amplitude damping the output is not Bell-diagonal; these weights are
    its Bell-diagonal projection, which is the state purification sees.
    """
    if channel.kind == "depolarising":
        p = channel.p
        return BellDiagonal(1.0 - 0.75 * p, 0.25 * p, 0.25 * p, 0.25 * p)
    if channel.kind == "dephasing":
        p = channel.p
        return BellDiagonal(1.0 - p, 0.0, 0.0, p)
    if channel.kind == "pauli":
        p = channel.p
        w_z, w_x, w_y = channel.weights
        return BellDiagonal(1.0 - p, p * w_y, p * w_x, p * w_z)
    g = channel.gamma
    s = math.sqrt(1.0 - g)
    return BellDiagonal(0.25 * (1.0 + s) ** 2, 0.25 * g, 0.25 * g, 0.25 * (1.0 - s) ** 2)


def channel_for_fidelity(kind: str, fidelity: float,
                         weights: tuple[float, float, float] = (1.0, 0.0, 0.0)) -> ChannelSpec:
    """Invert the fidelity map so sweeps can be parameterised by F directly.

    depolarising: p = 4(1-F)/3, valid for F in [1/4, 1]
    dephasing, pauli: p = 1-F
    amplitude_damping: gamma = 1 - (2 sqrt(F) - 1)^2, valid for F in [1/4, 1]
    """
    if kind == "depolarising":
        return ChannelSpec.depolarising(4.0 * (1.0 - fidelity) / 3.0)
    if kind == "dephasing":
        return ChannelSpec.dephasing(1.0 - fidelity)
    if kind == "pauli":
        return ChannelSpec("pauli", p=1.0 - fidelity, weights=weights)
    if kind == "amplitude_damping":
        if not 0.25 <= fidelity <= 1.0:
            raise ValueError(f"amplitude damping cannot reach fidelity {fidelity}")
        return ChannelSpec.amplitude_damping(1.0 - (2.0 * math.sqrt(fidelity) - 1.0) ** 2)
    raise ValueError(f"unknown channel kind {kind!r}")

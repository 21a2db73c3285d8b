"""The two-to-one purification step and the iterated ladder built from it.

The step recursion on Bell weights is the workhorse; the explicit circuit
simulation exists only to cross-check it and is never used in anger.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .bellcore import BELL_BASIS, BellDiagonal, TwoQubitDensity, bell_diagonal_of

__all__ = [
    "DegenerateStepError",
    "IterationLadder",
    "LadderLevel",
    "StepOutcome",
    "build_ladder",
    "dejmps_step",
    "dejmps_step_circuit_oracle",
    "optimal_permutation",
]


class DegenerateStepError(ValueError):
    """Raised when a purification step succeeds with probability zero."""


class StepOutcome(NamedTuple):
    success_prob: float
    output: BellDiagonal


def dejmps_step(x: BellDiagonal, y: BellDiagonal) -> StepOutcome:
    """Purify one pair out of two Bell-diagonal pairs.

    Returns the success probability t and the post-selected output weights

        a'' = (a a' + b b') / t      b'' = (c d' + c' d) / t
        c'' = (c c' + d d') / t      d'' = (a b' + a' b) / t

    with t = (a+b)(a'+b') + (c+d)(c'+d').
    """
    a, b, c, d = x.as_tuple()
    ap, bp, cp, dp = y.as_tuple()
    t = (a + b) * (ap + bp) + (c + d) * (cp + dp)
    if t <= 0.0:
        raise DegenerateStepError("step succeeds with probability zero")
    out = BellDiagonal(
        (a * ap + b * bp) / t,
        (c * dp + cp * d) / t,
        (c * cp + d * dp) / t,
        (a * bp + ap * b) / t,
    )
    return StepOutcome(t, out)


# One-qubit rotation U|0> = (|0> - i|1>)/sqrt(2), U|1> = (|1> - i|0>)/sqrt(2);
# Alice applies U to her qubits, Bob the adjoint to his.
_U = np.array([[1.0, -1.0j], [-1.0j, 1.0]], dtype=complex) / math.sqrt(2.0)
_UDAG = _U.conj().T


def _cnot16(control: int, target: int) -> np.ndarray:
    """CNOT on a 4-qubit register with qubit order (A1, B1, A2, B2), A1 msb."""
    g = np.zeros((16, 16))
    for idx in range(16):
        bits = [(idx >> (3 - q)) & 1 for q in range(4)]
        if bits[control]:
            bits[target] ^= 1
        out = sum(bit << (3 - q) for q, bit in enumerate(bits))
        g[out, idx] = 1.0
    return g


_ROTATE = np.kron(np.kron(np.kron(_U, _UDAG), _U), _UDAG)
_CNOTS = _cnot16(1, 3) @ _cnot16(0, 2)  # Alice: A1 -> A2, Bob: B1 -> B2
_GATE = _CNOTS @ _ROTATE


def dejmps_step_circuit_oracle(x: BellDiagonal, y: BellDiagonal) -> StepOutcome:
    """Run the step as an explicit 4-qubit circuit.

    Pair 1 (qubits A1, B1) is the source, pair 2 (A2, B2) the target. After
    the local rotations and bilateral CNOTs the target qubits are measured in
    the computational basis and the run is kept when the outcomes agree.
    Exists purely as an independent oracle for dejmps_step.
    """
    rho = np.kron(x.density_matrix(), y.density_matrix())
    rho = _GATE @ rho @ _GATE.conj().T
    r = rho.reshape(4, 4, 4, 4)  # (pair1 row, pair2 row, pair1 col, pair2 col)
    keep = r[:, 0, :, 0] + r[:, 3, :, 3]  # measured 00 or 11 on (A2, B2)
    t = float(keep.trace().real)
    if t <= 0.0:
        raise DegenerateStepError("post-selected branch has zero weight")
    return StepOutcome(t, bell_diagonal_of(TwoQubitDensity(keep / t)))


def optimal_permutation(x: BellDiagonal) -> BellDiagonal:
    """Relabel the Bell weights to maximise the next step's output fidelity.

    All 24 permutations are scored by the fidelity a two-copy step would
    deliver; ties resolve to the lexicographically largest permuted tuple,
    so the result is deterministic.
    """
    best_key = None
    for perm in itertools.permutations(x.as_tuple()):
        a, b, c, d = perm
        t = (a + b) ** 2 + (c + d) ** 2
        fid = (a * a + b * b) / t if t > 0.0 else -1.0
        key = (fid, perm)
        if best_key is None or key > best_key:
            best_key = key
    return BellDiagonal(*best_key[1])


@dataclass(frozen=True)
class LadderLevel:
    """One rung of the iterated protocol.

    k       iteration count
    state   Bell-diagonal state after k iterations
    F       Bell fidelity of that state
    t       success probability of the step into this level (None at k=0)
    s       product t_1 ... t_k of step success probabilities
    R       asymptotic rate s / 2^k of the k-iteration protocol
    mu      mean pairs consumed per output, stored as 1/R
    sigma2  variance of pairs consumed per output
    """

    k: int
    state: BellDiagonal
    F: float
    t: float | None
    s: float
    R: float
    mu: float
    sigma2: float


@dataclass(frozen=True)
class IterationLadder:
    """Levels 0..k of the iterated protocol, possibly truncated early."""

    levels: tuple[LadderLevel, ...]
    truncated: bool = False
    truncation_reason: str | None = None

    def __len__(self) -> int:
        return len(self.levels)

    def __getitem__(self, k: int) -> LadderLevel:
        return self.levels[k]

    def __iter__(self):
        return iter(self.levels)

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def success_probs(self) -> list[float]:
        """[t_1, ..., t_depth]."""
        return [lv.t for lv in self.levels[1:]]

    def improving_levels(self) -> tuple[LadderLevel, ...]:
        """Longest prefix with strictly increasing fidelity.

        Iterating past the point where fidelity stops improving only costs
        rate, so optimisers work on this prefix.
        """
        out = [self.levels[0]]
        for lv in self.levels[1:]:
            if lv.F <= out[-1].F:
                break
            out.append(lv)
        return tuple(out)


def build_ladder(initial: BellDiagonal, k_max: int, permute_first: bool = False,
                 permute_each: bool = False) -> IterationLadder:
    """Iterate the step on identical copies, tracking rates and moments.

    Level k purifies two level-(k-1) outputs, so the mean cost per output is
    mu_k = 2^k / s_k and the cost variance follows

        sigma_k^2 = 2 sigma_{k-1}^2 / t_k + 4^k (1 - t_k) / s_k^2.

    permute_first applies the optimal weight relabeling to the input state;
    permute_each re-applies it to every level's output before the next step.
    The initial fidelity (after the optional relabeling) must exceed 1/2;
    the ladder stops early if a step becomes degenerate.
    """
    if k_max < 0:
        raise ValueError("k_max must be non-negative")
    state = optimal_permutation(initial) if (permute_first or permute_each) else initial
    if state.a <= 0.5:
        raise ValueError(
            f"initial Bell fidelity {state.a} is not above 1/2; purification cannot improve it")
    levels = [LadderLevel(0, state, state.a, None, 1.0, 1.0, 1.0, 0.0)]
    s = 1.0
    sigma2 = 0.0
    truncated = False
    reason = None
    for k in range(1, k_max + 1):
        prev = levels[-1].state
        try:
            t, out = dejmps_step(prev, prev)
        except DegenerateStepError:
            truncated = True
            reason = f"step {k} is degenerate"
            break
        if permute_each:
            out = optimal_permutation(out)
        s *= t
        sigma2 = 2.0 * sigma2 / t + 4.0 ** k * (1.0 - t) / (s * s)
        R = s / 2.0 ** k
        levels.append(LadderLevel(k, out, out.a, t, s, R, 1.0 / R, sigma2))
    return IterationLadder(tuple(levels), truncated, reason)

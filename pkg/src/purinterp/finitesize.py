"""Exact finite-pool analysis of iterated and interpolated purification.

Given a pool of N noisy pairs and a two-protocol mixture, the central object
is the joint law Pr(X_M' = k, Y_M' = 1): the probability that the M'-th
output is produced before the pool runs out and came from protocol k. Two
independent routes compute it, a pool-indexed Markov chain and a renewal
convolution, and they must agree to near machine precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.signal import fftconvolve
from scipy.stats import binom

from .bellcore import diagonal_fidelity, werner
from .dejmps import IterationLadder

__all__ = [
    "CountDistribution",
    "FiniteRunSpec",
    "JointLawTable",
    "MBounds",
    "MemoryCapExceeded",
    "expected_pairs",
    "f_doubleprime",
    "joint_law_iterative",
    "joint_law_markov",
    "m_bounds",
    "normal_approximation",
    "pairs_consumed_distribution",
    "pairs_produced_distribution",
]

DEFAULT_STATE_CAP = 10_000_000
TRUNCATION_MASS = 1e-12
F_PRIME_TOL = 1e-12


class MemoryCapExceeded(RuntimeError):
    """Chain construction would exceed the configured state cap."""

    def __init__(self, states: int, cap: int):
        super().__init__(f"chain needs {states} states, cap is {cap}")
        self.states = states
        self.cap = cap


@dataclass(frozen=True)
class FiniteRunSpec:
    """A finite-pool run of a two-protocol mixture.

    N is the pool size, pair the protocol indices (i, j) with i <= j (i == j
    is the degenerate single-protocol run and forces p_i = 1), p_i the
    probability of sampling protocol i for each output. epsilon_tilde is the
    infidelity budget and mode chooses whether it is a global or a per-pair
    budget. ``fidelities`` optionally overrides the member output fidelities
    (a protocol run below its natural fidelity, e.g. depolarised down to a
    target, reports its effective fidelity here); ladder values apply when
    omitted. F_prime, when given, must equal the p-weighted member fidelity
    within 1e-12.
    """

    N: int
    pair: tuple[int, int]
    p_i: float
    epsilon_tilde: float
    mode: str = "global"
    fidelities: tuple[float, float] | None = None
    F_prime: float | None = None

    def __post_init__(self):
        i, j = self.pair
        if not (isinstance(i, int) and isinstance(j, int)) or i < 0 or j < i:
            raise ValueError(f"protocol pair {self.pair} must satisfy 0 <= i <= j")
        if self.N < 0:
            raise ValueError("pool size must be non-negative")
        if not 0.0 <= self.p_i <= 1.0:
            raise ValueError(f"p_i {self.p_i} outside [0, 1]")
        if i == j and self.p_i != 1.0:
            raise ValueError("degenerate pair (i, i) requires p_i = 1")
        if not 0.0 < self.epsilon_tilde < 1.0:
            raise ValueError(f"epsilon_tilde {self.epsilon_tilde} outside (0, 1)")
        if self.mode not in ("global", "per_pair"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.fidelities is not None:
            for F in self.fidelities:
                if not 0.25 <= F <= 1.0:
                    raise ValueError(f"effective fidelity {F} outside [1/4, 1]")

    @property
    def p_j(self) -> float:
        return 1.0 - self.p_i

    def resolved_fidelities(self, ladder: IterationLadder) -> tuple[float, float]:
        if self.fidelities is not None:
            return self.fidelities
        i, j = self.pair
        if ladder.depth < j:
            raise ValueError(f"ladder depth {ladder.depth} below protocol index {j}")
        return (ladder[i].F, ladder[j].F)

    def resolved_f_prime(self, ladder: IterationLadder) -> float:
        fi, fj = self.resolved_fidelities(ladder)
        f = self.p_i * fi + self.p_j * fj
        if self.F_prime is not None:
            if abs(self.F_prime - f) > F_PRIME_TOL:
                raise ValueError(
                    f"F_prime {self.F_prime} inconsistent with mixture fidelity {f}")
            return self.F_prime
        return f


@dataclass(frozen=True)
class CountDistribution:
    """Distribution over a non-negative integer count.

    pmf[m] = Pr(count = m); truncated_mass is the probability beyond the
    stored support. Total mass must be 1 within 1e-10.
    """

    pmf: np.ndarray
    truncated_mass: float = 0.0

    def __post_init__(self):
        pmf = np.asarray(self.pmf, dtype=float)
        if pmf.ndim != 1 or len(pmf) == 0:
            raise ValueError("pmf must be a non-empty 1-d array")
        if pmf.min() < -1e-12:
            raise ValueError("pmf has a negative mass")
        total = math.fsum(pmf) + self.truncated_mass
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"pmf mass {total} differs from 1 by more than 1e-10")
        object.__setattr__(self, "pmf", pmf)

    def mean(self) -> float:
        return math.fsum(m * p for m, p in enumerate(self.pmf))

    def variance(self) -> float:
        mu = self.mean()
        return math.fsum((m - mu) ** 2 * p for m, p in enumerate(self.pmf))

    def survival(self, m: int) -> float:
        """Pr(count >= m), counting truncated mass as above any stored m."""
        if m <= 0:
            return 1.0
        if m >= len(self.pmf):
            return self.truncated_mass
        return math.fsum(self.pmf[m:]) + self.truncated_mass


def _check_level(ladder: IterationLadder, k: int):
    if k < 0:
        raise ValueError("iteration count must be non-negative")
    if k > ladder.depth:
        raise ValueError(f"ladder depth {ladder.depth} below requested level {k}")


def _binomial_mix(v: np.ndarray, t: float) -> np.ndarray:
    # distribution of Binomial(floor(m/2), t) with m drawn from v
    a_max = (len(v) - 1) // 2
    w = np.zeros(a_max + 1)
    even = v[0::2]
    odd = v[1::2]
    w[: len(even)] += even
    w[: len(odd)] += odd
    ks = np.arange(a_max + 1)
    pmf_rows = binom.pmf(ks[None, :], ks[:, None], t)
    return w @ pmf_rows


def pairs_produced_distribution(ladder: IterationLadder, k: int, n: int) -> CountDistribution:
    """Distribution of the number of level-k outputs from n pool pairs.

    Level 0 returns the pool unchanged; each level above consumes outputs of
    the previous one in twos, succeeding independently with probability t_k,
    so the count law is an iterated binomial mixture.
    """
    _check_level(ladder, k)
    if n < 0:
        raise ValueError("pool size must be non-negative")
    v = np.zeros(n + 1)
    v[n] = 1.0
    for level in range(1, k + 1):
        v = _binomial_mix(v, ladder[level].t)
    return CountDistribution(v)


def _odd_mass(ladder: IterationLadder, k: int, n: int) -> float:
    if k == 0:
        return float(n % 2)
    if k == 1:
        # closed form: Pr(Binomial(floor(n/2), t) odd)
        t = ladder[1].t
        return (1.0 - (1.0 - 2.0 * t) ** (n // 2)) / 2.0
    pmf = pairs_produced_distribution(ladder, k, n).pmf
    return math.fsum(pmf[1::2])


def expected_pairs(ladder: IterationLadder, k: int, n: int) -> float:
    """Mean number of level-k outputs from n pool pairs.

    Uses E(M_k) = t_k (E(M_{k-1}) - Pr(M_{k-1} odd)) / 2; the odd mass comes
    from the closed form at level 1 and from the distribution above that.
    """
    _check_level(ladder, k)
    if n < 0:
        raise ValueError("pool size must be non-negative")
    if k == 0:
        return float(n)
    prev = expected_pairs(ladder, k - 1, n)
    odd = _odd_mass(ladder, k - 1, n)
    return ladder[k].t * (prev - odd) / 2.0


def pairs_consumed_distribution(ladder: IterationLadder, k: int, m_prime: int,
                                max_pool: int = 4096) -> CountDistribution:
    """Distribution of the pool pairs consumed to finish m' level-k outputs.

    Built from survival differences of the production law; the support is a
    subset of the even integers starting at m' 2^k (level 0 is the point
    mass at m'). The tail beyond cumulative mass 1 - 1e-12 (or beyond
    max_pool pairs) is truncated and recorded in truncated_mass.
    """
    _check_level(ladder, k)
    if m_prime < 1:
        raise ValueError("m_prime must be at least 1")
    if k == 0:
        pmf = np.zeros(m_prime + 1)
        pmf[m_prime] = 1.0
        return CountDistribution(pmf)
    start = m_prime * 2 ** k
    masses = []
    prev_surv = 0.0
    surv = 0.0
    n = start
    while n <= max_pool:
        dist = pairs_produced_distribution(ladder, k, n)
        surv = math.fsum(dist.pmf[m_prime:]) if m_prime < len(dist.pmf) else 0.0
        masses.append(max(surv - prev_surv, 0.0))
        prev_surv = surv
        if surv >= 1.0 - TRUNCATION_MASS:
            break
        n += 2
    pmf = np.zeros(min(n, max_pool) + 1)
    pmf[start::2][: len(masses)] = masses
    return CountDistribution(pmf, truncated_mass=1.0 - surv)


def normal_approximation(ladder: IterationLadder, k: int, m_prime: int) -> tuple[float, float]:
    """Normal (mean, variance) approximation of the consumption for m' outputs."""
    _check_level(ladder, k)
    if m_prime < 0:
        raise ValueError("m_prime must be non-negative")
    lv = ladder[k]
    return (m_prime * lv.mu, m_prime * lv.sigma2)


# ---------------------------------------------------------------------------
# The production machinery of one protocol track, shared by both joint-law
# methods. A track-c output is built depth-first: level-1 attempts consume
# two pool pairs each, and completed intermediate levels are held in a
# binary-counter inventory S (bit l-1 set means one level-l pair is stored).


def _track_layout(c: int) -> list[tuple[int, int]]:
    # (inventory, phase) production states; phase 1 holds one pool pair
    # toward the next level-1 attempt. A zero-iteration track is one state.
    if c == 0:
        return [(0, 0)]
    return [(S, ph) for S in range(2 ** (c - 1)) for ph in (0, 1)]


def _cascade_branches(ts: list[float], c: int, S: int) -> list[tuple[float, int | None]]:
    """Resolutions of a level-1 attempt on track c with inventory S.

    Returns (probability, new inventory) branches; None marks a completed
    track-c output. A fresh level-1 pair merges with stored pairs bottom-up;
    a failed merge into level l+1 discards everything up to level l.
    """
    t1 = ts[1]
    branches: list[tuple[float, int | None]] = [(1.0 - t1, S)]
    run = 0
    while (S >> run) & 1:
        run += 1
    p = t1
    for level in range(1, run + 1):
        t_next = ts[level + 1]
        branches.append((p * (1.0 - t_next), S & ~((1 << level) - 1)))
        p *= t_next
    if run + 1 == c:
        branches.append((p, None))
    else:
        branches.append((p, (S & ~((1 << run) - 1)) | (1 << run)))
    return branches


def _ladder_ts(ladder: IterationLadder) -> list[float]:
    return [math.nan] + [lv.t for lv in ladder.levels[1:]]


def _mixture_tracks(spec: FiniteRunSpec) -> tuple[list[int], list[float]]:
    i, j = spec.pair
    if i == j:
        return [i], [1.0]
    return [i, j], [spec.p_i, spec.p_j]


@dataclass(frozen=True)
class JointLawTable:
    """Rows M' = 1..T of the joint law Pr(X_M' = k, Y_M' = 1).

    joint_i[m-1] and joint_j[m-1] are the row-m entries for the two mixture
    members; their sum is the success probability Pr(Y_m = 1). T is
    floor(N / 2^i). num_states records the chain size for the markov method.
    """

    spec: FiniteRunSpec
    joint_i: np.ndarray
    joint_j: np.ndarray
    method: str
    num_states: int = 0

    @property
    def T(self) -> int:
        return len(self.joint_i)

    def success_prob(self, m_prime: int) -> float:
        if m_prime == 0:
            return 1.0
        return float(self.joint_i[m_prime - 1] + self.joint_j[m_prime - 1])

    def success_probs(self) -> np.ndarray:
        return self.joint_i + self.joint_j

    def joint_prob(self, m_prime: int, k: int) -> float:
        if not 1 <= m_prime <= self.T:
            raise ValueError(f"row {m_prime} outside 1..{self.T}")
        i, j = self.spec.pair
        if k == i:
            return float(self.joint_i[m_prime - 1])
        if k == j:
            return float(self.joint_j[m_prime - 1])
        raise ValueError(f"protocol {k} is not a mixture member {self.spec.pair}")


def _empty_table(spec: FiniteRunSpec, method: str) -> JointLawTable:
    return JointLawTable(spec, np.zeros(0), np.zeros(0), method)


def _kahan_add(total: np.ndarray, comp: np.ndarray, term: np.ndarray):
    y = term - comp
    t = total + y
    comp[:] = (t - total) - y
    total[:] = t


def joint_law_markov(spec: FiniteRunSpec, ladder: IterationLadder,
                     state_cap: int = DEFAULT_STATE_CAP) -> JointLawTable:
    """Joint law via an explicit pool-indexed Markov chain.

    Every transition consumes exactly one pool pair. States track the output
    count n, the protocol that produced the n-th output, and the production
    progress (inventory and half-attempt phase) of the next output; one
    extra state per track marks an output completed on the previous pair,
    and two absorbing states terminate the chain at n = T. For a pair i < j
    that is (2T - 1)(2^i + 2^j + 2) + 2 states. Row m of the table is the
    total probability inflow into the completion states for output m over
    the N chain steps, accumulated with compensated summation.
    """
    i, j = spec.pair
    spec.resolved_f_prime(ladder)  # validates depth and F' consistency
    N = spec.N
    T = N // 2 ** i
    if T == 0:
        return _empty_table(spec, "markov")
    cs, p_vec = _mixture_tracks(spec)
    ts = _ladder_ts(ladder)
    layouts = {c: _track_layout(c) for c in cs}
    track_offset = []
    off = 0
    for c in cs:
        track_offset.append(off)
        off += len(layouts[c])
    base_done = off
    group_size = off + len(cs)
    num_groups = 1 + (T - 1) * len(cs)
    num_states = num_groups * group_size + len(cs)
    if num_states > state_cap:
        raise MemoryCapExceeded(num_states, state_cap)
    absorb_base = num_groups * group_size

    branches = {c: [_cascade_branches(ts, c, S) for S in range(max(1, 2 ** (c - 1)))]
                for c in cs}
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []

    def add(dst: int, src: int, p: float):
        rows.append(dst)
        cols.append(src)
        vals.append(p)

    for g in range(num_groups):
        n = 0 if g == 0 else (g - 1) // len(cs) + 1
        base = g * group_size
        for ti, c in enumerate(cs):
            toff = base + track_offset[ti]
            if c == 0:
                add(base + base_done + ti, toff, 1.0)
                continue
            for S in range(2 ** (c - 1)):
                main = toff + 2 * S
                pre = main + 1
                add(pre, main, 1.0)
                for prob, new_S in branches[c][S]:
                    if prob == 0.0:
                        continue
                    dst = base + base_done + ti if new_S is None else toff + 2 * new_S
                    add(dst, pre, prob)
        for ti in range(len(cs)):
            src = base + base_done + ti
            if n + 1 == T:
                add(absorb_base + ti, src, 1.0)
                continue
            next_base = (1 + n * len(cs) + ti) * group_size
            for ti2, c2 in enumerate(cs):
                pr = p_vec[ti2]
                if pr == 0.0:
                    continue
                if c2 == 0:
                    # a zero-iteration output is the consumed pair itself
                    add(next_base + base_done + ti2, src, pr)
                else:
                    add(next_base + track_offset[ti2] + 1, src, pr)
    for ti in range(len(cs)):
        add(absorb_base + ti, absorb_base + ti, 1.0)

    P = sparse.csr_matrix((vals, (rows, cols)), shape=(num_states, num_states))

    # readout: occupancy of a completion state equals its one-step inflow
    a_rows = []
    a_cols = []
    for g in range(num_groups):
        n = 0 if g == 0 else (g - 1) // len(cs) + 1
        for ti in range(len(cs)):
            a_rows.append(n * len(cs) + ti)
            a_cols.append(g * group_size + base_done + ti)
    A = sparse.csr_matrix((np.ones(len(a_rows)), (a_rows, a_cols)),
                          shape=(T * len(cs), num_states))

    v = np.zeros(num_states)
    for ti, c in enumerate(cs):
        v[track_offset[ti]] = p_vec[ti]
    joint = np.zeros(T * len(cs))
    comp = np.zeros(T * len(cs))
    for _ in range(N):
        v = P @ v
        _kahan_add(joint, comp, A @ v)
    joint = joint.reshape(T, len(cs))
    if len(cs) == 1:
        return JointLawTable(spec, joint[:, 0].copy(), np.zeros(T), "markov", num_states)
    return JointLawTable(spec, joint[:, 0].copy(), joint[:, 1].copy(), "markov", num_states)


def _success_curve(ts: list[float], c: int, N: int) -> np.ndarray:
    """y[n] = Pr(one track-c output completes within n pool pairs)."""
    if c == 0:
        y = np.ones(N + 1)
        y[0] = 0.0
        return y
    size = 2 ** c + 1
    done = size - 1
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    for S in range(2 ** (c - 1)):
        main = 2 * S
        pre = main + 1
        rows.append(pre)
        cols.append(main)
        vals.append(1.0)
        for prob, new_S in _cascade_branches(ts, c, S):
            if prob == 0.0:
                continue
            rows.append(done if new_S is None else 2 * new_S)
            cols.append(pre)
            vals.append(prob)
    rows.append(done)
    cols.append(done)
    vals.append(1.0)
    if size <= 256:
        P = np.zeros((size, size))
        for r, cl, vv in zip(rows, cols, vals):
            P[r, cl] += vv
    else:
        P = sparse.csr_matrix((vals, (rows, cols)), shape=(size, size))
    v = np.zeros(size)
    v[0] = 1.0
    y = np.zeros(N + 1)
    for n in range(1, N + 1):
        v = P @ v
        y[n] = v[done]
    return y


def joint_law_iterative(spec: FiniteRunSpec, ladder: IterationLadder) -> JointLawTable:
    """Joint law via renewal convolutions.

    Consumption increments of successive outputs are independent, so with
    y_k the single-output success curve of member k and f the pmf of one
    mixture increment,

        Pr(X_M' = k, Y_M' = 1) = p_k sum_n Pr(consumed n for M'-1 outputs) y_k[N - n]

    where the M'-1 fold law is built by repeated truncated convolution with
    f. When every sampled track consumes pairs in twos the convolutions run
    on the even sublattice.
    """
    spec.resolved_f_prime(ladder)
    i, j = spec.pair
    N = spec.N
    T = N // 2 ** i
    if T == 0:
        return _empty_table(spec, "iterative")
    cs, p_vec = _mixture_tracks(spec)
    ts = _ladder_ts(ladder)
    ys = {c: _success_curve(ts, c, N) for c in set(cs)}
    y_mix = np.zeros(N + 1)
    for c, pr in zip(cs, p_vec):
        y_mix += pr * ys[c]
    f = np.diff(y_mix, prepend=0.0)
    np.maximum(f, 0.0, out=f)
    joint = np.zeros((T, len(cs)))
    even_stride = all(c >= 1 for c, pr in zip(cs, p_vec) if pr > 0.0)
    if even_stride:
        fe = f[0::2]
        g = np.zeros(len(fe))
        g[0] = 1.0
        y_rev = {c: ys[c][N::-2].copy() for c in set(cs)}
    else:
        fe = f
        g = np.zeros(N + 1)
        g[0] = 1.0
        y_rev = {c: ys[c][::-1].copy() for c in set(cs)}
    # direct convolution is exact but quadratic; zero-padded FFT keeps large
    # pools tractable and stays far inside the cross-method tolerance
    use_fft = len(fe) ** 2 > 1 << 18
    for m in range(1, T + 1):
        for ti, c in enumerate(cs):
            joint[m - 1, ti] = p_vec[ti] * float(np.dot(g, y_rev[c]))
        if m < T:
            if use_fft:
                g = fftconvolve(g, fe)[: len(g)]
                np.maximum(g, 0.0, out=g)
            else:
                g = np.convolve(g, fe)[: len(g)]
            if float(g.sum()) < 1e-18:
                break  # later rows carry no reachable mass
    if len(cs) == 1:
        return JointLawTable(spec, joint[:, 0].copy(), np.zeros(T), "iterative")
    return JointLawTable(spec, joint[:, 0].copy(), joint[:, 1].copy(), "iterative")


def f_doubleprime(table: JointLawTable, ladder: IterationLadder, m_prime: int) -> float:
    """Average fidelity credited to the M'-th output slot.

    Failed slots count as maximally mixed pairs of fidelity 1/2; successful
    slots carry their member protocol's (effective) output fidelity.
    """
    if not 1 <= m_prime <= table.T:
        raise ValueError(f"row {m_prime} outside 1..{table.T}")
    fi, fj = table.spec.resolved_fidelities(ladder)
    ji = float(table.joint_i[m_prime - 1])
    jj = float(table.joint_j[m_prime - 1])
    return (1.0 - (ji + jj)) / 2.0 + ji * fi + jj * fj


@dataclass(frozen=True)
class MBounds:
    """Certified output counts for one finite run.

    lower_general (valid for any mixture) and lower_uninterpolated (tighter,
    single-protocol runs only, else None) bound the certifiable count from
    below; upper bounds what any certificate can claim. M' = 0 always
    qualifies. f_doubleprime holds the per-row slot fidelities.
    """

    lower_general: int
    lower_uninterpolated: int | None
    upper: int
    f_doubleprime: tuple[float, ...]


def m_bounds(spec: FiniteRunSpec, table: JointLawTable, ladder: IterationLadder) -> MBounds:
    """Evaluate the three certification bounds over the table rows.

    In global mode row m qualifies when the joint-success threshold 1 - eps
    is met (the general lower bound takes its square root); in per-pair mode
    the thresholds tighten to (1 - eps)^m. The upper bound compares the
    Werner states at the promised mixture fidelity and at the slot fidelity
    f'' through the diagonal fidelity.
    """
    eps = spec.epsilon_tilde
    F_prime = spec.resolved_f_prime(ladder)
    w_prime = werner(F_prime)
    single = spec.pair[0] == spec.pair[1] or spec.p_i in (0.0, 1.0)
    lower_general = 0
    lower_unint: int | None = 0 if single else None
    upper = 0
    f2 = []
    for m in range(1, table.T + 1):
        succ = table.success_prob(m)
        fpp = f_doubleprime(table, ladder, m)
        f2.append(fpp)
        thr = (1.0 - eps) if spec.mode == "global" else (1.0 - eps) ** m
        if succ >= math.sqrt(thr):
            lower_general = m
        if single and succ >= thr:
            lower_unint = m
        if diagonal_fidelity(w_prime, werner(fpp)) >= thr:
            upper = m
    return MBounds(lower_general, lower_unint, upper, tuple(f2))

"""Monte-Carlo estimators for the finite-pool laws.

A deliberately independent route: nothing here shares code with the chain or
convolution computations, so agreement within sampling error is evidence,
not tautology. Sampling is chunked and each chunk gets its own spawned
generator, which makes results reproducible for a fixed seed regardless of
how the chunks are scheduled; the chunk size is part of that contract.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dejmps import IterationLadder
from .finitesize import FiniteRunSpec

__all__ = [
    "CHUNK",
    "GENERATOR",
    "EmpiricalConsumption",
    "EmpiricalLaw",
    "TrialConfig",
    "simulate_consumption",
    "simulate_runs",
]

GENERATOR = "numpy.random.Generator(PCG64)"
CHUNK = 50_000


@dataclass(frozen=True)
class TrialConfig:
    trials: int = 200_000
    seed: int = 12345

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("need at least one trial")

    def chunk_sizes(self) -> list[int]:
        n_chunks = -(-self.trials // CHUNK)
        sizes = [CHUNK] * n_chunks
        sizes[-1] = self.trials - CHUNK * (n_chunks - 1)
        return sizes


@dataclass(frozen=True)
class EmpiricalLaw:
    """Sampled estimates of Pr(Y_M' = 1) and Pr(X_M' = k, Y_M' = 1)."""

    success_freq: float
    joint_freq: dict[int, float]
    se_success: float
    se_joint: dict[int, float]
    trials: int
    generator: str = GENERATOR


@dataclass(frozen=True)
class EmpiricalConsumption:
    """Sampled consumption totals for a fixed number of outputs."""

    values: np.ndarray
    freqs: np.ndarray
    mean: float
    variance: float
    se_mean: float
    se_variance: float
    trials: int
    generator: str = GENERATOR


def _binomial_se(freq: float, trials: int) -> float:
    return math.sqrt(freq * (1.0 - freq) / trials)


def _ladder_ts(ladder: IterationLadder) -> list[float]:
    return [math.nan] + [lv.t for lv in ladder.levels[1:]]


def _sample_consumption(rng: np.random.Generator, ts: list[float], c: int,
                        count: int) -> np.ndarray:
    """Pool pairs consumed by each of `count` independent level-c outputs."""
    if count == 0:
        return np.zeros(0, dtype=np.int64)
    if c == 0:
        return np.ones(count, dtype=np.int64)
    if c == 1:
        return 2 * rng.geometric(ts[1], count).astype(np.int64)
    attempts = rng.geometric(ts[c], count).astype(np.int64)
    needed = 2 * attempts
    sub = _sample_consumption(rng, ts, c - 1, int(needed.sum()))
    starts = np.concatenate(([0], np.cumsum(needed)[:-1]))
    return np.add.reduceat(sub, starts)


def simulate_runs(spec: FiniteRunSpec, ladder: IterationLadder, m_prime: int,
                  config: TrialConfig = TrialConfig()) -> EmpiricalLaw:
    """Estimate row m' of the joint law by direct simulation.

    Each trial samples m' output tracks, then their consumptions; the run
    succeeds when the total stays within the pool. Per chunk the generator
    is consumed in a fixed order: track uniforms, member-i consumptions,
    member-j consumptions.
    """
    i, j = spec.pair
    if ladder.depth < j:
        raise ValueError(f"ladder depth {ladder.depth} below protocol index {j}")
    if m_prime < 1:
        raise ValueError("m_prime must be at least 1")
    ts = _ladder_ts(ladder)
    degenerate = i == j
    children = np.random.default_rng(config.seed).spawn(len(config.chunk_sizes()))
    succ = 0
    count_i = 0
    count_j = 0
    for rng, n in zip(children, config.chunk_sizes()):
        if degenerate:
            is_j = np.zeros((n, m_prime), dtype=bool)
        else:
            is_j = rng.random((n, m_prime)) >= spec.p_i
        cons = np.zeros((n, m_prime), dtype=np.int64)
        mask_i = ~is_j
        cons[mask_i] = _sample_consumption(rng, ts, i, int(mask_i.sum()))
        if not degenerate:
            cons[is_j] = _sample_consumption(rng, ts, j, int(is_j.sum()))
        ok = cons.sum(axis=1) <= spec.N
        succ += int(ok.sum())
        last_is_j = is_j[:, -1]
        count_j += int((ok & last_is_j).sum())
        count_i += int((ok & ~last_is_j).sum())
    trials = config.trials
    f_succ = succ / trials
    if degenerate:
        joint = {i: f_succ}
    else:
        joint = {i: count_i / trials, j: count_j / trials}
    return EmpiricalLaw(
        success_freq=f_succ,
        joint_freq=joint,
        se_success=_binomial_se(f_succ, trials),
        se_joint={k: _binomial_se(v, trials) for k, v in joint.items()},
        trials=trials,
    )


def simulate_consumption(ladder: IterationLadder, k: int, m_prime: int,
                         config: TrialConfig = TrialConfig()) -> EmpiricalConsumption:
    """Sample the pool pairs consumed to finish m' level-k outputs."""
    if k < 0 or k > ladder.depth:
        raise ValueError(f"level {k} outside ladder depth {ladder.depth}")
    if m_prime < 1:
        raise ValueError("m_prime must be at least 1")
    ts = _ladder_ts(ladder)
    children = np.random.default_rng(config.seed).spawn(len(config.chunk_sizes()))
    totals = []
    for rng, n in zip(children, config.chunk_sizes()):
        samples = _sample_consumption(rng, ts, k, n * m_prime)
        totals.append(samples.reshape(n, m_prime).sum(axis=1))
    x = np.concatenate(totals).astype(float)
    trials = config.trials
    mean = float(x.mean())
    var = float(x.var(ddof=1)) if trials > 1 else 0.0
    centered = x - mean
    m4 = float(np.mean(centered ** 4))
    se_var = math.sqrt(max(m4 - var ** 2, 0.0) / trials) if trials > 1 else 0.0
    values, counts = np.unique(x.astype(np.int64), return_counts=True)
    return EmpiricalConsumption(
        values=values,
        freqs=counts / trials,
        mean=mean,
        variance=var,
        se_mean=math.sqrt(var / trials) if trials > 1 else 0.0,
        se_variance=se_var,
        trials=trials,
    )

"""Optimal mixing of ladder protocols on the rate-fidelity plane.

A protocol family is a finite set of (rate, fidelity) points. Time-sharing
two protocols with per-output probabilities p traces a straight chord in the
(mean cost, fidelity) plane, so the achievable frontier is the upper concave
hull of the points in those coordinates. Everything here is exact pairwise
algebra; no numerical optimiser is involved.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

__all__ = [
    "CutoffUndefinedError",
    "InterpolationResult",
    "ProtocolPoint",
    "chord_fidelity",
    "cutoff_rate_threshold",
    "max_fidelity_at_rate",
    "max_rate_at_fidelity",
    "mixture_probabilities",
    "pareto_prune",
    "protocol_cutoff",
    "protocol_family",
    "single_point_result",
]

COST_RATE_TOL = 1e-12


class CutoffUndefinedError(ValueError):
    """Raised when no admissible term defines the cutoff rate threshold."""


@dataclass(frozen=True)
class ProtocolPoint:
    """One protocol: an index, its asymptotic rate and output fidelity.

    mean_cost is the expected number of input pairs per output, 1/rate; it
    may be supplied explicitly but must satisfy mean_cost * rate = 1 within
    1e-12. Fidelity must lie in (1/2, 1].
    """

    index: int
    rate: float
    fidelity: float
    mean_cost: float = None

    def __post_init__(self):
        if not 0.0 < self.rate <= 1.0:
            raise ValueError(f"rate {self.rate} outside (0, 1]")
        if not 0.5 < self.fidelity <= 1.0:
            raise ValueError(f"fidelity {self.fidelity} outside (1/2, 1]")
        if self.mean_cost is None:
            object.__setattr__(self, "mean_cost", 1.0 / self.rate)
        elif abs(self.mean_cost * self.rate - 1.0) > COST_RATE_TOL:
            raise ValueError(
                f"mean_cost {self.mean_cost} inconsistent with rate {self.rate}")


@dataclass(frozen=True)
class InterpolationResult:
    """A two-protocol mixture.

    pair holds the member indices (i, j) with i < j, except for the
    degenerate single-protocol mixture where i == j. q_i, q_j are the
    relative output counts (normalised to q_i + q_j = 1); p_i, p_j the
    per-output sampling probabilities. achieved_rate and achieved_fidelity
    are computed from the q weights:

        rate = (q_i R_i + q_j R_j) / (q_i + q_j)
        fidelity = (q_i R_i F_i + q_j R_j F_j) / (q_i R_i + q_j R_j)
    """

    pair: tuple[int, int]
    point_i: ProtocolPoint
    point_j: ProtocolPoint
    q_i: float
    q_j: float
    p_i: float
    p_j: float
    achieved_rate: float
    achieved_fidelity: float


def mixture_probabilities(result: InterpolationResult) -> tuple[float, float]:
    """Per-output sampling probabilities p_k proportional to q_k R_k."""
    wi = result.q_i * result.point_i.rate
    wj = result.q_j * result.point_j.rate
    tot = wi + wj
    if tot <= 0.0:
        raise ValueError("mixture carries no weight")
    return (wi / tot, wj / tot)


def _make_result(hi: ProtocolPoint, lo: ProtocolPoint, q_i: float, q_j: float) -> InterpolationResult:
    tot = q_i + q_j
    q_i, q_j = q_i / tot, q_j / tot
    # a one-sided mixture must report its member's exact rate and fidelity
    if q_j == 0.0:
        return InterpolationResult((hi.index, lo.index), hi, lo, 1.0, 0.0,
                                   1.0, 0.0, hi.rate, hi.fidelity)
    if q_i == 0.0:
        return InterpolationResult((hi.index, lo.index), hi, lo, 0.0, 1.0,
                                   0.0, 1.0, lo.rate, lo.fidelity)
    wi = q_i * hi.rate
    wj = q_j * lo.rate
    rate = (wi + wj) / (q_i + q_j)
    fidelity = (wi * hi.fidelity + wj * lo.fidelity) / (wi + wj)
    p_i, p_j = (wi / (wi + wj), wj / (wi + wj))
    return InterpolationResult((hi.index, lo.index), hi, lo, q_i, q_j, p_i, p_j,
                               rate, fidelity)


def single_point_result(point: ProtocolPoint) -> InterpolationResult:
    """Degenerate mixture that always runs one protocol."""
    return InterpolationResult((point.index, point.index), point, point,
                               1.0, 0.0, 1.0, 0.0, point.rate, point.fidelity)


def _endpoint_result(pts: Sequence[ProtocolPoint], pos: int) -> InterpolationResult:
    # one-sided q reports the member's exact rate and fidelity, no rounding
    if len(pts) == 1:
        return single_point_result(pts[0])
    if pos + 1 < len(pts):
        return _make_result(pts[pos], pts[pos + 1], 1.0, 0.0)
    return _make_result(pts[pos - 1], pts[pos], 0.0, 1.0)


def chord_fidelity(p1: ProtocolPoint, p2: ProtocolPoint, rate: float) -> float:
    """Fidelity of the p1/p2 mixture whose rate equals ``rate``."""
    hi, lo = (p1, p2) if p1.rate >= p2.rate else (p2, p1)
    num = hi.fidelity * hi.rate * (rate - lo.rate) + lo.fidelity * lo.rate * (hi.rate - rate)
    return num / (rate * (hi.rate - lo.rate))


def pareto_prune(points: Iterable[ProtocolPoint]) -> list[ProtocolPoint]:
    """Drop points no mixture ever needs.

    Removes any point weakly dominated by another in both rate and fidelity,
    then any point weakly below the chord of two survivors at its own rate.
    The result is sorted by decreasing rate with strictly increasing
    fidelity, i.e. the upper concave hull in (mean cost, fidelity).
    """
    pts = sorted(points, key=lambda p: (-p.rate, -p.fidelity, p.index))
    if not pts:
        raise ValueError("empty protocol family")
    kept: list[ProtocolPoint] = []
    for p in pts:
        # kept fidelities increase, so kept[-1] carries the running maximum
        if kept and kept[-1].fidelity >= p.fidelity:
            continue
        kept.append(p)
    hull: list[ProtocolPoint] = []
    for p in kept:
        while len(hull) >= 2 and chord_fidelity(hull[-2], p, hull[-1].rate) >= hull[-1].fidelity:
            hull.pop()
        hull.append(p)
    return hull


def protocol_family(ladder) -> list[ProtocolPoint]:
    """Pruned (rate, fidelity) family of a ladder's improving levels."""
    pts = [ProtocolPoint(lv.k, lv.R, lv.F) for lv in ladder.improving_levels()]
    return pareto_prune(pts)


def max_fidelity_at_rate(points: Sequence[ProtocolPoint], R_target: float) -> InterpolationResult:
    """Best mixture fidelity at a prescribed rate.

    ``points`` must be a pruned family (see pareto_prune). The target rate
    must lie in the family's rate range. Maximises over all admissible
    pairs; ties resolve to the lexicographically smallest pair positions.
    """
    pts = list(points)
    if not pts:
        raise ValueError("empty protocol family")
    rmax = max(p.rate for p in pts)
    rmin = min(p.rate for p in pts)
    if not rmin <= R_target <= rmax:
        raise ValueError(f"target rate {R_target} outside [{rmin}, {rmax}]")
    for pos, p in enumerate(pts):
        if p.rate == R_target:
            return _endpoint_result(pts, pos)
    best = None
    best_pair = None
    for ii in range(len(pts)):
        for jj in range(ii + 1, len(pts)):
            hi, lo = pts[ii], pts[jj]
            if not lo.rate <= R_target <= hi.rate:
                continue
            fid = chord_fidelity(hi, lo, R_target)
            if best is None or fid > best:
                best = fid
                best_pair = (ii, jj)
    if best_pair is None:
        raise ValueError(f"target rate {R_target} not bracketed by the family")
    hi, lo = pts[best_pair[0]], pts[best_pair[1]]
    # rate constraint is linear in the cost coordinate
    lam = (lo.mean_cost - 1.0 / R_target) / (lo.mean_cost - hi.mean_cost)
    return _make_result(hi, lo, lam * hi.mean_cost, (1.0 - lam) * lo.mean_cost)


def max_rate_at_fidelity(points: Sequence[ProtocolPoint], F_target: float) -> InterpolationResult:
    """Best mixture rate at a prescribed fidelity.

    ``points`` must be a pruned family. The target fidelity must lie in the
    family's fidelity range. When the target equals a member fidelity the
    member's exact rate is returned. Ties between pairs resolve to the
    lexicographically smallest pair positions.
    """
    pts = list(points)
    if not pts:
        raise ValueError("empty protocol family")
    fmin = min(p.fidelity for p in pts)
    fmax = max(p.fidelity for p in pts)
    if not fmin <= F_target <= fmax:
        raise ValueError(f"target fidelity {F_target} outside [{fmin}, {fmax}]")
    for pos, p in enumerate(pts):
        if p.fidelity == F_target:
            return _endpoint_result(pts, pos)
    best = None
    best_pair = None
    for ii in range(len(pts)):
        for jj in range(ii + 1, len(pts)):
            hi, lo = pts[ii], pts[jj]  # hi has the higher rate, lower fidelity
            if not hi.fidelity <= F_target <= lo.fidelity:
                continue
            rate = ((lo.fidelity - hi.fidelity) * hi.rate * lo.rate
                    / (hi.rate * (F_target - hi.fidelity) + lo.rate * (lo.fidelity - F_target)))
            if best is None or rate > best:
                best = rate
                best_pair = (ii, jj)
    if best_pair is None:
        raise ValueError(f"target fidelity {F_target} not bracketed by the family")
    hi, lo = pts[best_pair[0]], pts[best_pair[1]]
    q_i = (lo.fidelity - F_target) / hi.rate
    q_j = (F_target - hi.fidelity) / lo.rate
    return _make_result(hi, lo, q_i, q_j)


def cutoff_rate_threshold(points_so_far: Sequence[ProtocolPoint], F_target: float,
                          R_achieved: float) -> float:
    """Rate below which no further protocol can improve on R_achieved.

    Minimises (F_target - F_i) R_achieved R_i / ((1-F_i) R_i - (1-F_target)
    R_achieved) over the supplied points with fidelity below the target.
    """
    below = [p for p in points_so_far if p.fidelity < F_target]
    if not below:
        raise ValueError("no supplied point lies below the target fidelity")
    omega = None
    for p in below:
        den = (1.0 - p.fidelity) * p.rate - (1.0 - F_target) * R_achieved
        if den <= 0.0:
            continue
        val = (F_target - p.fidelity) * R_achieved * p.rate / den
        if omega is None or val < omega:
            omega = val
    if omega is None:
        raise CutoffUndefinedError(
            "every cutoff denominator is non-positive; R_achieved is inconsistent "
            "with the supplied points")
    return omega


def protocol_cutoff(points_so_far: Sequence[ProtocolPoint], F_target: float,
                    R_achieved: float, tail: Iterable[ProtocolPoint]) -> int:
    """Largest protocol index worth considering for rate at F_target.

    ``tail`` lazily yields further family points in decreasing-rate order;
    it is consumed only until the first point at or below the threshold, so
    callers need not pre-commit to a ladder depth.
    """
    omega = cutoff_rate_threshold(points_so_far, F_target, R_achieved)
    best = None
    for p in points_so_far:
        if p.rate > omega and (best is None or p.index > best):
            best = p.index
    for p in tail:
        if p.rate <= omega:
            break
        if best is None or p.index > best:
            best = p.index
    if best is None:
        raise CutoffUndefinedError("no protocol rate exceeds the cutoff threshold")
    return best

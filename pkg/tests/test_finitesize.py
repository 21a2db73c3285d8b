import math

import numpy as np
import pytest

from purinterp import (
    CountDistribution,
    FiniteRunSpec,
    MemoryCapExceeded,
    build_ladder,
    expected_pairs,
    f_doubleprime,
    joint_law_iterative,
    joint_law_markov,
    m_bounds,
    normal_approximation,
    pairs_consumed_distribution,
    pairs_produced_distribution,
    werner,
)

LADDER = build_ladder(werner(0.7), 6)
T1 = LADDER[1].t  # 0.68 up to float rounding of the Werner weights


def test_count_distribution_validation():
    with pytest.raises(ValueError):
        CountDistribution(np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        CountDistribution(np.array([1.1, -0.1]))
    d = CountDistribution(np.array([0.25, 0.75]))
    assert d.mean() == 0.75
    assert abs(d.variance() - 0.1875) < 1e-15


def test_produced_level0_is_pool():
    d = pairs_produced_distribution(LADDER, 0, 7)
    assert d.pmf[7] == 1.0
    assert d.mean() == 7.0


def test_produced_level1_frozen():
    # 4 pool pairs, two level-1 attempts: Binomial(2, t1)
    d = pairs_produced_distribution(LADDER, 1, 4)
    assert abs(d.pmf[0] - (1 - T1) ** 2) < 1e-12
    assert abs(d.pmf[1] - 2 * T1 * (1 - T1)) < 1e-12
    assert abs(d.pmf[2] - T1 ** 2) < 1e-12
    assert abs(d.pmf[0] - 0.1024) < 1e-12
    assert abs(d.pmf[1] - 0.4352) < 1e-12
    assert abs(d.pmf[2] - 0.4624) < 1e-12


def test_produced_odd_pool_pair_wasted():
    a = pairs_produced_distribution(LADDER, 1, 9).pmf
    b = pairs_produced_distribution(LADDER, 1, 8).pmf
    assert np.abs(a[: len(b)] - b).max() < 1e-15


def test_produced_normalisation():
    for k in range(5):
        for n in (0, 1, 5, 32, 100):
            d = pairs_produced_distribution(LADDER, k, n)
            assert abs(math.fsum(d.pmf) - 1.0) < 1e-10


def test_expected_pairs_level1_closed_form():
    for n in range(0, 40):
        want = T1 * (n // 2)
        assert abs(expected_pairs(LADDER, 1, n) - want) < 1e-12
    assert abs(expected_pairs(LADDER, 1, 10) - 3.4) < 1e-12


def test_expected_pairs_level2_closed_form():
    t2 = LADDER[2].t
    for n in (4, 17, 64, 129):
        h = n // 2
        want = t2 * (2 * h * T1 + (1 - 2 * T1) ** h - 1) / 4
        assert abs(expected_pairs(LADDER, 2, n) - want) < 1e-12


def test_expected_pairs_matches_distribution_mean():
    for k in range(4):
        for n in (6, 23, 50):
            d = pairs_produced_distribution(LADDER, k, n)
            assert abs(expected_pairs(LADDER, k, n) - d.mean()) < 1e-12


def test_consumed_level0_point_mass():
    d = pairs_consumed_distribution(LADDER, 0, 5)
    assert d.pmf[5] == 1.0
    assert d.truncated_mass == 0.0


def test_consumed_level1_geometric():
    d = pairs_consumed_distribution(LADDER, 1, 1)
    # one output needs Geometric(t1) attempts of two pairs each
    for attempts in range(1, 12):
        want = T1 * (1 - T1) ** (attempts - 1)
        assert abs(d.pmf[2 * attempts] - want) < 1e-12
    assert d.pmf[1::2].max() == 0.0
    assert d.truncated_mass < 1e-11


def test_consumed_mean_matches_ladder():
    for k, m_prime in ((1, 3), (2, 2)):
        d = pairs_consumed_distribution(LADDER, k, m_prime)
        mu, var = normal_approximation(LADDER, k, m_prime)
        # truncation keeps the tails tiny, not zero
        assert abs(d.mean() - mu) < 1e-7
        assert abs(d.variance() - var) < 1e-5


def test_consumed_support_starts_at_minimum():
    d = pairs_consumed_distribution(LADDER, 2, 3)
    start = 3 * 4
    assert d.pmf[:start].max() == 0.0
    assert d.pmf[start] > 0.0


def test_consumed_max_pool_truncation():
    d = pairs_consumed_distribution(LADDER, 1, 1, max_pool=6)
    assert len(d.pmf) == 7
    assert d.truncated_mass > 1e-3
    assert abs(math.fsum(d.pmf) + d.truncated_mass - 1.0) < 1e-12


def test_normal_approximation_frozen():
    mu, var = normal_approximation(LADDER, 1, 100)
    assert abs(mu - 100 * 2 / T1) < 1e-9
    assert abs(mu - 294.11764705882354) < 1e-9
    assert abs(var - 100 * 4 * (1 - T1) / T1 ** 2) < 1e-9
    mu0, var0 = normal_approximation(LADDER, 0, 5)
    assert mu0 == 5.0 and var0 == 0.0


def test_spec_validation():
    with pytest.raises(ValueError):
        FiniteRunSpec(N=8, pair=(2, 1), p_i=0.5, epsilon_tilde=1e-7)
    with pytest.raises(ValueError):
        FiniteRunSpec(N=8, pair=(1, 1), p_i=0.5, epsilon_tilde=1e-7)
    with pytest.raises(ValueError):
        FiniteRunSpec(N=8, pair=(1, 2), p_i=1.5, epsilon_tilde=1e-7)
    with pytest.raises(ValueError):
        FiniteRunSpec(N=8, pair=(1, 2), p_i=0.5, epsilon_tilde=0.0)
    with pytest.raises(ValueError):
        FiniteRunSpec(N=8, pair=(1, 2), p_i=0.5, epsilon_tilde=1e-7, mode="other")


def test_spec_f_prime_consistency():
    spec = FiniteRunSpec(N=8, pair=(1, 2), p_i=0.5, epsilon_tilde=1e-7, F_prime=0.6)
    with pytest.raises(ValueError):
        spec.resolved_f_prime(LADDER)
    good = 0.5 * LADDER[1].F + 0.5 * LADDER[2].F
    spec = FiniteRunSpec(N=8, pair=(1, 2), p_i=0.5, epsilon_tilde=1e-7, F_prime=good)
    assert spec.resolved_f_prime(LADDER) == good


def test_spec_fidelity_override():
    spec = FiniteRunSpec(N=8, pair=(2, 2), p_i=1.0, epsilon_tilde=1e-7,
                         fidelities=(0.9, 0.9), F_prime=0.9)
    assert spec.resolved_fidelities(LADDER) == (0.9, 0.9)
    assert spec.resolved_f_prime(LADDER) == 0.9


def test_markov_state_count():
    spec = FiniteRunSpec(N=8, pair=(1, 2), p_i=0.5, epsilon_tilde=1e-7)
    tab = joint_law_markov(spec, LADDER)
    # (2T - 1)(2^i + 2^j + 2) + 2 with T = 4
    assert tab.num_states == 58
    assert tab.T == 4


def test_markov_single_output_hand_value():
    # first output succeeds iff the first or second level-1 attempt does
    spec = FiniteRunSpec(N=4, pair=(1, 1), p_i=1.0, epsilon_tilde=1e-7)
    tab = joint_law_markov(spec, LADDER)
    want = T1 + (1 - T1) * T1
    assert abs(tab.success_prob(1) - want) < 1e-14
    assert abs(tab.success_prob(1) - 0.8976) < 1e-12


def test_empty_table_below_first_output():
    spec = FiniteRunSpec(N=3, pair=(2, 2), p_i=1.0, epsilon_tilde=1e-7)
    for law in (joint_law_markov, joint_law_iterative):
        tab = law(spec, LADDER)
        assert tab.T == 0
        assert tab.success_prob(0) == 1.0


def test_state_cap():
    spec = FiniteRunSpec(N=64, pair=(1, 2), p_i=0.5, epsilon_tilde=1e-7)
    with pytest.raises(MemoryCapExceeded):
        joint_law_markov(spec, LADDER, state_cap=100)


def test_methods_agree():
    for pair, p, N in [((0, 1), 0.25, 16), ((1, 2), 0.5, 31), ((2, 3), 0.75, 64),
                       ((0, 3), 0.0, 40), ((1, 3), 1.0, 48)]:
        spec = FiniteRunSpec(N=N, pair=pair, p_i=p, epsilon_tilde=1e-7)
        a = joint_law_markov(spec, LADDER)
        b = joint_law_iterative(spec, LADDER)
        assert np.abs(a.joint_i - b.joint_i).max() < 1e-9
        assert np.abs(a.joint_j - b.joint_j).max() < 1e-9


def test_success_monotone_in_output_count():
    spec = FiniteRunSpec(N=64, pair=(1, 2), p_i=0.5, epsilon_tilde=1e-7)
    tab = joint_law_iterative(spec, LADDER)
    s = tab.success_probs()
    assert all(b <= a + 1e-14 for a, b in zip(s, s[1:]))
    assert tab.success_prob(0) == 1.0


def test_degenerate_pair_puts_all_mass_on_i():
    spec = FiniteRunSpec(N=32, pair=(1, 1), p_i=1.0, epsilon_tilde=1e-7)
    tab = joint_law_iterative(spec, LADDER)
    assert tab.joint_j.max() == 0.0
    assert tab.joint_prob(1, 1) == tab.success_prob(1)
    with pytest.raises(ValueError):
        tab.joint_prob(1, 2)


def test_f_doubleprime_identity():
    spec = FiniteRunSpec(N=64, pair=(1, 2), p_i=0.5, epsilon_tilde=1e-7)
    tab = joint_law_iterative(spec, LADDER)
    fi, fj = LADDER[1].F, LADDER[2].F
    for m in range(1, tab.T + 1):
        want = 0.5 + tab.joint_prob(m, 1) * (fi - 0.5) + tab.joint_prob(m, 2) * (fj - 0.5)
        assert abs(f_doubleprime(tab, LADDER, m) - want) < 1e-14
    # early rows succeed almost surely, so the slot fidelity sits at the mixture value
    assert abs(f_doubleprime(tab, LADDER, 1) - spec.resolved_f_prime(LADDER)) < 0.01
    with pytest.raises(ValueError):
        f_doubleprime(tab, LADDER, 0)


def test_m_bounds_ordering_and_modes():
    spec = FiniteRunSpec(N=200, pair=(1, 2), p_i=0.5, epsilon_tilde=1e-7)
    tab = joint_law_iterative(spec, LADDER)
    mb = m_bounds(spec, tab, LADDER)
    assert mb.lower_uninterpolated is None  # proper mixture
    assert 0 <= mb.lower_general <= mb.upper <= tab.T
    assert len(mb.f_doubleprime) == tab.T

    single = FiniteRunSpec(N=200, pair=(2, 2), p_i=1.0, epsilon_tilde=1e-7)
    tab_s = joint_law_iterative(single, LADDER)
    mb_s = m_bounds(single, tab_s, LADDER)
    assert mb_s.lower_uninterpolated is not None
    assert mb_s.lower_uninterpolated <= mb_s.lower_general

    per_pair = FiniteRunSpec(N=200, pair=(1, 2), p_i=0.5, epsilon_tilde=1e-7,
                             mode="per_pair")
    mb_p = m_bounds(per_pair, joint_law_iterative(per_pair, LADDER), LADDER)
    # per-pair thresholds are weaker for m >= 2 at the same budget
    assert mb_p.lower_general >= mb.lower_general
    assert mb_p.upper >= mb.upper


def test_m_bounds_thresholds_exact():
    spec = FiniteRunSpec(N=100, pair=(1, 1), p_i=1.0, epsilon_tilde=1e-7)
    tab = joint_law_iterative(spec, LADDER)
    mb = m_bounds(spec, tab, LADDER)
    thr = 1.0 - 1e-7
    succ = tab.success_probs()
    want_lower = max([0] + [m for m in range(1, tab.T + 1) if succ[m - 1] >= thr])
    want_general = max([0] + [m for m in range(1, tab.T + 1)
                              if succ[m - 1] >= math.sqrt(thr)])
    assert mb.lower_uninterpolated == want_lower
    assert mb.lower_general == want_general

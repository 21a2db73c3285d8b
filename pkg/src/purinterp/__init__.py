"""Optimal interpolation of entanglement purification protocols.

Asymptotic rate-fidelity trade-off of the iterated two-to-one purification
protocol, its optimal pairwise interpolation, and exact finite-pool bounds
on the number of high-fidelity pairs a finite supply of noisy pairs yields.
"""

from .bellcore import (
    BellDiagonal,
    ChannelSpec,
    TwoQubitDensity,
    WernerParam,
    apply_channel,
    bell_diagonal_of,
    bell_fidelity,
    binary_entropy,
    channel_bell_diagonal,
    channel_for_fidelity,
    diagonal_fidelity,
    ree_rate_bound,
    werner,
)
from .dejmps import (
    DegenerateStepError,
    IterationLadder,
    LadderLevel,
    StepOutcome,
    build_ladder,
    dejmps_step,
    dejmps_step_circuit_oracle,
    optimal_permutation,
)
from .interpolate import (
    CutoffUndefinedError,
    InterpolationResult,
    ProtocolPoint,
    chord_fidelity,
    cutoff_rate_threshold,
    max_fidelity_at_rate,
    max_rate_at_fidelity,
    mixture_probabilities,
    pareto_prune,
    protocol_cutoff,
    protocol_family,
    single_point_result,
)
from .finitesize import (
    CountDistribution,
    FiniteRunSpec,
    JointLawTable,
    MBounds,
    MemoryCapExceeded,
    expected_pairs,
    f_doubleprime,
    joint_law_iterative,
    joint_law_markov,
    m_bounds,
    normal_approximation,
    pairs_consumed_distribution,
    pairs_produced_distribution,
)
from .mc_oracle import (
    CHUNK,
    GENERATOR,
    EmpiricalConsumption,
    EmpiricalLaw,
    TrialConfig,
    simulate_consumption,
    simulate_runs,
)

__version__ = "0.1.0"

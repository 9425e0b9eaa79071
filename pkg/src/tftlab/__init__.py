"""Simulation and verification laboratory for transient fluctuation
identities of continuous-time Markov jump processes.

The package ties together five layers: process descriptions (rate protocols,
boundary data, law evolution), exact trajectory sampling, invertible path
transforms, trajectory log-likelihoods and entropy-like functionals, and the
verification machinery (Monte Carlo two-sided moment checks, exact discrete
enumeration, and series diagnostics for a family of biased walks on the
nonnegative integers)."""

from .birthdeath import (
    BDStripReport,
    BiasSpec,
    DivergenceReport,
    FreeEnergyEstimate,
    MGFSeries,
    bd_divergence_scan,
    bd_exact_law,
    bd_free_energy,
    bd_heat,
    bd_heat_vector,
    bd_mgf_truncated,
    bd_protocol,
    bd_tft_check,
    simulate_bd,
)
from .enumeration import (
    CoordinatePermutation,
    DiscreteChain,
    ExactReport,
    enumerate_paths,
    exact_verify,
)
from .likelihood import (
    Score,
    SupportError,
    backward_measure_bc1,
    backward_measure_bc2,
    dissipated_work,
    entropy_production,
    gibbs_boundary_consistent,
    heat_batch,
    heat_dissipation,
    log_path_density,
    log_path_density_batch,
    score,
    score_batch,
)
from .process import (
    FunctionalProtocol,
    Hamiltonian,
    InitialDistribution,
    PiecewiseProtocol,
    ProcessMeasure,
    StateSpace,
    build_ldb_protocol,
    evolve_law,
    gibbs_distribution,
    protocol_reverse,
)
from .sampler import (
    JumpPath,
    SeededStream,
    path_from_line,
    path_to_line,
    piecewise_as_functional,
    sample_ensemble,
    sample_path,
    sample_path_thinning,
)
from .transforms import (
    Composition,
    HoldingPermutation,
    Identity,
    PermutationFamily,
    TimeReversal,
    apply_transform,
    cyclic_family,
    identity_family,
    invert_transform,
    reverse_family,
    table_family,
)
from .verify import (
    IntegralFTResult,
    MGFGrid,
    RatioReport,
    distributional_test,
    estimate_mgf_pair,
    integral_ft_check,
)

__version__ = "0.1.0"

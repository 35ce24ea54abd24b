"""Interacting diffusions on random graphs: simulation, fluctuation
fields, limiting (S)PDE solvers and graph-concentration checks."""

from .graph import (
    CenteredAdjacency,
    Graph,
    gen_erdos_renyi,
    gen_sbm,
    graph_from_adjacency,
    spectral_norm,
)
from .kernels import KernelSpec, kuramoto, zero_kernel
from .dynamics import (
    ParticleState,
    SimConfig,
    Trajectory,
    order_parameter,
    simulate,
    simulate_ensemble,
    step,
)
from .measures import (
    AtomicMeasure,
    FluctuationField,
    PairField,
    SpectralField,
    bl_distance,
    cn_integrand,
    cn_remainder,
    empirical_global,
    empirical_local,
    empirical_pair,
    fluctuation,
    fourier_coeffs,
    pair_graph_measure,
    sobolev_norm,
    uniform_field,
    w1_circle,
)
from .limits import (
    FPTrajectory,
    InitialLawSpec,
    NoiseModel,
    OperatorMatrix,
    assemble_operator,
    sample_initial,
    solve_coupled,
    solve_fokker_planck,
    solve_fokker_planck_sbm,
    solve_limit_eta,
    solve_local_system,
)
from .concentration import (
    ALL_PATTERNS,
    PAIR_IJ,
    SnResult,
    TRI_UDD,
    TRI_UDDD,
    TRI_UDLR,
    TRI_ULR,
    TRI_UMR,
    TRI_VZT,
    bernstein_stats,
    sn_exact,
    sn_lower,
    sn_upper,
    tail_study,
)
from .initcond import InitSpec, eta0, hat_eta0, sample, varpi0
from .experiments import ks_two_sample, psi_reference, run, validate_config

__version__ = "0.1.0"

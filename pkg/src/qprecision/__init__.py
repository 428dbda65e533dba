"""Trajectory thermodynamics of repeated quantum measurements.

Builds repeated-interaction models under the two-point measurement
protocol, enumerates or samples their measurement records, evaluates
entropy production, record asymmetry and inactivity, and checks the
thermodynamic and kinetic precision bounds those quantities impose, for
both discrete collision models and unraveled Markovian dynamics.
"""

from .bounds import (
    BoundCheck,
    BoundReport,
    SurvivalData,
    bound_report,
    check_kur,
    check_tur,
    fluctuation_floor,
    inverse_xtanhx,
    quality_factor,
    short_time_asymmetry_floor,
    survival_activity,
)
from .errors import (
    AccuracyError,
    BoundViolationError,
    ConfigError,
    ConsistencyError,
    ConvergenceError,
    DegeneracyError,
    DimError,
    DomainError,
    EnumerationCapError,
    HermiticityError,
    KrausError,
    ModeError,
    NonUniqueStationaryError,
    QPrecisionError,
    ResonanceError,
    SingularError,
    SupportError,
)
from .experiments import (
    DEFAULT_SEED,
    SWEEP_TAU,
    ExperimentConfig,
    RunResult,
    random_hermitian,
    random_lindblad,
    rng_stream,
    run_kur_scatter,
    run_lambda_sweep,
    run_markov_suite,
    run_single,
    run_tur_scatter,
    sample_model,
    sample_observable,
)
from .markov import (
    JumpChannel,
    LindbladSpec,
    UnraveledAsymmetry,
    UnraveledSteps,
    driven_qubit,
    dynamical_activity,
    effective_hamiltonian,
    inactivity,
    incoherent_qubit,
    jump_rate_operator,
    lindblad_evolve,
    lindblad_from_dict,
    lindblad_stationary,
    lindblad_to_dict,
    liouvillian_apply,
    load_lindblad,
    loschmidt_echo,
    no_jump_propagator,
    save_lindblad,
    sigma_star_dp_lower_bound,
    thermal_driven_qubit,
    unraveled_kraus_sets,
    unraveled_sigma_star,
)
from .model import (
    KrausSet,
    ModelSpec,
    backward_kraus,
    build_model,
    channel_apply,
    env_energies,
    forward_kraus,
    gibbs_env_probs,
    load_model,
    model_from_dict,
    model_to_dict,
    save_model,
    stationary_state,
    thermal_operation_model,
    total_hamiltonian,
    total_unitary,
    transfer_matrix,
)
from .qlinalg import (
    gibbs_state,
    herm_eig,
    partial_trace_env,
    quantum_rel_entropy,
    vn_entropy,
)
from .tolerances import TOL, Tolerances
from .trajectories import (
    GENERAL,
    STATIONARY,
    MCStats,
    Observable,
    Trajectory,
    TrajectoryEnsemble,
    TrajectoryStats,
    backward_prob,
    change_indicator,
    compute_stats,
    current_observable,
    dump_trajectories_csv,
    entanglement_entropy_avg,
    enumerate_trajectories,
    generic_observable,
    mc_sample,
    no_change,
    reverse,
    sigma_from_states,
    sigma_from_states_general,
    trajectory_prob,
    validate_observable,
)

__version__ = "0.1.0"

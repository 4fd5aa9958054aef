"""Simulation and analysis toolkit for a Bell test on gravitationally entangled spins.

Stage 1 entangles two falling spin-1/2 masses through Newtonian branch
phases, stage 2 swaps the spin state onto photons, and stage 3 runs a CHSH
test on the photons. Local hidden-variable adversaries and spacetime audits
of the event schedule decide what a violation actually rules out.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BBMVError,
    ConfigError,
    InsufficientDataError,
    InvalidInputError,
    InvariantError,
    NoSolutionError,
    StageError,
)
from .quantum import (  # noqa: E402
    DensityMatrix,
    Ket,
    Observable,
    QuantumChannel,
    apply_channel,
    as_density,
    expectation,
    fidelity,
    negativity,
    partial_trace,
    sample_outcomes,
    singlet,
    tensor,
    werner,
)
from .bmv import (  # noqa: E402
    BMVConfig,
    InteractionDeclaration,
    StageOneOutcome,
    branch_phases,
    check_conditions_1_2,
    default_bmv_config,
    default_interactions,
    entangling_phase,
    evolve_bmv,
    tune_for_singlet,
    witness_value,
)
from .transfer import TransferConfig, check_condition_3, transfer_to_photons  # noqa: E402
from .bell import (  # noqa: E402
    CHSHEstimate,
    MeasurementSetting,
    SettingsQuad,
    TrialRecord,
    chsh_value,
    correlation,
    estimate_chsh,
    optimize_settings,
    run_trials,
    standard_quad,
)
from .lhv import (  # noqa: E402
    CorrelationTable,
    LHVMixture,
    LHVStrategy,
    best_lhv_fit,
    enumerate_deterministic,
    lhv_max_chsh,
    local_lhv_sample,
    setting_aware_lhv_sample,
)
from .causal import (  # noqa: E402
    Event,
    ExperimentSchedule,
    audit_collapse_locality,
    audit_freedom_of_choice,
    audit_locality,
    reference_schedule,
    interval,
    interval_class,
    run_audits,
)
from .harness import (  # noqa: E402
    ExperimentReport,
    RunConfig,
    check_condition_4,
    default_run_config,
    depolarizing_breakeven,
    emit_report,
    load_config,
    parse_report,
    run_experiment,
    sweep,
)

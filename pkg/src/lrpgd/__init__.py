"""Preconditioned non-convex gradient descent for noisy low-rank recovery."""

from .core import (
    DefinitenessError,
    FactorPair,
    GroundTruth,
    SvdConvergenceError,
    SymFactor,
    fro_error,
    fro_norm,
    load_matrix,
    make_ground_truth,
    make_rng,
    phase_ground_truth,
    save_matrix,
    spd_solve,
    spec_norm,
    svd_top_r,
)
from .diagnostics import (
    PGeometry,
    coupling_ratio,
    dual_p_norm,
    fd_gradient,
    gradient_check,
    minimax_level,
    p_norm,
    pl_ratio,
)
from .experiments import (
    FrameStack,
    Scenario,
    builtin_scenarios,
    denoise_pipeline,
    get_scenario,
    power_doppler,
    run_scenario,
    snr_sigma,
    synth_frame_stack,
    truncated_svd_denoise,
)
from .initializers import small_init, spectral_data, spectral_oracle
from .measurements import (
    EntrySampling,
    GaussianSensing,
    MeasurementModel,
    MissingGroundTruthError,
    OneBitData,
    PhaseRetrievalData,
    clean_loss,
    clean_model,
    entry_ensemble,
    gaussian_ensemble,
    load_model,
    loss_and_grad,
    loss_and_grad_asym,
    loss_and_grad_sym,
    onebit_ensemble,
    onebit_loss_grad,
    onebit_population,
    phase_ensemble,
    phase_loss_grad,
    save_model,
    sparse_residual,
)
from .optimizers import (
    AUTO,
    MethodKind,
    RunResult,
    StepConfig,
    TraceRecord,
    eta_schedule,
    gd_step,
    precond_step,
    read_trace_csv,
    run,
    write_trace_csv,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"

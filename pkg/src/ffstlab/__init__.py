"""Free-fermion state transfer through unpolarized XX spin chains."""

from .chain import ChainSpec, DisorderModel, build_coupling_matrix, make_uniform_spec, sample_disorder
from .errors import (
    DarkMode,
    DegenerateResonance,
    FFSTError,
    InvalidArgument,
    NumericFailure,
    ResonanceCollision,
    SizeCapExceeded,
)
from .fermions import (
    ModeAnalysis,
    TransferPlan,
    analytic_infidelity,
    analyze_modes,
    compensate_asymmetry,
    end_to_end_amplitude,
    infidelity_bound,
    leakage,
    max_coupling,
    ph_spectrum_check,
    pick_resonant_mode,
    plan_transfer,
    propagator,
    transfer_time,
)

__version__ = "0.1.0"

__all__ = [
    "ChainSpec",
    "DarkMode",
    "DegenerateResonance",
    "DisorderModel",
    "FFSTError",
    "InvalidArgument",
    "ModeAnalysis",
    "NumericFailure",
    "ResonanceCollision",
    "SizeCapExceeded",
    "TransferPlan",
    "analytic_infidelity",
    "analyze_modes",
    "build_coupling_matrix",
    "compensate_asymmetry",
    "end_to_end_amplitude",
    "infidelity_bound",
    "leakage",
    "make_uniform_spec",
    "max_coupling",
    "ph_spectrum_check",
    "pick_resonant_mode",
    "plan_transfer",
    "propagator",
    "sample_disorder",
    "transfer_time",
]

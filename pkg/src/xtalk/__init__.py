"""Exact and asymptotic performance of linear ZF and MMSE crosstalk cancelers."""

__version__ = "0.1.0"

from .asymptotics import (
    AsymptoticResult,
    VarianceProfile,
    asymptotic_rate,
    asymptotic_sinr,
    gamma_deterministic,
    hachem_fixed_point,
    mmse_extremal_sigma,
    mmse_regime_approx,
    mmse_snr_asymptotic,
    mmse_snr_cardano,
    mmse_snr_derivative,
    theorem2_bounds,
    wireless_mmse_snr,
    zf_gamma_asymptotic,
)
from .cancelers import Canceler, CancelerReport, mmse_report, sinr_linear, zf_report
from .channel import (
    ChannelRealization,
    ChannelScenario,
    DirectModelParams,
    FextModelParams,
    RngSpec,
    generate_realization,
    sigma_total,
)
from .errors import (
    ConfigError,
    NoConvergenceError,
    NumericalError,
    OutOfBandError,
    OutOfDomainError,
    SingularChannelError,
    XtalkError,
)
from .linkbudget import BandPlan, Source, SweepMode, aggregate_rate, bits_per_tone, rate_reach_sweep
from .montecarlo import EnsembleStats, SequenceSpec, convergence_experiment, scatter_experiment

__all__ = [
    "__version__",
    "AsymptoticResult",
    "VarianceProfile",
    "asymptotic_rate",
    "asymptotic_sinr",
    "gamma_deterministic",
    "hachem_fixed_point",
    "mmse_extremal_sigma",
    "mmse_regime_approx",
    "mmse_snr_asymptotic",
    "mmse_snr_cardano",
    "mmse_snr_derivative",
    "theorem2_bounds",
    "wireless_mmse_snr",
    "zf_gamma_asymptotic",
    "Canceler",
    "CancelerReport",
    "mmse_report",
    "sinr_linear",
    "zf_report",
    "ChannelRealization",
    "ChannelScenario",
    "DirectModelParams",
    "FextModelParams",
    "RngSpec",
    "generate_realization",
    "sigma_total",
    "ConfigError",
    "NoConvergenceError",
    "NumericalError",
    "OutOfBandError",
    "OutOfDomainError",
    "SingularChannelError",
    "XtalkError",
    "BandPlan",
    "Source",
    "SweepMode",
    "aggregate_rate",
    "bits_per_tone",
    "rate_reach_sweep",
    "EnsembleStats",
    "SequenceSpec",
    "convergence_experiment",
    "scatter_experiment",
]

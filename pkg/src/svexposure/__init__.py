"""Spatially-varying exposure pattern selection.

Simulate a 2x2 multiplexed exposure/gain sensor, rank every pattern class by
SVE-Risk or SNR-based baselines, and reconstruct HDR radiance from raw
captures.
"""

__version__ = "0.1.0"

from .estimators import ADMMTVReconstructor, LPAReconstructor, PatternSelector
from .histogram import RadianceHistogram, build_histogram, histogram_from_radiance, pilot_pattern
from .metrics import mu_psnr, mu_ssim, mu_tonemap, q_score, spearman_rho, top_k_delta
from .patterns import Level, LevelSet, Pattern, canonicalize, class_count, enumerate_classes
from .reconstruct import admm_tv_reconstruct, lpa_reconstruct, observation_field
from .risk import (
    Estimator,
    RankReport,
    RiskValue,
    build_neighbor_table,
    rank_patterns,
    snr_mse_risk,
    snr_risk,
    sve_risk_hist,
    sve_risk_pixelwise,
    sve_risk_wo,
)
from .scenes import synth_scene
from .sensor import CaptureSimulator, RawCapture, SensorConfig, simulate_capture
from .validation import PreconditionError

__all__ = [
    "ADMMTVReconstructor",
    "CaptureSimulator",
    "Estimator",
    "LPAReconstructor",
    "Level",
    "LevelSet",
    "Pattern",
    "PatternSelector",
    "PreconditionError",
    "RadianceHistogram",
    "RankReport",
    "RawCapture",
    "RiskValue",
    "SensorConfig",
    "admm_tv_reconstruct",
    "build_histogram",
    "build_neighbor_table",
    "canonicalize",
    "class_count",
    "enumerate_classes",
    "histogram_from_radiance",
    "lpa_reconstruct",
    "mu_psnr",
    "mu_ssim",
    "mu_tonemap",
    "observation_field",
    "pilot_pattern",
    "q_score",
    "rank_patterns",
    "simulate_capture",
    "snr_mse_risk",
    "snr_risk",
    "spearman_rho",
    "sve_risk_hist",
    "sve_risk_pixelwise",
    "sve_risk_wo",
    "synth_scene",
    "top_k_delta",
]

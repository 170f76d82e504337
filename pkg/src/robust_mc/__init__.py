"""Robust low-rank matrix completion under heavy-tailed noise.

Truncated (Winsorized) spectral initialization followed by gradient descent
on an adaptive-Huber objective with a balancedness regularizer, plus
synthetic instance generators, leave-one-out sequences, error metrics, and a
Monte-Carlo experiment harness.
"""

from .matcore import (
    RngStream,
    ShapeError,
    frob_norm,
    inf_norm,
    matmul,
    read_matrix,
    spectral_norm,
    two_inf_norm,
    write_matrix,
)
from .model import (
    FactorPair,
    HuberParams,
    ObservationSet,
    gradient,
    huber_rho,
    objective,
    paper_tau,
    psi_tau,
)
from .spectral import (
    SpectralInit,
    loo_initialize,
    spectral_initialize,
    top_r_svd,
    truncated_data_matrix,
)
from .solver import DivergenceError, GdConfig, GdTrace, gd_run, loo_loss_objective
from .metrics import AlignedError, align, imbalance, incoherence_mu, sgn_polar
from .synth import (
    AsymTwoPointNoise,
    GaussianNoise,
    GroundTruth,
    NoNoise,
    NoiseModel,
    StudentTNoise,
    TrinomialNoise,
    draw_noise,
    make_ground_truth,
    sample_observations,
)
from .bench import (
    ExperimentSpec,
    ExplicitTauGrid,
    InfiniteTau,
    PaperTauRule,
    TrialRecord,
    emit_csv,
    emit_json,
    fig4_ratios,
    presets,
    read_csv,
    run_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "AlignedError", "AsymTwoPointNoise", "DivergenceError", "ExperimentSpec",
    "ExplicitTauGrid", "FactorPair", "GaussianNoise", "GdConfig", "GdTrace",
    "GroundTruth", "HuberParams", "InfiniteTau", "NoNoise", "NoiseModel",
    "ObservationSet", "PaperTauRule", "RngStream", "ShapeError",
    "SpectralInit", "StudentTNoise", "TrialRecord", "TrinomialNoise",
    "align", "draw_noise", "emit_csv", "emit_json", "fig4_ratios",
    "frob_norm", "gd_run", "gradient", "huber_rho", "imbalance",
    "incoherence_mu", "inf_norm", "loo_initialize", "loo_loss_objective",
    "make_ground_truth", "matmul", "objective", "paper_tau", "presets",
    "psi_tau", "read_csv", "read_matrix", "run_experiment",
    "sample_observations", "sgn_polar", "spectral_initialize",
    "spectral_norm", "top_r_svd", "truncated_data_matrix", "two_inf_norm",
    "write_matrix",
]

"""Alignment modulo rotation, error metrics, and diagnostics.

Factor pairs are only identified up to a common orthonormal rotation, so
errors between candidate and reference factors are measured after applying
the Procrustes-optimal rotation of the stacked factor matrix [X; Y].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matcore import ShapeError, as_matrix, frob_norm, spectral_norm, two_inf_norm
from .model import FactorPair, imbalance_gram


@dataclass(frozen=True)
class AlignedError:
    """Optimal rotation and the factor errors measured after applying it."""

    rotation: np.ndarray
    frob_err: float
    spectral_err: float
    two_inf_err: float


def sgn_polar(r_mat: np.ndarray) -> np.ndarray:
    """Orthogonal polar factor U V^T from the SVD of a square matrix.

    For nonsingular input this is the unique orthogonal polar factor; for
    rank-deficient input the SVD's U V^T is returned, which is still
    orthonormal and varies continuously through degeneracy.
    """
    r_mat = as_matrix(r_mat)
    if r_mat.shape[0] != r_mat.shape[1]:
        raise ShapeError(f"sgn is defined for square matrices, got {r_mat.shape}")
    u, _, vt = np.linalg.svd(r_mat)
    return u @ vt


def align(f: FactorPair, truth_f: FactorPair) -> AlignedError:
    """Best-aligning rotation sgn(F^T F*) for the stacks, plus error norms."""
    if f.x.shape != truth_f.x.shape:
        raise ShapeError(f"factor shapes differ: {f.x.shape} vs {truth_f.x.shape}")
    stack = f.stacked()
    stack_star = truth_f.stacked()
    rotation = sgn_polar(stack.T @ stack_star)
    diff = stack @ rotation - stack_star
    return AlignedError(
        rotation=rotation,
        frob_err=frob_norm(diff),
        spectral_err=spectral_norm(diff),
        two_inf_err=two_inf_norm(diff),
    )


def incoherence_mu(u: np.ndarray) -> float:
    """Smallest mu with max row norm of u bounded by sqrt(mu * r / n).

    ``u`` must have orthonormal columns (checked to 1e-6); returns
    n * ||u||_{2,inf}^2 / r.
    """
    u = as_matrix(u)
    n, r = u.shape
    gram_gap = u.T @ u - np.eye(r)
    if np.linalg.norm(gram_gap, "fro") > 1e-6:
        raise ValueError("incoherence is defined for orthonormal columns")
    return float(n * two_inf_norm(u) ** 2 / r)


def imbalance(f: FactorPair) -> float:
    """Frobenius norm of X^T X - Y^T Y."""
    return frob_norm(imbalance_gram(f))

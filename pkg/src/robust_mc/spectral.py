"""Robust spectral initialization and its leave-one-out variant.

The starting point for gradient descent is the top-r SVD of the rescaled,
truncated observation matrix

    M0 = (1/p) * P_Omega(psi_tau(M)),

split into balanced factors X0 = U0 sqrt(S0), Y0 = V0 sqrt(S0).  The
leave-one-out variant replaces one row (or column) of M0 with the clean
ground-truth row (or column), so the resulting initialization is independent
of the noise in that line.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matcore import ShapeError, as_matrix
from .model import FactorPair, ObservationSet, psi_tau, _check_tau


@dataclass(frozen=True)
class SpectralInit:
    """Top-r SVD of the truncated data matrix and the balanced factor split."""

    u0: np.ndarray
    sigma0: np.ndarray
    v0: np.ndarray
    factors: FactorPair


def truncated_data_matrix(obs: ObservationSet, tau: float) -> np.ndarray:
    """Dense matrix with (1/p) psi_tau(value) at observed entries, 0 elsewhere.

    ``tau=inf`` means no truncation, i.e. the standard 1/p-rescaled
    observation matrix.
    """
    _check_tau(tau)
    m0 = np.zeros((obs.n1, obs.n2))
    if obs.count:
        m0[obs.rows, obs.cols] = psi_tau(obs.values, tau) / obs.rate_p
    return m0


def top_r_svd(m: np.ndarray, r: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Leading r singular triplets (u, s, v) with a fixed sign convention.

    Each column pair (u_i, v_i) is flipped so that the largest-magnitude
    entry of u_i is positive, making the output reproducible across runs and
    LAPACK backends (up to exactly degenerate singular values).
    """
    m = as_matrix(m)
    if not (1 <= r <= min(m.shape)):
        raise ShapeError(f"rank {r} out of range for a {m.shape[0]}x{m.shape[1]} matrix")
    try:
        u, s, vt = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - backend dependent
        raise ArithmeticError(f"SVD did not converge: {exc}") from exc
    u, s, v = u[:, :r].copy(), s[:r].copy(), vt[:r].T.copy()
    for i in range(r):
        k = int(np.argmax(np.abs(u[:, i])))
        if u[k, i] < 0:
            u[:, i] = -u[:, i]
            v[:, i] = -v[:, i]
    return u, s, v


def _balanced_split(u: np.ndarray, s: np.ndarray, v: np.ndarray) -> SpectralInit:
    root = np.sqrt(s)
    return SpectralInit(u0=u, sigma0=s, v0=v, factors=FactorPair(u * root, v * root))


def spectral_initialize(obs: ObservationSet, tau: float, r: int) -> SpectralInit:
    """Algorithm step 1: truncate, rescale, top-r SVD, balanced square-root split."""
    m0 = truncated_data_matrix(obs, tau)
    return _balanced_split(*top_r_svd(m0, r))


def loo_initialize(obs: ObservationSet, truth: np.ndarray, l: int,
                   tau: float, r: int) -> SpectralInit:
    """Initialization for the l-th leave-one-out sequence.

    ``l`` in [1, n] selects row l; ``l`` in (n, 2n] selects column l - n.
    The selected line of the truncated data matrix is replaced by the
    corresponding line of the ground truth ``truth``; every other entry is
    identical to the standard initialization matrix.
    """
    truth = as_matrix(truth, "truth")
    if obs.n1 != obs.n2:
        raise ShapeError("leave-one-out initialization requires a square matrix")
    n = obs.n1
    if truth.shape != (n, n):
        raise ShapeError(f"truth must be {n}x{n}, got {truth.shape}")
    if not (1 <= l <= 2 * n):
        raise ValueError(f"leave-one-out index must lie in [1, {2 * n}], got {l}")
    m0 = truncated_data_matrix(obs, tau)
    if l <= n:
        m0[l - 1, :] = truth[l - 1, :]
    else:
        m0[:, l - n - 1] = truth[:, l - n - 1]
    return _balanced_split(*top_r_svd(m0, r))

"""Huber loss, its clipping derivative, and the factored completion objective.

The estimator minimizes, over factor pairs (X, Y) with X Y^T modeling the
target matrix,

    (1 / 2p) * sum over observed (i,j) of rho_tau((X Y^T)_ij - M_ij)
        + (1/8) * ||X^T X - Y^T Y||_F^2

where rho_tau is the Huber loss and the second term softly enforces balance
between the two factors.  tau = +inf is a first-class value and selects the
regularized least-squares objective (rho_inf(x) = x^2 / 2).

The gradient implemented here is the exact gradient of the objective above;
finite-difference agreement is the arbiter of every scaling convention
(in particular the 1/2p data-term weight, which always uses the nominal
sampling rate, never the empirical observed fraction).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .matcore import ShapeError, as_matrix


def _check_tau(tau) -> float:
    tau = float(tau)
    if math.isnan(tau) or tau <= 0:
        raise ValueError(f"tau must be positive (or +inf), got {tau}")
    return tau


def huber_rho(x, tau):
    """Huber loss: x^2/2 inside [-tau, tau], linear with matched value/slope outside.

    Accepts scalars or arrays.  Continuous and continuously differentiable
    everywhere, including the knots at +-tau.
    """
    tau = _check_tau(tau)
    x = np.asarray(x, dtype=np.float64)
    if math.isinf(tau):
        out = 0.5 * x * x
    else:
        ax = np.abs(x)
        out = np.where(ax <= tau, 0.5 * x * x, tau * ax - 0.5 * tau * tau)
    return float(out) if out.ndim == 0 else out


def psi_tau(x, tau):
    """Clip to [-tau, tau]; equals d/dx huber_rho(x, tau) everywhere."""
    tau = _check_tau(tau)
    x = np.asarray(x, dtype=np.float64)
    out = np.clip(x, -tau, tau)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class HuberParams:
    """Loss parameter; ``tau=inf`` selects the pure least-squares loss."""

    tau: float

    def __post_init__(self):
        _check_tau(self.tau)


def paper_tau(m_star_inf_norm: float, sigma: float, n: int, p: float,
              c_tau: float = 3.0) -> float:
    """Adaptive threshold c_tau * (||M*||_inf + sigma * sqrt(n p))."""
    return c_tau * (m_star_inf_norm + sigma * math.sqrt(n * p))


@dataclass(frozen=True)
class FactorPair:
    """Candidate factorization M ~ x @ y.T; the gradient-descent state."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", as_matrix(self.x, "x"))
        object.__setattr__(self, "y", as_matrix(self.y, "y"))
        if self.x.shape != self.y.shape:
            raise ShapeError(f"factor shapes differ: {self.x.shape} vs {self.y.shape}")
        if self.x.shape[1] < 1:
            raise ShapeError("factors need at least one column")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def rank(self) -> int:
        return self.x.shape[1]

    def product(self) -> np.ndarray:
        """The modeled matrix x @ y.T."""
        return self.x @ self.y.T

    def stacked(self) -> np.ndarray:
        """The 2n x r vertical stack [x; y]."""
        return np.vstack([self.x, self.y])


@dataclass(frozen=True)
class ObservationSet:
    """Sampled index set with observed values and the nominal sampling rate.

    ``rate_p`` is the Bernoulli probability used in the 1/p rescaling of the
    objective and of the spectral-initialization matrix; it is *not* the
    empirical observed fraction.  Index pairs are stored strictly increasing
    in row-major (lexicographic) order, which also rules out duplicates.
    """

    n1: int
    n2: int
    rate_p: float
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        cols = np.asarray(self.cols, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "values", values)
        if not (0.0 < self.rate_p <= 1.0):
            raise ValueError(f"rate_p must lie in (0, 1], got {self.rate_p}")
        if not (rows.shape == cols.shape == values.shape) or rows.ndim != 1:
            raise ShapeError("rows, cols, values must be 1-D arrays of equal length")
        if rows.size:
            if rows.min() < 0 or rows.max() >= self.n1:
                raise ValueError("row index out of bounds")
            if cols.min() < 0 or cols.max() >= self.n2:
                raise ValueError("column index out of bounds")
            key = rows * np.int64(self.n2) + cols
            if not np.all(np.diff(key) > 0):
                raise ValueError("index pairs must be strictly increasing "
                                 "lexicographically with no duplicates")
        if not np.all(np.isfinite(values)):
            raise ValueError("observed values contain non-finite entries")

    @classmethod
    def from_samples(cls, n1: int, n2: int, rate_p: float, samples) -> "ObservationSet":
        """Build from an iterable of (i, j, value) triples in any order."""
        triples = sorted((int(i), int(j), float(v)) for i, j, v in samples)
        rows = np.array([t[0] for t in triples], dtype=np.int64)
        cols = np.array([t[1] for t in triples], dtype=np.int64)
        values = np.array([t[2] for t in triples], dtype=np.float64)
        return cls(n1, n2, rate_p, rows, cols, values)

    @property
    def count(self) -> int:
        return int(self.rows.size)


def _check_factor_obs(f: FactorPair, obs: ObservationSet) -> None:
    if f.x.shape[0] != obs.n1 or f.y.shape[0] != obs.n2:
        raise ShapeError(
            f"factors are for a {f.x.shape[0]}x{f.y.shape[0]} matrix, "
            f"observations for {obs.n1}x{obs.n2}"
        )


def residuals(f: FactorPair, obs: ObservationSet) -> np.ndarray:
    """(X Y^T)_ij - M_ij at the observed index pairs."""
    _check_factor_obs(f, obs)
    fit = np.einsum("kr,kr->k", f.x[obs.rows], f.y[obs.cols])
    return fit - obs.values


def imbalance_gram(f: FactorPair) -> np.ndarray:
    """X^T X - Y^T Y, the (symmetric) balance gap between the factors."""
    return f.x.T @ f.x - f.y.T @ f.y


def objective(f: FactorPair, obs: ObservationSet, params: HuberParams) -> float:
    """Huber data term at rate 1/2p plus the balance regularizer."""
    r = residuals(f, obs)
    data = float(np.sum(huber_rho(r, params.tau))) / (2.0 * obs.rate_p)
    g = imbalance_gram(f)
    return data + 0.125 * float(np.sum(g * g))


def gradient(f: FactorPair, obs: ObservationSet, params: HuberParams) -> FactorPair:
    """Exact gradient of :func:`objective` with respect to (x, y).

    grad_x = (1/2p) * W @ y + (1/2) * x @ (x^T x - y^T y)
    grad_y = (1/2p) * W^T @ x - (1/2) * y @ (x^T x - y^T y)

    where W holds the clipped residuals psi_tau((X Y^T)_ij - M_ij) on the
    observed support and zero elsewhere.
    """
    r = residuals(f, obs)
    w = psi_tau(r, params.tau) / (2.0 * obs.rate_p)
    w_mat = sp.csr_matrix((w, (obs.rows, obs.cols)), shape=(obs.n1, obs.n2))
    g = imbalance_gram(f)
    grad_x = w_mat @ f.y + 0.5 * f.x @ g
    grad_y = w_mat.T @ f.x - 0.5 * f.y @ g
    return FactorPair(grad_x, grad_y)

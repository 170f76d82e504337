"""Synthetic ground truth and the noise laws used in the simulation campaigns.

Ground truths follow the standard benchmark recipe: orthonormalized Gaussian
singular subspaces and an equidistant spectrum running from r down to 1.
Noise models are mean-zero with variance sigma^2 (exactly, for the discrete
laws) except Student-t, where sigma is the scale parameter and the variance
is sigma^2 * nu / (nu - 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Union

import numpy as np

from .matcore import ShapeError, as_generator
from .model import FactorPair, ObservationSet


@dataclass(frozen=True)
class GaussianNoise:
    """N(0, sigma^2)."""

    sigma: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")

    @property
    def label(self) -> str:
        return "gaussian"

    def mean(self) -> float:
        return 0.0

    def variance(self) -> float:
        return self.sigma**2


@dataclass(frozen=True)
class StudentTNoise:
    """sigma * t(nu): sigma is the scale parameter, not the standard deviation."""

    nu: float
    sigma: float

    def __post_init__(self):
        if self.nu <= 2:
            raise ValueError("nu must exceed 2 so the variance is finite")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")

    @property
    def label(self) -> str:
        return f"student_t({self.nu:g})"

    def mean(self) -> float:
        return 0.0

    def variance(self) -> float:
        return self.sigma**2 * self.nu / (self.nu - 2.0)


@dataclass(frozen=True)
class TrinomialNoise:
    """+-sigma/sqrt(delta) with probability delta/2 each, else 0.

    A delta-fraction of entries carry noise a factor 1/sqrt(delta) larger
    than sigma; mean is exactly 0 and variance exactly sigma^2.
    """

    delta: float
    sigma: float

    def __post_init__(self):
        if not (0.0 < self.delta < 1.0):
            raise ValueError("delta must lie in (0, 1)")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")

    @property
    def label(self) -> str:
        return f"trinomial({self.delta:g})"

    def support(self) -> tuple[np.ndarray, np.ndarray]:
        mag = self.sigma / math.sqrt(self.delta)
        values = np.array([mag, 0.0, -mag])
        probs = np.array([self.delta / 2, 1.0 - self.delta, self.delta / 2])
        return values, probs

    def mean(self) -> float:
        values, probs = self.support()
        return float(values @ probs)

    def variance(self) -> float:
        values, probs = self.support()
        return float((values**2) @ probs)


@dataclass(frozen=True)
class AsymTwoPointNoise:
    """A rare large positive spike balanced by a small negative shift.

    +sigma*sqrt((1-delta)/delta) with probability delta,
    -sigma*sqrt(delta/(1-delta)) with probability 1-delta.
    Mean exactly 0, variance exactly sigma^2, highly asymmetric for small
    delta.
    """

    delta: float
    sigma: float

    def __post_init__(self):
        if not (0.0 < self.delta < 1.0):
            raise ValueError("delta must lie in (0, 1)")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")

    @property
    def label(self) -> str:
        return f"asym_two_point({self.delta:g})"

    def support(self) -> tuple[np.ndarray, np.ndarray]:
        pos = self.sigma * math.sqrt((1.0 - self.delta) / self.delta)
        neg = -self.sigma * math.sqrt(self.delta / (1.0 - self.delta))
        return np.array([pos, neg]), np.array([self.delta, 1.0 - self.delta])

    def mean(self) -> float:
        values, probs = self.support()
        return float(values @ probs)

    def variance(self) -> float:
        values, probs = self.support()
        return float((values**2) @ probs)


@dataclass(frozen=True)
class NoNoise:
    """Noiseless observations."""

    @property
    def label(self) -> str:
        return "none"

    def mean(self) -> float:
        return 0.0

    def variance(self) -> float:
        return 0.0


NoiseModel = Union[GaussianNoise, StudentTNoise, TrinomialNoise,
                   AsymTwoPointNoise, NoNoise]


def with_sigma(model: NoiseModel, sigma: float) -> NoiseModel:
    """Same noise family with the level replaced; no-op for NoNoise."""
    if isinstance(model, NoNoise):
        return model
    return replace(model, sigma=sigma)


def noise_to_dict(model: NoiseModel) -> dict:
    if isinstance(model, GaussianNoise):
        return {"kind": "gaussian", "sigma": model.sigma}
    if isinstance(model, StudentTNoise):
        return {"kind": "student_t", "nu": model.nu, "sigma": model.sigma}
    if isinstance(model, TrinomialNoise):
        return {"kind": "trinomial", "delta": model.delta, "sigma": model.sigma}
    if isinstance(model, AsymTwoPointNoise):
        return {"kind": "asym_two_point", "delta": model.delta, "sigma": model.sigma}
    if isinstance(model, NoNoise):
        return {"kind": "none"}
    raise TypeError(f"unknown noise model {type(model)!r}")


def noise_from_dict(d: dict) -> NoiseModel:
    kind = d.get("kind")
    if kind == "gaussian":
        return GaussianNoise(sigma=float(d.get("sigma", 0.0)))
    if kind == "student_t":
        return StudentTNoise(nu=float(d["nu"]), sigma=float(d.get("sigma", 0.0)))
    if kind == "trinomial":
        return TrinomialNoise(delta=float(d["delta"]), sigma=float(d.get("sigma", 0.0)))
    if kind == "asym_two_point":
        return AsymTwoPointNoise(delta=float(d["delta"]), sigma=float(d.get("sigma", 0.0)))
    if kind == "none":
        return NoNoise()
    raise ValueError(f"unknown noise kind {kind!r}")


def draw_noise(model: NoiseModel, rng, size=None):
    """Draw from the noise law; returns a float when size is None."""
    gen = as_generator(rng)
    shape = () if size is None else size
    if isinstance(model, GaussianNoise):
        out = gen.normal(0.0, model.sigma, size=shape)
    elif isinstance(model, StudentTNoise):
        out = model.sigma * gen.standard_t(model.nu, size=shape)
    elif isinstance(model, TrinomialNoise):
        u = gen.random(size=shape)
        mag = model.sigma / math.sqrt(model.delta)
        out = np.where(u < model.delta / 2, mag,
                       np.where(u < model.delta, -mag, 0.0))
    elif isinstance(model, AsymTwoPointNoise):
        u = gen.random(size=shape)
        pos = model.sigma * math.sqrt((1.0 - model.delta) / model.delta)
        neg = -model.sigma * math.sqrt(model.delta / (1.0 - model.delta))
        out = np.where(u < model.delta, pos, neg)
    elif isinstance(model, NoNoise):
        out = np.zeros(shape)
    else:
        raise TypeError(f"unknown noise model {type(model)!r}")
    out = np.asarray(out, dtype=np.float64)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GroundTruth:
    """A synthetic rank-r instance with known spectrum and diagnostics."""

    u_star: np.ndarray
    sigma_star: np.ndarray
    v_star: np.ndarray
    m_star: np.ndarray
    mu: float
    kappa: float
    factors_star: FactorPair

    @property
    def n(self) -> int:
        return self.m_star.shape[0]

    @property
    def rank(self) -> int:
        return int(self.sigma_star.size)

    @property
    def sigma_max(self) -> float:
        return float(self.sigma_star[0])

    @property
    def sigma_min(self) -> float:
        return float(self.sigma_star[-1])

    @property
    def inf_norm(self) -> float:
        return float(np.abs(self.m_star).max())


def make_ground_truth(n: int, r: int, rng) -> GroundTruth:
    """Orthonormalized-Gaussian subspaces and equidistant spectrum r, ..., 1."""
    if not (1 <= r <= n):
        raise ShapeError(f"rank must satisfy 1 <= r <= n, got r={r}, n={n}")
    gen = as_generator(rng)
    u, _ = np.linalg.qr(gen.standard_normal((n, r)))
    v, _ = np.linalg.qr(gen.standard_normal((n, r)))
    sigma = np.linspace(float(r), 1.0, num=r)
    m_star = (u * sigma) @ v.T
    mu = max(
        n * np.einsum("ij,ij->i", u, u).max() / r,
        n * np.einsum("ij,ij->i", v, v).max() / r,
    )
    root = np.sqrt(sigma)
    return GroundTruth(
        u_star=u,
        sigma_star=sigma,
        v_star=v,
        m_star=m_star,
        mu=float(mu),
        kappa=float(sigma[0] / sigma[-1]),
        factors_star=FactorPair(u * root, v * root),
    )


def sample_observations(truth: GroundTruth, p: float, noise: NoiseModel,
                        rng) -> ObservationSet:
    """Bernoulli(p) inclusion per entry, values M*_ij plus one noise draw."""
    if not (0.0 < p <= 1.0):
        raise ValueError(f"p must lie in (0, 1], got {p}")
    gen = as_generator(rng)
    n = truth.n
    mask = gen.random((n, n)) < p
    rows, cols = np.nonzero(mask)
    values = truth.m_star[rows, cols]
    if not isinstance(noise, NoNoise) and rows.size:
        values = values + draw_noise(noise, gen, size=rows.size)
    return ObservationSet(n1=n, n2=n, rate_p=p,
                          rows=rows.astype(np.int64),
                          cols=cols.astype(np.int64),
                          values=values)

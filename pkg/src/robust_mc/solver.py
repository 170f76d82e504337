"""Gradient descent on the robust completion objective, plus leave-one-out runs.

A run iterates X <- X - eta * grad_X, Y <- Y - eta * grad_Y until the
relative Frobenius change of X Y^T over one step drops below a tolerance or
the iteration cap is hit.  In leave-one-out mode the loss drops the observed
data in one row (or column) and substitutes the clean ground-truth values
for that line at weight 1/2, so the run is independent of that line's noise
and sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .matcore import ShapeError, as_matrix
from .model import (
    FactorPair,
    HuberParams,
    ObservationSet,
    gradient,
    huber_rho,
    imbalance_gram,
    objective,
    psi_tau,
    residuals,
)

# Abort threshold: objective growing this much past its initial value means a
# bad step size, and the run should fail loudly rather than wander.
DIVERGENCE_FACTOR = 1e6


class DivergenceError(RuntimeError):
    """Gradient descent produced a non-finite or exploding iterate."""

    def __init__(self, iteration: int, message: str):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration


@dataclass(frozen=True)
class GdConfig:
    """Step size, caps, tolerances, and the loss threshold for one run.

    ``record_every=None`` resolves at run time to 1 when n <= 500 and to 10
    otherwise.  ``loo_index=None`` selects the standard objective; an index l
    in [1, 2n] selects the l-th leave-one-out objective (rows for l <= n,
    columns above).
    """

    eta: float
    max_iters: int = 2000
    rel_change_tol: float = 1e-10
    record_every: int | None = None
    tau: float = math.inf
    loo_index: int | None = None

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.rel_change_tol < 0:
            raise ValueError("rel_change_tol must be nonnegative")
        if self.record_every is not None and self.record_every < 1:
            raise ValueError("record_every must be at least 1")


@dataclass(frozen=True)
class IterateRecord:
    iteration: int
    rel_error: float
    objective: float
    imbalance: float
    rel_change: float


@dataclass
class GdTrace:
    """Recorded iterates plus the final state of one gradient-descent run."""

    records: list[IterateRecord] = field(default_factory=list)
    final: FactorPair | None = None
    iters_run: int = 0
    stop_reason: str = "max_iters"

    def rel_error_at(self, iteration: int) -> float:
        for rec in self.records:
            if rec.iteration == iteration:
                return rec.rel_error
        raise KeyError(f"iteration {iteration} was not recorded")

    @property
    def final_rel_error(self) -> float:
        return self.records[-1].rel_error


class _LooTerms:
    """Precomputed support split for the leave-one-out loss."""

    def __init__(self, obs: ObservationSet, truth: np.ndarray, l: int):
        truth = as_matrix(truth, "truth")
        if obs.n1 != obs.n2:
            raise ShapeError("leave-one-out mode requires a square matrix")
        n = obs.n1
        if truth.shape != (n, n):
            raise ShapeError(f"truth must be {n}x{n}, got {truth.shape}")
        if not (1 <= l <= 2 * n):
            raise ValueError(f"leave-one-out index must lie in [1, {2 * n}], got {l}")
        self.by_row = l <= n
        self.line = (l - 1) if self.by_row else (l - n - 1)
        keep = (obs.rows != self.line) if self.by_row else (obs.cols != self.line)
        self.kept = ObservationSet(
            n1=obs.n1, n2=obs.n2, rate_p=obs.rate_p,
            rows=obs.rows[keep], cols=obs.cols[keep], values=obs.values[keep],
        )
        # The dropped line is refit against the clean truth values, densely.
        self.truth_line = truth[self.line, :] if self.by_row else truth[:, self.line]

    def line_residuals(self, f: FactorPair) -> np.ndarray:
        if self.by_row:
            return f.x[self.line] @ f.y.T - self.truth_line
        return f.x @ f.y[self.line] - self.truth_line

    def objective(self, f: FactorPair, tau: float) -> float:
        data = float(np.sum(huber_rho(residuals(f, self.kept), tau)))
        data /= 2.0 * self.kept.rate_p
        line = 0.5 * float(np.sum(huber_rho(self.line_residuals(f), tau)))
        g = imbalance_gram(f)
        return data + line + 0.125 * float(np.sum(g * g))

    def gradient(self, f: FactorPair, tau: float) -> tuple[np.ndarray, np.ndarray]:
        obs = self.kept
        w = psi_tau(residuals(f, obs), tau) / (2.0 * obs.rate_p)
        w_mat = sp.csr_matrix((w, (obs.rows, obs.cols)), shape=(obs.n1, obs.n2))
        g = imbalance_gram(f)
        grad_x = w_mat @ f.y + 0.5 * f.x @ g
        grad_y = w_mat.T @ f.x - 0.5 * f.y @ g
        psi_line = psi_tau(self.line_residuals(f), tau)
        if self.by_row:
            grad_x[self.line] += 0.5 * psi_line @ f.y
            grad_y += 0.5 * np.outer(psi_line, f.x[self.line])
        else:
            grad_y[self.line] += 0.5 * psi_line @ f.x
            grad_x += 0.5 * np.outer(psi_line, f.y[self.line])
        return grad_x, grad_y


def loo_loss_objective(f: FactorPair, obs: ObservationSet, truth: np.ndarray,
                       l: int, tau: float) -> float:
    """Leave-one-out loss: observed data off line l at 1/2p, clean line l at 1/2."""
    HuberParams(tau)
    return _LooTerms(obs, truth, l).objective(f, tau)


def _rel_error(product: np.ndarray, truth: np.ndarray | None,
               truth_norm: float) -> float:
    if truth is None:
        return math.nan
    return float(np.linalg.norm(product - truth, "fro")) / truth_norm


def gd_run(init: FactorPair, obs: ObservationSet, cfg: GdConfig,
           truth: np.ndarray | None = None) -> GdTrace:
    """Run gradient descent from ``init`` and record the trajectory.

    ``truth`` (the clean target matrix) enables relative-error recording and
    is required in leave-one-out mode, where it also defines the substituted
    clean line.  Raises :class:`DivergenceError` if an iterate goes
    non-finite or the objective exceeds 1e6 times its initial value.
    """
    params = HuberParams(cfg.tau)
    loo = None
    if cfg.loo_index is not None:
        if truth is None:
            raise ValueError("leave-one-out mode requires the ground-truth matrix")
        loo = _LooTerms(obs, truth, cfg.loo_index)

    record_every = cfg.record_every
    if record_every is None:
        record_every = 1 if max(obs.n1, obs.n2) <= 500 else 10

    if truth is not None:
        truth = as_matrix(truth, "truth")
        truth_norm = float(np.linalg.norm(truth, "fro"))
        if truth_norm == 0.0:
            truth_norm = 1.0
    else:
        truth_norm = 1.0

    def obj(f: FactorPair) -> float:
        return loo.objective(f, cfg.tau) if loo else objective(f, obs, params)

    def grad(f: FactorPair) -> tuple[np.ndarray, np.ndarray]:
        if loo:
            return loo.gradient(f, cfg.tau)
        g = gradient(f, obs, params)
        return g.x, g.y

    trace = GdTrace()
    current = init
    product = current.product()
    obj_value = obj(current)
    obj_floor = abs(obj_value) + 1e-30
    rel_change = math.nan

    def record(iteration: int):
        trace.records.append(IterateRecord(
            iteration=iteration,
            rel_error=_rel_error(product, truth, truth_norm),
            objective=obj_value,
            imbalance=float(np.linalg.norm(imbalance_gram(current), "fro")),
            rel_change=rel_change,
        ))

    record(0)
    stop_reason = "max_iters"
    iters_run = 0
    for t in range(cfg.max_iters):
        try:
            grad_x, grad_y = grad(current)
        except ValueError as exc:
            raise DivergenceError(t + 1, f"gradient is non-finite ({exc})") from exc
        new_x = current.x - cfg.eta * grad_x
        new_y = current.y - cfg.eta * grad_y
        if not (np.all(np.isfinite(new_x)) and np.all(np.isfinite(new_y))):
            raise DivergenceError(t + 1, "iterate contains non-finite entries")
        current = FactorPair(new_x, new_y)
        new_product = current.product()
        denom = max(float(np.linalg.norm(product, "fro")), 1e-300)
        rel_change = float(np.linalg.norm(new_product - product, "fro")) / denom
        product = new_product
        obj_value = obj(current)
        if not math.isfinite(obj_value):
            raise DivergenceError(t + 1, "objective is non-finite")
        if obj_value > DIVERGENCE_FACTOR * obj_floor:
            raise DivergenceError(
                t + 1, f"objective {obj_value:.3e} exceeds {DIVERGENCE_FACTOR:.0e} "
                       f"times its initial value")
        iters_run = t + 1
        if iters_run % record_every == 0:
            record(iters_run)
        if rel_change <= cfg.rel_change_tol:
            stop_reason = "tolerance"
            break

    if not trace.records or trace.records[-1].iteration != iters_run:
        record(iters_run)
    trace.final = current
    trace.iters_run = iters_run
    trace.stop_reason = stop_reason
    return trace

"""Experiment presets, trial orchestration, and CSV/JSON emission.

The four presets mirror the paper-style simulation campaigns at desk scale
(n=200 by default; the full n=1000 setup is one config field away):

* ``fig1_convergence``  - error-vs-iteration trajectories per noise level
* ``fig2_sigma_sweep``  - final error vs noise level, averaged over trials
* ``fig3_tau_sweep``    - final error vs the Huber threshold tau
* ``fig4_ls_ratio``     - best-tau Huber error relative to least squares

Every trial derives its own counter-based RNG stream from the master seed
and the trial coordinates, so results are bit-reproducible regardless of
worker-pool size or completion order.  Within a trial, all tau values (and
the tau=inf least-squares baseline of fig4) run against the identical
sampled instance.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .matcore import RngStream
from .model import paper_tau
from .solver import DivergenceError, GdConfig, gd_run
from .spectral import spectral_initialize
from .synth import (
    AsymTwoPointNoise,
    GaussianNoise,
    NoiseModel,
    StudentTNoise,
    TrinomialNoise,
    make_ground_truth,
    noise_from_dict,
    noise_to_dict,
    sample_observations,
    with_sigma,
)

CSV_HEADER = ("preset", "distribution", "sigma", "tau", "trial", "seed",
              "rel_error", "iterations", "wall_ms")

PRESET_NAMES = ("fig1_convergence", "fig2_sigma_sweep", "fig3_tau_sweep",
                "fig4_ls_ratio", "custom")


@dataclass(frozen=True)
class PaperTauRule:
    """tau = c_tau * (||M*||_inf + sigma * sqrt(n p)), fresh per trial."""

    c_tau: float = 3.0


@dataclass(frozen=True)
class ExplicitTauGrid:
    values: tuple[float, ...]


@dataclass(frozen=True)
class InfiniteTau:
    """Pure least squares for every run."""


TauRule = PaperTauRule | ExplicitTauGrid | InfiniteTau


def tau_rule_to_dict(rule: TauRule) -> dict:
    if isinstance(rule, PaperTauRule):
        return {"rule": "paper", "c_tau": rule.c_tau}
    if isinstance(rule, ExplicitTauGrid):
        return {"rule": "grid", "values": list(rule.values)}
    if isinstance(rule, InfiniteTau):
        return {"rule": "infinity"}
    raise TypeError(f"unknown tau rule {type(rule)!r}")


def tau_rule_from_dict(d: dict) -> TauRule:
    kind = d.get("rule")
    if kind == "paper":
        return PaperTauRule(c_tau=float(d.get("c_tau", 3.0)))
    if kind == "grid":
        return ExplicitTauGrid(values=tuple(float(v) for v in d["values"]))
    if kind == "infinity":
        return InfiniteTau()
    raise ValueError(f"unknown tau rule {kind!r}")


@dataclass(frozen=True)
class ExperimentSpec:
    preset: str
    n: int = 200
    r: int = 5
    p: float = 0.3
    distributions: tuple[NoiseModel, ...] = (GaussianNoise(sigma=0.0),)
    sigma_grid: tuple[float, ...] = (1e-4,)
    tau_rule: TauRule = PaperTauRule()
    trials: int = 10
    eta: float = 0.05
    max_iters: int = 2000
    tol: float = 1e-10
    master_seed: int = 20220301
    record_trajectories: bool = False

    def __post_init__(self):
        if self.preset not in PRESET_NAMES:
            raise ValueError(f"unknown preset {self.preset!r}; "
                             f"expected one of {PRESET_NAMES}")
        if not self.distributions:
            raise ValueError("distributions must be nonempty")
        if not self.sigma_grid:
            raise ValueError("sigma_grid must be nonempty")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")


@dataclass(frozen=True)
class TrialRecord:
    """One (distribution, sigma, tau, trial) run; one CSV row.

    ``trajectory`` rows (fig1) reuse the same shape with ``iterations``
    holding the iterate index and ``rel_error`` the error at that iterate.
    """

    preset: str
    distribution: str
    sigma: float
    tau: float
    trial: int
    seed: int
    rel_error: float
    iterations: int
    wall_ms: float
    trajectory: tuple[tuple[int, float], ...] | None = None


def derive_stream_id(master_seed: int, preset: str, distribution: str,
                     sigma_index: int, trial: int) -> int:
    """Stable 64-bit stream id from the trial coordinates.

    tau is deliberately absent: gradient descent consumes no randomness, and
    all tau values within a trial must share the identical sampled instance
    (the fig4 Huber/least-squares pairing depends on it).
    """
    text = f"{master_seed}|{preset}|{distribution}|{sigma_index}|{trial}"
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _resolve_taus(spec: ExperimentSpec, truth, sigma: float) -> list[float]:
    rule = spec.tau_rule
    if isinstance(rule, PaperTauRule):
        taus = [paper_tau(truth.inf_norm, sigma, spec.n, spec.p, rule.c_tau)]
    elif isinstance(rule, ExplicitTauGrid):
        taus = list(rule.values)
    else:
        taus = [math.inf]
    if spec.preset == "fig4_ls_ratio" and not any(math.isinf(t) for t in taus):
        taus.append(math.inf)
    return taus


def _run_trial(spec: ExperimentSpec, dist: NoiseModel, sigma: float,
               sigma_index: int, trial: int) -> list[TrialRecord]:
    stream_id = derive_stream_id(spec.master_seed, spec.preset, dist.label,
                                 sigma_index, trial)
    gen = RngStream(spec.master_seed, stream_id).generator()
    truth = make_ground_truth(spec.n, spec.r, gen)
    noise = with_sigma(dist, sigma)
    obs = sample_observations(truth, spec.p, noise, gen)

    records = []
    for tau in _resolve_taus(spec, truth, sigma):
        start = time.perf_counter()
        cfg = GdConfig(eta=spec.eta, max_iters=spec.max_iters,
                       rel_change_tol=spec.tol, tau=tau)
        trajectory = None
        try:
            init = spectral_initialize(obs, tau, spec.r)
            trace = gd_run(init.factors, obs, cfg, truth=truth.m_star)
            rel_error = trace.final_rel_error
            iterations = trace.iters_run
            if spec.record_trajectories:
                trajectory = tuple((rec.iteration, rec.rel_error)
                                   for rec in trace.records)
        except DivergenceError as exc:
            rel_error = math.nan
            iterations = exc.iteration
        wall_ms = (time.perf_counter() - start) * 1000.0
        records.append(TrialRecord(
            preset=spec.preset, distribution=dist.label, sigma=sigma, tau=tau,
            trial=trial, seed=stream_id, rel_error=rel_error,
            iterations=iterations, wall_ms=wall_ms, trajectory=trajectory,
        ))
    return records


def worker_count() -> int:
    env = os.environ.get("ROBUST_MC_THREADS", "").strip()
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def run_experiment(spec: ExperimentSpec) -> list[TrialRecord]:
    """Run every (distribution x sigma x tau x trial) cell of the campaign.

    Trials execute on a bounded worker pool; the returned order is the
    deterministic nested-loop order of the trial coordinates, never the
    completion order.  Diverged runs yield a row with rel_error=nan.
    """
    coords = [(dist, sigma_index, sigma, trial)
              for dist in spec.distributions
              for sigma_index, sigma in enumerate(spec.sigma_grid)
              for trial in range(spec.trials)]
    workers = worker_count()
    if workers == 1 or len(coords) == 1:
        results = [_run_trial(spec, d, s, si, t) for d, si, s, t in coords]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_trial, spec, d, s, si, t)
                       for d, si, s, t in coords]
            results = [f.result() for f in futures]
    return [rec for batch in results for rec in batch]


def fig4_ratios(records: list[TrialRecord]) -> list[dict]:
    """Per (distribution, sigma, trial): min finite-tau error / tau=inf error."""
    groups: dict[tuple, dict[str, float]] = {}
    for rec in records:
        key = (rec.distribution, rec.sigma, rec.trial)
        entry = groups.setdefault(key, {"best": math.inf, "ls": math.nan})
        if math.isinf(rec.tau):
            entry["ls"] = rec.rel_error
        elif not math.isnan(rec.rel_error):
            entry["best"] = min(entry["best"], rec.rel_error)
    out = []
    for (dist, sigma, trial), entry in sorted(groups.items()):
        ls = entry["ls"]
        ratio = entry["best"] / ls if ls and not math.isnan(ls) else math.nan
        out.append({"distribution": dist, "sigma": sigma, "trial": trial,
                    "min_huber_error": entry["best"], "ls_error": ls,
                    "ratio": ratio})
    return out


def _fmt(value) -> str:
    return f"{value:.17g}" if isinstance(value, float) else str(value)


def _record_rows(rec: TrialRecord):
    yield (rec.preset, rec.distribution, _fmt(rec.sigma), _fmt(rec.tau),
           rec.trial, rec.seed, _fmt(rec.rel_error), rec.iterations,
           _fmt(rec.wall_ms))


def _trajectory_rows(rec: TrialRecord):
    for iteration, rel_error in rec.trajectory or ():
        yield (rec.preset, rec.distribution, _fmt(rec.sigma), _fmt(rec.tau),
               rec.trial, rec.seed, _fmt(rel_error), iteration, _fmt(0.0))


def emit_csv(records: list[TrialRecord], path) -> None:
    """Write one row per record with the fixed 9-column header."""
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for rec in records:
                writer.writerows(_record_rows(rec))
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc


def emit_trajectories_csv(records: list[TrialRecord], path) -> None:
    """Write per-iterate rows (same 9 columns; iterations = iterate index)."""
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for rec in records:
                writer.writerows(_trajectory_rows(rec))
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc


def read_csv(path) -> list[TrialRecord]:
    """Parse a CSV written by :func:`emit_csv` back into records."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        out = []
        for row in reader:
            out.append(TrialRecord(
                preset=row[0], distribution=row[1], sigma=float(row[2]),
                tau=float(row[3]), trial=int(row[4]), seed=int(row[5]),
                rel_error=float(row[6]), iterations=int(row[7]),
                wall_ms=float(row[8]),
            ))
    return out


def spec_to_dict(spec: ExperimentSpec) -> dict:
    return {
        "preset": spec.preset,
        "n": spec.n,
        "r": spec.r,
        "p": spec.p,
        "distributions": [noise_to_dict(d) for d in spec.distributions],
        "sigma_grid": list(spec.sigma_grid),
        "tau_rule": tau_rule_to_dict(spec.tau_rule),
        "trials": spec.trials,
        "eta": spec.eta,
        "max_iters": spec.max_iters,
        "tol": spec.tol,
        "master_seed": spec.master_seed,
        "record_trajectories": spec.record_trajectories,
    }


def spec_from_dict(d: dict) -> ExperimentSpec:
    """Build a spec from a config dict; unset fields fall back to the preset."""
    preset = d.get("preset", "custom")
    base = presets().get(preset, ExperimentSpec(preset="custom"))
    kwargs = {}
    for key in ("n", "r", "trials", "max_iters", "master_seed"):
        if key in d:
            kwargs[key] = int(d[key])
    for key in ("p", "eta", "tol"):
        if key in d:
            kwargs[key] = float(d[key])
    if "distributions" in d:
        kwargs["distributions"] = tuple(noise_from_dict(x) for x in d["distributions"])
    if "sigma_grid" in d:
        kwargs["sigma_grid"] = tuple(float(s) for s in d["sigma_grid"])
    if "tau_rule" in d:
        kwargs["tau_rule"] = tau_rule_from_dict(d["tau_rule"])
    if "record_trajectories" in d:
        kwargs["record_trajectories"] = bool(d["record_trajectories"])
    return replace(base, **kwargs)


def emit_json(spec: ExperimentSpec, records: list[TrialRecord], path) -> None:
    """Spec plus records, mirroring the CSV content."""
    payload = {
        "spec": spec_to_dict(spec),
        "records": [
            {
                "preset": r.preset, "distribution": r.distribution,
                "sigma": r.sigma, "tau": r.tau, "trial": r.trial,
                "seed": r.seed, "rel_error": r.rel_error,
                "iterations": r.iterations, "wall_ms": r.wall_ms,
                "trajectory": list(r.trajectory) if r.trajectory else None,
            }
            for r in records
        ],
    }
    try:
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, allow_nan=True)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write JSON to {path}: {exc}") from exc


def _log_grid(lo: float, hi: float, count: int) -> tuple[float, ...]:
    return tuple(float(v) for v in np.logspace(math.log10(lo), math.log10(hi), count))


def presets() -> dict[str, ExperimentSpec]:
    """Default desk-scale specs for the four figure campaigns."""
    sigma_sweep = (1e-6, 1e-5, 1e-4, 1e-3)
    fig12_dists = (GaussianNoise(sigma=0.0), StudentTNoise(nu=3.0, sigma=0.0),
                   TrinomialNoise(delta=0.01, sigma=0.0))
    fig34_dists = (AsymTwoPointNoise(delta=1e-4, sigma=0.0),
                   StudentTNoise(nu=2.1, sigma=0.0),
                   GaussianNoise(sigma=0.0))
    return {
        "fig1_convergence": ExperimentSpec(
            preset="fig1_convergence", distributions=fig12_dists,
            sigma_grid=sigma_sweep, trials=1, max_iters=500, tol=0.0,
            record_trajectories=True,
        ),
        "fig2_sigma_sweep": ExperimentSpec(
            preset="fig2_sigma_sweep", distributions=fig12_dists,
            sigma_grid=sigma_sweep, trials=10,
        ),
        "fig3_tau_sweep": ExperimentSpec(
            preset="fig3_tau_sweep", distributions=fig34_dists,
            sigma_grid=(1e-3,), tau_rule=ExplicitTauGrid(_log_grid(1e-5, 1e2, 13)),
            trials=10,
        ),
        "fig4_ls_ratio": ExperimentSpec(
            preset="fig4_ls_ratio", distributions=fig34_dists,
            sigma_grid=sigma_sweep, tau_rule=ExplicitTauGrid(_log_grid(1e-4, 1e-1, 7)),
            trials=10,
        ),
    }

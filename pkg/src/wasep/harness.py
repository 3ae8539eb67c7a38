"""Ensemble orchestration, streaming estimators, and the statistical tests
used by the verification suites.

Replicas are embarrassingly parallel; each one derives its own generator
from (master seed, replica index), so results are independent of worker
scheduling, and the reducer consumes them in index order to keep every
summary byte-reproducible.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .kmc import EventSchedule, measure, run_replica
from .model import ModelSpec
from .observables import ObservablePlan

__all__ = [
    "EnsembleResult",
    "EnsembleSummary",
    "run_ensemble",
    "normality_report",
    "NormalityReport",
    "scaling_regression",
    "streaming_moments",
]

_WORKER_STATE: dict = {}


def streaming_moments(values: np.ndarray) -> dict:
    """One-pass (Welford) mean/variance/skewness/kurtosis accumulation."""
    n = 0
    mean = m2 = m3 = m4 = 0.0
    for x in np.asarray(values, dtype=float):
        n += 1
        d = x - mean
        d_n = d / n
        d_n2 = d_n * d_n
        term = d * d_n * (n - 1)
        m4 += term * d_n2 * (n * n - 3 * n + 3) + 6.0 * d_n2 * m2 - 4.0 * d_n * m3
        m3 += term * d_n * (n - 2) - 3.0 * d_n * m2
        m2 += term
        mean += d_n
    if n < 2:
        return {"count": n, "mean": mean, "variance": 0.0, "skewness": 0.0, "excess_kurtosis": 0.0}
    var = m2 / (n - 1)
    sd = np.sqrt(m2 / n)
    skew = (m3 / n) / sd**3 if sd > 0 else 0.0
    kurt = (m4 / n) / sd**4 - 3.0 if sd > 0 else 0.0
    return {"count": n, "mean": mean, "variance": var, "skewness": skew, "excess_kurtosis": kurt}


@dataclass
class EnsembleSummary:
    """Order-independent summary of the per-replica observables."""

    replicas: int
    observables: dict          # name -> moment dict (+ standard errors)
    site_means: dict           # key -> averaged site vector
    manifest: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "replicas": self.replicas,
            "observables": {
                k: {kk: float(vv) for kk, vv in v.items()} for k, v in sorted(self.observables.items())
            },
            "site_means": {k: [float(x) for x in v] for k, v in sorted(self.site_means.items())},
            "manifest": self.manifest,
        }


@dataclass
class EnsembleResult:
    summary: EnsembleSummary
    samples: dict              # name -> (M,) array of per-replica values

    def column(self, name: str) -> np.ndarray:
        return self.samples[name]


def _init_worker(spec, schedule, plan):
    _WORKER_STATE["spec"] = spec
    _WORKER_STATE["schedule"] = schedule
    _WORKER_STATE["plan"] = plan


def _run_chunk(args):
    master_seed, indices, dump_dir = args
    spec = _WORKER_STATE["spec"]
    schedule = _WORKER_STATE["schedule"]
    plan = _WORKER_STATE["plan"]
    out = []
    for idx in indices:
        seed = np.random.SeedSequence((master_seed, idx))
        try:
            record = run_replica(spec, seed, schedule, plan)
            row = measure(record, plan)
            if dump_dir is not None:
                from .output import dump_trajectory

                dump_trajectory(os.path.join(dump_dir, f"replica_{idx:06d}.csv"), record, plan)
            out.append((idx, row, None))
        except Exception as exc:  # propagate with the failing seed attached
            out.append((idx, None, f"replica {idx} (seed ({master_seed},{idx})): {exc}"))
    return out


def _aggregate(rows: list, replicas: int) -> EnsembleResult:
    """Reduce (index, measurement) pairs; order of arrival is irrelevant."""
    rows = sorted(rows, key=lambda r: r[0])
    scalar_names = [k for k, v in rows[0][1].items() if np.isscalar(v) or np.ndim(v) == 0]
    vector_names = [k for k in rows[0][1] if k not in scalar_names]
    samples = {k: np.empty(replicas) for k in scalar_names}
    vec_sums = {k: np.zeros_like(np.asarray(rows[0][1][k], dtype=float)) for k in vector_names}
    for idx, row, _ in rows:
        for k in scalar_names:
            samples[k][idx] = row[k]
        for k in vector_names:
            vec_sums[k] += row[k]
    observables = {}
    for k in scalar_names:
        mom = streaming_moments(samples[k])
        mom["std_err"] = float(np.sqrt(mom["variance"] / replicas))
        m = mom["count"]
        mom["skewness_z"] = mom["skewness"] / np.sqrt(6.0 / m)
        mom["kurtosis_z"] = mom["excess_kurtosis"] / np.sqrt(24.0 / m)
        observables[k] = mom
    site_means = {k: v / replicas for k, v in vec_sums.items()}
    summary = EnsembleSummary(replicas=replicas, observables=observables, site_means=site_means)
    return EnsembleResult(summary=summary, samples=samples)


def run_ensemble(
    spec: ModelSpec,
    replicas: int,
    master_seed: int,
    schedule: EventSchedule,
    plan: ObservablePlan,
    jobs: int | None = None,
    dump_dir: str | None = None,
    chunk: int = 32,
) -> EnsembleResult:
    """Run `replicas` independent trajectories and aggregate their observables.

    Deterministic for fixed (master_seed, replicas) regardless of `jobs`.
    A failed replica aborts the whole ensemble with its seed in the message.
    """
    if replicas < 2:
        raise ValueError("need at least 2 replicas")
    jobs = jobs or os.cpu_count() or 1
    indices = np.arange(replicas)
    chunks = [
        (master_seed, indices[i : i + chunk].tolist(), dump_dir)
        for i in range(0, replicas, chunk)
    ]
    rows: list = []
    if jobs <= 1:
        _init_worker(spec, schedule, plan)
        results = map(_run_chunk, chunks)
        for chunk_rows in results:
            rows.extend(chunk_rows)
    else:
        with ProcessPoolExecutor(
            max_workers=jobs, initializer=_init_worker, initargs=(spec, schedule, plan)
        ) as pool:
            for chunk_rows in pool.map(_run_chunk, chunks):
                rows.extend(chunk_rows)
    failures = [msg for _, _, msg in rows if msg is not None]
    if failures:
        raise RuntimeError("ensemble aborted: " + "; ".join(failures[:3]))
    return _aggregate(rows, replicas)


@dataclass
class NormalityReport:
    ks_statistic: float
    p_value: float
    skewness_z: float
    kurtosis_z: float
    n_samples: int
    n_bootstrap: int

    def as_dict(self) -> dict:
        return {
            "ks_statistic": self.ks_statistic,
            "p_value": self.p_value,
            "skewness_z": self.skewness_z,
            "kurtosis_z": self.kurtosis_z,
            "n_samples": self.n_samples,
            "n_bootstrap": self.n_bootstrap,
        }


def normality_report(samples, n_bootstrap: int = 1000, seed: int = 0) -> NormalityReport:
    """Goodness-of-fit of a fitted normal, with a parametric bootstrap p-value.

    The Kolmogorov-Smirnov statistic is computed against N(mean, var) with
    both parameters estimated, so the null distribution is simulated: each
    bootstrap resample is standard normal, refitted the same way.  Moment
    z-scores use the asymptotic null variances 6/M and 24/M.
    """
    x = np.asarray(samples, dtype=float)
    if x.size < 500:
        raise ValueError(f"need at least 500 samples for the normality report, got {x.size}")
    sd = x.std(ddof=1)
    if sd <= 0:
        raise ValueError("degenerate sample variance")
    d_obs = stats.kstest((x - x.mean()) / sd, "norm").statistic
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    count = 0
    for _ in range(n_bootstrap):
        y = rng.standard_normal(x.size)
        d = stats.kstest((y - y.mean()) / y.std(ddof=1), "norm").statistic
        if d >= d_obs:
            count += 1
    p = (1.0 + count) / (n_bootstrap + 1.0)
    mom = streaming_moments(x)
    return NormalityReport(
        ks_statistic=float(d_obs),
        p_value=float(p),
        skewness_z=float(mom["skewness"] / np.sqrt(6.0 / x.size)),
        kurtosis_z=float(mom["excess_kurtosis"] / np.sqrt(24.0 / x.size)),
        n_samples=int(x.size),
        n_bootstrap=n_bootstrap,
    )


def scaling_regression(
    xs,
    ys,
    replica_samples: list | None = None,
    n_bootstrap: int = 1000,
    seed: int = 0,
    moment: float | None = None,
) -> dict:
    """Least-squares slope of log y against log x with a bootstrap interval.

    When per-point replica samples are given (list of arrays), each
    bootstrap draw resamples replicas within every point and recomputes the
    point value as mean(|samples|^moment) (or the plain mean when `moment`
    is None) before refitting, so the interval reflects replica noise.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) < 3:
        raise ValueError("need at least 3 points for a scaling fit")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("scaling regression needs positive values")
    lx = np.log(xs)

    design = np.vstack([lx, np.ones_like(lx)]).T

    def fit(yv):
        coef, *_ = np.linalg.lstsq(design, np.log(np.maximum(yv, 1e-300)), rcond=None)
        return coef[0], coef[1]

    slope, intercept = fit(ys)
    lo = hi = slope
    if replica_samples is not None:
        if len(replica_samples) != len(xs):
            raise ValueError("one replica-sample array per point required")
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
        slopes = np.empty(n_bootstrap)
        for b in range(n_bootstrap):
            yb = np.empty(len(xs))
            for i, arr in enumerate(replica_samples):
                pick = rng.integers(0, len(arr), len(arr))
                vals = np.abs(arr[pick]) ** moment if moment is not None else arr[pick]
                yb[i] = vals.mean()
            slopes[b] = fit(yb)[0]
        lo, hi = np.percentile(slopes, [2.5, 97.5])
    return {
        "slope": float(slope),
        "intercept": float(intercept),
        "ci_low": float(lo),
        "ci_high": float(hi),
    }

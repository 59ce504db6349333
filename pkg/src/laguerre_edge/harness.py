"""Replica-parallel Monte Carlo of the standardised log-determinant."""
from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .ensemble import EnsembleParams, TridiagonalSample, sample_batch
from .errors import DegenerateDrawError, SuspiciousParametersError
from .geometry import EdgeGeometry, build_geometry
from .logdet import ORACLE_MAX_N, eigen_oracle, run_recursion_batch
from .theory import standardize

__all__ = [
    "WORKERS_ENV",
    "SimulationConfig",
    "SimulationBatch",
    "Summary",
    "run_batch",
    "ks_statistic",
    "summarize",
    "replica_seed",
    "write_jsonl",
    "read_jsonl",
    "write_csv",
    "write_summary",
    "dumps_record",
    "batch_summary",
]

WORKERS_ENV = "LAGUERRE_EDGE_WORKERS"
MAX_ATTEMPTS = 16
RESAMPLE_LIMIT = 1e-3


@dataclass(frozen=True)
class SimulationConfig:
    """``chunk_size`` fixes how replicas are grouped for vectorised evaluation.

    It is part of the configuration (not derived from ``workers``) so that
    results never depend on the degree of parallelism.
    """

    params: EnsembleParams
    replicas: int
    master_seed: int
    workers: int = 0
    run_oracle: bool = False
    output_path: str | None = None
    chunk_size: int = 64

    def __post_init__(self):
        if self.replicas < 1:
            raise ValueError("replicas must be at least 1")
        if self.run_oracle and self.params.n > ORACLE_MAX_N:
            raise ValueError(f"run_oracle requires n <= {ORACLE_MAX_N}")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be positive")


@dataclass(frozen=True, eq=False)
class SimulationBatch:
    z: np.ndarray
    log_abs_calD: np.ndarray
    max_abs_r: np.ndarray
    attempts: np.ndarray
    seeds: np.ndarray
    mean: float
    variance: float
    skewness: float
    ks_stat: float
    resample_count: int
    wall_time: float
    oracle: np.ndarray | None = None
    master_seed: int = 0
    params: EnsembleParams | None = field(default=None, repr=False)


def replica_seed(master_seed: int, replica_index: int, attempt: int = 0) -> int:
    """64-bit digest of a replica's stream, recorded for provenance."""
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(replica_index), int(attempt)))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


@dataclass
class Summary:
    """Mergeable first three central moments (Chan/Pebay updates)."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0
    m3: float = 0.0

    @classmethod
    def from_values(cls, values) -> "Summary":
        x = np.asarray(values, dtype=float).ravel()
        if x.size == 0:
            return cls()
        mu = float(np.mean(x))
        dev = x - mu
        # second pass corrects the rounding error left in the mean
        mu += float(np.mean(dev))
        dev = x - mu
        return cls(int(x.size), mu, float(np.sum(dev * dev)), float(np.sum(dev ** 3)))

    def merge(self, other: "Summary") -> "Summary":
        if self.count == 0:
            return Summary(other.count, other.mean, other.m2, other.m3)
        if other.count == 0:
            return Summary(self.count, self.mean, self.m2, self.m3)
        na, nb = self.count, other.count
        n = na + nb
        delta = other.mean - self.mean
        mean = self.mean + delta * nb / n
        m2 = self.m2 + other.m2 + delta * delta * na * nb / n
        m3 = (self.m3 + other.m3 + delta ** 3 * na * nb * (na - nb) / (n * n)
              + 3.0 * delta * (na * other.m2 - nb * self.m2) / n)
        return Summary(n, mean, m2, m3)

    @property
    def variance(self) -> float:
        return self.m2 / (self.count - 1) if self.count > 1 else float("nan")

    @property
    def skewness(self) -> float:
        if self.count < 2 or self.m2 == 0:
            return 0.0 if self.count >= 2 else float("nan")
        return math.sqrt(self.count) * self.m3 / self.m2 ** 1.5

    def to_dict(self) -> dict:
        return {"count": self.count, "mean": self.mean, "variance": self.variance, "skewness": self.skewness}


def ks_statistic(samples) -> float:
    """Kolmogorov-Smirnov distance between the sample and N(0, 1)."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise ValueError("ks_statistic needs at least one sample")
    cdf = ndtr(x)
    upper = np.arange(1, n + 1) / n - cdf
    lower = cdf - np.arange(n) / n
    return float(max(upper.max(), lower.max()))


def summarize(batch_or_values, quantiles=(0.05, 0.25, 0.5, 0.75, 0.95)) -> dict:
    z = batch_or_values.z if isinstance(batch_or_values, SimulationBatch) else batch_or_values
    z = np.asarray(z, dtype=float)
    out = Summary.from_values(z).to_dict()
    out["quantiles"] = {str(q): float(np.quantile(z, q)) for q in quantiles}
    out["ks_stat"] = ks_statistic(z)
    return out


# ---------------------------------------------------------------- workers

_GEOMETRY: EdgeGeometry | None = None


def _init_worker(geometry):
    global _GEOMETRY
    _GEOMETRY = geometry


def _run_chunk(master_seed, indices, run_oracle, geometry=None):
    geometry = geometry if geometry is not None else _GEOMETRY
    params = geometry.params
    a_sq, b_sq = sample_batch(params, master_seed, indices)
    res = run_recursion_batch(a_sq, b_sq, geometry)
    cal = res.log_abs_calD.copy()
    max_r = res.max_abs_r.copy()
    attempts = np.zeros(len(indices), dtype=np.int64)
    for row in np.flatnonzero(res.failed_at):
        for attempt in range(1, MAX_ATTEMPTS + 1):
            a1, b1 = sample_batch(params, master_seed, [indices[row]], attempt=attempt)
            retry = run_recursion_batch(a1, b1, geometry)
            if retry.failed_at[0] == 0:
                a_sq[row], b_sq[row] = a1[0], b1[0]
                cal[row], max_r[row] = retry.log_abs_calD[0], retry.max_abs_r[0]
                attempts[row] = attempt
                break
        else:
            raise DegenerateDrawError(f"replica {indices[row]} failed {MAX_ATTEMPTS} resampling attempts")
    oracle = None
    if run_oracle:
        oracle = np.array([
            eigen_oracle(TridiagonalSample(a_sq[r], b_sq[r], params.m), params) for r in range(len(indices))
        ]) - params.n * math.log(params.m)
    return cal, max_r, attempts, oracle


def _resolve_workers(workers: int) -> int:
    if workers and workers > 0:
        return workers
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_batch(config: SimulationConfig, progress=None, geometry: EdgeGeometry | None = None) -> SimulationBatch:
    """Simulate ``config.replicas`` replicas and standardise each statistic.

    ``progress(done, total)`` is called after each finished chunk.
    """
    start = time.perf_counter()
    params = config.params
    geometry = geometry if geometry is not None else build_geometry(params)
    indices = list(range(config.replicas))
    chunks = [indices[k:k + config.chunk_size] for k in range(0, len(indices), config.chunk_size)]
    workers = min(_resolve_workers(config.workers), len(chunks))

    results = []
    if workers == 1:
        for ch in chunks:
            results.append(_run_chunk(config.master_seed, ch, config.run_oracle, geometry))
            if progress:
                progress(sum(len(c) for c in chunks[:len(results)]), config.replicas)
    else:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(geometry,)) as pool:
            futures = [pool.submit(_run_chunk, config.master_seed, ch, config.run_oracle) for ch in chunks]
            for k, fut in enumerate(futures):
                results.append(fut.result())
                if progress:
                    progress(sum(len(c) for c in chunks[:k + 1]), config.replicas)

    cal = np.concatenate([r[0] for r in results])
    max_r = np.concatenate([r[1] for r in results])
    attempts = np.concatenate([r[2] for r in results])
    oracle = np.concatenate([r[3] for r in results]) if config.run_oracle else None
    resampled = int(np.count_nonzero(attempts))
    if resampled > RESAMPLE_LIMIT * config.replicas:
        raise SuspiciousParametersError(
            f"{resampled} of {config.replicas} replicas needed resampling; check the parameters"
        )
    z = np.asarray(standardize(cal, params), dtype=float).reshape(-1)
    seeds = np.array([replica_seed(config.master_seed, i, int(a)) for i, a in zip(indices, attempts)],
                     dtype=np.uint64)
    stats = Summary.from_values(z)
    batch = SimulationBatch(
        z=z, log_abs_calD=cal, max_abs_r=max_r, attempts=attempts, seeds=seeds,
        mean=stats.mean, variance=stats.variance, skewness=stats.skewness,
        ks_stat=ks_statistic(z), resample_count=resampled,
        wall_time=time.perf_counter() - start, oracle=oracle,
        master_seed=int(config.master_seed), params=params,
    )
    if config.output_path:
        write_jsonl(batch, config.output_path)
        write_summary(batch, _summary_path(config.output_path))
    return batch


# ------------------------------------------------------------ persistence

def _num(x) -> str:
    x = float(x)
    if not math.isfinite(x):
        return json.dumps(None)
    return format(x, ".17g")


def dumps_record(obj) -> str:
    """JSON text with every float written to 17 significant digits.

    Non-finite floats become ``null``.  Handles nested dicts, lists, tuples
    and numpy scalars/arrays.
    """
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {dumps_record(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(dumps_record(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _records(batch: SimulationBatch):
    for i in range(batch.z.size):
        rec = {
            "replica": i,
            "seed": int(batch.seeds[i]),
            "attempt": int(batch.attempts[i]),
            "z": float(batch.z[i]),
            "log_abs_calD": float(batch.log_abs_calD[i]),
            "max_abs_r": float(batch.max_abs_r[i]),
        }
        if batch.oracle is not None:
            rec["oracle_log_abs_calD"] = float(batch.oracle[i])
        yield rec


def write_jsonl(batch: SimulationBatch, path_or_stream) -> None:
    """One JSON record per replica."""
    if hasattr(path_or_stream, "write"):
        for rec in _records(batch):
            path_or_stream.write(dumps_record(rec) + "\n")
        return
    with open(path_or_stream, "w", encoding="utf-8") as fh:
        write_jsonl(batch, fh)


def read_jsonl(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_csv(batch: SimulationBatch, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        recs = list(_records(batch))
        writer = csv.DictWriter(fh, fieldnames=list(recs[0].keys()), lineterminator="\n")
        writer.writeheader()
        for rec in recs:
            writer.writerow({k: (_num(v) if isinstance(v, float) else v) for k, v in rec.items()})


def batch_summary(batch: SimulationBatch) -> dict:
    out = summarize(batch)
    out.update({
        "replicas": int(batch.z.size),
        "master_seed": batch.master_seed,
        "resample_count": batch.resample_count,
        "wall_time": batch.wall_time,
    })
    if batch.params is not None:
        out["params"] = batch.params.to_dict()
    return out


def write_summary(batch: SimulationBatch, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_record(batch_summary(batch)) + "\n")


def _summary_path(path: str) -> str:
    root, _ = os.path.splitext(path)
    return f"{root}.summary.json"

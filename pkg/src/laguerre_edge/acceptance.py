"""Acceptance suite: nine end-to-end checks with auditable tolerances.

Tolerances and grid parameters live in ``tolerances.json`` next to this
module; :func:`load_manifest` accepts an alternate file.
"""
from __future__ import annotations

import io
import json
import math
import time
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .diagnostics import SubGammaParams, a0_sum, noise_sampler, subgamma_params, tail_check, variance_sum
from .ensemble import TridiagonalSample, sample_batch, sample_bidiagonal
from .errors import LaguerreEdgeError
from .geometry import build_geometry, edge_params
from .harness import SimulationConfig, run_batch, write_jsonl
from .logdet import eigen_oracle, eigenvalues_scaled, run_recursion, run_recursion_batch
from .theory import clt_constants, mp_cdf

__all__ = ["CriterionResult", "CRITERIA", "load_manifest", "run_criterion", "run_all", "format_line"]


@dataclass
class CriterionResult:
    number: int
    key: str
    title: str
    passed: bool
    details: dict = field(default_factory=dict)
    runtime: float = 0.0
    budget: float | None = None

    def to_dict(self) -> dict:
        return {
            "criterion": self.number, "key": self.key, "title": self.title, "pass": self.passed,
            "runtime_s": self.runtime, "budget_s": self.budget, "details": self.details,
        }


def load_manifest(path=None) -> dict:
    if path is None:
        text = resources.files(__package__).joinpath("tolerances.json").read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return json.loads(text)


def _recursion_with_retry(params, geometry, seed, replica):
    for attempt in range(16):
        sample = sample_bidiagonal(params, seed, replica, attempt)
        try:
            return sample, run_recursion(sample, geometry)
        except LaguerreEdgeError:
            continue
    raise LaguerreEdgeError(f"replica {replica} kept failing the guard")


def oracle_equivalence(cfg: dict) -> tuple[bool, dict]:
    worst = 0.0
    worst_at = None
    count = 0
    for n in cfg["n"]:
        for lam in cfg["lambda"]:
            for alpha in cfg["alpha"]:
                params = edge_params(n, lam, alpha)
                geometry = build_geometry(params)
                reps = range(cfg["replicas"])
                a_sq, b_sq = sample_batch(params, cfg["seed"], reps)
                res = run_recursion_batch(a_sq, b_sq, geometry)
                for rep in reps:
                    if res.failed_at[rep]:
                        sample, trace = _recursion_with_retry(params, geometry, cfg["seed"], rep)
                        log_d = trace.log_abs_D
                    else:
                        sample = TridiagonalSample(a_sq[rep], b_sq[rep], params.m)
                        log_d = float(res.log_abs_D[rep])
                    oracle = eigen_oracle(sample, params)
                    rel = abs(log_d - oracle) / abs(log_d)
                    count += 1
                    if rel > worst:
                        worst, worst_at = rel, {"n": n, "lambda": lam, "alpha": alpha, "replica": rep}
    return worst < cfg["rel_tol"], {"instances": count, "max_rel_diff": worst, "worst_at": worst_at}


def geometry_identities(cfg: dict) -> tuple[bool, dict]:
    ok = True
    details = {}
    for lam in cfg["lambda"]:
        params = edge_params(cfg["n"], lam, cfg["alpha"])
        geo = build_geometry(params)
        n, m = params.n, params.m
        i = np.arange(1, n + 1, dtype=float)
        rp, rm = geo.rho_plus[1:], geo.rho_minus[1:]
        target_prod = (m - n + i - 1.0) * (i - 1.0)
        prod = rp * rm
        with np.errstate(invalid="ignore", divide="ignore"):
            rel_prod = np.where(prod == 0, np.abs(target_prod), np.abs(prod - target_prod) / prod)
        target_sum = params.gamma * m - (m - n + 2.0 * i - 1.0)
        rel_sum = np.abs(rp + rm - target_sum) / target_sum
        om = geo.omega[2:]
        monotone = bool(np.all(np.diff(om) > 0))
        in_unit = bool(np.all((om > 0) & (om < 1)))
        k = np.arange(3, n + 1)
        g_bound = (1.0 + params.sigma_n ** -1.5) / (1.0 - geo.omega[k])
        g_ok = bool(np.all(geo.g[k] < g_bound))
        max_prod, max_sum = float(rel_prod.max()), float(rel_sum.max())
        passed = max_prod < cfg["rel_tol"] and max_sum < cfg["rel_tol"] and monotone and in_unit and g_ok
        ok &= passed
        details[f"lambda={lam}"] = {
            "max_rel_product": max_prod, "max_rel_sum": max_sum, "omega_monotone": monotone,
            "omega_in_unit_interval": in_unit, "g_bound_holds": g_ok,
            "max_g_over_bound": float(np.max(geo.g[k] / g_bound)),
        }
    return ok, details


def clt_desk_scale(cfg: dict) -> tuple[bool, dict]:
    ok = True
    details = {}
    for alpha in cfg["alpha"]:
        params = edge_params(cfg["n"], cfg["lambda"], alpha)
        batch = run_batch(SimulationConfig(params, cfg["replicas"], cfg["seed"], workers=0))
        passed = (abs(batch.mean) <= cfg["mean_abs_max"]
                  and cfg["variance_min"] <= batch.variance <= cfg["variance_max"]
                  and batch.ks_stat < cfg["ks_max"])
        ok &= passed
        details[f"alpha={alpha}"] = {
            "mean": batch.mean, "variance": batch.variance, "skewness": batch.skewness,
            "ks_stat": batch.ks_stat, "resample_count": batch.resample_count, "pass": passed,
        }
    return ok, details


def variance_lemma(cfg: dict) -> tuple[bool, dict]:
    ok = True
    details = {}
    for lam in cfg["lambda"]:
        ratios = {}
        for n in (cfg["n_small"], cfg["n_large"]):
            params = edge_params(n, lam, cfg["alpha"])
            pred = cfg["alpha"] / 3.0 * math.log(n)
            ratios[n] = variance_sum(build_geometry(params)) / pred
        small, large = ratios[cfg["n_small"]], ratios[cfg["n_large"]]
        passed = cfg["ratio_min"] <= large <= cfg["ratio_max"] and abs(large - 1) < abs(small - 1)
        ok &= passed
        details[f"lambda={lam}"] = {"ratio_small_n": small, "ratio_large_n": large, "pass": passed}
    return ok, details


def a0_lemma(cfg: dict) -> tuple[bool, dict]:
    ok = True
    details = {}
    for lam in cfg["lambda"]:
        ratios = {}
        const = None
        for n in (cfg["n_small"], cfg["n_large"]):
            params = edge_params(n, lam, cfg["alpha"])
            const = clt_constants(params).a0_constant
            ratios[n] = a0_sum(build_geometry(params)) / math.log(n)
        small, large = ratios[cfg["n_small"]], ratios[cfg["n_large"]]
        passed = abs(large - const) <= cfg["rel_tol"] * const and abs(large - const) < abs(small - const)
        ok &= passed
        details[f"lambda={lam}"] = {
            "constant": const, "ratio_small_n": small, "ratio_large_n": large,
            "rel_error_large_n": abs(large - const) / const, "pass": passed,
        }
    return ok, details


def _median_scaled_max_r(n, cfg):
    params = edge_params(n, cfg["lambda"], cfg["alpha"])
    geometry = build_geometry(params)
    a_sq, b_sq = sample_batch(params, cfg["seed"], range(cfg["replicas"]))
    res = run_recursion_batch(a_sq, b_sq, geometry)
    good = res.failed_at == 0
    return float(np.median(res.max_abs_r[good]) * n ** (1.0 / 3.0)), int(np.count_nonzero(~good))


def uniform_r_bound(cfg: dict) -> tuple[bool, dict]:
    small, fail_s = _median_scaled_max_r(cfg["n_small"], cfg)
    large, fail_l = _median_scaled_max_r(cfg["n_large"], cfg)
    passed = large < small and large < cfg["bound"]
    return passed, {"median_small_n": small, "median_large_n": large, "guard_failures": fail_s + fail_l}


def mp_bulk(cfg: dict) -> tuple[bool, dict]:
    params = edge_params(cfg["n"], cfg["lambda"], cfg["alpha"])
    eig = eigenvalues_scaled(sample_bidiagonal(params, cfg["seed"], 0), params)
    cdf = mp_cdf(eig, params.lam)
    k = eig.size
    ks = float(max(np.max(np.arange(1, k + 1) / k - cdf), np.max(cdf - np.arange(k) / k)))
    return ks < cfg["ks_max"], {"ks_stat": ks, "largest_eigenvalue": float(eig[-1]), "d_plus": params.d_plus}


def subgamma_tails(cfg: dict) -> tuple[bool, dict]:
    rng = np.random.default_rng(cfg["seed"])
    size = int(cfg["draws"])
    checks = {}
    draws = rng.chisquare(4, size) - 4.0
    for t in cfg["t"]:
        res = tail_check(SubGammaParams(8.0, 2.0, "x_i"), None, t, size, draws=draws)
        checks[f"chi2(4)-4,t={t}"] = res
    params = edge_params(cfg["n"], cfg["lambda"], cfg["alpha"])
    geometry = build_geometry(params)
    for i in cfg["indices"]:
        for target in ("alpha_i", "x_i"):
            sampler = noise_sampler(i, geometry, target)
            sg = subgamma_params(i, geometry, target)
            d = sampler(rng, size)
            for t in cfg["t"]:
                checks[f"{target},i={i},t={t}"] = tail_check(sg, sampler, t, size, draws=d)
    passed = all(c.passed for c in checks.values())
    return passed, {
        key: {"estimate": c.estimate, "bound": c.bound, "std_err": c.std_err, "pass": c.passed}
        for key, c in checks.items()
    }


def determinism(cfg: dict) -> tuple[bool, dict]:
    params = edge_params(cfg["n"], cfg["lambda"], cfg["alpha"])
    geometry = build_geometry(params)
    digests = {}
    blobs = []
    for workers in cfg["workers"]:
        buf = io.StringIO()
        batch = run_batch(SimulationConfig(params, cfg["replicas"], cfg["seed"], workers=workers),
                          geometry=geometry)
        write_jsonl(batch, buf)
        blob = buf.getvalue().encode()
        blobs.append(blob)
        digests[str(workers)] = len(blob)
    same = all(b == blobs[0] for b in blobs[1:])
    return same, {"bytes_per_worker_count": digests, "identical": same}


CRITERIA = [
    (1, "oracle_equivalence", "recursion agrees with the eigenvalue oracle", oracle_equivalence),
    (2, "geometry_identities", "characteristic-root identities and g bound", geometry_identities),
    (3, "clt_desk_scale", "standardised statistic is close to N(0, 1)", clt_desk_scale),
    (4, "variance_lemma", "variance sum tracks (alpha/3) log n", variance_lemma),
    (5, "a0_lemma", "A0 sum tracks its log n constant", a0_lemma),
    (6, "uniform_r_bound", "max |R_i| n^(1/3) shrinks", uniform_r_bound),
    (7, "mp_bulk", "spectrum follows Marchenko-Pastur", mp_bulk),
    (8, "subgamma_tails", "sub-gamma tail bounds hold", subgamma_tails),
    (9, "determinism", "JSONL is identical across worker counts", determinism),
]


def run_criterion(number: int, manifest: dict | None = None) -> CriterionResult:
    manifest = manifest if manifest is not None else load_manifest()
    num, key, title, func = next(c for c in CRITERIA if c[0] == number)
    cfg = manifest[key]
    start = time.perf_counter()
    passed, details = func(cfg)
    runtime = time.perf_counter() - start
    budget = cfg.get("runtime_s")
    if budget is not None and runtime > budget:
        details["runtime_exceeded"] = True
        passed = False
    return CriterionResult(num, key, title, bool(passed), details, runtime, budget)


def format_line(result: CriterionResult) -> str:
    status = "PASS" if result.passed else "FAIL"
    return f"[{status}] criterion {result.number} {result.key}: {result.title} ({result.runtime:.2f} s)"


def run_all(manifest: dict | None = None, only=None, progress=None) -> list[CriterionResult]:
    manifest = manifest if manifest is not None else load_manifest()
    out = []
    for num, *_ in CRITERIA:
        if only and num not in only:
            continue
        res = run_criterion(num, manifest)
        if progress:
            progress(res)
        out.append(res)
    return out

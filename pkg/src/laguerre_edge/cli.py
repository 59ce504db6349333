"""Command-line interface: ``laguerre-edge <subcommand> [flags]``.

Exit codes: 0 success, 1 usage error, 2 numerical or guard error,
3 acceptance failure.  Data goes to standard output (or ``--output``);
progress and diagnostics go to standard error.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys

import numpy as np

from . import acceptance
from .diagnostics import (
    a0_sum,
    build_decomposition_batch,
    lyapunov_ratio,
    noise_sampler,
    variance_sum,
)
from .ensemble import build_tridiagonal, make_params, sample_batch, sample_bidiagonal
from .errors import InvalidParameterError, LaguerreEdgeError
from .geometry import build_geometry, edge_params, geometry_csv
from .harness import (
    SimulationConfig,
    batch_summary,
    dumps_record,
    run_batch,
    write_csv,
    write_jsonl,
    write_summary,
)
from .logdet import eigen_oracle, eigenvalues_scaled, run_recursion, run_recursion_batch
from .theory import centering, clt_constants, standardize

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_ACCEPTANCE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _err(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _add_ensemble(p, need_n=True):
    p.add_argument("--n", type=int, required=need_n, help="matrix dimension")
    p.add_argument("--lambda", dest="lam", type=float, required=need_n, help="aspect ratio n/m in (0, 1]")
    p.add_argument("--alpha", type=float, default=None, help="2/beta (default 1)")
    p.add_argument("--sigma", type=float, default=None, help="edge offset sigma_n (default (log n)^1.5)")


def _params(args):
    alpha = 1.0 if args.alpha is None else args.alpha
    return edge_params(args.n, args.lam, alpha, args.sigma)


def _emit(text: str, path=None) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


# ----------------------------------------------------------- subcommands

def cmd_constants(args):
    params = _params(args)
    out = clt_constants(params).to_dict()
    out["centering"] = centering(params)
    out["params"] = params.to_dict()
    _emit(dumps_record(out) + "\n", args.output)
    return EXIT_OK


def cmd_geometry(args):
    geometry = build_geometry(_params(args))
    if args.output:
        with open(args.output, "w", newline="", encoding="utf-8") as fh:
            geometry_csv(geometry, fh)
    else:
        geometry_csv(geometry, sys.stdout)
    return EXIT_OK


def cmd_sample(args):
    params = _params(args)
    sample = sample_bidiagonal(params, args.seed, args.replica, args.attempt)
    diag, off = build_tridiagonal(sample)
    eig = eigenvalues_scaled(sample, params) if args.eigenvalues else None
    buf = io.StringIO()
    cols = ["i", "a_sq", "b_sq", "diag", "offdiag"] + (["eigenvalue_scaled"] if eig is not None else [])
    buf.write(",".join(cols) + "\n")
    fmt = lambda v: format(float(v), ".17g")
    for k in range(params.n):
        row = [str(k + 1), fmt(sample.a_sq[k])]
        row += [fmt(sample.b_sq[k]), fmt(diag[k]), fmt(off[k])] if k < params.n - 1 else ["", fmt(diag[k]), ""]
        if eig is not None:
            row.append(fmt(eig[k]))
        buf.write(",".join(row) + "\n")
    _emit(buf.getvalue(), args.output)
    return EXIT_OK


def cmd_logdet(args):
    params = _params(args)
    geometry = build_geometry(params)
    sample = sample_bidiagonal(params, args.seed, args.replica, args.attempt)
    trace = run_recursion(sample, geometry)
    out = {
        "n": params.n, "m": params.m, "lambda": params.lam, "alpha": params.alpha, "sigma_n": params.sigma_n,
        "seed": args.seed, "replica": args.replica, "attempt": args.attempt,
        "log_abs_calD": trace.log_abs_calD,
        "log_abs_D": trace.log_abs_D,
        "sign": trace.sign_E,
        "max_abs_r": trace.max_abs_r,
        "z": standardize(trace.log_abs_calD, params),
    }
    if args.oracle:
        oracle = eigen_oracle(sample, params) - params.n * math.log(params.m)
        out["oracle_value"] = oracle
        out["oracle_rel_diff"] = abs(trace.log_abs_calD - oracle) / abs(trace.log_abs_calD)
    _emit(dumps_record(out) + "\n", args.output)
    return EXIT_OK


def _load_config(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def cmd_simulate(args):
    if args.config:
        cfg = _load_config(args.config)
        for key, attr in (("n", "n"), ("lambda", "lam"), ("alpha", "alpha"), ("sigma", "sigma"),
                          ("replicas", "replicas"), ("seed", "seed"), ("workers", "workers"),
                          ("chunk_size", "chunk_size"), ("oracle", "oracle")):
            if getattr(args, attr) in (None, False) and key in cfg:
                setattr(args, attr, cfg[key])
    if args.n is None or args.lam is None:
        raise UsageError("simulate: --n and --lambda are required (flag or config file)")
    params = _params(args)
    config = SimulationConfig(
        params=params,
        replicas=args.replicas if args.replicas is not None else 1000,
        master_seed=args.seed if args.seed is not None else 0,
        workers=args.workers or 0,
        run_oracle=bool(args.oracle),
        chunk_size=args.chunk_size or 64,
    )

    def progress(done, total):
        if not args.quiet:
            _err(f"simulate: {done}/{total} replicas")

    batch = run_batch(config, progress=progress)
    if args.output:
        write_jsonl(batch, args.output)
    else:
        write_jsonl(batch, sys.stdout)
    if args.summary:
        write_summary(batch, args.summary)
    if args.csv:
        write_csv(batch, args.csv)
    s = batch_summary(batch)
    _err(f"simulate: mean={s['mean']:.4f} variance={s['variance']:.4f} ks={s['ks_stat']:.4f} "
         f"resampled={batch.resample_count} wall={batch.wall_time:.2f}s")
    return EXIT_OK


def lemma_report(params, replicas: int, seed: int, tolerances: dict) -> list[dict]:
    """Ratio-to-prediction checks of the intermediate lemmas at one ``params``."""
    geometry = build_geometry(params)
    n, alpha = params.n, params.alpha
    log_n = math.log(n)
    k = clt_constants(params)
    report = []

    def two_sided(lemma_id, predicted, observed):
        ratio = observed / predicted
        tol = tolerances[lemma_id]
        report.append({"lemma_id": lemma_id, "predicted": predicted, "observed": observed, "ratio": ratio,
                       "tolerance": tol, "rule": "abs(ratio - 1) <= tolerance", "pass": abs(ratio - 1) <= tol})

    def upper(lemma_id, predicted, observed):
        ratio = observed / predicted
        tol = tolerances[lemma_id]
        report.append({"lemma_id": lemma_id, "predicted": predicted, "observed": observed, "ratio": ratio,
                       "tolerance": tol, "rule": "ratio < tolerance", "pass": ratio < tol})

    two_sided("variance_lemma", k.variance_constant * log_n, variance_sum(geometry))
    two_sided("a0_lemma", k.a0_constant * log_n, a0_sum(geometry))
    upper("lyapunov", n ** -0.25, lyapunov_ratio(geometry))

    if n >= 4:
        i = max(3, int(round(0.8 * n)))
        draws = noise_sampler(i, geometry, "x_i")(np.random.default_rng(seed), 100_000)
        two_sided("x_second_moment", float(geometry.expected_x_sq()[i]), float(np.mean(draws ** 2)))

    a_sq, b_sq = sample_batch(params, seed, range(replicas))
    rec = run_recursion_batch(a_sq, b_sq, geometry)
    good = rec.failed_at == 0
    _, b3 = build_decomposition_batch(a_sq[good], b_sq[good], geometry)
    two_sided("b3_lemma", k.b3_constant * log_n, float(np.mean(b3)))
    upper("uniform_r", n ** (-1.0 / 3.0), float(np.median(rec.max_abs_r[good])))
    for entry in report:
        entry["pass"] = bool(entry["pass"])
    return report


def cmd_diagnose(args):
    params = _params(args)
    manifest = acceptance.load_manifest(args.tolerance_manifest)
    report = lemma_report(params, args.replicas, args.seed, manifest["diagnose"])
    _emit(dumps_record(report) + "\n", args.output)
    for entry in report:
        _err(f"diagnose: {entry['lemma_id']}: ratio={entry['ratio']:.4f} "
             f"{'PASS' if entry['pass'] else 'FAIL'}")
    return EXIT_OK


def cmd_verify(args):
    manifest = acceptance.load_manifest(args.tolerance_manifest)
    results = acceptance.run_all(manifest, only=args.only, progress=lambda r: _err(acceptance.format_line(r)))
    _emit(dumps_record([r.to_dict() for r in results]) + "\n", args.output)
    return EXIT_OK if all(r.passed for r in results) else EXIT_ACCEPTANCE


# ----------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="laguerre-edge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("constants", help="print the centering constants as JSON")
    _add_ensemble(p)
    p.add_argument("--output")
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("geometry", help="dump the per-index geometry table as CSV")
    p.add_argument("action", nargs="?", choices=["dump"], default="dump")
    _add_ensemble(p)
    p.add_argument("--output")
    p.set_defaults(func=cmd_geometry)

    p = sub.add_parser("sample", help="draw one replica and print it as CSV")
    _add_ensemble(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--replica", type=int, default=0)
    p.add_argument("--attempt", type=int, default=0)
    p.add_argument("--eigenvalues", action="store_true", help="add the sorted eigenvalues of T/m")
    p.add_argument("--output")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("logdet", help="log-determinant of one replica as JSON")
    _add_ensemble(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--replica", type=int, default=0)
    p.add_argument("--attempt", type=int, default=0)
    p.add_argument("--oracle", action="store_true", help="also evaluate the eigenvalue oracle")
    p.add_argument("--output")
    p.set_defaults(func=cmd_logdet)

    p = sub.add_parser("simulate", help="run a batch of replicas (JSONL records)")
    _add_ensemble(p, need_n=False)
    p.add_argument("--config", help="JSON file with any of the flags below; flags take precedence")
    p.add_argument("--replicas", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, help="0 = $LAGUERRE_EDGE_WORKERS or all cores")
    p.add_argument("--chunk-size", dest="chunk_size", type=int)
    p.add_argument("--oracle", action="store_true")
    p.add_argument("--output", help="JSONL path (default standard output)")
    p.add_argument("--summary", help="summary JSON path")
    p.add_argument("--csv", help="also write records as CSV")
    p.add_argument("--quiet", action="store_true", help="suppress progress lines")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("diagnose", help="lemma report as JSON")
    _add_ensemble(p)
    p.add_argument("--replicas", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance-manifest", dest="tolerance_manifest")
    p.add_argument("--output")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("verify", help="run the acceptance suite (exit 3 on failure)")
    p.add_argument("--tolerance-manifest", dest="tolerance_manifest")
    p.add_argument("--only", type=int, nargs="+", help="criterion numbers to run")
    p.add_argument("--output")
    p.set_defaults(func=cmd_verify)
    return parser


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except BrokenPipeError:
        # downstream reader closed early, e.g. `| head`
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK
    except (UsageError, InvalidParameterError) as exc:
        _err(str(exc))
        return EXIT_USAGE
    except (LaguerreEdgeError, ArithmeticError, OSError) as exc:
        _err(f"laguerre-edge: {type(exc).__name__}: {exc}")
        return EXIT_NUMERIC
    except ValueError as exc:
        _err(f"laguerre-edge: {exc}")
        return EXIT_USAGE


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()

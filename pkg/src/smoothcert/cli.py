"""Command-line surface: certification workflows with machine-readable output.

Every command resolves its full configuration (flags, seed, tool version)
into a run manifest.  JSON reports embed the manifest next to the result
payload; CSV outputs written to a file get a sidecar ``<file>.manifest.json``.
Result payloads are byte-identical across reruns with an equal manifest
(wall-clock duration lives in the manifest, never in the payload).

Exit codes: 0 success/certified, 1 usage or I/O error, 2 abstain.  The
environment variable ``SMOOTHCERT_SEED`` supplies the default seed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np
from scipy.special import ndtri

from . import __version__
from .certify import (
    Abstain,
    Certificate,
    ProbBounds,
    certify_inverse_rayleigh,
    certify_rayleigh,
    log_space_radius,
)
from .distributions import (
    Kind,
    RayleighParams,
    SmoothingDistribution,
    inverse_rayleigh,
    rayleigh,
)
from .realistic import ErrorBudget, RealisticConfig, certify_realistic, estimate_conversion_error
from .runtime import (
    SmoothedClassifier,
    SmoothingConfig,
    empirical_sweep,
    load_classifier,
    smoothed_predict_certify,
)
from .transforms import TensorFormatError, read_tensor

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_ABSTAIN = 2

_SEED_ENV = "SMOOTHCERT_SEED"

# The reference grid of bound pairs emitted by the `table` command.
TABLE_BOUND_PAIRS = [
    (0.600, 0.400),
    (0.600, 0.200),
    (0.700, 0.300),
    (0.700, 0.100),
    (0.800, 0.200),
    (0.900, 0.100),
    (0.990, 0.010),
    (0.999, 0.001),
]

_DIST_CHOICES = ["rayleigh", "inv-rayleigh", "log-gaussian", "log-laplace", "log-uniform"]
_LOG_KINDS = {
    "log-gaussian": Kind.LOG_GAUSSIAN,
    "log-laplace": Kind.LOG_LAPLACE,
    "log-uniform": Kind.LOG_UNIFORM,
}


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad flags by default; this tool reserves 2 for abstain."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _resolve_seed(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get(_SEED_ENV)
    return int(env) if env else 0


def _manifest(command: str, config: dict, seed: int | None, started: float) -> dict:
    return {
        "command": command,
        "version": __version__,
        "seed": seed,
        "config": config,
        "duration_s": round(time.perf_counter() - started, 6),
    }


def _certificate_json(cert: Certificate) -> dict:
    return {
        "gamma1": cert.gamma1,
        "gamma2": None if cert.unbounded else cert.gamma2,
        "unbounded": cert.unbounded,
        "method": cert.method.value,
        "distribution": cert.distribution,
        "confidence": cert.confidence,
    }


def _emit_json(report: dict, out: str | None) -> None:
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_csv(header: list[str], rows: list[list], out: str | None, manifest: dict) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    if out:
        Path(out).write_text(buffer.getvalue())
        Path(f"{out}.manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    else:
        sys.stdout.write(buffer.getvalue())


def _smoothing_distribution(name: str, scale: float | None) -> SmoothingDistribution:
    if name == "rayleigh":
        return rayleigh(RayleighParams(scale) if scale else None)
    if name == "inv-rayleigh":
        return inverse_rayleigh(RayleighParams(scale) if scale else None)
    kind = _LOG_KINDS[name]
    return SmoothingDistribution(kind, scale if scale else 1.0)


# --- table ------------------------------------------------------------------


def cmd_table(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    rows = []
    for pa, pb in TABLE_BOUND_PAIRS:
        cert = certify_rayleigh(ProbBounds(pa, pb))
        assert isinstance(cert, Certificate)
        rows.append(
            [
                f"{pa:.3f}",
                f"{pb:.3f}",
                f"{cert.gamma1:.2f}",
                f"{cert.gamma2:.2f}",
                repr(cert.gamma1),
                repr(cert.gamma2),
            ]
        )
    manifest = _manifest("table", {"out": args.out}, None, started)
    _emit_csv(
        ["pa", "pb", "gamma1", "gamma2", "gamma1_full", "gamma2_full"], rows, args.out, manifest
    )
    return EXIT_OK


# --- cert -------------------------------------------------------------------


def cmd_cert(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    if not 0.0 < args.pa < 1.0:
        raise ValueError(f"--pa must lie in (0, 1), got {args.pa}")
    if args.trivial_pb:
        pb = 1.0 - args.pa
    elif args.pb is not None:
        pb = args.pb
        if pb >= args.pa:
            raise ValueError(f"--pb {pb} must be below --pa {args.pa}")
    else:
        raise ValueError("either --pb or --trivial-pb is required")

    if args.dist in _LOG_KINDS:
        outcome = log_space_radius(_LOG_KINDS[args.dist], args.scale or 1.0, args.pa, pb)
    else:
        bounds = ProbBounds(args.pa, pb)
        if args.dist == "inv-rayleigh":
            outcome = certify_inverse_rayleigh(bounds)
        else:
            outcome = certify_rayleigh(bounds)

    config = {
        "pa": args.pa,
        "pb": pb,
        "trivial_pb": bool(args.trivial_pb),
        "dist": args.dist,
        "scale": args.scale,
    }
    manifest = _manifest("cert", config, None, started)
    if isinstance(outcome, Abstain):
        if args.json:
            _emit_json({"manifest": manifest, "result": {"abstain": True, "reason": outcome.reason}}, None)
        else:
            print(f"abstain: {outcome.reason}")
        return EXIT_ABSTAIN
    if args.json:
        _emit_json({"manifest": manifest, "result": {"abstain": False, "certificate": _certificate_json(outcome)}}, None)
    else:
        gamma2 = "inf" if outcome.unbounded else f"{outcome.gamma2:.4f}"
        print(f"gamma1 {outcome.gamma1:.4f}")
        print(f"gamma2 {gamma2}")
        print(f"method {outcome.method.value}")
        print(f"distribution {outcome.distribution}")
        print(f"confidence {outcome.confidence:g}")
    return EXIT_OK


# --- smooth -----------------------------------------------------------------


def cmd_smooth(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    seed = _resolve_seed(args.seed)
    x = read_tensor(args.input)
    base = load_classifier(args.classifier)
    dist = _smoothing_distribution(args.dist, args.scale)
    cfg = SmoothingConfig(n=args.n, alpha=args.alpha, dist=dist, seed=seed, n0=args.n0)

    result = smoothed_predict_certify(base, x, cfg)
    payload: dict = {
        "classifier": base.descriptor,
        "distribution": dist.descriptor,
        "label": result.label,
        "abstained": result.abstained,
        "pa_lower": result.pa_lower,
        "counts": {"successes": result.counts.successes, "trials": result.counts.trials},
        "certificate": _certificate_json(result.certificate) if result.certificate else None,
        "sweep": None,
    }
    if args.sweep:
        handle = SmoothedClassifier(base, cfg)
        interval = empirical_sweep(handle.predict, x, args.step, args.gamma_max)
        payload["sweep"] = (
            {"empty": True, "left": None, "right": None}
            if interval is None
            else {"empty": False, "left": interval[0], "right": interval[1]}
        )

    config = {
        "input": str(args.input),
        "classifier": str(args.classifier),
        "n": args.n,
        "n0": args.n0,
        "alpha": args.alpha,
        "dist": args.dist,
        "scale": args.scale,
        "sweep": bool(args.sweep),
        "step": args.step,
        "gamma_max": args.gamma_max,
    }
    manifest = _manifest("smooth", config, seed, started)
    _emit_json({"manifest": manifest, "result": payload}, args.out)
    return EXIT_ABSTAIN if result.abstained else EXIT_OK


# --- realistic --------------------------------------------------------------


def cmd_realistic(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    budget = ErrorBudget.load(args.budget)
    cfg = RealisticConfig.load(args.config)
    x = read_tensor(args.input)
    base = load_classifier(args.classifier)
    if not budget.feasible:
        print(f"warning: rho={budget.rho} >= 1/2, certification will abstain", file=sys.stderr)

    result = certify_realistic(base, x, cfg, budget)
    payload = {
        "classifier": base.descriptor,
        "label": result.label,
        "abstained": result.abstained,
        "pa_lower": result.pa_lower,
        "adjusted": None
        if result.adjusted is None
        else {"pa_lower": result.adjusted.pa_lower, "pb_upper": result.adjusted.pb_upper},
        "counts": None
        if result.counts is None
        else {"successes": result.counts.successes, "trials": result.counts.trials},
        "certificate": _certificate_json(result.certificate) if result.certificate else None,
        "reason": result.reason,
        "budget": budget.to_json(),
    }
    config = {
        "budget": str(args.budget),
        "config": cfg.to_json(),
        "input": str(args.input),
        "classifier": str(args.classifier),
    }
    manifest = _manifest("realistic", config, cfg.seed, started)
    _emit_json({"manifest": manifest, "result": payload}, args.out)
    return EXIT_ABSTAIN if result.abstained else EXIT_OK


# --- estimate-error ---------------------------------------------------------


def cmd_estimate_error(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    seed = _resolve_seed(args.seed)
    dataset_dir = Path(args.dataset)
    if not dataset_dir.is_dir():
        raise OSError(f"dataset directory not found: {dataset_dir}")
    paths = sorted(dataset_dir.glob("*.mst1"))
    if not paths:
        raise OSError(f"no .mst1 tensors in {dataset_dir}")
    tensors = [read_tensor(p) for p in paths]

    E = estimate_conversion_error(
        tensors,
        (args.gamma_min, args.gamma_max),
        q_E=args.qe,
        alpha_E=args.alphae,
        grid_points=args.grid,
        seed=seed,
    )
    payload = {
        "E": E,
        "q_E": args.qe,
        "alpha_E": args.alphae,
        "gamma_interval": [args.gamma_min, args.gamma_max],
        "grid_points": args.grid,
        "num_tensors": len(tensors),
    }
    config = {
        "dataset": str(dataset_dir),
        "gamma_min": args.gamma_min,
        "gamma_max": args.gamma_max,
        "qe": args.qe,
        "alphae": args.alphae,
        "grid": args.grid,
    }
    manifest = _manifest("estimate-error", config, seed, started)
    _emit_json({"manifest": manifest, "result": payload}, args.out)
    return EXIT_OK


# --- compare ----------------------------------------------------------------


def _parse_pa_grid(spec: str) -> list[float]:
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError(f"--pa-grid range must be start:stop:count, got {spec!r}")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1:
            raise ValueError("--pa-grid count must be positive")
        return [float(v) for v in np.linspace(start, stop, count)]
    return [float(v) for v in spec.split(",") if v.strip()]


def cmd_compare(args: argparse.Namespace) -> int:
    """Per-distribution certified intervals over a pa grid (trivial runner-up).

    Besides the requested laws at the given scale, emits a
    ``log-gaussian-matched`` row whose scale is chosen so its right endpoint
    coincides with the direct multiplicative certificate; the left endpoints
    then compare the small-factor strength at equal large-factor strength.
    """
    started = time.perf_counter()
    dists = [d.strip() for d in args.dists.split(",") if d.strip()]
    unknown = [d for d in dists if d not in _DIST_CHOICES]
    if unknown:
        raise ValueError(f"unknown distributions: {unknown} (choose from {_DIST_CHOICES})")
    pa_grid = _parse_pa_grid(args.pa_grid)

    rows = []
    for pa in pa_grid:
        if not 0.0 < pa < 1.0:
            raise ValueError(f"pa grid values must lie in (0, 1), got {pa}")
        pb = 1.0 - pa
        rayleigh_cert: Certificate | None = None
        for name in dists:
            if name in _LOG_KINDS:
                outcome = log_space_radius(_LOG_KINDS[name], args.scale, pa, pb)
            elif name == "inv-rayleigh":
                outcome = certify_inverse_rayleigh(ProbBounds(pa, pb))
            else:
                outcome = certify_rayleigh(ProbBounds(pa, pb))
                if isinstance(outcome, Certificate):
                    rayleigh_cert = outcome
            scale = args.scale if name in _LOG_KINDS else rayleigh().scale
            rows.append(_compare_row(pa, name, scale, outcome))
        if args.matched and rayleigh_cert is not None and pa > 0.5:
            # scale matching the log-Gaussian right endpoint to the direct one
            matched_scale = math.log(rayleigh_cert.gamma2) / float(ndtri(pa))
            outcome = log_space_radius(Kind.LOG_GAUSSIAN, matched_scale, pa, pb)
            rows.append(_compare_row(pa, "log-gaussian-matched", matched_scale, outcome))

    manifest = _manifest(
        "compare",
        {"dists": args.dists, "pa_grid": args.pa_grid, "scale": args.scale, "matched": args.matched},
        None,
        started,
    )
    _emit_csv(
        ["pa", "distribution", "scale", "gamma1", "gamma2", "gamma1_full", "gamma2_full"],
        rows,
        args.out,
        manifest,
    )
    return EXIT_OK


def _compare_row(pa: float, name: str, scale: float, outcome) -> list:
    if isinstance(outcome, Abstain):
        return [f"{pa:.6g}", name, f"{scale:.6g}", "", "", "", ""]
    gamma2 = "inf" if outcome.unbounded else f"{outcome.gamma2:.2f}"
    gamma2_full = "inf" if outcome.unbounded else repr(outcome.gamma2)
    return [
        f"{pa:.6g}",
        name,
        f"{scale:.6g}",
        f"{outcome.gamma1:.2f}",
        gamma2,
        repr(outcome.gamma1),
        gamma2_full,
    ]


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="smoothcert", description=__doc__)
    parser.add_argument("--version", action="version", version=f"smoothcert {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("table", help="reference certificate table as CSV")
    p.add_argument("--out", help="CSV path (stdout when omitted)")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("cert", help="certificate from probability bounds")
    p.add_argument("--pa", type=float, required=True, help="lower bound on the top-class probability")
    p.add_argument("--pb", type=float, help="upper bound on the runner-up probability")
    p.add_argument("--trivial-pb", action="store_true", help="use pb = 1 - pa")
    p.add_argument("--dist", choices=_DIST_CHOICES, default="rayleigh")
    p.add_argument("--scale", type=float, help="distribution scale (defaults: unit-median sigma / 1.0)")
    p.add_argument("--json", action="store_true", help="emit a JSON report instead of plain text")
    p.set_defaults(func=cmd_cert)

    p = sub.add_parser("smooth", help="Monte-Carlo smoothed prediction and certificate")
    p.add_argument("--input", required=True, help="input tensor (.mst1)")
    p.add_argument("--classifier", required=True, help="classifier manifest (.json)")
    p.add_argument("--n", type=int, required=True, help="estimation sample count")
    p.add_argument("--n0", type=int, default=100, help="selection sample count")
    p.add_argument("--alpha", type=float, required=True, help="mistake probability budget")
    p.add_argument("--seed", type=int, help=f"seed (default: ${_SEED_ENV} or 0)")
    p.add_argument("--dist", choices=_DIST_CHOICES, default="rayleigh")
    p.add_argument("--scale", type=float)
    p.add_argument("--sweep", action="store_true", help="also walk the empirical robustness interval")
    p.add_argument("--step", type=float, default=0.01, help="sweep step")
    p.add_argument("--gamma-max", type=float, default=4.0, help="sweep upper limit")
    p.add_argument("--out", help="JSON path (stdout when omitted)")
    p.set_defaults(func=cmd_smooth)

    p = sub.add_parser("realistic", help="double-smoothing certification (8-bit setting)")
    p.add_argument("--budget", required=True, help="error budget JSON")
    p.add_argument("--config", required=True, help="sampling config JSON")
    p.add_argument("--input", required=True, help="input tensor (.mst1)")
    p.add_argument("--classifier", required=True, help="classifier manifest (.json)")
    p.add_argument("--out", help="JSON path (stdout when omitted)")
    p.set_defaults(func=cmd_realistic)

    p = sub.add_parser("estimate-error", help="distributional conversion-error bound")
    p.add_argument("--dataset", required=True, help="directory of .mst1 tensors")
    p.add_argument("--gamma-min", type=float, required=True)
    p.add_argument("--gamma-max", type=float, required=True)
    p.add_argument("--qe", type=float, required=True, help="guarantee rate q_E")
    p.add_argument("--alphae", type=float, required=True, help="estimation confidence budget alpha_E")
    p.add_argument("--grid", type=int, default=64, help="attack-factor grid points")
    p.add_argument("--seed", type=int, help=f"seed (default: ${_SEED_ENV} or 0)")
    p.add_argument("--out", help="JSON path (stdout when omitted)")
    p.set_defaults(func=cmd_estimate_error)

    p = sub.add_parser("compare", help="per-distribution certificate intervals as CSV")
    p.add_argument(
        "--dists",
        default="rayleigh,log-gaussian,log-laplace,log-uniform",
        help="comma list of distributions",
    )
    p.add_argument("--pa-grid", default="0.55:0.995:9", help="start:stop:count or comma list")
    p.add_argument("--scale", type=float, default=1.0, help="scale for the log-space laws")
    p.add_argument("--matched", action=argparse.BooleanOptionalAction, default=True,
                   help="include the right-endpoint-matched log-Gaussian baseline")
    p.add_argument("--out", help="CSV path (stdout when omitted)")
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, TensorFormatError, json.JSONDecodeError, KeyError) as exc:
        print(f"smoothcert: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

"""Batch command-line driver.

::

    truncdens fit --config exp.yaml [--out DIR]
    truncdens example-1d [--out DIR]
    truncdens verify [--suite NAME] [--json]
    truncdens sample --target NAME --set SPEC -n N --seed S --out FILE

``TOOL_THREADS`` caps the BLAS thread pools.  Artifacts carry no
timestamps; run time is written to a ``run_info.json`` sidecar.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .basis import PolyCoeffs, enumerate_basis
from .density import LogDensity, TruncatedDensity, kl_divergence, tv_distance, write_density_csv
from .integrate import QuadratureSpec, SurvivalSet
from .mle import FitConfig, FitReport, ProjectionError, fit_config_from_mapping, fit_population_1d, psgd_fit
from .sampler import SamplerStats, SamplingError, sample_target, sample_uniform_set, write_samples_csv

log = logging.getLogger("truncdens")

SCHEMA_VERSION = "1"
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_CLAIM = 4


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# parsing of targets and sets


def parse_set(spec) -> SurvivalSet:
    """Survival set from a config value or command-line string.

    Accepted forms: ``"cube"`` or ``"cube:d"``; ``"a,b"`` for an interval;
    ``"a,b;c,d"`` for a union of intervals; ``"box:lo1,lo2:hi1,hi2"``; a
    list ``[a, b]`` or ``[[a, b], [c, d]]``; or the JSON mapping written by
    :meth:`SurvivalSet.to_json`.
    """
    try:
        if isinstance(spec, dict):
            return SurvivalSet.from_json(spec)
        if isinstance(spec, (list, tuple)):
            if spec and isinstance(spec[0], (list, tuple)):
                return SurvivalSet.intervals([tuple(map(float, iv)) for iv in spec])
            return SurvivalSet.interval(float(spec[0]), float(spec[1]))
        text = str(spec).strip()
        if text.startswith("{"):
            return SurvivalSet.from_json(json.loads(text))
        if text.startswith("cube"):
            d = int(text.split(":")[1]) if ":" in text else 1
            return SurvivalSet.cube(d)
        if text.startswith("box:"):
            _, lo, hi = text.split(":")
            return SurvivalSet.from_box([float(t) for t in lo.split(",")], [float(t) for t in hi.split(",")])
        parts = [tuple(float(t) for t in piece.split(",")) for piece in text.split(";")]
        if any(len(p) != 2 for p in parts):
            raise ValueError("intervals need two endpoints")
        return SurvivalSet.intervals(parts)
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"invalid survival set {spec!r}: {exc}") from exc


def parse_target(spec, d: int = 1) -> LogDensity:
    """Target log-density from a name, ``"exp_scaled:a"``, ``"poly:c1,c2,..."``,
    ``"expr:<sympy expression>"`` or an equivalent mapping."""
    try:
        if isinstance(spec, dict):
            if "polynomial" in spec:
                coeffs = spec["polynomial"]
                if isinstance(coeffs, dict):
                    return LogDensity.from_poly(PolyCoeffs.from_json(coeffs))
                return LogDensity.from_poly(PolyCoeffs(enumerate_basis(1, len(coeffs)), np.asarray(coeffs, float)))
            if "exp_scaled" in spec:
                return LogDensity.exp_scaled(float(spec["exp_scaled"]), d)
            if "expression" in spec:
                return LogDensity.from_expression(str(spec["expression"]), d)
            raise ValueError(f"unknown target keys {sorted(spec)}")
        text = str(spec).strip()
        if text == "sin10":
            return LogDensity.sine(10.0, d)
        if text == "uniform":
            return LogDensity.from_poly(PolyCoeffs.zeros(d, 1))
        if text.startswith("exp_scaled"):
            a = float(text.split(":")[1]) if ":" in text else 1.0
            return LogDensity.exp_scaled(a, d)
        if text.startswith("poly:"):
            coeffs = [float(t) for t in text[5:].split(",")]
            return LogDensity.from_poly(PolyCoeffs(enumerate_basis(1, len(coeffs)), np.array(coeffs)))
        if text.startswith("expr:"):
            return LogDensity.from_expression(text[5:], d)
        return LogDensity.from_expression(text, d)
    except Exception as exc:
        raise ConfigError(f"invalid target {spec!r}: {exc}") from exc


# --------------------------------------------------------------------------
# experiment spec


@dataclass
class ExperimentSpec:
    target: LogDensity
    set: SurvivalSet
    mode: str
    fit: FitConfig
    outputs: Optional[Path]
    curve_resolution: int
    data: Optional[Path] = None
    data_seed: int = 0
    raw: Optional[dict] = None

    def __post_init__(self):
        if self.mode not in ("psgd", "population"):
            raise ConfigError("mode must be 'psgd' or 'population'")
        if self.curve_resolution < 64:
            raise ConfigError("curve_resolution must be at least 64")
        if self.target.d != self.set.d:
            raise ConfigError("target and survival set dimensions differ")


_FIT_KEYS = {"degree", "bound_C", "steps", "step_size", "seed", "averaging", "quadrature"}
_SPEC_KEYS = {"target", "set", "mode", "outputs", "curve_resolution", "data", "data_seed", "fit"}


def _default_resolution(d: int) -> int:
    return {1: 1025, 2: 129}.get(d, 64)


def build_experiment(data: dict, overrides: dict) -> ExperimentSpec:
    """Merge a config mapping with command-line overrides (which win)."""
    data = dict(data or {})
    unknown = set(data) - _SPEC_KEYS - _FIT_KEYS - {"quadrature.mode", "quadrature.resolution"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    fit = dict(data.pop("fit", {}) or {})
    for key in list(data):
        if key in _FIT_KEYS or key.startswith("quadrature."):
            fit[key] = data.pop(key)
    for key, val in overrides.items():
        if val is None:
            continue
        if key in _SPEC_KEYS:
            data[key] = val
        else:
            fit[key] = val
    if "quadrature.mode" in fit or "quadrature.resolution" in fit:
        quad = dict(fit.pop("quadrature", {}) or {})
        for sub in ("mode", "resolution"):
            if f"quadrature.{sub}" in fit:
                quad[sub] = fit.pop(f"quadrature.{sub}")
        fit["quadrature"] = quad
    fit.setdefault("bound_C", None)
    S = parse_set(data.get("set", "cube"))
    target = parse_target(data.get("target", "sin10"), S.d)
    if fit["bound_C"] is None:
        fit["bound_C"] = 3.0 * target.B
    fit.setdefault("steps", 1)
    try:
        cfg = fit_config_from_mapping(fit)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    out = data.get("outputs")
    return ExperimentSpec(
        target=target,
        set=S,
        mode=str(data.get("mode", "population")),
        fit=cfg,
        outputs=Path(out) if out else None,
        curve_resolution=int(data.get("curve_resolution", _default_resolution(S.d))),
        data=Path(data["data"]) if data.get("data") else None,
        data_seed=int(data.get("data_seed", 0)),
        # the output location is not part of the experiment's identity
        raw={**{k: v for k, v in data.items() if k != "outputs"}, "fit": cfg.to_dict()},
    )


def _read_config(path) -> dict:
    import yaml

    try:
        with open(path) as fh:
            loaded = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    if loaded is None:
        return {}
    if not isinstance(loaded, dict):
        raise ConfigError("config must be a key-value mapping")
    return loaded


def _read_samples(path: Path, d: int) -> np.ndarray:
    try:
        pts = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read samples from {path}: {exc}") from exc
    if not np.all(np.isfinite(pts)):
        raise ConfigError(f"{path} contains non-finite values")
    if pts.shape[1] != d:
        raise ConfigError(f"{path} has {pts.shape[1]} columns, expected {d}")
    return pts


# --------------------------------------------------------------------------
# commands


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n")


def _sidecar(out: Path, command: str, started: float) -> None:
    _write_json(out / "run_info.json", {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "started_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(started)),
        "elapsed_seconds": round(time.time() - started, 3),
    })


def run_fit(spec: ExperimentSpec) -> dict:
    """Fit according to ``spec`` and write all artifacts; returns the metrics."""
    out = spec.outputs
    f, S, cfg = spec.target, spec.set, spec.fit
    K = SurvivalSet.cube(S.d)
    quad = cfg.quad
    if spec.mode == "population":
        if S.d != 1 or S.exact_1d is None:
            raise ConfigError("population mode needs a one-dimensional interval set")
        quad = quad or QuadratureSpec.for_degree(cfg.k)
        pop = fit_population_1d(f, S, cfg.k, quad)
        trace = pop.objective_trace
        stride = max(1, len(trace) // 50)
        report = FitReport(pop.coeffs, [{"iteration": i, "objective": J} for i, J in enumerate(trace)][::stride],
                           SamplerStats(), 0, pop.iterations, 0.0)
    else:
        if spec.data is not None:
            data = _read_samples(spec.data, S.d)
        else:
            data, _ = sample_target(f, S, cfg.T, seed=spec.data_seed)
        report = psgd_fit(data, S, cfg)
    qK = quad if S.d == 1 else None
    truth_S, fit_S = TruncatedDensity(f, S, quad), TruncatedDensity(report.coeffs, S, quad)
    truth_K, fit_K = TruncatedDensity(f, K, qK), TruncatedDensity(report.coeffs, K, qK)
    report.final_kl_on_S = kl_divergence(truth_S, fit_S)
    report.tv_on_S = tv_distance(truth_S, fit_S)
    report.tv_on_K = tv_distance(truth_K, fit_K)
    metrics = {
        "schema_version": SCHEMA_VERSION,
        "kl_on_S": report.final_kl_on_S,
        "tv_on_K": report.tv_on_K,
        "tv_on_S": report.tv_on_S,
    }
    res = spec.curve_resolution
    _write_json(out / "fit_report.json", report.to_dict())
    write_density_csv(truth_K, out / "density_truth.csv", res)
    write_density_csv(fit_K, out / "density_fit.csv", res)
    write_density_csv(truth_S, out / "density_truth_S.csv", res)
    write_density_csv(fit_S, out / "density_fit_S.csv", res)
    _write_json(out / "metrics.json", metrics)
    cols = ["x"] if S.d == 1 else [f"x{i + 1}" for i in range(S.d)]
    _write_json(out / "manifest.json", {
        "schema_version": SCHEMA_VERSION,
        "config": spec.raw,
        "axes": {"x": cols, "y": "pdf"},
        "series": [
            {"file": "density_truth.csv", "label": "truth", "normalized_on": "K"},
            {"file": "density_fit.csv", "label": "fit", "normalized_on": "K"},
            {"file": "density_truth_S.csv", "label": "truth", "normalized_on": "S"},
            {"file": "density_fit_S.csv", "label": "fit", "normalized_on": "S"},
        ],
        "metrics": "metrics.json",
        "report": "fit_report.json",
    })
    return metrics


def cmd_fit(args) -> int:
    started = time.time()
    try:
        raw = _read_config(args.config) if args.config else {}
        overrides = {
            "outputs": args.out, "target": args.target, "set": args.set, "mode": args.mode,
            "curve_resolution": args.curve_resolution, "data": args.data, "degree": args.degree,
            "bound_C": args.bound_C, "steps": args.steps, "step_size": args.step_size, "seed": args.seed,
            "averaging": args.averaging, "quadrature.mode": args.quad_mode,
            "quadrature.resolution": args.quad_resolution,
        }
        spec = build_experiment(raw, overrides)
        if spec.outputs is None:
            raise ConfigError("no output directory given (set 'outputs' or pass --out)")
        if not spec.outputs.is_dir():
            raise ConfigError(f"output directory {spec.outputs} does not exist")
        if not os.access(spec.outputs, os.W_OK):
            raise ConfigError(f"output directory {spec.outputs} is not writable")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        metrics = run_fit(spec)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ProjectionError, SamplingError, RuntimeError, ValueError, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    _sidecar(spec.outputs, "fit", started)
    print(json.dumps(metrics, indent=2))
    return 0


def cmd_example_1d(args) -> int:
    from .experiments import example_1d, format_summary

    started = time.time()
    out = Path(args.out)
    result = example_1d(out_dir=out, curve_resolution=args.curve_resolution)
    _sidecar(out, "example-1d", started)
    print(format_summary(result))
    failed = [c for c in result.claims if not c.holds]
    for c in failed:
        print(f"claim violated: {c.name}: {c.message}", file=sys.stderr)
    return EXIT_CLAIM if failed else 0


def cmd_verify(args) -> int:
    from .verify import SUITES, format_table, reports_to_json, run_suite

    names = []
    for item in args.suite or []:
        names.extend(n for n in item.split(",") if n)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        print(f"unknown suite(s): {', '.join(unknown)}; available: {', '.join(sorted(SUITES))}", file=sys.stderr)
        return 2
    reports = run_suite(names)
    table = format_table(reports)
    if args.json:
        print(reports_to_json(reports))
        print(table, file=sys.stderr)
    else:
        print(table)
    return 1 if any(r.asserted and not r.passed for r in reports) else 0


def cmd_sample(args) -> int:
    try:
        S = parse_set(args.set)
        if args.n < 0:
            raise ConfigError("-n must be non-negative")
        if args.target == "uniform":
            pts, stats = sample_uniform_set(S, args.n, args.seed)
        else:
            pts, stats = sample_target(parse_target(args.target, S.d), S, args.n, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SamplingError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    write_samples_csv(pts.reshape(-1, S.d), args.out)
    print(json.dumps({"schema_version": SCHEMA_VERSION, "n": int(len(pts)), **stats.to_dict()}), file=sys.stderr)
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="truncdens", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a polynomial log-density and write curves and metrics")
    p.add_argument("--config", help="YAML/JSON experiment file")
    p.add_argument("--out", help="existing output directory (overrides 'outputs')")
    p.add_argument("--target")
    p.add_argument("--set")
    p.add_argument("--mode", choices=["psgd", "population"])
    p.add_argument("--data", help="CSV of samples for psgd mode (default: draw from the target)")
    p.add_argument("--curve-resolution", type=int)
    p.add_argument("--degree", type=int)
    p.add_argument("--bound-C", dest="bound_C", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--step-size", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--averaging", choices=["final", "uniform_average"])
    p.add_argument("--quad-mode", choices=["gauss_legendre_1d", "tensor_grid", "monte_carlo"])
    p.add_argument("--quad-resolution", type=int)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("example-1d", help="degree sweep for sin(10x) observed on [0, 1/2]")
    p.add_argument("--out", default="example_1d_out")
    p.add_argument("--curve-resolution", type=int, default=1025)
    p.set_defaults(func=cmd_example_1d)

    p = sub.add_parser("verify", help="run the inequality checks")
    p.add_argument("--suite", action="append", help="suite name (repeatable or comma-separated)")
    p.add_argument("--json", action="store_true", help="JSON on stdout, table on stderr")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sample", help="draw samples from a truncated target")
    p.add_argument("--target", required=True)
    p.add_argument("--set", required=True)
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    threads = os.environ.get("TOOL_THREADS")
    if threads:
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=max(1, int(threads))):
            return args.func(args)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

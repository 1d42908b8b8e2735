"""The one-dimensional running example: ``f(x) = sin(10 x)`` observed on
``S = [0, 1/2]`` and fitted by population MLE at several degrees.

Fitting on ``S`` is easy at every degree, but extrapolation to ``[0, 1]``
is erratic at moderate degree and settles once the degree is high enough.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from .density import LogDensity, TruncatedDensity, tv_distance, write_density_csv
from .integrate import QuadratureSpec, SurvivalSet
from .mle import fit_population_1d, kl_objective

SCHEMA_VERSION = "1"
DEFAULT_DEGREES = (4, 6, 8, 10, 12, 14, 16, 18, 20)


def load_example_fixture() -> dict:
    """Thresholds for the sweep, frozen from the independent oracle pipeline."""
    text = resources.files("truncdens").joinpath("data/example_1d_fixture.json").read_text()
    return json.loads(text)


@dataclass
class Claim:
    name: str
    holds: bool
    message: str


@dataclass
class Example1DResult:
    rows: list
    claims: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.holds for c in self.claims)

    def row(self, k: int) -> dict:
        return next(r for r in self.rows if r["degree"] == k)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "rows": self.rows,
            "claims": [{"name": c.name, "holds": c.holds, "message": c.message} for c in self.claims],
            "passed": self.passed,
        }


def fit_degree(k: int, f: Optional[LogDensity] = None, S: Optional[SurvivalSet] = None,
               spec: Optional[QuadratureSpec] = None):
    """Population MLE at degree ``k`` with its errors on ``S`` and on the cube."""
    f = f or LogDensity.sin10()
    S = S or SurvivalSet.interval(0.0, 0.5)
    K = SurvivalSet.cube(1)
    spec = spec or QuadratureSpec.for_degree(k)
    fit = fit_population_1d(f, S, k, spec)
    row = {
        "degree": k,
        "tv_on_S": tv_distance(TruncatedDensity(f, S, spec), TruncatedDensity(fit.coeffs, S, spec)),
        "tv_on_K": tv_distance(TruncatedDensity(f, K, spec), TruncatedDensity(fit.coeffs, K, spec)),
        "kl_on_S": kl_objective(fit.coeffs, f, S, spec),
        "iterations": fit.iterations,
        "grad_norm": fit.grad_norm,
    }
    return fit.coeffs, row


def evaluate_claims(rows: Sequence[dict], fixture: dict) -> list[Claim]:
    by_k = {r["degree"]: r for r in rows}
    claims = []

    limits = fixture["tv_on_S_max"]
    over = [k for k, r in by_k.items() if str(k) in limits and r["tv_on_S"] > limits[str(k)]]
    claims.append(Claim("tv_on_S_within_fixture", not over,
                        "tv_on_S within fixture thresholds" if not over
                        else f"tv_on_S above fixture threshold at degrees {over}"))

    if 4 in by_k:
        slack = fixture.get("tv_on_S_slack", 1e-3)
        base = by_k[4]["tv_on_S"]
        worse = [k for k, r in by_k.items() if r["tv_on_S"] > base + slack]
        claims.append(Claim("tv_on_S_weakly_improving", not worse,
                            "tv_on_S(k) <= tv_on_S(4) + slack" if not worse
                            else f"tv_on_S worse than at degree 4 for {worse}"))

    lo, hi = fixture.get("overfit_pair", [10, 12])
    if lo in by_k and hi in by_k:
        holds = by_k[hi]["tv_on_K"] > by_k[lo]["tv_on_K"]
        claims.append(Claim("overfit_at_12", holds,
                            f"tv_on_K({hi}) = {by_k[hi]['tv_on_K']:.4g} vs tv_on_K({lo}) = {by_k[lo]['tv_on_K']:.4g}"))

    limit = fixture["tv_on_K_max_past_threshold"]
    high = [k for k in fixture["past_threshold_degrees"] if k in by_k]
    bad = [k for k in high if by_k[k]["tv_on_K"] > limit]
    claims.append(Claim("no_overfit_past_threshold", bool(high) and not bad,
                        f"tv_on_K <= {limit} for degrees {high}" if not bad
                        else f"tv_on_K above {limit} at degrees {bad}"))
    return claims


def example_1d(degrees: Sequence[int] = DEFAULT_DEGREES, out_dir=None,
               curve_resolution: int = 1025, fixture: Optional[dict] = None) -> Example1DResult:
    """Run the sweep, check the qualitative claims and optionally write curves.

    With ``out_dir`` set, writes ``truth_S.csv``/``truth_K.csv``, one
    ``fit_k{k}_S.csv``/``fit_k{k}_K.csv`` pair per degree, ``summary.csv``,
    ``summary.json`` and ``manifest.json``.
    """
    fixture = fixture or load_example_fixture()
    rows, fits = [], {}
    for k in degrees:
        coeffs, row = fit_degree(int(k))
        rows.append(row)
        fits[int(k)] = coeffs
    result = Example1DResult(rows, evaluate_claims(rows, fixture), fits)
    if out_dir is not None:
        _write_outputs(result, Path(out_dir), curve_resolution)
    return result


def _write_outputs(result: Example1DResult, out: Path, resolution: int) -> None:
    out.mkdir(parents=True, exist_ok=True)
    f = LogDensity.sin10()
    S, K = SurvivalSet.interval(0.0, 0.5), SurvivalSet.cube(1)
    series = []
    for tag, T in (("S", S), ("K", K)):
        write_density_csv(TruncatedDensity(f, T), out / f"truth_{tag}.csv", resolution)
        series.append({"file": f"truth_{tag}.csv", "label": f"truth normalized on {tag}", "normalized_on": tag})
    for k, coeffs in result.fits.items():
        for tag, T in (("S", S), ("K", K)):
            name = f"fit_k{k}_{tag}.csv"
            write_density_csv(TruncatedDensity(coeffs, T), out / name, resolution)
            series.append({"file": name, "label": f"degree {k} normalized on {tag}",
                           "normalized_on": tag, "degree": k})
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["degree", "tv_on_S", "tv_on_K", "kl_on_S"])
        for r in result.rows:
            w.writerow([r["degree"], repr(r["tv_on_S"]), repr(r["tv_on_K"]), repr(r["kl_on_S"])])
    (out / "summary.json").write_text(json.dumps(result.to_dict(), indent=2) + "\n")
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "x_axis": {"column": "x", "label": "x"},
        "y_axis": {"column": "pdf", "label": "density"},
        "series": series,
        "table": "summary.csv",
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def format_summary(result: Example1DResult) -> str:
    lines = [f"{'degree':>6} {'tv_on_S':>12} {'tv_on_K':>12}"]
    lines += [f"{r['degree']:>6} {r['tv_on_S']:>12.4e} {r['tv_on_K']:>12.4e}" for r in result.rows]
    for c in result.claims:
        lines.append(f"[{'ok' if c.holds else 'VIOLATED'}] {c.name}: {c.message}")
    return "\n".join(lines)

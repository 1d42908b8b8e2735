"""Numerical checks of the inequalities the estimator relies on.

Each check returns a :class:`CheckReport`.  Checks whose constants are
known are asserted; those involving unknown absolute constants only report
an empirical constant (``asserted=False``) together with a stability test.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from ._rng import derive_rng
from .basis import PolyCoeffs, _compositions, _profile_matrix, enumerate_basis, multi_index_factorial, poly_sup_norm
from .density import LogDensity, TruncatedDensity, _log_source, kl_divergence, taylor_polynomial, tv_distance
from .integrate import QuadratureSpec, SurvivalSet

__all__ = [
    "CheckReport",
    "check_taylor_remainder",
    "check_multiindex_sum",
    "check_carbery_wright_scaling",
    "check_distortion_lower",
    "check_pinsker_suite",
    "check_kl_supnorm",
    "SUITES",
    "run_suite",
    "format_table",
    "reports_to_json",
]

SCHEMA_VERSION = "1"


def config_digest(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class CheckReport:
    """Outcome of one check.

    ``direction`` is ``"<="`` (observed must not exceed bound) or ``">="``;
    ``margin`` is positive exactly when the inequality holds.
    """

    name: str
    passed: bool
    observed: float
    bound: float
    margin: float
    config_digest: str
    asserted: bool = True
    direction: str = "<="
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in ("observed", "bound", "margin"):
            val = out[key]
            out[key] = val if math.isfinite(val) else repr(val)
        return out


def _report(name, observed, bound, config, direction="<=", tol=0.0, asserted=True, details=None):
    observed, bound = float(observed), float(bound)
    margin = bound - observed if direction == "<=" else observed - bound
    passed = bool(math.isfinite(observed) and margin >= -tol)
    return CheckReport(name, passed, observed, bound, margin, config_digest(config),
                       asserted, direction, details or {})


def _grid(d: int, n: int) -> np.ndarray:
    per_axis = max(2, int(math.ceil(n ** (1.0 / d))))
    axes = np.meshgrid(*[np.linspace(0.0, 1.0, per_axis)] * d, indexing="ij")
    return np.stack([a.ravel() for a in axes], axis=1)


def _points_on(S: SurvivalSet, n: int) -> np.ndarray:
    if S.exact_1d is not None:
        return np.concatenate([np.linspace(a, b, n) for a, b in S.exact_1d])[:, None]
    pts = _grid(S.d, n)
    return pts[S.contains(pts)]


# --------------------------------------------------------------------------
# Taylor machinery


def check_taylor_remainder(f: LogDensity, k: int, grid_n: int = 10_000, center=None) -> CheckReport:
    """``max |f - T_k f|`` on a grid against ``(15 d / k)^(k+1) M^(k+1)``."""
    if f.M is None:
        raise ValueError("check_taylor_remainder needs the smoothness scale M")
    poly, const = taylor_polynomial(f, k, center)
    pts = _grid(f.d, grid_n)
    err = np.abs(f(pts) - (_profile_matrix(poly.basis, pts) @ poly.v + const))
    bound = (15.0 * f.d / k) ** (k + 1) * float(f.M) ** (k + 1)
    i = int(np.argmax(err))
    cfg = {"check": "taylor_remainder", "f": f.name, "d": f.d, "k": k, "M": f.M, "grid_n": grid_n}
    return _report(f"taylor_remainder[{f.name},k={k}]", err[i], bound, cfg,
                   details={"argmax": pts[i].tolist(), "informative": bound < 1.0})


def multiindex_sum(d: int, k: int) -> Fraction:
    """``sum_{|beta| = k+1} 1 / beta!`` over ``beta`` in ``N^d``, exactly."""
    return sum((Fraction(1, multi_index_factorial(beta)) for beta in _compositions(d, k + 1)), Fraction(0))


def check_multiindex_sum(d: int, k: int) -> CheckReport:
    """Exhaustive ``sum_{|beta| = k+1} 1/beta!`` against ``(15 d / k)^(k+1)``."""
    if not (1 <= d <= 5 and 1 <= k <= 12):
        raise ValueError("exhaustive enumeration is limited to 1 <= d <= 5, 1 <= k <= 12")
    total = multiindex_sum(d, k)
    bound = Fraction(15 * d, k) ** (k + 1)
    cfg = {"check": "multiindex_sum", "d": d, "k": k}
    rep = _report(f"multiindex_sum[d={d},k={k}]", float(total), float(bound), cfg,
                  details={"exact": str(total)})
    rep.passed = total <= bound
    return rep


# --------------------------------------------------------------------------
# anti-concentration


def check_carbery_wright_scaling(p: PolyCoeffs, gammas: Optional[Sequence[float]] = None,
                                 n: int = 1_000_000, seed: int = 0, max_ratio: float = 10.0) -> CheckReport:
    """Empirical constant ``vol{|p| <= g} (int p^2)^(1/2k) / g^(1/k)`` over ``g``.

    Volumes are Monte Carlo estimates on ``n`` seeded points.  The absolute
    constant is unknown, so the check asserts only that the empirical
    constant is finite and stable: its max/min ratio across ``gammas``,
    with each volume moved by 4 standard errors in the favourable
    direction, must stay below ``max_ratio``.
    """
    if not np.any(p.v):
        raise ValueError("p must be nonzero")
    k = p.k
    x = derive_rng(seed, "carbery-wright").random((n, p.d))
    vals = np.abs(_profile_matrix(p.basis, x) @ p.v)
    l2 = float(np.mean(vals ** 2))
    sup = float(vals.max())
    if gammas is None:
        gammas = [sup * r for r in (0.05, 0.1, 0.2, 0.4)]
    gammas = [float(g) for g in gammas]
    vols = np.array([np.mean(vals <= g) for g in gammas])
    se = np.sqrt(vols * (1 - vols) / n)
    scale = l2 ** (1 / (2 * k)) / np.array(gammas) ** (1 / k)
    consts = vols * scale
    lo = np.maximum(vols - 4 * se, 0.0) * scale
    hi = (vols + 4 * se) * scale
    ratio = consts.max() / consts.min() if consts.min() > 0 else math.inf
    # most favourable ratio within tolerance
    i_max, i_min = int(np.argmax(consts)), int(np.argmin(consts))
    ratio_tol = lo[i_max] / hi[i_min] if hi[i_min] > 0 else math.inf
    cfg = {"check": "carbery_wright", "coeffs": p.to_dict(), "gammas": gammas, "n": n, "seed": seed}
    rep = _report(f"carbery_wright[d={p.d},k={k}]", ratio, max_ratio, cfg, details={
        "C_hat": float(consts.max()),
        "C_hat_per_gamma": consts.tolist(),
        "volumes": vols.tolist(),
        "volume_stderr": se.tolist(),
        "int_p2": l2,
    })
    rep.passed = bool(np.isfinite(consts.max()) and min(ratio, ratio_tol) <= max_ratio)
    return rep


# --------------------------------------------------------------------------
# distortion of conditioning


def _tv_with_error(P: TruncatedDensity, Q: TruncatedDensity, spec: QuadratureSpec) -> tuple[float, float]:
    a = tv_distance(P.on(P.set, spec), Q.on(Q.set, spec))
    fine = spec.refined()
    b = tv_distance(P.on(P.set, fine), Q.on(Q.set, fine))
    return b, abs(b - a)


def _spec_for_dim(d: int, k: int) -> QuadratureSpec:
    return QuadratureSpec.for_degree(max(k, 16)) if d == 1 else QuadratureSpec("tensor_grid", 96)


def check_distortion_lower(p: PolyCoeffs, q: PolyCoeffs, S: SurvivalSet, B: float,
                           spec: Optional[QuadratureSpec] = None) -> CheckReport:
    """``TV_K / TV_S >= e^(-2B) vol(S) - 4 err`` for two bounded polynomials.

    ``err`` propagates the quadrature errors of both distances (each
    estimated by comparing against a refined rule).  The matching upper
    bound involves an unknown constant; its fitted value ``C'`` is reported
    in the details and never asserted.
    """
    d, k = p.d, max(p.k, q.k)
    cfg = {"check": "distortion_lower", "p": p.to_dict(), "q": q.to_dict(), "S": S.to_dict(), "B": B}
    name = f"distortion_lower[d={d},k={k}]"
    for r in (p, q):
        sup, _ = poly_sup_norm(r)
        if sup > B * (1 + 1e-9):
            raise ValueError(f"polynomial sup-norm {sup:.6g} exceeds B = {B}")
    if p == q:
        return CheckReport(name, True, math.nan, math.nan, math.nan, config_digest(cfg), asserted=False,
                           direction=">=", details={"skipped": "identical pair, ratio undefined"})
    spec = spec or _spec_for_dim(d, k)
    K = SurvivalSet.cube(d)
    tv_K, err_K = _tv_with_error(TruncatedDensity(p, K, spec), TruncatedDensity(q, K, spec), spec)
    tv_S, err_S = _tv_with_error(TruncatedDensity(p, S, spec), TruncatedDensity(q, S, spec), spec)
    if tv_S <= 0:
        return CheckReport(name, True, math.nan, math.nan, math.nan, config_digest(cfg), asserted=False,
                           direction=">=", details={"skipped": "zero distance on S"})
    ratio = tv_K / tv_S
    err = (err_K + ratio * err_S) / tv_S
    vol = S.volume_estimate
    bound = math.exp(-2 * B) * vol
    c_fit = (ratio * vol ** (k + 1)) ** (1 / k) / (2 * min(d, 2 * k))
    return _report(name, ratio, bound, cfg, direction=">=", tol=4 * err, details={
        "tv_K": tv_K, "tv_S": tv_S, "quadrature_error": err, "vol_S": vol,
        "upper_bound_constant_fit": c_fit,
    })


# --------------------------------------------------------------------------
# Pinsker and the sup-norm bound on KL


def check_pinsker_suite(pairs: Sequence[tuple], spec: Optional[QuadratureSpec] = None,
                        tol: float = 1e-6, name: str = "pinsker") -> CheckReport:
    """``TV <= sqrt(KL)`` for every pair of densities sharing a set.

    ``pairs`` holds ``(P, Q)`` :class:`TruncatedDensity` tuples.  Reports
    the worst ``TV - sqrt(KL)``.
    """
    gaps, rows = [], []
    for P, Q in pairs:
        tv = tv_distance(P, Q, spec)
        kl = kl_divergence(P, Q, spec)
        gaps.append(tv - math.sqrt(kl))
        rows.append({"tv": tv, "kl": kl})
    worst = max(gaps) if gaps else 0.0
    cfg = {"check": "pinsker", "n_pairs": len(rows), "spec": spec.to_dict() if spec else None,
           "pairs": [(P.set.label, repr(P.source), repr(Q.source)) for P, Q in pairs]}
    return _report(name, worst, 0.0, cfg, tol=tol, details={"pairs": rows, "n_pairs": len(rows)})


def _sup_diff(f, g, S: SurvivalSet, n: int) -> float:
    pts = _points_on(S, n)
    return float(np.max(np.abs(_log_source(f, pts) - _log_source(g, pts))))


def check_kl_supnorm(pairs: Sequence[tuple], spec: Optional[QuadratureSpec] = None,
                     grid_n: int = 10_000, tol: float = 1e-10, name: str = "kl_supnorm") -> CheckReport:
    """``KL(P(f, S) || P(g, S)) <= 2 sup_S |f - g|`` for ``(f, g, S)`` triples.

    The sup-norm is taken on a dense grid of ``S``.  Reports the worst
    ``KL - 2 sup``.
    """
    gaps, rows = [], []
    for f, g, S in pairs:
        kl = kl_divergence(TruncatedDensity(f, S, spec), TruncatedDensity(g, S, spec), spec)
        sup = _sup_diff(f, g, S, grid_n)
        gaps.append(kl - 2 * sup)
        rows.append({"kl": kl, "two_sup": 2 * sup})
    worst = max(gaps) if gaps else 0.0
    cfg = {"check": "kl_supnorm", "n_pairs": len(rows), "grid_n": grid_n,
           "pairs": [(repr(f), repr(g), S.label) for f, g, S in pairs]}
    return _report(name, worst, 0.0, cfg, tol=tol, details={"pairs": rows, "n_pairs": len(rows)})


# --------------------------------------------------------------------------
# seeded suites


SUITE_SEED = 20240601


def random_poly(rng: np.random.Generator, d: int, k: int, sup: float) -> PolyCoeffs:
    """Random polynomial rescaled so its sup-norm on the cube is ``sup``."""
    basis = enumerate_basis(d, k)
    p = PolyCoeffs(basis, rng.normal(size=basis.size))
    s, _ = poly_sup_norm(p)
    return p.with_coeffs(p.v * (sup / s))


def random_set(rng: np.random.Generator, d: int, min_vol: float = 0.25) -> SurvivalSet:
    """Random interval (``d = 1``) or box with volume at least ``min_vol``."""
    side = min_vol ** (1.0 / d)
    lengths = rng.uniform(side, 1.0, size=d)
    lo = rng.uniform(0.0, 1.0 - lengths)
    if d == 1:
        return SurvivalSet.interval(float(lo[0]), float(lo[0] + lengths[0]))
    return SurvivalSet.from_box(lo, lo + lengths)


def _suite_taylor() -> list[CheckReport]:
    out = [check_taylor_remainder(LogDensity.sin10(), 30)]
    e = LogDensity.exp_scaled(1.0)
    out += [check_taylor_remainder(e, k) for k in (5, 8, 12)]
    lin = LogDensity.from_poly(PolyCoeffs.from_dict(1, 1, {(1,): 0.5}))
    lin = LogDensity(lin.f, 1, lin.B, 1.0, lin.derivative, 1, "linear")
    out.append(check_taylor_remainder(lin, 1))
    return out


def _suite_multiindex() -> list[CheckReport]:
    return [check_multiindex_sum(d, k) for d in range(1, 5) for k in range(1, 11)]


def _suite_carbery_wright() -> list[CheckReport]:
    out = [check_carbery_wright_scaling(PolyCoeffs.from_dict(1, 1, {(1,): 1.0}), seed=SUITE_SEED)]
    for i, (d, k) in enumerate([(2, 3), (1, 4), (2, 2)]):
        rng = derive_rng(SUITE_SEED, "suite-carbery-wright", i)
        out.append(check_carbery_wright_scaling(random_poly(rng, d, k, 1.0), seed=SUITE_SEED + i))
    return out


def distortion_pairs(n: int = 50, seed: int = SUITE_SEED):
    """``n`` seeded ``(p, q, S, B)`` with ``d <= 2``, ``k <= 4``, ``B <= 1``, ``vol(S) >= 1/4``."""
    out = []
    for i in range(n):
        rng = derive_rng(seed, "suite-distortion", i)
        d = int(rng.integers(1, 3))
        k = int(rng.integers(1, 5))
        B = float(rng.uniform(0.2, 1.0))
        p = random_poly(rng, d, k, B * rng.uniform(0.3, 1.0))
        q = random_poly(rng, d, k, B * rng.uniform(0.3, 1.0))
        out.append((p, q, random_set(rng, d), B))
    return out


def _suite_distortion() -> list[CheckReport]:
    x = PolyCoeffs.from_dict(1, 1, {(1,): 1.0})
    out = [check_distortion_lower(x, x.with_coeffs(-x.v), SurvivalSet.interval(0, 0.5), 1.0)]
    out += [check_distortion_lower(p, q, S, B) for p, q, S, B in distortion_pairs()]
    return out


def pinsker_pairs(n: int = 100, seed: int = SUITE_SEED):
    """Seeded density pairs on shared sets, ending with uniform vs ``P(x, [0,1])``."""
    out = []
    for i in range(n - 1):
        rng = derive_rng(seed, "suite-pinsker", i)
        d = 1 if i % 4 else 2
        k = int(rng.integers(1, 5))
        S = random_set(rng, d)
        p = random_poly(rng, d, k, rng.uniform(0.1, 3.0))
        q = random_poly(rng, d, k, rng.uniform(0.1, 3.0))
        out.append((TruncatedDensity(p, S), TruncatedDensity(q, S)))
    K = SurvivalSet.cube(1)
    out.append((TruncatedDensity(PolyCoeffs.zeros(1, 1), K),
                TruncatedDensity(PolyCoeffs.from_dict(1, 1, {(1,): 1.0}), K)))
    return out


def _suite_pinsker() -> list[CheckReport]:
    return [check_pinsker_suite(pinsker_pairs())]


def kl_supnorm_triples(n: int = 100, seed: int = SUITE_SEED):
    out = []
    for i in range(n):
        rng = derive_rng(seed, "suite-kl-supnorm", i)
        k = int(rng.integers(1, 7))
        S = random_set(rng, 1, 0.1)
        out.append((random_poly(rng, 1, k, rng.uniform(0.1, 3.0)),
                    random_poly(rng, 1, k, rng.uniform(0.1, 3.0)), S))
    return out


def _suite_kl_supnorm() -> list[CheckReport]:
    f = LogDensity.sin10()
    taylor = taylor_polynomial(f, 10)[0]
    S = SurvivalSet.interval(0, 0.5)
    return [
        check_kl_supnorm([(f, taylor, S)], name="kl_supnorm[sin10,taylor10]"),
        check_kl_supnorm(kl_supnorm_triples(), name="kl_supnorm[random]"),
    ]


SUITES: dict[str, Callable[[], list[CheckReport]]] = {
    "taylor": _suite_taylor,
    "multiindex": _suite_multiindex,
    "carbery_wright": _suite_carbery_wright,
    "distortion": _suite_distortion,
    "pinsker": _suite_pinsker,
    "kl_supnorm": _suite_kl_supnorm,
}


def run_suite(names: Optional[Sequence[str]] = None) -> list[CheckReport]:
    """Run the named suites (all when ``names`` is empty)."""
    names = list(names) if names else list(SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(f"unknown suite(s) {unknown}; available: {sorted(SUITES)}")
    reports: list[CheckReport] = []
    for n in names:
        reports.extend(SUITES[n]())
    return reports


def reports_to_json(reports: Sequence[CheckReport]) -> str:
    """JSON array of reports, each tagged with the schema version."""
    return json.dumps([{"schema_version": SCHEMA_VERSION, **r.to_dict()} for r in reports], indent=2)


def format_table(reports: Sequence[CheckReport]) -> str:
    head = f"{'check':<44} {'status':<8} {'observed':>13} {'dir':>3} {'bound':>13} {'margin':>13}"
    lines = [head, "-" * len(head)]
    for r in reports:
        status = ("PASS" if r.passed else "FAIL") if r.asserted else "REPORT"
        lines.append(f"{r.name:<44} {status:<8} {r.observed:>13.6g} {r.direction:>3} "
                     f"{r.bound:>13.6g} {r.margin:>13.6g}")
    failed = sum(1 for r in reports if r.asserted and not r.passed)
    lines.append(f"{len(reports)} checks, {failed} asserted failures")
    return "\n".join(lines)

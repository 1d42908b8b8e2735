"""Maximum-likelihood fitting of polynomial log-densities.

The objective is ``L(v) = KL(P(f, S) || P(v, S))``.  Its gradient is
``E_{P(v,S)}[m_k] - E_{P(f,S)}[m_k]`` and its Hessian the covariance of
``m_k`` under ``P(v, S)``, so ``L`` is convex.  Two solvers are provided:

* :func:`psgd_fit` -- projected stochastic gradient descent from samples,
  projecting onto ``D = {v : sup_cube |q_v| <= C}`` after every step;
* :func:`population_mle_1d` -- deterministic descent on quadrature gradients
  for one-dimensional problems with population access.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from scipy.optimize import lsq_linear

from ._rng import derive_rng
from .basis import (
    MonomialBasis,
    PolyCoeffs,
    _critical_points_1d,
    _grid_points,
    _profile_matrix,
    coeff_l1_bound,
    enumerate_basis,
    poly_sup_norm,
)
from .density import LogDensity, TruncatedDensity, _log_source, _logsumexp, kl_divergence, tv_distance
from .integrate import QuadratureSpec, SurvivalSet, set_rule
from .sampler import SamplerStats, SamplingError

__all__ = [
    "FitConfig",
    "FitReport",
    "ProjectionError",
    "kl_objective",
    "population_gradient",
    "population_hessian",
    "stochastic_gradient",
    "project_onto_D",
    "psgd_fit",
    "population_mle_1d",
    "fit_population_1d",
    "PopulationFit",
    "load_fit_config",
]

log = logging.getLogger(__name__)

SCHEMA_VERSION = "1"


class ProjectionError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# population objective


def _spec_for(S: SurvivalSet, k: int, spec: Optional[QuadratureSpec]) -> QuadratureSpec:
    if spec is not None:
        return spec
    if S.d == 1:
        return QuadratureSpec.for_degree(k)
    if S.breakpoints is not None and S.d <= 3:
        return QuadratureSpec("tensor_grid", {2: 128, 3: 48}[S.d])
    return QuadratureSpec("monte_carlo", 400_000)


class _Population:
    """Quadrature nodes, monomial profiles and target moments on ``S``."""

    def __init__(self, basis: MonomialBasis, f, S: SurvivalSet, spec: QuadratureSpec):
        rule = set_rule(S, spec)
        self.w = rule.weights
        self.M = _profile_matrix(basis, rule.nodes)
        lf = _log_source(f, rule.nodes)
        self.psi_f = _logsumexp(lf, self.w)
        pf = np.exp(lf - self.psi_f)
        self.neg_entropy = float(np.dot(self.w, pf * (lf - self.psi_f)))
        self.mean_f = (self.w * pf) @ self.M

    def model(self, v: np.ndarray):
        q = self.M @ v
        psi = _logsumexp(q, self.w)
        p = self.w * np.exp(q - psi)
        return psi, p

    def objective(self, v: np.ndarray) -> float:
        psi, _ = self.model(v)
        return self.neg_entropy - float(self.mean_f @ v) + psi

    def gradient(self, v: np.ndarray) -> np.ndarray:
        _, p = self.model(v)
        return p @ self.M - self.mean_f

    def hessian(self, v: np.ndarray) -> np.ndarray:
        _, p = self.model(v)
        mu = p @ self.M
        centered = self.M - mu
        return centered.T @ (centered * p[:, None])


def _coeffs(v) -> tuple[MonomialBasis, np.ndarray]:
    return v.basis, v.v


def kl_objective(v: PolyCoeffs, f, S: SurvivalSet, spec: Optional[QuadratureSpec] = None) -> float:
    """``KL(P(f, S) || P(v, S))`` from its three-term expansion.

    ``f`` is a :class:`LogDensity` or :class:`PolyCoeffs`.  The value is
    not floored at zero so that it stays smooth in ``v``.
    """
    basis, vec = _coeffs(v)
    return _Population(basis, f, S, _spec_for(S, basis.k, spec)).objective(vec)


def population_gradient(v: PolyCoeffs, f, S: SurvivalSet,
                        spec: Optional[QuadratureSpec] = None) -> np.ndarray:
    """``E_{P(v,S)}[m_k] - E_{P(f,S)}[m_k]`` by quadrature."""
    basis, vec = _coeffs(v)
    return _Population(basis, f, S, _spec_for(S, basis.k, spec)).gradient(vec)


def population_hessian(v: PolyCoeffs, S: SurvivalSet,
                       spec: Optional[QuadratureSpec] = None) -> np.ndarray:
    """Covariance of ``m_k`` under ``P(v, S)``."""
    basis, vec = _coeffs(v)
    pop = _Population(basis, v, S, _spec_for(S, basis.k, spec))
    return pop.hessian(vec)


def stochastic_gradient(v: PolyCoeffs, x_model, y_data) -> np.ndarray:
    """``m_k(x) - m_k(y)`` for a model draw ``x`` and a data draw ``y``.

    Batches of paired draws give one row per pair.
    """
    d = v.d
    x = np.asarray(x_model, dtype=float)
    y = np.asarray(y_data, dtype=float)
    single = x.ndim <= 1 and (d > 1 or x.size == 1)
    gx = _profile_matrix(v.basis, x.reshape(-1, d))
    gy = _profile_matrix(v.basis, y.reshape(-1, d))
    g = gx - gy
    return g[0] if single else g


# --------------------------------------------------------------------------
# projection onto D


def _violators(p: PolyCoeffs, C: float, tol: float) -> tuple[float, list[np.ndarray]]:
    """Current sup of ``|q|`` and points where ``|q| > C`` (local maxima first)."""
    if p.d == 1:
        n = max(p.k + 2, 256)
        cand = np.concatenate([[0.0, 1.0], _critical_points_1d(p.v), np.linspace(0, 1, n)])
        vals = np.abs(_profile_matrix(p.basis, cand[:, None]) @ p.v)
        sup = float(vals.max())
        n_exact = cand.size - n
        pts = [np.array([c]) for c, val in zip(cand[:n_exact], vals[:n_exact]) if val > C]
        if not pts and sup > C:
            pts = [np.array([cand[int(np.argmax(vals))]])]
        return sup, pts
    sup, witness = poly_sup_norm(p, tol=tol)
    pts = [witness] if sup > C else []
    if sup > C:
        n = {2: 64, 3: 24}.get(p.d, 0)
        if n:
            grid = _grid_points(p.d, n)
            vals = np.abs(_profile_matrix(p.basis, grid) @ p.v)
            for i in np.argsort(-vals, kind="stable")[:16]:
                if vals[i] > C:
                    pts.append(grid[i])
    return sup, pts


def _least_distance(v: np.ndarray, G: np.ndarray, C: float, refine: int = 3) -> np.ndarray:
    """``argmin ||u - v||`` subject to ``G u <= C``.

    Least-distance programming through one nonnegative least-squares solve.  When
    ``v`` is far from the polyhedron the solution can miss the cuts by a
    relative 1e-14 or so; re-projecting the result (a small problem)
    removes that residual.
    """
    u = _ldp(v, G, C)
    for _ in range(refine):
        if float(np.max(G @ u)) <= C * (1 + 1e-12):
            break
        u = _ldp(u, G, C)
    return u


def _ldp(v: np.ndarray, G: np.ndarray, C: float) -> np.ndarray:
    # with w = u - v: (-G) w >= G v - C
    E = -G
    h = G @ v - C
    m = v.shape[0]
    # the problem is homogeneous in (w, h); keep ||w|| near 1 so the last
    # residual component (about -1 / (1 + ||w||^2)) stays well resolved
    scale = max(1.0, float(np.max(np.abs(h))))
    h = h / scale
    A = np.vstack([E.T, h[None, :]])
    b = np.zeros(m + 1)
    b[-1] = 1.0
    # bounded-variable least squares; scipy's nnls can stop short of the
    # optimum on small, nearly collinear cut sets
    sol = lsq_linear(A, b, bounds=(0.0, np.inf), method="bvls", lsq_solver="exact", tol=1e-14)
    z = np.maximum(sol.x, 0.0)
    r = A @ z - b
    if float(np.min(A.T @ r)) < -1e-8 * (1.0 + float(np.abs(A).max())):
        raise ProjectionError("cutting-plane subproblem solve did not reach optimality")
    if abs(r[-1]) < 1e-300:
        raise ProjectionError("cutting-plane subproblem is infeasible")
    w = -r[:m] / r[m]
    return v + scale * w


def project_onto_D(v: PolyCoeffs, C: float, tol: float = 1e-6, max_rounds: int = 200) -> PolyCoeffs:
    """Euclidean projection of ``v`` onto ``D = {u : sup_cube |q_u| <= C}``.

    Cutting planes: each round finds points ``x`` where ``|q_u(x)| > C`` and
    adds the cut ``sign(q_u(x)) u . m_k(x) <= C``; the least-distance
    problem over the accumulated cuts is solved exactly.  Every iterate
    projects onto a superset of ``D``, so its distance to ``v`` never
    exceeds the true distance; stops once ``sup |q_u| <= C + tol``.
    """
    if C <= 0:
        raise ValueError("C must be positive")
    basis, vec = v.basis, v.v
    sup, pts = _violators(v, C, tol)
    if sup <= C + tol:
        return v
    G = np.zeros((0, basis.size))
    u = vec
    for rnd in range(max_rounds):
        new = _profile_matrix(basis, np.array(pts, dtype=float).reshape(len(pts), -1))
        new *= np.where(new @ u > 0, 1.0, -1.0)[:, None]
        for row in new:
            if G.shape[0] == 0 or np.min(np.max(np.abs(G - row), axis=1)) > 1e-13:
                G = np.vstack([G, row])
        u = _least_distance(vec, G, C)
        sup, pts = _violators(PolyCoeffs(basis, u), C, tol)
        if sup <= C + tol:
            return PolyCoeffs(basis, u)
    raise ProjectionError(
        f"projection did not converge after {max_rounds} rounds: sup|q| = {sup:.6g}, C = {C}, "
        f"{G.shape[0]} cuts, distance {np.linalg.norm(u - vec):.6g}"
    )


class _Certificate:
    """Grid test that certifies ``sup_cube |q_v| <= C`` without a full search.

    Moving one coordinate by ``h/2`` changes a degree-``k`` polynomial by at
    most ``(h/2) * 2k^2 * sup`` (Markov's inequality on the axis line), so
    ``sup <= grid_max / (1 - d h k^2)``.
    """

    def __init__(self, basis: MonomialBasis, C: float):
        d, k = basis.d, basis.k
        n = {1: 2049, 2: 257, 3: 49}.get(d, 0)
        self.C = C
        self.ok = False
        if n:
            h = 1.0 / (n - 1)
            self.factor = 1.0 - d * h * k * k
            if self.factor > 0.5:
                self.G = _profile_matrix(basis, _grid_points(d, n))
                self.ok = True

    def inside(self, u: np.ndarray) -> bool:
        if not self.ok:
            return False
        return float(np.max(np.abs(self.G @ u))) <= self.C * self.factor


# --------------------------------------------------------------------------
# projected SGD


@dataclass(frozen=True)
class FitConfig:
    """Hyperparameters of projected SGD.

    ``eta=None`` uses ``R / (rho sqrt(T))`` with ``R`` the coefficient bound
    for ``C`` and ``rho^2 = 2 C(d+k, k)``.
    """

    k: int
    C: float
    T: int
    eta: Optional[float] = None
    seed: int = 0
    quad: Optional[QuadratureSpec] = None
    averaging: str = "uniform_average"
    proj_tol: float = 1e-6
    epochs: int = 10

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be at least 1")
        if self.C <= 0:
            raise ValueError("C must be positive")
        if self.eta is not None and self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.averaging not in ("final", "uniform_average"):
            raise ValueError("averaging must be 'final' or 'uniform_average'")
        if self.k < 1:
            raise ValueError("degree must be at least 1")

    def step_size(self, d: int) -> float:
        if self.eta is not None:
            return float(self.eta)
        R = coeff_l1_bound(self.C, d, self.k)
        rho = math.sqrt(2 * math.comb(d + self.k, self.k))
        return R / (rho * math.sqrt(self.T))

    def to_dict(self) -> dict:
        return {
            "degree": self.k,
            "bound_C": self.C,
            "steps": self.T,
            "step_size": self.eta,
            "seed": self.seed,
            "averaging": self.averaging,
            "quadrature": self.quad.to_dict() if self.quad else None,
        }


_CONFIG_KEYS = {"degree", "bound_C", "steps", "step_size", "seed", "averaging",
                "quadrature.mode", "quadrature.resolution"}


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for key, val in d.items():
        name = f"{prefix}{key}"
        if isinstance(val, dict):
            out.update(_flatten(val, name + "."))
        else:
            out[name] = val
    return out


def fit_config_from_mapping(data: dict) -> FitConfig:
    """Build a :class:`FitConfig` from the frozen key names (nested or dotted)."""
    flat = _flatten(data)
    unknown = set(flat) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown fit config keys: {sorted(unknown)}")
    for req in ("degree", "bound_C", "steps"):
        if req not in flat:
            raise ValueError(f"fit config is missing {req!r}")
    quad = None
    if "quadrature.mode" in flat or "quadrature.resolution" in flat:
        quad = QuadratureSpec(flat.get("quadrature.mode", "gauss_legendre_1d"),
                              int(flat.get("quadrature.resolution", 64)))
    eta = flat.get("step_size")
    return FitConfig(
        k=int(flat["degree"]),
        C=float(flat["bound_C"]),
        T=int(flat["steps"]),
        eta=None if eta is None else float(eta),
        seed=int(flat.get("seed", 0)),
        quad=quad,
        averaging=str(flat.get("averaging", "uniform_average")),
    )


def load_fit_config(path) -> FitConfig:
    """Read a YAML (or JSON) file with the fit config keys."""
    import yaml

    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if "fit" in data and isinstance(data["fit"], dict):
        data = data["fit"]
    return fit_config_from_mapping(data)


@dataclass
class FitReport:
    coeffs: PolyCoeffs
    trajectory: list = field(default_factory=list)
    sampler_stats: SamplerStats = field(default_factory=SamplerStats)
    projection_count: int = 0
    steps: int = 0
    eta: float = 0.0
    final_kl_on_S: Optional[float] = None
    tv_on_K: Optional[float] = None
    tv_on_S: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "coeffs": self.coeffs.to_dict(),
            "steps": self.steps,
            "eta": self.eta,
            "projection_count": self.projection_count,
            "sampler_stats": self.sampler_stats.to_dict(),
            "trajectory": self.trajectory,
            "final_kl_on_S": self.final_kl_on_S,
            "tv_on_K": self.tv_on_K,
            "tv_on_S": self.tv_on_S,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


class _ModelSampler:
    """Exact draws from ``P(v, S)`` for a changing ``v``.

    Uniform-on-S proposals (with their monomial profiles and log-uniforms)
    are pre-drawn from a seeded stream that does not depend on ``v``; each
    request scans forward until ``log u < q_v(x) - C``.
    """

    CHUNK = 32
    BLOCK = 1 << 14

    def __init__(self, basis: MonomialBasis, S: SurvivalSet, C: float, seed: int):
        self.basis, self.S, self.C, self.seed = basis, S, C, seed
        self.block = 0
        self.i = 0
        self.M = np.zeros((0, basis.size))
        self.logu = np.zeros(0)
        self.proposals = 0
        self.accepts = 0
        self.max_proposals = int(math.ceil(math.exp(2 * C) / S.volume_estimate * 50 * math.log(1e6)))

    def _refill(self):
        rng = derive_rng(self.seed, "psgd-model", self.block)
        self.block += 1
        x = rng.random((self.BLOCK, self.basis.d))
        u = rng.random(self.BLOCK)
        keep = self.S.contains(x)
        M = _profile_matrix(self.basis, x[keep])
        self.M = np.vstack([self.M[self.i:], M])
        self.logu = np.concatenate([self.logu[self.i:], np.log(u[keep])])
        self.i = 0

    def draw(self, v: np.ndarray) -> np.ndarray:
        scanned = 0
        while True:
            if self.i + self.CHUNK > self.M.shape[0]:
                self._refill()
                continue
            sl = slice(self.i, self.i + self.CHUNK)
            hit = self.logu[sl] < self.M[sl] @ v - self.C
            if hit.any():
                j = int(np.argmax(hit))
                self.i += j + 1
                self.proposals += j + 1
                self.accepts += 1
                return self.M[self.i - 1]
            self.i += self.CHUNK
            self.proposals += self.CHUNK
            scanned += self.CHUNK
            if scanned > self.max_proposals:
                raise SamplingError("model sampler exceeded its proposal budget")

    @property
    def stats(self) -> SamplerStats:
        return SamplerStats(self.proposals, self.accepts)


def psgd_fit(data, S: SurvivalSet, cfg: FitConfig, target: Optional[Union[LogDensity, PolyCoeffs]] = None
             ) -> FitReport:
    """Projected SGD on ``KL(P(f, S) || P(v, S))`` from samples of ``P(f, S)``.

    Starts at ``v = 0``; step ``t`` draws a model point from
    ``P(v^(t-1), S)``, consumes the ``t``-th data point and projects onto
    ``D``.  Returns the uniform average of the iterates (or the final one).
    When ``target`` is given, the report also carries the KL on ``S`` and
    the total variation on the whole cube against it.
    """
    d = S.d
    pts = np.asarray(data if not _is_iterator(data) else list(_take(data, cfg.T)), dtype=float)
    pts = pts.reshape(-1, d)
    if pts.shape[0] < cfg.T:
        raise ValueError(f"need at least T = {cfg.T} data points, got {pts.shape[0]}")
    pts = pts[: cfg.T]
    if not np.all(np.isfinite(pts)):
        raise ValueError("data contains non-finite values")
    if not np.all(S.contains(pts)):
        i = int(np.flatnonzero(~S.contains(pts))[0])
        raise ValueError(f"data point {pts[i].tolist()} lies outside the survival set")
    basis = enumerate_basis(d, cfg.k)
    Y = _profile_matrix(basis, pts[: cfg.T])
    eta = cfg.step_size(d)
    quad = _spec_for(S, cfg.k, cfg.quad)
    env = cfg.C + cfg.proj_tol
    sampler = _ModelSampler(basis, S, env, cfg.seed)
    cert = _Certificate(basis, cfg.C)

    v = np.zeros(basis.size)
    total = np.zeros(basis.size)
    projections = 0
    epoch_len = max(1, cfg.T // max(1, cfg.epochs))
    trajectory = []
    rule = set_rule(S, quad)
    epoch_start = 0
    for t in range(cfg.T):
        mx = sampler.draw(v)
        u = v - eta * (mx - Y[t])
        if not cert.inside(u):
            proj = project_onto_D(PolyCoeffs(basis, u), cfg.C, cfg.proj_tol)
            if proj.v is not u:
                projections += 1
            u = np.array(proj.v)
        v = u
        total += v
        if (t + 1) % epoch_len == 0 or t + 1 == cfg.T:
            avg = total / (t + 1)
            cur = avg if cfg.averaging == "uniform_average" else v
            q = rule.nodes.shape[0] and _profile_matrix(basis, rule.nodes) @ cur
            nll = _logsumexp(q, rule.weights) - float(np.mean(Y[epoch_start: t + 1] @ cur))
            trajectory.append({"step": t + 1, "neg_log_likelihood": nll})
            epoch_start = t + 1

    final = total / cfg.T if cfg.averaging == "uniform_average" else v
    coeffs = PolyCoeffs(basis, final)
    report = FitReport(coeffs, trajectory, sampler.stats, projections, cfg.T, eta)
    if target is not None:
        _attach_target_metrics(report, target, S, quad)
    return report


def _attach_target_metrics(report: FitReport, target, S: SurvivalSet, quad: QuadratureSpec) -> None:
    K = SurvivalSet.cube(S.d)
    kq = quad if S.d == 1 else None
    report.final_kl_on_S = kl_objective(report.coeffs, target, S, quad)
    report.tv_on_S = tv_distance(TruncatedDensity(target, S, quad), TruncatedDensity(report.coeffs, S, quad))
    report.tv_on_K = tv_distance(TruncatedDensity(target, K, kq), TruncatedDensity(report.coeffs, K, kq))


def _is_iterator(x) -> bool:
    return not isinstance(x, (np.ndarray, list, tuple)) and hasattr(x, "__iter__")


def _take(it: Iterable, n: int):
    for i, x in enumerate(it):
        if i >= n:
            break
        yield x


# --------------------------------------------------------------------------
# population MLE in one dimension


@dataclass
class PopulationFit:
    coeffs: PolyCoeffs
    iterations: int
    grad_norm: float
    grad_norm_monomial: float
    objective_trace: list


def _legendre_basis(x: np.ndarray, k: int, a: float, b: float) -> np.ndarray:
    """Legendre polynomials of degrees ``1..k`` on ``[a, b]``, orthonormal
    for the uniform probability measure there."""
    t = (2 * x - (a + b)) / (b - a)
    V = np.polynomial.legendre.legvander(t, k)[:, 1:]
    return V * np.sqrt(2 * np.arange(1, k + 1) + 1)


def _legendre_to_monomial(c: np.ndarray, a: float, b: float) -> np.ndarray:
    k = c.shape[0]
    coef = np.concatenate([[0.0], c * np.sqrt(2 * np.arange(1, k + 1) + 1)])
    poly = np.polynomial.Legendre(coef, domain=[a, b]).convert(kind=np.polynomial.Polynomial)
    out = np.zeros(k + 1)
    out[: poly.coef.size] = poly.coef
    return out[1:]


def _expm1_minus_id(z: np.ndarray) -> np.ndarray:
    small = np.abs(z) < 1e-2
    zs = z[small]
    out = np.expm1(z) - z
    out[small] = zs * zs * (0.5 + zs * (1 / 6 + zs * (1 / 24 + zs * (1 / 120 + zs / 720))))
    return out


def _log1p_minus_id(a: float) -> float:
    if abs(a) < 1e-2:
        return a * a * (-0.5 + a * (1 / 3 + a * (-0.25 + a * (0.2 - a / 6))))
    return math.log1p(a) - a


def fit_population_1d(f, S: SurvivalSet, k: int, spec: Optional[QuadratureSpec] = None,
                      opt_tol: float = 1e-15, max_iter: int = 20_000) -> PopulationFit:
    """Population MLE of degree ``k`` for a one-dimensional truncated target.

    Gradient descent with Armijo backtracking (``c = 1e-4``, halving) on
    the coefficients in a Legendre basis of the hull of ``S``; that fixed
    linear change of variables keeps the problem well conditioned at high
    degree.  Objective decreases are evaluated through ``expm1``/``log1p``
    so line searches stay meaningful near the optimum.  Convergence is
    ``||grad||_2 <= opt_tol`` in those coordinates.
    """
    if S.d != 1 or S.exact_1d is None:
        raise ValueError("population_mle_1d needs a one-dimensional interval-union set")
    spec = spec or QuadratureSpec.for_degree(k)
    a, b = S.exact_1d[0][0], S.exact_1d[-1][1]
    rule = set_rule(S, spec)
    x, w = rule.nodes[:, 0], rule.weights
    Phi = _legendre_basis(x, k, a, b)
    lf = _log_source(f, rule.nodes)
    psi_f = _logsumexp(lf, w)
    mean_f = (w * np.exp(lf - psi_f)) @ Phi

    def state(c):
        q = Phi @ c
        psi = _logsumexp(q, w)
        p = w * np.exp(q - psi)
        return psi, p, p @ Phi - mean_f

    c = np.zeros(k)
    psi, p, g = state(c)
    J = psi - float(mean_f @ c)
    trace = [J]
    step = 1.0
    it = 0
    gn = float(np.linalg.norm(g))
    while gn > opt_tol:
        if it >= max_iter:
            raise RuntimeError(f"population MLE did not converge: ||grad|| = {gn:.3g} after {it} iterations")
        direction = -g
        slope = float(g @ direction)
        s = Phi @ direction
        t = min(step * 2.0, 1e3)
        while True:
            z = t * s
            e2 = float(p @ _expm1_minus_id(z))
            a1 = t * float(p @ s) + e2
            # J(c + t d) - J(c), free of cancellation for small t
            delta = t * slope + _log1p_minus_id(a1) + e2
            if delta <= 1e-4 * t * slope:
                break
            t *= 0.5
            if t < 1e-30:
                if gn <= max(opt_tol, 1e-15) * 1e3:
                    log.debug("line search stalled at ||grad|| = %.3g", gn)
                    break
                raise RuntimeError(f"line search failed at ||grad|| = {gn:.3g}")
        if t < 1e-30:
            break
        step = t
        c = c + t * direction
        psi, p, g = state(c)
        trace.append(trace[-1] + delta)
        gn = float(np.linalg.norm(g))
        it += 1

    v = _legendre_to_monomial(c, a, b)
    coeffs = PolyCoeffs(enumerate_basis(1, k), v)
    gm = population_gradient(coeffs, f, S, spec)
    return PopulationFit(coeffs, it, gn, float(np.linalg.norm(gm)), trace)


def population_mle_1d(f, S: SurvivalSet, k: int, spec: Optional[QuadratureSpec] = None,
                      opt_tol: float = 1e-15) -> PolyCoeffs:
    """Degree-``k`` minimizer of ``KL(P(f, S) || P(q, S))`` with population access."""
    return fit_population_1d(f, S, k, spec, opt_tol).coeffs

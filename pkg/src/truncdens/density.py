"""Truncated exponential-family densities ``P(f, S)``.

``P(f, S)`` has density ``1_S(x) exp(f(x) - psi(f, S))`` on the unit cube,
with ``psi(f, S) = log int_S exp(f)``.  The log-density ``f`` is either a
:class:`LogDensity` (an arbitrary smooth function with its bound metadata)
or a :class:`~truncdens.basis.PolyCoeffs`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Union

import numpy as np

from ._rng import derive_rng
from .basis import PolyCoeffs, enumerate_basis, eval_poly, multi_index_factorial, poly_sup_norm
from .integrate import QuadratureRule, QuadratureSpec, SurvivalSet, set_rule, union_rule

__all__ = [
    "LogDensity",
    "TruncatedDensity",
    "log_partition",
    "pdf",
    "kl_divergence",
    "tv_distance",
    "taylor_log_density",
    "taylor_polynomial",
    "cdf_1d",
    "density_curve",
    "write_density_csv",
]


@dataclass(frozen=True, eq=False)
class LogDensity:
    """A log-density ``f`` on ``[0, 1]^d`` with its class metadata.

    ``B`` bounds ``|f|``; ``M`` is the smoothness scale (``||D^k f|| <= M**k``
    for ``k >= k0``); ``derivative(alpha, x)`` returns the partial derivative
    ``D_alpha f`` at a batch of points when it is known in closed form.
    """

    f: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    d: int = 1
    B: float = 1.0
    M: Optional[float] = None
    derivative: Optional[Callable[[tuple, np.ndarray], np.ndarray]] = field(default=None, repr=False)
    k0: int = 1
    name: str = "custom"

    def __post_init__(self):
        x = derive_rng(0, "logdensity-bound-check").random((1000, self.d))
        vals = self(x)
        worst = float(np.max(np.abs(vals)))
        if not np.isfinite(worst) or worst > self.B * (1 + 1e-12) + 1e-12:
            raise ValueError(f"|f| reaches {worst:.6g} on sampled points, above B = {self.B}")

    def __call__(self, x) -> np.ndarray:
        pts = np.asarray(x, dtype=float).reshape(-1, self.d)
        return np.asarray(self.f(pts), dtype=float).reshape(-1)

    # -- built-in targets ---------------------------------------------------
    @classmethod
    def sine(cls, freq: float = 10.0, d: int = 1) -> LogDensity:
        """``f(x) = sin(freq * x_1)``."""
        w = float(freq)

        def f(x):
            return np.sin(w * x[:, 0])

        def deriv(alpha, x):
            alpha = tuple(alpha)
            if any(alpha[1:]):
                return np.zeros(len(x))
            n = alpha[0]
            return w ** n * np.sin(w * x[:, 0] + n * math.pi / 2)

        name = "sin10" if w == 10.0 else f"sin({w:g}x)"
        return cls(f, d, 1.0, abs(w), deriv, 1, name)

    @classmethod
    def sin10(cls) -> LogDensity:
        return cls.sine(10.0)

    @classmethod
    def exp_scaled(cls, a: float = 1.0, d: int = 1) -> LogDensity:
        """``f(x) = exp(a * x_1)``."""
        a = float(a)

        def f(x):
            return np.exp(a * x[:, 0])

        def deriv(alpha, x):
            alpha = tuple(alpha)
            if any(alpha[1:]):
                return np.zeros(len(x))
            return a ** alpha[0] * np.exp(a * x[:, 0])

        return cls(f, d, max(1.0, math.exp(a)), abs(a), deriv, 1, f"exp({a:g}x)")

    @classmethod
    def from_poly(cls, p: PolyCoeffs, B: Optional[float] = None) -> LogDensity:
        """Polynomial log-density; derivatives beyond the degree vanish, so
        ``M = 0`` with ``k0 = k + 1``."""
        if B is None:
            B = poly_sup_norm(p, tol=1e-9)[0] * (1 + 1e-9) + 1e-12
        exps = p.basis.exponents
        coef = p.v

        def f(x):
            return eval_poly(p, x)

        def deriv(alpha, x):
            alpha = np.asarray(alpha)
            out = np.zeros(len(x))
            for e, c in zip(exps, coef):
                if c == 0 or np.any(e < alpha):
                    continue
                scale = math.prod(math.perm(int(ei), int(ai)) for ei, ai in zip(e, alpha))
                out += c * scale * np.prod(x ** (e - alpha), axis=1)
            return out

        return cls(f, p.d, float(B), 0.0, deriv, p.k + 1, "polynomial")

    @classmethod
    def from_expression(cls, expr: str, d: int = 1, B: Optional[float] = None,
                        M: Optional[float] = None) -> LogDensity:
        """Parse an expression in ``x1 .. xd`` (or ``x`` when ``d == 1``).

        Derivatives are symbolic.  Without ``B`` the bound is a dense-grid
        maximum inflated by 5%.
        """
        import sympy as sp

        syms = sp.symbols(" ".join(f"x{i + 1}" for i in range(d)), real=True)
        syms = (syms,) if d == 1 else tuple(syms)
        local = {f"x{i + 1}": s for i, s in enumerate(syms)}
        if d == 1:
            local["x"] = syms[0]
        try:
            e = sp.sympify(expr, locals=local)
        except (sp.SympifyError, SyntaxError, TypeError) as exc:
            raise ValueError(f"cannot parse expression {expr!r}: {exc}") from exc
        if not e.free_symbols <= set(syms):
            raise ValueError(f"expression uses unknown symbols {e.free_symbols - set(syms)}")
        fn = sp.lambdify(syms, e, "numpy")

        def f(x):
            return np.broadcast_to(np.asarray(fn(*x.T), dtype=float), (len(x),)).copy()

        cache: dict = {}

        def deriv(alpha, x):
            alpha = tuple(int(a) for a in alpha)
            if alpha not in cache:
                de = e
                for s, a in zip(syms, alpha):
                    if a:
                        de = sp.diff(de, s, a)
                cache[alpha] = sp.lambdify(syms, de, "numpy")
            return np.broadcast_to(np.asarray(cache[alpha](*x.T), dtype=float), (len(x),)).copy()

        if B is None:
            n = {1: 4097, 2: 257, 3: 33}.get(d, 9)
            axis = np.linspace(0, 1, n)
            grid = np.stack([m.ravel() for m in np.meshgrid(*([axis] * d), indexing="ij")], axis=1)
            B = 1.05 * float(np.max(np.abs(f(grid)))) + 1e-12
        return cls(f, d, float(B), M, deriv, 1, expr)


Source = Union[LogDensity, PolyCoeffs]


def _dim(source: Source) -> int:
    return source.d


def _log_source(source: Source, x: np.ndarray) -> np.ndarray:
    if isinstance(source, PolyCoeffs):
        pts = np.asarray(x, dtype=float).reshape(-1, source.d)
        return np.asarray(eval_poly(source, pts), dtype=float).reshape(-1)
    return source(x)


def _default_spec(source: Source, S: SurvivalSet) -> QuadratureSpec:
    if S.d == 1:
        k = source.k if isinstance(source, PolyCoeffs) else 16
        return QuadratureSpec.for_degree(k)
    if S.breakpoints is not None and S.d <= 3:
        return QuadratureSpec("tensor_grid", {2: 128, 3: 48}[S.d])
    return QuadratureSpec("monte_carlo", 400_000)


def _logsumexp(logvals: np.ndarray, weights: np.ndarray) -> float:
    if logvals.size == 0:
        raise FloatingPointError("no quadrature nodes inside the set")
    m = float(np.max(logvals))
    total = float(np.dot(weights, np.exp(logvals - m)))
    if not total > 0 or not np.isfinite(m):
        raise FloatingPointError("integral of exp(f) underflowed to zero")
    return m + math.log(total)


def log_partition(f: Source, S: SurvivalSet, spec: Optional[QuadratureSpec] = None) -> float:
    """``psi(f, S) = log int_S exp(f)``, evaluated with a max shift."""
    if S.volume_estimate <= 0:
        raise ValueError("empty or negligible survival set")
    spec = spec or _default_spec(f, S)
    rule = set_rule(S, spec)
    vals = _log_source(f, rule.nodes)
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("log-density is not finite on the set")
    return _logsumexp(vals, rule.weights)


@dataclass(frozen=True, eq=False)
class TruncatedDensity:
    """``P(f, S)`` with its log-partition computed eagerly for ``quad``."""

    source: Source
    set: SurvivalSet
    quad: Optional[QuadratureSpec] = None
    psi: float = field(init=False)

    def __post_init__(self):
        if _dim(self.source) != self.set.d:
            raise ValueError("log-density and survival set have different dimensions")
        if self.quad is None:
            object.__setattr__(self, "quad", _default_spec(self.source, self.set))
        vals = _log_source(self.source, self.rule.nodes)
        if not np.all(np.isfinite(vals)):
            raise FloatingPointError("log-density is not finite on the set")
        object.__setattr__(self, "psi", _logsumexp(vals, self.rule.weights))

    @cached_property
    def rule(self) -> QuadratureRule:
        return set_rule(self.set, self.quad)

    @property
    def d(self) -> int:
        return self.set.d

    def __eq__(self, other):
        if not isinstance(other, TruncatedDensity):
            return NotImplemented
        return (self.source is other.source or self.source == other.source) and \
            _same_set(self.set, other.set) and self.quad == other.quad

    __hash__ = object.__hash__

    def logpdf(self, x) -> np.ndarray:
        pts = np.asarray(x, dtype=float).reshape(-1, self.d)
        out = np.full(len(pts), -np.inf)
        inside = self.set.contains(pts)
        out[inside] = _log_source(self.source, pts[inside]) - self.psi
        return out

    def pdf(self, x) -> np.ndarray:
        return np.exp(self.logpdf(x))

    def on(self, S: SurvivalSet, quad: Optional[QuadratureSpec] = None) -> TruncatedDensity:
        """The same log-density conditioned on another set."""
        return TruncatedDensity(self.source, S, quad or (self.quad if S.d == 1 else None))

    def normalization(self) -> float:
        """``int_S pdf`` on this density's own rule."""
        return self.rule.integrate(np.exp(_log_source(self.source, self.rule.nodes) - self.psi))


def _same_set(a: SurvivalSet, b: SurvivalSet) -> bool:
    if a is b:
        return True
    try:
        return a.to_dict() == b.to_dict()
    except ValueError:
        return False


def pdf(P: TruncatedDensity, x) -> np.ndarray:
    """Density of ``P`` at ``x``; zero outside the survival set."""
    return P.pdf(x)


def kl_divergence(P: TruncatedDensity, Q: TruncatedDensity,
                  spec: Optional[QuadratureSpec] = None) -> float:
    """``KL(P || Q)`` for two densities on the same set, floored at zero."""
    if not _same_set(P.set, Q.set):
        raise ValueError("KL divergence needs both densities on the same survival set")
    rule = set_rule(P.set, spec) if spec is not None else P.rule
    lp = _log_source(P.source, rule.nodes) - (P.psi if spec is None else log_partition(P.source, P.set, spec))
    lq = _log_source(Q.source, rule.nodes) - (Q.psi if spec is None else log_partition(Q.source, Q.set, spec))
    p = np.exp(lp)
    bad = (p > 0) & ~np.isfinite(lq)
    if np.any(bad):
        raise ValueError("support mismatch: Q vanishes where P is positive")
    terms = np.where(p > 0, p * (lp - lq), 0.0)
    return max(float(np.dot(rule.weights, terms)), 0.0)


def tv_distance(P: TruncatedDensity, Q: TruncatedDensity,
                spec: Optional[QuadratureSpec] = None) -> float:
    """``(1/2) int |p - q|`` over the union of the two supports."""
    if P.d != Q.d:
        raise ValueError("densities live in different dimensions")
    spec = spec or P.quad
    rule = union_rule([P.set, Q.set], spec)
    diff = np.abs(P.pdf(rule.nodes) - Q.pdf(rule.nodes))
    return 0.5 * rule.integrate(diff)


# --------------------------------------------------------------------------
# Taylor polynomials


def _taylor_terms(f: LogDensity, k: int, center) -> dict[tuple, float]:
    """Monomial coefficients (in ``y``) of the order-``k`` Taylor polynomial
    of ``f`` around ``center``, constant term included."""
    if f.derivative is None:
        raise ValueError(f"log-density {f.name!r} has no derivative oracle")
    d = f.d
    c = np.asarray(center, dtype=float).reshape(d)
    alphas = [(0,) * d] + [a.exponents for a in enumerate_basis(d, k).indices]
    terms: dict[tuple, float] = {}
    for alpha in alphas:
        a_coef = float(f.derivative(alpha, c[None, :])[0]) / multi_index_factorial(alpha)
        if a_coef == 0.0:
            continue
        # expand prod_i (y_i - c_i)^alpha_i
        partial = {(): a_coef}
        for i, ai in enumerate(alpha):
            nxt = {}
            for beta, val in partial.items():
                for bi in range(ai + 1):
                    w = math.comb(ai, bi) * (-c[i]) ** (ai - bi)
                    if w == 0:
                        continue
                    key = beta + (bi,)
                    nxt[key] = nxt.get(key, 0.0) + val * w
            partial = nxt
        for beta, val in partial.items():
            terms[beta] = terms.get(beta, 0.0) + val
    return terms


def taylor_polynomial(f: LogDensity, k: int, center=None) -> tuple[PolyCoeffs, float]:
    """Order-``k`` Taylor polynomial of ``f`` as ``(non-constant part, constant)``."""
    center = np.zeros(f.d) if center is None else center
    terms = _taylor_terms(f, k, center)
    const = terms.pop((0,) * f.d, 0.0)
    return PolyCoeffs.from_dict(f.d, k, terms), const


def taylor_log_density(f: LogDensity, k: int, center=None) -> PolyCoeffs:
    """Polynomial log-density from the Taylor expansion of ``f``.

    The constant term is dropped: it is absorbed by normalization, so
    ``P(taylor, S)`` equals ``P(taylor + const, S)``.
    """
    return taylor_polynomial(f, k, center)[0]


# --------------------------------------------------------------------------
# curves


def cdf_1d(P: TruncatedDensity, x, points_per_unit: int = 1 << 16) -> np.ndarray:
    """CDF of a one-dimensional truncated density, by cumulative Simpson
    integration of the pdf on a fine grid of each interval of the set."""
    from scipy.integrate import cumulative_simpson

    if P.d != 1:
        raise ValueError("cdf_1d needs a one-dimensional density")
    x = np.asarray(x, dtype=float)
    grids, cums, total = [], [], 0.0
    for a, b in P.set.exact_1d:
        n = max(64, int(math.ceil((b - a) * points_per_unit)))
        g = np.linspace(a, b, n + 1)
        dens = np.exp(_log_source(P.source, g[:, None]) - P.psi)
        c = total + np.concatenate([[0.0], cumulative_simpson(dens, x=g)])
        grids.append(g)
        cums.append(c)
        total = c[-1]
    g = np.concatenate(grids)
    c = np.concatenate(cums) / total
    return np.interp(x, g, c, left=0.0, right=1.0)


def density_curve(P: TruncatedDensity, resolution: int = 1025) -> tuple[np.ndarray, np.ndarray]:
    """Points of a uniform grid on the cube (``resolution`` per axis) and the pdf there."""
    axis = np.linspace(0.0, 1.0, resolution)
    mesh = np.meshgrid(*([axis] * P.d), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    return pts, P.pdf(pts)


def write_density_csv(P: TruncatedDensity, path, resolution: int = 1025) -> None:
    """CSV with columns ``x`` (or ``x1..xd``), ``pdf``, ``logpdf`` and a header row."""
    pts, dens = density_curve(P, resolution)
    logs = P.logpdf(pts)
    header = ["x"] if P.d == 1 else [f"x{i + 1}" for i in range(P.d)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header + ["pdf", "logpdf"])
        for row, p, lp in zip(pts, dens, logs):
            w.writerow([repr(float(c)) for c in row] + [repr(float(p)), repr(float(lp))])

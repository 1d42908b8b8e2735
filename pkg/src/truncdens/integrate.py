"""Quadrature and Monte Carlo integration over the unit cube and survival sets."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ._rng import derive_rng

__all__ = [
    "SurvivalSet",
    "QuadratureSpec",
    "QuadratureRule",
    "integrate_box",
    "integrate_set",
    "estimate_volume",
    "box_rule",
    "set_rule",
    "union_rule",
]

GL_NODES_PER_PANEL = 32
TENSOR_NODES_PER_PANEL = 8
BRACKET_RESOLUTION = 2 ** 14
_MODES = ("gauss_legendre_1d", "tensor_grid", "monte_carlo")


@dataclass(frozen=True)
class QuadratureSpec:
    """How to integrate.

    ``resolution`` means: panels per unit length (``gauss_legendre_1d``,
    32 Gauss-Legendre nodes each), nodes per axis (``tensor_grid``), or the
    number of draws (``monte_carlo``).
    """

    mode: str = "gauss_legendre_1d"
    resolution: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ValueError(f"unknown quadrature mode {self.mode!r}; choose from {_MODES}")
        if int(self.resolution) < 2:
            raise ValueError("quadrature resolution must be at least 2")
        object.__setattr__(self, "resolution", int(self.resolution))

    def refined(self, factor: int = 2) -> QuadratureSpec:
        return QuadratureSpec(self.mode, self.resolution * factor, self.seed)

    def to_dict(self) -> dict:
        return {"mode": self.mode, "resolution": self.resolution, "seed": self.seed}

    @classmethod
    def for_degree(cls, k: int) -> QuadratureSpec:
        """1-D default sized for integrating ``exp(q)`` with ``deg q = k``."""
        return cls("gauss_legendre_1d", max(64, 8 * k))


def _merge_intervals(intervals) -> tuple[tuple[float, float], ...]:
    ivs = sorted((float(a), float(b)) for a, b in intervals)
    out: list[list[float]] = []
    for a, b in ivs:
        if not (0.0 <= a <= b <= 1.0):
            raise ValueError(f"interval [{a}, {b}] is not inside [0, 1]")
        if b == a:
            continue
        if out and a <= out[-1][1]:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return tuple((a, b) for a, b in out)


@dataclass(frozen=True, eq=False)
class SurvivalSet:
    """A measurable subset ``S`` of ``[0, 1]^d`` given by a membership test.

    ``exact_1d`` holds the interval decomposition of one-dimensional sets and
    ``box`` the corners of axis-aligned boxes; both give exact volumes and
    let quadrature panels end on the boundary of ``S``.
    """

    d: int
    membership: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    volume_estimate: float
    volume_stderr: float = 0.0
    exact_1d: Optional[tuple[tuple[float, float], ...]] = None
    box: Optional[tuple[tuple[float, ...], tuple[float, ...]]] = None
    label: str = "custom"

    def __post_init__(self):
        if self.volume_estimate <= 0:
            raise ValueError("empty or negligible survival set")

    # -- constructors -------------------------------------------------------
    @classmethod
    def intervals(cls, intervals) -> SurvivalSet:
        ivs = _merge_intervals(intervals)
        if not ivs:
            raise ValueError("empty or negligible survival set")
        lo = np.array([a for a, _ in ivs])
        hi = np.array([b for _, b in ivs])

        def member(x, lo=lo, hi=hi):
            x = np.asarray(x, dtype=float).reshape(-1, 1)
            return np.any((x >= lo) & (x <= hi), axis=1)

        vol = float(sum(b - a for a, b in ivs))
        return cls(1, member, vol, 0.0, exact_1d=ivs, label="interval")

    @classmethod
    def interval(cls, a: float, b: float) -> SurvivalSet:
        return cls.intervals([(a, b)])

    @classmethod
    def cube(cls, d: int = 1) -> SurvivalSet:
        if d == 1:
            return cls.interval(0.0, 1.0)
        return cls.from_box([0.0] * d, [1.0] * d)

    @classmethod
    def from_box(cls, lo: Sequence[float], hi: Sequence[float]) -> SurvivalSet:
        lo_a, hi_a = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
        if lo_a.shape != hi_a.shape or np.any(lo_a < 0) or np.any(hi_a > 1) or np.any(hi_a <= lo_a):
            raise ValueError("box corners must satisfy 0 <= lo < hi <= 1")
        d = lo_a.shape[0]
        if d == 1:
            return cls.interval(lo_a[0], hi_a[0])

        def member(x, lo=lo_a, hi=hi_a):
            x = np.asarray(x, dtype=float).reshape(-1, d)
            return np.all((x >= lo) & (x <= hi), axis=1)

        vol = float(np.prod(hi_a - lo_a))
        return cls(d, member, vol, 0.0, box=(tuple(lo_a), tuple(hi_a)), label="box")

    @classmethod
    def from_membership(cls, d: int, membership, n: int = 200_000, seed: int = 0,
                        label: str = "custom") -> SurvivalSet:
        """Wrap a membership predicate.

        One-dimensional sets are bracketed into an interval union by a
        bisection scan at resolution ``2**-14``; others get a Monte Carlo
        volume estimate from ``n`` seeded draws.
        """
        if d == 1:
            return cls.intervals(_bracket_1d(membership)).relabel(label)
        vol, err = _mc_volume(d, membership, n, seed)
        return cls(d, membership, vol, err, label=label)

    @classmethod
    def halfspace(cls, normal: Sequence[float], offset: float, n: int = 200_000,
                  seed: int = 0) -> SurvivalSet:
        """``{x : normal . x <= offset}`` intersected with the cube."""
        w = np.asarray(normal, dtype=float)
        d = w.shape[0]
        nz = np.flatnonzero(w)
        if nz.size == 1:
            # axis aligned: an exact box
            j = int(nz[0])
            lo, hi = [0.0] * d, [1.0] * d
            cut = offset / w[j]
            if w[j] > 0:
                hi[j] = min(1.0, cut)
            else:
                lo[j] = max(0.0, cut)
            return cls.from_box(lo, hi).relabel("halfspace")

        def member(x, w=w, b=float(offset)):
            x = np.asarray(x, dtype=float).reshape(-1, d)
            return x @ w <= b

        return cls.from_membership(d, member, n=n, seed=seed, label="halfspace")

    @classmethod
    def ball(cls, center: Sequence[float], radius: float, n: int = 200_000,
             seed: int = 0) -> SurvivalSet:
        c = np.asarray(center, dtype=float)
        d = c.shape[0]
        if d == 1:
            return cls.interval(max(0.0, c[0] - radius), min(1.0, c[0] + radius)).relabel("ball")

        def member(x, c=c, r2=float(radius) ** 2):
            x = np.asarray(x, dtype=float).reshape(-1, d)
            return np.sum((x - c) ** 2, axis=1) <= r2

        return cls.from_membership(d, member, n=n, seed=seed, label="ball")

    def relabel(self, label: str) -> SurvivalSet:
        return SurvivalSet(self.d, self.membership, self.volume_estimate, self.volume_stderr,
                           self.exact_1d, self.box, label)

    # -- queries ------------------------------------------------------------
    def contains(self, x) -> np.ndarray:
        pts = np.asarray(x, dtype=float).reshape(-1, self.d)
        return np.asarray(self.membership(pts), dtype=bool).reshape(-1)

    @property
    def is_cube(self) -> bool:
        if self.exact_1d is not None:
            return self.exact_1d == ((0.0, 1.0),)
        if self.box is not None:
            return all(a == 0.0 for a in self.box[0]) and all(b == 1.0 for b in self.box[1])
        return False

    @property
    def breakpoints(self) -> Optional[list[np.ndarray]]:
        """Per-axis coordinates where the indicator of ``S`` may jump, if known."""
        if self.exact_1d is not None:
            return [np.array(sorted({0.0, 1.0, *[c for iv in self.exact_1d for c in iv]}))]
        if self.box is not None:
            return [np.array(sorted({0.0, 1.0, lo, hi})) for lo, hi in zip(*self.box)]
        return None

    def to_dict(self) -> dict:
        if self.exact_1d is not None:
            return {"d": 1, "intervals": [list(iv) for iv in self.exact_1d]}
        if self.box is not None:
            return {"d": self.d, "box": [list(self.box[0]), list(self.box[1])]}
        raise ValueError("only interval-union and box sets are serializable")

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, data) -> SurvivalSet:
        if isinstance(data, str):
            data = json.loads(data)
        if "intervals" in data:
            if int(data.get("d", 1)) != 1:
                raise ValueError("interval sets are one-dimensional")
            return cls.intervals(data["intervals"])
        if "box" in data:
            return cls.from_box(*data["box"])
        raise ValueError("survival set JSON needs an 'intervals' or 'box' entry")


def _bracket_1d(membership) -> list[tuple[float, float]]:
    n = BRACKET_RESOLUTION
    grid = np.linspace(0.0, 1.0, n + 1)
    inside = np.asarray(membership(grid[:, None]), dtype=bool).reshape(-1)

    def locate(lo, hi, lo_in):
        # indicator flips somewhere in (lo, hi)
        for _ in range(52):
            mid = 0.5 * (lo + hi)
            if bool(np.asarray(membership(np.array([[mid]]))).reshape(-1)[0]) == lo_in:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    out = []
    start = 0.0 if inside[0] else None
    for i in range(n):
        if inside[i] != inside[i + 1]:
            edge = locate(grid[i], grid[i + 1], bool(inside[i]))
            if inside[i]:
                out.append((start, edge))
                start = None
            else:
                start = edge
    if start is not None:
        out.append((start, 1.0))
    return out


def _mc_volume(d, membership, n, seed):
    rng = derive_rng(seed, "volume")
    x = rng.random((n, d))
    hits = np.asarray(membership(x), dtype=bool).reshape(-1)
    p = hits.mean()
    return float(p), float(math.sqrt(p * (1 - p) / n))


# --------------------------------------------------------------------------
# quadrature rules


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Nodes of shape ``(n, d)`` and weights of shape ``(n,)``.

    ``stochastic`` marks Monte Carlo rules, whose error is a standard error
    rather than a discretization error.
    """

    nodes: np.ndarray
    weights: np.ndarray
    stochastic: bool = False
    draws: int = 0

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def _gl_panels(edges: np.ndarray, nodes_per_panel: int) -> tuple[np.ndarray, np.ndarray]:
    t, w = np.polynomial.legendre.leggauss(nodes_per_panel)
    a, b = edges[:-1, None], edges[1:, None]
    x = 0.5 * (b - a) * t[None, :] + 0.5 * (a + b)
    wx = 0.5 * (b - a) * w[None, :]
    return x.ravel(), wx.ravel()


def _axis_rule(breaks: np.ndarray, per_unit: float, nodes_per_panel: int):
    """Composite Gauss-Legendre over consecutive ``breaks``, ~``per_unit`` panels per unit length."""
    xs, ws = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b <= a:
            continue
        m = max(1, math.ceil((b - a) * per_unit - 1e-9))
        x, w = _gl_panels(np.linspace(a, b, m + 1), nodes_per_panel)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def _tensor(axes_x, axes_w):
    mesh = np.meshgrid(*axes_x, indexing="ij")
    wmesh = np.meshgrid(*axes_w, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=1)
    weights = np.prod(np.stack([m.ravel() for m in wmesh], axis=1), axis=1)
    return nodes, weights


def _mc_rule(d: int, spec: QuadratureSpec, tag: str) -> QuadratureRule:
    rng = derive_rng(spec.seed, tag)
    nodes = rng.random((spec.resolution, d))
    return QuadratureRule(nodes, np.full(spec.resolution, 1.0 / spec.resolution), True, spec.resolution)


def _rule_on_breaks(breaks: list[np.ndarray], spec: QuadratureSpec) -> QuadratureRule:
    d = len(breaks)
    if spec.mode == "gauss_legendre_1d":
        if d != 1:
            raise ValueError("gauss_legendre_1d quadrature needs d == 1")
        x, w = _axis_rule(breaks[0], spec.resolution, GL_NODES_PER_PANEL)
        return QuadratureRule(x[:, None], w)
    if spec.mode == "tensor_grid":
        if d > 3:
            raise ValueError("tensor_grid quadrature is limited to d <= 3")
        per_unit = spec.resolution / TENSOR_NODES_PER_PANEL
        axes = [_axis_rule(b, per_unit, TENSOR_NODES_PER_PANEL) for b in breaks]
        nodes, weights = _tensor([a[0] for a in axes], [a[1] for a in axes])
        return QuadratureRule(nodes, weights)
    raise AssertionError(spec.mode)


def box_rule(d: int, spec: QuadratureSpec) -> QuadratureRule:
    """Rule on the whole cube ``[0, 1]^d``."""
    if spec.mode == "monte_carlo" or (d > 3 and spec.mode == "tensor_grid"):
        return _mc_rule(d, spec, "box")
    return _rule_on_breaks([np.array([0.0, 1.0])] * d, spec)


def set_rule(S: SurvivalSet, spec: QuadratureSpec) -> QuadratureRule:
    """Rule for integrals over ``S``: panels follow the boundary when it is known,
    otherwise the cube rule is masked by the indicator of ``S``."""
    return union_rule([S], spec, restrict=True)


def union_rule(sets: Sequence[SurvivalSet], spec: QuadratureSpec,
               restrict: bool = False) -> QuadratureRule:
    """Rule on the cube whose panels break at the boundaries of every set in
    ``sets``.  With ``restrict`` the nodes outside the first set are dropped."""
    d = sets[0].d
    if any(s.d != d for s in sets):
        raise ValueError("sets have different dimensions")
    known = [s.breakpoints for s in sets]
    if spec.mode == "monte_carlo" or d > 3 or any(b is None for b in known):
        if spec.mode == "gauss_legendre_1d" and d == 1:
            raise AssertionError("one-dimensional sets always carry intervals")
        mode = spec if spec.mode != "gauss_legendre_1d" else QuadratureSpec("monte_carlo", 200_000, spec.seed)
        rule = box_rule(d, mode)
    else:
        if spec.mode == "gauss_legendre_1d" and d != 1:
            spec = QuadratureSpec("tensor_grid", 64, spec.seed)
        breaks = [np.unique(np.concatenate([b[j] for b in known])) for j in range(d)]
        rule = _rule_on_breaks(breaks, spec)
    if restrict:
        keep = sets[0].contains(rule.nodes)
        rule = QuadratureRule(rule.nodes[keep], rule.weights[keep], rule.stochastic, rule.draws)
    return rule


def _check_finite(vals):
    vals = np.asarray(vals, dtype=float)
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("integrand is not finite at a quadrature node")
    return vals


def _apply(g, rule: QuadratureRule):
    return _check_finite(np.asarray(g(rule.nodes), dtype=float).reshape(-1))


def integrate_box(g, d: int, spec: QuadratureSpec) -> tuple[float, float]:
    """Integrate ``g`` over ``[0, 1]^d``; returns ``(value, error_estimate)``.

    ``g`` receives an array of shape ``(n, d)`` and returns ``n`` values.
    The deterministic modes report the gap to a rule of twice (1-D) or half
    (tensor grid) the resolution; Monte Carlo reports the standard error.
    """
    rule = box_rule(d, spec)
    vals = _apply(g, rule)
    value = rule.integrate(vals)
    if rule.stochastic:
        return value, float(np.std(vals, ddof=1) / math.sqrt(vals.size))
    other = box_rule(d, spec.refined(2) if spec.mode == "gauss_legendre_1d"
                     else QuadratureSpec(spec.mode, max(2, spec.resolution // 2), spec.seed))
    alt = other.integrate(_apply(g, other))
    if spec.mode == "gauss_legendre_1d":
        return alt, abs(alt - value)
    return value, abs(alt - value)


def integrate_set(g, S: SurvivalSet, spec: QuadratureSpec) -> tuple[float, float]:
    """Integrate ``g`` over ``S``; see :func:`integrate_box` for the error estimate."""
    if S.volume_estimate <= 0:
        raise ValueError("empty or negligible survival set")
    rule = set_rule(S, spec)
    vals = _apply(g, rule)
    value = rule.integrate(vals)
    if rule.stochastic:
        # masked MC: variance of g * 1_S over all draws
        n = rule.draws
        full = np.zeros(n)
        full[: vals.size] = vals
        return value, float(np.std(full, ddof=1) / math.sqrt(n))
    if spec.mode == "gauss_legendre_1d":
        other = set_rule(S, spec.refined(2))
        alt = other.integrate(_apply(g, other))
        return alt, abs(alt - value)
    other = set_rule(S, QuadratureSpec(spec.mode, max(2, spec.resolution // 2), spec.seed))
    alt = other.integrate(_apply(g, other))
    return value, abs(alt - value)


def estimate_volume(S: SurvivalSet, n: int = 100_000, seed: int = 0) -> tuple[float, float]:
    """Volume of ``S`` with a standard error (exact for intervals and boxes)."""
    if n < 100:
        raise ValueError("need at least 100 draws")
    if S.exact_1d is not None or S.box is not None:
        return S.volume_estimate, 0.0
    vol, err = _mc_volume(S.d, S.contains, n, seed)
    if vol == 0.0:
        raise ValueError("empty or negligible survival set")
    return vol, err

"""Monomial bases, polynomial coefficient vectors and sup-norm search.

A polynomial with zero constant term in ``d`` variables and total degree at
most ``k`` is stored as a coefficient vector over the canonical ordering of
multi-indices ``0 < |alpha| <= k`` (ascending lexicographic order of the
exponent tuples).  Every serialized coefficient vector uses that ordering.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "MultiIndex",
    "MonomialBasis",
    "PolyCoeffs",
    "enumerate_basis",
    "monomial_profile",
    "eval_poly",
    "multi_index_factorial",
    "coeff_l1_bound",
    "poly_sup_norm",
]

# Per-axis grid caps for the sup-norm search, by dimension.
_GRID_CAP = {1: 512, 2: 128, 3: 64}
_RANDOM_POINTS_HIGH_D = 1 << 15


@dataclass(frozen=True)
class MultiIndex:
    exponents: tuple[int, ...]

    def __post_init__(self):
        exps = tuple(int(a) for a in self.exponents)
        if any(a < 0 for a in exps):
            raise ValueError(f"negative exponent in multi-index {exps}")
        object.__setattr__(self, "exponents", exps)

    @property
    def order(self) -> int:
        return sum(self.exponents)

    @property
    def d(self) -> int:
        return len(self.exponents)

    def __iter__(self):
        return iter(self.exponents)

    def __len__(self):
        return len(self.exponents)


def _compositions(d: int, total: int):
    """All exponent tuples of length ``d`` summing to ``total``."""
    if d == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(d - 1, total - first):
            yield (first,) + rest


@dataclass(frozen=True)
class MonomialBasis:
    """Ordered monomials ``x**alpha`` with ``0 < |alpha| <= k`` in ``d`` variables."""

    d: int
    k: int
    indices: tuple[MultiIndex, ...] = field(repr=False)

    @property
    def t_k(self) -> int:
        return math.comb(self.d + self.k, self.k)

    @property
    def size(self) -> int:
        return len(self.indices)

    def __len__(self):
        return len(self.indices)

    @cached_property
    def exponents(self) -> np.ndarray:
        """Integer array of shape ``(size, d)``."""
        if not self.indices:
            return np.zeros((0, self.d), dtype=np.int64)
        return np.array([a.exponents for a in self.indices], dtype=np.int64)

    def position(self, alpha) -> int:
        alpha = tuple(alpha.exponents if isinstance(alpha, MultiIndex) else alpha)
        return self._lookup[alpha]

    @cached_property
    def _lookup(self) -> dict:
        return {a.exponents: i for i, a in enumerate(self.indices)}


def enumerate_basis(d: int, k: int) -> MonomialBasis:
    """Canonical monomial basis of degree ``k`` in ``d`` variables.

    Returns every multi-index with ``0 < |alpha| <= k`` in ascending
    lexicographic order; there are ``C(d+k, k) - 1`` of them.
    """
    if d < 1:
        raise ValueError("dimension d must be at least 1")
    if k < 0:
        raise ValueError("degree k must be non-negative")
    exps = [e for total in range(1, k + 1) for e in _compositions(d, total)]
    exps.sort()
    return MonomialBasis(d, k, tuple(MultiIndex(e) for e in exps))


def _as_points(x, d: int) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    single = False
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
        single = True
    elif arr.ndim == 1:
        if d == 1 and arr.shape[0] != 1:
            arr = arr[:, None]
        else:
            arr = arr[None, :]
            single = True
    if arr.ndim != 2 or arr.shape[1] != d:
        raise ValueError(f"expected points of dimension {d}, got array of shape {np.shape(x)}")
    return arr, single


def monomial_profile(basis: MonomialBasis, x) -> np.ndarray:
    """Evaluate every basis monomial at ``x``.

    ``x`` may be a single point (shape ``(d,)``) or a batch (shape
    ``(n, d)``; for ``d == 1`` a flat array of ``n`` scalars is also
    accepted).  Returns shape ``(size,)`` or ``(n, size)``.
    """
    pts, single = _as_points(x, basis.d)
    out = _profile_matrix(basis, pts)
    return out[0] if single else out


def _profile_matrix(basis: MonomialBasis, pts: np.ndarray) -> np.ndarray:
    n = pts.shape[0]
    if basis.size == 0:
        return np.zeros((n, 0))
    if basis.d == 1:
        return pts[:, :1] ** basis.exponents[:, 0][None, :]
    # powers[i, j, p] = pts[i, j] ** p
    powers = pts[:, :, None] ** np.arange(basis.k + 1)[None, None, :]
    exps = basis.exponents
    out = np.ones((n, basis.size))
    for j in range(basis.d):
        out *= powers[:, j, exps[:, j]]
    return out


@dataclass(frozen=True, eq=False)
class PolyCoeffs:
    """Coefficient vector ``v`` of ``q_v(x) = v . m_k(x)`` over a monomial basis."""

    basis: MonomialBasis
    v: np.ndarray

    def __post_init__(self):
        v = np.array(self.v, dtype=float).reshape(-1)
        if v.shape[0] != self.basis.size:
            raise ValueError(
                f"coefficient vector has length {v.shape[0]}, basis has {self.basis.size} monomials"
            )
        v.setflags(write=False)
        object.__setattr__(self, "v", v)

    @classmethod
    def zeros(cls, d: int, k: int) -> PolyCoeffs:
        b = enumerate_basis(d, k)
        return cls(b, np.zeros(b.size))

    @classmethod
    def from_dict(cls, d: int, k: int, terms: dict) -> PolyCoeffs:
        """Build from ``{exponent_tuple: coefficient}``; missing terms are zero."""
        b = enumerate_basis(d, k)
        v = np.zeros(b.size)
        for alpha, c in terms.items():
            alpha = (alpha,) if isinstance(alpha, int) else tuple(alpha)
            v[b.position(alpha)] = c
        return cls(b, v)

    @property
    def d(self) -> int:
        return self.basis.d

    @property
    def k(self) -> int:
        return self.basis.k

    def __call__(self, x):
        return eval_poly(self, x)

    def with_coeffs(self, v) -> PolyCoeffs:
        return PolyCoeffs(self.basis, v)

    def __eq__(self, other):
        if not isinstance(other, PolyCoeffs):
            return NotImplemented
        return (self.d, self.k) == (other.d, other.k) and np.array_equal(self.v, other.v)

    def __hash__(self):
        return hash((self.d, self.k, self.v.tobytes()))

    def to_dict(self) -> dict:
        return {"d": self.d, "k": self.k, "coeffs": [float(c) for c in self.v]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, data) -> PolyCoeffs:
        if isinstance(data, str):
            data = json.loads(data)
        return cls(enumerate_basis(int(data["d"]), int(data["k"])), data["coeffs"])


def eval_poly(p: PolyCoeffs, x):
    """Evaluate ``q_v`` at one point (returns a float) or a batch (returns an array)."""
    pts, single = _as_points(x, p.d)
    vals = _profile_matrix(p.basis, pts) @ p.v
    return float(vals[0]) if single else vals


def multi_index_factorial(alpha) -> int:
    """``alpha! = alpha_1! * ... * alpha_d!`` as an exact integer."""
    exps = alpha.exponents if isinstance(alpha, MultiIndex) else tuple(alpha)
    out = 1
    for a in exps:
        if a < 0:
            raise ValueError("negative exponent")
        out *= math.factorial(a)
    return out


def coeff_l1_bound(B: float, d: int, k: int) -> float:
    """Upper bound ``B * (2(d+k))**(3k)`` on the l1 norm of the coefficients
    of any degree-``k`` polynomial bounded by ``B`` on the unit cube."""
    if B <= 0:
        raise ValueError("B must be positive")
    return float(B) * float(2 * (d + k)) ** (3 * k)


# --------------------------------------------------------------------------
# sup-norm search


def _grid_resolution(d: int, k: int, tol: float) -> int:
    n = math.ceil(4 * max(k, 1) / math.sqrt(tol))
    return max(2, min(n, _GRID_CAP[d]), k + 2 if d == 1 else 2)


def _critical_points_1d(v: np.ndarray) -> np.ndarray:
    """Real critical points in (0, 1) of the univariate polynomial with
    coefficients ``v`` on ``x, x**2, ...``."""
    k = v.shape[0]
    if k < 2:
        return np.zeros(0)
    # derivative coefficients, lowest order first
    deriv = v * np.arange(1, k + 1)
    nz = np.flatnonzero(np.abs(deriv) > 0)
    if nz.size == 0:
        return np.zeros(0)
    deriv = deriv[: nz[-1] + 1]
    if deriv.shape[0] < 2:
        return np.zeros(0)
    roots = np.polynomial.polynomial.polyroots(deriv)
    scale = np.max(np.abs(roots)) if roots.size else 1.0
    real = roots[np.abs(roots.imag) <= 1e-9 * max(1.0, scale)].real
    real = real[(real > 0.0) & (real < 1.0)]
    # one Newton polish step on q'
    if real.size:
        d1 = np.polynomial.polynomial.polyval(real, deriv)
        d2 = np.polynomial.polynomial.polyval(real, np.polynomial.polynomial.polyder(deriv))
        ok = np.abs(d2) > 0
        real = np.where(ok, real - np.divide(d1, d2, out=np.zeros_like(d1), where=ok), real)
        real = np.clip(real, 0.0, 1.0)
    return real


def _grid_points(d: int, n: int) -> np.ndarray:
    axis = np.linspace(0.0, 1.0, n)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _coordinate_ascent(p: PolyCoeffs, x0: np.ndarray, h: float, tol: float, sweeps: int = 8):
    from scipy.optimize import minimize_scalar

    x = x0.copy()
    best = abs(eval_poly(p, x))
    width = h
    for _ in range(sweeps):
        start = best
        for j in range(p.d):
            lo, hi = max(0.0, x[j] - width), min(1.0, x[j] + width)

            def neg(t, j=j):
                y = x.copy()
                y[j] = t
                return -abs(eval_poly(p, y))

            res = minimize_scalar(neg, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
            cands = [(res.fun, res.x), (neg(lo), lo), (neg(hi), hi)]
            fval, t = min(cands, key=lambda c: c[0])
            if -fval > best:
                best = -fval
                x[j] = t
        if best - start <= tol * 1e-3:
            break
    return best, x


def poly_sup_norm(p: PolyCoeffs, tol: float = 1e-6, seed: int = 0) -> tuple[float, np.ndarray]:
    """Maximum of ``|q_v|`` over ``[0, 1]^d`` and an approximate maximizer.

    One dimension is solved through the real critical points of ``q_v``
    on top of a grid scan.  For ``d <= 3`` a dense grid is scanned and the
    best eight grid points are refined by bounded coordinate ascent; for
    higher dimensions a seeded random point cloud replaces the grid.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    d = p.d
    if p.basis.size == 0 or not np.any(p.v):
        return 0.0, np.zeros(d)

    if d == 1:
        n = _grid_resolution(1, p.k, tol)
        cand = np.concatenate([np.linspace(0.0, 1.0, n), _critical_points_1d(p.v)])
        vals = np.abs(_profile_matrix(p.basis, cand[:, None]) @ p.v)
        i = int(np.argmax(vals))
        return float(vals[i]), np.array([cand[i]])

    if d <= 3:
        n = _grid_resolution(d, p.k, tol)
        pts = _grid_points(d, n)
        h = 1.0 / (n - 1)
    else:
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        pts = np.vstack([_grid_points(d, 2), rng.random((_RANDOM_POINTS_HIGH_D, d))])
        h = 0.25
    vals = np.abs(_profile_matrix(p.basis, pts) @ p.v)
    # stable sort: ties resolved by lowest lexicographic grid point
    order = np.argsort(-vals, kind="stable")[:8]
    best_val, best_x = float(vals[order[0]]), pts[order[0]].copy()
    for idx in order:
        val, x = _coordinate_ascent(p, pts[idx], h, tol)
        if val > best_val + 1e-15:
            best_val, best_x = val, x
    return best_val, best_x

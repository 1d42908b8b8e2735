"""Seeded rejection samplers: cube -> uniform on S -> P(v, S) or P(f, S)."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from ._rng import derive_rng
from .basis import PolyCoeffs, _profile_matrix, poly_sup_norm
from .density import LogDensity
from .integrate import SurvivalSet

__all__ = [
    "SamplerStats",
    "SamplingError",
    "sample_uniform_set",
    "sample_exp_family",
    "sample_target",
    "write_samples_csv",
]


class SamplingError(RuntimeError):
    pass


@dataclass(frozen=True)
class SamplerStats:
    proposals: int = 0
    accepts: int = 0

    @property
    def acceptance_rate(self) -> float:
        return self.accepts / self.proposals if self.proposals else 0.0

    @property
    def stderr(self) -> float:
        """Binomial standard error of the acceptance rate."""
        if not self.proposals:
            return 0.0
        r = self.acceptance_rate
        return math.sqrt(r * (1 - r) / self.proposals)

    def __add__(self, other: SamplerStats) -> SamplerStats:
        return SamplerStats(self.proposals + other.proposals, self.accepts + other.accepts)

    def to_dict(self) -> dict:
        return {"proposals": self.proposals, "accepts": self.accepts,
                "acceptance_rate": self.acceptance_rate}


def _proposal_cap(n: int, rate: float) -> int:
    return math.ceil((n / rate) * math.log(n * 1e3))


def _rejection(n, d, seed, tag, accept_fn, expected_rate, cap, cap_message):
    """Draw cube points in seeded batches until ``n`` pass ``accept_fn``.

    ``accept_fn(x, u)`` returns ``(counted, accepted)`` masks: which draws
    count as proposals for the statistics and which are accepted.
    """
    if n == 0:
        return np.zeros((0, d)), SamplerStats()
    out, have, cube_draws = [], 0, 0
    proposals = accepts = 0
    batch_idx = 0
    while have < n:
        need = n - have
        size = int(min(max(64, math.ceil(1.2 * need / expected_rate) + 16), 1 << 20))
        size = min(size, cap - cube_draws) if cap - cube_draws > 0 else 0
        if size <= 0:
            raise SamplingError(cap_message)
        rng = derive_rng(seed, tag, batch_idx)
        x = rng.random((size, d))
        u = rng.random(size)
        counted, accepted = accept_fn(x, u)
        # keep acceptance order; truncate the batch at the n-th acceptance
        idx = np.flatnonzero(accepted)
        if idx.size > need:
            last = idx[need - 1]
            idx = idx[:need]
            counted = counted[: last + 1]
        proposals += int(np.count_nonzero(counted))
        accepts += int(idx.size)
        out.append(x[idx])
        have += idx.size
        cube_draws += size
        batch_idx += 1
    return np.concatenate(out), SamplerStats(proposals, accepts)


def sample_uniform_set(S: SurvivalSet, n: int, seed: int = 0) -> tuple[np.ndarray, SamplerStats]:
    """``n`` i.i.d. uniform points on ``S`` by rejection from the cube.

    Statistics count cube proposals.  More than
    ``ceil((n / vol) * ln(1000 n))`` proposals raise :class:`SamplingError`.
    """
    if S.volume_estimate <= 0:
        raise ValueError("empty or negligible survival set")
    alpha = S.volume_estimate

    def accept(x, u):
        inside = S.contains(x)
        return np.ones(len(x), dtype=bool), inside

    cap = _proposal_cap(n, alpha) if n else 0
    return _rejection(n, S.d, seed, "uniform-set", accept, alpha, cap,
                      "survival set volume too small for requested sample size")


def sample_exp_family(v: PolyCoeffs, S: SurvivalSet, C: float, n: int, seed: int = 0,
                      tol: float = 1e-6) -> tuple[np.ndarray, SamplerStats]:
    """``n`` draws from ``P(v, S)``.

    A uniform point ``x`` on ``S`` is accepted with probability
    ``exp(q_v(x) - C)``; this needs ``sup |q_v| <= C``, which is checked
    first.  Statistics count uniform-on-S proposals, so the acceptance rate
    is at least ``exp(-2C)``.
    """
    sup, where = poly_sup_norm(v, tol=tol)
    if sup > C + tol:
        raise ValueError(f"coefficients leave the bounded set: sup|q| = {sup:.6g} > C = {C} at x = {where}")
    alpha = S.volume_estimate

    def accept(x, u):
        inside = S.contains(x)
        q = _profile_matrix(v.basis, x) @ v.v
        return inside, inside & (np.log(u) < q - C)

    cap = _proposal_cap(n, alpha * math.exp(-2 * C)) if n else 0
    return _rejection(n, S.d, seed, "exp-family", accept, alpha * math.exp(-2 * C), cap,
                      "survival set volume too small for requested sample size")


def sample_target(f: LogDensity, S: SurvivalSet, n: int, seed: int = 0) -> tuple[np.ndarray, SamplerStats]:
    """``n`` draws from ``P(f, S)`` with envelope ``exp(f - B)`` over uniform-on-S proposals."""
    if f.d != S.d:
        raise ValueError("target and survival set have different dimensions")
    B = float(f.B)

    def accept(x, u):
        inside = S.contains(x)
        vals = np.full(len(x), -np.inf)
        vals[inside] = f(x[inside])
        over = vals > B * (1 + 1e-12) + 1e-12
        if np.any(over):
            i = int(np.flatnonzero(over)[0])
            raise SamplingError(f"envelope violated: f(x) = {vals[i]:.6g} > B = {B} at x = {x[i].tolist()}")
        return inside, inside & (np.log(u) < vals - B)

    rate = S.volume_estimate * math.exp(-2 * B)
    cap = _proposal_cap(n, rate) if n else 0
    return _rejection(n, S.d, seed, "target", accept, rate, cap,
                      "survival set volume too small for requested sample size")


def write_samples_csv(points: np.ndarray, path) -> None:
    pts = np.asarray(points, dtype=float)
    d = pts.shape[1] if pts.ndim == 2 else 1
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i + 1}" for i in range(d)])
        for row in pts.reshape(-1, d):
            w.writerow([repr(float(c)) for c in row])

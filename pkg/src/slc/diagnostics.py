"""Convergence diagnostics: Gelman-Rubin PSRF, distances and a mixing-time bound."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .distributions import _log_binom

VARIANTS = ("classic", "brooks-gelman")


def _as_chains(chains) -> np.ndarray:
    X = np.asarray(chains, dtype=float)
    if X.ndim != 2:
        raise ValueError("expected a (chains, length) array")
    if X.shape[0] < 2:
        raise ValueError("need at least two chains")
    if X.shape[1] < 2:
        raise ValueError("need chains of length at least two")
    if not np.all(np.isfinite(X)):
        raise ValueError("chain statistics must be finite")
    return X


def _rhat(W, B, T, m, variant):
    V = (T - 1) / T * W + B / T
    if variant == "brooks-gelman":
        V = V + B / (m * T)
    return np.sqrt(V / W)


def psrf(chains, variant: str = "classic") -> float:
    """Potential scale reduction factor of equal-length scalar chains.

    R = sqrt(((T-1)/T W + B/T) / W), with W the mean within-chain variance and
    B = T times the variance of the chain means (both with ddof=1).
    ``brooks-gelman`` adds the (m+1)/m between-chain correction.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    X = _as_chains(chains)
    m, T = X.shape
    W = X.var(axis=1, ddof=1).mean()
    if W <= 0:
        raise ValueError("within-chain variance is zero")
    B = T * X.mean(axis=1).var(ddof=1)
    return float(_rhat(W, B, T, m, variant))


def psrf_curve(chains, iterations, variant: str = "classic") -> np.ndarray:
    """R-hat of the prefixes ``chains[:, :t + 1]`` for each t in ``iterations``.

    Uses running sums, so the whole curve costs one pass.  Checkpoints where
    the within-chain variance vanishes get ``inf``.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    X = _as_chains(chains)
    m, total = X.shape
    its = np.asarray(iterations, dtype=np.int64)
    if its.size and (its.min() < 1 or its.max() >= total):
        raise ValueError("checkpoints must lie in [1, length - 1]")
    Y = X - X.mean()
    s1 = np.cumsum(Y, axis=1)[:, its]
    s2 = np.cumsum(Y * Y, axis=1)[:, its]
    T = (its + 1).astype(float)
    means = s1 / T
    within = (s2 - T * means**2) / (T - 1)
    W = within.mean(axis=0)
    B = T * means.var(axis=0, ddof=1)
    out = np.full(its.shape, np.inf)
    ok = W > 1e-300
    out[ok] = _rhat(W[ok], B[ok], T[ok], m, variant)
    return out


@dataclass
class PsrfReport:
    checkpoints: list[tuple[int, float]]
    threshold: float = 1.05
    mixed_at: int | None = field(default=None)

    @classmethod
    def from_checkpoints(cls, iterations, rhats, threshold: float = 1.05) -> PsrfReport:
        pts = [(int(t), float(r)) for t, r in zip(iterations, rhats)]
        mixed = next((t for t, r in pts if r < threshold), None)
        return cls(pts, threshold, mixed)

    @property
    def iterations(self) -> list[int]:
        return [t for t, _ in self.checkpoints]

    @property
    def rhats(self) -> list[float]:
        return [r for _, r in self.checkpoints]


def checkpoints(length: int, check_every: int, burnin: int = 0) -> np.ndarray:
    """Iterations check_every, 2 check_every, ... that fit in a trace of ``length`` states."""
    if check_every < 1:
        raise ValueError("check_every must be positive")
    its = np.arange(check_every, length, check_every, dtype=np.int64)
    return its[its - burnin >= 1]


def empirical_mixing_time(traces: Sequence, threshold: float = 1.05, check_every: int = 1000,
                          burnin: int = 0, variant: str = "classic") -> PsrfReport:
    """PSRF on growing prefixes at multiples of ``check_every``.

    ``traces`` are ChainTrace objects or raw statistic arrays.  The first
    ``burnin`` states are dropped before each prefix is scored.
    """
    arrays = [np.asarray(getattr(t, "stats", t), dtype=float) for t in traces]
    if len(arrays) < 2:
        raise ValueError("need at least two traces")
    if len({a.size for a in arrays}) != 1:
        raise ValueError("traces must have the same length")
    X = np.vstack(arrays)
    its = checkpoints(X.shape[1], check_every, burnin)
    if its.size == 0:
        return PsrfReport([], threshold, None)
    rhat = psrf_curve(X[:, burnin:], its - burnin, variant)
    return PsrfReport.from_checkpoints(its, rhat, threshold)


def _check_normalized(p: Mapping, name: str):
    total = math.fsum(p.values())
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"{name} sums to {total}, not 1")


def l1_distance(p: Mapping, q: Mapping) -> float:
    """sum_x |p(x) - q(x)| over the union of supports."""
    _check_normalized(p, "p")
    _check_normalized(q, "q")
    keys = set(p) | set(q)
    return math.fsum(abs(p.get(x, 0.0) - q.get(x, 0.0)) for x in keys)


def tv_distance(p: Mapping, q: Mapping) -> float:
    return 0.5 * l1_distance(p, q)


def empirical_law(samples) -> dict:
    counts: dict = {}
    for s in samples:
        counts[s] = counts.get(s, 0) + 1
    total = sum(counts.values())
    return {s: c / total for s, c in counts.items()}


def mixing_time_bound(d: int, s0_ground: int, log_nu_s0: float, epsilon: float) -> float:
    """Upper bound on the epsilon-mixing time of the chain started at S0.

    (1 / (e sqrt(2 pi))) d^(5/2) 2^d (log log(C(d, |S0|) / nu(S0)) + log(1 / (2 eps^2))),
    with ``log_nu_s0`` the log of the normalized probability of S0.
    """
    if d < 8:
        raise ValueError("bound requires d >= 8")
    if not 0 <= s0_ground <= d:
        raise ValueError("|S0 & [n]| must lie in [0, d]")
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    if log_nu_s0 > 0 or math.isnan(log_nu_s0):
        raise ValueError("log_nu_s0 must be the log of a probability")
    inner = _log_binom(d, s0_ground) - log_nu_s0
    if inner <= 1.0:
        raise ValueError("C(d,|S0|)/nu(S0) must exceed e")
    log_prefactor = -1.0 - 0.5 * math.log(2 * math.pi) + 2.5 * math.log(d) + d * math.log(2)
    return math.exp(log_prefactor) * (math.log(inner) + math.log(1.0 / (2 * epsilon**2)))

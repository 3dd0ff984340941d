"""Subset weight functions, PSD kernels and the extended-space weights.

All weights are unnormalized and handled in log space.  Ground elements are
``0 .. n-1``; on the extended ground set the dummy elements are
``n .. n+d-1``.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np
from scipy.special import gammaln

SPECTRUM_KINDS = ("smooth", "one-big", "step")
PIVOT_TOL = 1e-12


def _frozen(S: Iterable[int]) -> frozenset[int]:
    return S if isinstance(S, frozenset) else frozenset(int(i) for i in S)


def pivot_tol(L: np.ndarray) -> float:
    """Absolute pivot threshold for factorizations of submatrices of ``L``."""
    if L.shape[0] == 0:
        return PIVOT_TOL
    return PIVOT_TOL * max(1.0, float(np.max(np.abs(np.diag(L)))))


def logdet_psd(A: np.ndarray, tol: float | None = None) -> float:
    """log det of a PSD matrix by Cholesky; -inf when a pivot is <= tol.

    ``tol`` defaults to 1e-12 * max(1, max diag).  An empty matrix has
    determinant 1.
    """
    if A.shape[0] == 0:
        return 0.0
    if tol is None:
        tol = pivot_tol(A)
    try:
        C = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        return -math.inf
    piv = np.diag(C) ** 2
    if np.min(piv) <= tol:
        return -math.inf
    return float(np.sum(np.log(piv)))


# -- kernels ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """Symmetric PSD kernel with the spectrum it was built from."""

    L: np.ndarray
    spectrum_kind: str = "custom"
    seed: int = 0
    spectrum: np.ndarray | None = None

    def __post_init__(self):
        L = np.asarray(self.L, dtype=float)
        if L.ndim != 2 or L.shape[0] != L.shape[1]:
            raise ValueError(f"kernel must be square, got shape {L.shape}")
        if not np.allclose(L, L.T, rtol=0, atol=1e-12 * max(1.0, np.max(np.abs(L), initial=0))):
            raise ValueError("kernel is not symmetric")
        if L.shape[0] and np.linalg.eigvalsh(L)[0] < -1e-9 * max(1.0, np.max(np.abs(L))):
            raise ValueError("kernel is not positive semi-definite")
        object.__setattr__(self, "L", L)

    @property
    def n(self) -> int:
        return self.L.shape[0]


def spectrum_preset(kind: str, n: int) -> np.ndarray:
    """Eigenvalue presets used in the mixing experiments.

    ``smooth``: 1, 2, ..., n.  ``one-big``: n, (n-1)/2, ..., 1/2.
    ``step``: floor(n/5) copies of n followed by 1/n for the rest.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if kind == "smooth":
        return np.arange(1, n + 1, dtype=float)
    if kind == "one-big":
        return np.array([float(n)] + [(n - j) / 2 for j in range(1, n)])
    if kind == "step":
        big = n // 5
        return np.array([float(n)] * big + [1.0 / n] * (n - big))
    raise ValueError(f"unknown spectrum kind {kind!r}; choose from {SPECTRUM_KINDS}")


def random_psd(n: int, spectrum, seed: int, kind: str = "custom") -> KernelSpec:
    """L = Q diag(spectrum) Q^T with Q Haar-distributed, reproducible per seed."""
    lam = np.asarray(spectrum, dtype=float)
    if lam.shape != (n,):
        raise ValueError(f"spectrum has length {lam.size}, expected {n}")
    if np.any(lam < 0):
        raise ValueError("spectrum entries must be non-negative")
    rng = np.random.default_rng(seed)
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    Q = Q * np.where(np.diag(R) < 0, -1.0, 1.0)
    L = (Q * lam) @ Q.T
    L = 0.5 * (L + L.T)
    return KernelSpec(L, spectrum_kind=kind, seed=seed, spectrum=lam)


def preset_kernel(n: int, kind: str, seed: int) -> KernelSpec:
    return random_psd(n, spectrum_preset(kind, n), seed, kind=kind)


def write_kernel(spec: KernelSpec, stream: TextIO) -> None:
    stream.write(f"{spec.n} {spec.seed} {spec.spectrum_kind}\n")
    for row in spec.L:
        stream.write(" ".join(repr(float(v)) for v in row) + "\n")


def read_kernel(stream: TextIO) -> KernelSpec:
    header = stream.readline().split()
    if len(header) != 3:
        raise ValueError("kernel header must be 'n seed kind'")
    n, seed, kind = int(header[0]), int(header[1]), header[2]
    rows = [line.split() for line in stream if line.strip()]
    if len(rows) != n or any(len(r) != n for r in rows):
        raise ValueError(f"kernel body must be {n} rows of {n} values")
    return KernelSpec(np.array(rows, dtype=float), spectrum_kind=kind, seed=seed)


# -- subset weights ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SubsetWeightFn:
    """nu(S) = pi(S)^alpha * 1{|S| <= d_cap}, evaluated in log space.

    ``kind`` selects how pi is given: ``sqrt-det`` (pi(S) = sqrt det L_S),
    ``table`` (explicit subset -> weight map, missing sets weigh 0) or
    ``modular`` (pi(S) = prod of per-element weights).  Sets with pi(S) = 0
    stay outside the support for every alpha, including alpha = 0.
    """

    n: int
    d_cap: int
    alpha: float = 1.0
    kind: str = "modular"
    kernel: KernelSpec | None = None
    table: Mapping[frozenset, float] | None = None
    weights: np.ndarray | None = None
    _log_w: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.d_cap < 0:
            raise ValueError("d_cap must be non-negative")
        if self.kind == "sqrt-det":
            if self.kernel is None or self.kernel.n != self.n:
                raise ValueError("sqrt-det weights need a kernel of matching size")
        elif self.kind == "modular":
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (self.n,) or np.any(w < 0):
                raise ValueError("modular weights must be n non-negative values")
            with np.errstate(divide="ignore"):
                object.__setattr__(self, "_log_w", np.log(w))
        elif self.kind == "table":
            tab = {}
            for S, w in (self.table or {}).items():
                S = _frozen(S)
                if any(not 0 <= i < self.n for i in S):
                    raise ValueError(f"table set {sorted(S)} outside ground set")
                if w < 0:
                    raise ValueError("table weights must be non-negative")
                tab[S] = float(w)
            object.__setattr__(self, "table", tab)
        else:
            raise ValueError(f"unknown weight kind {self.kind!r}")

    # constructors
    @classmethod
    def sqrt_det(cls, kernel: KernelSpec, d_cap: int | None = None, alpha: float = 1.0):
        return cls(kernel.n, kernel.n if d_cap is None else d_cap, alpha, "sqrt-det", kernel=kernel)

    @classmethod
    def modular(cls, weights, d_cap: int | None = None, alpha: float = 1.0):
        w = np.asarray(weights, dtype=float)
        return cls(w.size, w.size if d_cap is None else d_cap, alpha, "modular", weights=w)

    @classmethod
    def uniform(cls, n: int, d_cap: int | None = None):
        return cls.modular(np.ones(n), d_cap)

    @classmethod
    def from_table(cls, n: int, table: Mapping, d_cap: int | None = None, alpha: float = 1.0):
        return cls(n, n if d_cap is None else d_cap, alpha, "table", table=table)

    def uncapped(self) -> SubsetWeightFn:
        return SubsetWeightFn(
            self.n, self.n, self.alpha, self.kind, self.kernel, self.table, self.weights
        )

    def with_cap(self, d_cap: int) -> SubsetWeightFn:
        return SubsetWeightFn(
            self.n, d_cap, self.alpha, self.kind, self.kernel, self.table, self.weights
        )

    @property
    def pivot_tol(self) -> float:
        return pivot_tol(self.kernel.L) if self.kernel is not None else PIVOT_TOL

    def log_pi(self, S: frozenset[int]) -> float:
        if self.kind == "sqrt-det":
            idx = sorted(S)
            return 0.5 * logdet_psd(self.kernel.L[np.ix_(idx, idx)], self.pivot_tol)
        if self.kind == "modular":
            return float(sum(self._log_w[i] for i in sorted(S)))
        w = self.table.get(S, 0.0)
        return math.log(w) if w > 0 else -math.inf

    def log_weight(self, S: Iterable[int]) -> float:
        S = _frozen(S)
        for i in S:
            if not 0 <= i < self.n:
                raise IndexError(f"element {i} outside ground set of size {self.n}")
        if len(S) > self.d_cap:
            return -math.inf
        lp = self.log_pi(S)
        if lp == -math.inf:
            return -math.inf
        return self.alpha * lp

    def weight(self, S: Iterable[int]) -> float:
        return math.exp(self.log_weight(S))

    def log_weights_extend(self, base: Iterable[int], candidates, incremental: bool = True) -> np.ndarray:
        """log nu(base + j) for each candidate j not in ``base``.

        For sqrt-det weights the incremental path factors L_base once and reads
        each extension off its Schur complement; otherwise every set is
        evaluated from scratch.
        """
        base = sorted(_frozen(base))
        cand = np.asarray(list(candidates), dtype=np.int64)
        if len(base) + 1 > self.d_cap:
            return np.full(cand.size, -math.inf)
        if not incremental or self.kind != "sqrt-det":
            return np.array([self.log_weight(set(base) | {int(j)}) for j in cand])
        L = self.kernel.L
        tol = self.pivot_tol
        if base:
            Lb = L[np.ix_(base, base)]
            ld_base = logdet_psd(Lb, tol)
            if ld_base == -math.inf:
                return np.full(cand.size, -math.inf)
            C = np.linalg.cholesky(Lb)
            V = np.linalg.solve(C, L[np.ix_(base, cand)])
            schur = L[cand, cand] - np.sum(V * V, axis=0)
        else:
            ld_base = 0.0
            schur = L[cand, cand].copy()
        out = np.full(cand.size, -math.inf)
        ok = schur > tol
        out[ok] = self.alpha * 0.5 * (ld_base + np.log(schur[ok]))
        return out


def log_weight(nu: SubsetWeightFn, S: Iterable[int]) -> float:
    return nu.log_weight(S)


def iter_subsets(n: int, max_size: int):
    """All subsets of range(n) of size <= max_size, by size then lexicographically."""
    for r in range(min(n, max_size) + 1):
        for combo in itertools.combinations(range(n), r):
            yield frozenset(combo)


# -- extended space ------------------------------------------------------------


def _log_binom(n: int, k: int) -> float:
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


@dataclass(frozen=True, eq=False)
class ExtendedWeightCtx:
    """Weights on d-subsets of the extended ground set [n + d].

    ``log_nu_sh`` is the symmetric homogenization whose dummy marginal is nu;
    ``log_mu`` the rescaled proposal target and ``log_hd`` the plain scaled
    homogenization, both differing from nu_sh only through k = |S & [n]|.
    """

    base: SubsetWeightFn
    d: int | None = None

    def __post_init__(self):
        if self.d is None:
            object.__setattr__(self, "d", self.base.d_cap)
        if self.d < 1:
            raise ValueError("extension degree must be at least 1")

    @property
    def n(self) -> int:
        return self.base.n

    def split(self, S: Iterable[int]) -> tuple[frozenset[int], int]:
        S = _frozen(S)
        if len(S) != self.d:
            raise ValueError(f"extended set must have size {self.d}, got {len(S)}")
        if any(not 0 <= i < self.n + self.d for i in S):
            raise ValueError("extended set has elements outside [n + d]")
        ground = frozenset(i for i in S if i < self.n)
        return ground, len(ground)

    def log_sh_factor(self, k: int) -> float:
        return -_log_binom(self.d, k)

    def log_mu_factor(self, k: int) -> float:
        d = self.d
        return (d - k) * math.log(d / math.e) - gammaln(d - k + 1) - _log_binom(d, k)

    def log_hd_factor(self, k: int) -> float:
        return -gammaln(self.d - k + 1) - _log_binom(self.d, k)

    def proposal_factors(self, proposal: str = "mu") -> np.ndarray:
        fn = {"mu": self.log_mu_factor, "hd": self.log_hd_factor}[proposal]
        return np.array([fn(k) for k in range(self.d + 1)])

    def log_nu_sh(self, S: Iterable[int]) -> float:
        ground, k = self.split(S)
        lw = self.base.log_weight(ground)
        return lw if lw == -math.inf else self.log_sh_factor(k) + lw

    def log_mu(self, S: Iterable[int]) -> float:
        ground, k = self.split(S)
        lw = self.base.log_weight(ground)
        return lw if lw == -math.inf else self.log_mu_factor(k) + lw

    def log_hd(self, S: Iterable[int]) -> float:
        ground, k = self.split(S)
        lw = self.base.log_weight(ground)
        return lw if lw == -math.inf else self.log_hd_factor(k) + lw

    def states(self):
        """All d-subsets of [n + d] with positive nu_sh weight, lexicographic."""
        for combo in itertools.combinations(range(self.n + self.d), self.d):
            ground = frozenset(i for i in combo if i < self.n)
            if self.base.log_weight(ground) > -math.inf:
                yield combo


def log_nu_sh(ctx: ExtendedWeightCtx, S) -> float:
    return ctx.log_nu_sh(S)


def log_mu(ctx: ExtendedWeightCtx, S) -> float:
    return ctx.log_mu(S)


def check_ratio_bounds(ctx: ExtendedWeightCtx, max_states: int = 10**6) -> bool:
    """Check sqrt(2 pi)/2^d Z <= nu_sh(S)/mu(S) <= e sqrt(d) Z on the support.

    nu_sh and mu are normalized by enumeration; Z is the partition function
    of mu written against the normalized nu_sh.
    """
    if math.comb(ctx.n + ctx.d, ctx.d) > max_states:
        raise ValueError("extended state space too large to enumerate")
    states = list(ctx.states())
    lsh = np.array([ctx.log_nu_sh(S) for S in states])
    lmu = np.array([ctx.log_mu(S) for S in states])
    c_sh, c_mu = np.max(lsh), np.max(lmu)
    log_z_sh = c_sh + math.log(np.sum(np.exp(lsh - c_sh)))
    log_z_mu = c_mu + math.log(np.sum(np.exp(lmu - c_mu)))
    # Z = sum_S mu_unnorm(S) * nu_sh(S) / nu_sh_unnorm(S)
    log_z = log_z_mu - log_z_sh
    log_ratio = (lsh - log_z_sh) - (lmu - log_z_mu)
    d = ctx.d
    lo = 0.5 * math.log(2 * math.pi) - d * math.log(2) + log_z
    hi = 1.0 + 0.5 * math.log(d) + log_z
    slack = 1e-12
    return bool(np.all(log_ratio >= lo - slack) and np.all(log_ratio <= hi + slack))

"""Greedy mode finding for weakly (log-)submodular set functions.

Set functions are plain callables on ``frozenset`` of 0-based indices.
All tie-breaks go to the smallest element index; exhaustive searches visit
sets by size, then lexicographically, and keep the first maximizer.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .distributions import SubsetWeightFn
from .sampler import make_rng
from .verify import pair_gaps

SetFn = Callable[[frozenset], float]

MAX_BRUTE_N = 20
MAX_WEAK_CHECK_N = 14
EMPTY = frozenset()


@dataclass
class GreedyResult:
    selected: frozenset
    value: float
    trace: list = field(default_factory=list)

    def sorted(self) -> list[int]:
        return sorted(self.selected)


def gamma_weak(d: int) -> float:
    """Multiplicative slack 4(1 - 1/d) of the weak log-submodularity inequality."""
    if d < 2:
        raise ValueError("gamma_weak needs d >= 2")
    return 4.0 * (1.0 - 1.0 / d)


def weak_submodularity_gap(rho: SetFn, n: int) -> float:
    """max over (S, i, j) of rho(S) + rho(S+ij) - rho(S+i) - rho(S+j), finite terms only."""
    if n > MAX_WEAK_CHECK_N:
        raise ValueError(f"exhaustive scan limited to n <= {MAX_WEAK_CHECK_N}")
    cache: dict = {}

    def f(S):
        if S not in cache:
            cache[S] = rho(S)
        return cache[S]

    worst = -math.inf
    for size in range(n - 1):
        for S in itertools.combinations(range(n), size):
            S = frozenset(S)
            rest = [x for x in range(n) if x not in S]
            for i, j in itertools.combinations(rest, 2):
                vals = (f(S), f(S | {i, j}), f(S | {i}), f(S | {j}))
                if all(math.isfinite(v) for v in vals):
                    worst = max(worst, vals[0] + vals[1] - vals[2] - vals[3])
    return worst


def check_weak_log_submodular(nu: SubsetWeightFn, gamma: float, tol: float = 1e-10) -> tuple[bool, float]:
    """Test nu(S) nu(S+ij) <= gamma nu(S+i) nu(S+j) on all positive quadruples.

    Returns (holds, worst_gap) with worst_gap the largest LHS - RHS in logs.
    """
    if nu.n > MAX_WEAK_CHECK_N:
        raise ValueError(f"exhaustive scan limited to n <= {MAX_WEAK_CHECK_N}")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    worst = max(pair_gaps(nu), default=-math.inf) - math.log(gamma)
    return worst <= tol, worst


class DecomposedObjective:
    """rho = eta - c with modular costs c_e = max{rho([n] - e) - rho([n]), 0}.

    rho is shifted to vanish at the empty set; ``offset`` holds the shift.
    """

    def __init__(self, rho: SetFn, n: int, cost_fn: SetFn | None = None):
        if n < 1:
            raise ValueError("ground set must be non-empty")
        self.n = n
        self._raw = rho
        self.offset = float(rho(EMPTY))
        if not math.isfinite(self.offset):
            raise ValueError("rho(empty set) must be finite")
        if self.offset != 0.0:
            warnings.warn(f"shifting rho by {-self.offset} so that rho(empty) = 0", stacklevel=2)
        cost_fn = rho if cost_fn is None else cost_fn
        full = frozenset(range(n))
        top = cost_fn(full)
        if not math.isfinite(top):
            raise ValueError("rho([n]) must be finite to define the costs")
        self.costs = np.array([max(cost_fn(full - {e}) - top, 0.0) for e in range(n)])
        self._cache: dict = {}

    def rho(self, S) -> float:
        S = frozenset(S)
        if S not in self._cache:
            self._cache[S] = self._raw(S) - self.offset
        return self._cache[S]

    def cost(self, S) -> float:
        return float(sum(self.costs[e] for e in sorted(S)))

    def eta(self, S) -> float:
        return self.rho(S) + self.cost(S)


def _weight(k: int, i: int) -> float:
    # 0 ** 0 == 1 keeps k = 1 a plain greedy step
    return (1.0 - 1.0 / k) ** (k - i)


def _phi(obj: DecomposedObjective, i: int, k: int, S) -> float:
    return _weight(k, i) * obj.eta(S) - obj.cost(S)


def _psi(obj: DecomposedObjective, i: int, k: int, S, e: int) -> float:
    S = frozenset(S)
    gain = obj.eta(S | {e}) - obj.eta(S)
    return max(0.0, float(_weight(k, i + 1) * gain - obj.costs[e]))


def distorted_greedy(obj: DecomposedObjective, k: int) -> GreedyResult:
    """k rounds adding the best Phi_(i+1) increment while it is strictly positive."""
    if k < 1:
        raise ValueError("k must be >= 1")
    S = EMPTY
    trace = []
    for i in range(k):
        w = _weight(k, i + 1)
        best, best_gain = None, -math.inf
        base = obj.eta(S)
        for e in range(obj.n):
            if e in S:
                continue
            gain = float(w * (obj.eta(S | {e}) - base) - obj.costs[e])
            if gain > best_gain:
                best, best_gain = e, gain
        accepted = bool(best is not None and best_gain > 0)
        if accepted:
            S = S | {best}
        trace.append((best, best_gain, accepted))
    return GreedyResult(S, obj.rho(S) + obj.offset, trace)


def _log_objective(nu: SubsetWeightFn, k: int) -> DecomposedObjective:
    if k > nu.d_cap:
        raise ValueError(f"k = {k} exceeds the cardinality cap {nu.d_cap}")
    lw0 = nu.log_weight(EMPTY)
    if lw0 == -math.inf:
        raise ValueError("nu(empty set) must be positive")
    free = nu.uncapped()
    return DecomposedObjective(lambda S: nu.log_weight(S) - lw0, nu.n,
                               cost_fn=lambda S: free.log_weight(S) - lw0)


def distorted_greedy_log(nu: SubsetWeightFn, k: int) -> GreedyResult:
    """Distorted greedy on log(nu / nu(empty)); value is nu(R) on the original scale.

    Costs use the uncapped weights so that rho([n]) is defined; every set the
    greedy visits has size <= k <= d_cap, where capped and uncapped agree.
    """
    obj = _log_objective(nu, k)
    res = distorted_greedy(obj, k)
    return GreedyResult(res.selected, math.exp(nu.log_weight(res.selected)), res.trace)


def double_greedy(nu: SetFn, gamma: float, n: int, seed=0) -> GreedyResult:
    """Randomized double greedy with additive slack (n - i) gamma at step i (1-based)."""
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    rng = make_rng(seed)
    X, Y = set(), set(range(n))
    fx, fy = nu(frozenset(X)), nu(frozenset(Y))
    trace = []
    for i in range(n):
        slack = (n - 1 - i) * gamma
        fxi = nu(frozenset(X | {i}))
        fyi = nu(frozenset(Y - {i}))
        a = max(fxi - fx + slack, 0.0)
        b = max(fyi - fy + slack, 0.0)
        p = a / (a + b) if a + b > 0 else 0.0
        add = bool(rng.random() < p)
        if add:
            X.add(i)
            fx = fxi
        else:
            Y.discard(i)
            fy = fyi
        trace.append((i, p, add))
    return GreedyResult(frozenset(X), fx, trace)


def monotone_greedy(nu: SetFn, n: int, k: int) -> GreedyResult:
    """k rounds of argmax_i nu(S + i); the caller guarantees nu is increasing."""
    if not 0 <= k <= n:
        raise ValueError("k must lie in [0, n]")
    S = EMPTY
    cur = nu(S)
    trace = []
    for _ in range(k):
        best, best_val = None, -math.inf
        for e in range(n):
            if e in S:
                continue
            v = nu(S | {e})
            if v > best_val:
                best, best_val = e, v
        S = S | {best}
        trace.append((best, best_val - cur, True))
        cur = best_val
    return GreedyResult(S, cur, trace)


def brute_force_opt(nu: SetFn, n: int, k: int | None = None) -> GreedyResult:
    """Exact argmax of nu over |S| <= k (all subsets when k is None)."""
    if n > MAX_BRUTE_N:
        raise ValueError(f"brute force limited to n <= {MAX_BRUTE_N}")
    k = n if k is None else k
    if k < 0:
        raise ValueError("k must be non-negative")
    best, best_val = EMPTY, nu(EMPTY)
    for size in range(1, min(k, n) + 1):
        for S in itertools.combinations(range(n), size):
            v = nu(frozenset(S))
            if v > best_val:
                best, best_val = frozenset(S), v
    return GreedyResult(best, best_val)


def distorted_greedy_bound(eta_opt: float, c_opt: float, ell: int, gamma: float) -> float:
    """(1 - 1/e)(eta(OPT) - l(l-1) gamma / 2) - c(OPT)."""
    return (1.0 - 1.0 / math.e) * (eta_opt - 0.5 * ell * (ell - 1) * gamma) - c_opt


def log_distorted_greedy_bound(log_eta_opt: float, log_c_opt: float, ell: int, gamma: float) -> float:
    """gamma^(-l(l-1)(1-1/e)/2) eta(OPT)^(1-1/e) / c(OPT), for multiplicative gamma > 0."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    frac = 1.0 - 1.0 / math.e
    return math.exp(-0.5 * ell * (ell - 1) * frac * math.log(gamma) + frac * log_eta_opt - log_c_opt)


def monotone_greedy_bound(opt: float, ell: int, k: int, gamma: float) -> float:
    """(1 - e^(-l/k)) nu(OPT) - k(k-1)/2 (1 - (1 - 1/k)^l) gamma."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return (1.0 - math.exp(-ell / k)) * opt - 0.5 * k * (k - 1) * (1.0 - (1.0 - 1.0 / k) ** ell) * gamma


def double_greedy_bound(opt: float, n: int, gamma: float) -> float:
    """nu(OPT) / 2 - 3 n (n - 1) gamma / 16."""
    return 0.5 * opt - 3.0 / 16.0 * n * (n - 1) * gamma

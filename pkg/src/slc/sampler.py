"""Metropolis-Hastings sampling of nu through its symmetric homogenization.

States are sorted tuples of size d over the extended ground set [n + d]
(ground elements ``0..n-1``, labeled dummies ``n..n+d-1``).  One step draws
three uniforms: which member to drop, which completion to propose, and the
accept/reject coin.  Both engines below consume them identically, so a seed
fixes the trajectory whichever engine runs it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import ExtendedWeightCtx, SubsetWeightFn, iter_subsets
from ._engine import run_block

PROPOSALS = ("mu", "hd")
STATISTICS = ("log_weight", "k")
MAX_TRANSITION_STATES = 5000

ExtendedState = tuple[int, ...]


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.PCG64(seed))


def chain_seeds(master_seed: int, chains: int, *key: int) -> list[np.random.SeedSequence]:
    """Independent per-chain streams derived from (master seed, key, chain index)."""
    root = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return root.spawn(chains)


def marginalize(S, n: int) -> frozenset[int]:
    return frozenset(i for i in S if i < n)


def validate_state(ctx: ExtendedWeightCtx, S) -> ExtendedState:
    members = tuple(sorted(int(i) for i in S))
    if len(set(members)) != len(members):
        raise ValueError("state has repeated elements")
    ground, _ = ctx.split(members)
    if ctx.base.log_weight(ground) == -math.inf:
        raise ValueError(f"state {members} has zero weight")
    return members


def pad_with_dummies(ctx: ExtendedWeightCtx, ground) -> ExtendedState:
    ground = sorted(ground)
    dummies = list(range(ctx.n, ctx.n + ctx.d - len(ground)))
    return tuple(ground + dummies)


def default_initial_state(ctx: ExtendedWeightCtx) -> ExtendedState:
    """Top singletons by weight if their union is feasible, else no ground elements."""
    nu = ctx.base
    size = min(nu.d_cap, ctx.d, nu.n)
    singles = [(nu.log_weight({i}), i) for i in range(nu.n)]
    singles.sort(key=lambda t: (-t[0], t[1]))
    top = [i for lw, i in singles[:size] if lw > -math.inf]
    if top and nu.log_weight(top) > -math.inf:
        return pad_with_dummies(ctx, top)
    return pad_with_dummies(ctx, [])


def random_initial_state(ctx: ExtendedWeightCtx, rng: np.random.Generator, size: int | None = None,
                         tries: int = 100) -> ExtendedState:
    """Uniformly random ground set of the given (default: uniformly random) size."""
    nu = ctx.base
    top = min(nu.d_cap, ctx.d, nu.n)
    if size is not None and not 0 <= size <= top:
        raise ValueError(f"initial size must lie in [0, {top}]")
    for _ in range(tries):
        m = int(rng.integers(0, top + 1)) if size is None else size
        ground = rng.choice(nu.n, size=m, replace=False)
        if nu.log_weight(ground) > -math.inf:
            return pad_with_dummies(ctx, ground)
    return default_initial_state(ctx)


def spread_sizes(ctx: ExtendedWeightCtx, chains: int) -> list[int]:
    """Ground-set sizes evenly spaced over [0, top] for overdispersed starts."""
    top = min(ctx.base.d_cap, ctx.d, ctx.base.n)
    if chains == 1:
        return [top]
    return [round(i * top / (chains - 1)) for i in range(chains)]


# -- acceptance -------------------------------------------------------------------


def acceptance_probability(d: int, k: int, move: str, proposal: str = "mu") -> float:
    """Metropolis-Hastings acceptance for a move from k ground elements.

    ``move`` is ``remove`` (k -> k-1), ``stay`` or ``add`` (k -> k+1).  With the
    rescaled proposal mu these are min{1, e(d-k+1)/d} and min{1, d/(e(d-k))};
    with the plain H_d nu proposal the d/e factor drops out.
    """
    if not 0 <= k <= d:
        raise ValueError(f"k = {k} outside [0, {d}]")
    if proposal not in PROPOSALS:
        raise ValueError(f"unknown proposal {proposal!r}")
    scale = d / math.e if proposal == "mu" else 1.0
    if move == "stay":
        return 1.0
    if move == "remove":
        if k == 0:
            raise ValueError("cannot remove a ground element when k = 0")
        return min(1.0, (d - k + 1) / scale)
    if move == "add":
        if k == d:
            raise ValueError("cannot add a ground element when k = d")
        return min(1.0, scale / (d - k))
    raise ValueError(f"unknown move {move!r}")


def _acceptance_tables(d: int, proposal: str):
    remove = np.zeros(d + 1)
    add = np.zeros(d + 1)
    for k in range(1, d + 1):
        remove[k] = acceptance_probability(d, k, "remove", proposal)
    for k in range(d):
        add[k] = acceptance_probability(d, k, "add", proposal)
    return remove, add


def _move(k_from: int, k_to: int) -> str:
    return {-1: "remove", 0: "stay", 1: "add"}[k_to - k_from]


# -- proposal --------------------------------------------------------------------


def _completions(ctx: ExtendedWeightCtx, base: tuple, factors: np.ndarray, incremental: bool = True):
    """Candidate completions of ``base`` (size d-1) with their log proposal weights.

    Ground candidates come first in increasing order, then the free dummies.
    Also returns log nu(base & [n]) and the per-candidate log nu values.
    """
    n = ctx.n
    bg = [i for i in base if i < n]
    m = len(bg)
    inb = set(base)
    ground_c = [j for j in range(n) if j not in inb]
    dummy_c = [j for j in range(n, n + ctx.d) if j not in inb]
    lw_base = ctx.base.log_weight(bg)
    lw_g = ctx.base.log_weights_extend(bg, ground_c, incremental) if ground_c else np.zeros(0)
    cands = np.array(ground_c + dummy_c, dtype=np.int64)
    lw = np.concatenate([lw_g, np.full(len(dummy_c), lw_base)])
    # m <= d - 1, so factors[m + 1] always exists
    logits = np.concatenate([factors[m + 1] + lw_g, np.full(len(dummy_c), factors[m] + lw_base)])
    return cands, logits, lw


def _pick(logits: np.ndarray, u: float) -> int:
    top = np.max(logits)
    if top == -np.inf:
        raise ValueError("all candidate weights are zero")
    cum = np.cumsum(np.exp(logits - top))
    idx = int(np.searchsorted(cum, u * cum[-1], side="right"))
    return min(idx, len(cum) - 1)


def _transition(ctx, S: ExtendedState, u, factors, acc_remove, acc_add, incremental=True):
    d = ctx.d
    pos = min(int(u[0] * d), d - 1)
    base = S[:pos] + S[pos + 1:]
    cands, logits, lw = _completions(ctx, base, factors, incremental)
    c = _pick(logits, u[1])
    j = int(cands[c])
    T = tuple(sorted(base + (j,)))
    k_s = sum(1 for i in S if i < ctx.n)
    k_t = sum(1 for i in T if i < ctx.n)
    if k_t == k_s - 1:
        a = acc_remove[k_s]
    elif k_t == k_s + 1:
        a = acc_add[k_s]
    else:
        a = 1.0
    if u[2] < a:
        return T, True, float(lw[c])
    return S, False, None


def base_exchange_propose(ctx: ExtendedWeightCtx, S, rng, proposal: str = "mu") -> ExtendedState:
    """Drop a uniform member, then complete proportionally to the proposal weight."""
    S = validate_state(ctx, S)
    u = make_rng(rng).random(2)
    factors = ctx.proposal_factors(proposal)
    pos = min(int(u[0] * ctx.d), ctx.d - 1)
    base = S[:pos] + S[pos + 1:]
    cands, logits, _ = _completions(ctx, base, factors)
    j = int(cands[_pick(logits, u[1])])
    return tuple(sorted(base + (j,)))


def mh_step(ctx: ExtendedWeightCtx, S, rng, proposal: str = "mu") -> tuple[ExtendedState, bool]:
    """One step of the corrected chain targeting nu_sh."""
    S = validate_state(ctx, S)
    u = make_rng(rng).random(3)
    remove, add = _acceptance_tables(ctx.d, proposal)
    T, accepted, _ = _transition(ctx, S, u, ctx.proposal_factors(proposal), remove, add)
    return T, accepted


# -- chains ----------------------------------------------------------------------


@dataclass
class ChainTrace:
    """States and per-step records of one chain.

    ``k`` and ``log_weight`` have one entry per state (steps + 1);
    ``accepted`` one per transition.  ``states`` is None when not kept.
    """

    states: np.ndarray | None
    k: np.ndarray
    log_weight: np.ndarray
    accepted: np.ndarray
    seed: object
    statistic: str = "log_weight"

    @property
    def stats(self) -> np.ndarray:
        return self.log_weight if self.statistic == "log_weight" else self.k.astype(float)

    def __len__(self) -> int:
        return self.k.size

    def ground_sets(self, n: int) -> list[frozenset[int]]:
        if self.states is None:
            raise ValueError("trace was recorded without states")
        return [frozenset(int(i) for i in row if i < n) for row in self.states]


def _numba_mode(nu: SubsetWeightFn) -> int | None:
    if nu.kind == "sqrt-det":
        return 0
    if nu.kind == "modular":
        return 1
    return None


class Chain:
    """A chain with its own random stream, advanced in blocks of steps."""

    def __init__(self, ctx: ExtendedWeightCtx, state=None, seed=0, proposal: str = "mu",
                 engine: str = "auto", incremental: bool = True):
        if proposal not in PROPOSALS:
            raise ValueError(f"unknown proposal {proposal!r}")
        self.ctx = ctx
        self.seed = seed
        self.rng = make_rng(seed)
        self.proposal = proposal
        self.incremental = incremental
        mode = _numba_mode(ctx.base)
        if engine == "auto":
            engine = "numba" if mode is not None else "python"
        if engine == "numba" and mode is None:
            raise ValueError(f"numba engine does not support {ctx.base.kind!r} weights")
        if engine not in ("numba", "python"):
            raise ValueError(f"unknown engine {engine!r}")
        self.engine = engine
        if state is None:
            state = default_initial_state(ctx)
        elif isinstance(state, str):
            if state == "random":
                state = random_initial_state(ctx, self.rng)
            elif state == "greedy":
                state = default_initial_state(ctx)
            else:
                raise ValueError(f"unknown initialization {state!r}")
        self.state = validate_state(ctx, state)
        self.current_lw = ctx.base.log_weight(marginalize(self.state, ctx.n))
        self.factors = ctx.proposal_factors(proposal)
        self.acc_remove, self.acc_add = _acceptance_tables(ctx.d, proposal)

    @property
    def k(self) -> int:
        return sum(1 for i in self.state if i < self.ctx.n)

    def advance(self, steps: int, keep_states: bool = False):
        """Run ``steps`` transitions; returns (k, log_weight, accepted, states) for them."""
        u = self.rng.random((steps, 3))
        if self.engine == "numba":
            return self._advance_numba(u, keep_states)
        d = self.ctx.d
        ks = np.empty(steps, dtype=np.int64)
        lws = np.empty(steps)
        acc = np.empty(steps, dtype=bool)
        states = np.empty((steps, d), dtype=np.int64) if keep_states else None
        S, lw = self.state, self.current_lw
        for t in range(steps):
            T, ok, new_lw = _transition(self.ctx, S, u[t], self.factors, self.acc_remove,
                                        self.acc_add, self.incremental)
            if ok:
                S, lw = T, new_lw
            ks[t] = sum(1 for i in S if i < self.ctx.n)
            lws[t] = lw
            acc[t] = ok
            if keep_states:
                states[t] = S
        self.state, self.current_lw = S, lw
        return ks, lws, acc, states

    def _advance_numba(self, u, keep_states):
        ctx = self.ctx
        nu = ctx.base
        n, d = ctx.n, ctx.d
        steps = u.shape[0]
        in_state = np.zeros(n + d, dtype=np.bool_)
        in_state[list(self.state)] = True
        ks = np.empty(steps, dtype=np.int64)
        lws = np.empty(steps)
        acc = np.empty(steps, dtype=np.bool_)
        states = np.empty((steps if keep_states else 0, d), dtype=np.int64)
        if nu.kind == "sqrt-det":
            mode, L, logw, tol = 0, nu.kernel.L, np.zeros(n), nu.pivot_tol
        else:
            mode, L, logw, tol = 1, np.zeros((1, 1)), np.asarray(nu._log_w, dtype=float), 0.0
        lw = run_block(mode, L, logw, float(nu.alpha), tol, n, d, int(nu.d_cap), self.factors,
                       self.acc_remove, self.acc_add, in_state, u, ks, lws, acc, states,
                       keep_states, float(self.current_lw))
        self.state = tuple(int(i) for i in np.flatnonzero(in_state))
        self.current_lw = float(lw)
        return ks, lws, acc, (states if keep_states else None)


def run_chain(ctx: ExtendedWeightCtx, S0=None, steps: int = 1000, seed=0, statistic: str = "log_weight",
              proposal: str = "mu", keep_states: bool = True, engine: str = "auto",
              incremental: bool = True) -> ChainTrace:
    """Run Algorithm-1 style MH for a fixed number of steps from ``S0``."""
    if statistic not in STATISTICS:
        raise ValueError(f"unknown statistic {statistic!r}")
    if steps < 0:
        raise ValueError("steps must be non-negative")
    chain = Chain(ctx, S0, seed, proposal, engine, incremental)
    k0, lw0, s0 = chain.k, chain.current_lw, chain.state
    ks, lws, acc, states = chain.advance(steps, keep_states)
    all_states = None
    if keep_states:
        all_states = np.vstack([np.array(s0, dtype=np.int64)[None, :], states])
    return ChainTrace(
        states=all_states,
        k=np.concatenate([[k0], ks]).astype(np.int64),
        log_weight=np.concatenate([[lw0], lws]),
        accepted=acc,
        seed=seed,
        statistic=statistic,
    )


# -- enumeration oracles --------------------------------------------------------------


def exact_distribution(nu: SubsetWeightFn) -> dict[frozenset[int], float]:
    """Normalized nu over all feasible subsets (enumeration, n <= 20)."""
    if nu.n > 20:
        raise ValueError("exact distribution limited to n <= 20")
    sets, lws = [], []
    for S in iter_subsets(nu.n, nu.d_cap):
        lw = nu.log_weight(S)
        if lw > -math.inf:
            sets.append(S)
            lws.append(lw)
    lws = np.array(lws)
    p = np.exp(lws - lws.max())
    p /= p.sum()
    return dict(zip(sets, p.tolist()))


def nu_sh_distribution(ctx: ExtendedWeightCtx) -> tuple[list[ExtendedState], np.ndarray]:
    states = list(ctx.states())
    lw = np.array([ctx.log_nu_sh(S) for S in states])
    p = np.exp(lw - lw.max())
    return states, p / p.sum()


def transition_matrix(ctx: ExtendedWeightCtx, proposal: str = "mu") -> tuple[np.ndarray, list[ExtendedState]]:
    """Exact one-step kernel of the MH chain over the positive-weight states."""
    states = list(ctx.states())
    if len(states) > MAX_TRANSITION_STATES:
        raise ValueError(f"{len(states)} states exceeds limit {MAX_TRANSITION_STATES}")
    index = {S: r for r, S in enumerate(states)}
    factors = ctx.proposal_factors(proposal)
    d = ctx.d
    P = np.zeros((len(states), len(states)))
    for r, S in enumerate(states):
        k_s = sum(1 for i in S if i < ctx.n)
        for pos in range(d):
            base = S[:pos] + S[pos + 1:]
            cands, logits, _ = _completions(ctx, base, factors, incremental=False)
            w = np.exp(logits - np.max(logits))
            w /= w.sum()
            for j, q in zip(cands, w):
                if q == 0.0:
                    continue
                T = tuple(sorted(base + (int(j),)))
                k_t = sum(1 for i in T if i < ctx.n)
                a = acceptance_probability(d, k_s, _move(k_s, k_t), proposal)
                P[r, index[T]] += q * a / d
                P[r, r] += q * (1 - a) / d
    return P, states


def stationary_distribution(P: np.ndarray, tol: float = 1e-12, max_iter: int = 10**6) -> np.ndarray:
    """Left fixed point of a row-stochastic matrix by power iteration.

    The lazy kernel (I + P)/2 has the same fixed point and rules out
    oscillation; iteration stops once successive iterates differ by < tol in L1.
    """
    m = P.shape[0]
    lazy = 0.5 * (np.eye(m) + P)
    x = np.full(m, 1.0 / m)
    for _ in range(max_iter):
        y = x @ lazy
        y /= y.sum()
        if np.sum(np.abs(y - x)) < tol:
            return y
        x = y
    raise RuntimeError("power iteration did not converge")

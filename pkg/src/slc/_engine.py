"""Compiled inner loop of the MH chain for sqrt-det and modular weights.

Mirrors ``sampler._transition`` step for step: same candidate order, same
uniform usage, so trajectories agree with the Python engine.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _cholesky_logdet(L, idx, m, C, tol):
    """Factor L[idx, idx] into C (lower); returns log det or -inf on a small pivot."""
    ld = 0.0
    for a in range(m):
        for b in range(a + 1):
            s = L[idx[a], idx[b]]
            for c in range(b):
                s -= C[a, c] * C[b, c]
            if a == b:
                if s <= tol:
                    return -math.inf
                C[a, a] = math.sqrt(s)
                ld += math.log(s)
            else:
                C[a, b] = s / C[b, b]
    return ld


@njit(cache=True)
def run_block(mode, L, logw, alpha, tol, n, d, d_cap, factors, acc_remove, acc_add,
              in_state, u, ks, lws, acc, states, keep_states, cur_lw):
    steps = u.shape[0]
    N = n + d
    bg = np.empty(d, dtype=np.int64)
    C = np.zeros((d, d))
    v = np.empty(d)
    cands = np.empty(N, dtype=np.int64)
    lw_c = np.empty(N)
    logit = np.empty(N)
    k = 0
    for x in range(n):
        if in_state[x]:
            k += 1
    for t in range(steps):
        pos = min(int(u[t, 0] * d), d - 1)
        cnt = 0
        dropped = -1
        for x in range(N):
            if in_state[x]:
                if cnt == pos:
                    dropped = x
                    break
                cnt += 1
        in_state[dropped] = False
        m = 0
        for x in range(n):
            if in_state[x]:
                bg[m] = x
                m += 1
        # log nu of the base's ground part
        ld_base = 0.0
        if m > d_cap:
            lw_base = -math.inf
        elif mode == 0:
            ld_base = _cholesky_logdet(L, bg, m, C, tol)
            lw_base = -math.inf if ld_base == -math.inf else alpha * 0.5 * ld_base
        else:
            lp = 0.0
            for a in range(m):
                lp += logw[bg[a]]
            lw_base = -math.inf if lp == -math.inf else alpha * lp
        nc = 0
        for j in range(n):
            if in_state[j]:
                continue
            if m + 1 > d_cap or lw_base == -math.inf:
                val = -math.inf
            elif mode == 0:
                s = L[j, j]
                for a in range(m):
                    r = L[bg[a], j]
                    for c in range(a):
                        r -= C[a, c] * v[c]
                    v[a] = r / C[a, a]
                    s -= v[a] * v[a]
                val = alpha * 0.5 * (ld_base + math.log(s)) if s > tol else -math.inf
            else:
                lp = 0.0
                for x in range(n):
                    if in_state[x] or x == j:
                        lp += logw[x]
                val = -math.inf if lp == -math.inf else alpha * lp
            cands[nc] = j
            lw_c[nc] = val
            logit[nc] = factors[m + 1] + val
            nc += 1
        for j in range(n, N):
            if not in_state[j]:
                cands[nc] = j
                lw_c[nc] = lw_base
                logit[nc] = factors[m] + lw_base
                nc += 1
        top = -math.inf
        for c in range(nc):
            if logit[c] > top:
                top = logit[c]
        total = 0.0
        for c in range(nc):
            logit[c] = math.exp(logit[c] - top)
            total += logit[c]
            logit[c] = total
        target = u[t, 1] * total
        pick = nc - 1
        for c in range(nc):
            if logit[c] > target:
                pick = c
                break
        j = cands[pick]
        k_s = k
        k_t = m + (1 if j < n else 0)
        if k_t == k_s - 1:
            a_prob = acc_remove[k_s]
        elif k_t == k_s + 1:
            a_prob = acc_add[k_s]
        else:
            a_prob = 1.0
        if u[t, 2] < a_prob:
            in_state[j] = True
            k = k_t
            cur_lw = lw_c[pick]
            acc[t] = True
        else:
            in_state[dropped] = True
            acc[t] = False
        ks[t] = k
        lws[t] = cur_lw
        if keep_states:
            cnt = 0
            for x in range(N):
                if in_state[x]:
                    states[t, cnt] = x
                    cnt += 1
    return cur_lw

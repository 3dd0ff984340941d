"""Certificates for strong log-concavity and related support/submodularity checks."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .distributions import SubsetWeightFn, iter_subsets
from .polynomial import SparsePolynomial, hessian_at, is_indecomposable, partial_derivative

DECOMPOSABLE = "decomposable"
TOO_MANY_POSITIVE = "too-many-positive-eigenvalues"


@dataclass(frozen=True)
class SlcVerdict:
    is_slc: bool
    failing_multi_index: tuple[int, ...] | None = None
    failure_kind: str | None = None
    eigenvalues_at_failure: tuple[float, ...] | None = None

    def as_dict(self) -> dict:
        return {
            "is_slc": self.is_slc,
            "failure_kind": self.failure_kind,
            "multi_index": list(self.failing_multi_index) if self.failing_multi_index else None,
            "eigenvalues": list(self.eigenvalues_at_failure) if self.eigenvalues_at_failure else None,
        }


def default_tol(M: np.ndarray) -> float:
    return 1e-9 * (1.0 + float(np.linalg.norm(M, 2))) if M.size else 1e-9


def positive_eigenvalue_count(M, tol: float | None = None) -> int:
    """Number of eigenvalues of symmetric ``M`` strictly above ``tol``."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    if np.max(np.abs(M - M.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(M), initial=0.0)):
        raise ValueError("matrix is not symmetric")
    if tol is None:
        tol = default_tol(M)
    if tol <= 0:
        raise ValueError("tol must be positive")
    return int(np.sum(np.linalg.eigvalsh(M) > tol))


def _multi_indices(bounds, total):
    """Multi-indices a <= bounds with |a| <= total, in lexicographic order."""
    for alpha in itertools.product(*(range(b + 1) for b in bounds)):
        if sum(alpha) <= total:
            yield alpha


def is_slc_homogeneous(f: SparsePolynomial, tol: float | None = None) -> SlcVerdict:
    """Sufficient check: indecomposable derivatives and one-positive-eigenvalue Hessians.

    Every d^alpha f with |alpha| <= deg - 2 must be zero or indecomposable,
    and at |alpha| = deg - 2 the (constant) Hessian of the quadratic
    d^alpha f may have at most one positive eigenvalue.  The first failure in
    lexicographic order of alpha is reported.
    """
    if not f.is_homogeneous():
        raise ValueError("polynomial is not homogeneous; homogenize it first")
    deg = f.degree()
    if deg < 2:
        return SlcVerdict(True)
    ones = np.ones(f.num_vars)
    for alpha in _multi_indices(f.var_degrees(), deg - 2):
        g = partial_derivative(f, alpha)
        if g.is_zero():
            continue
        if not is_indecomposable(g):
            return SlcVerdict(False, alpha, DECOMPOSABLE)
        if sum(alpha) == deg - 2:
            H = hessian_at(g, ones)
            if positive_eigenvalue_count(H, tol) > 1:
                eig = tuple(float(v) for v in np.linalg.eigvalsh(H))
                return SlcVerdict(False, alpha, TOO_MANY_POSITIVE, eig)
    return SlcVerdict(True)


def two_by_two_slc(a: float, b: float, c: float, d: float) -> bool:
    """Whether a + b y + c z + d y z is SLC, i.e. 2bc >= ad."""
    if min(a, b, c, d) < 0:
        raise ValueError("coefficients must be non-negative")
    return 2 * b * c >= a * d


def is_m_convex_support(f: SparsePolynomial) -> bool:
    """Exchange axiom on the support of ``f``."""
    supp = f.support()
    members = set(supp)
    for a in supp:
        for b in supp:
            for i in range(f.num_vars):
                if a[i] <= b[i]:
                    continue
                ok = False
                for j in range(f.num_vars):
                    if a[j] < b[j]:
                        c = list(a)
                        c[i] -= 1
                        c[j] += 1
                        if tuple(c) in members:
                            ok = True
                            break
                if not ok:
                    return False
    return True


def pair_gaps(nu: SubsetWeightFn):
    """Yield log nu(S) + log nu(S+ij) - log nu(S+i) - log nu(S+j) over positive quadruples."""
    if nu.n > 20:
        raise ValueError("exhaustive scan limited to n <= 20")
    cache = {}

    def lw(S):
        if S not in cache:
            cache[S] = nu.log_weight(S)
        return cache[S]

    for S in iter_subsets(nu.n, max(nu.d_cap - 2, -1)):
        base = lw(S)
        if base == -math.inf:
            continue
        rest = [i for i in range(nu.n) if i not in S]
        for i, j in itertools.combinations(rest, 2):
            both = lw(S | {i, j})
            if both == -math.inf:
                continue
            si, sj = lw(S | {i}), lw(S | {j})
            if si == -math.inf or sj == -math.inf:
                continue
            yield base + both - si - sj


def log_submodularity_gap(nu: SubsetWeightFn) -> float:
    """Largest log-supermodular excess; <= 0 means nu is log-submodular."""
    gap = max(pair_gaps(nu), default=None)
    if gap is None:
        raise ValueError("no quadruple with all four weights positive")
    return gap

"""Polynomial transforms that carry SLC polynomials to homogeneous ones.

The homogenizing variable ``y`` is always appended as the last variable, and
polarization replaces it by ``d`` trailing copies, so a set of ground
elements plus copies lines up with the sampler's dummy labels n .. n+d-1.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from .distributions import SubsetWeightFn, iter_subsets
from .polynomial import SparsePolynomial

MAX_ENUM_N = 20
MAX_POLARIZE_D = 20


@dataclass(frozen=True)
class TransformConfig:
    k: int
    alpha: float = 1.0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"target degree must be >= 1, got {self.k}")
        if not 0.0 <= self.alpha <= 1.0:
            # closure fails for every alpha > 1
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")


def generating_polynomial(nu: SubsetWeightFn) -> SparsePolynomial:
    """sum_S nu(S) z^S over the support of nu (unnormalized)."""
    if nu.n > MAX_ENUM_N:
        raise ValueError(f"n = {nu.n} too large to enumerate (limit {MAX_ENUM_N})")
    weights = {}
    for S in iter_subsets(nu.n, nu.d_cap):
        lw = nu.log_weight(S)
        if lw > -math.inf:
            weights[S] = math.exp(lw)
    return SparsePolynomial.from_subsets(nu.n, weights)


def scaled_homogenize(f: SparsePolynomial, cfg: TransformConfig | int, alpha: float | None = None) -> SparsePolynomial:
    """sum_S c_S^alpha / (k - |S|)! z^S y^(k - |S|), with y appended last."""
    if not isinstance(cfg, TransformConfig):
        cfg = TransformConfig(int(cfg), 1.0 if alpha is None else alpha)
    elif alpha is not None:
        raise TypeError("pass alpha inside the TransformConfig")
    if not f.is_multiaffine():
        raise ValueError("scaled homogenization expects a multiaffine polynomial")
    k = cfg.k
    if f.degree() > k:
        raise ValueError(f"target degree {k} below polynomial degree {f.degree()}")
    out = {}
    for exp, c in f.items():
        size = sum(exp)
        out[exp + (k - size,)] = c**cfg.alpha / math.factorial(k - size)
    return SparsePolynomial(f.num_vars + 1, out)


def polarize(f: SparsePolynomial, d: int) -> SparsePolynomial:
    """Replace y^(d-|S|) by e_(d-|S|)(y_1..y_d) / C(d, |S|).

    ``f`` lives in (z_1..z_n, y) with y last, is d-homogeneous and multiaffine
    in z.  The result is multiaffine in n + d variables and symmetric in the
    copies of y.
    """
    if d < 0 or d > MAX_POLARIZE_D:
        raise ValueError(f"polarization degree must lie in [0, {MAX_POLARIZE_D}], got {d}")
    n = f.num_vars - 1
    if n < 1:
        raise ValueError("polarization needs at least one z variable plus y")
    out = {}
    for exp, c in f.items():
        z, ypow = exp[:n], exp[n]
        size = sum(z)
        if any(e > 1 for e in z):
            raise ValueError(f"term {exp} is not multiaffine in z")
        if size + ypow != d:
            raise ValueError(f"term {exp} is not of degree {d}")
        coef = c / math.comb(d, size)
        for copies in itertools.combinations(range(d), ypow):
            y = [0] * d
            for j in copies:
                y[j] = 1
            out[z + tuple(y)] = coef
    return SparsePolynomial(n + d, out)


def restrict_to_degree(f: SparsePolynomial, k: int) -> SparsePolynomial:
    """Keep only the terms of total degree k."""
    if k < 0:
        raise ValueError("degree must be non-negative")
    return SparsePolynomial(f.num_vars, {e: c for e, c in f.items() if sum(e) == k})

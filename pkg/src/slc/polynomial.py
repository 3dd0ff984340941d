"""Sparse polynomials with non-negative coefficients.

A polynomial is a map from exponent vectors to coefficients.  Generating
polynomials of subset distributions are multiaffine (all exponents 0 or 1);
homogenization adds one variable that may carry higher powers, so the general
exponent-vector form is kept throughout and ``from_subsets`` is the shortcut
for the multiaffine case.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping
from typing import TextIO

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

Exponent = tuple[int, ...]


class SparsePolynomial:
    """Immutable sparse polynomial in ``num_vars`` variables.

    Zero coefficients are dropped on construction, so ``terms`` is exactly the
    support.  Coefficients must be non-negative.
    """

    __slots__ = ("num_vars", "_terms", "_exps", "_coefs")

    def __init__(self, num_vars: int, terms: Mapping[Iterable[int], float] | None = None):
        if num_vars < 1:
            raise ValueError(f"num_vars must be positive, got {num_vars}")
        clean: dict[Exponent, float] = {}
        for exp, coef in (terms or {}).items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != num_vars:
                raise ValueError(f"exponent {exp} has length {len(exp)}, expected {num_vars}")
            if any(e < 0 for e in exp):
                raise ValueError(f"negative exponent in {exp}")
            coef = float(coef)
            if coef < 0 or math.isnan(coef):
                raise ValueError(f"coefficient {coef} for {exp} is not non-negative")
            if coef == 0.0:
                continue
            clean[exp] = clean.get(exp, 0.0) + coef
        self.num_vars = num_vars
        self._terms = clean
        self._exps = None
        self._coefs = None

    @classmethod
    def from_subsets(cls, num_vars: int, weights: Mapping[Iterable[int], float]) -> SparsePolynomial:
        """Multiaffine polynomial sum_S w_S z^S from subset-keyed weights."""
        terms = {}
        for subset, w in weights.items():
            exp = [0] * num_vars
            for i in subset:
                exp[i] = 1
            terms[tuple(exp)] = terms.get(tuple(exp), 0.0) + float(w)
        return cls(num_vars, terms)

    @classmethod
    def zero(cls, num_vars: int) -> SparsePolynomial:
        return cls(num_vars, {})

    @property
    def terms(self) -> dict[Exponent, float]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def coefficient(self, exp: Iterable[int]) -> float:
        return self._terms.get(tuple(exp), 0.0)

    def __len__(self) -> int:
        return len(self._terms)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SparsePolynomial):
            return NotImplemented
        return self.num_vars == other.num_vars and self._terms == other._terms

    def __hash__(self):
        return hash((self.num_vars, frozenset(self._terms.items())))

    def __add__(self, other: SparsePolynomial) -> SparsePolynomial:
        if self.num_vars != other.num_vars:
            raise ValueError("cannot add polynomials in different numbers of variables")
        merged = dict(self._terms)
        for exp, c in other.items():
            merged[exp] = merged.get(exp, 0.0) + c
        return SparsePolynomial(self.num_vars, merged)

    def __repr__(self) -> str:
        if not self._terms:
            return f"SparsePolynomial({self.num_vars}, 0)"
        parts = []
        for exp, c in sorted(self._terms.items(), reverse=True):
            mono = "*".join(
                f"x{i}" if e == 1 else f"x{i}^{e}" for i, e in enumerate(exp) if e
            )
            parts.append(f"{c:g}*{mono}" if mono else f"{c:g}")
        return f"SparsePolynomial({self.num_vars}, {' + '.join(parts)})"

    def is_zero(self) -> bool:
        return not self._terms

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return max((sum(e) for e in self._terms), default=-1)

    def var_degrees(self) -> list[int]:
        """Maximum exponent of each variable over the support."""
        out = [0] * self.num_vars
        for exp in self._terms:
            for i, e in enumerate(exp):
                if e > out[i]:
                    out[i] = e
        return out

    def is_homogeneous(self) -> bool:
        return len({sum(e) for e in self._terms}) <= 1

    def is_multiaffine(self) -> bool:
        return all(e <= 1 for exp in self._terms for e in exp)

    def support(self) -> list[Exponent]:
        return sorted(self._terms)

    def _arrays(self):
        if self._exps is None:
            items = sorted(self._terms.items())
            self._exps = np.array([e for e, _ in items], dtype=np.int64).reshape(-1, self.num_vars)
            self._coefs = np.array([c for _, c in items], dtype=float)
        return self._exps, self._coefs

    def __call__(self, point) -> float:
        return eval_poly(self, point)


def eval_poly(p: SparsePolynomial, point) -> float:
    """Evaluate ``p`` at ``point`` as the sum of its term values."""
    x = np.asarray(point, dtype=float)
    if x.shape != (p.num_vars,):
        raise ValueError(f"point has shape {x.shape}, expected ({p.num_vars},)")
    if p.is_zero():
        return 0.0
    exps, coefs = p._arrays()
    return float(np.sum(coefs * np.prod(x ** exps, axis=1)))


def partial_derivative(p: SparsePolynomial, alpha: Iterable[int]) -> SparsePolynomial:
    """Mixed partial derivative d^alpha p, term by term with falling factorials."""
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != p.num_vars:
        raise ValueError(f"multi-index has length {len(alpha)}, expected {p.num_vars}")
    out = {}
    for exp, c in p.items():
        if any(e < a for e, a in zip(exp, alpha)):
            continue
        scale = 1
        for e, a in zip(exp, alpha):
            scale *= math.perm(e, a)
        out[tuple(e - a for e, a in zip(exp, alpha))] = c * scale
    return SparsePolynomial(p.num_vars, out)


def _unit(n: int, *idx: int) -> Exponent:
    a = [0] * n
    for i in idx:
        a[i] += 1
    return tuple(a)


def hessian_at(p: SparsePolynomial, point) -> np.ndarray:
    """Matrix of second partials at ``point``; the lower triangle mirrors the upper."""
    x = np.asarray(point, dtype=float)
    n = p.num_vars
    if x.shape != (n,):
        raise ValueError(f"point has shape {x.shape}, expected ({n},)")
    H = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            H[i, j] = eval_poly(partial_derivative(p, _unit(n, i, j)), x)
            H[j, i] = H[i, j]
    return H


def is_indecomposable(p: SparsePolynomial) -> bool:
    """True iff the variable graph of ``p`` is connected.

    Nodes are the variables with d_i p != 0 and (i, j) is an edge when
    d_i d_j p != 0.  With non-negative coefficients both tests reduce to
    reading the support: i is a node iff it appears in some term, and i ~ j iff
    some term contains both.
    """
    present = sorted({i for exp in p.terms for i, e in enumerate(exp) if e})
    if len(present) <= 1:
        return True
    pos = {v: k for k, v in enumerate(present)}
    rows, cols = [], []
    for exp in p.terms:
        vs = [pos[i] for i, e in enumerate(exp) if e]
        # a star through the first variable connects the whole monomial
        for v in vs[1:]:
            rows.append(vs[0])
            cols.append(v)
    m = len(present)
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(m, m))
    ncomp, _ = connected_components(graph, directed=False)
    return ncomp == 1


def read_polynomial(stream: TextIO) -> SparsePolynomial:
    """Parse the ``c e1 ... en`` text format (one term per line, '#' comments)."""
    terms: dict[Exponent, float] = {}
    nvars = None
    for lineno, raw in enumerate(stream, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        try:
            coef = float(fields[0])
            exp = tuple(int(f) for f in fields[1:])
        except ValueError as err:
            raise ValueError(f"line {lineno}: cannot parse term {line!r}") from err
        if nvars is None:
            nvars = len(exp)
        elif len(exp) != nvars:
            raise ValueError(f"line {lineno}: expected {nvars} exponents, got {len(exp)}")
        terms[exp] = terms.get(exp, 0.0) + coef
    if not nvars:
        raise ValueError("polynomial file has no terms")
    return SparsePolynomial(nvars, terms)


def write_polynomial(p: SparsePolynomial, stream: TextIO) -> None:
    for exp, c in sorted(p.items()):
        stream.write(" ".join([repr(c)] + [str(e) for e in exp]) + "\n")

"""Pointwise exterior algebra on R^m.

Coefficients of a degree-k value are stored against strictly increasing index
tuples in colexicographic order, so the rank of ``(c_1 < ... < c_k)`` is
``sum_i C(c_i, i)`` (1-based ``i``).  Coefficient arrays may carry leading
batch axes and may be :class:`~almost_contact.jets.Jet` nodes; every kernel is
polynomial in the coefficients, so derivatives pass straight through.

Evaluation uses the determinant convention: ``dx^I(v_1..v_k) = det(v_j[I_i])``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, permutations
from math import comb, factorial
from typing import Sequence

import numpy as np

from . import jets


class ContractError(ValueError):
    """Raised when an operation's preconditions are violated."""


# --------------------------------------------------------------------------
# multi-indices


@lru_cache(maxsize=None)
def basis(dim: int, degree: int) -> tuple[tuple[int, ...], ...]:
    """All strictly increasing ``degree``-tuples from ``range(dim)``, colex order."""
    if degree < 0 or degree > dim:
        return ()
    return tuple(sorted(combinations(range(dim), degree), key=lambda c: c[::-1]))


def rank(index: Sequence[int]) -> int:
    return sum(comb(c, i + 1) for i, c in enumerate(index))


def permutation_sign(seq: Sequence[int]) -> int:
    """Sign of the permutation sorting ``seq`` (0 if it has repeats)."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def merge(left: Sequence[int], right: Sequence[int]) -> tuple[int, tuple[int, ...]]:
    """Sorted union of two multi-indices with the shuffle sign.

    Overlapping indices give ``(0, ())``: the wedge of the basis elements is zero.
    """
    joined = tuple(left) + tuple(right)
    sign = permutation_sign(joined)
    if sign == 0:
        return 0, ()
    return sign, tuple(sorted(joined))


# --------------------------------------------------------------------------
# values


@dataclass(frozen=True, eq=False)
class AlternatingFormValue:
    """Value of a degree-``degree`` form at one point or a batch of points.

    ``coeffs`` has trailing axis of length ``C(dim, degree)``.  ``overflow``
    marks the explicit zero produced by a product whose degree exceeds ``dim``;
    such values have no coefficients at all.
    """

    dim: int
    degree: int
    coeffs: object
    overflow: bool = False

    __array_ufunc__ = None

    def __post_init__(self):
        if self.dim < 1:
            raise ContractError(f"dimension must be positive, got {self.dim}")
        if self.overflow:
            if self.degree <= self.dim:
                raise ContractError("overflow zero must have degree > dim")
            return
        if not 0 <= self.degree <= self.dim:
            raise ContractError(f"degree {self.degree} outside [0, {self.dim}]")
        n = jets.base(self.coeffs).shape
        if not n or n[-1] != comb(self.dim, self.degree):
            raise ContractError(
                f"expected {comb(self.dim, self.degree)} coefficients, got shape {n}"
            )

    @classmethod
    def zero(cls, dim: int, degree: int, batch: tuple = ()) -> "AlternatingFormValue":
        if degree > dim:
            return cls(dim, degree, np.zeros(batch + (0,)), overflow=True)
        return cls(dim, degree, np.zeros(batch + (comb(dim, degree),)))

    @classmethod
    def from_terms(cls, dim: int, degree: int, terms: dict) -> "AlternatingFormValue":
        """Build from ``{index tuple: coefficient}``; unsorted keys pick up signs."""
        comps: list = [0.0] * comb(dim, degree)
        for key, c in terms.items():
            key = tuple(key)
            if len(key) != degree or any(not 0 <= i < dim for i in key):
                raise ContractError(f"bad multi-index {key} for degree {degree} in dim {dim}")
            sign = permutation_sign(key)
            if sign == 0:
                continue
            r = rank(sorted(key))
            comps[r] = comps[r] + (c if sign > 0 else -c)
        return cls(dim, degree, jets.stack(comps))

    @property
    def batch_shape(self) -> tuple:
        return jets.base(self.coeffs).shape[:-1]

    def values(self) -> np.ndarray:
        """Plain coefficient array (derivative layers dropped)."""
        return np.array(jets.base(self.coeffs), dtype=float)

    def component(self, index: Sequence[int]):
        sign = permutation_sign(index)
        if self.overflow or sign == 0:
            return np.zeros(self.batch_shape)
        return sign * self.values()[..., rank(sorted(index))]

    def max_abs(self) -> np.ndarray:
        """Per-point max-norm of the coefficients."""
        v = self.values()
        if v.shape[-1] == 0:
            return np.zeros(v.shape[:-1])
        return np.abs(v).max(axis=-1)

    def _check_compatible(self, other: "AlternatingFormValue"):
        if other.dim != self.dim or other.degree != self.degree:
            raise ContractError(
                f"cannot add degree {other.degree} in dim {other.dim} to degree "
                f"{self.degree} in dim {self.dim}"
            )

    def __add__(self, other):
        if not isinstance(other, AlternatingFormValue):
            return NotImplemented
        self._check_compatible(other)
        if self.overflow:
            return other
        return AlternatingFormValue(self.dim, self.degree, jets.add(self.coeffs, other.coeffs))

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return AlternatingFormValue(self.dim, self.degree, -self.coeffs, self.overflow)

    def __mul__(self, scalar):
        """Multiply by a scalar or by a batch of scalars (a 0-form field value)."""
        if isinstance(scalar, AlternatingFormValue):
            return wedge(self, scalar)
        if self.overflow:
            return self
        if np.ndim(jets.base(scalar)) == 0:
            return AlternatingFormValue(self.dim, self.degree, jets.mul(self.coeffs, scalar))
        return AlternatingFormValue(
            self.dim, self.degree, jets.mul(self.coeffs, jets.insert_axis(scalar))
        )

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return (
            f"AlternatingFormValue(dim={self.dim}, degree={self.degree}, "
            f"batch={self.batch_shape}{', overflow' if self.overflow else ''})"
        )


def scalar(value, dim: int) -> AlternatingFormValue:
    """Degree-0 value; wedging with it is scaling."""
    return AlternatingFormValue(dim, 0, jets.stack([value]))


def covector(dim: int, i: int) -> AlternatingFormValue:
    """Basis 1-form ``dx_i``."""
    c = np.zeros(dim)
    c[i] = 1.0
    return AlternatingFormValue(dim, 1, c)


# --------------------------------------------------------------------------
# wedge


@lru_cache(maxsize=None)
def _wedge_tables(dim: int, p: int, q: int):
    rows_a, rows_b, out, signs = [], [], [], []
    for ia, I in enumerate(basis(dim, p)):
        for ib, J in enumerate(basis(dim, q)):
            sign, K = merge(I, J)
            if sign:
                rows_a.append(ia)
                rows_b.append(ib)
                out.append(rank(K))
                signs.append(sign)
    npairs = len(out)
    ga = np.zeros((comb(dim, p), npairs))
    gb = np.zeros((comb(dim, q), npairs))
    scatter = np.zeros((npairs, comb(dim, p + q)))
    ga[rows_a, range(npairs)] = 1.0
    gb[rows_b, range(npairs)] = 1.0
    scatter[range(npairs), out] = signs
    return ga, gb, scatter


def wedge(a: AlternatingFormValue, b: AlternatingFormValue) -> AlternatingFormValue:
    """Exterior product.

    A product of total degree above the dimension returns the flagged
    overflow zero rather than a value of some clamped degree.
    """
    if a.dim != b.dim:
        raise ContractError(f"dimension mismatch: {a.dim} vs {b.dim}")
    deg = a.degree + b.degree
    batch = np.broadcast_shapes(a.batch_shape, b.batch_shape)
    if deg > a.dim or a.overflow or b.overflow:
        return AlternatingFormValue.zero(a.dim, deg, batch)
    if a.degree == 0:
        return AlternatingFormValue(a.dim, deg, jets.mul(b.coeffs, a.coeffs))
    if b.degree == 0:
        return AlternatingFormValue(a.dim, deg, jets.mul(a.coeffs, b.coeffs))
    ga, gb, scatter = _wedge_tables(a.dim, a.degree, b.degree)
    prod = jets.mul(jets.s_linear(a.coeffs, ga), jets.s_linear(b.coeffs, gb))
    return AlternatingFormValue(a.dim, deg, jets.s_linear(prod, scatter))


def wedge_all(*values: AlternatingFormValue) -> AlternatingFormValue:
    out = values[0]
    for v in values[1:]:
        out = wedge(out, v)
    return out


def wedge_power(a: AlternatingFormValue, n: int) -> AlternatingFormValue:
    """``a^n``; the 0-th power is the constant 1."""
    if n == 0:
        return scalar(1.0, a.dim)
    out = a
    for _ in range(n - 1):
        out = wedge(out, a)
    return out


# --------------------------------------------------------------------------
# evaluation and linear pullback


def evaluate(a: AlternatingFormValue, vectors: Sequence) -> np.ndarray:
    """Alternating multilinear evaluation on ``degree`` vectors."""
    vectors = [np.asarray(v, dtype=float) for v in vectors]
    if len(vectors) != a.degree:
        raise ContractError(f"degree-{a.degree} value needs {a.degree} vectors, got {len(vectors)}")
    for v in vectors:
        if v.shape[-1] != a.dim:
            raise ContractError(f"vector of length {v.shape[-1]} in dimension {a.dim}")
    coeffs = a.values()
    if a.overflow:
        return np.zeros(coeffs.shape[:-1])
    if a.degree == 0:
        return coeffs[..., 0]
    V = np.stack(np.broadcast_arrays(*vectors), axis=-1)  # (..., m, k)
    idx = np.array(basis(a.dim, a.degree))
    minors = np.linalg.det(V[..., idx, :])  # (..., C)
    return np.sum(coeffs * minors, axis=-1)


@lru_cache(maxsize=None)
def _minor_tables(m: int, p: int, k: int):
    """Gather/sign tables expressing all k-minors of an m x p matrix as
    signed sums of k-fold products of its entries."""
    rows, cols = basis(m, k), basis(p, k)
    perms = list(permutations(range(k)))
    npairs = len(rows) * len(cols)
    nterms = npairs * len(perms)
    gathers = np.zeros((k, m * p, nterms))
    reduce = np.zeros((nterms, npairs))
    t = 0
    for ii, I in enumerate(rows):
        for jj, J in enumerate(cols):
            for sigma in perms:
                for pos in range(k):
                    gathers[pos, I[pos] * p + J[sigma[pos]], t] = 1.0
                reduce[t, ii * len(cols) + jj] = permutation_sign(sigma)
                t += 1
    return gathers, reduce


@lru_cache(maxsize=None)
def _contract_table(nrows: int, ncols: int):
    """(rows, rows*cols) repeat matrix and (rows*cols, cols) sum matrix."""
    rep = np.kron(np.eye(nrows), np.ones((1, ncols)))
    tot = np.kron(np.ones((nrows, 1)), np.eye(ncols))
    return rep, tot


def minors_matrix(L: np.ndarray, k: int) -> np.ndarray:
    """All k x k minors of a constant or batched plain matrix: (..., C(m,k), C(p,k))."""
    L = np.asarray(L, dtype=float)
    m, p = L.shape[-2:]
    rows = np.array(basis(m, k))
    cols = np.array(basis(p, k))
    sub = L[..., rows[:, None, :, None], cols[None, :, None, :]]
    return np.linalg.det(sub)


def pull_back_linear(a: AlternatingFormValue, L) -> AlternatingFormValue:
    """Pull back along the linear map R^p -> R^m with matrix ``L`` (m x p).

    ``L`` may be a single matrix, a batch of matrices with leading axes, or a
    jet with S-shape ``(..., m, p)``.
    """
    shape = jets.base(L).shape
    if len(shape) < 2:
        raise ContractError("linear map must be given as an m x p array")
    m, p = shape[-2:]
    if m != a.dim:
        raise ContractError(f"map has {m} rows but the value lives in dimension {a.dim}")
    k = a.degree
    if a.overflow or k > p:
        return AlternatingFormValue.zero(p, k, a.batch_shape)
    if k == 0:
        return AlternatingFormValue(p, 0, a.coeffs)
    nI, nJ = comb(m, k), comb(p, k)
    rep, tot = _contract_table(nI, nJ)
    if not jets.is_jet(L):
        M = minors_matrix(L, k)
        if M.ndim == 2:
            return AlternatingFormValue(p, k, jets.s_linear(a.coeffs, M))
        minors = M.reshape(M.shape[:-2] + (nI * nJ,))
    else:
        gathers, reduce = _minor_tables(m, p, k)
        flat = jets.s_linear(L, np.eye(m * p), k=2)
        prod = jets.s_linear(flat, gathers[0])
        for pos in range(1, k):
            prod = jets.mul(prod, jets.s_linear(flat, gathers[pos]))
        minors = jets.s_linear(prod, reduce)
    spread = jets.s_linear(a.coeffs, rep)
    return AlternatingFormValue(p, k, jets.s_linear(jets.mul(spread, minors), tot))


def alternation_oracle(a: AlternatingFormValue, b: AlternatingFormValue, vectors) -> np.ndarray:
    """Brute-force ``(a^b)(v..)`` as ``1/(k!l!) sum_sigma sign(sigma) a(..) b(..)``."""
    k, l = a.degree, b.degree
    total = 0.0
    for sigma in permutations(range(k + l)):
        vs = [vectors[i] for i in sigma]
        total = total + permutation_sign(sigma) * evaluate(a, vs[:k]) * evaluate(b, vs[k:])
    return total / (factorial(k) * factorial(l))

"""Truncated Fock spaces with their creation operators and tensor-algebra polynomials.

Level k of the Fock space is built as ``internal_tensor(E, level[k-1])``
with level 0 the coefficient algebra acting on itself.  Every basis vector
of level k >= 1 is therefore an elementary tensor ``e_i (x) beta_j`` with
``e_i`` a basis vector of E and ``beta_j`` one of level k-1, which makes
generalized creation operators products of the basic ones.

Truncation: operators that would leave level ``level_cap`` map it to 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np

from .algebra import DimensionError, operator_norm, psd_sqrt
from .correspondence import (
    Correspondence,
    CorrespondenceMap,
    algebra_as_module,
    direct_sum,
    internal_tensor,
    submodule,
)


class TruncatedFock:
    """Levels E^{(x)0} = M, E^{(x)1}, ..., E^{(x)Nmax} of the Fock space of E."""

    def __init__(self, base: Correspondence, level_cap: int):
        if level_cap < 0:
            raise ValueError("level_cap must be nonnegative")
        self.base = base
        self.level_cap = level_cap
        levels = [algebra_as_module(base.algebra)]
        for _ in range(level_cap):
            levels.append(internal_tensor(base, levels[-1]))
        self.levels = levels
        dims = [lv.dim for lv in levels]
        self.level_dims = dims
        self.level_offsets = np.concatenate([[0], np.cumsum(dims)]).astype(int)
        self.total_dim = int(self.level_offsets[-1])
        self._creation_cache: dict[tuple[int, int], np.ndarray] = {}

    def block(self, k: int) -> slice:
        return slice(int(self.level_offsets[k]), int(self.level_offsets[k + 1]))

    @cached_property
    def module(self) -> Correspondence:
        """The truncated Fock space as one correspondence (orthogonal sum of levels)."""
        return direct_sum(self.levels)

    @cached_property
    def scalar_gram(self) -> np.ndarray:
        return self.module.scalar_gram

    @cached_property
    def _roots(self) -> tuple[np.ndarray, np.ndarray]:
        return psd_sqrt(self.scalar_gram)

    def norm(self, op: np.ndarray) -> float:
        """Operator norm on the Fock space (scalarized by the faithful trace)."""
        root, iroot = self._roots
        return operator_norm(root @ op @ iroot)

    @cached_property
    def vacuum(self) -> np.ndarray:
        """Coordinates of the unit of M in level 0, as a vector of the total space."""
        v = np.zeros(self.total_dim, dtype=complex)
        alg = self.base.algebra
        v[self.block(0)] = alg.coords(alg.identity)
        return v

    def from_base(self, xi: np.ndarray) -> np.ndarray:
        """Level-1 coordinates of xi (x) 1 for xi given in E coordinates."""
        one = self.vacuum[self.block(0)]
        return self.levels[1].tensor.quotient @ np.kron(xi, one)

    def level_vector(self, k: int, coords: np.ndarray) -> np.ndarray:
        v = np.zeros(self.total_dim, dtype=complex)
        v[self.block(k)] = coords
        return v

    def subcap_projection(self, top: int | None = None) -> np.ndarray:
        """Projection onto levels 0..top (default level_cap - 1)."""
        top = self.level_cap - 1 if top is None else top
        p = np.zeros((self.total_dim, self.total_dim))
        stop = int(self.level_offsets[top + 1])
        p[:stop, :stop] = np.eye(stop)
        return p

    @cached_property
    def p0(self) -> np.ndarray:
        """Projection onto levels >= 1."""
        p = np.eye(self.total_dim)
        p[self.block(0), self.block(0)] = 0.0
        return p

    # -- creation operators --------------------------------------------------
    def basis_creation(self, level: int, index: int) -> np.ndarray:
        """Creation operator of the ``index``-th basis vector of ``level`` (level >= 1)."""
        key = (level, index)
        if key in self._creation_cache:
            return self._creation_cache[key]
        i, j = self.levels[level].tensor.pairs[index]
        t_e = self.base_creation(i)
        if level == 1:
            rest = phi_infty(self.base.algebra.basis_array[j], self)
        else:
            rest = self.basis_creation(level - 1, j)
        out = t_e @ rest
        self._creation_cache[key] = out
        return out

    def base_creation(self, i: int) -> np.ndarray:
        """T_{e_i} for the i-th basis vector of E."""
        key = (0, i)
        if key not in self._creation_cache:
            t = np.zeros((self.total_dim, self.total_dim), dtype=complex)
            for k in range(self.level_cap):
                dk = self.level_dims[k]
                q = self.levels[k + 1].tensor.quotient
                t[self.block(k + 1), self.block(k)] = q[:, i * dk:(i + 1) * dk]
            self._creation_cache[key] = t
        return self._creation_cache[key]

    @cached_property
    def shift_maps(self) -> list[np.ndarray]:
        """Explicit identifications level_k (x) E -> level_{k+1} (algebraic domain).

        Column ``j * dim(E) + l`` holds the coordinates of beta_j (x) e_l,
        i.e. the right creation by e_l.
        """
        base = self.base
        d = base.dim
        maps = []
        one = self.vacuum[self.block(0)]
        q1 = self.levels[1].tensor.quotient if self.level_cap >= 1 else None
        prev = None
        for k in range(self.level_cap):
            dk = self.level_dims[k]
            cur = np.zeros((self.level_dims[k + 1], dk * d), dtype=complex)
            for lidx in range(d):
                f = np.eye(d)[lidx]
                for j in range(dk):
                    if k == 0:
                        # b_j (x) f = phi(b_j) f, then viewed as (phi(b_j) f) (x) 1
                        g = base.left(base.algebra.basis_array[j]) @ f
                        col = q1 @ np.kron(g, one)
                    else:
                        i, jp = self.levels[k].tensor.pairs[j]
                        qk = self.levels[k + 1].tensor.quotient
                        dprev = self.level_dims[k]
                        inner = prev[:, jp * d + lidx]
                        col = qk[:, i * dprev:(i + 1) * dprev] @ inner
                    cur[:, j * d + lidx] = col
            maps.append(cur)
            prev = cur
        return maps


def build_truncated_fock(e: Correspondence, nmax: int) -> TruncatedFock:
    if nmax < 0:
        raise ValueError("Nmax must be nonnegative")
    return TruncatedFock(e, nmax)


def phi_infty(a: np.ndarray, fock: TruncatedFock) -> np.ndarray:
    """Left action of a in M on the truncated Fock space (block diagonal)."""
    out = np.zeros((fock.total_dim, fock.total_dim), dtype=complex)
    for k, lv in enumerate(fock.levels):
        out[fock.block(k), fock.block(k)] = lv.left(a)
    return out


def creation_operator(xi: np.ndarray, fock: TruncatedFock, level: int = 1) -> np.ndarray:
    """Generalized creation operator eta -> xi (x) eta.

    ``xi`` is given in the coordinates of ``fock.levels[level]``; for a
    vector of E itself pass ``fock.from_base(xi)``.
    """
    if level < 1:
        raise ValueError("creation operators need level >= 1; use phi_infty for level 0")
    if level > fock.level_cap:
        raise ValueError(f"level {level} exceeds the truncation level {fock.level_cap}")
    xi = np.asarray(xi, dtype=complex)
    if xi.shape != (fock.level_dims[level],):
        raise DimensionError(f"coefficient of length {xi.shape} does not fit level {level}")
    out = np.zeros((fock.total_dim, fock.total_dim), dtype=complex)
    for p, c in enumerate(xi):
        if c != 0:
            out += c * fock.basis_creation(level, p)
    return out


@dataclass
class TensorPolynomial:
    """phi_infty(a0) + sum_k T_{eta_k}: one coefficient per level.

    The level-0 coefficient is an ambient matrix in M; level k >= 1
    coefficients are coordinate vectors in ``fock.levels[k]``.
    """

    fock: TruncatedFock
    terms: dict[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        for k, c in self.terms.items():
            if k > self.fock.level_cap:
                raise ValueError(f"term of level {k} exceeds the truncation level")
            if k >= 1 and np.asarray(c).shape != (self.fock.level_dims[k],):
                raise DimensionError(f"level-{k} coefficient has wrong length")

    @property
    def base(self) -> Correspondence:
        return self.fock.base

    @property
    def degree(self) -> int:
        return max(self.terms, default=0)

    @classmethod
    def constant(cls, fock: TruncatedFock, a0: np.ndarray) -> "TensorPolynomial":
        return cls(fock, {0: np.asarray(a0, dtype=complex)})

    @classmethod
    def monomial(cls, fock: TruncatedFock, level: int, coeff: np.ndarray) -> "TensorPolynomial":
        return cls(fock, {level: np.asarray(coeff, dtype=complex)})

    @classmethod
    def from_vector(cls, fock: TruncatedFock, v: np.ndarray) -> "TensorPolynomial":
        """The polynomial F with F(vacuum) = v."""
        terms = {}
        alg = fock.base.algebra
        for k in range(fock.level_cap + 1):
            c = v[fock.block(k)]
            if np.any(np.abs(c) > 0):
                terms[k] = alg.element(c) if k == 0 else c.copy()
        return cls(fock, terms)

    def to_vector(self) -> np.ndarray:
        return self.operator() @ self.fock.vacuum

    def operator(self) -> np.ndarray:
        return polynomial_to_operator(self, self.fock)

    def __add__(self, other: "TensorPolynomial") -> "TensorPolynomial":
        terms = {k: np.array(v) for k, v in self.terms.items()}
        for k, v in other.terms.items():
            terms[k] = terms[k] + v if k in terms else np.array(v)
        return TensorPolynomial(self.fock, terms)

    def __rmul__(self, scalar: complex) -> "TensorPolynomial":
        return TensorPolynomial(self.fock, {k: scalar * v for k, v in self.terms.items()})

    def __mul__(self, other):
        if not isinstance(other, TensorPolynomial):
            return self.__rmul__(other)
        if self.degree + other.degree > self.fock.level_cap:
            raise ValueError("product degree exceeds the truncation level")
        # a polynomial is determined by its value on the vacuum
        return TensorPolynomial.from_vector(self.fock, self.operator() @ other.to_vector())


def polynomial_to_operator(p: TensorPolynomial, fock: TruncatedFock | None = None) -> np.ndarray:
    fock = p.fock if fock is None else fock
    out = np.zeros((fock.total_dim, fock.total_dim), dtype=complex)
    for k, c in p.terms.items():
        if k > fock.level_cap:
            raise ValueError(f"term of level {k} exceeds the truncation level {fock.level_cap}")
        if k == 0:
            out += phi_infty(c, fock)
        else:
            out += creation_operator(c, fock, k)
    return out


def fock_norm(p: TensorPolynomial, nmax: int) -> float:
    """Norm of p acting on the Fock space truncated at ``nmax`` (a lower bound).

    Terms above ``nmax`` map everything past the cap and act as 0.
    """
    fock = p.fock if p.fock.level_cap == nmax else build_truncated_fock(p.base, nmax)
    q = TensorPolynomial(fock, {k: c for k, c in p.terms.items() if k <= nmax})
    return fock.norm(polynomial_to_operator(q, fock))


def right_shift(fock: TruncatedFock, levels: Iterable[int] | None = None,
                source: Correspondence | None = None) -> CorrespondenceMap:
    """R : (sum of the given levels) (x)_M E -> truncated Fock space, xi (x) f -> xi (x) f.

    The default source is levels 0..Nmax-1, on which R is an isometry with
    R R* = P0.  Including the top level maps its tensors to 0.
    """
    if fock.level_cap < 1:
        raise ValueError("right shift needs Nmax >= 1")
    levels = list(range(fock.level_cap)) if levels is None else sorted(levels)
    d = fock.base.dim
    if source is None:
        idx = np.concatenate([np.arange(fock.block(k).start, fock.block(k).stop) for k in levels])
        dom = submodule(fock.module, idx)
        source = internal_tensor(dom, fock.base)
    # algebraic columns (j, l): fock basis j of the listed levels, E basis l
    local = [(k, j) for k in levels for j in range(fock.level_dims[k])]
    alg = np.zeros((fock.total_dim, len(local) * d), dtype=complex)
    for col, (k, j) in enumerate(local):
        if k >= fock.level_cap:
            continue
        shift = fock.shift_maps[k]
        alg[fock.block(k + 1), col * d:(col + 1) * d] = shift[:, j * d:(j + 1) * d]
    if source.dim and source.tensor is not None and source.tensor.left_dim * d == alg.shape[1]:
        matrix = alg[:, source.tensor.pivots]
    else:
        raise DimensionError("source module does not match the requested levels")
    return CorrespondenceMap(source, fock.module, matrix)

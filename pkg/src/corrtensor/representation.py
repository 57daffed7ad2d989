"""Representations and covariant pairs, with the induced spaces E (x)_sigma H
and sigma-duals they rely on.

Coordinates on an induced space are orthonormal: a ``factor`` F with
F* F equal to the scalar Gram of the algebraic tensor product sends
algebraic coordinates (module basis index major, H index minor) to them.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .algebra import (
    EQ_TOL,
    DimensionError,
    StarAlgebra,
    _echelon,
    commutant,
    gram_schmidt,
    hermitian_part,
    null_space,
    operator_norm,
    star_algebra_from_generators,
)
from .correspondence import (
    RANK_RTOL,
    CompositionError,
    Correspondence,
    EquivalenceBimodule,
    gram_scale,
    same_algebra,
)

BALL_TOL = 1e-9


class Representation:
    """A *-representation of ``algebra`` on C^space_dim.

    Given either by the images of the algebra basis or by a callable on
    ambient matrices (for algebras too large to enumerate).
    """

    def __init__(self, algebra: StarAlgebra, space_dim: int, images=None, *,
                 fn: Callable[[np.ndarray], np.ndarray] | None = None, name: str = ""):
        self.algebra = algebra
        self.space_dim = int(space_dim)
        self._fn = fn
        self.name = name
        if images is not None:
            arr = np.asarray(images, dtype=complex).reshape(-1, self.space_dim, self.space_dim)
            if arr.shape[0] != algebra.dim:
                raise DimensionError(f"{arr.shape[0]} images for an algebra of dimension {algebra.dim}")
            self.__dict__["images"] = arr
        elif fn is None:
            raise ValueError("a representation needs images or fn")

    @cached_property
    def images(self) -> np.ndarray:
        return np.array([self._fn(b) for b in self.algebra.basis_array]).reshape(
            -1, self.space_dim, self.space_dim)

    def __call__(self, a: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=complex)
        if self._fn is not None:
            return np.asarray(self._fn(a))
        return np.tensordot(self.algebra.coords(a), self.images, axes=(0, 0))

    def many(self, elements: np.ndarray) -> np.ndarray:
        elements = np.asarray(elements, dtype=complex)
        lead = elements.shape[:-2]
        if self._fn is not None:
            flat = elements.reshape(-1, *elements.shape[-2:])
            out = np.array([self._fn(x) for x in flat])
            return out.reshape(*lead, self.space_dim, self.space_dim)
        return np.tensordot(self.algebra.coords(elements), self.images, axes=(-1, 0))

    def conjugate(self, u: np.ndarray) -> "Representation":
        """The unitarily equivalent representation a -> u sigma(a) u*."""
        u = np.asarray(u, dtype=complex)
        return Representation(self.algebra, self.space_dim,
                              np.einsum("ab,kbc,dc->kad", u, self.images, u.conj()))

    @cached_property
    def commutant(self) -> StarAlgebra:
        """sigma(M)' inside B(H)."""
        img = star_algebra_from_generators(list(self.images), self.space_dim)
        return commutant(img)

    def __repr__(self) -> str:
        return f"<Representation {self.name} of {self.algebra!r} on C^{self.space_dim}>"


def identity_representation(m: StarAlgebra) -> Representation:
    return Representation(m, m.ambient_dim, m.basis_array, name="id")


def amplified_representation(m: StarAlgebra, multiplicity: int) -> Representation:
    """a -> a (x) I_k: the identity representation with multiplicity k."""
    eye = np.eye(multiplicity)
    return Representation(m, m.ambient_dim * multiplicity,
                          np.array([np.kron(b, eye) for b in m.basis_array]), name=f"id*{multiplicity}")


def check_representation(rep: Representation, tol: float = EQ_TOL) -> dict[str, float]:
    """Residuals of multiplicativity, *-preservation and unitality on the basis."""
    alg = rep.algebra
    basis = alg.basis_array
    img = rep.images
    mult = 0.0
    for i, a in enumerate(basis):
        prods = rep.many(np.einsum("ab,kbc->kac", a, basis))
        ref = np.einsum("ab,kbc->kac", img[i], img)
        mult = max(mult, float(np.max(np.abs(prods - ref), initial=0.0)))
    star = max((operator_norm(rep(a.conj().T) - img[i].conj().T) for i, a in enumerate(basis)), default=0.0)
    unit = operator_norm(rep(alg.identity) - np.eye(rep.space_dim))
    return {"multiplicative": mult, "star": star, "unital": unit}


@dataclass
class InducedSpace:
    """The separated quotient X (x)_sigma H."""

    module: Correspondence
    rep: Representation
    scalar_gram: np.ndarray
    factor: np.ndarray
    pinv: np.ndarray

    @property
    def dim(self) -> int:
        return self.factor.shape[0]

    @property
    def alg_dim(self) -> int:
        return self.factor.shape[1]

    def operator(self, t: np.ndarray) -> np.ndarray:
        """T (x) I_H for a module map T given in module coordinates."""
        return self.factor @ np.kron(t, np.eye(self.rep.space_dim)) @ self.pinv

    def base_operator(self, b: np.ndarray) -> np.ndarray:
        """I_X (x) b for b in the commutant of sigma."""
        return self.factor @ np.kron(np.eye(self.module.dim), b) @ self.pinv

    def vector(self, xi: np.ndarray, h: np.ndarray) -> np.ndarray:
        return self.factor @ np.kron(xi, h)


def _module_of(x) -> Correspondence:
    return x.as_right_module if isinstance(x, EquivalenceBimodule) else x


def induce_space(x, sigma: Representation, rtol: float = RANK_RTOL) -> InducedSpace:
    mod = _module_of(x)
    if not same_algebra(mod.algebra, sigma.algebra):
        raise CompositionError(f"{mod!r} is not a module over the algebra of {sigma!r}")
    d, h = mod.dim, sigma.space_dim
    blocks = sigma.many(mod.gram)  # (d, d, h, h)
    s = hermitian_part(np.transpose(blocks, (0, 2, 1, 3)).reshape(d * h, d * h))
    w, v = np.linalg.eigh(s) if s.size else (np.zeros(0), np.zeros((0, 0)))
    ref = max(w[-1] if w.size else 0.0, gram_scale(mod.gram))
    keep = w > rtol * ref if ref > 0 else np.zeros(w.shape, bool)
    if keep.all() and w.size:
        r = np.sqrt(w)
        factor = (v * r) @ v.conj().T
        pinv = (v / r) @ v.conj().T
    else:
        vr, wr = v[:, keep], w[keep]
        factor = np.sqrt(wr)[:, None] * vr.conj().T
        pinv = vr / np.sqrt(wr)[None, :]
    return InducedSpace(mod, sigma, s, factor, pinv)


def induce_representation(x, sigma: Representation, space: InducedSpace | None = None) -> Representation:
    """Rieffel induction: a -> (left action of a) (x) I_H on X (x)_sigma H."""
    space = induce_space(x, sigma) if space is None else space
    mod = space.module
    rep = Representation(mod.left_algebra, space.dim, fn=lambda a: space.operator(mod.left(a)),
                         name=f"ind({sigma.name})")
    rep.induced = space
    return rep


# -- sigma-duals ---------------------------------------------------------------

def _intertwiner_system(space: InducedSpace, sigma: Representation,
                        elements: Sequence[np.ndarray]) -> np.ndarray:
    mod = space.module
    r, h = space.dim, sigma.space_dim
    eye_r, eye_h = np.eye(r), np.eye(h)
    rows = []
    for a in elements:
        la = space.operator(mod.left(a))
        # column-major vec: vec(z s) = (s^T (x) I) vec z, vec(L z) = (I (x) L) vec z
        rows.append(np.kron(sigma(a).T, eye_r) - np.kron(eye_h, la))
    return np.vstack(rows) if rows else np.zeros((0, r * h))


def intertwiner_basis(space: InducedSpace, sigma: Representation,
                      elements: Sequence[np.ndarray] | None = None, tol: float = 1e-10) -> list[np.ndarray]:
    """Hilbert-Schmidt orthonormal basis of {z : z sigma(a) = (phi(a) (x) I) z}."""
    mod = space.module
    if elements is None:
        elements = mod.left_algebra.basis_array
    r, h = space.dim, sigma.space_dim
    null = null_space(_intertwiner_system(space, sigma, elements), rtol=tol)
    null = _echelon(null)
    vecs = gram_schmidt(null.T, tol)
    return [v.reshape(h, r).T for v in vecs]


@dataclass
class SigmaDual:
    """E^sigma: intertwiners z : H -> E (x)_sigma H, a correspondence over sigma(M)'."""

    module: Correspondence
    rep: Representation
    space: InducedSpace
    basis: list[np.ndarray]
    commutant: StarAlgebra

    @property
    def dim(self) -> int:
        return len(self.basis)

    def coords(self, z: np.ndarray) -> np.ndarray:
        b = np.array(self.basis).reshape(self.dim, -1)
        return b.conj() @ np.asarray(z).ravel()

    def residual_outside(self, z: np.ndarray) -> float:
        """Frobenius distance of z from the span of the basis."""
        if not self.dim:
            return float(np.linalg.norm(z))
        c = self.coords(z)
        return float(np.linalg.norm(z - np.tensordot(c, np.array(self.basis), axes=(0, 0))))

    def check(self, tol: float = EQ_TOL) -> dict[str, float]:
        mod, sigma, space = self.module, self.rep, self.space
        inter = 0.0
        for a in mod.left_algebra.basis_array:
            la, sa = space.operator(mod.left(a)), sigma(a)
            inter = max([inter] + [operator_norm(z @ sa - la @ z) for z in self.basis])
        inner = max((self.commutant.distance(z1.conj().T @ z2) for z1 in self.basis for z2 in self.basis),
                    default=0.0)
        act = 0.0
        for c in self.commutant.basis_array:
            ic = space.base_operator(c)
            for z in self.basis:
                act = max(act, self.residual_outside(ic @ z), self.residual_outside(z @ c))
        return {"intertwining": inter, "inner_in_commutant": inner, "action_closure": act}


def sigma_dual(e: Correspondence, sigma: Representation, tol: float = 1e-10) -> SigmaDual:
    space = induce_space(e, sigma)
    basis = intertwiner_basis(space, sigma, tol=tol)
    return SigmaDual(e, sigma, space, basis, sigma.commutant)


# -- covariant pairs -------------------------------------------------------------

@dataclass
class CovariantPair:
    """sigma together with the intertwiner T~ : E (x)_sigma H -> H (so z* = T~)."""

    module: Correspondence
    rep: Representation
    intertwiner: np.ndarray
    space: InducedSpace | None = None
    _powers: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.space is None:
            self.space = induce_space(self.module, self.rep)
        self.intertwiner = np.asarray(self.intertwiner, dtype=complex)
        if self.intertwiner.shape != (self.rep.space_dim, self.space.dim):
            raise DimensionError(
                f"intertwiner of shape {self.intertwiner.shape} does not map "
                f"E(x)H (dim {self.space.dim}) to H (dim {self.rep.space_dim})")

    @property
    def point(self) -> np.ndarray:
        """z = T~*, a point of the sigma-dual."""
        return self.intertwiner.conj().T

    @property
    def norm(self) -> float:
        return operator_norm(self.intertwiner)

    def bimodule_map(self, xi: np.ndarray) -> np.ndarray:
        """T(xi) = T~ (xi (x) . ) : H -> H."""
        sp = self.space
        return self.intertwiner @ sp.factor @ np.kron(np.asarray(xi).reshape(-1, 1), np.eye(self.rep.space_dim))


def pair_from_bimodule_map(e: Correspondence, sigma: Representation, images: Sequence[np.ndarray],
                           space: InducedSpace | None = None) -> CovariantPair:
    """Rebuild T~ from the values T(e_i) on the module basis."""
    space = induce_space(e, sigma) if space is None else space
    stacked = np.hstack([np.asarray(t, dtype=complex) for t in images])
    return CovariantPair(e, sigma, stacked @ space.pinv, space)


def check_covariant(pair: CovariantPair, tol: float = BALL_TOL,
                    elements: Sequence[np.ndarray] | None = None) -> dict:
    """Norm excess, intertwining residual and ball classification."""
    mod, sp, t = pair.module, pair.space, pair.intertwiner
    if elements is None:
        elements = mod.left_algebra.basis_array
    inter = max((operator_norm(t @ sp.operator(mod.left(a)) - pair.rep(a) @ t) for a in elements), default=0.0)
    nrm = pair.norm
    excess = max(0.0, nrm - 1.0)
    if nrm <= 1.0 - tol:
        where = "interior"
    elif nrm <= 1.0 + tol:
        where = "boundary"
    else:
        where = "outside"
    return {"norm": nrm, "norm_excess": excess, "intertwining": inter,
            "position": where, "valid": bool(excess <= tol and inter <= max(tol, 1e-9))}


def random_ball_point(dual: SigmaDual, rng: np.random.Generator, radius: float | None = None) -> CovariantPair:
    """A random point of the closed ball of the sigma-dual, with norm uniform in [0, 1]."""
    radius = rng.uniform() if radius is None else radius
    t = np.zeros((dual.rep.space_dim, dual.space.dim), dtype=complex)
    if dual.dim:
        c = rng.normal(size=dual.dim) + 1j * rng.normal(size=dual.dim)
        z = np.tensordot(c, np.array(dual.basis), axes=(0, 0))
        t = z.conj().T
        n = operator_norm(t)
        if n > 0:
            t = t * (radius / n)
    return CovariantPair(dual.module, dual.rep, t, dual.space)


# -- integrated forms ----------------------------------------------------------

def generalized_intertwiner(pair: CovariantPair, fock, k: int) -> np.ndarray:
    """T~_k on algebraic coordinates of (level k) (x) H, as an h x (dim_k * h) matrix.

    T~_0 (b (x) h) = sigma(b) h and T~_k (e_i (x) beta (x) h) = T~ (e_i (x) T~_{k-1}(beta (x) h)).
    """
    if k > fock.level_cap:
        raise ValueError(f"level {k} exceeds the available tensor powers ({fock.level_cap})")
    if fock.base is not pair.module:
        if fock.base.dim != pair.module.dim:
            raise DimensionError("polynomial and covariant pair use different correspondences")
    cache = pair._powers.setdefault(id(fock), {})
    if k in cache:
        return cache[k]
    h = pair.rep.space_dim
    if k == 0:
        g = np.hstack(list(pair.rep.many(fock.base.algebra.basis_array)))
    else:
        prev = generalized_intertwiner(pair, fock, k - 1)
        tf = pair.intertwiner @ pair.space.factor
        cols = []
        for i, j in fock.levels[k].tensor.pairs:
            cols.append(tf[:, i * h:(i + 1) * h] @ prev[:, j * h:(j + 1) * h])
        g = np.hstack(cols) if cols else np.zeros((h, 0), dtype=complex)
    cache[k] = g
    return g


def integrated_form(pair: CovariantPair, p) -> np.ndarray:
    """rho(p) = sigma(a0) + sum_k T~_k (eta_k (x) I_H)."""
    fock = p.fock
    h = pair.rep.space_dim
    out = np.zeros((h, h), dtype=complex)
    for k, c in p.terms.items():
        if k == 0:
            out += pair.rep(c)
        else:
            g = generalized_intertwiner(pair, fock, k)
            out += g @ np.kron(np.asarray(c).reshape(-1, 1), np.eye(h))
    return out

"""Finite-dimensional Hilbert C*-modules: correspondences and equivalence bimodules.

A module is stored abstractly: a linear basis xi_1..xi_d, the algebra-valued
Gram matrix <xi_i, xi_j> (shape ``(d, d, n, n)``), and the right/left
actions as d x d coordinate matrices.  Separated quotients and internal
tensor products then reduce to computations with Gram matrices.

Coordinates use the convention ``xi = sum_i c_i xi_i``; the right action of
``a`` is the matrix ``right(a)`` with ``coords(xi . a) = right(a) @ coords(xi)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .algebra import (
    EQ_TOL,
    DimensionError,
    StarAlgebra,
    hermitian_part,
    operator_norm,
    psd_sqrt,
)

RANK_RTOL = 1e-10


class CompositionError(ValueError):
    """Raised when two modules cannot be tensored (algebra mismatch)."""


def same_algebra(a: StarAlgebra, b: StarAlgebra) -> bool:
    return a is b or a.same_span(b)


@dataclass
class TensorData:
    """Bookkeeping for a separated quotient of an algebraic tensor product.

    ``pivots`` index the elementary tensors xi_i (x) eta_j (flat index
    ``i * right_dim + j``) kept as the quotient basis; ``quotient`` maps any
    algebraic vector to quotient coordinates.
    """

    left_dim: int
    right_dim: int
    pivots: np.ndarray
    quotient: np.ndarray

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return [divmod(int(p), self.right_dim) for p in self.pivots]

    def embedding(self) -> np.ndarray:
        e = np.zeros((self.left_dim * self.right_dim, len(self.pivots)), dtype=complex)
        e[self.pivots, np.arange(len(self.pivots))] = 1.0
        return e


class Correspondence:
    """A right Hilbert module over ``algebra`` with a left action of ``left_algebra``.

    Either per-basis action matrices or callables ``right_fn(a)`` /
    ``left_fn(a)`` (taking an ambient matrix) may be supplied; the latter is
    used when the acting algebra is too large to enumerate.
    """

    def __init__(
        self,
        algebra: StarAlgebra,
        gram: np.ndarray,
        right_action: Sequence[np.ndarray] | None = None,
        left_algebra: StarAlgebra | None = None,
        left_action: Sequence[np.ndarray] | None = None,
        *,
        right_fn: Callable[[np.ndarray], np.ndarray] | None = None,
        left_fn: Callable[[np.ndarray], np.ndarray] | None = None,
        labels: Sequence[str] | None = None,
        tensor: TensorData | None = None,
        name: str = "",
    ):
        self.algebra = algebra
        self.gram = np.asarray(gram, dtype=complex)
        d = self.gram.shape[0]
        n = algebra.ambient_dim
        if self.gram.shape != (d, d, n, n):
            raise DimensionError(f"gram shape {self.gram.shape} does not match ({d},{d},{n},{n})")
        self.dim = d
        self.left_algebra = left_algebra if left_algebra is not None else algebra
        if right_action is None and right_fn is None:
            raise ValueError("right action is required")
        if right_action is not None:
            self.__dict__["right_action"] = np.asarray(right_action, dtype=complex).reshape(-1, d, d)
        if left_action is not None:
            self.__dict__["left_action"] = np.asarray(left_action, dtype=complex).reshape(-1, d, d)
        self._right_fn = right_fn
        self._left_fn = left_fn
        if left_action is None and left_fn is None:
            # identity left action of the scalars only
            if self.left_algebra.dim != 1:
                raise ValueError("left action is required")
        self.labels = list(labels) if labels is not None else [f"x{i}" for i in range(d)]
        self.tensor = tensor
        self.name = name

    # -- actions -----------------------------------------------------------
    @cached_property
    def right_action(self) -> np.ndarray:
        return np.array([self._right_fn(b) for b in self.algebra.basis_array]).reshape(-1, self.dim, self.dim)

    @cached_property
    def left_action(self) -> np.ndarray:
        if self._left_fn is None:
            c = self.left_algebra.coords(self.left_algebra.identity)
            return np.array([np.eye(self.dim) * (1.0 / c[0])])
        return np.array([self._left_fn(b) for b in self.left_algebra.basis_array]).reshape(-1, self.dim, self.dim)

    def right(self, a: np.ndarray) -> np.ndarray:
        if self._right_fn is not None:
            return np.asarray(self._right_fn(np.asarray(a, dtype=complex)))
        return np.tensordot(self.algebra.coords(a), self.right_action, axes=(0, 0))

    def left(self, a: np.ndarray) -> np.ndarray:
        if self._left_fn is not None:
            return np.asarray(self._left_fn(np.asarray(a, dtype=complex)))
        return np.tensordot(self.left_algebra.coords(a), self.left_action, axes=(0, 0))

    def left_many(self, elements: np.ndarray) -> np.ndarray:
        """``left`` applied to an array of ambient matrices of shape (..., n, n)."""
        elements = np.asarray(elements, dtype=complex)
        lead = elements.shape[:-2]
        if self._left_fn is not None:
            flat = elements.reshape(-1, *elements.shape[-2:])
            out = np.array([self._left_fn(x) for x in flat])
            return out.reshape(*lead, self.dim, self.dim)
        return np.tensordot(self.left_algebra.coords(elements), self.left_action, axes=(-1, 0))

    # -- inner products ----------------------------------------------------
    def inner(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Algebra-valued inner product of coordinate vectors (conjugate-linear in u)."""
        return np.einsum("i,j,ijab->ab", np.conj(u), v, self.gram)

    @cached_property
    def scalar_gram(self) -> np.ndarray:
        """Gram matrix under the normalized trace of the coefficient algebra."""
        n = self.algebra.ambient_dim
        return hermitian_part(np.einsum("ijaa->ij", self.gram) / n)

    @cached_property
    def _roots(self) -> tuple[np.ndarray, np.ndarray]:
        return psd_sqrt(self.scalar_gram)

    def scalar_norm(self, op: np.ndarray, target: "Correspondence | None" = None) -> float:
        """Operator norm of a coordinate matrix w.r.t. the scalarized inner products."""
        target = self if target is None else target
        return operator_norm(target._roots[0] @ op @ self._roots[1])

    def vector_norm(self, v: np.ndarray) -> float:
        return float(np.sqrt(max(np.real(np.vdot(v, self.scalar_gram @ v)), 0.0)))

    def adjoint(self, op: np.ndarray, target: "Correspondence | None" = None) -> np.ndarray:
        """Adjoint of a module map ``op: self -> target`` in coordinates."""
        target = self if target is None else target
        return np.linalg.solve(self.scalar_gram, op.conj().T @ target.scalar_gram)

    def embed(self, coords: np.ndarray) -> np.ndarray:
        """Quotient coordinates to algebraic tensor coordinates (pivot embedding)."""
        if self.tensor is None:
            raise ValueError("module is not a tensor product")
        return self.tensor.embedding() @ coords

    def __repr__(self) -> str:
        return f"<Correspondence {self.name or ''} dim={self.dim} over {self.algebra!r}>"


def correspondence_from_vectors(
    algebra: StarAlgebra,
    vectors: Sequence[np.ndarray],
    inner: Callable[[np.ndarray, np.ndarray], np.ndarray],
    right: Callable[[np.ndarray, np.ndarray], np.ndarray],
    left_algebra: StarAlgebra | None = None,
    left: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
    name: str = "",
) -> Correspondence:
    """Build a Correspondence from a concrete model.

    ``vectors`` are arrays of any common shape spanning the module linearly
    (they must be linearly independent); ``inner(x, y)`` returns an ambient
    matrix in ``algebra``; ``right(x, a)`` and ``left(a, x)`` return arrays of
    the vectors' shape.
    """
    vecs = np.array([np.asarray(v, dtype=complex).ravel() for v in vectors])
    d = len(vecs)
    if np.linalg.matrix_rank(vecs) < d:
        raise ValueError("module vectors are linearly dependent")
    pinv = np.linalg.pinv(vecs.T)
    shape = np.asarray(vectors[0]).shape

    def coords(y):
        return pinv @ np.asarray(y, dtype=complex).ravel()

    gram = np.array([[inner(vectors[i], vectors[j]) for j in range(d)] for i in range(d)], dtype=complex)
    ra = [np.column_stack([coords(right(np.asarray(v).reshape(shape), b)) for v in vectors])
          for b in algebra.basis_array]
    la = None
    left_algebra = left_algebra if left_algebra is not None else algebra
    if left is not None:
        la = [np.column_stack([coords(left(b, np.asarray(v).reshape(shape))) for v in vectors])
              for b in left_algebra.basis_array]
    elif left_algebra.dim != 1:
        raise ValueError("left action is required")
    return Correspondence(algebra, gram, ra, left_algebra, la, name=name)


def algebra_as_module(m: StarAlgebra) -> Correspondence:
    """M as a correspondence over itself: <a, b> = a* b, both actions by multiplication."""
    return correspondence_from_vectors(
        m, m.basis, lambda x, y: x.conj().T @ y, lambda x, a: x @ a,
        m, lambda a, x: a @ x, name="M",
    )


def scalar_module(d: int) -> Correspondence:
    """C^d over C with the standard inner product."""
    c = StarAlgebra.scalars(1)
    gram = np.zeros((d, d, 1, 1), dtype=complex)
    gram[np.arange(d), np.arange(d), 0, 0] = 1.0
    eye = np.eye(d, dtype=complex)
    return Correspondence(c, gram, [eye], c, [eye], name=f"C^{d}")


def gram_scale(gram: np.ndarray) -> float:
    """Largest operator norm of a diagonal Gram entry (the size of the spanning vectors)."""
    d = gram.shape[0]
    if d == 0:
        return 0.0
    return max(operator_norm(gram[i, i]) for i in range(d))


def _rank_and_pivots(s: np.ndarray, rtol: float, scale: float = 0.0) -> tuple[int, np.ndarray]:
    # the cutoff is relative to max(top eigenvalue, natural scale) so that an
    # identically zero Gram is not mistaken for one of full rank
    w = np.linalg.eigvalsh(s)
    top = w[-1] if w.size else 0.0
    ref = max(top, scale)
    if ref <= 0:
        return 0, np.zeros(0, dtype=int)
    rank = int(np.sum(w > rtol * ref))
    if rank == 0:
        return 0, np.zeros(0, dtype=int)
    _, _, piv = scipy.linalg.qr(s, pivoting=True)
    return rank, np.sort(piv[:rank])


def internal_tensor(e: Correspondence, f: Correspondence, rtol: float = RANK_RTOL) -> Correspondence:
    """Separated internal tensor product E (x)_M F.

    Requires that F's left-acting algebra is E's coefficient algebra.  The
    algebraic Gram <xi1 (x) eta1, xi2 (x) eta2> = <eta1, phi(<xi1, xi2>) eta2>
    is scalarized by the normalized trace; its nullspace is quotiented out and
    a basis of elementary tensors is chosen by column-pivoted QR.
    """
    if not same_algebra(f.left_algebra, e.algebra):
        raise CompositionError(f"cannot form {e!r} (x) {f!r}: algebra mismatch")
    de, df = e.dim, f.dim
    phi = f.left_many(e.gram)  # (de, de, df, df): phi(<e_i, e_k>)
    gram = np.einsum("ikpl,jpxy->ijklxy", phi, f.gram).reshape(de * df, de * df, *f.gram.shape[2:])
    n = f.algebra.ambient_dim
    s = hermitian_part(np.einsum("ijaa->ij", gram) / n)
    rank, piv = _rank_and_pivots(s, rtol, gram_scale(e.gram) * gram_scale(f.gram))
    if rank:
        quotient = np.linalg.solve(s[np.ix_(piv, piv)], s[piv, :])
    else:
        quotient = np.zeros((0, de * df), dtype=complex)
    data = TensorData(de, df, piv, quotient)
    g = gram[np.ix_(piv, piv)]
    eye_e, eye_f = np.eye(de), np.eye(df)

    def right_fn(b):
        return quotient @ np.kron(eye_e, f.right(b))[:, piv]

    def left_fn(a):
        return quotient @ np.kron(e.left(a), eye_f)[:, piv]

    labels = [f"{e.labels[i]}*{f.labels[j]}" for i, j in data.pairs]
    out = Correspondence(
        f.algebra, g, None, e.left_algebra, None,
        right_fn=right_fn, left_fn=left_fn, labels=labels, tensor=data,
        name=f"({e.name})({f.name})",
    )
    if f._right_fn is None:
        out.__dict__["right_action"] = np.array([right_fn(b) for b in f.algebra.basis_array])
    if e._left_fn is None:
        out.__dict__["left_action"] = np.array([left_fn(a) for a in e.left_algebra.basis_array])
    return out


def direct_sum(mods: Sequence[Correspondence]) -> Correspondence:
    """Orthogonal direct sum of modules over a common pair of algebras."""
    first = mods[0]
    dims = [m.dim for m in mods]
    d = sum(dims)
    n = first.algebra.ambient_dim
    gram = np.zeros((d, d, n, n), dtype=complex)
    offs = np.concatenate([[0], np.cumsum(dims)])
    for m, o in zip(mods, offs):
        if not same_algebra(m.algebra, first.algebra):
            raise CompositionError("direct summands have different coefficient algebras")
        gram[o:o + m.dim, o:o + m.dim] = m.gram

    def blocks(mats):
        return scipy.linalg.block_diag(*mats) if d else np.zeros((0, 0), dtype=complex)

    def right_fn(b):
        return blocks([m.right(b) for m in mods])

    def left_fn(a):
        return blocks([m.left(a) for m in mods])

    labels = [f"{k}:{lab}" for k, m in enumerate(mods) for lab in m.labels]
    return Correspondence(first.algebra, gram, None, first.left_algebra, None,
                          right_fn=right_fn, left_fn=left_fn, labels=labels, name="sum")


def submodule(mod: Correspondence, index: Sequence[int], left_fn=None, left_algebra=None) -> Correspondence:
    """Restriction to the span of some basis vectors (assumed invariant)."""
    idx = np.asarray(index, dtype=int)
    left_algebra = left_algebra if left_algebra is not None else mod.left_algebra
    if left_fn is None:
        def left_fn(a):
            return mod.left(a)[np.ix_(idx, idx)]
    return Correspondence(
        mod.algebra, mod.gram[np.ix_(idx, idx)], None, left_algebra, None,
        right_fn=lambda b: mod.right(b)[np.ix_(idx, idx)], left_fn=left_fn,
        labels=[mod.labels[i] for i in idx], name=f"sub({mod.name})",
    )


# -- checks ------------------------------------------------------------------

def _max_op_norm(arr: np.ndarray) -> float:
    if arr.size == 0:
        return 0.0
    flat = arr.reshape(-1, *arr.shape[-2:])
    return max(operator_norm(x) for x in flat)


def check_correspondence_axioms(e: Correspondence, tol: float = EQ_TOL) -> dict[str, float]:
    """Named residuals of the correspondence axioms (all 0 for a valid module)."""
    g = e.gram
    herm = _max_op_norm(g - np.conj(np.swapaxes(np.swapaxes(g, 0, 1), 2, 3)))
    # positivity: the block matrix [<xi_i, xi_j>] is PSD in M_d(M_n)
    d, n = e.dim, e.algebra.ambient_dim
    block = hermitian_part(np.transpose(g, (0, 2, 1, 3)).reshape(d * n, d * n))
    w = np.linalg.eigvalsh(block) if block.size else np.zeros(1)
    positivity = float(max(0.0, -w.min()))
    s = np.linalg.eigvalsh(e.scalar_gram) if d else np.ones(1)
    degenerate = float(max(0.0, RANK_RTOL * max(s.max(), 1.0) - s.min()))
    right = 0.0
    for b in e.algebra.basis_array:
        rb = e.right(b)
        lhs = np.einsum("lj,ilab->ijab", rb, g)
        rhs = g @ b
        right = max(right, _max_op_norm(lhs - rhs))
    left = 0.0
    for a in e.left_algebra.basis_array:
        la = e.left(a)
        las = e.left(a.conj().T)
        lhs = np.einsum("li,ljab->ijab", la.conj(), g)
        rhs = np.einsum("lj,ilab->ijab", las, g)
        left = max(left, _max_op_norm(lhs - rhs))
    # scalarized norms need a definite Gram; fall back to coordinate norms otherwise
    norm = e.scalar_norm if positivity == 0.0 and s.min() > 0 else operator_norm
    mult = 0.0
    lbasis = e.left_algebra.basis_array if e.left_algebra.dim <= 64 else []
    for a in lbasis:
        for b in lbasis:
            mult = max(mult, norm(e.left(a @ b) - e.left(a) @ e.left(b)))
    unit = norm(e.left(e.left_algebra.identity) - np.eye(d)) if d else 0.0
    return {
        "gram_hermitian": herm,
        "gram_positive": positivity,
        "gram_nondegenerate": degenerate,
        "right_compatibility": right,
        "left_adjointable": left,
        "left_multiplicative": mult,
        "left_unital": unit,
    }


@dataclass
class EquivalenceBimodule:
    """An M,N-equivalence bimodule: a right N-module with left M action and M-valued Gram."""

    left_algebra: StarAlgebra
    right_algebra: StarAlgebra
    as_right_module: Correspondence
    left_gram_fn: Callable[[], np.ndarray] | None = None
    _left_gram: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.as_right_module.dim

    @property
    def left_gram(self) -> np.ndarray:
        if self._left_gram is None:
            self._left_gram = np.asarray(self.left_gram_fn(), dtype=complex)
        return self._left_gram

    @classmethod
    def from_vectors(cls, m: StarAlgebra, n: StarAlgebra, vectors, name: str = "X") -> "EquivalenceBimodule":
        """Bimodule of rectangular matrices: <x,y>_N = x* y, M<x,y> = x y*."""
        mod = correspondence_from_vectors(
            n, vectors, lambda x, y: x.conj().T @ y, lambda x, b: x @ b,
            m, lambda a, x: a @ x, name=name,
        )
        lg = np.array([[x @ y.conj().T for y in vectors] for x in vectors], dtype=complex)
        return cls(m, n, mod, _left_gram=lg)


def column_bimodule(k: int) -> EquivalenceBimodule:
    """C^k as an (M_k, C)-equivalence bimodule of column vectors."""
    vecs = [np.eye(k, 1, -i, dtype=complex) for i in range(k)]
    return EquivalenceBimodule.from_vectors(StarAlgebra.full_matrices(k), StarAlgebra.scalars(1), vecs,
                                            name=f"col{k}")


def identity_bimodule(m: StarAlgebra) -> EquivalenceBimodule:
    """M as an (M, M)-equivalence bimodule over itself."""
    return EquivalenceBimodule.from_vectors(m, m, m.basis, name="id")


def dual_bimodule(x: EquivalenceBimodule) -> EquivalenceBimodule:
    """The conjugate (opposite) module X~, an N,M-equivalence bimodule.

    With x~ conjugate-linear in x: <x~, y~>_M = M<x, y>, x~ . a = (a* x)~,
    b . x~ = (x b*)~ and N<x~, y~> = <x, y>_N.
    """
    mod = x.as_right_module
    conj_basis = lambda a: a.conj().T  # noqa: E731

    def right_fn(a):
        return np.conj(mod.left(conj_basis(a)))

    def left_fn(b):
        return np.conj(mod.right(conj_basis(b)))

    dual = Correspondence(
        x.left_algebra, x.left_gram, None, x.right_algebra, None,
        right_fn=right_fn, left_fn=left_fn,
        labels=[f"~{lab}" for lab in mod.labels], name=f"~{mod.name}",
    )
    if x.left_algebra.dim <= 256:
        dual.__dict__["right_action"] = np.array([right_fn(a) for a in x.left_algebra.basis_array])
    if x.right_algebra.dim <= 256:
        dual.__dict__["left_action"] = np.array([left_fn(b) for b in x.right_algebra.basis_array])
    return EquivalenceBimodule(x.right_algebra, x.left_algebra, dual, _left_gram=mod.gram.copy())


def _span_deficit(alg: StarAlgebra, values: np.ndarray, tol: float) -> int:
    vecs = alg.coords(values.reshape(-1, alg.ambient_dim, alg.ambient_dim))
    if vecs.size == 0:
        return alg.dim
    s = np.linalg.svd(vecs, compute_uv=False)
    rank = int(np.sum(s > tol * max(s[0], 1.0)))
    return alg.dim - rank


def check_equivalence_bimodule(x: EquivalenceBimodule, tol: float = EQ_TOL) -> dict[str, float]:
    """Fullness deficits on both sides and the compatibility residual M<x,y>z - x<y,z>_N."""
    mod = x.as_right_module
    d = mod.dim
    right_def = _span_deficit(x.right_algebra, mod.gram, tol)
    left_def = _span_deficit(x.left_algebra, x.left_gram, tol)
    compat = 0.0
    eye = np.eye(d)
    for i in range(d):
        for j in range(d):
            lhs = mod.left(x.left_gram[i, j])  # column k: M<x_i,x_j> x_k
            rhs = np.column_stack([mod.right(mod.gram[j, k]) @ eye[i] for k in range(d)])
            compat = max(compat, float(np.max(np.abs(lhs - rhs), initial=0.0)))
    lg = x.left_gram
    lg_herm = _max_op_norm(lg - np.conj(np.swapaxes(np.swapaxes(lg, 0, 1), 2, 3)))
    return {
        "right_fullness_deficit": float(right_def),
        "left_fullness_deficit": float(left_def),
        "compatibility": compat,
        "left_gram_hermitian": lg_herm,
    }


@dataclass
class CorrespondenceMap:
    """A linear map between modules given in coordinates (target_dim x source_dim)."""

    source: Correspondence
    target: Correspondence
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if self.matrix.shape != (self.target.dim, self.source.dim):
            raise DimensionError(
                f"map of shape {self.matrix.shape} does not fit {self.source.dim} -> {self.target.dim}")

    @property
    def adjoint(self) -> np.ndarray:
        return self.source.adjoint(self.matrix, self.target)


def check_correspondence_isomorphism(
    w: CorrespondenceMap,
    tol: float = EQ_TOL,
    left_elements: Sequence[np.ndarray] | None = None,
    right_elements: Sequence[np.ndarray] | None = None,
) -> dict[str, float]:
    """Residuals for W being an isomorphism of correspondences.

    ``isometry`` is max_ij ||<W u_i, W u_j> - <u_i, u_j>|| over basis pairs;
    ``surjectivity`` is the rank deficit; the module-map residuals are
    scalarized operator norms, over the algebra bases unless explicit
    element lists are passed.
    """
    src, tgt, m = w.source, w.target, w.matrix
    pulled = np.einsum("pi,qj,pqab->ijab", m.conj(), m, tgt.gram)
    iso = _max_op_norm(pulled - src.gram)
    s = np.linalg.svd(tgt._roots[0] @ m, compute_uv=False) if m.size else np.zeros(0)
    top = s[0] if s.size else 0.0
    rank = int(np.sum(s > 1e-10 * max(top, 1.0)))
    lefts = left_elements if left_elements is not None else src.left_algebra.basis_array
    rights = right_elements if right_elements is not None else src.algebra.basis_array
    left = max((src.scalar_norm(m @ src.left(a) - tgt.left(a) @ m, tgt) for a in lefts), default=0.0)
    right = max((src.scalar_norm(m @ src.right(b) - tgt.right(b) @ m, tgt) for b in rights), default=0.0)
    return {
        "isometry": iso,
        "surjectivity": float(tgt.dim - rank),
        "left_intertwining": left,
        "right_intertwining": right,
    }

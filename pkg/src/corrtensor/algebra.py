"""Concrete *-subalgebras of M_n(C) and their commutants, with matrix helpers.

All algebras are given by a basis that is orthonormal for the trace
pairing <A, B> = tr(A* B).  Elements are plain ``numpy`` arrays.
"""
from __future__ import annotations

from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np

EQ_TOL = 1e-9
PSD_TOL = 1e-10


class DimensionError(ValueError):
    """Raised when matrix shapes do not fit together."""


def operator_norm(x: np.ndarray) -> float:
    """Largest singular value (0 for empty matrices)."""
    x = np.asarray(x)
    if x.size == 0:
        return 0.0
    return float(np.linalg.norm(x, 2))


def hermitian_part(x: np.ndarray) -> np.ndarray:
    return 0.5 * (x + x.conj().T)


def is_psd(x: np.ndarray, tol: float = PSD_TOL) -> bool:
    """True iff ``x`` is Hermitian within ``tol`` and has no eigenvalue below -tol."""
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {x.shape}")
    if x.size == 0:
        return True
    if np.max(np.abs(x - x.conj().T)) > tol:
        return False
    return bool(np.linalg.eigvalsh(hermitian_part(x)).min() >= -tol)


def psd_sqrt(s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (S^{1/2}, S^{-1/2}) for a positive definite Hermitian S."""
    w, v = np.linalg.eigh(hermitian_part(s))
    if w.size and w.min() <= 0:
        raise np.linalg.LinAlgError("matrix is not positive definite")
    r = np.sqrt(w)
    return (v * r) @ v.conj().T, (v / r) @ v.conj().T


def null_space(a: np.ndarray, rtol: float = 1e-10, atol: float = 1e-12) -> np.ndarray:
    """Orthonormal basis (columns) for the kernel of ``a``."""
    a = np.atleast_2d(a)
    ncols = a.shape[1]
    if a.shape[0] == 0:
        return np.eye(ncols, dtype=complex)
    _, s, vh = np.linalg.svd(a, full_matrices=True)
    cut = max(atol, rtol * (s[0] if s.size else 0.0))
    rank = int(np.sum(s > cut))
    return vh[rank:].conj().T


def gram_schmidt(vectors: Iterable[np.ndarray], tol: float = 1e-10) -> list[np.ndarray]:
    """Orthonormalize flat vectors in the given order, dropping dependent ones.

    Two passes of classical Gram-Schmidt per vector keep the result
    orthonormal to machine precision.
    """
    basis: list[np.ndarray] = []
    for v in vectors:
        v = np.asarray(v, dtype=complex).ravel()
        scale = np.linalg.norm(v)
        if scale == 0:
            continue
        w = v.copy()
        for _ in range(2):
            for b in basis:
                w = w - np.vdot(b, w) * b
        nw = np.linalg.norm(w)
        if nw > tol * max(1.0, scale):
            basis.append(w / nw)
    return basis


def _echelon(null: np.ndarray) -> np.ndarray:
    # Reduced column-echelon form of a null-space basis: gives matrix-unit-like
    # vectors, so bases do not depend on LAPACK's choice of rotation.
    if null.shape[1] == 0:
        return null
    import scipy.linalg

    _, _, piv = scipy.linalg.qr(null.conj().T, pivoting=True, mode="economic")
    rows = np.sort(piv[: null.shape[1]])
    return null @ np.linalg.inv(null[rows, :])


class StarAlgebra:
    """A unital *-subalgebra of M_n(C) given by a trace-orthonormal basis.

    ``basis`` may be supplied eagerly, or a ``factory`` may be given that
    builds it on first use.  ``full=True`` denotes all of M_n(C), for which
    the matrix units are the basis and coordinates are just the entries.
    """

    def __init__(
        self,
        ambient_dim: int,
        basis: Sequence[np.ndarray] | None = None,
        *,
        factory: Callable[[], list[np.ndarray]] | None = None,
        full: bool = False,
        name: str = "",
    ):
        self.ambient_dim = int(ambient_dim)
        self.full = full
        self.name = name
        self._factory = factory
        if basis is not None:
            arr = np.asarray(basis, dtype=complex).reshape(-1, self.ambient_dim, self.ambient_dim)
            self.__dict__["basis_array"] = arr

    @classmethod
    def full_matrices(cls, n: int) -> "StarAlgebra":
        return cls(n, full=True, name=f"M_{n}")

    @classmethod
    def scalars(cls, n: int = 1) -> "StarAlgebra":
        return cls(n, [np.eye(n) / np.sqrt(n)], name=f"C*I_{n}")

    @classmethod
    def block_diagonal(cls, sizes: Sequence[int], unitary: np.ndarray | None = None) -> "StarAlgebra":
        """Direct sum of full matrix blocks, optionally conjugated by ``unitary``."""
        n = int(sum(sizes))
        basis = []
        off = 0
        for s in sizes:
            for i in range(s):
                for j in range(s):
                    e = np.zeros((n, n), dtype=complex)
                    e[off + i, off + j] = 1.0
                    if unitary is not None:
                        e = unitary @ e @ unitary.conj().T
                    basis.append(e)
            off += s
        return cls(n, basis, name="+".join(f"M_{s}" for s in sizes))

    @cached_property
    def basis_array(self) -> np.ndarray:
        n = self.ambient_dim
        if self.full:
            return np.eye(n * n, dtype=complex).reshape(n * n, n, n)
        if self._factory is None:
            raise ValueError("algebra has no basis")
        return np.asarray(self._factory(), dtype=complex).reshape(-1, n, n)

    @property
    def basis(self) -> list[np.ndarray]:
        return list(self.basis_array)

    @property
    def dim(self) -> int:
        if self.full:
            return self.ambient_dim ** 2
        return self.basis_array.shape[0]

    def coords(self, x: np.ndarray) -> np.ndarray:
        """Coefficients of ``x`` in the basis (orthogonal projection if x is outside)."""
        x = np.asarray(x, dtype=complex)
        if self.full:
            return x.reshape(*x.shape[:-2], -1)
        return np.einsum("kab,...ab->...k", self.basis_array.conj(), x)

    def element(self, coeffs: np.ndarray) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=complex)
        n = self.ambient_dim
        if self.full:
            return coeffs.reshape(*coeffs.shape[:-1], n, n)
        return np.tensordot(coeffs, self.basis_array, axes=(-1, 0))

    def project(self, x: np.ndarray) -> np.ndarray:
        return self.element(self.coords(x))

    def distance(self, x: np.ndarray) -> float:
        """Frobenius distance of ``x`` from the algebra."""
        if self.full:
            return 0.0
        return float(np.linalg.norm(np.asarray(x) - self.project(x)))

    def contains(self, x: np.ndarray, tol: float = EQ_TOL) -> bool:
        return self.distance(x) <= tol * max(1.0, float(np.linalg.norm(x)))

    @property
    def identity(self) -> np.ndarray:
        return np.eye(self.ambient_dim, dtype=complex)

    def closure_residual(self) -> float:
        """Largest distance of a basis product or adjoint from the span."""
        b = self.basis_array
        worst = max((self.distance(x.conj().T) for x in b), default=0.0)
        for x in b:
            prods = np.einsum("ab,kbc->kac", x, b)
            d = prods - self.project(prods)
            worst = max(worst, float(np.max(np.linalg.norm(d, axis=(1, 2)), initial=0.0)))
        return worst

    def same_span(self, other: "StarAlgebra", tol: float = EQ_TOL) -> bool:
        if self is other:
            return True
        if self.ambient_dim != other.ambient_dim or self.dim != other.dim:
            return False
        return all(self.contains(b, tol) for b in other.basis_array)

    def __repr__(self) -> str:
        label = self.name or "StarAlgebra"
        return f"<{label} in M_{self.ambient_dim}>"


def _check_square(gens: Sequence[np.ndarray], n: int) -> list[np.ndarray]:
    out = []
    for g in gens:
        g = np.asarray(g, dtype=complex)
        if g.shape != (n, n):
            raise DimensionError(f"generator of shape {g.shape} is not {n}x{n}")
        out.append(g)
    return out


def star_algebra_from_generators(gens: Sequence[np.ndarray], ambient_dim: int,
                                 tol: float = 1e-10) -> StarAlgebra:
    """Smallest unital *-subalgebra of M_n containing ``gens``.

    Closure is reached by repeatedly adding adjoints and pairwise products
    until the dimension stops growing (at most n^2).
    """
    n = int(ambient_dim)
    gens = _check_square(gens, n)
    seed = [np.eye(n)] + gens + [g.conj().T for g in gens]
    basis = gram_schmidt([g.ravel() for g in seed], tol)
    while True:
        mats = [b.reshape(n, n) for b in basis]
        cand = [x.conj().T.ravel() for x in mats]
        cand += [(x @ y).ravel() for x in mats for y in mats]
        new = gram_schmidt(basis + cand, tol)
        if len(new) == len(basis) or len(new) >= n * n:
            basis = new
            break
        basis = new
    if len(basis) == n * n:
        return StarAlgebra.full_matrices(n)
    return StarAlgebra(n, [b.reshape(n, n) for b in basis])


def commutant_basis(mats: Sequence[np.ndarray], n: int, tol: float = 1e-10) -> list[np.ndarray]:
    """Trace-orthonormal basis of {x : x m = m x for all m in ``mats``}."""
    eye = np.eye(n)
    rows = [np.kron(m, eye) - np.kron(eye, m.T) for m in mats]
    if not rows:
        return list(np.eye(n * n, dtype=complex).reshape(n * n, n, n))
    null = _echelon(null_space(np.vstack(rows), rtol=tol))
    vecs = gram_schmidt(null.T, tol)
    return [v.reshape(n, n) for v in vecs]


def commutant(a: StarAlgebra, tol: float = 1e-10) -> StarAlgebra:
    """The commutant {x : xa = ax for all a in A} as a StarAlgebra."""
    n = a.ambient_dim
    if a.full:
        return StarAlgebra.scalars(n)
    basis = commutant_basis(a.basis, n, tol)
    if len(basis) == n * n:
        return StarAlgebra.full_matrices(n)
    return StarAlgebra(n, basis, name=f"({a.name or 'A'})'")

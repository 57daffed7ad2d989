"""Seeded instance generators for block algebras and the modules and
contexts built over them.

A random context takes N = (+)_i M_{q_i} and M = (+)_i M_{p_i} (same number
of blocks), X = block-diagonal p_i x q_i matrices, F a sum of corners
p_i M p_j of N with multiplicities, and E := X (x) F (x) X~.  Then
W(x (x) f (x) y~ (x) z) = x (x) f <y, z>_N is an isomorphism by construction.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import block_diag
from scipy.stats import unitary_group

from .algebra import StarAlgebra, commutant
from .correspondence import (
    Correspondence,
    EquivalenceBimodule,
    correspondence_from_vectors,
    dual_bimodule,
    internal_tensor,
    scalar_module,
)
from .morita import MoritaContext, context_from_alg_map
from .representation import CovariantPair, Representation, random_ball_point, sigma_dual


def _offsets(sizes):
    return np.concatenate([[0], np.cumsum(sizes)]).astype(int)


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    if n == 1:
        return np.exp(2j * np.pi * rng.uniform()) * np.ones((1, 1))
    return unitary_group.rvs(n, random_state=rng)


def block_algebra(sizes, unitary=None) -> StarAlgebra:
    alg = StarAlgebra.block_diagonal(list(sizes), unitary)
    alg.block_sizes = [int(s) for s in sizes]
    alg.block_unitary = np.eye(alg.ambient_dim) if unitary is None else unitary
    return alg


def _corner_units(rows, cols, i, j, u_row, u_col):
    ro, co = _offsets(rows), _offsets(cols)
    out = []
    for a in range(rows[i]):
        for b in range(cols[j]):
            e = np.zeros((ro[-1], co[-1]), dtype=complex)
            e[ro[i] + a, co[j] + b] = 1.0
            out.append(u_row @ e @ u_col.conj().T)
    return out


def block_correspondence(sizes, mult, unitary=None, name: str = "F") -> Correspondence:
    """Sum over (i, j) of mult[i][j] copies of the corner p_i N p_j, N = (+) M_{sizes}.

    Vectors are stacks (x_1..x_s) with <x, y> = sum_r x_r* y_r and
    actions by matrix multiplication in each slot.
    """
    sizes = list(sizes)
    n = int(sum(sizes))
    u = np.eye(n) if unitary is None else unitary
    alg = block_algebra(sizes, u)
    slots = [(i, j) for i in range(len(sizes)) for j in range(len(sizes)) for _ in range(int(mult[i][j]))]
    vecs = []
    for r, (i, j) in enumerate(slots):
        for e in _corner_units(sizes, sizes, i, j, u, u):
            v = np.zeros((len(slots), n, n), dtype=complex)
            v[r] = e
            vecs.append(v)
    return correspondence_from_vectors(
        alg, vecs,
        lambda x, y: np.einsum("rba,rbc->ac", x.conj(), y),
        lambda x, b: x @ b, alg, lambda a, x: a @ x, name=name)


def rectangular_bimodule(p_sizes, q_sizes, u_m=None, u_n=None, name: str = "X") -> EquivalenceBimodule:
    """Block-diagonal p_i x q_i matrices: an equivalence between (+) M_{p_i} and (+) M_{q_i}."""
    pm, qn = int(sum(p_sizes)), int(sum(q_sizes))
    u_m = np.eye(pm) if u_m is None else u_m
    u_n = np.eye(qn) if u_n is None else u_n
    m, n = block_algebra(p_sizes, u_m), block_algebra(q_sizes, u_n)
    vecs = []
    for i in range(len(p_sizes)):
        vecs += _corner_units(p_sizes, q_sizes, i, i, u_m, u_n)
    return EquivalenceBimodule.from_vectors(m, n, vecs, name=name)


def conjugated_context(f: Correspondence, x: EquivalenceBimodule, name: str = "ctx") -> MoritaContext:
    """The context with E = X (x) F (x) X~ and W contracting X~ (x) X to N."""
    xmod = x.as_right_module
    xd = dual_bimodule(x)
    fx = internal_tensor(f, xd.as_right_module)
    e = internal_tensor(xmod, fx)
    xf = internal_tensor(xmod, f)
    d_x = xmod.dim
    cols = []
    eye_x, eye_f = np.eye(d_x), np.eye(f.dim)
    for i, q in e.tensor.pairs:
        j, k = fx.tensor.pairs[q]
        for l in range(d_x):
            g = f.right(xmod.gram[k, l]) @ eye_f[j]
            cols.append(xf.tensor.quotient @ np.kron(eye_x[i], g))
    ctx = context_from_alg_map(e, f, x, np.column_stack(cols), name=name)
    return ctx


def random_block_sizes(rng, max_ambient: int = 3, blocks: int | None = None):
    blocks = rng.integers(1, max_ambient + 1) if blocks is None else blocks
    while True:
        sizes = list(rng.integers(1, max_ambient + 1, size=blocks))
        if sum(sizes) <= max_ambient:
            return sizes


def random_multiplicities(rng, k: int, sizes, max_dim: int = 9):
    """Entries in {0,1,2}, every row nonzero (unital left action), module dim <= max_dim."""
    smallest = sum(s * min(sizes) for s in sizes)
    if smallest > max_dim:
        raise ValueError(f"no multiplicity pattern for blocks {list(sizes)} fits dimension {max_dim}")
    while True:
        mult = rng.integers(0, 3, size=(k, k))
        if not all(mult.sum(axis=1) > 0):
            continue
        dim = sum(mult[i, j] * sizes[i] * sizes[j] for i in range(k) for j in range(k))
        if dim <= max_dim:
            return mult


def random_context(rng: np.random.Generator, max_ambient: int = 3) -> MoritaContext:
    q = random_block_sizes(rng, max_ambient)
    k = len(q)
    p = random_block_sizes(rng, max_ambient, blocks=k)
    mult = random_multiplicities(rng, k, q)
    u_n, u_m = random_unitary(sum(q), rng), random_unitary(sum(p), rng)
    f = block_correspondence(q, mult, u_n)
    x = rectangular_bimodule(p, q, u_m, u_n)
    ctx = conjugated_context(f, x, name="random")
    ctx.meta = {"N_blocks": [int(s) for s in q], "M_blocks": [int(s) for s in p],
                "multiplicities": mult.tolist()}
    return ctx


def block_representation(n: StarAlgebra, sizes, mults, unitary=None, u_n=None) -> Representation:
    """b -> V ((+)_i b_i (x) I_{m_i}) V* with b_i the blocks of u_n* b u_n."""
    off = _offsets(sizes)
    u_n = np.eye(n.ambient_dim) if u_n is None else u_n
    h = int(sum(s * m for s, m in zip(sizes, mults)))
    v = np.eye(h) if unitary is None else unitary

    def fn(b):
        c = u_n.conj().T @ b @ u_n
        parts = [np.kron(c[off[i]:off[i + 1], off[i]:off[i + 1]], np.eye(m))
                 for i, m in enumerate(mults) if m]
        return v @ block_diag(*parts) @ v.conj().T

    return Representation(n, h, np.array([fn(b) for b in n.basis_array]), name="block")


def random_representation(n: StarAlgebra, rng: np.random.Generator, max_dim: int = 4) -> Representation:
    """Multiplicities in {0,1,2} per block (not all zero), dim H <= max_dim, random unitary twist."""
    sizes, u_n = _blocks_of(n)
    while True:
        mults = list(rng.integers(0, 3, size=len(sizes)))
        h = sum(s * m for s, m in zip(sizes, mults))
        if 0 < h <= max_dim:
            break
    return block_representation(n, sizes, mults, random_unitary(h, rng), u_n)


def _blocks_of(n: StarAlgebra):
    """Block sizes and a unitary u with u* N u block diagonal in standard form."""
    if hasattr(n, "block_sizes"):
        return n.block_sizes, n.block_unitary
    if n.full or n.dim == 1:
        return [n.ambient_dim], np.eye(n.ambient_dim)
    # eigenspaces of a generic central element; valid when every block has multiplicity one
    centre = commutant(n)
    z = sum(c * k for k, c in enumerate(centre.basis_array, start=1))
    z = 0.5 * (z + z.conj().T)
    w, v = np.linalg.eigh(z)
    cuts = [0] + [k for k in range(1, len(w)) if abs(w[k] - w[k - 1]) > 1e-8] + [len(w)]
    return [b - a for a, b in zip(cuts, cuts[1:])], v


def scalar_representation(h: int) -> Representation:
    c = StarAlgebra.scalars(1)
    return Representation(c, h, [np.eye(h)], name=f"id_C^{h}")


def column_context(d: int, k: int = 2) -> MoritaContext:
    """F = C^d over C, X = C^k over (M_k, C), E = X (x) F (x) X~ over M_k."""
    return conjugated_context(scalar_module(d), rectangular_bimodule([k], [1]), name=f"col{k}-C{d}")


def diagonal_instance() -> Correspondence:
    """M_2 over the diagonal algebra of M_2, with the standard bimodule structure."""
    return block_correspondence([1, 1], [[1, 1], [1, 1]], name="M2/diag")


def row_pair(t_list, sigma: Representation | None = None) -> CovariantPair:
    """The covariant pair over C^d whose intertwiner is the row [T_1, ..., T_d]."""
    t_list = [np.asarray(t, dtype=complex) for t in t_list]
    h = t_list[0].shape[0]
    sigma = scalar_representation(h) if sigma is None else sigma
    return CovariantPair(scalar_module(len(t_list)), sigma, np.hstack(t_list))


def random_point(f: Correspondence, sigma: Representation, rng, radius=None) -> CovariantPair:
    return random_ball_point(sigma_dual(f, sigma), rng, radius)

"""Morita contexts and the transform of covariant pairs, including the
canonical stabilization and its reconstruction operator.

A context carries E over M, F over N, an M,N-equivalence bimodule X and a
correspondence isomorphism W : E (x)_M X -> X (x)_N F.  The module
``EX`` is a concrete model of E (x)_M X.  For generic contexts it is the
separated tensor product itself; for the canonical stabilization it is
P0 F(F) with e (x) xi -> e xi, which keeps everything at the size of the
Fock space even when E = P0 M is too large to enumerate.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np

from .algebra import EQ_TOL, StarAlgebra, commutant_basis, operator_norm, psd_sqrt
from .correspondence import (
    CompositionError,
    Correspondence,
    CorrespondenceMap,
    EquivalenceBimodule,
    check_correspondence_isomorphism,
    correspondence_from_vectors,
    identity_bimodule,
    internal_tensor,
    same_algebra,
    submodule,
)
from .fock import TruncatedFock, build_truncated_fock, right_shift
from .representation import (
    CovariantPair,
    InducedSpace,
    Representation,
    check_covariant,
    induce_representation,
    induce_space,
    random_ball_point,
    sigma_dual,
)

EXPLICIT_E_LIMIT = 8


@dataclass
class MoritaContext:
    F: Correspondence
    X: EquivalenceBimodule
    EX: Correspondence
    XF: Correspondence
    W: CorrespondenceMap
    E: Correspondence | None = None
    EX_alg: np.ndarray | None = None
    left_elements: Callable[[], Iterable[np.ndarray]] | None = None
    name: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def M(self) -> StarAlgebra:
        return self.X.left_algebra

    @property
    def N(self) -> StarAlgebra:
        return self.X.right_algebra

    def check_elements(self) -> Iterable[np.ndarray]:
        """Elements of M used for left-action checks (the basis unless restricted)."""
        if self.left_elements is not None:
            return self.left_elements()
        return self.M.basis_array


def context_from_alg_map(e: Correspondence, f: Correspondence, x: EquivalenceBimodule,
                         w_alg: np.ndarray, name: str = "") -> MoritaContext:
    """Context whose W sends e_i (x) x_j to column ``i * dim X + j`` of ``w_alg`` (XF coordinates)."""
    if not same_algebra(e.algebra, x.left_algebra) or not same_algebra(f.algebra, x.right_algebra):
        raise CompositionError("E, F and X do not live over a common pair of algebras")
    ex = internal_tensor(e, x.as_right_module)
    xf = internal_tensor(x.as_right_module, f)
    w = CorrespondenceMap(ex, xf, np.asarray(w_alg)[:, ex.tensor.pivots])
    return MoritaContext(f, x, ex, xf, w, E=e, EX_alg=ex.tensor.quotient, name=name)


def trivial_context(f: Correspondence) -> MoritaContext:
    """X = N over itself, E = F, W(f (x) b) = 1 (x) f b."""
    n = f.algebra
    x = identity_bimodule(n)
    xf = internal_tensor(x.as_right_module, f)
    one = n.coords(n.identity)
    cols = []
    for i in range(f.dim):
        for b in n.basis_array:
            g = f.right(b) @ np.eye(f.dim)[i]
            cols.append(xf.tensor.quotient @ np.kron(one, g))
    return context_from_alg_map(f, f, x, np.column_stack(cols), name="trivial")


def check_context(ctx: MoritaContext, tol: float = EQ_TOL) -> dict[str, float]:
    return check_correspondence_isomorphism(ctx.W, tol, left_elements=ctx.check_elements())


# -- the transform --------------------------------------------------------------

@dataclass
class TransformData:
    """Induced spaces shared by every point over one representation sigma."""

    K: InducedSpace          # X (x)_sigma H
    rep: Representation      # sigma^X on K
    L1: InducedSpace         # F (x)_sigma H
    K2: InducedSpace         # X (x)_tau (F (x)_sigma H)
    D: InducedSpace          # (E (x) X) (x)_sigma H
    WI: np.ndarray           # W (x) I_H : D -> K2
    EK: InducedSpace | None = None
    U: np.ndarray | None = None


def transform_data(ctx: MoritaContext, sigma: Representation, l1: InducedSpace | None = None) -> TransformData:
    if not same_algebra(sigma.algebra, ctx.N):
        raise CompositionError("the representation does not act on the coefficient algebra of F")
    x, f = ctx.X.as_right_module, ctx.F
    K = induce_space(x, sigma)
    rep = induce_representation(x, sigma, K)
    L1 = induce_space(f, sigma) if l1 is None else l1
    tau = Representation(ctx.N, L1.dim, fn=lambda b: L1.operator(f.left(b)))
    K2 = induce_space(x, tau)
    D = induce_space(ctx.EX, sigma)
    h = sigma.space_dim
    w_alg = ctx.XF.embed(ctx.W.matrix)  # x_i (x) f_j algebraic coordinates
    WI = (K2.factor @ np.kron(np.eye(x.dim), L1.factor) @ np.kron(w_alg, np.eye(h)) @ D.pinv)
    data = TransformData(K, rep, L1, K2, D, WI)
    if ctx.E is not None:
        EK = induce_space(ctx.E, rep)
        U = (D.factor @ np.kron(ctx.EX_alg, np.eye(h))
             @ np.kron(np.eye(ctx.E.dim), K.pinv) @ EK.pinv)
        data.EK, data.U = EK, U
    return data


def morita_transform(ctx: MoritaContext, pair: CovariantPair, data: TransformData | None = None,
                     on_e: bool | None = None) -> CovariantPair:
    """(sigma, z*) -> (sigma^X, (I_X (x) z*)(W (x) I_H)).

    With ``on_e`` false (forced when E is not explicit) the result's
    intertwiner is expressed on EX (x)_sigma H, the concrete model of
    E (x)_{sigma^X} (X (x)_sigma H).
    """
    data = transform_data(ctx, pair.rep, pair.space) if data is None else data
    if pair.space.dim != data.L1.dim:
        raise CompositionError("covariant pair is not over F")
    dX = ctx.X.dim
    ixz = data.K.factor @ np.kron(np.eye(dX), pair.intertwiner) @ data.K2.pinv
    zx_d = ixz @ data.WI
    on_e = data.U is not None if on_e is None else on_e
    if on_e:
        if data.U is None:
            raise ValueError("E is not explicit in this context")
        return CovariantPair(ctx.E, data.rep, zx_d @ data.U, data.EK)
    return CovariantPair(ctx.EX, data.rep, zx_d, data.D)


def _rank(vectors: list[np.ndarray], tol: float = 1e-9) -> int:
    if not vectors:
        return 0
    s = np.linalg.svd(np.array([v.ravel() for v in vectors]), compute_uv=False)
    return int(np.sum(s > tol * max(s[0], 1e-300))) if s[0] > 0 else 0


def verify_functor(ctx: MoritaContext, trials: int, seed=None, sigma: Representation | None = None,
                   rng: np.random.Generator | None = None, tol: float = EQ_TOL) -> dict:
    """Isometry gaps, intertwining residuals and the dimension witness on random ball points."""
    rng = np.random.default_rng(seed) if rng is None else rng
    if sigma is None:
        from .instances import random_representation
        sigma = random_representation(ctx.N, rng)
    dual_f = sigma_dual(ctx.F, sigma)
    data = transform_data(ctx, sigma, dual_f.space)
    gaps, inter = [], []
    for _ in range(trials):
        pair = random_ball_point(dual_f, rng)
        out = morita_transform(ctx, pair, data)
        gaps.append(abs(out.norm - pair.norm))
        inter.append(check_covariant(out, elements=ctx.check_elements())["intertwining"])
    if ctx.E is not None and ctx.left_elements is None:
        dim_e = sigma_dual(ctx.E, data.rep).dim
        witness = "dual"
    else:
        imgs = [morita_transform(ctx, CovariantPair(ctx.F, sigma, z.conj().T, dual_f.space), data).intertwiner
                for z in dual_f.basis]
        dim_e = _rank(imgs)
        witness = "image_rank"
    return {
        "isometry_gap": max(gaps, default=0.0),
        "intertwining": max(inter, default=0.0),
        "dim_F_sigma": dual_f.dim,
        "dim_E_sigmaX": dim_e,
        "dims_equal": dual_f.dim == dim_e,
        "dim_witness": witness,
        "trials": trials,
    }


# -- canonical stabilization ----------------------------------------------------

@dataclass
class StabilizationResult:
    context: MoritaContext
    fock: TruncatedFock
    P0: np.ndarray
    R: CorrespondenceMap
    R_full: CorrespondenceMap
    whitening: np.ndarray
    truncation_level: int

    @property
    def M(self) -> StarAlgebra:
        return self.context.M

    def to_plain(self, a: np.ndarray) -> np.ndarray:
        """An element of M (orthonormal coordinates) as a matrix on Fock coordinates."""
        wh, iwh = self.whitening
        return iwh @ a @ wh

    def phi(self, a: np.ndarray) -> np.ndarray:
        """phi_M(a) = R (a (x) I_F) R* on Fock coordinates."""
        xf = self.context.XF
        return self.R_full.matrix @ xf.left(a) @ self.R_full.adjoint

    def theta(self, p: int, q: int) -> np.ndarray:
        """The rank-one module operator theta_{x_p, x_q} in M (x_p a Fock basis vector)."""
        fk = self.fock
        n = fk.base.algebra
        cq = n.coords(fk.module.gram[q])              # (total, dimN)
        ra = self._right_basis[:, :, p]               # (dimN, total)
        plain = np.einsum("kc,cx->xk", cq, ra)
        wh, iwh = self.whitening
        return wh @ plain @ iwh

    @cached_property
    def _right_basis(self) -> np.ndarray:
        return np.array([self.fock.module.right(b) for b in self.fock.base.algebra.basis_array])

    def window_generators(self) -> Iterable[np.ndarray]:
        top = int(self.fock.level_offsets[self.truncation_level])
        return (self.theta(p, q) for p in range(top) for q in range(top))

    def window_projection(self) -> np.ndarray:
        """Projection of X (x) F onto the part that R does not truncate."""
        return self.R_full.adjoint @ self.R_full.matrix


def canonical_stabilization(f: Correspondence, nmax: int, explicit_e: bool | None = None) -> StabilizationResult:
    """The canonical stabilization of (F, N) truncated at level ``nmax``.

    M is the algebra of module operators on the truncated Fock space,
    realized on orthonormal (whitened) coordinates: all matrices when N is
    the scalars, otherwise the commutant of the right N action.
    """
    if nmax < 2:
        raise ValueError("canonical stabilization needs Nmax >= 2")
    fock = build_truncated_fock(f, nmax)
    n = f.algebra
    total = fock.total_dim
    wh, iwh = psd_sqrt(fock.scalar_gram)
    mod = fock.module
    if n.dim == 1:
        m = StarAlgebra.full_matrices(total)
    else:
        rights = [wh @ mod.right(b) @ iwh for b in n.basis_array]
        m = StarAlgebra(total, factory=lambda: commutant_basis(rights, total), name="L_N(F)")

    def x_left(a):
        return iwh @ a @ wh

    xmod = Correspondence(n, mod.gram, None, m, None, right_fn=mod.right, left_fn=x_left,
                          labels=mod.labels, name="F(F)")
    stab = StabilizationResult.__new__(StabilizationResult)
    stab.fock, stab.whitening, stab.truncation_level = fock, (wh, iwh), nmax

    def left_gram():
        d = mod.dim
        return np.array([[stab.theta(p, q) for q in range(d)] for p in range(d)])

    x = EquivalenceBimodule(m, n, xmod, left_gram_fn=left_gram)
    xf = internal_tensor(xmod, f)
    r_full = right_shift(fock, levels=range(nmax + 1), source=xf)
    r_sub = right_shift(fock)
    p0 = fock.p0
    upper = np.arange(fock.level_offsets[1], total)

    def ex_left(a):
        return (r_full.matrix @ xf.left(a) @ r_full.adjoint)[np.ix_(upper, upper)]

    ex = submodule(mod, upper, left_fn=ex_left, left_algebra=m)
    w = CorrespondenceMap(ex, xf, r_full.adjoint[:, upper])
    stab.R, stab.R_full, stab.P0 = r_sub, r_full, p0
    ctx = MoritaContext(f, x, ex, xf, w, name=f"stab{nmax}",
                        meta={"window": fock.subcap_projection(), "truncation_level": nmax})
    stab.context = ctx
    ctx.left_elements = stab.window_generators
    if explicit_e is None:
        explicit_e = n.dim == 1 and total <= EXPLICIT_E_LIMIT
    if explicit_e:
        _attach_explicit_e(stab, upper)
    return stab


def _attach_explicit_e(stab: StabilizationResult, upper: np.ndarray) -> None:
    """E = P0 M with its matrix-unit basis and the map e (x) xi -> e xi onto EX."""
    ctx = stab.context
    m = ctx.M
    total = stab.fock.total_dim
    p0 = np.zeros((total, total))
    p0[upper, upper] = 1.0
    wh, iwh = stab.whitening
    p0w = wh @ p0 @ iwh
    vecs = []
    for b in m.basis_array:
        v = p0w @ b
        if np.linalg.norm(v) > 1e-12:
            vecs.append(v)
    from .algebra import gram_schmidt
    basis = [v.reshape(total, total) for v in gram_schmidt([v.ravel() for v in vecs])]

    def phi_w(a):
        return wh @ stab.phi(a) @ iwh

    e = correspondence_from_vectors(m, basis, lambda s, t: s.conj().T @ t, lambda s, a: s @ a,
                                    m, lambda a, s: phi_w(a) @ s, name="P0M")
    xmod = ctx.X.as_right_module
    cols = []
    for s in basis:
        act = (iwh @ s @ wh)[upper]
        for j in range(xmod.dim):
            cols.append(act[:, j])
    ctx.E = e
    ctx.EX_alg = np.column_stack(cols)


def check_stabilization(stab: StabilizationResult, tol: float = 1e-10) -> dict[str, float]:
    """RR* = P0, R*R = I, and W residuals on the sub-cap window."""
    ctx = stab.context
    r = stab.R
    rr = operator_norm(r.matrix @ r.adjoint - stab.P0)
    rsr = operator_norm(r.adjoint @ r.matrix - np.eye(r.source.dim))
    res = check_correspondence_isomorphism(ctx.W, tol, left_elements=ctx.check_elements())
    proj = stab.window_projection()
    s = np.linalg.svd(ctx.XF._roots[0] @ ctx.W.matrix, compute_uv=False)
    rank_w = int(np.sum(s > 1e-10 * max(s[0], 1.0)))
    rank_p = int(round(np.real(np.trace(proj))))
    res["surjectivity"] = float(rank_p - rank_w)
    res["RRstar_minus_P0"] = rr
    res["RstarR_minus_I"] = rsr
    res["phi_unital_on_P0"] = operator_norm(stab.phi(np.eye(stab.fock.total_dim)) - stab.P0)
    return res


# -- reconstruction ---------------------------------------------------------------

def reconstruction_operator(f: Correspondence, pair: CovariantPair, nmax: int,
                            stab: StabilizationResult | None = None) -> np.ndarray:
    """(R (x) I_H)(I_F(F) (x) T~*) on F(F) (x)_sigma H, in orthonormal coordinates."""
    stab = canonical_stabilization(f, nmax, explicit_e=False) if stab is None else stab
    ctx = stab.context
    xmod = ctx.X.as_right_module
    K = induce_space(xmod, pair.rep)
    h = pair.rep.space_dim
    lift = pair.space.pinv @ pair.intertwiner.conj().T
    rq = stab.R_full.matrix @ ctx.XF.tensor.quotient
    return K.factor @ np.kron(rq, np.eye(h)) @ np.kron(np.eye(xmod.dim), lift) @ K.pinv


def reconstruction_residual(stab: StabilizationResult, pair: CovariantPair) -> float:
    """Distance between the reconstruction operator and the adjoint of the transformed intertwiner."""
    ctx = stab.context
    rec = reconstruction_operator(ctx.F, pair, stab.truncation_level, stab)
    data = transform_data(ctx, pair.rep, pair.space)
    out = morita_transform(ctx, pair, data, on_e=False)
    total = stab.fock.total_dim
    upper = np.arange(stab.fock.level_offsets[1], total)
    emb = np.eye(total)[:, upper]
    h = pair.rep.space_dim
    iota = data.K.factor @ np.kron(emb, np.eye(h)) @ data.D.pinv
    return operator_norm(rec - iota @ out.intertwiner.conj().T)


def _words(d: int, nmax: int) -> list[tuple[int, ...]]:
    words: list[tuple[int, ...]] = [()]
    level = [()]
    for _ in range(nmax):
        level = [w + (i,) for w in level for i in range(d)]
        words.extend(level)
    return words


def right_creations(d: int, nmax: int) -> list[np.ndarray]:
    """Truncated R_i : w -> w i on the span of words of length <= nmax."""
    words = _words(d, nmax)
    index = {w: k for k, w in enumerate(words)}
    out = []
    for i in range(d):
        r = np.zeros((len(words), len(words)))
        for w, k in index.items():
            if len(w) < nmax:
                r[index[w + (i,)], k] = 1.0
        out.append(r)
    return out


def popescu_form(d: int, t_list: Sequence[np.ndarray], nmax: int, tol: float = 1e-9) -> np.ndarray:
    """sum_i R_i (x) T_i* with truncated right creation operators."""
    if len(t_list) != d:
        raise ValueError(f"expected {d} operators, got {len(t_list)}")
    t_list = [np.asarray(t, dtype=complex) for t in t_list]
    h = t_list[0].shape[0]
    row = sum(t @ t.conj().T for t in t_list)
    if np.linalg.eigvalsh(np.eye(h) - row).min() < -tol:
        raise ValueError("operators do not form a row contraction")
    return sum(np.kron(r, t.conj().T) for r, t in zip(right_creations(d, nmax), t_list))


def row_isometry_residual(d: int, nmax: int) -> float:
    """max |R_i* R_j - delta_ij I| on words shorter than nmax, plus range orthogonality."""
    rs = right_creations(d, nmax)
    sub = len(_words(d, nmax - 1))
    worst = 0.0
    for i, ri in enumerate(rs):
        for j, rj in enumerate(rs):
            g = (ri.T @ rj)[:sub, :sub]
            worst = max(worst, float(np.abs(g - (i == j) * np.eye(sub)).max()))
    total = sum(r @ r.T for r in rs)
    worst = max(worst, float(np.abs(total @ total - total).max()))
    return worst

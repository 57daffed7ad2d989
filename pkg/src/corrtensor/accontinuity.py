"""Completely positive maps Phi_z(a) = z*(I (x) a)z and the absolutely
continuous subspace they determine.

V_ac is computed as the span of ranges of pure superharmonic elements.
Candidates are a = (id - Phi)^{-1} c for PSD c; when Phi has spectrum near
the unit circle, c is first projected onto the spectral complement of the
peripheral part (a Schur-form spectral projector), and every candidate is
then tested directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.linalg

from .algebra import EQ_TOL, DimensionError, StarAlgebra, gram_schmidt, is_psd, operator_norm
from .representation import CovariantPair, InducedSpace

PERIPHERAL_CUT = 1e-8
DEFAULT_DEPTH = 200
MAX_DEPTH = 100_000
PURITY_TOL = 1e-10


@dataclass
class CPMap:
    """Phi(a) = T~ (I (x) a) T~* on a domain algebra of operators on H."""

    domain: StarAlgebra
    point: np.ndarray                       # T~ = z*
    amplify: Callable[[np.ndarray], np.ndarray]  # a -> I (x) a on the induced space

    def __call__(self, a: np.ndarray) -> np.ndarray:
        return self.point @ self.amplify(np.asarray(a, dtype=complex)) @ self.point.conj().T

    @cached_property
    def action(self) -> np.ndarray:
        return np.array([self(b) for b in self.domain.basis_array])

    @cached_property
    def matrix(self) -> np.ndarray:
        """Phi in the domain's orthonormal coordinates (column j = coords of Phi(b_j))."""
        return self.domain.coords(self.action).T

    @cached_property
    def spectrum(self) -> np.ndarray:
        return np.linalg.eigvals(self.matrix) if self.matrix.size else np.zeros(0)

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(self.spectrum), initial=0.0))

    def power(self, a: np.ndarray, n: int) -> np.ndarray:
        """Phi^n(a) through the linearization."""
        c = np.linalg.matrix_power(self.matrix, n) @ self.domain.coords(a)
        return self.domain.element(c)

    def check(self, tol: float = EQ_TOL) -> dict[str, float]:
        star = max((operator_norm(self(b.conj().T) - self(b).conj().T) for b in self.domain.basis_array),
                   default=0.0)
        closure = max((self.domain.distance(x) for x in self.action), default=0.0)
        return {"star": star, "closure": closure}


def cp_map_from_point(pair: CovariantPair, domain: StarAlgebra | None = None,
                      amplify: Callable | None = None) -> CPMap:
    """Phi_z on sigma(N)' (or on ``domain`` with a custom amplification)."""
    domain = pair.rep.commutant if domain is None else domain
    amplify = pair.space.base_operator if amplify is None else amplify
    return CPMap(domain, pair.intertwiner, amplify)


def _in_domain(a: np.ndarray, phi: CPMap, tol: float) -> None:
    a = np.asarray(a)
    if a.shape != (phi.domain.ambient_dim,) * 2:
        raise DimensionError(f"element of shape {a.shape} is not an operator on H")
    if not phi.domain.contains(a, max(tol, EQ_TOL)):
        raise ValueError("element is outside the domain of the CP map")


def is_superharmonic(a: np.ndarray, phi: CPMap, tol: float = PURITY_TOL) -> bool:
    _in_domain(a, phi, tol)
    return is_psd(a, tol) and is_psd(a - phi(a), tol)


def adaptive_depth(phi: CPMap, scale: float = 1.0, tol: float = PURITY_TOL) -> int:
    """Iterations after which rho^n * scale falls well below tol (rho: non-peripheral radius)."""
    mods = np.abs(phi.spectrum)
    inner = mods[mods <= 1 - PERIPHERAL_CUT]
    rho = float(inner.max(initial=0.0))
    if rho < 1e-3 or scale <= 0:
        return DEFAULT_DEPTH
    need = math.log(tol / (scale * 1e3)) / math.log(rho)
    return int(min(MAX_DEPTH, max(DEFAULT_DEPTH, 2 * math.ceil(need))))


def is_pure_superharmonic(a: np.ndarray, phi: CPMap, depth: int | None = None, tol: float = PURITY_TOL) -> bool:
    """Superharmonic and ||Phi^depth(a)|| <= tol.

    ``depth=None`` picks a depth from the spectral radius so that slowly
    decaying (rho close to 1) but pure elements are not rejected.
    """
    if not is_superharmonic(a, phi, tol):
        return False
    depth = adaptive_depth(phi, operator_norm(a), tol) if depth is None else depth
    return operator_norm(phi.power(a, depth)) <= tol


def psd_candidates(domain: StarAlgebra) -> list[np.ndarray]:
    """b_j* b_j, (b_j + b_k)*(b_j + b_k), (b_j + i b_k)*(b_j + i b_k) over the domain basis."""
    b = domain.basis_array
    out = [x.conj().T @ x for x in b]
    for j in range(len(b)):
        for k in range(j + 1, len(b)):
            for w in (1.0, 1j):
                y = b[j] + w * b[k]
                out.append(y.conj().T @ y)
    return out


@dataclass
class ACSubspace:
    space_dim: int
    projection: np.ndarray
    generating_ranges: list = field(default_factory=list)
    peripheral: int = 0
    spectral_radius: float = 0.0

    @property
    def rank(self) -> int:
        return int(round(np.real(np.trace(self.projection))))

    @property
    def indeterminate(self) -> bool:
        """Peripheral spectrum was present, so the finite test may under-approximate."""
        return self.peripheral > 0


def _solver(phi: CPMap):
    """Return (project, solve): spectral projection off the peripheral part and (id - Phi)^{-1} there."""
    L = phi.matrix
    k = L.shape[0]
    t, z, sdim = scipy.linalg.schur(L, output="complex", sort=lambda x: abs(x) <= 1 - PERIPHERAL_CUT)
    t11, t12, t22 = t[:sdim, :sdim], t[:sdim, sdim:], t[sdim:, sdim:]
    y = scipy.linalg.solve_sylvester(t11, -t22, t12) if 0 < sdim < k else np.zeros((sdim, k - sdim))
    lu = scipy.linalg.lu_factor(np.eye(sdim) - t11) if sdim else None

    def solve(c):
        w = z.conj().T @ c
        top = w[:sdim] + y @ w[sdim:]          # component in the non-peripheral invariant subspace
        if not sdim:
            return np.zeros_like(c)
        return z[:, :sdim] @ scipy.linalg.lu_solve(lu, top)

    return solve, k - sdim


def range_projection(elements: list[np.ndarray], n: int, tol: float = 1e-9) -> np.ndarray:
    if not elements:
        return np.zeros((n, n), dtype=complex)
    s = sum(elements)
    w, v = np.linalg.eigh(0.5 * (s + s.conj().T))
    keep = w > tol * max(w.max(), 1.0)
    vr = v[:, keep]
    return vr @ vr.conj().T


def ac_subspace(pair: CovariantPair | None = None, depth: int | None = None, tol: float = PURITY_TOL,
                phi: CPMap | None = None, candidates: list[np.ndarray] | None = None) -> ACSubspace:
    """Projection onto the span of ranges of pure superharmonic candidates."""
    phi = cp_map_from_point(pair) if phi is None else phi
    n = phi.domain.ambient_dim
    candidates = psd_candidates(phi.domain) if candidates is None else candidates
    solve, npe = _solver(phi)
    accepted = []
    for c in candidates:
        a = phi.domain.element(solve(phi.domain.coords(c)))
        a = 0.5 * (a + a.conj().T)
        nrm = operator_norm(a)
        if nrm <= 1e-12:
            continue
        a = a / nrm
        if is_pure_superharmonic(a, phi, depth, tol):
            accepted.append(a)
    return ACSubspace(n, range_projection(accepted, n), accepted, npe, phi.spectral_radius)


# -- Morita invariance ----------------------------------------------------------

def _transformed_amplifier(ctx, data, out: CovariantPair):
    """I_E (x) (I_X (x) a) on the transformed pair's induced space, as a function of a in sigma(N)'."""
    if out.space is data.D:
        return lambda a: data.D.base_operator(a)
    return lambda a: out.space.base_operator(data.K.base_operator(a))


def verify_cp_induction(ctx, pair: CovariantPair, tol: float = 1e-10) -> dict:
    """max over a basis of sigma(N)' of ||Phi_{z^X}(I_X (x) a) - I_X (x) Phi_z(a)||."""
    from .morita import morita_transform, transform_data

    data = transform_data(ctx, pair.rep, pair.space)
    out = morita_transform(ctx, pair, data)
    phi = cp_map_from_point(pair)
    amp = _transformed_amplifier(ctx, data, out)
    K = data.K
    window = ctx.meta.get("window")
    pw = K.operator(window) if window is not None else np.eye(K.dim)
    resid = 0.0
    for a in phi.domain.basis_array:
        lhs = out.intertwiner @ amp(a) @ out.intertwiner.conj().T
        rhs = K.base_operator(phi(a))
        resid = max(resid, operator_norm(pw @ (lhs - rhs) @ pw))
    report = {"residual": resid, "domain_dim": phi.domain.dim}
    if ctx.left_elements is None:
        lifted = StarAlgebra(K.dim, [v.reshape(K.dim, K.dim) for v in
                                     gram_schmidt([K.base_operator(a).ravel() for a in phi.domain.basis_array])])
        comm = data.rep.commutant
        report["commutant_dim"] = comm.dim
        report["commutant_match"] = bool(comm.same_span(lifted, 1e-8))
    report["pass"] = bool(resid <= tol and report.get("commutant_match", True))
    return report


def transformed_cp_map(ctx, pair: CovariantPair, data=None, out=None) -> tuple[CPMap, object, object]:
    """Phi_{z^X} on {I_X (x) a : a in sigma(N)'}, which is the commutant of sigma^X(M)."""
    from .morita import morita_transform, transform_data

    data = transform_data(ctx, pair.rep, pair.space) if data is None else data
    out = morita_transform(ctx, pair, data) if out is None else out
    K = data.K
    base = pair.rep.commutant
    lifts = np.array([K.base_operator(a) for a in base.basis_array])
    onb = gram_schmidt([x.ravel() for x in lifts])
    domain = StarAlgebra(K.dim, [v.reshape(K.dim, K.dim) for v in onb])
    mat = lifts.reshape(len(lifts), -1).T
    amp_a = _transformed_amplifier(ctx, data, out)

    def amplify(c):
        alpha = np.linalg.lstsq(mat, c.ravel(), rcond=None)[0]
        return amp_a(np.tensordot(alpha, base.basis_array, axes=(0, 0)))

    return CPMap(domain, out.intertwiner, amplify), data, out


def verify_ac_transform(ctx, pair: CovariantPair, depth: int | None = None, tol: float = PURITY_TOL) -> dict:
    """Compare I_X (x) P_ac(z) with P_ac(z^X) on X (x)_sigma H."""
    left = ac_subspace(pair, depth, tol)
    phi_x, data, _ = transformed_cp_map(ctx, pair)
    right = ac_subspace(depth=depth, tol=tol, phi=phi_x)
    lifted = data.K.base_operator(left.projection)
    diff = operator_norm(lifted - right.projection)
    full_left = left.rank == left.space_dim
    full_right = right.rank == right.space_dim
    return {
        "projection_difference": diff,
        "rank_left": left.rank,
        "rank_right": right.rank,
        "full_left": full_left,
        "full_right": full_right,
        "ac_equivalence": full_left == full_right,
        "spectral_radius": left.spectral_radius,
        "indeterminate": left.indeterminate or right.indeterminate,
    }

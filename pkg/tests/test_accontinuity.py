import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corrtensor.accontinuity import (
    CPMap,
    ac_subspace,
    adaptive_depth,
    cp_map_from_point,
    is_pure_superharmonic,
    is_superharmonic,
    psd_candidates,
    verify_ac_transform,
    verify_cp_induction,
)
from corrtensor.algebra import is_psd, operator_norm
from corrtensor.correspondence import scalar_module
from corrtensor.instances import (
    column_context,
    random_context,
    random_representation,
    row_pair,
)
from corrtensor.morita import canonical_stabilization, trivial_context
from corrtensor.representation import CovariantPair, random_ball_point, sigma_dual


def rand_matrix(rng, n, m=None):
    m = n if m is None else m
    return rng.normal(size=(n, m)) + 1j * rng.normal(size=(n, m))


def scalar_pair(t):
    return row_pair([np.array([[t]])])


def random_row(rng, d, h, radius):
    t = rand_matrix(rng, h, d * h)
    t *= radius / np.linalg.norm(t, 2)
    return [t[:, i * h:(i + 1) * h] for i in range(d)]


def test_row_cp_map_is_sum_of_conjugations():
    rng = np.random.default_rng(0)
    ts = random_row(rng, 3, 2, 0.8)
    phi = cp_map_from_point(row_pair(ts))
    a = rand_matrix(rng, 2)
    assert np.allclose(phi(a), sum(t @ a @ t.conj().T for t in ts))
    assert phi.domain.dim == 4
    assert max(phi.check().values()) < 1e-12


def test_zero_and_scalar_cp_maps():
    phi = cp_map_from_point(row_pair([np.zeros((2, 2))]))
    assert np.allclose(phi.matrix, 0)
    phi = cp_map_from_point(scalar_pair(0.7))
    assert np.allclose(phi(np.array([[2.0]])), 0.49 * 2.0)


def test_superharmonic_examples():
    one = np.array([[1.0]])
    assert is_superharmonic(np.zeros((1, 1)), cp_map_from_point(scalar_pair(0.5)))
    assert is_superharmonic(one, cp_map_from_point(scalar_pair(0.5)))
    assert is_superharmonic(one, cp_map_from_point(scalar_pair(1.0)))
    assert not is_superharmonic(one, cp_map_from_point(scalar_pair(1.1)))


def test_superharmonic_rejects_foreign_elements():
    phi = cp_map_from_point(scalar_pair(0.5))
    with pytest.raises(ValueError):
        is_superharmonic(np.eye(2), phi)


def test_pure_examples():
    one = np.array([[1.0]])
    assert is_pure_superharmonic(one, cp_map_from_point(scalar_pair(0.5)), depth=50)
    assert not is_pure_superharmonic(one, cp_map_from_point(scalar_pair(1.0)), depth=50)


def test_geometric_series_is_pure():
    rng = np.random.default_rng(7)
    ts = random_row(rng, 2, 2, 1.0)
    phi = cp_map_from_point(row_pair(ts))
    scale = np.sqrt(0.9 / phi.spectral_radius)
    phi = cp_map_from_point(row_pair([scale * t for t in ts]))
    assert abs(phi.spectral_radius - 0.9) < 1e-10
    coords = np.linalg.solve(np.eye(phi.domain.dim) - phi.matrix, phi.domain.coords(np.eye(2)))
    a = phi.domain.element(coords)
    a = 0.5 * (a + a.conj().T)
    assert is_pure_superharmonic(a, phi)
    assert adaptive_depth(phi, operator_norm(a)) >= 200


@pytest.mark.parametrize("t, rank", [(0.5, 1), (1.0, 0), (0.0, 1)])
def test_scalar_ac_subspace(t, rank):
    ac = ac_subspace(scalar_pair(t))
    assert ac.rank == rank


def test_partially_absolutely_continuous():
    pair = row_pair([np.diag([1.0, 0.5])])
    ac = ac_subspace(pair)
    assert ac.rank == 1
    assert np.allclose(ac.projection, np.diag([0.0, 1.0]), atol=1e-10)
    assert ac.indeterminate


def test_cp_induction_trivial_context():
    rng = np.random.default_rng(1)
    r = verify_cp_induction(trivial_context(scalar_module(2)), row_pair(random_row(rng, 2, 2, 0.9)))
    assert r["residual"] < 1e-12 and r["pass"]


def test_cp_induction_column_context():
    rng = np.random.default_rng(2)
    r = verify_cp_induction(column_context(2), row_pair(random_row(rng, 2, 2, 0.9)))
    assert r["residual"] <= 1e-10
    assert r["commutant_match"]


def test_cp_induction_on_stabilization():
    st_ = canonical_stabilization(scalar_module(1), 3)
    r = verify_cp_induction(st_.context, scalar_pair(0.8))
    assert r["residual"] <= 1e-10


def test_ac_transform_strict_contraction():
    rng = np.random.default_rng(3)
    r = verify_ac_transform(column_context(2), row_pair(random_row(rng, 2, 2, 0.9)))
    assert r["full_left"] and r["full_right"]
    assert r["projection_difference"] < 1e-10


@pytest.mark.parametrize("t, full", [(1.0, False), (0.5, True), (0.0, True)])
def test_ac_transform_scalar_points(t, full):
    r = verify_ac_transform(column_context(1), scalar_pair(t))
    assert r["full_left"] == full and r["full_right"] == full
    assert r["rank_left"] == (1 if full else 0)
    assert r["rank_right"] == (2 if full else 0)
    assert r["projection_difference"] < 1e-10


# -- properties ----------------------------------------------------------------

seeds = st.integers(0, 2**32 - 1)


def random_pair(seed, radius=None):
    rng = np.random.default_rng(seed)
    ctx = random_context(rng)
    sigma = random_representation(ctx.N, rng)
    return rng, ctx, random_ball_point(sigma_dual(ctx.F, sigma), rng, radius)


@settings(max_examples=20, deadline=None)
@given(seed=seeds)
def test_phi_is_positive(seed):
    rng, _, pair = random_pair(seed)
    phi = cp_map_from_point(pair)
    for c in psd_candidates(phi.domain):
        assert is_psd(phi(c), 1e-10)


@settings(max_examples=20, deadline=None)
@given(seed=seeds)
def test_superharmonic_decay_is_monotone(seed):
    rng, _, pair = random_pair(seed, radius=rng_radius(seed))
    phi = cp_map_from_point(pair)
    # Phi(I) = T~ T~* <= I on the ball; a geometric series adds a second example
    c = phi.domain.element(rng.normal(size=phi.domain.dim) + 1j * rng.normal(size=phi.domain.dim))
    c = c.conj().T @ c
    series = phi.domain.element(np.linalg.solve(np.eye(phi.domain.dim) - phi.matrix, phi.domain.coords(c)))
    for a in (phi.domain.identity, 0.5 * (series + series.conj().T)):
        assert is_superharmonic(a, phi, 1e-9 * max(1.0, operator_norm(a)))
        norms = [operator_norm(phi.power(a, n)) for n in range(30)]
        assert all(y <= x * (1 + 1e-10) + 1e-12 for x, y in zip(norms, norms[1:]))


def rng_radius(seed):
    return 0.2 + 0.75 * (seed % 1000) / 1000


@settings(max_examples=20, deadline=None)
@given(seed=seeds, lam=st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False))
def test_scaling_covariance(seed, lam):
    rng, _, pair = random_pair(seed)
    scaled = CovariantPair(pair.module, pair.rep, lam * pair.intertwiner, pair.space)
    phi, phi_l = cp_map_from_point(pair), cp_map_from_point(scaled)
    for b in phi.domain.basis_array:
        assert np.allclose(phi_l(b), abs(lam) ** 2 * phi(b), atol=1e-10)


@settings(max_examples=15, deadline=None)
@given(seed=seeds)
def test_ac_subspace_monotone_in_generators(seed):
    rng, _, pair = random_pair(seed)
    phi = cp_map_from_point(pair)
    cands = psd_candidates(phi.domain)
    k = int(rng.integers(0, len(cands) + 1))
    small = ac_subspace(phi=phi, candidates=cands[:k])
    large = ac_subspace(phi=phi, candidates=cands)
    assert small.rank <= large.rank
    # ranges of the smaller set lie inside the larger projection
    assert np.allclose(large.projection @ small.projection, small.projection, atol=1e-8)


@settings(max_examples=20, deadline=None)
@given(seed=seeds)
def test_cp_induction_random(seed):
    _, ctx, pair = random_pair(seed)
    r = verify_cp_induction(ctx, pair)
    assert r["residual"] <= 1e-10 and r["pass"]


@settings(max_examples=20, deadline=None)
@given(seed=seeds)
def test_ac_transform_random(seed):
    _, ctx, pair = random_pair(seed, radius=0.9)
    r = verify_ac_transform(ctx, pair)
    assert r["projection_difference"] <= 1e-8
    assert r["ac_equivalence"]

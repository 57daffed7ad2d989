import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from corrtensor.algebra import StarAlgebra, commutant, operator_norm, star_algebra_from_generators
from corrtensor.correspondence import algebra_as_module, column_bimodule, scalar_module
from corrtensor.fock import TensorPolynomial, build_truncated_fock
from corrtensor.instances import (
    block_correspondence,
    random_context,
    random_representation,
    random_unitary,
    row_pair,
    scalar_representation,
)
from corrtensor.representation import (
    CovariantPair,
    amplified_representation,
    check_covariant,
    check_representation,
    identity_representation,
    induce_representation,
    induce_space,
    integrated_form,
    pair_from_bimodule_map,
    random_ball_point,
    sigma_dual,
)


def rand_matrix(rng, n, m=None):
    m = n if m is None else m
    return rng.normal(size=(n, m)) + 1j * rng.normal(size=(n, m))


def dual_dim_oracle(e, sigma):
    """Brute-force nullspace of z sigma(a) = (phi(a) (x) I) z in plain kron coordinates."""
    sp = induce_space(e, sigma)
    r, h = sp.dim, sigma.space_dim
    rows = []
    for a in e.left_algebra.basis_array:
        la = sp.operator(e.left(a))
        rows.append(np.kron(np.eye(r), sigma(a).T) - np.kron(la, np.eye(h)))
    return scipy.linalg.null_space(np.vstack(rows), rcond=1e-10).shape[1]


def test_induce_scalar_module():
    sp = induce_space(scalar_module(1), scalar_representation(3))
    assert sp.dim == 3
    assert np.allclose(sp.factor, np.eye(3))
    assert induce_space(scalar_module(4), scalar_representation(1)).dim == 4


def test_induce_column_module():
    x = column_bimodule(2)
    sp = induce_space(x, scalar_representation(1))
    assert sp.dim == 2
    rep = induce_representation(x, scalar_representation(1))
    assert max(check_representation(rep).values()) < 1e-12
    # irreducible and faithful on C^2: the identity representation up to unitary equivalence
    img = star_algebra_from_generators(list(rep.images), 2)
    assert img.dim == 4
    assert commutant(img).dim == 1


def test_induce_over_scalars_is_sigma():
    rng = np.random.default_rng(0)
    c = StarAlgebra.scalars(1)
    sigma = scalar_representation(2)
    rep = induce_representation(scalar_module(1), sigma)
    assert np.allclose(rep(c.identity), sigma(c.identity))


def test_induced_commutant_dimension():
    rng = np.random.default_rng(4)
    for _ in range(8):
        ctx = random_context(rng)
        sigma = random_representation(ctx.N, rng)
        rep = induce_representation(ctx.X, sigma)
        lhs = commutant(star_algebra_from_generators(list(rep.images), rep.space_dim)).dim
        assert lhs == sigma.commutant.dim


@pytest.mark.parametrize("d, n", [(1, 1), (2, 2), (3, 2)])
def test_scalar_dual_dimension(d, n):
    assert sigma_dual(scalar_module(d), scalar_representation(n)).dim == d * n * n


def test_matrix_dual_is_one_dimensional():
    m2 = StarAlgebra.full_matrices(2)
    assert sigma_dual(algebra_as_module(m2), identity_representation(m2)).dim == 1


def test_reduced_left_action_dual():
    sigma_full = None
    for mult in ([[1, 1], [1, 1]], [[1, 1], [0, 0]]):
        e = block_correspondence([1, 1], mult)
        sigma = identity_representation(e.algebra)
        dual = sigma_dual(e, sigma)
        assert dual.dim == dual_dim_oracle(e, sigma)
        assert max(dual.check().values()) < 1e-10
        if sigma_full is None:
            sigma_full = dual.dim
    assert dual.dim < sigma_full


def test_covariant_examples():
    zero = row_pair([np.zeros((2, 2)), np.zeros((2, 2))])
    r = check_covariant(zero)
    assert r["valid"] and r["position"] == "interior"
    t1 = np.array([[0.0, 1.0], [0.0, 0.0]])
    pair = row_pair([t1, np.zeros((2, 2))])
    r = check_covariant(pair)
    assert r["valid"] and r["position"] == "boundary"
    assert abs(r["norm"] - 1.0) < 1e-12
    big = row_pair([1.1 * t1, np.zeros((2, 2))])
    r = check_covariant(big)
    assert abs(r["norm_excess"] - 0.1) < 1e-12
    assert not r["valid"]


def test_integrated_form_examples():
    fk = build_truncated_fock(scalar_module(1), 2)
    t = 0.3 - 0.4j
    pair = row_pair([np.array([[t]])])
    one = np.ones(1)
    p = TensorPolynomial.constant(fk, np.eye(1)) + TensorPolynomial.monomial(fk, 1, one) \
        + TensorPolynomial.monomial(fk, 2, one)
    assert np.allclose(integrated_form(pair, p), 1 + t + t * t)
    assert np.allclose(integrated_form(pair, TensorPolynomial.constant(fk, 2 * np.eye(1))), 2.0)


def test_word_product():
    rng = np.random.default_rng(1)
    t1, t2 = rand_matrix(rng, 2), rand_matrix(rng, 2)
    pair = row_pair([t1, t2])
    fk = build_truncated_fock(pair.module, 2)
    e12 = fk.levels[2].tensor.quotient @ np.kron([1.0, 0.0], fk.from_base(np.array([0.0, 1.0])))
    out = integrated_form(pair, TensorPolynomial.monomial(fk, 2, e12))
    assert np.allclose(out, t1 @ t2, atol=1e-12)


def test_wrong_intertwiner_shape():
    with pytest.raises(ValueError):
        CovariantPair(scalar_module(2), scalar_representation(2), np.zeros((2, 3)))


# -- properties ----------------------------------------------------------------

seeds = st.integers(0, 2**32 - 1)


def random_pair(seed):
    rng = np.random.default_rng(seed)
    ctx = random_context(rng)
    sigma = random_representation(ctx.N, rng)
    return rng, random_ball_point(sigma_dual(ctx.F, sigma), rng)


@settings(max_examples=20, deadline=None)
@given(seed=seeds)
def test_round_trip(seed):
    rng, pair = random_pair(seed)
    images = [pair.bimodule_map(np.eye(pair.module.dim)[i]) for i in range(pair.module.dim)]
    back = pair_from_bimodule_map(pair.module, pair.rep, images, pair.space)
    assert operator_norm(back.intertwiner - pair.intertwiner) <= 1e-10


@settings(max_examples=20, deadline=None)
@given(seed=seeds)
def test_bimodule_identity(seed):
    rng, pair = random_pair(seed)
    e = pair.module
    alg = e.algebra
    a, b = alg.element(rng.normal(size=alg.dim)), alg.element(rng.normal(size=alg.dim))
    xi = rng.normal(size=e.dim) + 1j * rng.normal(size=e.dim)
    lhs = pair.bimodule_map(e.right(b) @ e.left(a) @ xi)
    rhs = pair.rep(a) @ pair.bimodule_map(xi) @ pair.rep(b)
    assert operator_norm(lhs - rhs) <= 1e-9 * max(1.0, operator_norm(rhs))


@settings(max_examples=15, deadline=None)
@given(seed=seeds)
def test_homomorphism(seed):
    rng = np.random.default_rng(seed)
    d, h = 2, 2
    ts = [0.5 * rand_matrix(rng, h) for _ in range(d)]
    pair = row_pair(ts)
    fk = build_truncated_fock(pair.module, 4)
    def rand_poly(deg):
        terms = {0: rng.normal(size=(1, 1)) + 0j}
        for k in range(1, deg + 1):
            terms[k] = rng.normal(size=fk.level_dims[k]) + 1j * rng.normal(size=fk.level_dims[k])
        return TensorPolynomial(fk, terms)
    p, q = rand_poly(2), rand_poly(2)
    lhs = integrated_form(pair, p * q)
    rhs = integrated_form(pair, p) @ integrated_form(pair, q)
    assert operator_norm(lhs - rhs) <= 1e-9 * max(1.0, operator_norm(rhs))


@settings(max_examples=15, deadline=None)
@given(seed=seeds)
def test_dual_dimension_is_conjugation_invariant(seed):
    rng = np.random.default_rng(seed)
    ctx = random_context(rng)
    sigma = random_representation(ctx.N, rng)
    u = random_unitary(sigma.space_dim, rng)
    assert sigma_dual(ctx.F, sigma).dim == sigma_dual(ctx.F, sigma.conjugate(u)).dim


@settings(max_examples=30, deadline=None)
@given(seed=seeds)
def test_von_neumann_inequality(seed):
    rng = np.random.default_rng(seed)
    fk = build_truncated_fock(scalar_module(1), 5)
    deg = int(rng.integers(0, 6))
    coeffs = rng.normal(size=deg + 1) + 1j * rng.normal(size=deg + 1)
    p = TensorPolynomial(fk, {0: coeffs[:1].reshape(1, 1), **{k: coeffs[k:k + 1] for k in range(1, deg + 1)}})
    circle = np.exp(2j * np.pi * np.arange(4096) / 4096)
    sup = np.abs(np.polyval(coeffs[::-1], circle)).max()
    t = np.sqrt(rng.uniform()) * np.exp(2j * np.pi * rng.uniform())
    val = integrated_form(row_pair([np.array([[t]])]), p)
    assert abs(val[0, 0]) <= sup + 1e-6


def test_amplified_representation_is_valid():
    m = StarAlgebra.block_diagonal([2, 1])
    assert max(check_representation(amplified_representation(m, 2)).values()) < 1e-12

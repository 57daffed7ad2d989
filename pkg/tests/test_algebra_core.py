import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corrtensor.algebra import (
    DimensionError,
    StarAlgebra,
    commutant,
    gram_schmidt,
    is_psd,
    null_space,
    operator_norm,
    psd_sqrt,
    star_algebra_from_generators,
)
from corrtensor.instances import block_algebra, random_unitary


def rand_matrix(rng, n, m=None):
    m = n if m is None else m
    return rng.normal(size=(n, m)) + 1j * rng.normal(size=(n, m))


def test_generated_by_nothing_is_scalars():
    a = star_algebra_from_generators([], 2)
    assert a.dim == 1
    assert a.contains(np.eye(2))


def test_nilpotent_generates_full_matrices():
    a = star_algebra_from_generators([np.array([[0, 1], [0, 0]])], 2)
    assert a.dim == 4


def test_projection_generates_diagonal():
    a = star_algebra_from_generators([np.diag([1.0, 0.0])], 2)
    assert a.dim == 2
    assert a.contains(np.diag([2.0, -3.0]))
    assert not a.contains(np.array([[0, 1], [0, 0]]))


def test_generator_shape_is_checked():
    with pytest.raises(DimensionError):
        star_algebra_from_generators([np.zeros((2, 3))], 2)


@pytest.mark.parametrize("alg, expected", [
    (StarAlgebra.full_matrices(2), 1),
    (StarAlgebra.block_diagonal([1, 1]), 2),
    (StarAlgebra.scalars(3), 9),
])
def test_commutant_dimensions(alg, expected):
    assert commutant(alg).dim == expected


def test_commutant_of_diagonal_is_diagonal():
    d = StarAlgebra.block_diagonal([1, 1])
    assert commutant(d).same_span(d)


@pytest.mark.parametrize("x, expected", [
    (np.array([[0, 1], [0, 0]]), 1.0),
    (np.diag([3.0, -4.0]), 4.0),
    (np.array([[1, 1], [1, 1]]), 2.0),
])
def test_operator_norm_examples(x, expected):
    assert abs(operator_norm(x) - expected) < 1e-12


def test_is_psd_examples():
    assert is_psd(np.eye(2), 1e-10)
    assert not is_psd(np.diag([1.0, -1e-3]), 1e-10)
    assert not is_psd(np.array([[0, 1], [0, 0]]), 1e-10)


def test_psd_sqrt_pair():
    rng = np.random.default_rng(3)
    b = rand_matrix(rng, 4)
    s = b @ b.conj().T + 0.1 * np.eye(4)
    root, iroot = psd_sqrt(s)
    assert np.allclose(root @ root, s, atol=1e-10)
    assert np.allclose(root @ iroot, np.eye(4), atol=1e-10)
    with pytest.raises(np.linalg.LinAlgError):
        psd_sqrt(np.diag([1.0, 0.0]))


def test_null_space_and_gram_schmidt():
    a = np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    ns = null_space(a)
    assert ns.shape[1] == 1
    assert np.allclose(a @ ns, 0)
    q = gram_schmidt([np.array([1.0, 0, 0]), np.array([1.0, 1e-14, 0]), np.array([1.0, 1.0, 0])])
    assert len(q) == 2


def test_coords_round_trip():
    rng = np.random.default_rng(0)
    alg = block_algebra([2, 1], random_unitary(3, rng))
    c = rng.normal(size=alg.dim) + 1j * rng.normal(size=alg.dim)
    x = alg.element(c)
    assert np.allclose(alg.coords(x), c)
    assert alg.distance(x) < 1e-12
    assert alg.closure_residual() < 1e-10


# -- properties ----------------------------------------------------------------

block_sizes = st.lists(st.integers(1, 2), min_size=1, max_size=3)


@settings(max_examples=25, deadline=None)
@given(sizes=block_sizes, seed=st.integers(0, 2**32 - 1))
def test_double_commutant(sizes, seed):
    rng = np.random.default_rng(seed)
    alg = block_algebra(sizes, random_unitary(sum(sizes), rng))
    assert commutant(commutant(alg)).same_span(alg, 1e-9)


@settings(max_examples=25, deadline=None)
@given(sizes=block_sizes)
def test_dimension_count(sizes):
    alg = StarAlgebra.block_diagonal(sizes)
    n = sum(sizes)
    total = alg.dim + commutant(alg).dim
    assert total >= 2 * n
    # blocks of distinct multiplicity one: sum s_i^2 + (number of blocks)
    assert total == sum(s * s for s in sizes) + len(sizes)


def test_full_matrix_count():
    for n in (1, 2, 3):
        assert StarAlgebra.full_matrices(n).dim + commutant(StarAlgebra.full_matrices(n)).dim == n * n + 1


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 4))
def test_norm_submultiplicative_and_unitarily_invariant(seed, n):
    rng = np.random.default_rng(seed)
    a, b = rand_matrix(rng, n), rand_matrix(rng, n)
    u, v = random_unitary(n, rng), random_unitary(n, rng)
    assert operator_norm(a @ b) <= operator_norm(a) * operator_norm(b) * (1 + 1e-9)
    assert abs(operator_norm(u @ a @ v) - operator_norm(a)) <= 1e-9 * max(1.0, operator_norm(a))

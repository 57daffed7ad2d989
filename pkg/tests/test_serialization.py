import json

import numpy as np
import pytest

from corrtensor import serialization as ser
from corrtensor.accontinuity import verify_cp_induction
from corrtensor.algebra import StarAlgebra
from corrtensor.correspondence import check_correspondence_axioms, column_bimodule
from corrtensor.instances import random_context, random_representation, random_point
from corrtensor.morita import check_context, morita_transform


def test_matrix_literal_round_trip():
    a = np.array([[1 + 2j, -0.5], [0, 3j]])
    enc = ser.encode_matrix(a)
    assert enc[0][0] == [1.0, 2.0]
    assert np.array_equal(ser.decode_matrix(json.loads(json.dumps(enc))), a)


@pytest.mark.parametrize("bad", [[[1, 2, 3]], "x", 5, [[["a", "b"]]]])
def test_bad_matrix_literals(bad):
    with pytest.raises(ser.SchemaError):
        ser.decode_matrix(bad)


def test_algebra_round_trip():
    for alg in (StarAlgebra.full_matrices(2), StarAlgebra.block_diagonal([2, 1])):
        back = ser.decode_algebra(ser.encode_algebra(alg))
        assert back.dim == alg.dim and back.same_span(alg)


def test_missing_field_is_named():
    with pytest.raises(ser.SchemaError, match="ambient_dim"):
        ser.decode_algebra({"full": True}, "ctx.M")


def test_bimodule_round_trip():
    x = column_bimodule(2)
    y = ser.decode_bimodule(json.loads(ser.dumps(ser.encode_bimodule(x))))
    assert np.allclose(y.left_gram, x.left_gram)
    assert np.allclose(y.as_right_module.gram, x.as_right_module.gram)


def test_module_shape_mismatch():
    obj = ser.encode_module(column_bimodule(2).as_right_module)
    obj["left_action"] = ser.encode_matrix(np.zeros((4, 3, 3)))
    with pytest.raises(ser.SchemaError, match="do not match"):
        ser.decode_module(obj)


def test_context_and_pair_round_trip():
    rng = np.random.default_rng(12)
    for _ in range(4):
        ctx = random_context(rng)
        sigma = random_representation(ctx.N, rng)
        pair = random_point(ctx.F, sigma, rng)
        text = ser.dumps({"context": ser.encode_context(ctx), "pair": ser.encode_pair(pair)})
        obj = ser.loads(text)
        ctx2 = ser.decode_context(obj["context"])
        pair2 = ser.decode_pair(obj["pair"], ctx2.F)
        assert ctx2.meta == ctx.meta
        assert max(check_context(ctx2).values()) < 1e-9
        assert max(check_correspondence_axioms(ctx2.E).values()) < 1e-9
        assert abs(pair2.norm - pair.norm) < 1e-12
        out1, out2 = morita_transform(ctx, pair), morita_transform(ctx2, pair2)
        assert abs(out1.norm - out2.norm) < 1e-10
        assert verify_cp_induction(ctx2, pair2)["pass"]


def test_wrong_w_shape():
    ctx = random_context(np.random.default_rng(1))
    obj = ser.encode_context(ctx)
    obj["W"] = ser.encode_matrix(np.zeros((1, 1)))
    with pytest.raises(ser.SchemaError, match="context.W"):
        ser.decode_context(obj)


def test_representation_shape_checked():
    alg = StarAlgebra.full_matrices(2)
    obj = {"algebra": ser.encode_algebra(alg), "space_dim": 3, "images": ser.encode_matrix(np.zeros((4, 2, 2)))}
    with pytest.raises(ser.SchemaError, match="images"):
        ser.decode_representation(obj)


def test_loads_reports_position():
    with pytest.raises(ser.SchemaError, match="line 2 column"):
        ser.loads('{\n  "a": ,\n}', "bad.json")

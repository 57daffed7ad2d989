"""JSON-compatible encoding of the package's objects.

Complex matrices are nested lists whose leaves are ``[re, im]`` pairs.
Maps between separated quotients are stored in algebraic (elementary
tensor) coordinates so that reloading does not depend on pivot choices.
"""
from __future__ import annotations

import json
from typing import Any

import numpy as np

from .algebra import StarAlgebra
from .correspondence import Correspondence, EquivalenceBimodule, internal_tensor
from .morita import MoritaContext, context_from_alg_map
from .representation import CovariantPair, Representation, induce_space


class SchemaError(ValueError):
    """A serialized object is missing a field or has the wrong shape."""


def encode_matrix(a) -> list:
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def decode_matrix(obj, where: str = "matrix") -> np.ndarray:
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{where}: not a numeric array ({exc})") from None
    if arr.ndim == 0 or arr.shape[-1] != 2:
        raise SchemaError(f"{where}: leaves must be [re, im] pairs, got shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def _field(obj: dict, key: str, where: str):
    if not isinstance(obj, dict) or key not in obj:
        raise SchemaError(f"{where}: missing field '{key}'")
    return obj[key]


def encode_algebra(a: StarAlgebra) -> dict:
    out: dict[str, Any] = {"ambient_dim": a.ambient_dim, "full": a.full, "name": a.name}
    if not a.full:
        out["basis"] = encode_matrix(a.basis_array)
    if hasattr(a, "block_sizes"):
        out["block_sizes"] = list(a.block_sizes)
        out["block_unitary"] = encode_matrix(a.block_unitary)
    return out


def decode_algebra(obj: dict, where: str = "algebra") -> StarAlgebra:
    n = int(_field(obj, "ambient_dim", where))
    if obj.get("full"):
        alg = StarAlgebra.full_matrices(n)
    else:
        alg = StarAlgebra(n, list(decode_matrix(_field(obj, "basis", where), f"{where}.basis")),
                          name=obj.get("name", ""))
    if "block_sizes" in obj:
        alg.block_sizes = [int(s) for s in obj["block_sizes"]]
        alg.block_unitary = decode_matrix(obj["block_unitary"], f"{where}.block_unitary")
    return alg


def encode_module(e: Correspondence) -> dict:
    return {
        "algebra": encode_algebra(e.algebra),
        "left_algebra": encode_algebra(e.left_algebra),
        "gram": encode_matrix(e.gram),
        "right_action": encode_matrix(e.right_action),
        "left_action": encode_matrix(e.left_action),
        "labels": list(e.labels),
        "name": e.name,
    }


def decode_module(obj: dict, where: str = "module", algebra=None, left_algebra=None) -> Correspondence:
    alg = algebra if algebra is not None else decode_algebra(_field(obj, "algebra", where), f"{where}.algebra")
    lalg = left_algebra if left_algebra is not None else decode_algebra(
        _field(obj, "left_algebra", where), f"{where}.left_algebra")
    gram = decode_matrix(_field(obj, "gram", where), f"{where}.gram")
    ra = decode_matrix(_field(obj, "right_action", where), f"{where}.right_action")
    la = decode_matrix(_field(obj, "left_action", where), f"{where}.left_action")
    d = gram.shape[0]
    if ra.shape != (alg.dim, d, d) or la.shape != (lalg.dim, d, d):
        raise SchemaError(f"{where}: action shapes {ra.shape}/{la.shape} do not match dimension {d}")
    return Correspondence(alg, gram, ra, lalg, la, labels=obj.get("labels"), name=obj.get("name", ""))


def encode_bimodule(x: EquivalenceBimodule) -> dict:
    return {"module": encode_module(x.as_right_module), "left_gram": encode_matrix(x.left_gram)}


def decode_bimodule(obj: dict, where: str = "X", m=None, n=None) -> EquivalenceBimodule:
    mod = decode_module(_field(obj, "module", where), f"{where}.module", algebra=n, left_algebra=m)
    lg = decode_matrix(_field(obj, "left_gram", where), f"{where}.left_gram")
    return EquivalenceBimodule(mod.left_algebra, mod.algebra, mod, _left_gram=lg)


def encode_context(ctx: MoritaContext) -> dict:
    if ctx.E is None:
        raise ValueError("only contexts with an explicit E can be serialized")
    w_full = ctx.XF.embed(ctx.W.matrix) @ ctx.EX.tensor.quotient
    return {
        "M": encode_algebra(ctx.M),
        "N": encode_algebra(ctx.N),
        "E": encode_module(ctx.E),
        "F": encode_module(ctx.F),
        "X": encode_bimodule(ctx.X),
        "W": encode_matrix(w_full),
        "name": ctx.name,
        "meta": ctx.meta,
    }


def decode_context(obj: dict, where: str = "context") -> MoritaContext:
    m = decode_algebra(_field(obj, "M", where), f"{where}.M")
    n = decode_algebra(_field(obj, "N", where), f"{where}.N")
    e = decode_module(_field(obj, "E", where), f"{where}.E", algebra=m, left_algebra=m)
    f = decode_module(_field(obj, "F", where), f"{where}.F", algebra=n, left_algebra=n)
    x = decode_bimodule(_field(obj, "X", where), f"{where}.X", m=m, n=n)
    w_full = decode_matrix(_field(obj, "W", where), f"{where}.W")
    xf = internal_tensor(x.as_right_module, f)
    expected = (x.dim * f.dim, e.dim * x.dim)
    if w_full.shape != expected:
        raise SchemaError(f"{where}.W: shape {w_full.shape}, expected {expected}")
    ctx = context_from_alg_map(e, f, x, xf.tensor.quotient @ w_full, name=obj.get("name", ""))
    ctx.meta = dict(obj.get("meta", {}))
    return ctx


def encode_representation(rep: Representation) -> dict:
    return {"algebra": encode_algebra(rep.algebra), "space_dim": rep.space_dim,
            "images": encode_matrix(rep.images)}


def decode_representation(obj: dict, where: str = "rep", algebra=None) -> Representation:
    alg = algebra if algebra is not None else decode_algebra(_field(obj, "algebra", where), f"{where}.algebra")
    h = int(_field(obj, "space_dim", where))
    img = decode_matrix(_field(obj, "images", where), f"{where}.images")
    if img.shape != (alg.dim, h, h):
        raise SchemaError(f"{where}.images: shape {img.shape}, expected {(alg.dim, h, h)}")
    return Representation(alg, h, img)


def encode_pair(pair: CovariantPair) -> dict:
    return {"rep": encode_representation(pair.rep),
            "intertwiner": encode_matrix(pair.intertwiner @ pair.space.factor)}


def decode_pair(obj: dict, module: Correspondence, where: str = "pair") -> CovariantPair:
    rep = decode_representation(_field(obj, "rep", where), f"{where}.rep", algebra=module.algebra)
    t_alg = decode_matrix(_field(obj, "intertwiner", where), f"{where}.intertwiner")
    space = induce_space(module, rep)
    if t_alg.shape != (rep.space_dim, space.alg_dim):
        raise SchemaError(f"{where}.intertwiner: shape {t_alg.shape}, expected {(rep.space_dim, space.alg_dim)}")
    return CovariantPair(module, rep, t_alg @ space.pinv, space)


def dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=1)


def loads(text: str, where: str = "input") -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{where}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None

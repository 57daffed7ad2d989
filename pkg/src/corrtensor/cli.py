"""Command-line verification campaigns.

    python3 -m corrtensor verify functor --trials 200 --seed 7
    python3 -m corrtensor verify all --format machine --out report.json
    python3 -m corrtensor generate functor --seed 42 --out ctx.json
    python3 -m corrtensor verify functor --instance ctx.json
    python3 -m corrtensor report report.json

Exit status: 0 if every check passes, 1 if some residual exceeds its
tolerance, 2 on usage or input errors.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import serialization as ser
from .accontinuity import cp_map_from_point, verify_ac_transform, verify_cp_induction
from .algebra import operator_norm
from .correspondence import scalar_module
from .fock import TensorPolynomial, build_truncated_fock, fock_norm
from .instances import (
    column_context,
    diagonal_instance,
    random_context,
    random_representation,
    row_pair,
)
from .morita import (
    canonical_stabilization,
    check_stabilization,
    popescu_form,
    reconstruction_operator,
    reconstruction_residual,
    trivial_context,
    verify_functor,
)
from .representation import CovariantPair, integrated_form, random_ball_point, sigma_dual

KINDS = ("functor", "cp_lemma", "ac_transform", "stabilize", "reconstruct", "disc_convergence")
DEFAULT_SEED = 0xC0FFEE
DEFAULT_TRIALS = 200
OUT_ENV = "CORRTENSOR_OUT"

DEFAULT_TOLERANCES: dict[str, dict[str, float]] = {
    "functor": {"isometry_gap": 1e-8, "intertwining": 1e-9, "dim_mismatch": 0.0},
    "cp_lemma": {"residual": 1e-10, "commutant_mismatch": 0.0},
    "ac_transform": {"projection_difference": 1e-8, "equivalence_mismatch": 0.0, "expected_rank_gap": 0.0},
    "stabilize": {"RRstar_minus_P0": 1e-12, "RstarR_minus_I": 1e-12, "isometry": 1e-10,
                  "left_intertwining": 1e-10, "right_intertwining": 1e-10, "surjectivity": 0.0},
    "reconstruct": {"popescu_difference": 1e-12, "transform_adjoint_difference": 1e-10},
    "disc_convergence": {"norm_outside_interval": 0.0, "von_neumann_excess": 1e-6},
}


@dataclass
class Scenario:
    kind: str
    trials: int = DEFAULT_TRIALS
    seed: int = DEFAULT_SEED
    tolerances: dict[str, float] = field(default_factory=dict)
    truncation: int | None = None
    instance: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scenario kind '{self.kind}' (expected one of {', '.join(KINDS)})")
        if self.trials < 0:
            raise ValueError("trials must be nonnegative")
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES[self.kind])
        if unknown:
            raise ValueError(f"unknown tolerance name(s) for {self.kind}: {', '.join(sorted(unknown))}")

    def tolerance_table(self) -> dict[str, float]:
        tol = dict(DEFAULT_TOLERANCES[self.kind])
        tol.update(self.tolerances)
        return tol


@dataclass
class Report:
    scenario: dict
    records: list[dict]
    summary: dict
    passed: bool
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def trial_rngs(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


# -- per-kind trial runners -------------------------------------------------------

NAMED_CONTEXTS: dict[str, Callable] = {
    "scalar-trivial": lambda: trivial_context(scalar_module(2)),
    "column": lambda: column_context(2),
    "diag-trivial": lambda: trivial_context(diagonal_instance()),
}


def _context_for_trial(s: Scenario, rng):
    if s.instance in NAMED_CONTEXTS:
        return NAMED_CONTEXTS[s.instance]()
    return random_context(rng)


def _random_trials(s: Scenario, fn, jobs: int) -> list[dict]:
    """fn(s, k, rng) over the per-trial generators, in trial order."""
    rngs = trial_rngs(s.seed, s.trials)
    if jobs <= 1 or s.trials < 2:
        return [fn(s, k, rng) for k, rng in enumerate(rngs)]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, [s] * s.trials, range(s.trials), rngs, chunksize=max(1, s.trials // (4 * jobs))))


def _functor_trial(s: Scenario, k: int, rng) -> dict:
    ctx = _context_for_trial(s, rng)
    return _functor_record(k, ctx.name, verify_functor(ctx, 1, rng=rng))


def _functor_records(s: Scenario, jobs: int = 1) -> list[dict]:
    if s.instance and s.instance not in NAMED_CONTEXTS:
        ctx, pair = _load_instance(s.instance)
        r = verify_functor(ctx, max(s.trials, 1), seed=s.seed, sigma=pair.rep if pair else None)
        return [_functor_record(0, "file", r)]
    return _random_trials(s, _functor_trial, jobs)


def _functor_record(k, name, r) -> dict:
    return {"trial": k, "instance": name, "isometry_gap": r["isometry_gap"],
            "intertwining": r["intertwining"],
            "dim_mismatch": float(abs(r["dim_F_sigma"] - r["dim_E_sigmaX"])),
            "dim_F_sigma": r["dim_F_sigma"]}


def _random_point(ctx, rng):
    sigma = random_representation(ctx.N, rng)
    return random_ball_point(sigma_dual(ctx.F, sigma), rng)


def _cp_record(k, ctx, pair) -> dict:
    r = verify_cp_induction(ctx, pair)
    return {"trial": k, "instance": ctx.name, "residual": r["residual"],
            "commutant_mismatch": 0.0 if r.get("commutant_match", True) else 1.0,
            "domain_dim": r["domain_dim"]}


def _cp_trial(s: Scenario, k: int, rng) -> dict:
    ctx = _context_for_trial(s, rng)
    return _cp_record(k, ctx, _random_point(ctx, rng))


def _cp_records(s: Scenario, jobs: int = 1) -> list[dict]:
    if s.instance and s.instance not in NAMED_CONTEXTS:
        ctx, pair = _load_instance(s.instance)
        return [_cp_record(0, ctx, pair if pair is not None else _random_point(ctx, np.random.default_rng(s.seed)))]
    return _random_trials(s, _cp_trial, jobs)


def _scaled_point(ctx, rng, radius_cap: float = 0.95):
    """A ball point rescaled towards spectral radius ``target`` ~ U[0, radius_cap].

    The scale factor is capped so the point stays in the closed unit ball;
    numerically nilpotent points keep their norm.
    """
    sigma = random_representation(ctx.N, rng)
    dual = sigma_dual(ctx.F, sigma)
    pair = random_ball_point(dual, rng, 1.0)
    rho = cp_map_from_point(pair).spectral_radius
    target = rng.uniform(0.0, radius_cap)
    nrm = operator_norm(pair.intertwiner)
    if nrm > 0:
        scale = min(np.sqrt(target / rho) if rho > 1e-6 else 1.0, 1.0 / nrm)
        pair = CovariantPair(pair.module, pair.rep, pair.intertwiner * scale, pair.space)
    return pair


def _ac_trial(s: Scenario, k: int, rng) -> dict:
    ctx = _context_for_trial(s, rng)
    return _ac_record(k, ctx.name, verify_ac_transform(ctx, _scaled_point(ctx, rng)), 0.0)


def _ac_records(s: Scenario, jobs: int = 1) -> list[dict]:
    out = []
    col = column_context(1)
    for label, t, expect_full in (("t=1", 1.0, False), ("t=1/2", 0.5, True)):
        r = verify_ac_transform(col, row_pair([np.array([[t]])]))
        want = 1 if expect_full else 0
        gap = abs(r["rank_left"] - want) + abs(r["rank_right"] - 2 * want)
        out.append(_ac_record(label, col.name, r, gap))
    if s.instance and s.instance not in NAMED_CONTEXTS:
        ctx, pair = _load_instance(s.instance)
        pair = pair if pair is not None else _scaled_point(ctx, np.random.default_rng(s.seed))
        out.append(_ac_record(0, ctx.name, verify_ac_transform(ctx, pair), 0.0))
        return out
    return out + _random_trials(s, _ac_trial, jobs)


def _ac_record(k, name, r, gap) -> dict:
    return {"trial": k, "instance": name, "projection_difference": r["projection_difference"],
            "equivalence_mismatch": 0.0 if r["ac_equivalence"] else 1.0,
            "expected_rank_gap": float(gap), "spectral_radius": r["spectral_radius"],
            "rank_left": r["rank_left"], "rank_right": r["rank_right"]}


STABILIZE_CASES: dict[str, Callable] = {
    "C": lambda: scalar_module(1),
    "C2": lambda: scalar_module(2),
    "diag": diagonal_instance,
}


def _stabilize_records(s: Scenario, jobs: int = 1) -> list[dict]:
    levels = [s.truncation] if s.truncation else [2, 3, 4]
    cases = STABILIZE_CASES
    if s.instance:
        obj = _read_instance(s.instance, "stabilize")
        d = int(obj["d"])
        cases = {f"C^{d}": lambda: scalar_module(d)}
        levels = [s.truncation or int(obj["nmax"])]
    out = []
    for name, make in cases.items():
        for n in levels:
            r = check_stabilization(canonical_stabilization(make(), n, explicit_e=False))
            rec = {"trial": f"{name}/N={n}", "instance": name, "nmax": n}
            rec.update(r)
            out.append(rec)
    return out


def random_row_contraction(d: int, h: int, rng: np.random.Generator) -> list[np.ndarray]:
    t = rng.normal(size=(h, d * h)) + 1j * rng.normal(size=(h, d * h))
    t *= rng.uniform() / np.linalg.norm(t, 2)
    return [t[:, i * h:(i + 1) * h] for i in range(d)]


def _reconstruct_records(s: Scenario, jobs: int = 1) -> list[dict]:
    levels = [s.truncation] if s.truncation else [2, 3, 4]
    grid = [(d, h, n) for d in (1, 2, 3) for h in (1, 2, 3) for n in levels]
    rows = [random_row_contraction(d, h, rng) for (d, h, _), rng in zip(grid, trial_rngs(s.seed, len(grid)))]
    if s.instance:
        obj = _read_instance(s.instance, "reconstruct")
        ts = [ser.decode_matrix(t, f"{s.instance}:T") for t in obj["T"]]
        grid = [(len(ts), ts[0].shape[0], s.truncation or int(obj["nmax"]))]
        rows = [ts]
    out = []
    stabs: dict = {}
    for (d, h, n), ts in zip(grid, rows):
        pair = row_pair(ts)
        key = (d, n)
        if key not in stabs:
            stabs[key] = canonical_stabilization(scalar_module(d), n, explicit_e=False)
        st = stabs[key]
        rec = reconstruction_operator(st.context.F, pair, n, st)
        diff = float(np.abs(rec - popescu_form(d, ts, n)).max())
        out.append({"trial": f"d={d}/h={h}/N={n}", "instance": f"C^{d}", "popescu_difference": diff,
                    "transform_adjoint_difference": reconstruction_residual(st, pair)})
    return out


def _disc_records(s: Scenario, jobs: int = 1) -> list[dict]:
    n = s.truncation or 200
    fk = build_truncated_fock(scalar_module(1), n)
    one_plus_z = TensorPolynomial.constant(fk, np.eye(1)) + TensorPolynomial.monomial(fk, 1, np.ones(1))
    val = fock_norm(one_plus_z, n)
    out = [{"trial": "1+z", "instance": f"N={n}", "fock_norm": val,
            "norm_outside_interval": float(max(0.0, 1.99 - val, val - 2.0)), "von_neumann_excess": 0.0}]
    small = build_truncated_fock(scalar_module(1), 5)
    circle = np.exp(2j * np.pi * np.arange(4096) / 4096)
    for k, rng in enumerate(trial_rngs(s.seed, s.trials)):
        coeffs = rng.normal(size=6) + 1j * rng.normal(size=6)
        t = np.sqrt(rng.uniform()) * np.exp(2j * np.pi * rng.uniform())
        p = TensorPolynomial(small, {j: (np.array([[c]]) if j == 0 else np.array([c])) for j, c in enumerate(coeffs)})
        pair = row_pair([np.array([[t]])])
        val_t = abs(integrated_form(pair, p)[0, 0])
        sup = np.abs(np.polyval(coeffs[::-1], circle)).max()
        out.append({"trial": k, "instance": "point", "norm_outside_interval": 0.0,
                    "von_neumann_excess": float(max(0.0, val_t - sup))})
    return out


RUNNERS = {
    "functor": _functor_records,
    "cp_lemma": _cp_records,
    "ac_transform": _ac_records,
    "stabilize": _stabilize_records,
    "reconstruct": _reconstruct_records,
    "disc_convergence": _disc_records,
}


def summarize(records: list[dict], tol: dict[str, float]) -> tuple[dict, bool]:
    summary = {}
    ok = True
    for name, limit in tol.items():
        vals = [float(r[name]) for r in records if name in r]
        worst = max(vals, default=0.0)
        passed = bool(worst <= limit)
        ok &= passed
        summary[name] = {"max": worst, "tolerance": limit, "pass": passed, "count": len(vals)}
    return summary, ok


def run_scenario(s: Scenario, jobs: int = 1) -> Report:
    """Run one campaign. ``jobs > 1`` spreads random trials over processes; records are identical."""
    start = time.perf_counter()
    records = RUNNERS[s.kind](s, jobs)
    summary, ok = summarize(records, s.tolerance_table())
    return Report(asdict(s), _plain(records), summary, ok, time.perf_counter() - start)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# -- instance files ------------------------------------------------------------

def generate_instance(kind: str, seed: int, nmax: int | None = None, d: int = 1) -> dict:
    """A reproducible serialized instance for ``kind``."""
    rng = np.random.default_rng(seed)
    if kind in ("functor", "cp_lemma", "ac_transform"):
        ctx = random_context(rng)
        pair = _scaled_point(ctx, rng) if kind == "ac_transform" else _random_point(ctx, rng)
        return {"kind": kind, "seed": seed, "context": ser.encode_context(ctx),
                "pair": ser.encode_pair(pair)}
    if kind == "stabilize":
        n = nmax or 3
        st = canonical_stabilization(scalar_module(d), n)
        # the stabilized context is rebuilt from (d, nmax); only summary data is stored
        return {"kind": kind, "seed": seed, "d": d, "nmax": n, "fock_dims": st.fock.level_dims,
                "M_dim": st.M.ambient_dim, "P0": ser.encode_matrix(st.P0)}
    if kind == "reconstruct":
        h = 2
        ts = random_row_contraction(max(d, 2), h, rng)
        return {"kind": kind, "seed": seed, "d": len(ts), "nmax": nmax or 3,
                "T": [ser.encode_matrix(t) for t in ts]}
    if kind == "disc_convergence":
        return {"kind": kind, "seed": seed, "poly": [[1.0, 0.0], [1.0, 0.0]], "nmax": nmax or 200}
    raise ValueError(f"unknown kind '{kind}'")


def _read_instance(path: str, kind: str | None = None) -> dict:
    obj = ser.loads(Path(path).read_text(), path)
    if not isinstance(obj, dict):
        raise ser.SchemaError(f"{path}: expected a JSON object")
    if kind is not None and obj.get("kind") != kind:
        raise ser.SchemaError(f"{path}: instance kind is '{obj.get('kind')}', expected '{kind}'")
    return obj


def _load_instance(path: str):
    obj = _read_instance(path)
    if "context" not in obj or obj["context"] is None:
        raise ser.SchemaError(f"{path}: no serialized context in this instance")
    ctx = ser.decode_context(obj["context"], f"{path}:context")
    pair = ser.decode_pair(obj["pair"], ctx.F, f"{path}:pair") if obj.get("pair") else None
    return ctx, pair


# -- output ----------------------------------------------------------------------

def machine_text(report: Report) -> str:
    return ser.dumps(report.to_dict())


def human_text(report: Report) -> str:
    sc = report.scenario
    lines = [f"scenario {sc['kind']}: trials={sc['trials']} seed={sc['seed']} records={len(report.records)}"]
    for name, s in sorted(report.summary.items()):
        flag = "PASS" if s["pass"] else "FAIL"
        lines.append(f"  {flag} {name}: max={s['max']!r} tol={s['tolerance']!r} (n={s['count']})")
    lines.append(f"  overall: {'PASS' if report.passed else 'FAIL'}  wall_time={report.wall_time:.2f}s")
    return "\n".join(lines)


def strip_timing(obj: dict) -> dict:
    """Report dict without the wall-time field (for determinism comparisons)."""
    return {k: v for k, v in obj.items() if k != "wall_time"}


def _parse_tols(items: list[str]) -> dict[str, float]:
    out = {}
    for item in items or []:
        name, sep, val = item.partition("=")
        if not sep:
            raise ValueError(f"--tol expects name=value, got '{item}'")
        try:
            out[name.strip()] = float(val)
        except ValueError:
            raise ValueError(f"--tol {name}: '{val}' is not a number") from None
    return out


def _emit(text: str, out: str | None, default_name: str) -> None:
    if out is None and os.environ.get(OUT_ENV):
        out = str(Path(os.environ[OUT_ENV]) / default_name)
    if out is None:
        print(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="corrtensor", description="Morita-transform verification campaigns")
    sub = p.add_subparsers(dest="verb", required=True)
    v = sub.add_parser("verify", help="run a verification scenario")
    v.add_argument("kind", choices=KINDS + ("all",))
    g = sub.add_parser("generate", help="write a reproducible instance file")
    g.add_argument("kind", choices=KINDS)
    g.add_argument("-d", type=int, default=1, help="rank of F = C^d for stabilize/reconstruct")
    r = sub.add_parser("report", help="print a stored machine report")
    r.add_argument("file")
    for q in (v, g, r):
        q.add_argument("--format", choices=("human", "machine"), default="human")
        q.add_argument("--out", default=None)
    for q in (v, g):
        q.add_argument("--seed", type=lambda s: int(s, 0), default=DEFAULT_SEED)
        q.add_argument("--nmax", type=int, default=None)
    v.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
    v.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE")
    v.add_argument("--instance", default=None, help="instance file from 'generate'")
    v.add_argument("--verbose", action="store_true", help="print per-trial records")
    v.add_argument("--jobs", type=int, default=1, help="worker processes for random trials")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "verify":
            kinds = KINDS if args.kind == "all" else (args.kind,)
            tols = _parse_tols(args.tol)
            reports = []
            for kind in kinds:
                own = {k: v for k, v in tols.items() if k in DEFAULT_TOLERANCES[kind]} if args.kind == "all" else tols
                sc = Scenario(kind, args.trials, args.seed, own, args.nmax, args.instance)
                reports.append(run_scenario(sc, args.jobs))
            if args.format == "machine":
                payload = [r.to_dict() for r in reports]
                text = ser.dumps(payload[0] if len(payload) == 1 else payload)
            else:
                parts = [human_text(r) for r in reports]
                if args.verbose:
                    parts += [json.dumps(rec, sort_keys=True) for r in reports for rec in r.records]
                text = "\n".join(parts)
            _emit(text, args.out, f"report-{args.kind}.json" if args.format == "machine" else f"report-{args.kind}.txt")
            return 0 if all(r.passed for r in reports) else 1
        if args.verb == "generate":
            inst = generate_instance(args.kind, args.seed, args.nmax, args.d)
            _emit(ser.dumps(inst), args.out, f"{args.kind}-{args.seed}.json")
            return 0
        obj = ser.loads(Path(args.file).read_text(), args.file)
        items = obj if isinstance(obj, list) else [obj]
        reports = [Report(o["scenario"], o["records"], o["summary"], o["passed"], o.get("wall_time", 0.0))
                   for o in items]
        if args.format == "machine":
            _emit(ser.dumps([r.to_dict() for r in reports] if len(reports) > 1 else reports[0].to_dict()),
                  args.out, "report.json")
        else:
            _emit("\n".join(human_text(r) for r in reports), args.out, "report.txt")
        return 0 if all(r.passed for r in reports) else 1
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

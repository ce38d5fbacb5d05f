"""The invariant and oracle suite behind ``conpart verify``.

Each check owns a fixed child index of the master stream, so checks can be
added or skipped without shifting the randomness of the others.  The
report carries no timings, which keeps it byte-identical across runs.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .combinatorics import (ConstraintSeq, constrained_compositions, d_lambda, d_lambda_mu,
                            enumerate_partitions, is_constrained)
from .exact import (decrement_matrix, eppf_two_parameter, p_monte_carlo, p_product,
                    q_formation, shape_law)
from .experiments import clt_blocks, consistency_audit, load_gates
from .models import Beta, FixedH, FrequencyModel, IIDStick, PointMass, TwoParameter
from .oracles import crp_shape_counts, ewens_pitman_eppf, extension_count, shape_enumeration_counts
from .partition import SetPartition, count_blocks, shape, validate
from .rng import RandomStream
from .samplers import (block_counts, delete_transition_probs, paintbox_batch, paintbox_record_violations,
                       paintbox_sample, sample_partition, sample_partitions_batch, sequential_extend)
from .stats import (conditional_uniformity, formation_matrix, gof_pvalue, shape_counts,
                    two_sample_pvalue, z_score)


@dataclass(frozen=True)
class VerifySettings:
    """Sizes of the quick suite; the acceptance tests run the full-size campaigns."""

    enum_n: int = 7
    ext_lam: int = 4
    ext_mu: int = 6
    audit_n: int = 7
    shape_n: int = 5
    samples: int = 100_000
    mc_reps: int = 200_000
    uniformity_n: int = 6
    uniformity_samples: int = 200_000
    traces: int = 200
    clt_n: int = 10_000
    clt_reps: int = 2_000


@dataclass
class Check:
    name: str
    passed: bool | None
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


AUDIT_MODELS = (FixedH((0.5, 0.25), 0.5), FixedH((0.6, 0.3, 0.1), 0.3))


def exact_shape_law(model: FrequencyModel, n: int, rho: ConstraintSeq) -> dict:
    if isinstance(model, FixedH):
        return shape_law(n, rho, [model.H(k) for k in range(1, n)])
    return {lam: p_product(lam, rho, model) for lam in constrained_compositions(n, rho)}


def check_counting(rho, model, stream, cfg):
    bad = []
    for n in range(1, cfg.enum_n + 1):
        counts = shape_enumeration_counts(n, rho)
        for lam in constrained_compositions(n, rho):
            if d_lambda(lam, rho) != counts.get(lam, 0):
                bad.append([list(lam), d_lambda(lam, rho), counts.get(lam, 0)])
        if set(counts) - set(constrained_compositions(n, rho)):
            bad.append(["unexpected shape", n])
    return Check("counting", not bad, {"n_max": cfg.enum_n, "mismatches": bad})


def check_extension(rho, model, stream, cfg):
    bad, tested = [], 0
    reps_by_shape: dict = {}
    for m in range(1, cfg.ext_lam + 1):
        for pi in enumerate_partitions(m, rho):
            reps_by_shape.setdefault(shape(pi), []).append(pi)
    for lam, reps in sorted(reps_by_shape.items()):
        for n in range(sum(lam), cfg.ext_mu + 1):
            for mu in constrained_compositions(n, rho):
                if len(mu) < len(lam):
                    continue
                want = d_lambda_mu(lam, mu, rho)
                got = {extension_count(pi, mu, rho) for pi in reps}
                tested += 1
                if got != {want}:
                    bad.append([list(lam), list(mu), want, sorted(got)])
    return Check("extension_counts", not bad, {"pairs": tested, "mismatches": bad})


def check_kernel(rho, model, stream, cfg):
    gates = load_gates()
    worst_sum, worst_audit, bad = 0, 0.0, []
    for n in range(2, cfg.audit_n + 1):
        for mu in constrained_compositions(n, rho):
            probs = delete_transition_probs(mu, rho, exact=True)
            worst_sum = max(worst_sum, abs(sum(probs.values()) - 1))
            bad += [[list(mu), list(lam)] for lam in probs if not _constrained(lam, rho)]
        for h in AUDIT_MODELS:
            worst_audit = max(worst_audit, consistency_audit(h, rho, n))
    ok = worst_sum == 0 and not bad and worst_audit < gates["consistency"]["max_deviation"]
    return Check("kernel_consistency", ok, {"n_max": cfg.audit_n, "sum_error": float(worst_sum),
                                            "audit_deviation": worst_audit, "bad_targets": bad})


def _constrained(lam, rho):
    return not lam or is_constrained(lam, rho)


def check_sum_to_one(rho, model, stream, cfg):
    tol = load_gates()["verify"]["sum_tol"]
    errors = {}
    for n in range(1, cfg.uniformity_n + 1):
        errors[n] = abs(math.fsum(exact_shape_law(model, n, rho).values()) - 1.0)
    return Check("probabilities_sum_to_one", max(errors.values()) < tol,
                 {"max_error": max(errors.values()), "tolerance": tol})


def check_product_vs_mc(rho, model, stream, cfg):
    if isinstance(model, FixedH) or not model.independent:
        return Check("product_formula_vs_mc", None, {"skipped": "model has no product formula"})
    z_gate = load_gates()["verify"]["z"]
    rows = []
    child = 0
    for n in range(1, cfg.shape_n + 1):
        for lam in constrained_compositions(n, rho):
            est, se = p_monte_carlo(lam, rho, model, cfg.mc_reps, stream.child(child))
            child += 1
            ref = p_product(lam, rho, model)
            rows.append({"lambda": list(lam), "exact": ref, "mc": est, "se": se,
                         "z": z_score(est, ref, se)})
    worst = max(r["z"] for r in rows)
    return Check("product_formula_vs_mc", worst < z_gate, {"max_z": worst, "rows": rows})


def check_shape_law(rho, model, stream, cfg):
    p_gate = load_gates()["verify"]["p_value"]
    n = cfg.shape_n
    labels = sample_partitions_batch(model, n, cfg.samples, stream, rho)
    pv, cells = gof_pvalue(shape_counts(labels), exact_shape_law(model, n, rho))
    valid = all(validate(SetPartition(row), rho) for row in labels[:2000])
    return Check("shape_law_gof", pv > p_gate and valid,
                 {"n": n, "p_value": pv, "cells": cells, "sampled_partitions_valid": valid})


def check_paintbox(rho, model, stream, cfg):
    p_gate = load_gates()["verify"]["p_value"]
    n = cfg.shape_n
    seq = shape_counts(sample_partitions_batch(model, n, cfg.samples, stream.child(0), rho))
    box = shape_counts(paintbox_batch(model, n, cfg.samples, stream.child(1), rho))
    pv = two_sample_pvalue(seq, box)
    violations = 0
    for t in range(cfg.traces):
        trace = paintbox_sample(model, 12, stream.child(2).child(t), rho)
        violations += len(paintbox_record_violations(trace, rho))
        violations += not validate(trace.partition, rho)
    return Check("paintbox_equals_sequential", pv > p_gate and violations == 0,
                 {"p_value": pv, "record_violations": violations, "traces": cfg.traces})


def check_uniformity(rho, model, stream, cfg):
    p_gate = load_gates()["verify"]["p_value"]
    labels = sample_partitions_batch(model, cfg.uniformity_n, cfg.uniformity_samples, stream, rho)
    rows = conditional_uniformity(labels, rho)
    tested = [r for r in rows if r["p_value"] is not None]
    ok = all(r["p_value"] > p_gate for r in tested)
    return Check("conditional_uniformity", ok,
                 {"n": cfg.uniformity_n, "classes_tested": len(tested),
                  "min_p_value": min((r["p_value"] for r in tested), default=None)})


def formation_prefixes(n_max: int, rho: ConstraintSeq):
    """Prefixes (lam_1, ..., lam_l) with lam_1 = rho_1, lam_j >= rho_j and |lam| <= n_max."""
    out = []

    def rec(prefix, total):
        out.append(tuple(prefix))
        k = len(prefix) + 1
        for part in range(rho(k), n_max - total + 1):
            rec(prefix + [part], total + part)

    if rho(1) <= n_max:
        rec([rho(1)], rho(1))
    return out


def check_formation(rho, model, stream, cfg):
    z_gate = load_gates()["verify"]["z"]
    n = cfg.shape_n + 1
    labels = sample_partitions_batch(model, n, cfg.samples, stream, rho)
    times = formation_matrix(labels, rho, n)
    rows = []
    for lam in formation_prefixes(n, rho):
        target = np.cumsum(lam)
        hit = np.all(times[:, :len(lam)] == target, axis=1).mean()
        ref = float(q_formation(lam, rho, model))
        se = math.sqrt(max(ref * (1 - ref), 1e-300) / cfg.samples)
        rows.append({"prefix": list(lam), "exact": ref, "empirical": float(hit),
                     "z": z_score(hit, ref, se)})
    worst = max(r["z"] for r in rows)
    return Check("formation_law", worst < z_gate, {"n": n, "max_z": worst, "prefixes": len(rows)})


def check_decrement(rho, model, stream, cfg):
    tol = load_gates()["verify"]["decrement_tol"]
    if isinstance(model, TwoParameter):
        model = model.as_indep_beta()
    if isinstance(model, FixedH) or not model.independent:
        return Check("decrement_matrix", None, {"skipped": "model has no decrement matrix"})
    rows = []
    for k in range(1, 4):
        law = model.w_law(k)
        if not isinstance(law, Beta):
            continue
        dm = decrement_matrix(rho(k), law.a, law.b, 100, k)
        rows.append({"k": k, "row_sum_error": float(np.max(np.abs(dm.row_sums() - 1))),
                     "pascal_residual": dm.pascal_residual()})
    if not rows:
        return Check("decrement_matrix", None, {"skipped": "point-mass residual fractions"})
    ok = all(r["row_sum_error"] < tol and r["pascal_residual"] < tol for r in rows)
    return Check("decrement_matrix", ok, {"n_max": 100, "rows": rows})


def check_clt(rho, model, stream, cfg):
    if not isinstance(model, IIDStick) or isinstance(model.w, PointMass):
        return Check("block_count_moments", None, {"skipped": "needs non-degenerate iid residuals"})
    gates = load_gates()["verify"]
    rep = clt_blocks(model, rho, [cfg.clt_n], cfg.clt_reps, stream)
    e = rep.entries[0]
    ok = (gates["clt_mean_ratio"][0] <= e["mean_ratio"] <= gates["clt_mean_ratio"][1]
          and gates["clt_var_ratio"][0] <= e["var_ratio"] <= gates["clt_var_ratio"][1])
    return Check("block_count_moments", ok, {"n": cfg.clt_n, "reps": cfg.clt_reps,
                                             "mean_ratio": e["mean_ratio"], "var_ratio": e["var_ratio"]})


def check_fast_paths(rho, model, stream, cfg):
    z_gate = load_gates()["verify"]["z"]
    identical = True
    for s in range(5):
        sub = stream.child(0).child(s)
        fast = sample_partition(model, 60, sub, rho)
        path = model.path(sub.child(0))
        uniforms = sub.child(1)
        slow = SetPartition([1])
        for _ in range(59):
            slow = sequential_extend(slow, path, uniforms, rho)
        identical &= fast == slow
    n, reps = 200, 4000
    engine = block_counts(model, rho, n, reps, stream.child(1))
    direct = np.array([count_blocks(sample_partition(model, n, stream.child(2).child(r), rho))
                       for r in range(reps // 4)])
    se = math.sqrt(engine.var(ddof=1) / engine.size + direct.var(ddof=1) / direct.size)
    z = z_score(engine.mean(), direct.mean(), se)
    return Check("fast_paths", bool(identical) and z < z_gate,
                 {"bit_identical": bool(identical), "engine_mean": float(engine.mean()),
                  "sampler_mean": float(direct.mean()), "z": z})


def check_two_parameter(rho, model, stream, cfg):
    z_gate = load_gates()["verify"]["z"]
    ewens = [eppf_two_parameter((2, 1), 0.0, 1.0), eppf_two_parameter((1, 2), 0.0, 1.0)]
    worst = 0.0
    for n in range(1, 7):
        for lam in constrained_compositions(n, ConstraintSeq.constant(1)):
            worst = max(worst, abs(eppf_two_parameter(lam, 0.5, 0.5) - ewens_pitman_eppf(lam, 0.5, 0.5)))
    crp = crp_shape_counts(0.5, 0.5, 4, cfg.samples, stream)
    exact = {lam: p_product(lam, ConstraintSeq.constant(1), TwoParameter(0.5, 0.5))
             for lam in constrained_compositions(4, ConstraintSeq.constant(1))}
    total = sum(crp.values())
    zs = [z_score(crp.get(l, 0) / total, p, math.sqrt(p * (1 - p) / total)) for l, p in exact.items()]
    ok = max(abs(e - 1 / 6) for e in ewens) < 1e-12 and worst < 1e-10 and max(zs) < z_gate
    return Check("two_parameter", ok, {"ewens_(2,1)_(1,2)": ewens, "eppf_max_error": worst,
                                       "crp_max_z": max(zs)})


CHECKS: tuple[tuple[str, Callable], ...] = (
    ("counting", check_counting),
    ("extension_counts", check_extension),
    ("kernel_consistency", check_kernel),
    ("probabilities_sum_to_one", check_sum_to_one),
    ("product_formula_vs_mc", check_product_vs_mc),
    ("shape_law_gof", check_shape_law),
    ("paintbox_equals_sequential", check_paintbox),
    ("conditional_uniformity", check_uniformity),
    ("formation_law", check_formation),
    ("decrement_matrix", check_decrement),
    ("block_count_moments", check_clt),
    ("fast_paths", check_fast_paths),
    ("two_parameter", check_two_parameter),
)


def run_verify(rho: ConstraintSeq, model: FrequencyModel, seed: int,
               settings: VerifySettings | None = None) -> list[Check]:
    cfg = settings or VerifySettings()
    master = RandomStream(seed)
    return [fn(rho, model, master.child(i), cfg) for i, (_, fn) in enumerate(CHECKS)]


def verdict_table(checks: list[Check]) -> str:
    width = max(len(c.name) for c in checks)
    mark = {True: "PASS", False: "FAIL", None: "SKIP"}
    return "\n".join(f"{c.name:<{width}}  {mark[c.passed]}" for c in checks)


def report_json(checks: list[Check], config: dict) -> str:
    body = {"config": config, "checks": [c.to_dict() for c in checks],
            "passed": all(c.passed is not False for c in checks)}
    return json.dumps(body, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, Fraction):
        return str(x)
    raise TypeError(f"cannot serialise {type(x).__name__}")

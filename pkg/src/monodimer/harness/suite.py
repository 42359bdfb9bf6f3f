"""Verification suite over a corpus of small models, and the mixing-time sweep."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..chains import GLAUBER, JS, LAZY_JS, transition_kernel
from ..flow import (FlowError, PhiSpec, _Conditionals, canonical_path, coupling_law,
                    coupling_law_bruteforce, cycle_path_identity, exchange_transitions,
                    path_is_legal, verify_decoupling, verify_encoding,
                    verify_flow_theorems)
from ..graph import Graph, GraphError, popcount
from ..model import (DEFAULT_CAP, MonomerDimerModel, OversizeError, Pinning, enumerate_matchings,
                     feasible_pinnings, format_fraction, marginal_lower_bound_check)
from ..spectral import (SpectralError, compare_js_glauber, mixing_time_exact, poincare_constant,
                        verify_concavity, verify_local_to_global, verify_one_step_decomposition)
from . import generators as gen
from .config import cell_rng

PASS, FAIL, SKIPPED = "pass", "fail", "skipped"
EXHAUSTIVE_EDGES = 6  # pinning sweeps run on graphs up to this many edges
DEFAULT_LAMBDAS = ("1/2", "1", "2")


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    model: MonomerDimerModel


def default_graphs() -> list[tuple[str, Graph]]:
    pet = gen.petersen()
    return [
        ("K2", gen.path(2)),
        ("P3", gen.path(3)),
        ("P4", gen.path(4)),
        ("C4", gen.cycle(4)),
        ("C6", gen.cycle(6)),
        ("K3", gen.complete(3)),
        ("K1,3", gen.star(3)),
        ("K1,3+edge", gen.star_plus_edge(3)),
        ("K1,5", gen.star(5)),
        ("K4", gen.complete(4)),
        ("grid3x3", gen.grid(3, 3)),
        ("petersen9-s1", gen.subgraph_sample(pet, 9, seed=1)),
        ("petersen9-s2", gen.subgraph_sample(pet, 9, seed=2)),
    ]


def default_corpus(lambdas=DEFAULT_LAMBDAS) -> list[CorpusEntry]:
    out = []
    for name, g in default_graphs():
        for lam in lambdas:
            out.append(CorpusEntry(f"{name}@{lam}", MonomerDimerModel(g, lam)))
    return out


# -- individual checks; each returns (status, details) ----------------------------

def _two_sided_edges(cond: _Conditionals) -> list[int]:
    return [e for e in range(cond.model.graph.m) if cond.two_sided(e)]


def check_coupling_validity(model, seed):
    cond = _Conditionals(model, None)
    edges = _two_sided_edges(cond)
    bad = []
    for e in edges:
        d0, d1 = cond.pair(e)
        law = coupling_law(model, None, e, cond)
        mx: dict = {}
        my: dict = {}
        for (x, y), p in law.items():
            mx[x] = mx.get(x, 0) + p
            my[y] = my.get(y, 0) + p
        ok = all(mx.get(x, 0) == p for x, p in zip(d0.support, d0.probabilities))
        ok &= all(my.get(y, 0) == p for y, p in zip(d1.support, d1.probabilities))
        ok &= set(mx) <= set(d0.support) and set(my) <= set(d1.support)
        ok &= law == coupling_law_bruteforce(model, None, e, cond)
        if not ok:
            bad.append(e)
    return (FAIL if bad else PASS), {"edges": len(edges), "failing_edges": bad}


def _kernel_ok(model, pinning, kind, dist):
    k = transition_kernel(model, pinning, kind, dist=dist)
    return k.is_stochastic() and k.is_reversible()


def check_kernels(model, seed):
    full = enumerate_matchings(model)
    pinnings = [Pinning.empty(model.graph)]
    if model.graph.m <= EXHAUSTIVE_EDGES:
        for free in range(0, model.graph.full_mask):
            pinnings.extend(feasible_pinnings(full, free))
    bad = []
    for p in pinnings:
        dist = enumerate_matchings(model, p)
        for kind in (JS, LAZY_JS, GLAUBER):
            if not _kernel_ok(model, p, kind, dist):
                bad.append(f"{kind}:{p.describe()}")
    return (FAIL if bad else PASS), {"pinnings": len(pinnings), "failures": bad}


def check_canonical_paths(model, seed):
    cond = _Conditionals(model, None)
    n = 0
    bad = 0
    for e in _two_sided_edges(cond):
        for (x, y) in coupling_law(model, None, e, cond):
            n += 1
            try:
                path = canonical_path(model.graph, x, y, e)
            except FlowError:
                bad += 1
                continue
            d = popcount(x ^ y)
            ok = path.source == x and path.target == y
            ok &= path.length <= d <= 2 * path.length
            ok &= path_is_legal(model, None, path)
            bad += not ok
    return (FAIL if bad else PASS), {"pairs": n, "bad": bad}


def check_local_to_global(model, seed):
    if model.graph.m > EXHAUSTIVE_EDGES:
        return SKIPPED, {"reason": f"pinning sweep limited to {EXHAUSTIVE_EDGES} edges"}
    r = verify_local_to_global(model, max_edges=EXHAUSTIVE_EDGES)
    return (PASS if r.holds else FAIL), {
        "gamma": r.gamma, "bound": r.bound, "pinnings": r.pinnings_checked,
        "alpha_k": {str(k): a for k, (a, _) in sorted(r.alphas.items())}}


def check_flow_theorems(model, seed):
    r = verify_flow_theorems(model, seed=seed)
    return (PASS if r.holds else FAIL), {
        "kappa": format_fraction(r.kappa), "strong_kappa": format_fraction(r.strong_kappa),
        "L": format_fraction(r.L), "phi": format_fraction(r.phi),
        "alpha_pi": r.alpha_pi, "pi_bound": r.pi_bound,
        "alpha_lsi": r.alpha_lsi, "lsi_bound": r.lsi_bound}


def check_concavity(model, seed):
    if model.graph.m > EXHAUSTIVE_EDGES:
        return SKIPPED, {"reason": f"pinning sweep limited to {EXHAUSTIVE_EDGES} edges"}
    full = enumerate_matchings(model)
    n_pin = 0
    transitions = 0
    bad = []
    for free in range(1, model.graph.full_mask + 1):
        for p in feasible_pinnings(full, free):
            r = verify_concavity(model, p, n_functions=2, seed=seed)
            n_pin += 1
            transitions += r.transitions_checked
            if not (r.holds and r.form_holds):
                bad.append(p.describe())
    return (FAIL if bad else PASS), {"pinnings": n_pin, "transitions": transitions,
                                     "failures": bad}


def check_encoding(model, seed):
    kernel = transition_kernel(model, None, JS)
    cond = _Conditionals(model, None)
    laws: dict = {}
    checked = skipped = 0
    bad = []
    for a, b in exchange_transitions(kernel):
        try:
            h = (b & ~a).bit_length() - 1
            if h not in laws:
                laws[h] = coupling_law(model, None, h, cond)
            r = verify_encoding(model, a, b, laws)
        except GraphError:
            # the merged graph would need a parallel edge (triangle through w)
            skipped += 1
            continue
        checked += 1
        if not r.holds:
            bad.append([_edges(a), _edges(b)])
    if not checked and skipped:
        return SKIPPED, {"reason": "every merge creates a parallel edge", "skipped": skipped}
    return (FAIL if bad else PASS), {"transitions": checked, "skipped_transitions": skipped,
                                     "failures": bad}


def _edges(x: int) -> str:
    return " ".join(str(i) for i in range(x.bit_length()) if x >> i & 1) or "-"


def _phi_family(kernel, limit: int = 4) -> list[PhiSpec]:
    phis = [PhiSpec("zero"), PhiSpec("one"), PhiSpec("size")]
    trans = [(kernel.states.support[i], kernel.states.support[j])
             for i, j, _ in kernel.off_diagonal()]
    if trans:
        picks = sorted({round(t * (len(trans) - 1) / max(limit - 1, 1)) for t in range(limit)})
        for k in picks:
            a, b = trans[k]
            for kind in ("transition", "transition_over_length", "transition_times_length"):
                phis.append(PhiSpec(kind, a, b))
    return phis


def check_decoupling(model, seed):
    kernel = transition_kernel(model, None, JS)
    cond = _Conditionals(model, None)
    edges = _two_sided_edges(cond)
    laws = {e: coupling_law(model, None, e, cond) for e in edges}
    phis = _phi_family(kernel)
    id_ok = True
    bad = []
    for f in edges:
        for phi in phis:
            r = verify_decoupling(model, f, phi, laws=laws)
            id_ok &= r.identity_holds
            if not r.inequality_holds:
                bad.append(f"{f}:{phi.kind}")
    ok = id_ok and not bad
    return (PASS if ok else FAIL), {"edges": len(edges), "test_functions": len(phis),
                                    "identity_holds": bool(id_ok), "failures": bad}


def check_glauber_comparison(model, seed):
    r = compare_js_glauber(model)
    return (PASS if r.holds else FAIL), {"factor": format_fraction(r.factor_checked),
                                         "min_eig": r.min_eig}


def check_marginal_bound(model, seed):
    r = marginal_lower_bound_check(model)
    return (PASS if r.holds else FAIL), {"phi": format_fraction(r.phi),
                                         "one_bound": format_fraction(r.one_bound),
                                         "zero_bound": format_fraction(r.zero_bound)}


def check_cycle_path(model, seed):
    cond = _Conditionals(model, None)
    rows = 0
    bad = 0
    for e in _two_sided_edges(cond):
        for row in cycle_path_identity(model, e, coupling_law(model, None, e, cond)):
            rows += 1
            bad += not row[4]
    return (FAIL if bad else PASS), {"cycles": rows, "bad": bad}


def check_one_step_decomposition(model, seed, name="", n_functions: int = 3):
    dist = enumerate_matchings(model)
    rng = cell_rng(seed, f"one_step:{name}")
    ok = all(verify_one_step_decomposition(model, None, rng.normal(size=len(dist)), rtol=1e-9,
                                           dist=dist)
             for _ in range(n_functions))
    return (PASS if ok else FAIL), {"functions": n_functions}


CHECKS = {
    "coupling_validity": check_coupling_validity,
    "kernels": check_kernels,
    "canonical_paths": check_canonical_paths,
    "local_to_global": check_local_to_global,
    "flow_theorems": check_flow_theorems,
    "concavity": check_concavity,
    "encoding": check_encoding,
    "decoupling": check_decoupling,
    "glauber_comparison": check_glauber_comparison,
    "marginal_bound": check_marginal_bound,
    "cycle_path": check_cycle_path,
    "one_step_decomposition": check_one_step_decomposition,
}


def run_cell(check: str, entry: CorpusEntry, seed: int = 0, cap: int = DEFAULT_CAP) -> dict:
    fn = CHECKS[check]
    try:
        enumerate_matchings(entry.model, cap=cap)
        if fn is check_one_step_decomposition:
            status, details = fn(entry.model, seed, entry.name)
        else:
            status, details = fn(entry.model, seed)
    except OversizeError as exc:
        status, details = SKIPPED, {"reason": f"state space exceeds cap ({exc})"}
    except SpectralError as exc:
        status, details = SKIPPED, {"reason": str(exc)}
    return {"check": check, "model": entry.name, "status": status, "details": _clean(details)}


def _cell_job(args):
    return run_cell(*args)


def run_verification_suite(corpus=None, seed: int = 0, checks=None, workers: int = 1,
                           cap: int = DEFAULT_CAP) -> list[dict]:
    """One report row per (check, model); rows come back in a fixed order."""
    corpus = default_corpus() if corpus is None else list(corpus)
    checks = list(CHECKS) if checks is None else list(checks)
    unknown = [c for c in checks if c not in CHECKS]
    if unknown:
        raise ValueError(f"unknown checks: {unknown}")
    jobs = [(c, entry, seed, cap) for entry in corpus for c in checks]
    if workers > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(workers) as ex:
            rows = list(ex.map(_cell_job, jobs))
    else:
        rows = [_cell_job(j) for j in jobs]
    return rows


def suite_failed(report: list[dict]) -> bool:
    return any(r["status"] == FAIL for r in report)


def report_json(report: list[dict]) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def report_csv(report: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["check", "model", "status", "details"])
    for r in report:
        w.writerow([r["check"], r["model"], r["status"], json.dumps(r["details"], sort_keys=True)])
    return buf.getvalue()


def _clean(obj):
    # plain JSON types only, with floats written via repr for stable output
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, Fraction):
        return format_fraction(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# -- mixing-time sweep ----------------------------------------------------------------

SWEEP_FIELDS = ["family", "size", "n", "m", "max_degree", "states", "gamma", "t_mix",
                "ratio_d2m_logn", "ratio_dmn", "status"]


def mixing_sweep(family: str, sizes, lam="1", eps: float = 1 / (2 * math.e),
                 cap: int = DEFAULT_CAP, max_steps: int = 1_000_000) -> list[dict]:
    """Exact mixing time of the lazy chain over a family of graphs."""
    rows = []
    for size in sizes:
        args = size if isinstance(size, (tuple, list)) else (size,)
        g = gen.generate_graph({"family": family, **_family_kwargs(family, args)})
        row = {"family": family, "size": "x".join(str(a) for a in args), "n": g.n, "m": g.m,
               "max_degree": g.max_degree}
        model = MonomerDimerModel(g, lam)
        try:
            dist = enumerate_matchings(model, cap=cap)
        except OversizeError as exc:
            row.update(states="", gamma="", t_mix="", ratio_d2m_logn="", ratio_dmn="",
                       status=f"skipped: {exc}")
            rows.append(row)
            continue
        kernel = transition_kernel(model, None, LAZY_JS, dist=dist)
        gamma = poincare_constant(kernel) if len(dist) > 1 else math.inf
        t = mixing_time_exact(kernel, eps, max_steps)
        d, m, n = g.max_degree, g.m, g.n
        denom = d * d * m * math.log(n) if n > 1 and m else 0.0
        row.update(states=len(dist), gamma=gamma, t_mix=t,
                   ratio_d2m_logn=t / denom if denom else "",
                   ratio_dmn=t / (d * m * n) if m else "", status="ok")
        rows.append(row)
    return rows


def _family_kwargs(family: str, args) -> dict:
    import inspect

    fn = gen.FAMILIES[family]
    names = list(inspect.signature(fn).parameters)
    return dict(zip(names, args))


def sweep_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, SWEEP_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()

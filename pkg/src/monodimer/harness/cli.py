"""Command-line entry point: monodimer <subcommand> [options]."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

from ..chains import ChainSpec, simulate, transition_kernel
from ..flow import flow_statistics
from ..graph import GraphError, bits, read_graph, write_graph
from ..model import (DEFAULT_CAP, ModelError, MonomerDimerModel, OversizeError, Pinning,
                     enumerate_matchings, format_fraction)
from ..spectral import constants_report
from .config import ConfigError, ExperimentConfig, cell_rng
from .generators import RetryExhausted, generate_graph
from .suite import (CHECKS, CorpusEntry, default_corpus, mixing_sweep, report_csv, report_json,
                    run_verification_suite, suite_failed, sweep_csv)

COMMANDS = ("gen", "enumerate", "sample", "kernel", "constants", "flow-stats", "verify", "sweep")


def load_graph(source):
    """A generator spec (``grid:3,3`` or a dict) or a path to a graph file."""
    if isinstance(source, str) and Path(source).is_file():
        return read_graph(Path(source).read_text())
    return generate_graph(source)


def _parse_pinning(g, text: str | None) -> Pinning:
    if not text:
        return Pinning.empty(g)
    fixed = {}
    for part in text.split(","):
        e, _, c = part.partition("=")
        fixed[int(e)] = int(c)
    return Pinning.from_dict(g, fixed)


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=None, help="64-bit seed (default 0)")
    p.add_argument("--cap", type=int, default=None, help=f"state cap (default {DEFAULT_CAP})")
    p.add_argument("--out", default=None, help="write output here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default=None)
    p.add_argument("--chain", default=None, help="js, lazy-js or glauber")
    p.add_argument("--config", default=None, help="JSON experiment config")
    return p


def _model_args(p):
    p.add_argument("--graph", default=None, help="generator spec like path:4, or a graph file")
    p.add_argument("--lam", default=None, help="edge weight, e.g. 1, 1/2 or 0.7")
    p.add_argument("--pin", default=None, help="pinning such as 0=1,3=0")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="monodimer",
                                     description="Monomer-dimer chains and flow verification.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="generate a graph file")
    p.add_argument("--graph", default=None)

    p = sub.add_parser("enumerate", parents=[common], help="exact distribution")
    _model_args(p)

    p = sub.add_parser("sample", parents=[common], help="run a chain")
    _model_args(p)
    p.add_argument("--steps", type=int, default=10_000)
    p.add_argument("--runs", type=int, default=1)

    p = sub.add_parser("kernel", parents=[common], help="exact transition matrix")
    _model_args(p)

    p = sub.add_parser("constants", parents=[common], help="gamma, rho and local constants")
    _model_args(p)
    p.add_argument("--restarts", type=int, default=12)
    p.add_argument("--alpha-k", action="store_true", help="include the pinning sweep table")

    p = sub.add_parser("flow-stats", parents=[common], help="congestion and length statistics")
    _model_args(p)
    p.add_argument("--edge", type=int, default=None)
    p.add_argument("--mode", choices=("exact", "monte_carlo"), default="exact")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--strong", action="store_true", help="csv of the strong congestion table")

    p = sub.add_parser("verify", parents=[common], help="run the verification suite")
    p.add_argument("--graph", default=None, help="verify one graph instead of the default corpus")
    p.add_argument("--lam", default=None)
    p.add_argument("--checks", default=None, help=f"comma list from {','.join(CHECKS)}")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("sweep", parents=[common], help="exact mixing times over a family")
    p.add_argument("--family", default="path")
    p.add_argument("--sizes", default="3,4,5,6,7,8", help="comma list; use 3x3 for two args")
    p.add_argument("--lam", default=None)
    p.add_argument("--eps", type=float, default=1 / (2 * math.e))
    return parser


def _settings(args) -> dict:
    """Merge a config file (if any) under explicit command-line values."""
    s = {"graph": None, "lam": "1", "chain": "js", "seed": 0, "params": {}, "outputs": {}}
    if args.config:
        cfg = ExperimentConfig.load(args.config)
        s.update(graph=cfg.graph, lam=cfg.lam, chain=cfg.chain, seed=cfg.seed,
                 params=dict(cfg.params), outputs=dict(cfg.outputs))
    for key in ("graph", "lam", "chain", "seed"):
        v = getattr(args, key, None)
        if v is not None:
            s[key] = v
    s["cap"] = args.cap if args.cap is not None else s["params"].get("cap", DEFAULT_CAP)
    s["format"] = args.format or s["params"].get("format", "json")
    s["out"] = args.out or s["outputs"].get(args.command)
    return s


def _param(args, s, name):
    return s["params"].get(name, getattr(args, name))


def _model(s):
    if s["graph"] is None:
        raise ConfigError("no graph given (use --graph or a config file)")
    return MonomerDimerModel(load_graph(s["graph"]), s["lam"])


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _table(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def cmd_gen(args, s):
    g = load_graph(s["graph"])
    if s["format"] == "json":
        return _dump({"n": g.n, "m": g.m, "edges": [list(e) for e in g.edges]})
    return write_graph(g)


def cmd_enumerate(args, s):
    model = _model(s)
    dist = enumerate_matchings(model, _parse_pinning(model.graph, args.pin), s["cap"])
    if s["format"] == "csv":
        return _table(["edges", "prob"], [[" ".join(map(str, bits(x))) or "-", format_fraction(p)]
                                          for x, p in zip(dist.support, dist.probabilities)])
    return _dump(dist.to_json())


def cmd_sample(args, s):
    model = _model(s)
    pin = _parse_pinning(model.graph, args.pin)
    spec = ChainSpec(s["chain"], pin)
    steps = int(_param(args, s, "steps"))
    runs = int(_param(args, s, "runs"))
    rows = []
    for r in range(runs):
        rng = cell_rng(s["seed"], f"sample:{r}")
        tr = simulate(model, spec, pin.ones, steps, rng)
        rows.append({"run": r, "final": list(bits(tr.final)),
                     "marginals": [float(v) for v in tr.empirical_marginals()]})
    if s["format"] == "csv":
        return _table(["run", "edge", "marginal"],
                      [[row["run"], e, repr(v)] for row in rows for e, v in enumerate(row["marginals"])])
    return _dump({"chain": spec.kind, "steps": steps, "runs": rows})


def cmd_kernel(args, s):
    model = _model(s)
    pin = _parse_pinning(model.graph, args.pin)
    k = transition_kernel(model, pin, ChainSpec(s["chain"], pin), cap=s["cap"])
    if s["format"] == "csv":
        data = k.to_json()
        header = ["state"] + [" ".join(map(str, st)) or "-" for st in data["states"]]
        return _table(header, [[h] + r for h, r in zip(header[1:], data["rows"])])
    return _dump(k.to_json())


def cmd_constants(args, s):
    model = _model(s)
    rep = constants_report(model, s["chain"], restarts=int(_param(args, s, "restarts")),
                           seed=s["seed"], with_alpha_k=bool(_param(args, s, "alpha_k")),
                           cap=s["cap"])
    if s["format"] == "csv":
        return rep.alpha_k_csv()
    return _dump(rep.to_json())


def cmd_flow_stats(args, s):
    model = _model(s)
    pin = _parse_pinning(model.graph, args.pin)
    mode = _param(args, s, "mode")
    stats = flow_statistics(model, pin, _param(args, s, "edge"), mode=mode,
                            samples=int(_param(args, s, "samples")),
                            rng=cell_rng(s["seed"], "flow-stats"), cap=s["cap"])
    if s["format"] == "csv":
        if mode != "exact":
            raise ConfigError("the congestion table needs --mode exact")
        return stats.congestion_csv(strong=bool(_param(args, s, "strong")))
    return _dump(stats.to_json())


def cmd_verify(args, s):
    checks = _param(args, s, "checks")
    if isinstance(checks, str):
        checks = [c.strip() for c in checks.split(",") if c.strip()]
    if s["graph"] is not None:
        lams = [s["lam"]] if args.lam is not None or args.config else ["1/2", "1", "2"]
        g = load_graph(s["graph"])
        corpus = [CorpusEntry(f"{_graph_name(s['graph'])}@{lam}", MonomerDimerModel(g, lam))
                  for lam in lams]
    else:
        corpus = default_corpus()
    report = run_verification_suite(corpus, seed=s["seed"], checks=checks,
                                    workers=int(_param(args, s, "workers")), cap=s["cap"])
    text = report_csv(report) if s["format"] == "csv" else report_json(report)
    return text, (1 if suite_failed(report) else 0)


def _graph_name(src) -> str:
    return src if isinstance(src, str) else json.dumps(src, sort_keys=True)


def cmd_sweep(args, s):
    sizes = _param(args, s, "sizes")
    if isinstance(sizes, str):
        sizes = [tuple(int(a) for a in t.split("x")) if "x" in t else int(t)
                 for t in sizes.split(",") if t.strip()]
    rows = mixing_sweep(_param(args, s, "family"), sizes, s["lam"], float(_param(args, s, "eps")),
                        cap=s["cap"])
    if s["format"] == "json":
        return _dump(rows)
    return sweep_csv(rows)


HANDLERS = {
    "gen": cmd_gen, "enumerate": cmd_enumerate, "sample": cmd_sample, "kernel": cmd_kernel,
    "constants": cmd_constants, "flow-stats": cmd_flow_stats, "verify": cmd_verify,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        s = _settings(args)
        if args.command == "sweep" and args.format is None and "format" not in s["params"]:
            s["format"] = "csv"
        if args.command == "gen" and args.format is None and "format" not in s["params"]:
            s["format"] = "csv"
        result = HANDLERS[args.command](args, s)
    except (ConfigError, GraphError, ModelError, OversizeError, RetryExhausted, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    code = 0
    if isinstance(result, tuple):
        result, code = result
    _emit(result, s["out"])
    return code


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Exit codes: 0 success / positive verdict, 1 domain verdict or hypothesis
failure, 2 input error. --seed overrides the scenario's seed; both default
to 0. --trials likewise overrides the scenario's trial count (default 100).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import engine, scenario
from ._kernels import BACKEND
from .errors import ConfigInvalid, DomainError, NotRobust, ResilientObserverError
from .graphs import (
    build_medag,
    is_strongly_r_robust,
    parse_edge_list,
    strong_robustness_residual,
)


def _parse_nodes(text: str):
    try:
        out = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise SystemExit(2) from None
    return out


def _load_graph(path: str):
    p = Path(path)
    if not p.is_file():
        bundled = scenario.bundled_path(path)
        if bundled is not None:
            p = bundled
        else:
            print(f"error: graph file {path!r} not found", file=sys.stderr)
            raise SystemExit(2)
    try:
        return parse_edge_list(p.read_text(encoding="utf-8"))
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(2) from None


def _load_config(path: str):
    import yaml

    p = Path(path)
    if not p.is_file():
        bundled = scenario.bundled_path(path)
        if bundled is None:
            print(f"error: scenario {path!r} not found "
                  f"(bundled: {', '.join(scenario.bundled_scenarios())})", file=sys.stderr)
            raise SystemExit(2)
        p = bundled
    try:
        return scenario.load_scenario(p)
    except (scenario.ScenarioError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(2) from None


def cmd_check_robust(args) -> int:
    g = _load_graph(args.graph)
    sources = _parse_nodes(args.sources)
    try:
        robust = is_strongly_r_robust(g, sources, args.r)
    except ResilientObserverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if robust:
        print(f"strongly {args.r}-robust w.r.t. {sorted(sources)}: YES")
        return 0
    witness = strong_robustness_residual(g, sources, args.r)
    print(f"strongly {args.r}-robust w.r.t. {sorted(sources)}: NO")
    print(f"witness (stuck residual set): {sorted(witness)}")
    return 1


def cmd_build_medag(args) -> int:
    g = _load_graph(args.graph)
    sources = _parse_nodes(args.sources)
    try:
        medag = build_medag(g, sources, args.f, mode=args.mode)
    except NotRobust as exc:
        print(f"not strongly {2 * args.f + 1}-robust; residual {sorted(exc.residual)}")
        return 1
    except ResilientObserverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    doc = {
        "mode": medag.mode,
        "f": medag.f,
        "min_indegree": medag.min_indegree,
        "sources": sorted(medag.sources),
        "levels": [sorted(lvl) for lvl in medag.levels],
        "neighbors": {str(i): sorted(nbrs) for i, nbrs in sorted(medag.neighbors.items())},
    }
    text = json.dumps(doc, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        print(text)
    return 0


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    try:
        trace = engine.run_simulation(cfg)
    except ConfigInvalid as exc:
        print(f"config invalid: {exc}", file=sys.stderr)
        return 1
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_path = out_dir / f"{cfg.name}_trace.csv"
    trace_path.write_bytes(trace.to_csv_bytes())
    sidecar = {
        "scenario": cfg.name,
        "config_digest": scenario.config_digest(cfg),
        "backend": BACKEND,
        **trace.summary(),
    }
    side_path = out_dir / f"{cfg.name}_run.json"
    side_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {trace_path} and {side_path}")
    print(f"final max state error: {trace.final_max_state_error():.3e}")
    return 0


def cmd_mss_margin(args) -> int:
    try:
        if args.sweep:
            m_values = _parse_nodes(args.m_list)
            p_grid = np.arange(args.p_from, args.p_to + 1e-12, args.p_step)
            table = engine.sweep_mss_margin(args.rho, args.f, m_values, p_grid)
            lines = ["p," + ",".join(f"m={m}" for m in m_values)]
            for ri, p in enumerate(p_grid):
                row = ",".join(repr(float(v)) for v in table[ri])
                lines.append(f"{float(p)!r},{row}")
            text = "\n".join(lines) + "\n"
            if args.out:
                Path(args.out).write_text(text, encoding="utf-8")
                print(f"wrote {args.out}")
            else:
                sys.stdout.write(text)
            return 0
        value = args.rho ** 2 * engine.pbar(args.p, args.m, args.f)
        ok = engine.mss_criterion(args.rho, engine.pbar(args.p, args.m, args.f))
        print(f"rho^2*pbar = {value:.6g} -> {'SATISFIED' if ok else 'VIOLATED'}")
        return 0 if ok else 1
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def cmd_montecarlo(args) -> int:
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    trials = args.trials if args.trials is not None else cfg.trials
    try:
        report = engine.monte_carlo_mss(cfg, trials)
    except ConfigInvalid as exc:
        print(f"config invalid: {exc}", file=sys.stderr)
        return 1
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{cfg.name}_mss.csv"
    csv_path.write_bytes(report.to_csv_bytes())
    sidecar = {
        "scenario": cfg.name,
        "config_digest": scenario.config_digest(cfg),
        "backend": BACKEND,
        **report.summary(),
    }
    json_path = out_dir / f"{cfg.name}_mss.json"
    json_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {csv_path} and {json_path}")
    print(f"rho^2*pbar = {report.criterion_product:.6g} "
          f"({'SATISFIED' if report.criterion_ok else 'VIOLATED'})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="resilient-observer",
        description="Attack-resilient distributed state estimation simulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-robust", help="certify strong r-robustness of a graph")
    p.add_argument("graph", help="edge-list file ('j i' per line, 1-indexed)")
    p.add_argument("--sources", required=True, help="comma-separated source nodes")
    p.add_argument("--r", type=int, required=True)
    p.set_defaults(fn=cmd_check_robust)

    p = sub.add_parser("build-medag", help="construct the per-mode information-flow DAG")
    p.add_argument("graph")
    p.add_argument("--sources", required=True)
    p.add_argument("--f", type=int, required=True)
    p.add_argument("--mode", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_build_medag)

    p = sub.add_parser("simulate", help="run one scenario and write trace CSV + JSON sidecar")
    p.add_argument("--config", required=True, help="scenario file or bundled name")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="./out")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("mss-margin", help="effective drop probability and MSS criterion")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--f", type=int, required=True)
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--p", type=float, default=0.1)
    p.add_argument("--sweep", action="store_true")
    p.add_argument("--m-list", default="3,4,5,6")
    p.add_argument("--p-from", type=float, default=0.0)
    p.add_argument("--p-to", type=float, default=1.0)
    p.add_argument("--p-step", type=float, default=0.01)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_mss_margin)

    p = sub.add_parser("montecarlo", help="Monte Carlo mean-square error across trials")
    p.add_argument("--config", required=True)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="./out")
    p.set_defaults(fn=cmd_montecarlo)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())

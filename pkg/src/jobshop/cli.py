"""Command line front end: solve, gen, bench, score."""

from __future__ import annotations

import argparse
import json
import os
import sys

from .bench import (BenchError, read_results_csv, run_benchmark,
                    score_complete)
from .generator import GeneratorSpec, generate_instance
from .instance import ParseError, parse_instance_file, write_instance
from .search import SearchConfig, solve


def _cmd_solve(args) -> int:
    try:
        inst = parse_instance_file(args.file)
    except (OSError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    cfg = SearchConfig(time_limit_s=args.time_limit, workers=args.workers,
                       seed=args.seed, mode=args.mode)
    inc, stats = solve(inst, cfg)
    if args.json:
        payload = {
            "instance": inst.name,
            "makespan": None if inc.best is None else inc.best.makespan,
            "bound": inc.bound,
            "proven": inc.proven,
            "wall_time_s": round(stats.wall_time_s, 3),
            "time_to_best_s": (None if stats.time_to_best_s is None
                               else round(stats.time_to_best_s, 3)),
            "nodes": stats.nodes,
            "fails": stats.fails,
            "lns_iterations": stats.lns_iterations,
            "starts": (None if inc.best is None
                       else [list(r) for r in inc.best.starts]),
        }
        print(json.dumps(payload))
    else:
        if inc.best is None:
            print(f"{inst.name}: no solution within {args.time_limit:g}s "
                  f"(bound {inc.bound})")
        else:
            tag = "proven optimal" if inc.proven else f"bound {inc.bound}"
            print(f"{inst.name}: makespan {inc.best.makespan} ({tag}) "
                  f"in {stats.wall_time_s:.2f}s")
        print(f"  nodes {stats.nodes}  fails {stats.fails}  "
              f"lns {stats.lns_iterations}"
              + ("" if stats.time_to_best_s is None
                 else f"  time-to-best {stats.time_to_best_s:.2f}s"))
    return 0


def _cmd_gen(args) -> int:
    try:
        spec = GeneratorSpec(flavor=args.flavor, num_machines=args.machines,
                             num_ops=args.ops, seed=args.seed,
                             optimum=args.optimum, min_dur=args.min_dur,
                             max_dur=args.max_dur)
        inst, cert = generate_instance(spec)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    os.makedirs(args.out, exist_ok=True)
    jss = os.path.join(args.out, f"{spec.name}.jss")
    with open(jss, "w") as fh:
        fh.write(f"# {spec.name}: optimum {spec.optimum} by construction\n")
        fh.write("# recirculation: "
                 + ("yes" if inst.has_recirculation() else "no") + "\n")
        fh.write(write_instance(inst))
    cert_path = os.path.join(args.out, f"{spec.name}.cert.json")
    with open(cert_path, "w") as fh:
        fh.write(json.dumps({
            "instance": spec.name,
            "lower_bound": cert.lower_bound,
            "machine_loads": list(cert.machine_loads),
            "solution": json.loads(cert.solution.to_json()),
        }))
    print(jss)
    print(cert_path)
    return 0


def _cmd_bench(args) -> int:
    try:
        results = run_benchmark(args.manifest, args.out,
                                preset_name=args.preset,
                                log=lambda msg: print(msg, flush=True))
    except BenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"{len(results)} runs -> {os.path.join(args.out, 'results.csv')}")
    return 0


def _cmd_score(args) -> int:
    rows = []
    for path in args.results:
        try:
            rows.extend(read_results_csv(path))
        except (OSError, KeyError, ValueError) as exc:
            print(f"error: cannot read {path}: {exc}", file=sys.stderr)
            return 2
    totals = score_complete(rows)
    if args.json:
        print(json.dumps(totals))
    else:
        for name in sorted(totals, key=lambda c: -totals[c]):
            print(f"{name}: {totals[name]:.2f}")
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="jobshop",
        description="Job-shop scheduling solver and benchmark tools")
    sub = ap.add_subparsers(dest="cmd", required=True)

    sp = sub.add_parser("solve", help="solve one instance file")
    sp.add_argument("file")
    sp.add_argument("--time-limit", type=float, default=60.0,
                    metavar="S", help="wall clock budget in seconds")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--mode", choices=("exact", "lns", "auto"),
                    default="auto")
    sp.add_argument("--json", action="store_true",
                    help="machine-readable result on stdout")
    sp.set_defaults(fn=_cmd_solve)

    gp = sub.add_parser("gen", help="generate a known-optimum instance")
    gp.add_argument("--flavor", choices=("long", "short"), required=True)
    gp.add_argument("--machines", type=int, required=True)
    gp.add_argument("--ops", type=int, required=True)
    gp.add_argument("--seed", type=int, required=True)
    gp.add_argument("--out", required=True, metavar="DIR")
    gp.add_argument("--optimum", type=int, default=600_000)
    gp.add_argument("--min-dur", type=int, default=10)
    gp.add_argument("--max-dur", type=int, default=1_000)
    gp.set_defaults(fn=_cmd_gen)

    bp = sub.add_parser("bench", help="run a benchmark manifest")
    bp.add_argument("manifest")
    bp.add_argument("--out", required=True, metavar="DIR")
    bp.add_argument("--preset", choices=("classic", "large"))
    bp.set_defaults(fn=_cmd_bench)

    cp = sub.add_parser("score", help="score result CSVs pairwise")
    cp.add_argument("results", nargs="+", metavar="CSV")
    cp.add_argument("--json", action="store_true")
    cp.set_defaults(fn=_cmd_score)

    args = ap.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())

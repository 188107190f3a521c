#!/usr/bin/env python3
"""Compare the compiled and pure-python kernel backends.

Runs the same fixed-budget searches in two subprocesses, one with
JOBSHOP_NUMBA=1 and one with JOBSHOP_NUMBA=0, and reports wall times plus
a bit-exactness check on the search counters (both backends must visit the
identical tree).

Usage: python benchmarks/compare_backends.py [--nodes N] [--seed S]
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import jobshop
from jobshop.engine import FlatProblem, mix_seed
from jobshop.search import _Tree

nodes, seed, names = json.loads(sys.stdin.read())
out = {"backend": jobshop.backend_name(), "runs": {}}
for name in names:
    inst = jobshop.load_classic(name)
    flat = FlatProblem(inst)
    tree = _Tree(flat, 0)
    tree.reset(cap=flat.horizon, seed=mix_seed(seed))
    t0 = time.perf_counter()
    tree.run_chunk(nodes)
    dt = time.perf_counter() - t0
    out["runs"][name] = {
        "secs": dt,
        "nodes": tree.nodes,
        "fails": tree.fails,
        "best": tree.best_makespan,
    }
print(json.dumps(out))
"""


def run_backend(numba_on: bool, nodes: int, seed: int, names: list[str]) -> dict:
    env = dict(os.environ)
    env["JOBSHOP_NUMBA"] = "1" if numba_on else "0"
    proc = subprocess.run(
        [sys.executable, "-c", WORKER],
        input=json.dumps([nodes, seed, names]),
        capture_output=True, text=True, env=env, check=False)
    if proc.returncode != 0:
        sys.stderr.write(proc.stderr)
        raise SystemExit(f"backend run failed (JOBSHOP_NUMBA={env['JOBSHOP_NUMBA']})")
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    ap.add_argument("--nodes", type=int, default=50000,
                    help="node budget per instance (default 50000)")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--instances", nargs="*",
                    default=["ft06", "la01", "la06", "ft10"])
    args = ap.parse_args()

    fast = run_backend(True, args.nodes, args.seed, args.instances)
    slow = run_backend(False, args.nodes, args.seed, args.instances)
    print(f"budget: {args.nodes} nodes per instance, seed {args.seed}")
    print(f"{'instance':<10} {fast['backend']:>12} {slow['backend']:>12} "
          f"{'speedup':>8}  counters")
    mismatch = False
    for name in args.instances:
        a = fast["runs"][name]
        b = slow["runs"][name]
        same = (a["nodes"] == b["nodes"] and a["fails"] == b["fails"]
                and a["best"] == b["best"])
        mismatch |= not same
        ratio = b["secs"] / a["secs"] if a["secs"] > 0 else float("inf")
        print(f"{name:<10} {a['secs']:>11.3f}s {b['secs']:>11.3f}s "
              f"{ratio:>7.1f}x  {'identical' if same else 'MISMATCH'}")
    if mismatch:
        print("backend counter mismatch: the two backends diverged")
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

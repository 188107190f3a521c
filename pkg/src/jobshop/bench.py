"""Benchmark harness: brute-force oracle, pairwise scoring, batch runner.

The oracle enumerates per-machine orders and times each combination with a
longest-path pass, so it is exact and independent of the solver engine; a
size guard keeps it to toy instances.  The runner executes a manifest of
instances x configs, writes one CSV row per run, and renders a results table
(makespan, with the solving time in parentheses when optimality was proven).
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from dataclasses import dataclass
from itertools import permutations, product

from .engine import FlatProblem
from .instance import (Instance, Solution, lower_bound, parse_instance_file,
                       validate_solution)
from .search import PRESET_LIMITS, SearchConfig, preset, solve

ORACLE_MAX_OPS = 10
ORACLE_MAX_PERMS = 1_000_000


class InstanceTooLarge(ValueError):
    """Oracle guard tripped; the enumeration would be astronomically big."""


class BenchError(ValueError):
    """Bad manifest or unreadable input; the CLI exits nonzero on this."""


def _perm_space(flat: FlatProblem) -> float:
    space = 1.0
    for m in range(flat.nm):
        k = int(flat.mach_ptr[m + 1] - flat.mach_ptr[m])
        space *= math.factorial(k)
    return space


def _earliest_schedule(flat: FlatProblem, orders):
    """Earliest starts for fixed machine orders via longest path.

    Returns (makespan, starts) or None when the combined precedence +
    order graph has a cycle (the combination is infeasible).
    """
    n = flat.n
    succ: list[list[int]] = [[] for _ in range(n)]
    indeg = [0] * n
    for j in range(flat.nj):
        for i in range(int(flat.job_ptr[j]) + 1, int(flat.job_ptr[j + 1])):
            succ[i - 1].append(i)
            indeg[i] += 1
    for order in orders:
        for a, b in zip(order, order[1:]):
            succ[a].append(b)
            indeg[b] += 1
    start = [0] * n
    queue = [i for i in range(n) if indeg[i] == 0]
    seen = 0
    while queue:
        i = queue.pop()
        seen += 1
        e = start[i] + int(flat.dur[i])
        for s in succ[i]:
            if e > start[s]:
                start[s] = e
            indeg[s] -= 1
            if indeg[s] == 0:
                queue.append(s)
    if seen != n:
        return None
    msp = max(start[i] + int(flat.dur[i]) for i in range(n))
    return msp, start


def brute_force_optimum(inst: Instance) -> tuple[int, Solution]:
    """Exact optimum by enumerating all per-machine orders.

    Raises InstanceTooLarge beyond the guard (more than ORACLE_MAX_OPS ops
    and more than ORACLE_MAX_PERMS order combinations).
    """
    flat = FlatProblem(inst)
    if flat.n > ORACLE_MAX_OPS and _perm_space(flat) > ORACLE_MAX_PERMS:
        raise InstanceTooLarge(
            f"{flat.n} ops, ~{_perm_space(flat):.3g} order combinations")
    groups = []
    for m in range(flat.nm):
        ops = [int(o) for o in
               flat.mach_ops[flat.mach_ptr[m]:flat.mach_ptr[m + 1]]]
        groups.append(list(permutations(ops)))
    best = None
    for combo in product(*groups):
        timed = _earliest_schedule(flat, combo)
        if timed is None:
            continue
        if best is None or timed[0] < best[0]:
            best = timed
    assert best is not None, "a valid instance always has a schedule"
    import numpy as np
    starts = np.asarray(best[1], dtype=np.int64)
    sol = Solution(inst.name, best[0], flat.starts_to_rows(starts))
    return best[0], sol


def single_machine_ranges(durs, ests, lcts):
    """Feasible start ranges on one machine under per-op windows.

    Enumerates all orders; returns (lo, hi) where lo[i]/hi[i] are the
    smallest/largest start of op i over every feasible order, or None when
    no order fits the windows.  Oracle for the disjunctive propagator: a
    sound filter keeps [est, lst] containing [lo, hi] and must not fail.
    """
    k = len(durs)
    lo = [None] * k
    hi = [None] * k
    feasible = False
    for order in permutations(range(k)):
        starts = [0] * k
        t = 0
        ok = True
        for i in order:
            s = max(ests[i], t)
            if s + durs[i] > lcts[i]:
                ok = False
                break
            starts[i] = s
            t = s + durs[i]
        if not ok:
            continue
        feasible = True
        nxt = None
        late = [0] * k
        for i in reversed(order):
            l = lcts[i] - durs[i]
            if nxt is not None and nxt - durs[i] < l:
                l = nxt - durs[i]
            late[i] = l
            nxt = l
        for i in range(k):
            if lo[i] is None or starts[i] < lo[i]:
                lo[i] = starts[i]
            if hi[i] is None or late[i] > hi[i]:
                hi[i] = late[i]
    if not feasible:
        return None
    return lo, hi


@dataclass
class RunResult:
    """One CSV row of the harness."""
    instance: str
    config: str
    makespan: int | None
    proven: bool
    wall_time_s: float
    time_to_best_s: float | None
    valid: bool

    def has_solution(self) -> bool:
        return self.makespan is not None and self.valid


CSV_FIELDS = ["instance", "config", "makespan", "proven", "wall_time_s",
              "time_to_best_s", "valid"]


def result_to_row(r: RunResult) -> list[str]:
    return [
        r.instance,
        r.config,
        "" if r.makespan is None else str(r.makespan),
        "true" if r.proven else "false",
        f"{r.wall_time_s:.3f}",
        "" if r.time_to_best_s is None else f"{r.time_to_best_s:.3f}",
        "true" if r.valid else "false",
    ]


def row_to_result(row: dict) -> RunResult:
    return RunResult(
        instance=row["instance"],
        config=row["config"],
        makespan=int(row["makespan"]) if row["makespan"] != "" else None,
        proven=row["proven"] == "true",
        wall_time_s=float(row["wall_time_s"]),
        time_to_best_s=(float(row["time_to_best_s"])
                        if row["time_to_best_s"] != "" else None),
        valid=row["valid"] == "true",
    )


def write_results_csv(path: str, results: list[RunResult]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_FIELDS)
        for r in results:
            w.writerow(result_to_row(r))


def read_results_csv(path: str) -> list[RunResult]:
    with open(path, newline="") as fh:
        return [row_to_result(row) for row in csv.DictReader(fh)]


def score_pair(a: RunResult, b: RunResult) -> tuple[float, float]:
    """Score one instance between two configs.

    Strictly better makespan (or being the only one with a valid solution)
    takes the full point.  Equal makespans split it by time-to-best: a gets
    tb/(ta+tb) (0.5 each when both are instant).  No valid solution on
    either side scores nothing for anybody.
    """
    ah, bh = a.has_solution(), b.has_solution()
    if not ah and not bh:
        return 0.0, 0.0
    if ah and not bh:
        return 1.0, 0.0
    if bh and not ah:
        return 0.0, 1.0
    if a.makespan < b.makespan:
        return 1.0, 0.0
    if b.makespan < a.makespan:
        return 0.0, 1.0
    ta = a.time_to_best_s or 0.0
    tb = b.time_to_best_s or 0.0
    if ta + tb <= 0.0:
        return 0.5, 0.5
    return tb / (ta + tb), ta / (ta + tb)


def score_complete(results: list[RunResult]) -> dict[str, float]:
    """Total score per config over all instances and config pairs."""
    configs = sorted({r.config for r in results})
    by_key = {}
    for r in results:
        by_key.setdefault((r.instance, r.config), r)
    totals = {c: 0.0 for c in configs}
    instances = sorted({r.instance for r in results})
    for inst in instances:
        for i, ca in enumerate(configs):
            for cb in configs[i + 1:]:
                ra = by_key.get((inst, ca))
                rb = by_key.get((inst, cb))
                if ra is None or rb is None:
                    continue
                sa, sb = score_pair(ra, rb)
                totals[ca] += sa
                totals[cb] += sb
    return totals


def render_table(results: list[RunResult]) -> str:
    """Grid of makespans per instance x config; proven runs carry the
    solving time in parentheses, missing solutions show as 'No Solution'."""
    configs = sorted({r.config for r in results})
    instances = []
    for r in results:
        if r.instance not in instances:
            instances.append(r.instance)
    cells = {}
    for r in results:
        if r.makespan is None or not r.valid:
            text = "No Solution"
        elif r.proven:
            text = f"{r.makespan} ({r.wall_time_s:.1f}s)"
        else:
            text = str(r.makespan)
        cells[(r.instance, r.config)] = text
    widths = [max(len("instance"), *(len(i) for i in instances))]
    for c in configs:
        widths.append(max(len(c), *(len(cells.get((i, c), "-"))
                                    for i in instances)))
    out = io.StringIO()
    head = ["instance"] + configs
    out.write("  ".join(h.ljust(w) for h, w in zip(head, widths)) + "\n")
    for i in instances:
        row = [i] + [cells.get((i, c), "-") for c in configs]
        out.write("  ".join(v.ljust(w) for v, w in zip(row, widths)) + "\n")
    return out.getvalue()


_CFG_KEYS = {"time_limit_s", "workers", "seed", "mode", "lns_fail_limit",
             "relax_fraction", "not_first_not_last", "edge_finding"}


def _manifest_configs(manifest: dict, preset_name: str | None):
    raw = manifest.get("configs")
    if not raw:
        name = preset_name or "classic"
        cfg = preset(name)
        return [(f"{name}-{cfg.digest()}", cfg)]
    out = []
    for entry in raw:
        if not isinstance(entry, dict):
            raise BenchError(f"config entry must be an object: {entry!r}")
        entry = dict(entry)
        name = entry.pop("name", None)
        unknown = set(entry) - _CFG_KEYS
        if unknown:
            raise BenchError(f"unknown config keys: {sorted(unknown)}")
        if "time_limit_s" not in entry:
            if preset_name is None:
                raise BenchError(
                    "config without time_limit_s and no --preset given")
            entry["time_limit_s"] = PRESET_LIMITS[preset_name]
        try:
            cfg = SearchConfig(**entry)
        except (TypeError, ValueError) as exc:
            raise BenchError(f"bad config {name or entry}: {exc}") from exc
        out.append((name or cfg.digest(), cfg))
    if len(set(n for n, _ in out)) != len(out):
        raise BenchError("duplicate config names in manifest")
    return out


def run_benchmark(manifest, out_dir: str,
                  preset_name: str | None = None,
                  log=None) -> list[RunResult]:
    """Run every instance x config of the manifest, writing results under
    out_dir (results.csv incrementally, table.txt at the end).

    manifest: path to a JSON file or an equivalent dict with keys
    "instances" (paths, relative to the manifest file) and optional
    "configs" (SearchConfig fields plus "name").  Solver misses are data
    (recorded rows); only I/O and manifest problems raise BenchError.
    """
    base = "."
    if isinstance(manifest, str):
        base = os.path.dirname(os.path.abspath(manifest))
        try:
            with open(manifest) as fh:
                manifest = json.load(fh)
        except OSError as exc:
            raise BenchError(f"cannot read manifest: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise BenchError(f"manifest is not valid JSON: {exc}") from exc
    if not isinstance(manifest, dict) or "instances" not in manifest:
        raise BenchError('manifest needs an "instances" list')
    if preset_name is not None and preset_name not in ("classic", "large"):
        raise BenchError(f"unknown preset {preset_name!r}")
    paths = []
    for entry in manifest["instances"]:
        if not isinstance(entry, str):
            raise BenchError(f"instance entry must be a path: {entry!r}")
        p = entry if os.path.isabs(entry) else os.path.join(base, entry)
        if not os.path.exists(p):
            raise BenchError(f"instance file not found: {p}")
        paths.append(p)
    configs = _manifest_configs(manifest, preset_name)
    os.makedirs(out_dir, exist_ok=True)
    results: list[RunResult] = []
    csv_path = os.path.join(out_dir, "results.csv")
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_FIELDS)
        fh.flush()
        for path in paths:
            try:
                inst = parse_instance_file(path)
            except (OSError, ValueError) as exc:
                raise BenchError(f"cannot load {path}: {exc}") from exc
            for cname, cfg in configs:
                t0 = time.perf_counter()
                inc, stats = solve(inst, cfg)
                wall = time.perf_counter() - t0
                if inc.best is None:
                    rr = RunResult(inst.name, cname, None, False, wall,
                                   None, False)
                else:
                    ok = validate_solution(inst, inc.best).ok
                    rr = RunResult(inst.name, cname, inc.best.makespan,
                                   inc.proven and ok, wall,
                                   stats.time_to_best_s, ok)
                results.append(rr)
                w.writerow(result_to_row(rr))
                fh.flush()
                if log is not None:
                    log(f"{rr.instance} {rr.config}: "
                        f"{'-' if rr.makespan is None else rr.makespan}"
                        f"{' proven' if rr.proven else ''} "
                        f"[{rr.wall_time_s:.1f}s]")
    with open(os.path.join(out_dir, "table.txt"), "w") as fh:
        fh.write(render_table(results))
    return results


def _load_data(name: str) -> dict:
    here = os.path.dirname(__file__)
    with open(os.path.join(here, "data", name)) as fh:
        return json.load(fh)


def classic_optima() -> dict:
    """Published classic-benchmark results: per instance the best known or
    proven-optimal makespan of the reference runs."""
    return _load_data("classic_optima.json")


def large_scale_reference() -> list[dict]:
    """Reference results for the generated large-scale families."""
    return _load_data("large_scale_results.json")["rows"]


def published_optimum(name: str) -> int | None:
    table = classic_optima()
    row = table.get(name)
    if row is None or not row.get("proven", False):
        return None
    return int(row["best"])

"""Instance generator with a known optimal makespan by construction.

Each machine gets a gap-free tiling of [0, optimum): cut points split the
interval into as many segments as the machine's op quota, so every machine
load equals the optimum exactly and the trivial lower bound meets it.  The
tiles are then threaded into jobs (chains) such that chain order respects
tile start times, which makes the tiling itself a feasible schedule: it is
returned as the optimality certificate.

Two flavors shape the chains.  "long" always extends the chain whose last op
ended latest but no later than the tile's start, producing few long jobs.
"short" opens a fresh chain with probability short_new_prob and also retires
chains at ceil(2 * num_ops / num_machines) ops, producing many short jobs.
"""

from __future__ import annotations

import math
from bisect import bisect_right, insort
from dataclasses import dataclass

import numpy as np

from .instance import (Instance, Solution, ValidationResult, lower_bound,
                       make_instance, validate_solution)


class GeneratorError(ValueError):
    """Infeasible or malformed generator spec, reported before generation."""


@dataclass(frozen=True)
class GeneratorSpec:
    flavor: str                   # "long" | "short"
    num_machines: int
    num_ops: int
    seed: int
    optimum: int = 600_000
    min_dur: int = 10
    max_dur: int = 1_000
    short_new_prob: float = 0.5

    def __post_init__(self):
        if self.flavor not in ("long", "short"):
            raise GeneratorError(f"unknown flavor {self.flavor!r}")
        if self.num_machines < 1:
            raise GeneratorError("need at least one machine")
        if self.num_ops < self.num_machines:
            raise GeneratorError("num_ops must be >= num_machines")
        if not (1 <= self.min_dur <= self.max_dur):
            raise GeneratorError("need 1 <= min_dur <= max_dur")
        if self.optimum < self.max_dur:
            raise GeneratorError("optimum must be >= max_dur")
        if not (0.0 <= self.short_new_prob <= 1.0):
            raise GeneratorError("short_new_prob must be in [0, 1]")

    @property
    def name(self) -> str:
        return (f"{self.flavor}-{self.num_machines}-{self.num_ops}"
                f"-{self.seed}")


@dataclass(frozen=True)
class Certificate:
    """Feasible schedule achieving the lower bound, hence optimal."""
    solution: Solution
    lower_bound: int
    machine_loads: tuple[int, ...]


def _quotas(spec: GeneratorSpec, rng) -> list[int]:
    m = spec.num_machines
    base, rem = divmod(spec.num_ops, m)
    quota = [base] * m
    for i in rng.choice(m, size=rem, replace=False):
        quota[i] += 1
    # jitter: shift single ops between random machines, keeping each >= 1
    # and each feasible against the optimum
    max_q = spec.optimum // spec.min_dur
    for _ in range(m // 2):
        i = int(rng.integers(m))
        j = int(rng.integers(m))
        if i != j and quota[i] > 1 and quota[j] < max_q:
            quota[i] -= 1
            quota[j] += 1
    for q in quota:
        if q * spec.min_dur > spec.optimum:
            raise GeneratorError(
                f"machine quota {q} x min_dur {spec.min_dur} exceeds "
                f"optimum {spec.optimum}")
    return quota


def _machine_tiles(spec: GeneratorSpec, q: int, rng) -> list[tuple[int, int]]:
    """Cut [0, optimum) into q segments; durations stay in
    [min_dur, max_dur] unless the target sum forces the cap up."""
    t = spec.optimum
    lo_d = spec.min_dur
    hi_d = max(spec.max_dur, -(-t // q))      # raise the cap when q*max < t
    raw = rng.integers(lo_d, hi_d + 1, size=q).astype(np.int64)
    cum = np.cumsum(raw)
    total = int(cum[-1])
    tiles = []
    prev = 0
    for k in range(q - 1):
        c = int(round(t * int(cum[k]) / total))
        rest = q - 1 - k                      # segments still to cut
        lo = max(prev + lo_d, t - rest * hi_d)
        hi = min(prev + hi_d, t - rest * lo_d)
        assert lo <= hi, "cut window collapsed"
        c = min(max(c, lo), hi)
        tiles.append((prev, c - prev))
        prev = c
    tiles.append((prev, t - prev))
    return tiles


def generate_instance(spec: GeneratorSpec) -> tuple[Instance, Certificate]:
    """Build the instance and its optimality certificate.

    Deterministic in the spec (seed included); the certificate's schedule is
    the tiling itself, its makespan and every machine load equal
    spec.optimum, so lower_bound == optimum proves optimality.
    """
    rng = np.random.default_rng(spec.seed)
    quota = _quotas(spec, rng)
    segments = []                             # (start, machine, dur)
    for m in range(spec.num_machines):
        for start, dur in _machine_tiles(spec, quota[m], rng):
            segments.append((start, m, dur))
    segments.sort()
    chain_cap = math.ceil(2 * spec.num_ops / spec.num_machines)
    chains: list[list[tuple[int, int, int]]] = []
    avail: list[tuple[int, int]] = []         # sorted (ready_time, chain id)
    for start, m, dur in segments:
        hi = bisect_right(avail, (start, 1 << 62))
        attach = hi > 0
        if spec.flavor == "short" and attach:
            attach = rng.random() >= spec.short_new_prob
        if attach:
            ready, cid = avail.pop(hi - 1)
            chains[cid].append((start, m, dur))
        else:
            cid = len(chains)
            chains.append([(start, m, dur)])
        retire = (spec.flavor == "short"
                  and len(chains[cid]) >= chain_cap)
        if not retire:
            insort(avail, (start + dur, cid))
    rows = [[(m, d) for _, m, d in chain] for chain in chains]
    starts = tuple(tuple(s for s, _, _ in chain) for chain in chains)
    inst = make_instance(rows, num_machines=spec.num_machines,
                         name=spec.name)
    sol = Solution(instance=spec.name, makespan=spec.optimum, starts=starts)
    loads = tuple(inst.machine_load(m) for m in range(spec.num_machines))
    cert = Certificate(solution=sol, lower_bound=lower_bound(inst),
                       machine_loads=loads)
    return inst, cert


def validate_certificate(inst: Instance, cert: Certificate) -> ValidationResult:
    """Check the certificate end to end: the schedule is feasible, and its
    makespan meets the proven lower bound (hence it is optimal)."""
    verdict = validate_solution(inst, cert.solution)
    if not verdict.ok:
        return verdict
    lb = lower_bound(inst)
    if cert.lower_bound != lb:
        return ValidationResult(False, "bound",
                                f"certificate bound {cert.lower_bound}, "
                                f"instance bound {lb}")
    if cert.solution.makespan != lb:
        return ValidationResult(False, "gap",
                                f"makespan {cert.solution.makespan} does not "
                                f"meet bound {lb}")
    return ValidationResult(True)

"""Branch-and-bound search, LNS, and the solve() entry points.

Strategy: set-times branching (left: fix start at est; right: postpone until
propagation raises that est) with the disjunctive engine at every node and a
cap on all end times that tightens to makespan - 1 whenever an incumbent is
found, so exhausting the tree proves optimality.  Reaching the trivial lower
bound (max machine load / max job length) also closes the run.

Modes: "exact" is pure tree search.  "lns" dives for a first incumbent and
then does large-neighborhood search only.  "auto" starts exact and, once
improvement stalls, alternates LNS bursts with bursts on the persistent exact
tree so the proof can still complete.

The kernels never see a clock: the driver runs them in fixed node-budget
chunks and checks deadlines, shared incumbents and stop flags in between.
Single-worker runs with the same seed are bit-reproducible (makespan, node
and fail counts).
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels as K
from .engine import DomainStore, FlatProblem, mix_seed
from .instance import Instance, Solution, lower_bound, validate_solution

CHUNK_NODES = 4096          # kernel nodes between clock/incumbent checks
TRIGGER_NODES = 5000        # stalled-exact threshold before LNS kicks in
LNS_BURST = 30              # LNS iterations per alternation slot
EXACT_BURST = 30000         # exact-tree nodes per alternation slot

PRESET_LIMITS = {"classic": 1200.0, "large": 21600.0}


@dataclass
class SearchConfig:
    time_limit_s: float
    workers: int = 1
    seed: int = 0
    mode: str = "auto"                 # "exact" | "lns" | "auto"
    lns_fail_limit: int = 200
    relax_fraction: float = 0.2
    not_first_not_last: bool = False
    edge_finding: bool = False

    def __post_init__(self):
        if self.mode not in ("exact", "lns", "auto"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.time_limit_s <= 0:
            raise ValueError("time_limit_s must be positive")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if not (0.0 <= self.relax_fraction <= 1.0):
            raise ValueError("relax_fraction must be in [0, 1]")

    def flags(self) -> int:
        f = 0
        if self.not_first_not_last:
            f |= K.FLAG_NFNL
        if self.edge_finding:
            f |= K.FLAG_EF
        return f

    def digest(self) -> str:
        s = f"{self.mode}-w{self.workers}-s{self.seed}-t{self.time_limit_s:g}"
        if self.not_first_not_last:
            s += "-nfnl"
        if self.edge_finding:
            s += "-ef"
        return s


def preset(name: str, **overrides) -> SearchConfig:
    """Named protocol configs: 'classic' (1200 s) and 'large' (21600 s)."""
    if name not in PRESET_LIMITS:
        raise ValueError(f"unknown preset {name!r}")
    cfg = SearchConfig(time_limit_s=PRESET_LIMITS[name])
    return replace(cfg, **overrides) if overrides else cfg


@dataclass
class Incumbent:
    best: Solution | None
    bound: int
    proven: bool


@dataclass
class SearchStats:
    nodes: int = 0
    fails: int = 0
    lns_iterations: int = 0
    wall_time_s: float = 0.0
    time_to_best_s: float | None = None
    trace: list[tuple[float, int]] = field(default_factory=list)


@dataclass(frozen=True)
class Decision:
    """Next op to branch on (flat index plus its job/position)."""
    op: int
    job: int
    pos: int


def branch_set_times(store: DomainStore, rng: int | None = None):
    """Select the branching op: unscheduled, not postponed, minimal
    (est, lct, machine index), seeded coin on full ties.

    Returns a Decision, or None when no op can be branched on; distinguish
    "all scheduled" from a postponement dead end via store.all_scheduled().
    """
    if rng is not None:
        store.regs[K.R_RNG] = mix_seed(rng)
    sel = K.select_op(store.flat.as_tuple(), store._state(), store.regs)
    if sel < 0:
        return None
    return Decision(op=int(sel), job=int(store.flat.op_job[sel]),
                    pos=int(store.flat.op_pos[sel]))


def lns_relax(inst_or_flat, sol: Solution, relax_fraction: float, rng):
    """Pick the frozen set for one LNS iteration.

    Returns a bool mask over flat op indices; True = keep the incumbent
    start.  Three neighborhoods with equal probability: a random op subset,
    ops intersecting a random time window, and all ops of a random machine
    subset.  relax_fraction 0 freezes everything, 1 frees everything; in
    between roughly relax_fraction * n ops are freed.
    """
    flat = inst_or_flat if isinstance(inst_or_flat, FlatProblem) \
        else FlatProblem(inst_or_flat)
    n = flat.n
    starts = np.empty(n, dtype=np.int64)
    for j, row in enumerate(sol.starts):
        s = int(flat.job_ptr[j])
        starts[s:s + len(row)] = row
    frozen = np.ones(n, dtype=bool)
    if relax_fraction <= 0.0:
        return frozen
    if relax_fraction >= 1.0:
        frozen[:] = False
        return frozen
    kind = int(rng.integers(3))
    if kind == 0:
        target = min(n, max(1, int(round(relax_fraction * n))))
        frozen[rng.choice(n, size=target, replace=False)] = False
    elif kind == 1:
        msp = sol.makespan
        w = max(1, int(round(relax_fraction * msp)))
        t0 = int(rng.integers(0, msp - w + 1)) if msp > w else 0
        hit = (starts < t0 + w) & (starts + flat.dur > t0)
        frozen[hit] = False
    else:
        kcnt = min(flat.nm, max(1, int(round(relax_fraction * flat.nm))))
        machines = rng.choice(flat.nm, size=kcnt, replace=False)
        frozen[np.isin(flat.mach, machines)] = False
    return frozen


class _Tree:
    """One resumable search tree (exact run or LNS sub-problem).

    Owns the kernel state arrays.  reset() reinitializes for a root (with an
    optional frozen partial assignment); run_chunk() advances the kernel and
    transparently handles trail/stack growth, which restarts the tree
    deterministically while keeping cumulative node/fail counters.
    """

    def __init__(self, flat: FlatProblem, flags: int, order_flag: int = 0):
        self.flat = flat
        self.flags = flags
        self.order_flag = order_flag
        n = flat.n
        self.est = np.zeros(n, dtype=np.int64)
        self.lct = np.zeros(n, dtype=np.int64)
        self.postponed_at = np.zeros(n, dtype=np.int64)
        self.scheduled = np.zeros(n, dtype=np.uint8)
        self.jdirty = np.zeros(flat.nj, dtype=np.uint8)
        self.mdirty = np.zeros(flat.nm, dtype=np.uint8)
        tcap = max(8192, 64 * n)
        self.tr_idx = np.zeros(tcap, dtype=np.int32)
        self.tr_kind = np.zeros(tcap, dtype=np.uint8)
        self.tr_val = np.zeros(tcap, dtype=np.int64)
        dcap = max(1024, 8 * n)
        self.dec_op = np.zeros(dcap, dtype=np.int32)
        self.dec_state = np.zeros(dcap, dtype=np.uint8)
        self.dec_mark = np.zeros(dcap, dtype=np.int64)
        self.regs = np.zeros(K.N_REGS, dtype=np.int64)
        self.out_starts = np.zeros(n, dtype=np.int64)
        self.scratch = flat.alloc_scratch()
        self.lost_nodes = 0
        self.lost_fails = 0
        self._reset_args = None

    def reset(self, cap: int, seed: int, frozen_starts=None, frozen_mask=None,
              randomized: bool = False):
        self._reset_args = (cap, seed,
                            None if frozen_starts is None
                            else frozen_starts.copy(),
                            None if frozen_mask is None
                            else frozen_mask.copy(),
                            randomized)
        self._do_reset()

    def _do_reset(self):
        cap, seed, fstarts, fmask, randomized = self._reset_args
        flat = self.flat
        self.est[:] = 0
        self.lct[:] = flat.horizon
        self.postponed_at[:] = -1
        self.scheduled[:] = 0
        if fmask is not None:
            idx = np.nonzero(fmask)[0]
            self.est[idx] = fstarts[idx]
            self.lct[idx] = fstarts[idx] + flat.dur[idx]
            self.scheduled[idx] = 1
        self.jdirty[:] = 1
        self.mdirty[:] = 1
        self.regs[:] = 0
        self.regs[K.R_CAP] = cap
        self.regs[K.R_BEST] = K.POS_INF
        self.regs[K.R_RNG] = mix_seed(seed)
        self.regs[K.R_PHASE] = K.PH_EXPAND
        self.regs[K.R_SELMODE] = 1 if randomized else 0

    def _grow(self):
        def dbl(a):
            out = np.zeros(2 * a.shape[0], dtype=a.dtype)
            out[:a.shape[0]] = a
            return out
        self.tr_idx = dbl(self.tr_idx)
        self.tr_kind = dbl(self.tr_kind)
        self.tr_val = dbl(self.tr_val)
        self.dec_op = dbl(self.dec_op)
        self.dec_state = dbl(self.dec_state)
        self.dec_mark = dbl(self.dec_mark)

    def run_chunk(self, node_budget: int, fail_stop: int = -1) -> int:
        while True:
            rc = K.dfs_run(
                self.flat.as_tuple(),
                (self.est, self.lct, self.postponed_at, self.scheduled,
                 self.jdirty, self.mdirty),
                (self.tr_idx, self.tr_kind, self.tr_val),
                self.scratch, self.regs,
                self.dec_op, self.dec_state, self.dec_mark, self.out_starts,
                node_budget, fail_stop, self.flags, self.order_flag)
            if rc != K.RC_GROW:
                return rc
            # out of trail or stack: grow and deterministically restart,
            # keeping the tighter cap and the cumulative counters
            self.lost_nodes += int(self.regs[K.R_NODES])
            self.lost_fails += int(self.regs[K.R_FAILS])
            cap = int(self.regs[K.R_CAP])
            self._grow()
            self._do_reset()
            self.regs[K.R_CAP] = cap

    @property
    def nodes(self) -> int:
        return self.lost_nodes + int(self.regs[K.R_NODES])

    @property
    def fails(self) -> int:
        return self.lost_fails + int(self.regs[K.R_FAILS])

    @property
    def best_makespan(self) -> int | None:
        b = int(self.regs[K.R_BEST])
        return None if b >= K.POS_INF else b

    def stall_nodes(self) -> int:
        return int(self.regs[K.R_NODES] - self.regs[K.R_NODES_AT_BEST])

    def sync_cap(self, best: int | None):
        if best is not None and best - 1 < self.regs[K.R_CAP]:
            self.regs[K.R_CAP] = best - 1


class _Box:
    """Shared incumbent across workers: strictly improving publishes only."""

    def __init__(self, inst: Instance, flat: FlatProblem, lb: int, t0: float):
        self.inst = inst
        self.flat = flat
        self.lb = lb
        self.t0 = t0
        self.lock = threading.Lock()
        self.best_msp: int | None = None
        self.best_starts: np.ndarray | None = None
        self.bound = lb
        self.proven = False
        self.trace: list[tuple[float, int]] = []
        self.time_to_best: float | None = None
        self.stop = threading.Event()

    def peek(self) -> int | None:
        return self.best_msp

    def get_best(self):
        with self.lock:
            if self.best_msp is None:
                return None
            return self.best_msp, self.best_starts.copy()

    def publish(self, msp: int, starts: np.ndarray) -> bool:
        now = time.perf_counter()
        with self.lock:
            if self.best_msp is not None and msp >= self.best_msp:
                return False
            sol = Solution(self.inst.name, msp,
                           self.flat.starts_to_rows(starts))
            verdict = validate_solution(self.inst, sol)
            if not verdict.ok:       # defensive: kernels only emit valid ones
                raise AssertionError(f"invalid incumbent: {verdict.detail}")
            self.best_msp = msp
            self.best_starts = starts.copy()
            self.trace.append((now - self.t0, msp))
            self.time_to_best = now - self.t0
            if msp <= self.lb:
                self.bound = msp
                self.proven = True
                self.stop.set()
            return True

    def prove(self):
        with self.lock:
            if self.best_msp is not None:
                self.bound = self.best_msp
                self.proven = True
            self.stop.set()

    def solution(self) -> Solution | None:
        with self.lock:
            if self.best_msp is None:
                return None
            return Solution(self.inst.name, self.best_msp,
                            self.flat.starts_to_rows(self.best_starts))


class _Worker:
    def __init__(self, widx: int, cfg: SearchConfig, box: _Box,
                 deadline: float):
        self.widx = widx
        self.cfg = cfg
        self.box = box
        self.deadline = deadline
        flat = box.flat
        self.exact = _Tree(flat, cfg.flags())
        self.sub = _Tree(flat, cfg.flags())
        self.exact.reset(cap=flat.horizon, seed=mix_seed(cfg.seed, widx, 1))
        self.exact.sync_cap(box.peek())
        # workers diversify by seed and relax fraction; worker 0 keeps the
        # configured fraction so single-worker behavior is the plain config
        mult = (1.0, 0.6, 1.5, 2.0)[widx % 4]
        self.relax = min(0.95, max(0.02, cfg.relax_fraction * mult))
        self.nprng = np.random.default_rng((cfg.seed, widx, 0xA5))
        self.iter_count = 0
        self.lns_iterations = 0
        self.sub_nodes = 0
        self.sub_fails = 0
        # stagnation ladder: widen the neighborhood and spend more fails per
        # re-optimization the longer nothing improves; reset on improvement.
        # small/cheap neighborhoods whiff on loose instances (a pinned
        # remainder is rigid), so the top rung has to reach well past half
        # the ops with a few thousand fails of effort.
        self.level = 0
        self.since_improve = 0
        self.last_seen_best: int | None = None

    def out_of_time(self) -> bool:
        return time.perf_counter() >= self.deadline or self.box.stop.is_set()

    def _publish_from(self, tree: _Tree) -> None:
        b = tree.best_makespan
        if b is not None and (self.box.peek() is None
                              or b < self.box.peek()):
            self.box.publish(b, tree.out_starts)

    def _exact_chunk(self) -> int:
        self.exact.sync_cap(self.box.peek())
        rc = self.exact.run_chunk(CHUNK_NODES)
        self._publish_from(self.exact)
        if rc == K.RC_EXHAUSTED:
            self.box.prove()
        return rc

    LEVEL_FRAC = (1.0, 2.0, 3.0, 4.0)
    LEVEL_FAILS = (1, 3, 10, 25)
    LEVEL_PATIENCE = 25

    def _lns_iteration(self) -> None:
        got = self.box.get_best()
        if got is None:
            return
        base_msp, base_starts = got
        if self.last_seen_best is None or base_msp < self.last_seen_best:
            self.last_seen_best = base_msp
            self.level = 0
            self.since_improve = 0
        self.iter_count += 1
        frac = min(0.8, max(0.05, self.relax * self.LEVEL_FRAC[self.level]))
        frozen = lns_relax(self.box.flat,
                           Solution(self.box.inst.name, base_msp,
                                    self.box.flat.starts_to_rows(base_starts)),
                           frac, self.nprng)
        self.sub.lost_nodes = 0
        self.sub.lost_fails = 0
        self.sub.reset(cap=base_msp,
                       seed=mix_seed(self.cfg.seed, self.widx, 2,
                                     self.iter_count),
                       frozen_starts=base_starts, frozen_mask=frozen,
                       randomized=True)
        limit = self.cfg.lns_fail_limit
        fail_stop = limit * self.LEVEL_FAILS[self.level] if limit > 0 else -1
        while True:
            rc = self.sub.run_chunk(CHUNK_NODES, fail_stop=fail_stop)
            if rc == K.RC_EXHAUSTED or self.out_of_time():
                break
            if fail_stop >= 0 and int(self.sub.regs[K.R_FAILS]) >= fail_stop:
                break
        self.sub_nodes += self.sub.nodes
        self.sub_fails += self.sub.fails
        self.lns_iterations += 1
        b = self.sub.best_makespan
        if b is not None and b < base_msp:
            self._publish_from(self.sub)
            self.last_seen_best = min(b, self.last_seen_best or b)
            self.level = 0
            self.since_improve = 0
        else:
            self.since_improve += 1
            if (self.since_improve >= self.LEVEL_PATIENCE
                    and self.level < len(self.LEVEL_FRAC) - 1):
                self.level += 1
                self.since_improve = 0

    def run(self) -> None:
        cfg = self.cfg
        in_exact_phase = True
        while not self.out_of_time():
            if cfg.mode == "exact" or in_exact_phase:
                rc = self._exact_chunk()
                if rc == K.RC_EXHAUSTED:
                    return
                if cfg.mode == "lns":
                    if self.box.peek() is not None:
                        in_exact_phase = False
                elif cfg.mode == "auto":
                    if (self.box.peek() is not None
                            and self.exact.stall_nodes() >= TRIGGER_NODES):
                        in_exact_phase = False
                continue
            # LNS burst
            for _ in range(LNS_BURST):
                if self.out_of_time():
                    return
                self._lns_iteration()
            if cfg.mode == "auto":
                # a slice of the persistent exact tree keeps proofs reachable
                start = self.exact.nodes
                while (self.exact.nodes - start < EXACT_BURST
                       and not self.out_of_time()):
                    rc = self._exact_chunk()
                    if rc == K.RC_EXHAUSTED:
                        return

    def totals(self) -> tuple[int, int]:
        return (self.exact.nodes + self.sub_nodes,
                self.exact.fails + self.sub_fails)


def solve(inst: Instance, cfg: SearchConfig) -> tuple[Incumbent, SearchStats]:
    """Minimize makespan under cfg; returns the incumbent and run stats.

    The incumbent's bound is the best proven lower bound (the trivial bound
    until a proof lands); proven means best.makespan == bound via exhaustion
    or bound equality.
    """
    t0 = time.perf_counter()
    flat = FlatProblem(inst)
    lb = lower_bound(inst)
    box = _Box(inst, flat, lb, t0)
    deadline = t0 + cfg.time_limit_s
    workers = [_Worker(w, cfg, box, deadline) for w in range(cfg.workers)]
    if cfg.workers == 1:
        workers[0].run()
    else:
        threads = [threading.Thread(target=w.run, daemon=True)
                   for w in workers]
        for th in threads:
            th.start()
        for th in threads:
            th.join()
    wall = time.perf_counter() - t0
    nodes = sum(w.totals()[0] for w in workers)
    fails = sum(w.totals()[1] for w in workers)
    stats = SearchStats(
        nodes=nodes, fails=fails,
        lns_iterations=sum(w.lns_iterations for w in workers),
        wall_time_s=wall, time_to_best_s=box.time_to_best,
        trace=list(box.trace))
    inc = Incumbent(best=box.solution(), bound=box.bound, proven=box.proven)
    return inc, stats


def solve_exact(inst: Instance,
                cfg: SearchConfig) -> tuple[Incumbent, SearchStats]:
    """solve() restricted to pure tree search (complete, proof-capable)."""
    if cfg.mode != "exact":
        cfg = replace(cfg, mode="exact")
    return solve(inst, cfg)

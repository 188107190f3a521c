"""Domain store over flat arrays: interval bounds, trailing, propagation.

The store keeps est and lct per operation (int64); lst and ect are derived
(lst = lct - len, ect = est + len), so the coupling end = start + len can
never be violated by construction.  All mutation goes through trailed
setters; save()/restore() rewind bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels as K
from .instance import Instance

_MASK64 = (1 << 64) - 1


def mix_seed(*parts: int) -> int:
    """Deterministically fold integers into a nonzero 63-bit rng seed."""
    x = 0x9E3779B97F4A7C15
    for p in parts:
        x = (x ^ (p & _MASK64)) * 0xBF58476D1CE4E5B9 & _MASK64
        x ^= x >> 31
        x = x * 0x94D049BB133111EB & _MASK64
        x ^= x >> 29
    x &= K.MASK63
    if x == 0:
        x = 0x9E3779B97F4A7C15 & K.MASK63
    return x


@dataclass(frozen=True)
class IntervalVar:
    """Snapshot of one operation's bounds."""
    est: int
    lst: int
    ect: int
    lct: int
    length: int


@dataclass(frozen=True)
class MachinePosting:
    """A machine and the flat indices of the operations posted on it."""
    machine: int
    ops: tuple[int, ...]


class FlatProblem:
    """Instance flattened to arrays.

    Operations are numbered job by job in chain order; job_ptr is the CSR
    index of the chains, mach_ptr/mach_ops group the same operations by
    machine.
    """

    def __init__(self, inst: Instance):
        self.inst = inst
        self.nj = inst.num_jobs
        self.nm = inst.num_machines
        n = inst.num_ops
        self.n = n
        self.dur = np.empty(n, dtype=np.int64)
        self.mach = np.empty(n, dtype=np.int32)
        self.op_job = np.empty(n, dtype=np.int32)
        self.op_pos = np.empty(n, dtype=np.int32)
        self.job_ptr = np.zeros(self.nj + 1, dtype=np.int32)
        i = 0
        for j, job in enumerate(inst.jobs):
            for k, op in enumerate(job.ops):
                self.dur[i] = op.duration
                self.mach[i] = op.machine
                self.op_job[i] = j
                self.op_pos[i] = k
                i += 1
            self.job_ptr[j + 1] = i
        counts = np.bincount(self.mach, minlength=self.nm)
        self.mach_ptr = np.zeros(self.nm + 1, dtype=np.int32)
        self.mach_ptr[1:] = np.cumsum(counts)
        self.mach_ops = np.empty(n, dtype=np.int32)
        fill = self.mach_ptr[:-1].copy()
        for i in range(n):
            m = self.mach[i]
            self.mach_ops[fill[m]] = i
            fill[m] += 1
        self.horizon = int(self.dur.sum())
        self.max_mach_ops = int(counts.max()) if n else 1

    def as_tuple(self):
        return (self.dur, self.mach, self.op_job, self.job_ptr,
                self.mach_ptr, self.mach_ops)

    def op_index(self, j: int, k: int) -> int:
        return int(self.job_ptr[j]) + k

    def starts_to_rows(self, starts: np.ndarray) -> tuple[tuple[int, ...], ...]:
        rows = []
        for j in range(self.nj):
            s, e = int(self.job_ptr[j]), int(self.job_ptr[j + 1])
            rows.append(tuple(int(v) for v in starts[s:e]))
        return tuple(rows)

    def alloc_scratch(self):
        mk = max(1, self.max_mach_ops)
        cap = 1
        while cap < mk:
            cap <<= 1
        i64 = lambda m: np.zeros(m, dtype=np.int64)
        i32 = lambda m: np.zeros(m, dtype=np.int32)
        return (i64(mk), i64(mk), i64(mk), i64(mk), i64(mk), i64(mk),
                i64(mk), i64(mk), i32(mk), i32(mk), i32(mk), i32(mk),
                i64(2 * cap), i64(2 * cap))


class DomainStore:
    """Mutable bound store for one instance, with a trail for backtracking.

    flags enables the optional disjunctive rules (kernels.FLAG_NFNL,
    kernels.FLAG_EF).  cap limits every end time (defaults to the horizon,
    the sum of all durations, which is always feasible).
    """

    def __init__(self, flat: FlatProblem, horizon: int | None = None,
                 cap: int | None = None, flags: int = 0, seed: int = 0):
        self.flat = flat
        n = flat.n
        h = flat.horizon if horizon is None else int(horizon)
        self.horizon = h
        self.est = np.zeros(n, dtype=np.int64)
        self.lct = np.full(n, h, dtype=np.int64)
        self.postponed_at = np.full(n, -1, dtype=np.int64)
        self.scheduled = np.zeros(n, dtype=np.uint8)
        self.jdirty = np.ones(flat.nj, dtype=np.uint8)
        self.mdirty = np.ones(flat.nm, dtype=np.uint8)
        tcap = max(4096, 32 * n)
        self.tr_idx = np.zeros(tcap, dtype=np.int32)
        self.tr_kind = np.zeros(tcap, dtype=np.uint8)
        self.tr_val = np.zeros(tcap, dtype=np.int64)
        self.regs = np.zeros(K.N_REGS, dtype=np.int64)
        self.regs[K.R_CAP] = h if cap is None else int(cap)
        self.regs[K.R_BEST] = K.POS_INF
        self.regs[K.R_RNG] = mix_seed(seed)
        self.scratch = flat.alloc_scratch()
        self.flags = flags
        self.failed = False

    @classmethod
    def from_instance(cls, inst: Instance, horizon: int | None = None,
                      **kw) -> "DomainStore":
        return cls(FlatProblem(inst), horizon=horizon, **kw)

    # --- tuple views for the kernels ---
    def _state(self):
        return (self.est, self.lct, self.postponed_at, self.scheduled,
                self.jdirty, self.mdirty)

    def _trail(self):
        return (self.tr_idx, self.tr_kind, self.tr_val)

    def _grow_trail(self):
        cap = 2 * self.tr_idx.shape[0]
        self.tr_idx = np.resize(self.tr_idx, cap)
        self.tr_kind = np.resize(self.tr_kind, cap)
        self.tr_val = np.resize(self.tr_val, cap)

    # --- bound accessors (flat op index) ---
    def interval_op(self, i: int) -> IntervalVar:
        d = int(self.flat.dur[i])
        est = int(self.est[i])
        lct = int(self.lct[i])
        return IntervalVar(est=est, lst=lct - d, ect=est + d, lct=lct,
                           length=d)

    def interval(self, j: int, k: int) -> IntervalVar:
        return self.interval_op(self.flat.op_index(j, k))

    def machine_posting(self, m: int) -> MachinePosting:
        f = self.flat
        ops = f.mach_ops[f.mach_ptr[m]:f.mach_ptr[m + 1]]
        return MachinePosting(machine=m, ops=tuple(int(o) for o in ops))

    # --- trailed mutation ---
    def _apply(self, fn, *args) -> bool:
        """Run a kernel returning RC codes; grow the trail on RC_OVERFLOW."""
        while True:
            rc = fn(*args)
            if rc == K.RC_OVERFLOW:
                self._grow_trail()
                continue
            if rc == K.RC_FAIL:
                self.failed = True
                return False
            return True

    def tighten_est(self, i: int, v: int) -> bool:
        return self._apply(lambda: K.set_est(
            self.flat.as_tuple(), self._state(), self._trail(), self.regs,
            i, v))

    def tighten_lct(self, i: int, v: int) -> bool:
        return self._apply(lambda: K.set_lct(
            self.flat.as_tuple(), self._state(), self._trail(), self.regs,
            i, v))

    def save(self) -> int:
        return int(self.regs[K.R_TLEN])

    def restore(self, mark: int) -> None:
        K.restore_to(self._state(), self._trail(), self.regs, mark)
        self.failed = False

    # --- propagation ---
    def propagate_precedence(self, j: int) -> bool:
        return self._apply(lambda: K.prop_chain(
            self.flat.as_tuple(), self._state(), self._trail(), self.regs, j))

    def propagate_disjunctive(self, m) -> bool:
        if isinstance(m, MachinePosting):
            m = m.machine
        return self._apply(lambda: K.prop_machine(
            self.flat.as_tuple(), self._state(), self._trail(), self.scratch,
            self.regs, m, self.flags))

    def fixpoint(self, reverse: bool = False) -> bool:
        return self._apply(lambda: K.fixpoint(
            self.flat.as_tuple(), self._state(), self._trail(), self.scratch,
            self.regs, self.flags, 1 if reverse else 0))

    def all_scheduled(self) -> bool:
        return bool(self.scheduled.all())

    def bounds_snapshot(self) -> tuple[np.ndarray, np.ndarray]:
        return self.est.copy(), self.lct.copy()


def fixpoint(store: DomainStore, reverse: bool = False) -> bool:
    """Propagate chains and machines to a global fixpoint; False on wipeout."""
    return store.fixpoint(reverse=reverse)


def propagate_precedence(store: DomainStore, job: int) -> bool:
    """Chain passes for one job; False on wipeout."""
    return store.propagate_precedence(job)


def propagate_disjunctive(store: DomainStore, posting) -> bool:
    """Disjunctive passes for one machine (index or MachinePosting)."""
    return store.propagate_disjunctive(posting)

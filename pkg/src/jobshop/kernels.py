"""Hot kernels: bound propagation and depth-first search over flat arrays.

Everything here operates on plain numpy arrays so the same source runs either
numba-compiled or interpreted (see accel).  All times are int64; half-open
intervals.  Per operation the store keeps est (earliest start) and lct (latest
completion); the other two bounds are derived (ect = est + dur, lst = lct -
dur).

State is grouped into tuples passed positionally:

  prob    = (dur, mach, op_job, job_ptr, mach_ptr, mach_ops)   static arrays
  state   = (est, lct, postponed_at, scheduled, jdirty, mdirty)
  trail   = (tr_idx, tr_kind, tr_val)                          undo log
  scratch = 14 preallocated work arrays for the machine passes
  regs    = int64 register file (see R_* slots)

Trailing: every bound write appends (op, kind, old value); restore_to rewinds
to a mark bit-exactly.  kinds: 0 = est, 1 = lct, 2 = postponed_at.

The search kernel is resumable: it runs a fixed node budget, saves its phase
in the registers and returns, so the Python driver can check the wall clock
and shared incumbents between chunks without touching determinism.
"""

import numpy as np

from .accel import kernel

NEG_INF = -(1 << 62)
POS_INF = 1 << 62
MASK63 = (1 << 63) - 1

# register slots
R_TLEN = 0          # trail length
R_DEPTH = 1         # decision stack depth
R_NODES = 2         # nodes expanded (fixpoint calls in search)
R_FAILS = 3         # propagation failures + dead ends
R_SOLS = 4          # solutions recorded
R_RNG = 5           # xorshift state (63-bit, nonzero)
R_CAP = 6           # max allowed end time (inclusive)
R_BEST = 7          # best makespan found by this run, POS_INF if none
R_PHASE = 8         # resumable search phase
R_NODES_AT_BEST = 9
R_SELMODE = 10      # 0 = lexicographic branching, 1 = randomized (LNS dives)
N_REGS = 16

# trail kinds
TK_EST = 0
TK_LCT = 1
TK_POST = 2

# propagation return codes (negative = abnormal)
RC_FAIL = -1
RC_OVERFLOW = -2

# search phases
PH_EXPAND = 0
PH_BACKTRACK = 1
PH_DONE = 2

# search return codes
RC_BUDGET = 0
RC_EXHAUSTED = 1
RC_GROW = 2

# selection sentinels
SEL_ALL_SCHEDULED = -1
SEL_DEAD_END = -2

# optional-rule flags
FLAG_NFNL = 1
FLAG_EF = 2


@kernel
def rng_next(regs):
    """Advance the 63-bit xorshift in R_RNG and return the new value."""
    x = regs[R_RNG]
    x = (x ^ (x << 13)) & MASK63
    x = x ^ (x >> 7)
    x = (x ^ (x << 17)) & MASK63
    if x == 0:
        x = 88172645463325252 & MASK63
    regs[R_RNG] = x
    return x


@kernel
def set_est(prob, state, trail, regs, op, v):
    """Raise est[op] to v (trailed).  1 changed, 0 no-op, RC_* on trouble."""
    dur = prob[0]
    est = state[0]
    lct = state[1]
    if v <= est[op]:
        return 0
    tr_idx, tr_kind, tr_val = trail
    tl = regs[R_TLEN]
    if tl >= tr_idx.shape[0]:
        return RC_OVERFLOW
    tr_idx[tl] = op
    tr_kind[tl] = TK_EST
    tr_val[tl] = est[op]
    regs[R_TLEN] = tl + 1
    est[op] = v
    state[4][prob[2][op]] = 1     # jdirty[op_job[op]]
    state[5][prob[1][op]] = 1     # mdirty[mach[op]]
    if v + dur[op] > lct[op]:
        return RC_FAIL
    return 1


@kernel
def set_lct(prob, state, trail, regs, op, v):
    """Lower lct[op] to v (trailed).  Same return codes as set_est."""
    dur = prob[0]
    est = state[0]
    lct = state[1]
    if v >= lct[op]:
        return 0
    tr_idx, tr_kind, tr_val = trail
    tl = regs[R_TLEN]
    if tl >= tr_idx.shape[0]:
        return RC_OVERFLOW
    tr_idx[tl] = op
    tr_kind[tl] = TK_LCT
    tr_val[tl] = lct[op]
    regs[R_TLEN] = tl + 1
    lct[op] = v
    state[4][prob[2][op]] = 1
    state[5][prob[1][op]] = 1
    if est[op] + dur[op] > v:
        return RC_FAIL
    return 1


@kernel
def set_postponed(state, trail, regs, op, v):
    tr_idx, tr_kind, tr_val = trail
    tl = regs[R_TLEN]
    if tl >= tr_idx.shape[0]:
        return RC_OVERFLOW
    tr_idx[tl] = op
    tr_kind[tl] = TK_POST
    tr_val[tl] = state[2][op]
    regs[R_TLEN] = tl + 1
    state[2][op] = v
    return 1


@kernel
def restore_to(state, trail, regs, mark):
    """Rewind the trail to mark, restoring bounds bit-exactly."""
    est = state[0]
    lct = state[1]
    postponed_at = state[2]
    tr_idx, tr_kind, tr_val = trail
    tl = regs[R_TLEN]
    while tl > mark:
        tl -= 1
        i = tr_idx[tl]
        k = tr_kind[tl]
        if k == TK_EST:
            est[i] = tr_val[tl]
        elif k == TK_LCT:
            lct[i] = tr_val[tl]
        else:
            postponed_at[i] = tr_val[tl]
    regs[R_TLEN] = tl


@kernel
def sort_idx(key, ordv, k):
    """Stable argsort of key[:k] into ordv[:k]."""
    if k <= 32:
        for i in range(k):
            ordv[i] = i
        for i in range(1, k):
            v = ordv[i]
            kv = key[v]
            j = i - 1
            while j >= 0 and key[ordv[j]] > kv:
                ordv[j + 1] = ordv[j]
                j -= 1
            ordv[j + 1] = v
    else:
        tmp = np.argsort(key[:k], kind='mergesort')
        for i in range(k):
            ordv[i] = tmp[i]


@kernel
def theta_reset(tsum, tect, size2):
    for i in range(size2):
        tsum[i] = 0
        tect[i] = NEG_INF


@kernel
def theta_set(tsum, tect, cap, leaf, d, e):
    """Write a leaf (d=0, e=NEG_INF removes it) and fix ancestors.

    cap is the leaf-row width (power of two); leaves live at cap..2*cap-1,
    node 1 is the root: sum = total duration, ect = earliest completion of
    the whole set scheduled on one machine.
    """
    i = cap + leaf
    tsum[i] = d
    tect[i] = e
    i >>= 1
    while i >= 1:
        l = 2 * i
        r = 2 * i + 1
        tsum[i] = tsum[l] + tsum[r]
        v = tect[l] + tsum[r]
        if tect[r] > v:
            v = tect[r]
        tect[i] = v
        i >>= 1


@kernel
def overload_pass(le, ll, ld, k, ord_a, ord_b, key, pos, tsum, tect):
    """Theta-tree overload check: some est/lct window cannot hold its work.

    Returns 0 when consistent, RC_FAIL when an overloaded set exists.
    """
    for t in range(k):
        key[t] = le[t]
    sort_idx(key, ord_a, k)
    for r in range(k):
        pos[ord_a[r]] = r
    for t in range(k):
        key[t] = ll[t]
    sort_idx(key, ord_b, k)
    cap = 1
    while cap < k:
        cap <<= 1
    theta_reset(tsum, tect, 2 * cap)
    for r in range(k):
        t = ord_b[r]
        theta_set(tsum, tect, cap, pos[t], ld[t], le[t] + ld[t])
        if tect[1] > ll[t]:
            return RC_FAIL
    return 0


@kernel
def dp_pass(le, ll, ld, k, ord_a, ord_b, ord_c, key, pos, tsum, tect, upd):
    """Detectable precedences, est side.

    q must precede j whenever lst(q) < ect(j) (running j first would overrun
    q's window).  Sweeping j by ascending ect while inserting q by ascending
    lst keeps the tree equal to j's detected-predecessor set; then
    est(j) >= ECT(preds \\ {j}).  Updates are collected into upd (init by the
    caller to the current le) and applied after the pass.
    """
    for t in range(k):
        key[t] = le[t] + ld[t]
    sort_idx(key, ord_a, k)              # by ect
    for t in range(k):
        key[t] = ll[t] - ld[t]
    sort_idx(key, ord_b, k)              # by lst
    for t in range(k):
        key[t] = le[t]
    sort_idx(key, ord_c, k)              # by est: tree leaf order
    for r in range(k):
        pos[ord_c[r]] = r
    cap = 1
    while cap < k:
        cap <<= 1
    theta_reset(tsum, tect, 2 * cap)
    qi = 0
    for r in range(k):
        j = ord_a[r]
        ectj = le[j] + ld[j]
        while qi < k:
            q = ord_b[qi]
            if ll[q] - ld[q] < ectj:
                theta_set(tsum, tect, cap, pos[q], ld[q], le[q] + ld[q])
                qi += 1
            else:
                break
        if tsum[cap + pos[j]] > 0:
            theta_set(tsum, tect, cap, pos[j], 0, NEG_INF)
            if tect[1] > upd[j]:
                upd[j] = tect[1]
            theta_set(tsum, tect, cap, pos[j], ld[j], le[j] + ld[j])
        else:
            if tect[1] > upd[j]:
                upd[j] = tect[1]


@kernel
def nf_pass(le, ll, ld, k, ord_b, key, upd):
    """Not-first, est side (quadratic).

    For prefix sets O of the lct order: if est(j) + dur(j) + work(O) exceeds
    lct(O), j cannot run before all of O, so est(j) >= min ect(O).
    """
    for t in range(k):
        key[t] = ll[t]
    sort_idx(key, ord_b, k)
    for j in range(k):
        ej = le[j] + ld[j]
        work = 0
        minect = POS_INF
        for r in range(k):
            t = ord_b[r]
            if t == j:
                continue
            work += ld[t]
            e = le[t] + ld[t]
            if e < minect:
                minect = e
            if ej + work > ll[t]:
                if minect > upd[j]:
                    upd[j] = minect
    return 0


@kernel
def ef_pass(le, ll, ld, k, ord_a, ord_b, key, pos, tsum, tect, upd):
    """Edge finding over lct-prefix sets, est side (quadratic).

    For O = all ops with lct <= some bound: if even starting the whole of
    O u {j} at its earliest cannot fit before lct(O), then j runs after all
    of O and est(j) >= ECT(O).  Restricting O to lct prefixes keeps this a
    cheap filter; it is sound, not the full edge-finding closure.
    """
    for t in range(k):
        key[t] = le[t]
    sort_idx(key, ord_a, k)
    for r in range(k):
        pos[ord_a[r]] = r
    for t in range(k):
        key[t] = ll[t]
    sort_idx(key, ord_b, k)
    cap = 1
    while cap < k:
        cap <<= 1
    theta_reset(tsum, tect, 2 * cap)
    work = 0
    minest = POS_INF
    for r in range(k):
        t = ord_b[r]
        theta_set(tsum, tect, cap, pos[t], ld[t], le[t] + ld[t])
        work += ld[t]
        if le[t] < minest:
            minest = le[t]
        if r + 1 < k and ll[ord_b[r + 1]] == ll[t]:
            continue                     # evaluate only at full lct groups
        ub = ll[t]
        ect_o = tect[1]
        for j in range(k):
            if ll[j] <= ub:
                continue
            base = le[j] if le[j] < minest else minest
            if base + work + ld[j] > ub:
                if ect_o > upd[j]:
                    upd[j] = ect_o
    return 0


@kernel
def prop_machine(prob, state, trail, scratch, regs, m, flags):
    """Run the disjunctive passes for machine m until they stop changing.

    Both time directions are covered: the lct side reuses the est-side passes
    on mirrored bounds (t -> -t swaps est/lct and reverses precedence).
    Returns 1 if any bound changed, 0 if none, RC_* on failure/overflow.
    """
    dur = prob[0]
    mach_ptr = prob[4]
    mach_ops = prob[5]
    est = state[0]
    lct = state[1]
    (le, ll, ld, me, ml, upd_e, upd_m, key,
     ord_a, ord_b, ord_c, pos, tsum, tect) = scratch
    s = mach_ptr[m]
    k = mach_ptr[m + 1] - s
    if k <= 1:
        return 0
    changed_total = 0
    while True:
        for t in range(k):
            op = mach_ops[s + t]
            le[t] = est[op]
            ll[t] = lct[op]
            ld[t] = dur[op]
        rc = overload_pass(le, ll, ld, k, ord_a, ord_b, key, pos, tsum, tect)
        if rc != 0:
            return rc
        for t in range(k):
            upd_e[t] = le[t]
        dp_pass(le, ll, ld, k, ord_a, ord_b, ord_c, key, pos, tsum, tect,
                upd_e)
        if flags & FLAG_NFNL:
            nf_pass(le, ll, ld, k, ord_b, key, upd_e)
        if flags & FLAG_EF:
            ef_pass(le, ll, ld, k, ord_a, ord_b, key, pos, tsum, tect, upd_e)
        for t in range(k):
            me[t] = -ll[t]
            ml[t] = -le[t]
            upd_m[t] = me[t]
        dp_pass(me, ml, ld, k, ord_a, ord_b, ord_c, key, pos, tsum, tect,
                upd_m)
        if flags & FLAG_NFNL:
            nf_pass(me, ml, ld, k, ord_b, key, upd_m)
        if flags & FLAG_EF:
            ef_pass(me, ml, ld, k, ord_a, ord_b, key, pos, tsum, tect, upd_m)
        changed = 0
        for t in range(k):
            op = mach_ops[s + t]
            rc = set_est(prob, state, trail, regs, op, upd_e[t])
            if rc < 0:
                return rc
            changed |= rc
            rc = set_lct(prob, state, trail, regs, op, -upd_m[t])
            if rc < 0:
                return rc
            changed |= rc
        if changed == 0:
            break
        changed_total = 1
    return changed_total


@kernel
def prop_chain(prob, state, trail, regs, j):
    """Precedence propagation along job j's chain.

    One forward est sweep and one backward lct sweep reach the chain fixpoint
    (the two bound directions do not feed each other inside a chain).
    """
    dur = prob[0]
    job_ptr = prob[3]
    est = state[0]
    lct = state[1]
    s = job_ptr[j]
    e = job_ptr[j + 1]
    changed = 0
    for i in range(s + 1, e):
        rc = set_est(prob, state, trail, regs, i, est[i - 1] + dur[i - 1])
        if rc < 0:
            return rc
        changed |= rc
    for i in range(e - 2, s - 1, -1):
        rc = set_lct(prob, state, trail, regs, i, lct[i + 1] - dur[i + 1])
        if rc < 0:
            return rc
        changed |= rc
    return changed


@kernel
def fixpoint(prob, state, trail, scratch, regs, flags, order_flag):
    """Propagate to a global fixpoint.

    First clamps every lct to the current cap (R_CAP), then sweeps dirty jobs
    and machines until quiet.  order_flag reverses the sweep orders; the
    reached fixpoint must not depend on it (tested).  Returns 0, RC_FAIL or
    RC_OVERFLOW.
    """
    dur = prob[0]
    job_ptr = prob[3]
    mach_ptr = prob[4]
    lct = state[1]
    jdirty = state[4]
    mdirty = state[5]
    n = dur.shape[0]
    nj = job_ptr.shape[0] - 1
    nm = mach_ptr.shape[0] - 1
    cap = regs[R_CAP]
    for i in range(n):
        if lct[i] > cap:
            rc = set_lct(prob, state, trail, regs, i, cap)
            if rc < 0:
                return rc
    while True:
        progressed = False
        for jj in range(nj):
            j = nj - 1 - jj if order_flag != 0 else jj
            if jdirty[j] != 0:
                rc = prop_chain(prob, state, trail, regs, j)
                jdirty[j] = 0
                if rc < 0:
                    return rc
                progressed = True
        for mm in range(nm):
            m = nm - 1 - mm if order_flag != 0 else mm
            if mdirty[m] != 0:
                rc = prop_machine(prob, state, trail, scratch, regs, m, flags)
                mdirty[m] = 0
                if rc < 0:
                    return rc
                progressed = True
        if not progressed:
            return 0


@kernel
def select_op(prob, state, regs):
    """Pick the next op to branch on: unscheduled, not postponed, minimal
    (est, lct, machine); full ties fall to a seeded coin (reservoir pick).

    With regs[R_SELMODE] == 1 the lct/machine tie-break is dropped and the
    pick is uniform over all minimal-est candidates instead.  Restarted LNS
    dives need that extra churn; a deterministic dive rebuilds the incumbent.

    Returns the op index, SEL_ALL_SCHEDULED, or SEL_DEAD_END (unscheduled
    ops exist but every one of them is postponed).
    """
    mach = prob[1]
    est = state[0]
    lct = state[1]
    postponed_at = state[2]
    scheduled = state[3]
    randomized = regs[R_SELMODE] != 0
    n = est.shape[0]
    best = -1
    be = 0
    bl = 0
    bm = 0
    ties = 0
    any_unscheduled = False
    for i in range(n):
        if scheduled[i] != 0:
            continue
        any_unscheduled = True
        if postponed_at[i] == est[i]:
            continue
        ei = est[i]
        li = lct[i]
        mi = mach[i]
        if best < 0:
            best = i
            be = ei
            bl = li
            bm = mi
            ties = 1
            continue
        take = False
        if ei < be:
            take = True
        elif ei == be:
            if randomized:
                ties += 1
                if rng_next(regs) % ties == 0:
                    best = i
                continue
            if li < bl:
                take = True
            elif li == bl:
                if mi < bm:
                    take = True
                elif mi == bm:
                    ties += 1
                    if rng_next(regs) % ties == 0:
                        best = i
                    continue
        if take:
            best = i
            be = ei
            bl = li
            bm = mi
            ties = 1
    if best < 0:
        if any_unscheduled:
            return SEL_DEAD_END
        return SEL_ALL_SCHEDULED
    return best


@kernel
def dfs_run(prob, state, trail, scratch, regs, dec_op, dec_state, dec_mark,
            out_starts, node_budget, fail_stop, flags, order_flag):
    """Resumable branch-and-bound DFS with the set-times strategy.

    Left branch: fix start := est (lct := est + dur).  Right branch: mark the
    op postponed at its current est; it reactivates when propagation raises
    that est.  A node where every unscheduled op is postponed is a dead end.
    Every solution tightens the cap to makespan - 1, so recorded solutions
    are strictly improving.

    Runs until node_budget expansions happen (RC_BUDGET, state saved in the
    registers for seamless resume), accumulated fails reach fail_stop when
    fail_stop >= 0 (RC_BUDGET), the tree is exhausted (RC_EXHAUSTED), or the
    trail/decision stack runs out (RC_GROW: caller grows arrays and restarts
    the search; reruns are deterministic).
    """
    dur = prob[0]
    est = state[0]
    scheduled = state[3]
    n = dur.shape[0]
    nodes_done = 0
    phase = regs[R_PHASE]
    while True:
        if phase == PH_DONE:
            return RC_EXHAUSTED
        if nodes_done >= node_budget:
            regs[R_PHASE] = phase
            return RC_BUDGET
        if fail_stop >= 0 and regs[R_FAILS] >= fail_stop:
            regs[R_PHASE] = phase
            return RC_BUDGET
        if phase == PH_EXPAND:
            nodes_done += 1
            regs[R_NODES] += 1
            rc = fixpoint(prob, state, trail, scratch, regs, flags,
                          order_flag)
            if rc == RC_OVERFLOW:
                return RC_GROW
            if rc == RC_FAIL:
                regs[R_FAILS] += 1
                phase = PH_BACKTRACK
                continue
            sel = select_op(prob, state, regs)
            if sel == SEL_ALL_SCHEDULED:
                msp = 0
                for i in range(n):
                    e = est[i] + dur[i]
                    if e > msp:
                        msp = e
                if msp < regs[R_BEST]:
                    regs[R_BEST] = msp
                    regs[R_NODES_AT_BEST] = regs[R_NODES]
                    regs[R_SOLS] += 1
                    for i in range(n):
                        out_starts[i] = est[i]
                    if msp - 1 < regs[R_CAP]:
                        regs[R_CAP] = msp - 1
                phase = PH_BACKTRACK
                continue
            if sel == SEL_DEAD_END:
                regs[R_FAILS] += 1
                phase = PH_BACKTRACK
                continue
            d = regs[R_DEPTH]
            if d >= dec_op.shape[0]:
                return RC_GROW
            dec_op[d] = sel
            dec_state[d] = 0
            dec_mark[d] = regs[R_TLEN]
            regs[R_DEPTH] = d + 1
            scheduled[sel] = 1
            rc = set_lct(prob, state, trail, regs, sel, est[sel] + dur[sel])
            if rc == RC_OVERFLOW:
                return RC_GROW
            continue
        # PH_BACKTRACK: pop exhausted right branches, then flip a left one
        while True:
            d = regs[R_DEPTH]
            if d == 0:
                regs[R_PHASE] = PH_DONE
                return RC_EXHAUSTED
            if dec_state[d - 1] == 0:
                break
            restore_to(state, trail, regs, dec_mark[d - 1])
            regs[R_DEPTH] = d - 1
        d = regs[R_DEPTH] - 1
        op = dec_op[d]
        restore_to(state, trail, regs, dec_mark[d])
        scheduled[op] = 0
        dec_state[d] = 1
        rc = set_postponed(state, trail, regs, op, est[op])
        if rc == RC_OVERFLOW:
            return RC_GROW
        phase = PH_EXPAND

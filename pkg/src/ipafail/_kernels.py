"""Numba kernels for the hot loops.

All kernels take the CSR arrays of a :class:`~ipafail.tanner.TannerGraph`
and keep no state between calls. Sets travel as int32 rows padded with -1.
"""

import numpy as np
from numba import njit

VERDICT_NONE = 0
VERDICT_T1 = 1
VERDICT_T2 = 2


# --------------------------------------------------------------------------
# interval passing


@njit(cache=True, nogil=True)
def ipa_kernel(chk_ptr, edge_var, edge_chk, edge_val, var_ptr, var_edges,
               y, max_iter, tol, unit, record):
    m = chk_ptr.shape[0] - 1
    n = var_ptr.shape[0] - 1
    ne = edge_var.shape[0]

    lo = np.zeros(n)
    hi = np.empty(n)
    for v in range(n):
        best = np.inf
        for k in range(var_ptr[v], var_ptr[v + 1]):
            e = var_edges[k]
            r = y[edge_chk[e]] if unit else y[edge_chk[e]] / edge_val[e]
            if r < best:
                best = r
        hi[v] = best

    cap = max_iter + 1 if record else 1
    lo_hist = np.empty((cap, n))
    hi_hist = np.empty((cap, n))
    elo_hist = np.empty((cap, ne))
    ehi_hist = np.empty((cap, ne))
    lo_hist[0] = lo
    hi_hist[0] = hi
    elo_hist[0] = np.nan
    ehi_hist[0] = np.nan

    maxdeg = 0
    for c in range(m):
        d = chk_ptr[c + 1] - chk_ptr[c]
        if d > maxdeg:
            maxdeg = d
    pre_hi = np.empty(maxdeg + 1)
    suf_hi = np.empty(maxdeg + 1)
    pre_lo = np.empty(maxdeg + 1)
    suf_lo = np.empty(maxdeg + 1)

    mu_cv = np.empty(ne)
    up_cv = np.empty(ne)
    new_lo = np.empty(n)
    new_hi = np.empty(n)
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        # measurement-to-variable messages
        for c in range(m):
            s = chk_ptr[c]
            d = chk_ptr[c + 1] - s
            pre_hi[0] = 0.0
            pre_lo[0] = 0.0
            for k in range(d):
                e = s + k
                a = 1.0 if unit else edge_val[e]
                pre_hi[k + 1] = pre_hi[k] + a * hi[edge_var[e]]
                pre_lo[k + 1] = pre_lo[k] + a * lo[edge_var[e]]
            suf_hi[d] = 0.0
            suf_lo[d] = 0.0
            for k in range(d - 1, -1, -1):
                e = s + k
                a = 1.0 if unit else edge_val[e]
                suf_hi[k] = suf_hi[k + 1] + a * hi[edge_var[e]]
                suf_lo[k] = suf_lo[k + 1] + a * lo[edge_var[e]]
            for k in range(d):
                e = s + k
                lower = y[c] - (pre_hi[k] + suf_hi[k + 1])
                upper = y[c] - (pre_lo[k] + suf_lo[k + 1])
                if not unit:
                    lower /= edge_val[e]
                    upper /= edge_val[e]
                if lower < 0.0:
                    lower = 0.0
                mu_cv[e] = lower
                up_cv[e] = upper
        # variable-to-measurement messages
        for v in range(n):
            best_lo = -np.inf
            best_hi = np.inf
            for k in range(var_ptr[v], var_ptr[v + 1]):
                e = var_edges[k]
                if mu_cv[e] > best_lo:
                    best_lo = mu_cv[e]
                if up_cv[e] < best_hi:
                    best_hi = up_cv[e]
            # exact runs are monotone with lo <= hi; keep that under rounding so
            # errors cannot feed back through the weight ratios and run away
            if best_lo < lo[v]:
                best_lo = lo[v]
            if best_hi > hi[v]:
                best_hi = hi[v]
            if best_lo > best_hi:
                mid = 0.5 * (best_lo + best_hi)
                mid = min(max(mid, lo[v]), hi[v])
                best_lo = mid
                best_hi = mid
            new_lo[v] = best_lo
            new_hi[v] = best_hi
        done = True
        for v in range(n):
            if abs(new_lo[v] - lo[v]) > tol or abs(new_hi[v] - hi[v]) > tol:
                done = False
            lo[v] = new_lo[v]
            hi[v] = new_hi[v]
        if record:
            lo_hist[it] = lo
            hi_hist[it] = hi
            elo_hist[it] = mu_cv
            ehi_hist[it] = up_cv
        if done:
            converged = True
            break
    if record:
        return lo, hi, it, converged, lo_hist[:it + 1], hi_hist[:it + 1], elo_hist[:it + 1], ehi_hist[:it + 1]
    return lo, hi, it, converged, lo_hist, hi_hist, elo_hist, ehi_hist


# --------------------------------------------------------------------------
# termatiko criterion


@njit(cache=True, nogil=True, inline="always")
def _criterion(tset, k, cnt, in_t, chk_ptr, edge_var, var_ptr, var_adj,
               s_stamp, s_val, c_stamp, stamp):
    """Verdict for ``tset[:k]`` given ``cnt[c] = |N_T(c)|`` and ``in_t``.

    ``stamp`` must be fresh for this call; stamp arrays start at zero.
    """
    all_conn = True
    for i in range(k):
        t = tset[i]
        for kk in range(var_ptr[t], var_ptr[t + 1]):
            c = var_adj[kk]
            if c_stamp[c] == stamp:
                continue
            c_stamp[c] = stamp
            conn = False
            for e in range(chk_ptr[c], chk_ptr[c + 1]):
                v = edge_var[e]
                if in_t[v]:
                    continue
                if s_stamp[v] != stamp:
                    s_stamp[v] = stamp
                    ok = True
                    for k2 in range(var_ptr[v], var_ptr[v + 1]):
                        if cnt[var_adj[k2]] == 0:
                            ok = False
                            break
                    s_val[v] = ok
                if s_val[v]:
                    conn = True
                    break
            if conn:
                continue
            all_conn = False
            if cnt[c] < 2:
                return VERDICT_NONE
            q = 0
            for e in range(chk_ptr[c], chk_ptr[c + 1]):
                v = edge_var[e]
                if not in_t[v]:
                    continue
                good = True
                for k2 in range(var_ptr[v], var_ptr[v + 1]):
                    if cnt[var_adj[k2]] < 2:
                        good = False
                        break
                if good:
                    q += 1
                    if q >= 2:
                        break
            if q < 2:
                return VERDICT_NONE
    if all_conn:
        return VERDICT_T1
    return VERDICT_T2


@njit(cache=True, nogil=True)
def classify_sets(sets, sizes, n, m, chk_ptr, edge_var, var_ptr, var_adj):
    """Verdict code for every row of ``sets`` (row ``i`` holds ``sizes[i]`` nodes)."""
    out = np.zeros(sets.shape[0], dtype=np.int8)
    cnt = np.zeros(m, dtype=np.int64)
    in_t = np.zeros(n, dtype=np.bool_)
    s_stamp = np.zeros(n, dtype=np.int64)
    s_val = np.zeros(n, dtype=np.bool_)
    c_stamp = np.zeros(m, dtype=np.int64)
    tset = np.empty(sets.shape[1] + 1, dtype=np.int64)
    for r in range(sets.shape[0]):
        k = sizes[r]
        for i in range(k):
            t = sets[r, i]
            tset[i] = t
            in_t[t] = True
            for kk in range(var_ptr[t], var_ptr[t + 1]):
                cnt[var_adj[kk]] += 1
        out[r] = _criterion(tset, k, cnt, in_t, chk_ptr, edge_var, var_ptr, var_adj,
                            s_stamp, s_val, c_stamp, r + 1)
        for i in range(k):
            t = tset[i]
            in_t[t] = False
            for kk in range(var_ptr[t], var_ptr[t + 1]):
                cnt[var_adj[kk]] -= 1
    return out


@njit(cache=True, nogil=True)
def _grow(buf, need):
    if need <= buf.shape[0]:
        return buf
    cap = buf.shape[0] * 2
    while cap < need:
        cap *= 2
    nb = np.full((cap, buf.shape[1]), -1, dtype=buf.dtype)
    nb[:buf.shape[0]] = buf
    return nb


@njit(cache=True, nogil=True)
def brute_force_root(root, kmax, collect, n, m, chk_ptr, edge_var, var_ptr, var_adj):
    """Classify every set of size ``<= kmax`` whose smallest element is ``root``.

    Returns per-size class counts and, for sizes with ``collect[k]`` set,
    the termatiko sets with their class codes.
    """
    counts = np.zeros((kmax + 1, 3), dtype=np.int64)
    cnt = np.zeros(m, dtype=np.int64)
    in_t = np.zeros(n, dtype=np.bool_)
    s_stamp = np.zeros(n, dtype=np.int64)
    s_val = np.zeros(n, dtype=np.bool_)
    c_stamp = np.zeros(m, dtype=np.int64)
    tset = np.empty(kmax, dtype=np.int64)
    buf = np.full((64, kmax), -1, dtype=np.int32)
    cls = np.zeros(64, dtype=np.int8)
    nout = 0
    stamp = 0

    tset[0] = root
    in_t[root] = True
    for kk in range(var_ptr[root], var_ptr[root + 1]):
        cnt[var_adj[kk]] += 1
    depth = 1
    while True:
        stamp += 1
        verdict = _criterion(tset, depth, cnt, in_t, chk_ptr, edge_var, var_ptr, var_adj,
                             s_stamp, s_val, c_stamp, stamp)
        counts[depth, verdict] += 1
        if verdict != VERDICT_NONE and collect[depth]:
            if nout >= buf.shape[0]:
                buf = _grow(buf, nout + 1)
                nc = np.zeros(buf.shape[0], dtype=np.int8)
                nc[:nout] = cls[:nout]
                cls = nc
            for i in range(depth):
                buf[nout, i] = tset[i]
            cls[nout] = verdict
            nout += 1
        # advance to the next subset in lexicographic order
        if depth < kmax and tset[depth - 1] + 1 < n:
            v = tset[depth - 1] + 1
            tset[depth] = v
            in_t[v] = True
            for kk in range(var_ptr[v], var_ptr[v + 1]):
                cnt[var_adj[kk]] += 1
            depth += 1
            continue
        advanced = False
        while depth > 1:
            last = tset[depth - 1]
            in_t[last] = False
            for kk in range(var_ptr[last], var_ptr[last + 1]):
                cnt[var_adj[kk]] -= 1
            if last + 1 < n:
                v = last + 1
                tset[depth - 1] = v
                in_t[v] = True
                for kk in range(var_ptr[v], var_ptr[v + 1]):
                    cnt[var_adj[kk]] += 1
                advanced = True
                break
            depth -= 1
        if not advanced:
            break
    return counts, buf[:nout], cls[:nout]


@njit(cache=True, nogil=True)
def subsets_of_sets(sets, sizes, kmax, n, m, chk_ptr, edge_var, var_ptr, var_adj):
    """Termatiko subsets (size ``<= kmax``) of every row of ``sets``.

    Returns ``(row, mask, class)`` triples; bit ``i`` of ``mask`` selects
    ``sets[row, i]``.
    """
    cnt = np.zeros(m, dtype=np.int64)
    in_t = np.zeros(n, dtype=np.bool_)
    s_stamp = np.zeros(n, dtype=np.int64)
    s_val = np.zeros(n, dtype=np.bool_)
    c_stamp = np.zeros(m, dtype=np.int64)
    tset = np.empty(64, dtype=np.int64)
    out = np.full((64, 3), -1, dtype=np.int64)
    nout = 0
    stamp = 0
    for r in range(sets.shape[0]):
        s = sizes[r]
        for mask in range(1, 1 << s):
            k = 0
            for i in range(s):
                if mask >> i & 1:
                    k += 1
            if k > kmax:
                continue
            k = 0
            for i in range(s):
                if mask >> i & 1:
                    t = sets[r, i]
                    tset[k] = t
                    k += 1
                    in_t[t] = True
                    for kk in range(var_ptr[t], var_ptr[t + 1]):
                        cnt[var_adj[kk]] += 1
            stamp += 1
            verdict = _criterion(tset, k, cnt, in_t, chk_ptr, edge_var, var_ptr, var_adj,
                                 s_stamp, s_val, c_stamp, stamp)
            for i in range(k):
                t = tset[i]
                in_t[t] = False
                for kk in range(var_ptr[t], var_ptr[t + 1]):
                    cnt[var_adj[kk]] -= 1
            if verdict != VERDICT_NONE:
                out = _grow(out, nout + 1)
                out[nout, 0] = r
                out[nout, 1] = mask
                out[nout, 2] = verdict
                nout += 1
    return out[:nout]


# --------------------------------------------------------------------------
# stopping-set branch and bound

_UND = 0
_INC = 1
_EXC = 2


@njit(cache=True, nogil=True, inline="always")
def _include(v, status, cnt, und, var_ptr, var_adj, trail, top):
    status[v] = _INC
    for kk in range(var_ptr[v], var_ptr[v + 1]):
        c = var_adj[kk]
        cnt[c] += 1
        und[c] -= 1
    trail[top] = v + 1
    return top + 1


@njit(cache=True, nogil=True, inline="always")
def _exclude(v, status, und, var_ptr, var_adj, trail, top):
    status[v] = _EXC
    for kk in range(var_ptr[v], var_ptr[v + 1]):
        und[var_adj[kk]] -= 1
    trail[top] = -(v + 1)
    return top + 1


@njit(cache=True, nogil=True)
def _undo(mark, status, cnt, und, var_ptr, var_adj, trail, top):
    while top > mark:
        top -= 1
        code = trail[top]
        if code > 0:
            v = code - 1
            for kk in range(var_ptr[v], var_ptr[v + 1]):
                c = var_adj[kk]
                cnt[c] -= 1
                und[c] += 1
        else:
            v = -code - 1
            for kk in range(var_ptr[v], var_ptr[v + 1]):
                und[var_adj[kk]] += 1
        status[v] = _UND
    return top


@njit(cache=True, nogil=True)
def stopping_search(init_incl, init_excl, tau, max_nodes, first_only,
                    n, m, chk_ptr, edge_var, var_ptr, var_adj):
    """Every stopping set ``J`` with ``init_incl <= J``, ``J & init_excl = {}``, ``|J| <= tau``.

    Depth-first over (included, excluded, undecided). A check with exactly one
    included neighbour forces one of its undecided neighbours in; branch ``i``
    includes the ``i``-th candidate and excludes the earlier ones, so no set is
    reached twice. Once no check is forced, the included set is a stopping set
    and the search continues by adding the smallest further member.

    Returns ``(sets, sizes, nodes, complete)``. With ``first_only`` the search
    stops at the first hit.
    """
    status = np.zeros(n, dtype=np.int8)
    cnt = np.zeros(m, dtype=np.int64)
    und = np.zeros(m, dtype=np.int64)
    for c in range(m):
        und[c] = chk_ptr[c + 1] - chk_ptr[c]
    trail = np.empty(2 * n + 2, dtype=np.int64)
    top = 0
    size = 0

    depth_cap = tau + 2
    fr_start = np.zeros(depth_cap, dtype=np.int64)
    fr_len = np.zeros(depth_cap, dtype=np.int64)
    fr_idx = np.zeros(depth_cap, dtype=np.int64)
    fr_mark = np.zeros(depth_cap, dtype=np.int64)
    fr_orig = np.zeros(depth_cap, dtype=np.int64)
    fr_size = np.zeros(depth_cap, dtype=np.int64)
    cand = np.empty(depth_cap * (n + 1), dtype=np.int64)
    ctop = 0
    ftop = 0
    mark_v = np.zeros(n, dtype=np.int64)
    mstamp = 0

    width = tau if tau > 0 else 1
    out = np.full((16, width), -1, dtype=np.int32)
    sizes = np.zeros(16, dtype=np.int64)
    nout = 0
    nodes = 0
    complete = True

    for i in range(init_excl.shape[0]):
        v = init_excl[i]
        if status[v] == _UND:
            top = _exclude(v, status, und, var_ptr, var_adj, trail, top)
    for i in range(init_incl.shape[0]):
        v = init_incl[i]
        if status[v] == _EXC:
            return out[:0], sizes[:0], nodes, complete
        if status[v] == _UND:
            top = _include(v, status, cnt, und, var_ptr, var_adj, trail, top)
            size += 1

    fresh = True
    while True:
        if fresh:
            fresh = False
            # evaluate the current state; may record a hit and push a frame
            dead = size > tau
            nforced = 0
            best_c = -1
            best_u = n + 1
            if not dead:
                for c in range(m):
                    if cnt[c] == 1:
                        if und[c] == 0:
                            dead = True
                            break
                        nforced += 1
                        if und[c] < best_u:
                            best_u = und[c]
                            best_c = c
            if not dead and nforced > 0:
                # forced checks with pairwise disjoint candidate sets each need a new member
                mstamp += 1
                packed = 0
                for c in range(m):
                    if cnt[c] != 1:
                        continue
                    free = True
                    for e in range(chk_ptr[c], chk_ptr[c + 1]):
                        v = edge_var[e]
                        if status[v] == _UND and mark_v[v] == mstamp:
                            free = False
                            break
                    if free:
                        packed += 1
                        for e in range(chk_ptr[c], chk_ptr[c + 1]):
                            v = edge_var[e]
                            if status[v] == _UND:
                                mark_v[v] = mstamp
                if size + packed > tau:
                    dead = True
            if not dead:
                push = False
                fr_start[ftop] = ctop
                if nforced > 0:
                    for e in range(chk_ptr[best_c], chk_ptr[best_c + 1]):
                        v = edge_var[e]
                        if status[v] == _UND:
                            cand[ctop] = v
                            ctop += 1
                    push = True
                else:
                    if size > 0:
                        if nout >= out.shape[0]:
                            out = _grow(out, nout + 1)
                            ns = np.zeros(out.shape[0], dtype=np.int64)
                            ns[:nout] = sizes[:nout]
                            sizes = ns
                        k = 0
                        for v in range(n):
                            if status[v] == _INC:
                                out[nout, k] = v
                                k += 1
                        sizes[nout] = k
                        nout += 1
                        if first_only:
                            break
                    if size + 1 <= tau:
                        for v in range(n):
                            if status[v] == _UND:
                                cand[ctop] = v
                                ctop += 1
                        push = True
                if push:
                    fr_len[ftop] = ctop - fr_start[ftop]
                    fr_idx[ftop] = 0
                    fr_mark[ftop] = top
                    fr_orig[ftop] = top
                    fr_size[ftop] = size
                    ftop += 1
        if ftop == 0:
            break
        f = ftop - 1
        top = _undo(fr_mark[f], status, cnt, und, var_ptr, var_adj, trail, top)
        size = fr_size[f]
        i = fr_idx[f]
        if i > 0:
            top = _exclude(cand[fr_start[f] + i - 1], status, und, var_ptr, var_adj, trail, top)
            fr_mark[f] = top
        if i >= fr_len[f]:
            top = _undo(fr_orig[f], status, cnt, und, var_ptr, var_adj, trail, top)
            ctop = fr_start[f]
            ftop -= 1
            continue
        fr_idx[f] = i + 1
        nodes += 1
        if nodes > max_nodes:
            complete = False
            break
        top = _include(cand[fr_start[f] + i], status, cnt, und, var_ptr, var_adj, trail, top)
        size += 1
        fresh = True
    return out[:nout], sizes[:nout], nodes, complete


@njit(cache=True, nogil=True)
def contained_batch(sets, sizes, tau, max_nodes, n, m, chk_ptr, edge_var, var_ptr, var_adj):
    """For each row, whether a stopping set of size ``<= tau`` contains it.

    Tries ``T | S`` first (``S``: variables whose checks all touch ``T``),
    then falls back to a first-hit branch and bound from ``T``.
    Returns ``(keep, undecided)`` boolean arrays.
    """
    keep = np.zeros(sets.shape[0], dtype=np.bool_)
    undecided = np.zeros(sets.shape[0], dtype=np.bool_)
    cnt = np.zeros(m, dtype=np.int64)
    in_u = np.zeros(n, dtype=np.bool_)
    members = np.empty(n, dtype=np.int64)
    no_excl = np.empty(0, dtype=np.int64)
    for r in range(sets.shape[0]):
        k = sizes[r]
        nmem = 0
        for i in range(k):
            t = sets[r, i]
            in_u[t] = True
            members[nmem] = t
            nmem += 1
            for kk in range(var_ptr[t], var_ptr[t + 1]):
                cnt[var_adj[kk]] += 1
        # companion nodes, found through the checks of T
        for i in range(k):
            t = sets[r, i]
            for kk in range(var_ptr[t], var_ptr[t + 1]):
                c = var_adj[kk]
                for e in range(chk_ptr[c], chk_ptr[c + 1]):
                    v = edge_var[e]
                    if in_u[v]:
                        continue
                    ok = True
                    for k2 in range(var_ptr[v], var_ptr[v + 1]):
                        if cnt[var_adj[k2]] == 0:
                            ok = False
                            break
                    if ok:
                        in_u[v] = True
                        members[nmem] = v
                        nmem += 1
        # counts so far cover T only; add the companions and test the union
        for i in range(k, nmem):
            v = members[i]
            for kk in range(var_ptr[v], var_ptr[v + 1]):
                cnt[var_adj[kk]] += 1
        stopping = True
        for i in range(nmem):
            v = members[i]
            for kk in range(var_ptr[v], var_ptr[v + 1]):
                if cnt[var_adj[kk]] == 1:
                    stopping = False
        for i in range(nmem):
            v = members[i]
            in_u[v] = False
            for kk in range(var_ptr[v], var_ptr[v + 1]):
                cnt[var_adj[kk]] -= 1
        if stopping and nmem <= tau:
            keep[r] = True
            continue
        init = np.empty(k, dtype=np.int64)
        for i in range(k):
            init[i] = sets[r, i]
        hits, hs, nodes, complete = stopping_search(init, no_excl, tau, max_nodes, True,
                                                    n, m, chk_ptr, edge_var, var_ptr, var_adj)
        if hs.shape[0] > 0:
            keep[r] = True
        elif not complete:
            undecided[r] = True
    return keep, undecided

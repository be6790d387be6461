"""Compiled list-decoding kernel.

The path bookkeeping follows the lazy-copy scheme of Tal and Vardy: each
path holds one array index per tree level, arrays are shared between
clones through reference counts and copied only when written. LLR arrays
are laid out by halves (the first half of a node's input pairs with its
second half), which is the natural recursion for ``u F^{(x)n}``; callers
handle the bit-reversal permutation by permuting channel LLRs.

All indices are 0-based.
"""

import math

import numpy as np
from numba import njit

Q_MIN = -64.0
Q_MAX = 63.5


@njit(cache=True)
def quantize(x):
    """Round to the 0.5 grid (half away from zero) and saturate to [-64, 63.5]."""
    y = math.floor(abs(x) * 2.0 + 0.5) * 0.5
    if x < 0.0:
        y = -y
    if y < Q_MIN:
        return Q_MIN
    if y > Q_MAX:
        return Q_MAX
    return y


@njit(cache=True)
def max_star(a, b):
    if a == -np.inf:
        return b
    if b == -np.inf:
        return a
    return max(a, b) + math.log1p(math.exp(-abs(a - b)))


@njit(cache=True)
def llr_f(a, b):
    """max*(a + b, 0) - max*(a, b), expanded to skip negligible correction terms."""
    aa = abs(a)
    bb = abs(b)
    mag = aa if aa < bb else bb
    if (a < 0.0) != (b < 0.0):
        mag = -mag
    # exp(-37) is below double resolution relative to 1
    x = abs(a + b)
    y = abs(a - b)
    if x < 37.0:
        mag += math.log1p(math.exp(-x))
    if y < 37.0:
        mag -= math.log1p(math.exp(-y))
    return mag


@njit(cache=True, inline="always")
def llr_g(a, b, us):
    if us:
        return b - a
    return b + a


@njit(cache=True, inline="always")
def penalty_increment(llr, bit):
    """ln(1 + exp(-(1 - 2 bit) llr)), evaluated without overflow."""
    x = -llr if bit else llr
    if x >= 0.0:
        return math.log1p(math.exp(-x))
    return -x + math.log1p(math.exp(x))


@njit(cache=True)
def _get_write(lam, path, N, P_arr, C_arr, path_arr, refcnt, free_arr, free_top):
    s = path_arr[lam, path]
    if refcnt[lam, s] == 1:
        return s
    free_top[lam] -= 1
    s2 = free_arr[lam, free_top[lam]]
    size = N >> lam
    for b in range(size):
        P_arr[lam, s2, b] = P_arr[lam, s, b]
        C_arr[lam, s2, 0, b] = C_arr[lam, s, 0, b]
        C_arr[lam, s2, 1, b] = C_arr[lam, s, 1, b]
    refcnt[lam, s] -= 1
    refcnt[lam, s2] = 1
    path_arr[lam, path] = s2
    return s2


@njit(cache=True, inline="always")
def _calc_leaf(phi, path, n, N, quantized,
               P_arr, C_arr, path_arr, refcnt, free_arr, free_top):
    # level 0 slot 0 holds the channel LLRs
    if n == 0:
        return P_arr[0, 0, 0]
    lam0 = n
    while lam0 > 1 and ((phi >> (n - lam0)) & 1) == 0:
        lam0 -= 1
    for lam in range(lam0, n + 1):
        size = N >> lam
        odd = (phi >> (n - lam)) & 1
        s = path_arr[lam, path]
        if refcnt[lam, s] != 1:
            s = _get_write(lam, path, N, P_arr, C_arr, path_arr, refcnt, free_arr, free_top)
        r = 0 if lam == 1 else path_arr[lam - 1, path]
        if odd:
            for b in range(size):
                P_arr[lam, s, b] = llr_g(P_arr[lam - 1, r, b], P_arr[lam - 1, r, b + size],
                                         C_arr[lam, s, 0, b])
        else:
            for b in range(size):
                P_arr[lam, s, b] = llr_f(P_arr[lam - 1, r, b], P_arr[lam - 1, r, b + size])
        if quantized:
            for b in range(size):
                P_arr[lam, s, b] = quantize(P_arr[lam, s, b])
    return P_arr[n, path_arr[n, path], 0]


@njit(cache=True, inline="always")
def _set_decision(phi, path, bit, n, N, P_arr, C_arr, path_arr, refcnt, free_arr, free_top):
    if n == 0:
        return
    s = path_arr[n, path]
    if refcnt[n, s] != 1:
        s = _get_write(n, path, N, P_arr, C_arr, path_arr, refcnt, free_arr, free_top)
    C_arr[n, s, phi & 1, 0] = bit
    if (phi & 1) == 0:
        return
    lam = n
    ph = phi
    while lam > 1:
        psi = ph >> 1
        size = N >> lam
        src = path_arr[lam, path]
        dst = path_arr[lam - 1, path]
        if refcnt[lam - 1, dst] != 1:
            dst = _get_write(lam - 1, path, N, P_arr, C_arr, path_arr, refcnt, free_arr,
                             free_top)
        col = psi & 1
        for b in range(size):
            r = C_arr[lam, src, 1, b]
            C_arr[lam - 1, dst, col, b] = C_arr[lam, src, 0, b] ^ r
            C_arr[lam - 1, dst, col, b + size] = r
        if col == 0:
            break
        lam -= 1
        ph = psi


@njit(cache=True, inline="always")
def _kill(path, n, active, free_path, free_path_top, path_arr, refcnt, free_arr, free_top):
    active[path] = False
    free_path[free_path_top[0]] = path
    free_path_top[0] += 1
    for lam in range(1, n + 1):
        s = path_arr[lam, path]
        refcnt[lam, s] -= 1
        if refcnt[lam, s] == 0:
            free_arr[lam, free_top[lam]] = s
            free_top[lam] += 1


@njit(cache=True, inline="always")
def _clone(path, phi, n, active, free_path, free_path_top, path_arr, refcnt, uhat, pen):
    free_path_top[0] -= 1
    new = free_path[free_path_top[0]]
    active[new] = True
    for lam in range(1, n + 1):
        s = path_arr[lam, path]
        path_arr[lam, new] = s
        refcnt[lam, s] += 1
    for i in range(phi):
        uhat[new, i] = uhat[path, i]
    pen[new] = pen[path]
    return new


@njit(cache=True, inline="always")
def _segment_crc_reg(u_row, info_pos, a, b, width, feedback):
    """LFSR remainder over the payload slots of one segment."""
    mask = (1 << width) - 1
    top = width - 1
    reg = 0
    for t in range(a, b - width):
        fb = (u_row[info_pos[t]] ^ (reg >> top)) & 1
        reg = (reg << 1) & mask
        if fb:
            reg ^= feedback
    return reg


@njit(cache=True, inline="always")
def _crc_matches(reg, u_row, last_bit, info_pos, b, width):
    # CRC slots are info_pos[b - width : b]; the final slot is still undecided in u_row
    for t in range(width):
        expect = (reg >> (width - 1 - t)) & 1
        if t == width - 1:
            got = last_bit
        else:
            got = u_row[info_pos[b - width + t]]
        if expect != got:
            return False
    return True


@njit(cache=True)
def decode_segments(llr_in, frozen, seg_start, seg_end, seg_ptr, info_pos, widths, feedbacks,
                    first_seg, committed, L, quantized):
    """Segmented CRC-aided list decoding.

    Positions before ``seg_start[first_seg]`` are forced to ``committed``
    on a single path. Each later segment is list decoded with list size
    ``L``; at its last unfrozen position the 2L forks are CRC-checked
    before pruning, and at the segment end the smallest-penalty path
    becomes the single survivor. Decoding stops at the first segment whose
    candidates all fail the check.

    Returns ``(u_best, penalty_best, segments_passed, failed, leaf_llr,
    cand_u, cand_pen, n_cand)``; ``leaf_llr`` is filled only on the forced
    prefix, ``cand_*`` hold the final list (or the rejected forks on
    failure).
    """
    N = llr_in.size
    n = 0
    while (1 << n) < N:
        n += 1
    P = seg_start.size

    P_arr = np.empty((n + 1, L, N))
    for i in range(N):
        P_arr[0, 0, i] = quantize(llr_in[i]) if quantized else llr_in[i]
    C_arr = np.zeros((n + 1, L, 2, N), dtype=np.uint8)
    path_arr = np.zeros((n + 1, L), dtype=np.int64)
    refcnt = np.zeros((n + 1, L), dtype=np.int64)
    free_arr = np.empty((n + 1, L), dtype=np.int64)
    free_top = np.full(n + 1, L, dtype=np.int64)
    for lam in range(n + 1):
        for s in range(L):
            free_arr[lam, s] = L - 1 - s
    active = np.zeros(L, dtype=np.bool_)
    free_path = np.empty(L, dtype=np.int64)
    for s in range(L):
        free_path[s] = L - 1 - s
    free_path_top = np.full(1, L, dtype=np.int64)

    uhat = np.zeros((L, N), dtype=np.uint8)
    pen = np.zeros(L)
    order = np.empty(L, dtype=np.int64)
    new_order = np.empty(L, dtype=np.int64)

    free_path_top[0] -= 1
    p0 = free_path[free_path_top[0]]
    active[p0] = True
    for lam in range(1, n + 1):
        free_top[lam] -= 1
        s = free_arr[lam, free_top[lam]]
        path_arr[lam, p0] = s
        refcnt[lam, s] = 1
    order[0] = p0
    n_act = 1

    leaf = np.zeros(N)
    start0 = seg_start[first_seg] if first_seg < P else N
    for phi in range(start0):
        lv = _calc_leaf(phi, p0, n, N, quantized,
                        P_arr, C_arr, path_arr, refcnt, free_arr, free_top)
        leaf[phi] = lv
        bit = committed[phi]
        inc = penalty_increment(lv, bit)
        pen[p0] += quantize(inc) if quantized else inc
        uhat[p0, phi] = bit
        _set_decision(phi, p0, bit, n, N, P_arr, C_arr, path_arr, refcnt, free_arr, free_top)

    lvs = np.empty(L)
    cand_pen = np.empty(2 * L)
    cand_ok = np.empty(2 * L, dtype=np.bool_)
    keep = np.zeros(2 * L, dtype=np.bool_)
    ranking = np.empty(2 * L, dtype=np.int64)
    cand_u = np.zeros((2 * L, N), dtype=np.uint8)
    cand_out_pen = np.zeros(2 * L)
    u_best = np.zeros(N, dtype=np.uint8)

    passed = first_seg
    failed = False
    for j in range(first_seg, P):
        a = seg_ptr[j]
        b = seg_ptr[j + 1]
        last_unf = info_pos[b - 1] if b > a else -1
        w = widths[j]
        for phi in range(seg_start[j], seg_end[j]):
            for k in range(n_act):
                lvs[k] = _calc_leaf(phi, order[k], n, N, quantized,
                                    P_arr, C_arr, path_arr, refcnt, free_arr, free_top)
            if frozen[phi]:
                for k in range(n_act):
                    p = order[k]
                    inc = penalty_increment(lvs[k], 0)
                    pen[p] += quantize(inc) if quantized else inc
                    uhat[p, phi] = 0
                    _set_decision(phi, p, 0, n, N, P_arr, C_arr, path_arr, refcnt,
                                  free_arr, free_top)
                continue

            nc = 2 * n_act
            for k in range(n_act):
                p = order[k]
                i0 = penalty_increment(lvs[k], 0)
                i1 = penalty_increment(lvs[k], 1)
                if quantized:
                    i0 = quantize(i0)
                    i1 = quantize(i1)
                cand_pen[2 * k] = pen[p] + i0
                cand_pen[2 * k + 1] = pen[p] + i1
            n_ok = nc
            if phi == last_unf and w > 0:
                n_ok = 0
                for k in range(n_act):
                    p = order[k]
                    reg = _segment_crc_reg(uhat[p], info_pos, a, b, w, feedbacks[j])
                    for bit in range(2):
                        ok = _crc_matches(reg, uhat[p], bit, info_pos, b, w)
                        cand_ok[2 * k + bit] = ok
                        if ok:
                            n_ok += 1
            else:
                for c in range(nc):
                    cand_ok[c] = True

            if n_ok == 0:
                best = 0
                for c in range(1, nc):
                    if cand_pen[c] < cand_pen[best]:
                        best = c
                for c in range(nc):
                    p = order[c // 2]
                    cand_u[c, :phi] = uhat[p, :phi]
                    cand_u[c, phi] = c & 1
                    cand_out_pen[c] = cand_pen[c]
                u_best[:] = cand_u[best]
                failed = True
                return (u_best, cand_pen[best], passed, failed, leaf,
                        cand_u, cand_out_pen, nc)

            # stable insertion sort of candidate indices by penalty
            n_rank = 0
            for c in range(nc):
                keep[c] = False
                if not cand_ok[c]:
                    continue
                r = n_rank
                while r > 0 and cand_pen[ranking[r - 1]] > cand_pen[c]:
                    ranking[r] = ranking[r - 1]
                    r -= 1
                ranking[r] = c
                n_rank += 1
            for r in range(min(n_rank, L)):
                keep[ranking[r]] = True

            for k in range(n_act):
                if not keep[2 * k] and not keep[2 * k + 1]:
                    _kill(order[k], n, active, free_path, free_path_top, path_arr, refcnt,
                          free_arr, free_top)
            m_act = 0
            for k in range(n_act):
                k0 = keep[2 * k]
                k1 = keep[2 * k + 1]
                if not k0 and not k1:
                    continue
                p = order[k]
                if k0 and k1:
                    q = _clone(p, phi, n, active, free_path, free_path_top, path_arr, refcnt,
                               uhat, pen)
                    pen[p] = cand_pen[2 * k]
                    uhat[p, phi] = 0
                    _set_decision(phi, p, 0, n, N, P_arr, C_arr, path_arr, refcnt,
                                  free_arr, free_top)
                    pen[q] = cand_pen[2 * k + 1]
                    uhat[q, phi] = 1
                    _set_decision(phi, q, 1, n, N, P_arr, C_arr, path_arr, refcnt,
                                  free_arr, free_top)
                    new_order[m_act] = p
                    new_order[m_act + 1] = q
                    m_act += 2
                else:
                    bit = 0 if k0 else 1
                    pen[p] = cand_pen[2 * k + bit]
                    uhat[p, phi] = bit
                    _set_decision(phi, p, bit, n, N, P_arr, C_arr, path_arr, refcnt,
                                  free_arr, free_top)
                    new_order[m_act] = p
                    m_act += 1
            n_act = m_act
            order[:n_act] = new_order[:n_act]

        passed = j + 1
        if j < P - 1 and n_act > 1:
            best = 0
            for k in range(1, n_act):
                if pen[order[k]] < pen[order[best]]:
                    best = k
            keep_path = order[best]
            for k in range(n_act):
                if k != best:
                    _kill(order[k], n, active, free_path, free_path_top, path_arr, refcnt,
                          free_arr, free_top)
            order[0] = keep_path
            n_act = 1

    best = 0
    for k in range(1, n_act):
        if pen[order[k]] < pen[order[best]]:
            best = k
    for k in range(n_act):
        cand_u[k] = uhat[order[k]]
        cand_out_pen[k] = pen[order[k]]
    u_best[:] = uhat[order[best]]
    return u_best, pen[order[best]], passed, failed, leaf, cand_u, cand_out_pen, n_act

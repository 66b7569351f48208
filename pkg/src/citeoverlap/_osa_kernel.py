"""Compiled all-pairs OSA distance with a distance cutoff.

Used by the matcher to score every unmatched A x B title pair in a block.
Distances above the per-pair cutoff are reported as ``cutoff + 1``.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _osa_capped(a, b, k, prev2, prev, cur):
    la = a.shape[0]
    lb = b.shape[0]
    big = k + 1
    for j in range(lb + 2):
        prev[j] = j if j <= k else big
        prev2[j] = big
        cur[j] = big
    prev_min = 0
    for i in range(1, la + 1):
        lo = i - k
        if lo < 1:
            lo = 1
        hi = i + k
        if hi > lb:
            hi = lb
        # cells just outside the band are read by the next row
        cur[0] = i if i <= k else big
        if lo > 1:
            cur[lo - 1] = big
        cur[hi + 1] = big
        row_min = cur[0]
        ai = a[i - 1]
        for j in range(lo, hi + 1):
            bj = b[j - 1]
            v = prev[j - 1] + (0 if ai == bj else 1)
            t = prev[j] + 1
            if t < v:
                v = t
            t = cur[j - 1] + 1
            if t < v:
                v = t
            if i > 1 and j > 1 and ai == b[j - 2] and a[i - 2] == bj:
                t = prev2[j - 2] + 1
                if t < v:
                    v = t
            if v > big:
                v = big
            cur[j] = v
            if v < row_min:
                row_min = v
        if row_min > k and prev_min > k:
            # two rows above the cap: every later cell derives from one of them
            return big
        prev_min = row_min
        prev2, prev, cur = prev, cur, prev2
    d = prev[lb]
    return d if d <= k else big


NBUCKETS = 64


@njit(cache=True, nogil=True)
def _histograms(codes, offs):
    n = offs.shape[0] - 1
    h = np.zeros((n, NBUCKETS), dtype=np.int64)
    for i in range(n):
        for p in range(offs[i], offs[i + 1]):
            h[i, codes[p] % NBUCKETS] += 1
    return h


@njit(cache=True, nogil=True)
def _bag_bound(ha, hb):
    # every edit moves the character multisets apart by at most one on each side,
    # and merging characters into buckets can only shrink the difference
    over = 0
    under = 0
    for c in range(NBUCKETS):
        d = ha[c] - hb[c]
        if d > 0:
            over += d
        else:
            under -= d
    return over if over > under else under


@njit(cache=True, nogil=True)
def block_distances(codes_a, offs_a, codes_b, offs_b, max_dist_ratio):
    """Capped OSA distance for every (i, j) pair.

    ``codes_*`` are concatenated codepoints, ``offs_*`` the start offsets
    (length n + 1). The cutoff for a pair is ``floor(ratio * max_len) + 1``.
    """
    na = offs_a.shape[0] - 1
    nb = offs_b.shape[0] - 1
    out = np.empty((na, nb), dtype=np.int64)
    width = 2
    for j in range(nb):
        w = offs_b[j + 1] - offs_b[j] + 2
        if w > width:
            width = w
    prev2 = np.empty(width, dtype=np.int64)
    prev = np.empty(width, dtype=np.int64)
    cur = np.empty(width, dtype=np.int64)
    hist_a = _histograms(codes_a, offs_a)
    hist_b = _histograms(codes_b, offs_b)
    for i in range(na):
        a = codes_a[offs_a[i]:offs_a[i + 1]]
        la = a.shape[0]
        for j in range(nb):
            b = codes_b[offs_b[j]:offs_b[j + 1]]
            lb = b.shape[0]
            m = la if la > lb else lb
            k = int(max_dist_ratio * m) + 1
            diff = la - lb if la > lb else lb - la
            if diff > k or _bag_bound(hist_a[i], hist_b[j]) > k:
                out[i, j] = k + 1
            else:
                out[i, j] = _osa_capped(a, b, k, prev2, prev, cur)
    return out


def encode(titles):
    """Pack strings into (codepoints, offsets) arrays for :func:`block_distances`."""
    offs = np.zeros(len(titles) + 1, dtype=np.int64)
    total = 0
    for i, t in enumerate(titles):
        total += len(t)
        offs[i + 1] = total
    joined = "".join(titles)
    codes = np.frombuffer(joined.encode("utf-32-le"), dtype=np.uint32).astype(np.int64)
    return codes, offs

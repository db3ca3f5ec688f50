"""Hot loops for window matching.

Every kernel exists twice: a numba ``@njit`` version and a plain numpy
version with identical integer semantics. The numba path is used when numba
imports cleanly and ``PATTERNMARK_NUMBA`` is not set to ``0``/``false``/``no``.
"""
from __future__ import annotations

import os

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAS_NUMBA = False

_flag = os.environ.get("PATTERNMARK_NUMBA", "1").strip().lower()
USE_NUMBA = HAS_NUMBA and _flag not in ("0", "false", "no", "off")
BACKEND = "numba" if USE_NUMBA else "numpy"


# numpy implementations -----------------------------------------------------

def window_codes_numpy(tags, w, r):
    tags = np.ascontiguousarray(tags, dtype=np.int64)
    if tags.size < w:
        return np.empty(0, dtype=np.int64)
    powers = np.int64(r) ** np.arange(w - 1, -1, -1, dtype=np.int64)
    return sliding_window_view(tags, w) @ powers


def dense_indicators_numpy(tags, w, r, table):
    return table[window_codes_numpy(tags, w, r)].astype(np.int64)


def sorted_indicators_numpy(tags, w, r, codes_sorted):
    codes = window_codes_numpy(tags, w, r)
    idx = np.searchsorted(codes_sorted, codes)
    idx = np.minimum(idx, codes_sorted.size - 1)
    return (codes_sorted[idx] == codes).astype(np.int64)


def runlength_indicators_numpy(tags, w, pattern):
    # run[v] at position t: length of the longest prefix of tags[t:] that
    # follows the pattern from offset v
    tags = np.asarray(tags, dtype=np.int64)
    T, R = tags.size, pattern.size
    n = T - w + 1
    if n <= 0:
        return np.empty(0, dtype=np.int64)
    out = np.zeros(n, dtype=np.int64)
    run = np.zeros(R, dtype=np.int64)
    shift = np.roll(np.arange(R), -1)
    for t in range(T - 1, -1, -1):
        run = np.where(tags[t] == pattern, 1 + run[shift], 0)
        if t < n:
            out[t] = int(run.max() >= w)
    return out


_GOLD = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_TWO53 = 9007199254740992.0


def hash_noise_numpy(h, n):
    # splitmix64 per lane, then the Student-t(2) quantile of a 53-bit uniform;
    # only +, *, / and sqrt, so both backends round identically
    z = np.arange(n, dtype=np.uint64) ^ np.uint64(h)
    z = z + _GOLD
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    z = z ^ (z >> np.uint64(31))
    u = ((z >> np.uint64(11)).astype(np.float64) + 0.5) / _TWO53
    return (2.0 * u - 1.0) / np.sqrt(2.0 * u * (1.0 - u))


def edit_scores_numpy(indicators, w, T):
    ind = np.asarray(indicators, dtype=np.int64)
    n = ind.size
    csum = np.concatenate(([0], np.cumsum(ind)))
    t = np.arange(T)
    lo = np.maximum(0, t - w + 1)
    hi = np.minimum(t, n - 1)
    support = np.maximum(hi - lo + 1, 0)
    sums = np.where(support > 0, csum[np.clip(hi + 1, 0, n)] - csum[np.clip(lo, 0, n)], 0)
    scores = np.zeros(T, dtype=np.float64)
    nz = support > 0
    scores[nz] = sums[nz] / support[nz]
    return scores, support.astype(np.int64)


# numba implementations -----------------------------------------------------

if HAS_NUMBA:

    @numba.njit(cache=True, nogil=True)
    def window_codes_numba(tags, w, r):
        T = tags.shape[0]
        n = T - w + 1
        if n <= 0:
            return np.empty(0, dtype=np.int64)
        out = np.empty(n, dtype=np.int64)
        top = np.int64(1)
        for _ in range(w - 1):
            top *= r
        code = np.int64(0)
        for i in range(w):
            code = code * r + tags[i]
        out[0] = code
        for t in range(1, n):
            code = (code - tags[t - 1] * top) * r + tags[t + w - 1]
            out[t] = code
        return out

    @numba.njit(cache=True, nogil=True)
    def dense_indicators_numba(tags, w, r, table):
        codes = window_codes_numba(tags, w, r)
        out = np.empty(codes.shape[0], dtype=np.int64)
        for i in range(codes.shape[0]):
            out[i] = 1 if table[codes[i]] else 0
        return out

    @numba.njit(cache=True, nogil=True)
    def sorted_indicators_numba(tags, w, r, codes_sorted):
        codes = window_codes_numba(tags, w, r)
        out = np.zeros(codes.shape[0], dtype=np.int64)
        m = codes_sorted.shape[0]
        for i in range(codes.shape[0]):
            lo, hi = 0, m
            c = codes[i]
            while lo < hi:
                mid = (lo + hi) // 2
                if codes_sorted[mid] < c:
                    lo = mid + 1
                else:
                    hi = mid
            if lo < m and codes_sorted[lo] == c:
                out[i] = 1
        return out

    @numba.njit(cache=True, nogil=True)
    def runlength_indicators_numba(tags, w, pattern):
        T = tags.shape[0]
        R = pattern.shape[0]
        n = T - w + 1
        if n <= 0:
            return np.empty(0, dtype=np.int64)
        out = np.zeros(n, dtype=np.int64)
        run = np.zeros(R, dtype=np.int64)
        nxt = np.zeros(R, dtype=np.int64)
        for t in range(T - 1, -1, -1):
            best = 0
            for v in range(R):
                if tags[t] == pattern[v]:
                    nxt[v] = 1 + run[(v + 1) % R]
                else:
                    nxt[v] = 0
                if nxt[v] > best:
                    best = nxt[v]
            for v in range(R):
                run[v] = nxt[v]
            if t < n and best >= w:
                out[t] = 1
        return out

    @numba.njit(cache=True, nogil=True)
    def hash_noise_numba(h, n):
        out = np.empty(n, dtype=np.float64)
        hh = np.uint64(h)
        for i in range(n):
            z = np.uint64(i) ^ hh
            z = z + _GOLD
            z = (z ^ (z >> np.uint64(30))) * _MIX1
            z = (z ^ (z >> np.uint64(27))) * _MIX2
            z = z ^ (z >> np.uint64(31))
            u = (np.float64(z >> np.uint64(11)) + 0.5) / _TWO53
            out[i] = (2.0 * u - 1.0) / np.sqrt(2.0 * u * (1.0 - u))
        return out

    @numba.njit(cache=True, nogil=True)
    def edit_scores_numba(indicators, w, T):
        n = indicators.shape[0]
        scores = np.zeros(T, dtype=np.float64)
        support = np.zeros(T, dtype=np.int64)
        csum = np.zeros(n + 1, dtype=np.int64)
        for i in range(n):
            csum[i + 1] = csum[i] + indicators[i]
        for t in range(T):
            lo = t - w + 1
            if lo < 0:
                lo = 0
            hi = t
            if hi > n - 1:
                hi = n - 1
            if hi >= lo:
                support[t] = hi - lo + 1
                scores[t] = (csum[hi + 1] - csum[lo]) / support[t]
        return scores, support

else:  # pragma: no cover
    window_codes_numba = window_codes_numpy
    dense_indicators_numba = dense_indicators_numpy
    sorted_indicators_numba = sorted_indicators_numpy
    runlength_indicators_numba = runlength_indicators_numpy
    edit_scores_numba = edit_scores_numpy
    hash_noise_numba = hash_noise_numpy


if USE_NUMBA:
    window_codes = window_codes_numba
    dense_indicators = dense_indicators_numba
    sorted_indicators = sorted_indicators_numba
    runlength_indicators = runlength_indicators_numba
    edit_scores = edit_scores_numba
    hash_noise = hash_noise_numba
else:
    window_codes = window_codes_numpy
    dense_indicators = dense_indicators_numpy
    sorted_indicators = sorted_indicators_numpy
    runlength_indicators = runlength_indicators_numpy
    edit_scores = edit_scores_numpy
    hash_noise = hash_noise_numpy


def kernels(backend: str | None = None) -> dict:
    """Return the kernel table for ``"numba"`` or ``"numpy"`` (default: active)."""
    backend = backend or BACKEND
    if backend == "numba":
        return dict(
            window_codes=window_codes_numba,
            dense_indicators=dense_indicators_numba,
            sorted_indicators=sorted_indicators_numba,
            runlength_indicators=runlength_indicators_numba,
            edit_scores=edit_scores_numba,
            hash_noise=hash_noise_numba,
        )
    if backend == "numpy":
        return dict(
            window_codes=window_codes_numpy,
            dense_indicators=dense_indicators_numpy,
            sorted_indicators=sorted_indicators_numpy,
            runlength_indicators=runlength_indicators_numpy,
            edit_scores=edit_scores_numpy,
            hash_noise=hash_noise_numpy,
        )
    raise ValueError(f"unknown backend {backend!r}")

"""Window indicators, the global watermark statistic and per-token edit scores.

Two routes compute the same numbers. The naive route walks every window in
pure Python and checks tuple membership; it is the reference. The fast route
encodes each window as a base-``r`` integer, updated incrementally as the
window slides, and answers membership with a precomputed table.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from . import _kernels
from .errors import InvalidArgument
from .pattern import CyclicWindowSet, VocabPartition

# dense lookup tables up to 4M entries, sorted codes beyond that
DENSE_TABLE_LIMIT = 1 << 22
# largest r**w that base-r encoding handles exactly in int64
CODE_LIMIT = 1 << 62


def _as_tags(tags) -> np.ndarray:
    return np.ascontiguousarray(tags, dtype=np.int64)


def _check_length(T: int, w: int) -> None:
    if w < 1:
        raise InvalidArgument(f"window length must be >= 1, got {w}")
    if T < w:
        raise InvalidArgument(f"sequence of length {T} is shorter than window {w}")


def _check_window_set(w: int, windows: CyclicWindowSet) -> None:
    if windows.w != w:
        raise InvalidArgument(f"window set built for w={windows.w}, called with w={w}")


# naive reference path ------------------------------------------------------

def window_indicator(tags: Sequence[int], t: int, w: int, windows: CyclicWindowSet) -> int:
    _check_window_set(w, windows)
    if not 0 <= t <= len(tags) - w:
        raise InvalidArgument(f"window start {t} out of range for length {len(tags)} and w={w}")
    return int(tuple(int(x) for x in tags[t:t + w]) in windows.windows)


def naive_indicators(tags: Sequence[int], w: int, windows: CyclicWindowSet) -> list[int]:
    _check_window_set(w, windows)
    _check_length(len(tags), w)
    tags = [int(x) for x in tags]
    members = windows.windows
    return [int(tuple(tags[t:t + w]) in members) for t in range(len(tags) - w + 1)]


def detect_statistic(tags: Sequence[int], w: int, windows: CyclicWindowSet) -> float:
    ind = naive_indicators(tags, w, windows)
    return sum(ind) / len(ind)


def edit_statistics(tags: Sequence[int], w: int, windows: CyclicWindowSet):
    """Per-token edit scores and how many windows each one averages.

    Position ``t`` is covered by the windows starting at ``t-w+1 .. t``.
    Near the sequence ends some of those windows do not exist; the score
    there is the mean of the ones that do and ``support < w``.
    """
    ind = naive_indicators(tags, w, windows)
    T, n = len(tags), len(ind)
    scores = np.zeros(T, dtype=np.float64)
    support = np.zeros(T, dtype=np.int64)
    for t in range(T):
        covering = [ind[s] for s in range(max(0, t - w + 1), min(t, n - 1) + 1)]
        support[t] = len(covering)
        if covering:
            scores[t] = sum(covering) / len(covering)
    return scores, support


# fast path -----------------------------------------------------------------

class WindowMatcher:
    """Precompiled membership test for one window set."""

    def __init__(self, windows: CyclicWindowSet):
        self.windows = windows
        self.w = windows.w
        self.pattern = windows.pattern
        self.r = windows.pattern.r
        self.pattern_array = windows.pattern.array
        space = self.r ** self.w
        if space <= DENSE_TABLE_LIMIT:
            self.mode = "dense"
            self.table = np.zeros(space, dtype=np.bool_)
            self.table[self._codes()] = True
        elif space <= CODE_LIMIT:
            self.mode = "sorted"
            self.codes_sorted = np.unique(self._codes())
        else:
            # codes would overflow; fall back to offset run lengths
            self.mode = "runlength"

    def _codes(self) -> np.ndarray:
        codes = []
        for win in self.windows.windows:
            c = 0
            for tag in win:
                c = c * self.r + tag
            codes.append(c)
        return np.asarray(codes, dtype=np.int64)

    def indicators(self, tags, backend: str | None = None) -> np.ndarray:
        tags = _as_tags(tags)
        _check_length(tags.size, self.w)
        if tags.size and (tags.min() < 0 or tags.max() >= self.r):
            raise InvalidArgument(f"tags must lie in [0, {self.r}) for this pattern")
        k = _kernels.kernels(backend)
        if self.mode == "dense":
            return k["dense_indicators"](tags, self.w, self.r, self.table)
        if self.mode == "sorted":
            return k["sorted_indicators"](tags, self.w, self.r, self.codes_sorted)
        return k["runlength_indicators"](tags, self.w, self.pattern_array)

    def edit_scores(self, tags, backend: str | None = None):
        tags = _as_tags(tags)
        ind = self.indicators(tags, backend)
        scores, support = _kernels.kernels(backend)["edit_scores"](ind, self.w, tags.size)
        return ind, scores, support


@lru_cache(maxsize=64)
def matcher_for(windows: CyclicWindowSet) -> WindowMatcher:
    return WindowMatcher(windows)


class FastResult(NamedTuple):
    statistic: float
    scores: np.ndarray
    support: np.ndarray
    match_count: int
    window_count: int


def fast_detect(tags, w: int, windows: CyclicWindowSet, backend: str | None = None) -> FastResult:
    _check_window_set(w, windows)
    ind, scores, support = matcher_for(windows).edit_scores(tags, backend)
    M, N = int(ind.sum()), int(ind.size)
    return FastResult(M / N, scores, support, M, N)


# reports -------------------------------------------------------------------

@dataclass
class DetectionReport:
    statistic: float
    threshold: float
    watermarked: bool
    window_count: int
    match_count: int

    def to_dict(self) -> dict:
        return dict(
            statistic=self.statistic,
            threshold=self.threshold,
            watermarked=self.watermarked,
            window_count=self.window_count,
            match_count=self.match_count,
        )


@dataclass
class EditReport:
    scores: np.ndarray
    threshold: float
    flagged: list[int]
    support: np.ndarray
    w: int = 0
    partial: bool = field(default=False)

    @property
    def edited(self) -> bool:
        return bool(self.flagged)

    def to_dict(self) -> dict:
        return dict(
            threshold=self.threshold,
            edited=self.edited,
            flagged=list(self.flagged),
            scores=self.scores.tolist(),
            support=self.support.tolist(),
        )


def _check_threshold(name: str, tau: float) -> None:
    if not 0.0 <= tau <= 1.0:
        raise InvalidArgument(f"{name} must lie in [0, 1], got {tau}")


def detect_watermark(tags, w: int, windows: CyclicWindowSet, tau_d: float, fast: bool = True) -> DetectionReport:
    _check_threshold("tau_d", tau_d)
    if fast:
        res = fast_detect(tags, w, windows)
        M, N = res.match_count, res.window_count
    else:
        ind = naive_indicators(tags, w, windows)
        M, N = sum(ind), len(ind)
    stat = M / N
    return DetectionReport(statistic=stat, threshold=tau_d, watermarked=stat >= tau_d,
                           window_count=N, match_count=M)


def flag_positions(scores: np.ndarray, support: np.ndarray, w: int, tau_e: float,
                   partial: bool = False) -> list[int]:
    eligible = support > 0 if partial else support == w
    return np.flatnonzero(eligible & (scores < tau_e)).tolist()


def detect_edits(tags, w: int, windows: CyclicWindowSet, tau_e: float, fast: bool = True,
                 partial: bool = False) -> EditReport:
    """Flag positions whose edit score falls strictly below ``tau_e``.

    Only positions covered by all ``w`` windows are eligible unless
    ``partial`` is set.
    """
    _check_threshold("tau_e", tau_e)
    if fast:
        res = fast_detect(tags, w, windows)
        scores, support = res.scores, res.support
    else:
        scores, support = edit_statistics(tags, w, windows)
    flagged = flag_positions(scores, support, w, tau_e, partial)
    return EditReport(scores=scores, threshold=tau_e, flagged=flagged, support=support, w=w, partial=partial)


def evenodd_indicator(tags: Sequence[int], t: int, odd_group, even_group) -> int:
    """1 when tokens ``t`` and ``t+1`` fall in opposite tag groups."""
    odd, even = set(odd_group), set(even_group)
    if odd & even:
        raise InvalidArgument(f"tag groups overlap on {sorted(odd & even)}")
    if not 0 <= t <= len(tags) - 2:
        raise InvalidArgument(f"window start {t} out of range for length {len(tags)}")
    a, b = int(tags[t]), int(tags[t + 1])
    for tag in (a, b):
        if tag not in odd and tag not in even:
            raise InvalidArgument(f"tag {tag} belongs to neither group")
    return int((a in odd) != (b in odd))


def evenodd_groups(pattern) -> tuple[set[int], set[int]]:
    """Split tags by the parity of the pattern slots they occupy.

    Returns ``(odd, even)`` using 1-based slot numbering. Raises if some tag
    occupies slots of both parities.
    """
    odd = {t for i, t in enumerate(pattern.tags) if i % 2 == 0}
    even = {t for i, t in enumerate(pattern.tags) if i % 2 == 1}
    if odd & even or pattern.R % 2:
        raise InvalidArgument(f"pattern {pattern} does not alternate between two tag groups")
    return odd, even


def tags_for(tokens, partition: VocabPartition) -> np.ndarray:
    return partition.tags_of(tokens)


def detect_tokens(tokens, partition: VocabPartition, windows: CyclicWindowSet, tau_d: float) -> DetectionReport:
    """:func:`detect_watermark` on raw token ids."""
    return detect_watermark(tags_for(tokens, partition), windows.w, windows, tau_d)

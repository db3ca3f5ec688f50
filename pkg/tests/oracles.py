"""Brute-force reference implementations used only by the tests.

Nothing here touches the package's window tables or vectorised metrics.
"""
from __future__ import annotations

import itertools


def cyclic_match(window, pattern_tags) -> bool:
    # try every phase of the pattern
    R = len(pattern_tags)
    return any(
        all(window[i] == pattern_tags[(v + i) % R] for i in range(len(window)))
        for v in range(R)
    )


def indicators(tags, w, pattern_tags):
    return [int(cyclic_match(tags[t:t + w], pattern_tags)) for t in range(len(tags) - w + 1)]


def statistic(tags, w, pattern_tags):
    ind = indicators(tags, w, pattern_tags)
    return sum(ind) / len(ind)


def scores(tags, w, pattern_tags):
    ind = indicators(tags, w, pattern_tags)
    out, sup = [], []
    for t in range(len(tags)):
        cov = [ind[s] for s in range(len(ind)) if s <= t <= s + w - 1]
        sup.append(len(cov))
        out.append(sum(cov) / len(cov) if cov else 0.0)
    return out, sup


def flagged(tags, w, pattern_tags, tau, partial=False):
    sc, sup = scores(tags, w, pattern_tags)
    return [t for t in range(len(tags)) if (sup[t] > 0 if partial else sup[t] == w) and sc[t] < tau]


def accuracy(true, flags, L):
    true = sorted(set(true))
    if not true:
        return None
    return sum(any(abs(f - e) <= L for f in flags) for e in true) / len(true)


def type1(true, flags, L, T):
    eligible = [t for t in range(T) if all(abs(t - e) > L for e in true)]
    if not eligible:
        return None
    return sum(any(abs(f - t) <= L for f in flags) for t in eligible) / len(eligible)


def all_windows(pattern_tags, w):
    r = max(pattern_tags) + 1
    return {win for win in itertools.product(range(r), repeat=w) if cyclic_match(win, pattern_tags)}


def hard_tags(pattern_tags, T, phase=0):
    R = len(pattern_tags)
    return [pattern_tags[(phase + t) % R] for t in range(T)]

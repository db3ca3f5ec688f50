"""Closed-form detection bounds and empirical alignment estimates.

Bounds are returned raw. Values above 1 (or below 0) are legitimate outputs
of the formulas and are flagged by :func:`is_vacuous`, not clamped.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .detection import fast_detect
from .errors import BoundInapplicable, InsufficientProfile, InvalidArgument, InvalidInput
from .pattern import Pattern, valid_windows


@dataclass
class AlignmentProfile:
    """Window-match probability per window size."""

    mu: dict[int, float]
    regime: str = "watermarked"
    stderr: dict[int, float] = field(default_factory=dict)
    skipped: list[int] = field(default_factory=list)

    def __post_init__(self):
        for w, v in self.mu.items():
            if not 0.0 <= v <= 1.0:
                raise InvalidArgument(f"alignment probability for w={w} outside [0, 1]: {v}")
        if self.regime not in ("watermarked", "unwatermarked"):
            raise InvalidArgument(f"unknown regime {self.regime!r}")

    def __getitem__(self, w: int) -> float:
        try:
            return self.mu[w]
        except KeyError:
            raise InsufficientProfile(f"profile has no entry for window size {w}") from None

    @classmethod
    def from_csv(cls, path, regime: str = "watermarked") -> "AlignmentProfile":
        import csv

        mu = {}
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                mu[int(row["w"])] = float(row["mu"])
        return cls(mu, regime)


def is_vacuous(value: float, kind: str = "upper") -> bool:
    """An upper bound >= 1 or a lower bound <= 0 carries no information."""
    return value >= 1.0 if kind == "upper" else value <= 0.0


def delta_w(profile: AlignmentProfile | Mapping[int, float], w: int) -> float:
    """Sum of pairwise window co-alignment expectations over ``w`` windows.

    Windows ``k`` apart jointly align with probability ``mu[w+k]``, giving
    ``w*mu[w] + 2*sum_k (w-k)*mu[w+k]``.
    """
    mu = profile if isinstance(profile, AlignmentProfile) else AlignmentProfile(dict(profile))
    total = w * mu[w]
    for k in range(1, w):
        total += 2 * (w - k) * mu[w + k]
    return total


def false_alarm_bound(profile, w: int, tau_e: float) -> float:
    mu = profile if isinstance(profile, AlignmentProfile) else AlignmentProfile(dict(profile))
    mu_w = mu[w]
    if mu_w == 1.0 and tau_e < 1.0:
        return 0.0
    if tau_e >= mu_w:
        raise BoundInapplicable(f"tau_e={tau_e} must be below the alignment probability {mu_w}")
    d = delta_w(mu, w)
    return math.exp(-(w**2) * (mu_w - tau_e) ** 2 / (2 * d))


def miss_detection_bound(mu0_w: float, w: int, tau_e: float) -> float:
    if tau_e <= mu0_w:
        raise BoundInapplicable(f"tau_e={tau_e} must exceed the edited alignment probability {mu0_w}")
    return w * math.exp(-3 * (tau_e - mu0_w) ** 2 / (4 * (2 * mu0_w + tau_e)))


def watermark_power_bound(T: int, w: int, mu1_w: float, tau_d: float) -> float:
    """Lower bound on ``P(stat >= tau_d)`` for watermarked text."""
    if T < w:
        raise InvalidArgument(f"T={T} shorter than window {w}")
    if tau_d >= mu1_w:
        raise BoundInapplicable(f"tau_d={tau_d} must be below mu1={mu1_w}")
    N = T - w + 1
    return 1.0 - math.exp(-N * (mu1_w - tau_d) ** 2 / (2 * w * mu1_w))


def watermark_type1_bound(T: int, w: int, mu0_w: float, tau_d: float) -> float:
    """Upper bound on ``P(stat >= tau_d)`` for unwatermarked text."""
    if T < w:
        raise InvalidArgument(f"T={T} shorter than window {w}")
    if tau_d <= mu0_w:
        raise BoundInapplicable(f"tau_d={tau_d} must exceed mu0={mu0_w}")
    N = T - w + 1
    return w * math.exp(-N * 3 * (tau_d - mu0_w) ** 2 / (4 * w * (2 * mu0_w + tau_d)))


def token_adherence_lower_bound(delta: float, p: Sequence[float]) -> float:
    """Lower bound on the chance of drawing from the favoured half of an
    equally split vocabulary, given next-token distribution ``p``."""
    p = np.asarray(p, dtype=np.float64)
    if delta < 0:
        raise InvalidInput(f"delta must be non-negative, got {delta}")
    if p.ndim != 1 or p.size == 0 or np.any(p < 0) or not np.isclose(p.sum(), 1.0, atol=1e-9):
        raise InvalidInput("p must be a probability vector")
    if math.isinf(delta):
        return float(np.sum(p / (1.0 + p)))
    alpha = math.exp(delta)
    denom = 1.0 + 0.5 * (alpha - 1.0)
    z = 0.5 * (alpha - 1.0) / denom
    return float(0.5 * alpha / denom * np.sum(p / (1.0 + z * p)))


def robustness_bound(M: int, N: int, w: int, S_ins: int = 0, S_del: int = 0, S_rep: int = 0) -> float:
    """Worst-case watermark statistic after edits touching the given token counts."""
    if M > N or M < 0:
        raise InvalidInput(f"need 0 <= M <= N, got M={M}, N={N}")
    denom = N + S_ins - S_del
    if denom < 1:
        raise InvalidInput(f"edited text has no windows (N + S_ins - S_del = {denom})")
    return max(0, M - w * (S_ins + S_del + S_rep)) / denom


def estimate_alignment(corpus: Iterable[Sequence[int]], pattern: Pattern, sizes: Iterable[int],
                       regime: str = "watermarked") -> AlignmentProfile:
    """Pooled window-match frequency per size, with standard errors.

    The standard error treats each text's match rate as one draw, which
    stays honest about correlation between overlapping windows.
    """
    corpus = [np.asarray(c, dtype=np.int64) for c in corpus]
    if not corpus:
        raise InvalidArgument("empty corpus")
    mu, se, skipped = {}, {}, []
    for w in sorted(set(sizes)):
        windows = valid_windows(pattern, w)
        rates, matches, total = [], 0, 0
        for tags in corpus:
            if tags.size < w:
                continue
            res = fast_detect(tags, w, windows)
            rates.append(res.statistic)
            matches += res.match_count
            total += res.window_count
        if not total:
            skipped.append(w)
            continue
        mu[w] = matches / total
        se[w] = float(np.std(rates, ddof=1) / math.sqrt(len(rates))) if len(rates) > 1 else float("nan")
    return AlignmentProfile(mu, regime, se, skipped)

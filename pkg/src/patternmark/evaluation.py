"""Tolerance-window metrics, threshold calibration and corpus evaluation."""
from __future__ import annotations

import csv
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import TokenSequence
from .detection import detect_edits, fast_detect, flag_positions
from .errors import CalibrationError, InvalidArgument
from .generation import TokenModel
from .pattern import CyclicWindowSet, VocabPartition

log = logging.getLogger(__name__)


def _positions(values, T: int, name: str) -> np.ndarray:
    arr = np.unique(np.asarray(list(values), dtype=np.int64))
    if arr.size and (arr[0] < 0 or arr[-1] >= T):
        raise InvalidArgument(f"{name} positions must lie in [0, {T})")
    return arr


def detection_accuracy(true_positions, flagged, L: int, T_edited: int) -> float | None:
    """Fraction of true edit positions with a flag within ``L`` tokens.

    Returns ``None`` when there are no true edits.
    """
    true = _positions(true_positions, T_edited, "true")
    flags = _positions(flagged, T_edited, "flagged")
    if true.size == 0:
        return None
    if flags.size == 0:
        return 0.0
    idx = np.searchsorted(flags, true)
    right = flags[np.minimum(idx, flags.size - 1)]
    left = flags[np.maximum(idx - 1, 0)]
    dist = np.minimum(np.abs(right - true), np.abs(true - left))
    return float(np.mean(dist <= L))


def _false_alarm_mask(flags: np.ndarray, L: int, T: int) -> np.ndarray:
    # True where some flag lies in [t-L, t+L]
    counts = np.zeros(T + 1, dtype=np.int64)
    np.add.at(counts, flags + 1, 1)
    csum = np.cumsum(counts)
    t = np.arange(T)
    lo = np.maximum(t - L, 0)
    hi = np.minimum(t + L, T - 1)
    return (csum[hi + 1] - csum[lo]) > 0


def _eligible_mask(true: np.ndarray, L: int, T: int) -> np.ndarray:
    if true.size == 0:
        return np.ones(T, dtype=bool)
    return ~_false_alarm_mask(true, L, T)


def type1_counts(true_positions, flagged, L: int, T_edited: int) -> tuple[int, int]:
    """``(false_alarms, eligible)`` position counts for one text."""
    true = _positions(true_positions, T_edited, "true")
    flags = _positions(flagged, T_edited, "flagged")
    eligible = _eligible_mask(true, L, T_edited)
    if flags.size == 0:
        return 0, int(eligible.sum())
    hit = _false_alarm_mask(flags, L, T_edited)
    return int((eligible & hit).sum()), int(eligible.sum())


def type1_error_rate(true_positions, flagged, L: int, T_edited: int) -> float | None:
    """Share of positions at least ``L+1`` from every true edit that have a
    flag within ``L`` tokens. With no true edits every position counts.

    Returns ``None`` when no position is eligible.
    """
    fa, n = type1_counts(true_positions, flagged, L, T_edited)
    if n == 0:
        return None
    return fa / n


# calibration ---------------------------------------------------------------

def edit_threshold_grid(w: int) -> np.ndarray:
    """Multiples of ``1/w`` and their midpoints, strictly below 1."""
    return np.arange(2 * w, dtype=np.float64) / (2 * w)


def _neighbourhood_min(scores: np.ndarray, eligible: np.ndarray, L: int) -> np.ndarray:
    # min over flaggable scores in [t-L, t+L]; +inf when none is flaggable
    T = scores.size
    s = np.where(eligible, scores, np.inf)
    out = s.copy()
    for d in range(1, L + 1):
        out[d:] = np.minimum(out[d:], s[:-d] if d < T else s[:0])
        out[:-d] = np.minimum(out[:-d], s[d:] if d < T else s[:0])
    return out


def clean_type1_curve(clean_tags: Sequence, w: int, windows: CyclicWindowSet, L: int,
                      grid: np.ndarray, partial: bool = False) -> np.ndarray:
    """Macro-averaged clean-text false-alarm rate at each threshold in ``grid``."""
    rates = np.zeros(grid.size)
    n = 0
    for tags in clean_tags:
        res = fast_detect(tags, w, windows)
        flaggable = res.support > 0 if partial else res.support == w
        nb = _neighbourhood_min(res.scores, flaggable, L)
        rates += (nb[None, :] < grid[:, None]).mean(axis=1)
        n += 1
    if n == 0:
        raise CalibrationError("empty calibration corpus")
    return rates / n


def calibrate_edit_threshold(clean_corpus: Sequence, w: int, windows: CyclicWindowSet,
                             target_alpha: float, L: int, partial: bool = False) -> float:
    """Largest grid threshold whose clean-corpus false-alarm rate is at most
    ``target_alpha``."""
    if not 0.0 <= target_alpha < 1.0:
        raise InvalidArgument(f"target_alpha must lie in [0, 1), got {target_alpha}")
    corpus = list(clean_corpus)
    if not corpus:
        raise CalibrationError("empty calibration corpus")
    if target_alpha > 0 and len(corpus) < math.ceil(1.0 / target_alpha):
        raise CalibrationError(
            f"{len(corpus)} texts cannot resolve a false-alarm rate of {target_alpha}"
        )
    grid = edit_threshold_grid(w)
    rates = clean_type1_curve(corpus, w, windows, L, grid, partial)
    ok = np.flatnonzero(rates <= target_alpha)
    # rates are non-decreasing in the threshold, and the 0 threshold never fires
    return float(grid[ok[-1]])


def calibrate_watermark_threshold(unwatermarked_corpus: Sequence, w: int, windows: CyclicWindowSet,
                                  target_alpha: float) -> float:
    """Smallest threshold ``tau_d`` with ``P(stat >= tau_d) <= target_alpha``
    on unwatermarked text: the conservative upper ``target_alpha`` quantile."""
    if not 0.0 <= target_alpha <= 1.0:
        raise InvalidArgument(f"target_alpha must lie in [0, 1], got {target_alpha}")
    stats = np.sort(np.array([fast_detect(tags, w, windows).statistic for tags in unwatermarked_corpus]))
    if stats.size == 0:
        raise CalibrationError("empty calibration corpus")
    if 0 < target_alpha < 1 and stats.size < math.ceil(1.0 / target_alpha):
        raise CalibrationError(f"{stats.size} texts cannot resolve a Type-I rate of {target_alpha}")
    candidates = np.concatenate(([0.0], np.unique(stats)))
    # share of texts with stat >= c
    exceed = 1.0 - np.searchsorted(stats, candidates, side="left") / stats.size
    ok = np.flatnonzero(exceed <= target_alpha)
    if ok.size:
        return float(candidates[ok[0]])
    # every observed value is too common; step just above the maximum
    above = float(stats[-1]) + 1e-12
    if above > 1.0:
        raise CalibrationError(
            f"no threshold in [0, 1] keeps the Type-I rate at {target_alpha}: "
            f"{np.mean(stats >= stats[-1]):.3f} of texts score {stats[-1]}"
        )
    return above


def watermark_error_rates(corpus: Sequence, w: int, windows: CyclicWindowSet, tau_d: float) -> float:
    """Share of texts whose statistic falls below ``tau_d``; on watermarked
    text this is the Type-II error."""
    stats = np.array([fast_detect(tags, w, windows).statistic for tags in corpus])
    return float(np.mean(stats < tau_d))


# corpus evaluation ---------------------------------------------------------

@dataclass
class DetectorConfig:
    windows: CyclicWindowSet
    tau_e: float
    partial: bool = False
    fast: bool = True

    @property
    def w(self) -> int:
        return self.windows.w


@dataclass
class EvalReport:
    detection_accuracy: float | None
    type1_rate: float | None
    tolerance: int
    tau_e: float
    records: int = 0
    skipped: int = 0
    true_edits: int = 0
    detected: int = 0
    eligible_positions: int = 0
    false_alarms: int = 0
    per_cell: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        cells = {
            f"{kind}:{span}": v for (kind, span), v in sorted(self.per_cell.items())
        }
        return dict(
            detection_accuracy=self.detection_accuracy,
            type1_rate=self.type1_rate,
            tolerance=self.tolerance,
            tau_e=self.tau_e,
            counts=dict(
                records=self.records,
                skipped=self.skipped,
                true_edits=self.true_edits,
                detected=self.detected,
                eligible_positions=self.eligible_positions,
                false_alarms=self.false_alarms,
            ),
            per_cell=cells,
        )


def _record_tags(rec: TokenSequence, partition: VocabPartition | None):
    if rec.tags is not None:
        return rec.tags
    if partition is None:
        raise InvalidArgument(f"record {rec.id!r} has no tags and no partition was given")
    return partition.tags_of(rec.tokens)


def _owners(rec: TokenSequence) -> list[tuple[str, int]]:
    # (kind, span) for every true position, in order
    out = []
    for op in rec.meta.get("edits", []):
        n = 1 if op["kind"] == "delete" else op["span"]
        out.extend([(op["kind"], op["span"])] * n)
    return out


def evaluate_suite(records: Iterable[TokenSequence], detector: DetectorConfig, L: int,
                   partition: VocabPartition | None = None) -> EvalReport:
    """Macro-averaged accuracy and Type-I over an edited corpus.

    Each record needs ``meta["true_positions"]``; records without it are
    skipped and counted. Per-(kind, span) cells average the per-edit
    accuracy of every edit of that kind and span.
    """
    accs, t1s = [], []
    cell_acc: dict = defaultdict(list)
    cell_t1: dict = defaultdict(list)
    report = EvalReport(None, None, L, detector.tau_e)
    for rec in records:
        if "true_positions" not in rec.meta:
            report.skipped += 1
            continue
        tags = _record_tags(rec, partition)
        T = len(tags)
        er = detect_edits(tags, detector.w, detector.windows, detector.tau_e,
                          fast=detector.fast, partial=detector.partial)
        true = list(rec.meta["true_positions"])
        report.records += 1
        acc = detection_accuracy(true, er.flagged, L, T)
        fa, n_el = type1_counts(true, er.flagged, L, T)
        report.eligible_positions += n_el
        report.false_alarms += fa
        if n_el:
            t1s.append(fa / n_el)
        if acc is None:
            continue
        accs.append(acc)
        hits = _hits(true, er.flagged, L)
        report.true_edits += len(true)
        report.detected += sum(hits)
        owners = _owners(rec)
        if owners and len(owners) == len(true):
            groups: dict = defaultdict(list)
            for key, hit in zip(owners, hits):
                groups[key].append(hit)
            for key, hs in groups.items():
                cell_acc[key].append(float(np.mean(hs)))
                if n_el:
                    cell_t1[key].append(fa / n_el)
    if report.skipped:
        log.warning("skipped %d records without ground truth", report.skipped)
    report.detection_accuracy = float(np.mean(accs)) if accs else None
    report.type1_rate = float(np.mean(t1s)) if t1s else None
    report.per_cell = {
        key: dict(
            accuracy=float(np.mean(v)),
            type1_rate=float(np.mean(cell_t1[key])) if cell_t1[key] else None,
            edits=len(v),
        )
        for key, v in cell_acc.items()
    }
    return report


def _hits(true: Sequence[int], flagged: Sequence[int], L: int) -> list[bool]:
    flags = np.asarray(sorted(flagged), dtype=np.int64)
    if flags.size == 0:
        return [False] * len(true)
    t = np.asarray(true, dtype=np.int64)
    idx = np.searchsorted(flags, t)
    right = flags[np.minimum(idx, flags.size - 1)]
    left = flags[np.maximum(idx - 1, 0)]
    return (np.minimum(np.abs(right - t), np.abs(t - left)) <= L).tolist()


def write_matrix(path: str | Path, report: EvalReport, span_max: int | None = None) -> None:
    """Accuracy matrix: one row per edit kind, one column per span length."""
    spans = sorted({span for _, span in report.per_cell})
    if span_max:
        spans = list(range(1, span_max + 1))
    kinds = [k for k in ("insert", "replace", "delete") if any(c[0] == k for c in report.per_cell)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind"] + [str(s) for s in spans])
        for kind in kinds:
            row = [kind]
            for s in spans:
                cell = report.per_cell.get((kind, s))
                row.append("" if cell is None else f"{cell['accuracy']:.6f}")
            writer.writerow(row)


# perplexity ----------------------------------------------------------------

def toy_perplexity(model: TokenModel, seq: TokenSequence, prompt: Sequence[int] | None = None) -> float:
    """``exp`` of the mean token NLL under the unwatermarked model.

    The prompt (argument, else ``seq.meta["prompt"]``) is used as context but
    not scored. A zero-probability token gives ``inf``.
    """
    if prompt is None:
        prompt = seq.meta.get("prompt", [])
    context = list(prompt)
    nll = 0.0
    for tok in seq.tokens:
        logits = model.next_logits(context)
        if not 0 <= tok < logits.size:
            raise InvalidArgument(f"token {tok} outside model vocabulary")
        m = logits.max()
        lse = m + math.log(np.exp(logits - m).sum())
        lp = logits[tok] - lse
        if not np.isfinite(lp):
            return math.inf
        nll -= lp
        context.append(tok)
    return math.exp(nll / max(len(seq.tokens), 1))


def flags_for(tags, detector: DetectorConfig) -> list[int]:
    res = fast_detect(tags, detector.w, detector.windows)
    return flag_positions(res.scores, res.support, detector.w, detector.tau_e, detector.partial)

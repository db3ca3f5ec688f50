"""End-to-end experiment: generate, edit, calibrate, detect, evaluate, sweep."""
from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .config import ExperimentConfig, GenerationBlock, derive_seed, dump_config
from .corpus import TokenSequence, write_corpus
from .detection import fast_detect, flag_positions
from .edits import apply_edits, sample_edit_plan
from .errors import PatternmarkError
from .evaluation import (
    DetectorConfig,
    calibrate_edit_threshold,
    calibrate_watermark_threshold,
    evaluate_suite,
    toy_perplexity,
    watermark_error_rates,
    write_matrix,
)
from .generation import GenerationConfig, TokenModel, generate_watermarked, make_model
from .pattern import Pattern, VocabPartition, parse_pattern, partition_vocabulary, valid_windows

log = logging.getLogger(__name__)


class StageError(PatternmarkError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


def parallel_map(fn: Callable, items: Sequence, threads: int = 1) -> list:
    """Ordered map; results come back in input order whatever ``threads`` is."""
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


@dataclass
class Components:
    pattern: Pattern
    partition: VocabPartition
    model: TokenModel
    windows: object


def build_components(cfg: ExperimentConfig) -> Components:
    pattern = parse_pattern(cfg.pattern)
    partition = partition_vocabulary(cfg.partition.vocab_size, pattern.r, cfg.partition.key)
    model = make_model(
        cfg.model.kind,
        cfg.partition.vocab_size,
        derive_seed(cfg.seed, "model"),
        logit_scale=cfg.model.logit_scale,
        order=cfg.model.order,
        context_window=cfg.model.context_window,
    )
    return Components(pattern, partition, model, valid_windows(pattern, cfg.detection.window))


def generate_corpus(comp: Components, gen: GenerationBlock, n: int, master_seed: int, label: str,
                    delta: float | None = None, watermark: bool = True, threads: int = 1) -> list[TokenSequence]:
    """``n`` sequences, each seeded from ``(master_seed, label, index)``."""
    delta = gen.delta if delta is None else delta

    def one(i: int) -> TokenSequence:
        seed = derive_seed(master_seed, f"{label}/{i}")
        prompt = np.random.default_rng(seed ^ 0xA5A5).integers(0, comp.partition.vocab_size, gen.prompt_length)
        cfg = GenerationConfig(
            delta=delta if watermark else 0.0,
            hard=gen.hard and watermark,
            length=gen.length,
            sampling=gen.sampling,
            temperature=gen.temperature,
            top_p=gen.top_p,
            seed=seed,
            prompt=tuple(prompt.tolist()),
        )
        seq = generate_watermarked(comp.model, comp.pattern, comp.partition, cfg)
        seq.id = f"{label}-{i:05d}"
        if not watermark:
            seq.meta["delta"] = 0.0
            seq.meta.pop("pattern", None)
        return seq

    return parallel_map(one, list(range(n)), threads)


def edit_corpus(records: Sequence[TokenSequence], cfg: ExperimentConfig, partition: VocabPartition,
                label: str = "edit", threads: int = 1) -> list[TokenSequence]:
    eb = cfg.edit

    def one(i: int) -> TokenSequence:
        rec = records[i]
        plan = sample_edit_plan(len(rec.tokens), eb.num_edits, eb.span_max, eb.kinds,
                                partition.vocab_size, derive_seed(cfg.seed, f"{label}/{i}"),
                                span_min=eb.span_min)
        return apply_edits(rec, plan, partition).edited

    return parallel_map(one, list(range(len(records))), threads)


def record_tags(rec: TokenSequence, partition: VocabPartition | None) -> list[int]:
    if rec.tags is not None:
        return rec.tags
    if partition is None:
        raise PatternmarkError(f"record {rec.id!r} has no tags and no partition is configured")
    return partition.tags_of(rec.tokens).tolist()


TRACE_COLUMNS = ["position", "tag", "score", "support", "flagged", "is_true_edit"]


def emit_score_trace(rec: TokenSequence, detector: DetectorConfig,
                     partition: VocabPartition | None = None) -> list[dict]:
    """One row per token of ``rec`` with its edit score and verdict."""
    tags = record_tags(rec, partition)
    res = fast_detect(tags, detector.w, detector.windows)
    flagged = set(flag_positions(res.scores, res.support, detector.w, detector.tau_e, detector.partial))
    true = set(rec.meta.get("true_positions", []))
    letters = detector.windows.pattern.letters
    return [
        dict(
            position=t,
            tag=letters[tag],
            score=float(res.scores[t]),
            support=int(res.support[t]),
            flagged=int(t in flagged),
            is_true_edit=int(t in true),
        )
        for t, tag in enumerate(tags)
    ]


def write_rows(path: str | Path, rows: Iterable[dict], columns: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(row[k]) for k in columns})


def _fmt(v):
    if isinstance(v, float):
        return repr(v) if np.isfinite(v) else str(v)
    return v


def _stage(name: str):
    def wrap(fn):
        def inner(*args, **kwargs):
            t0 = time.perf_counter()
            try:
                out = fn(*args, **kwargs)
            except StageError:
                raise
            except Exception as exc:
                raise StageError(name, exc) from exc
            log.info("stage %s done in %.2fs", name, time.perf_counter() - t0)
            return out
        return inner
    return wrap


def delta_sweep(comp: Components, cfg: ExperimentConfig, deltas: Sequence[float], n: int,
                threads: int = 1) -> tuple[list[dict], float, float]:
    """Type-II error at a calibrated ``tau_d`` and toy perplexity for each delta.

    Returns the rows, the threshold, and the unwatermarked baseline perplexity.
    """
    w = cfg.detection.window
    unwm = generate_corpus(comp, cfg.generation, n, cfg.seed, "unwatermarked", watermark=False, threads=threads)
    unwm_tags = [r.tags for r in unwm]
    tau_d = cfg.detection.tau_d
    if tau_d is None:
        tau_d = calibrate_watermark_threshold(unwm_tags, w, comp.windows, cfg.evaluation.target_alpha)
    base_ppl = float(np.mean(parallel_map(lambda r: toy_perplexity(comp.model, r), unwm, threads)))
    rows = []
    for d in deltas:
        corpus = generate_corpus(comp, cfg.generation, n, cfg.seed, f"sweep/{d!r}", delta=d, threads=threads)
        stats = [fast_detect(r.tags, w, comp.windows).statistic for r in corpus]
        ppl = parallel_map(lambda r: toy_perplexity(comp.model, r), corpus, threads)
        rows.append(dict(
            delta=float(d),
            type2_error=watermark_error_rates([r.tags for r in corpus], w, comp.windows, tau_d),
            mean_statistic=float(np.mean(stats)),
            perplexity=float(np.mean(ppl)),
            baseline_perplexity=base_ppl,
            tau_d=float(tau_d),
        ))
    return rows, float(tau_d), base_ppl


SWEEP_COLUMNS = ["delta", "type2_error", "mean_statistic", "perplexity", "baseline_perplexity", "tau_d"]


def run_pipeline(cfg: ExperimentConfig, out_dir: str | Path | None = None, threads: int = 1) -> dict:
    """Run every stage and write artifacts into ``out_dir``.

    Files already written stay on disk if a later stage fails.
    """
    out = Path(out_dir or cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "config.json")

    comp = _stage("setup")(build_components)(cfg)
    comp.partition.to_csv(out / "partition.csv", comp.pattern)
    gb = cfg.generation

    corpus = _stage("gen")(generate_corpus)(comp, gb, gb.num_texts, cfg.seed, "gen", threads=threads)
    write_corpus(out / "corpus.jsonl", corpus)
    clean = _stage("gen")(generate_corpus)(comp, gb, gb.num_calibration, cfg.seed, "calib", threads=threads)
    write_corpus(out / "calibration.jsonl", clean)

    edited = _stage("edit")(edit_corpus)(corpus, cfg, comp.partition, threads=threads)
    write_corpus(out / "edited.jsonl", edited)

    w = cfg.detection.window
    L = cfg.evaluation.tolerance
    L_cal = L if cfg.evaluation.calibration_tolerance is None else cfg.evaluation.calibration_tolerance
    tau_e = cfg.detection.tau_e
    if tau_e is None:
        tau_e = _stage("calibrate")(calibrate_edit_threshold)(
            [r.tags for r in clean], w, comp.windows, cfg.evaluation.target_alpha, L_cal, cfg.detection.partial
        )
    detector = DetectorConfig(comp.windows, float(tau_e), cfg.detection.partial, cfg.detection.fast)

    report = _stage("eval")(evaluate_suite)(edited, detector, L, comp.partition)
    clean_report = _stage("eval")(evaluate_suite)(
        [_as_clean(r) for r in clean], detector, L, comp.partition
    )
    report_dict = report.to_dict()
    report_dict["clean_type1_rate"] = clean_report.type1_rate
    with open(out / "report.json", "w") as fh:
        json.dump(report_dict, fh, indent=2, sort_keys=True)
    write_matrix(out / "matrix.csv", report, cfg.edit.span_max)

    for rec in edited[: cfg.output.traces]:
        write_rows(out / f"trace-{rec.id}.csv", emit_score_trace(rec, detector, comp.partition), TRACE_COLUMNS)

    rows, tau_d, base_ppl = _stage("sweep")(delta_sweep)(comp, cfg, cfg.sweep.deltas, cfg.sweep.num_texts, threads)
    write_rows(out / "sweep.csv", rows, SWEEP_COLUMNS)

    summary = dict(
        pattern=cfg.pattern,
        window=w,
        tolerance=L,
        tau_e=float(tau_e),
        tau_d=tau_d,
        detection_accuracy=report.detection_accuracy,
        type1_rate=report.type1_rate,
        clean_type1_rate=clean_report.type1_rate,
        baseline_perplexity=base_ppl,
        sweep=rows,
        files=sorted(p.name for p in out.iterdir()) + ["summary.json"],
    )
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    return summary


def _as_clean(rec: TokenSequence) -> TokenSequence:
    meta = dict(rec.meta)
    meta["true_positions"] = []
    return TokenSequence(rec.tokens, rec.tags, meta, rec.id)

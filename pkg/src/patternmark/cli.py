"""Command-line front end.

Exit codes: 0 success, 2 config error, 3 data error, 4 calibration failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bounds as B
from .config import ExperimentConfig, load_config
from .corpus import TokenSequence, read_corpus, write_corpus
from .detection import detect_edits, detect_watermark
from .errors import (
    BoundInapplicable,
    CalibrationError,
    InvalidArgument,
    InvalidInput,
    InvalidToken,
    PatternmarkError,
)
from .evaluation import (
    DetectorConfig,
    calibrate_edit_threshold,
    calibrate_watermark_threshold,
    evaluate_suite,
    write_matrix,
)
from .pattern import parse_pattern, partition_vocabulary, valid_windows
from .pipeline import (
    TRACE_COLUMNS,
    StageError,
    build_components,
    edit_corpus,
    generate_corpus,
    record_tags,
    run_pipeline,
    write_rows,
)

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_CALIBRATION = 0, 2, 3, 4

log = logging.getLogger("patternmark")


def _global(parser: argparse.ArgumentParser, top: bool) -> None:
    # subcommands repeat the global flags without clobbering values given
    # before the subcommand name
    kw = {} if top else {"default": argparse.SUPPRESS}
    parser.add_argument("--config", help="YAML or JSON experiment config", **kw)
    parser.add_argument("--seed", type=int, help="override the master seed", **kw)
    parser.add_argument("--threads", type=int, **({"default": 1} if top else kw))
    parser.add_argument("--quiet", action="store_true", **kw)


def _detector_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pattern", help="tag pattern, e.g. AB or ACADBCBD")
    p.add_argument("--window", type=int, help="window length w")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    _global(common, top=False)
    parser = argparse.ArgumentParser(prog="patternmark", description="Pattern watermarking and edit localization.")
    _global(parser, top=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="generate a corpus")
    p.add_argument("--output", required=True)
    p.add_argument("--num-texts", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--hard", action="store_true")
    p.add_argument("--unwatermarked", action="store_true")
    p.add_argument("--label", default="gen")
    p.add_argument("--partition-csv", help="also export the vocabulary partition")

    p = sub.add_parser("edit", parents=[common], help="apply random edits to a corpus")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--kinds", help="comma-separated subset of insert,replace,delete")
    p.add_argument("--span-min", type=int)
    p.add_argument("--span-max", type=int)
    p.add_argument("--num-edits", type=int)

    p = sub.add_parser("detect", parents=[common], help="watermark and edit detection")
    _detector_args(p)
    p.add_argument("--input", required=True)
    p.add_argument("--tau-d", type=float, default=None)
    p.add_argument("--tau-e", type=float, default=None)
    p.add_argument("--report", help="JSON report path (stdout when omitted)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--fast", dest="fast", action="store_true", default=True)
    g.add_argument("--naive", dest="fast", action="store_false")
    p.add_argument("--partial", action="store_true", help="also flag boundary positions")
    p.add_argument("--emit-scores", help="per-token CSV of scores")

    p = sub.add_parser("calibrate", parents=[common], help="calibrate a threshold on clean text")
    _detector_args(p)
    p.add_argument("--clean", required=True)
    p.add_argument("--kind", choices=["edit", "watermark"], default="edit")
    p.add_argument("--target-alpha", type=float)
    p.add_argument("--tolerance", type=int)
    p.add_argument("--report")

    p = sub.add_parser("eval", parents=[common], help="evaluate edit detection")
    _detector_args(p)
    p.add_argument("--edited", required=True)
    p.add_argument("--clean", help="clean corpus for calibrating tau_e")
    p.add_argument("--tau-e", type=float)
    p.add_argument("--target-alpha", type=float)
    p.add_argument("--tolerance", type=int)
    p.add_argument("--calibration-tolerance", type=int)
    p.add_argument("--report")
    p.add_argument("--matrix")

    p = sub.add_parser("bounds", parents=[common], help="evaluate a closed-form bound")
    p.add_argument("--kind", required=True,
                   choices=["false-alarm", "miss", "wm-power", "wm-type1", "adherence", "robustness"])
    p.add_argument("--w", type=int)
    p.add_argument("--tau", type=float, help="tau_e or tau_d")
    p.add_argument("--mu", type=float, help="mu1 for the window size")
    p.add_argument("--mu0", type=float)
    p.add_argument("--T", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--probs", help="file of whitespace-separated probabilities")
    p.add_argument("--vocab-size", type=int, help="uniform distribution of this size")
    p.add_argument("--M", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--s-ins", type=int, default=0)
    p.add_argument("--s-del", type=int, default=0)
    p.add_argument("--s-rep", type=int, default=0)
    p.add_argument("--profile", help="CSV with columns w,mu")

    p = sub.add_parser("run", parents=[common], help="full pipeline")
    p.add_argument("--output-dir")
    return parser


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "pattern", None):
        cfg.pattern = args.pattern
    if getattr(args, "window", None):
        cfg.detection.window = args.window
    return cfg


def _emit(obj, path: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


def _tags_of(rec: TokenSequence, cfg: ExperimentConfig) -> list[int]:
    if rec.tags is not None:
        return rec.tags
    pattern = parse_pattern(cfg.pattern)
    part = partition_vocabulary(cfg.partition.vocab_size, pattern.r, cfg.partition.key)
    return record_tags(rec, part)


def cmd_gen(args) -> int:
    cfg = _config(args)
    if args.delta is not None:
        cfg.generation.delta = args.delta
    if args.hard:
        cfg.generation.hard = True
    n = args.num_texts or cfg.generation.num_texts
    comp = build_components(cfg)
    recs = generate_corpus(comp, cfg.generation, n, cfg.seed, args.label,
                           watermark=not args.unwatermarked, threads=args.threads)
    write_corpus(args.output, recs)
    if args.partition_csv:
        comp.partition.to_csv(args.partition_csv, comp.pattern)
    log.info("wrote %d records to %s", len(recs), args.output)
    return EXIT_OK


def cmd_edit(args) -> int:
    cfg = _config(args)
    if args.kinds:
        cfg.edit.kinds = [k.strip() for k in args.kinds.split(",") if k.strip()]
    if args.span_min is not None:
        cfg.edit.span_min = args.span_min
    if args.span_max is not None:
        cfg.edit.span_max = args.span_max
    if args.num_edits is not None:
        cfg.edit.num_edits = args.num_edits
    comp = build_components(cfg)
    recs = read_corpus(args.input)
    edited = edit_corpus(recs, cfg, comp.partition, threads=args.threads)
    write_corpus(args.output, edited)
    log.info("edited %d records into %s", len(edited), args.output)
    return EXIT_OK


def cmd_detect(args) -> int:
    cfg = _config(args)
    windows = valid_windows(parse_pattern(cfg.pattern), cfg.detection.window)
    w = windows.w
    tau_d = args.tau_d if args.tau_d is not None else cfg.detection.tau_d
    tau_e = args.tau_e if args.tau_e is not None else cfg.detection.tau_e
    results, trace_rows = [], []
    for rec in read_corpus(args.input):
        tags = _tags_of(rec, cfg)
        entry = {"id": rec.id}
        if tau_d is not None:
            entry["watermark"] = detect_watermark(tags, w, windows, tau_d, fast=args.fast).to_dict()
        else:
            entry["watermark"] = detect_watermark(tags, w, windows, 0.0, fast=args.fast).to_dict()
            entry["watermark"]["threshold"] = None
            entry["watermark"]["watermarked"] = None
        er = detect_edits(tags, w, windows, tau_e if tau_e is not None else 0.0,
                          fast=args.fast, partial=args.partial)
        entry["edits"] = {"threshold": tau_e, "edited": er.edited if tau_e is not None else None,
                          "flagged": er.flagged if tau_e is not None else []}
        results.append(entry)
        if args.emit_scores:
            flagged = set(er.flagged) if tau_e is not None else set()
            for t in range(len(tags)):
                trace_rows.append(dict(id=rec.id, position=t, score=float(er.scores[t]),
                                       support=int(er.support[t]), flagged=int(t in flagged)))
    _emit({"pattern": cfg.pattern, "window": w, "tau_d": tau_d, "tau_e": tau_e, "records": results}, args.report)
    if args.emit_scores:
        write_rows(args.emit_scores, trace_rows, ["id", "position", "score", "support", "flagged"])
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cfg = _config(args)
    windows = valid_windows(parse_pattern(cfg.pattern), cfg.detection.window)
    alpha = args.target_alpha if args.target_alpha is not None else cfg.evaluation.target_alpha
    L = args.tolerance if args.tolerance is not None else cfg.evaluation.tolerance
    tags = [_tags_of(r, cfg) for r in read_corpus(args.clean)]
    if args.kind == "edit":
        tau = calibrate_edit_threshold(tags, windows.w, windows, alpha, L, cfg.detection.partial)
        out = {"kind": "edit", "tau_e": tau, "target_alpha": alpha, "tolerance": L}
    else:
        tau = calibrate_watermark_threshold(tags, windows.w, windows, alpha)
        out = {"kind": "watermark", "tau_d": tau, "target_alpha": alpha}
    out.update(pattern=cfg.pattern, window=windows.w, texts=len(tags))
    _emit(out, args.report)
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _config(args)
    comp_pattern = parse_pattern(cfg.pattern)
    windows = valid_windows(comp_pattern, cfg.detection.window)
    alpha = args.target_alpha if args.target_alpha is not None else cfg.evaluation.target_alpha
    L = args.tolerance if args.tolerance is not None else cfg.evaluation.tolerance
    L_cal = args.calibration_tolerance
    if L_cal is None:
        L_cal = cfg.evaluation.calibration_tolerance if cfg.evaluation.calibration_tolerance is not None else L
    tau_e = args.tau_e if args.tau_e is not None else cfg.detection.tau_e
    clean_t1 = None
    if args.clean:
        clean = read_corpus(args.clean)
        clean_tags = [_tags_of(r, cfg) for r in clean]
        if tau_e is None:
            tau_e = calibrate_edit_threshold(clean_tags, windows.w, windows, alpha, L_cal, cfg.detection.partial)
        det = DetectorConfig(windows, tau_e, cfg.detection.partial)
        clean_recs = [TokenSequence(r.tokens, t, {"true_positions": []}, r.id) for r, t in zip(clean, clean_tags)]
        clean_t1 = evaluate_suite(clean_recs, det, L).type1_rate
    if tau_e is None:
        raise InvalidArgument("eval needs --tau-e or a --clean corpus to calibrate on")
    det = DetectorConfig(windows, tau_e, cfg.detection.partial, cfg.detection.fast)
    edited = read_corpus(args.edited)
    recs = [TokenSequence(r.tokens, _tags_of(r, cfg), r.meta, r.id) for r in edited]
    report = evaluate_suite(recs, det, L)
    out = report.to_dict()
    out["clean_type1_rate"] = clean_t1
    out.update(pattern=cfg.pattern, window=windows.w)
    _emit(out, args.report)
    if args.matrix:
        write_matrix(args.matrix, report, cfg.edit.span_max)
    return EXIT_OK


def _profile(args) -> B.AlignmentProfile:
    if args.profile:
        return B.AlignmentProfile.from_csv(args.profile)
    if args.mu is None:
        raise InvalidArgument("--profile or --mu is required")
    # a single --mu fills every size the formula needs
    return B.AlignmentProfile({k: args.mu for k in range(1, 2 * (args.w or 1))})


def _need(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise InvalidArgument("missing " + ", ".join("--" + m.replace("_", "-") for m in missing))


def cmd_bounds(args) -> int:
    kind = args.kind
    upper = True
    try:
        if kind == "false-alarm":
            _need(args, "w", "tau")
            value = B.false_alarm_bound(_profile(args), args.w, args.tau)
        elif kind == "miss":
            _need(args, "w", "tau", "mu0")
            value = B.miss_detection_bound(args.mu0, args.w, args.tau)
        elif kind == "wm-power":
            _need(args, "T", "w", "mu", "tau")
            value = B.watermark_power_bound(args.T, args.w, args.mu, args.tau)
            upper = False
        elif kind == "wm-type1":
            _need(args, "T", "w", "mu0", "tau")
            value = B.watermark_type1_bound(args.T, args.w, args.mu0, args.tau)
        elif kind == "adherence":
            _need(args, "delta")
            if args.probs:
                p = np.loadtxt(args.probs, dtype=np.float64).ravel()
            elif args.vocab_size:
                p = np.full(args.vocab_size, 1.0 / args.vocab_size)
            else:
                raise InvalidArgument("--probs or --vocab-size is required")
            value = B.token_adherence_lower_bound(args.delta, p)
            upper = False
        else:
            _need(args, "M", "N", "w")
            value = B.robustness_bound(args.M, args.N, args.w, args.s_ins, args.s_del, args.s_rep)
            upper = False
    except BoundInapplicable as exc:
        print(json.dumps({"kind": kind, "value": None, "status": "inapplicable", "reason": str(exc)}))
        return EXIT_OK
    status = "vacuous" if B.is_vacuous(value, "upper" if upper else "lower") else "ok"
    print(json.dumps({"kind": kind, "value": value, "status": status}))
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _config(args)
    summary = run_pipeline(cfg, args.output_dir, threads=args.threads)
    if not args.quiet:
        print(json.dumps({k: v for k, v in summary.items() if k != "sweep"}, indent=2, sort_keys=True))
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "edit": cmd_edit,
    "detect": cmd_detect,
    "calibrate": cmd_calibrate,
    "eval": cmd_eval,
    "bounds": cmd_bounds,
    "run": cmd_run,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except StageError as exc:
        log.error("%s", exc)
        return _code(exc.cause)
    except PatternmarkError as exc:
        log.error("%s", exc)
        return _code(exc)
    except (OSError, ValueError, KeyError) as exc:
        log.error("%s", exc)
        return EXIT_DATA


def _code(exc: Exception) -> int:
    if isinstance(exc, CalibrationError):
        return EXIT_CALIBRATION
    if isinstance(exc, (InvalidInput, InvalidToken, OSError, KeyError)):
        return EXIT_DATA
    if isinstance(exc, (InvalidArgument, BoundInapplicable)):
        return EXIT_CONFIG
    return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

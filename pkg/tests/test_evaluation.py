import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import soft_text
from patternmark.corpus import TokenSequence
from patternmark.edits import EditOp, EditPlan, apply_edits
from patternmark.errors import CalibrationError, InvalidArgument
from patternmark.evaluation import (
    DetectorConfig,
    calibrate_edit_threshold,
    calibrate_watermark_threshold,
    clean_type1_curve,
    detection_accuracy,
    edit_threshold_grid,
    evaluate_suite,
    flags_for,
    toy_perplexity,
    type1_counts,
    type1_error_rate,
    watermark_error_rates,
    write_matrix,
)
from patternmark.generation import UniformModel


def test_accuracy_examples():
    assert detection_accuracy([10, 20], [12], 2, 30) == 0.5
    assert detection_accuracy([10, 20], [12], 1, 30) == 0.0
    assert detection_accuracy([], [3], 1, 30) is None
    assert detection_accuracy([5], [], 3, 30) == 0.0
    with pytest.raises(InvalidArgument):
        detection_accuracy([30], [1], 0, 30)


def test_type1_examples():
    # eligible: positions more than 1 away from 5, i.e. all but 4,5,6 of 10
    assert type1_counts([5], [0], 1, 10) == (2, 7)
    assert type1_error_rate([5], [0], 1, 10) == pytest.approx(2 / 7)
    assert type1_error_rate([], [], 0, 4) == 0.0
    assert type1_error_rate([], [1], 0, 4) == 0.25
    assert type1_error_rate([0, 1, 2], [0], 1, 3) is None


@settings(max_examples=300, deadline=None)
@given(T=st.integers(1, 40), L=st.integers(0, 5), data=st.data())
def test_metrics_match_enumerators(T, L, data):
    true = data.draw(st.lists(st.integers(0, T - 1), max_size=6))
    flags = data.draw(st.lists(st.integers(0, T - 1), max_size=8))
    assert detection_accuracy(true, flags, L, T) == oracles.accuracy(true, flags, L)
    assert type1_error_rate(true, flags, L, T) == oracles.type1(sorted(set(true)), flags, L, T)


def test_grid():
    assert edit_threshold_grid(2).tolist() == [0, 0.25, 0.5, 0.75]
    assert edit_threshold_grid(4)[-1] == 7 / 8


def test_clean_curve_matches_direct_flagging(ab, ab_windows, rng):
    corpus = [np.where(rng.random(40) < 0.1, 1 - np.arange(40) % 2, np.arange(40) % 2) for _ in range(30)]
    grid = edit_threshold_grid(2)
    curve = clean_type1_curve(corpus, 2, ab_windows, 2, grid)
    for g, rate in zip(grid, curve):
        det = DetectorConfig(ab_windows, float(g))
        direct = np.mean([type1_error_rate([], flags_for(t, det), 2, 40) for t in corpus])
        assert rate == pytest.approx(direct)
    assert np.all(np.diff(curve) >= 0)


def test_calibrate_edit_threshold_picks_largest_ok(ab, ab_windows):
    clean = [[0, 1] * 10 for _ in range(9)] + [[0, 1, 1, 0] + [1, 0] * 8]
    # one text in ten has a break; the 0.75 threshold flags it
    assert calibrate_edit_threshold(clean, 2, ab_windows, 0.1, 0) == 0.75
    # the break scores 0.5, which only a threshold above 0.5 flags
    assert calibrate_edit_threshold(clean, 2, ab_windows, 0.0, 0) == 0.5


def test_calibration_errors(ab_windows):
    with pytest.raises(CalibrationError):
        calibrate_edit_threshold([], 2, ab_windows, 0.1, 0)
    with pytest.raises(CalibrationError):
        calibrate_edit_threshold([[0, 1]] * 5, 2, ab_windows, 0.1, 0)
    with pytest.raises(InvalidArgument):
        calibrate_edit_threshold([[0, 1]] * 5, 2, ab_windows, 1.0, 0)
    with pytest.raises(CalibrationError):
        calibrate_watermark_threshold([], 2, ab_windows, 0.1)
    with pytest.raises(CalibrationError):
        calibrate_watermark_threshold([[0, 1]] * 3, 2, ab_windows, 0.1)


def test_watermark_threshold_quantile(ab_windows, rng):
    corpus = [rng.integers(0, 2, 21) for _ in range(50)]
    stats = np.array([sum(a != b for a, b in zip(t, t[1:])) / 20 for t in corpus])
    tau = calibrate_watermark_threshold(corpus, 2, ab_windows, 0.2)
    assert np.mean(stats >= tau) <= 0.2
    # no smaller observed value keeps the rate
    assert all(np.mean(stats >= s) > 0.2 for s in stats[stats < tau])
    assert watermark_error_rates(corpus, 2, ab_windows, tau) == np.mean(stats < tau)


def test_watermark_threshold_steps_above_mass(ab_windows):
    corpus = [[0, 0, 0]] * 10
    assert calibrate_watermark_threshold(corpus, 2, ab_windows, 0.1) == 1e-12
    with pytest.raises(CalibrationError):
        calibrate_watermark_threshold([[0, 1, 0]] * 10, 2, ab_windows, 0.1)


def test_evaluate_suite_counts_and_cells(ab, ab_windows):
    base = TokenSequence(tokens=[0, 1] * 16, tags=[0, 1] * 16)
    recs = []
    for start in (5, 9, 13):
        log = apply_edits(base, EditPlan((EditOp("insert", start, 1, (0,)),)))
        log.edited.tags = log.edited.tokens
        recs.append(log.edited)
    recs.append(TokenSequence(tokens=[0, 1], tags=[0, 1]))
    rep = evaluate_suite(recs, DetectorConfig(ab_windows, 0.75), 1)
    assert rep.records == 3 and rep.skipped == 1
    assert rep.detection_accuracy == 1.0
    assert rep.true_edits == rep.detected == 3
    assert rep.per_cell[("insert", 1)]["edits"] == 3
    d = rep.to_dict()
    assert "insert:1" in d["per_cell"]
    assert d["counts"]["records"] == 3


def test_evaluate_suite_needs_tags(ab_windows):
    rec = TokenSequence(tokens=[0, 1, 0], meta={"true_positions": []})
    with pytest.raises(InvalidArgument):
        evaluate_suite([rec], DetectorConfig(ab_windows, 0.5), 1)


def test_write_matrix(tmp_path, ab_windows):
    rec = apply_edits(TokenSequence(tokens=[0, 1] * 10), EditPlan((EditOp("replace", 4, 2, (1, 0)),))).edited
    rec.tags = rec.tokens
    rep = evaluate_suite([rec], DetectorConfig(ab_windows, 0.75), 1)
    write_matrix(tmp_path / "m.csv", rep, 3)
    rows = list(csv.reader(open(tmp_path / "m.csv")))
    assert rows[0] == ["kind", "1", "2", "3"]
    assert rows[1][0] == "replace" and rows[1][1] == "" and rows[1][2] == "1.000000"


def test_toy_perplexity_uniform():
    seq = TokenSequence(tokens=[1, 2, 3], meta={"prompt": [0]})
    assert toy_perplexity(UniformModel(8), seq) == pytest.approx(8.0)
    with pytest.raises(InvalidArgument):
        toy_perplexity(UniformModel(2), seq)


def test_perplexity_rises_with_delta(small_world):
    _, _, model = small_world
    lo = np.mean([toy_perplexity(model, soft_text(small_world, s, delta=0.0)) for s in range(20)])
    hi = np.mean([toy_perplexity(model, soft_text(small_world, s, delta=8.0)) for s in range(20)])
    assert hi > lo
    assert math.isfinite(hi)

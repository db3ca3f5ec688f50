import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from patternmark.detection import (
    detect_edits,
    detect_statistic,
    detect_tokens,
    detect_watermark,
    edit_statistics,
    evenodd_groups,
    evenodd_indicator,
    fast_detect,
    flag_positions,
    naive_indicators,
    window_indicator,
)
from patternmark.errors import InvalidArgument
from patternmark.pattern import parse_pattern, partition_vocabulary, valid_windows


def test_worked_example(ab, ab_windows):
    tags = ab.encode("ABAABA")
    assert naive_indicators(tags, 2, ab_windows) == [1, 1, 0, 1, 1]
    assert detect_statistic(tags, 2, ab_windows) == pytest.approx(0.8)
    scores, support = edit_statistics(tags, 2, ab_windows)
    assert scores.tolist() == [1, 1, 0.5, 0.5, 1, 1]
    assert support.tolist() == [1, 2, 2, 2, 2, 1]
    rep = detect_edits(tags, 2, ab_windows, 0.75)
    assert rep.flagged == [2, 3]
    assert rep.edited


def test_single_indicator(ab, ab_windows):
    tags = ab.encode("AAB")
    assert window_indicator(tags, 0, 2, ab_windows) == 0
    assert window_indicator(tags, 1, 2, ab_windows) == 1
    with pytest.raises(InvalidArgument):
        window_indicator(tags, 2, 2, ab_windows)


def test_perfect_pattern_any_phase(acad):
    for w in (2, 4, 8, 11):
        ws = valid_windows(acad, w)
        for phase in range(acad.R):
            tags = oracles.hard_tags(acad.tags, 40, phase)
            res = fast_detect(tags, w, ws)
            assert res.statistic == 1.0
            assert detect_edits(tags, w, ws, 0.999).flagged == []


def test_length_and_window_errors(ab, ab_windows):
    with pytest.raises(InvalidArgument):
        detect_statistic([0], 2, ab_windows)
    with pytest.raises(InvalidArgument):
        fast_detect([0, 1, 0], 3, ab_windows)
    with pytest.raises(InvalidArgument):
        fast_detect([0, 1, 2], 2, ab_windows)


def test_threshold_validation(ab, ab_windows):
    with pytest.raises(InvalidArgument):
        detect_watermark([0, 1], 2, ab_windows, 1.5)
    with pytest.raises(InvalidArgument):
        detect_edits([0, 1], 2, ab_windows, -0.1)


def test_watermark_verdict_uses_greater_equal(ab, ab_windows):
    tags = ab.encode("ABAABA")
    assert detect_watermark(tags, 2, ab_windows, 0.8).watermarked
    assert not detect_watermark(tags, 2, ab_windows, 0.81).watermarked
    rep = detect_watermark(tags, 2, ab_windows, 0.5, fast=False)
    assert (rep.match_count, rep.window_count) == (4, 5)


def test_edit_flags_use_strict_less_than():
    scores = np.array([0.5, 0.5, 1.0])
    support = np.array([2, 2, 2])
    assert flag_positions(scores, support, 2, 0.5) == []
    assert flag_positions(scores, support, 2, 0.51) == [0, 1]


def test_partial_support(ab, ab_windows):
    tags = ab.encode("AABABA")
    assert detect_edits(tags, 2, ab_windows, 0.75).flagged == [1]
    assert detect_edits(tags, 2, ab_windows, 0.75, partial=True).flagged == [0, 1]


def test_report_dicts(ab, ab_windows):
    tags = ab.encode("ABAABA")
    d = detect_edits(tags, 2, ab_windows, 0.75).to_dict()
    assert d["flagged"] == [2, 3] and d["edited"] is True
    assert len(d["scores"]) == 6
    assert detect_watermark(tags, 2, ab_windows, 0.5).to_dict()["watermarked"] is True


def test_detect_tokens(ab):
    part = partition_vocabulary(10, 2, 1)
    a, b = part.subset(0)[0], part.subset(1)[0]
    rep = detect_tokens([a, b, a, b], part, valid_windows(ab, 2), 0.9)
    assert rep.statistic == 1.0 and rep.watermarked


def test_evenodd(acad):
    odd, even = evenodd_groups(parse_pattern("ABCD"))
    assert odd == {0, 2} and even == {1, 3}
    assert evenodd_indicator([0, 1], 0, odd, even) == 1
    assert evenodd_indicator([0, 2], 0, odd, even) == 0
    assert evenodd_groups(acad) == ({0, 3}, {1, 2})
    with pytest.raises(InvalidArgument):
        evenodd_groups(parse_pattern("ABA"))
    with pytest.raises(InvalidArgument):
        evenodd_indicator([0, 1], 0, {0}, {0, 1})
    with pytest.raises(InvalidArgument):
        evenodd_indicator([0, 5], 0, odd, even)


@settings(max_examples=150, deadline=None)
@given(
    spec=st.sampled_from(["AB", "ABC", "ACADBCBD", "AABB"]),
    w=st.integers(1, 9),
    data=st.data(),
)
def test_fast_naive_and_oracle_agree(spec, w, data):
    p = parse_pattern(spec)
    ws = valid_windows(p, w)
    tags = data.draw(st.lists(st.integers(0, p.r - 1), min_size=w, max_size=60))
    res = fast_detect(tags, w, ws)
    scores, support = edit_statistics(tags, w, ws)
    assert res.statistic == detect_statistic(tags, w, ws) == oracles.statistic(tags, w, p.tags)
    assert np.array_equal(res.scores, scores)
    assert np.array_equal(res.support, support)
    o_scores, o_sup = oracles.scores(tags, w, p.tags)
    assert support.tolist() == o_sup
    assert np.allclose(scores, o_scores, rtol=0, atol=1e-12)
    for tau in (0.25, 0.75, 1.0):
        assert detect_edits(tags, w, ws, tau).flagged == oracles.flagged(tags, w, p.tags, tau)

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from patternmark.corpus import TokenSequence
from patternmark.edits import (
    EditOp,
    EditPlan,
    aligned_deletion_plan,
    apply_edits,
    edit_tags,
    sample_edit_plan,
)
from patternmark.errors import InfeasiblePlan, InvalidArgument, InvalidPlan
from patternmark.pattern import parse_pattern, partition_vocabulary


def seq(n=10):
    return TokenSequence(tokens=list(range(100, 100 + n)), tags=[0] * n, meta={"seed": 1})


def test_insert_marks_payload():
    log = apply_edits(seq(), EditPlan((EditOp("insert", 3, 2, (7, 8)),)))
    assert log.edited.tokens[:6] == [100, 101, 102, 7, 8, 103]
    assert log.true_positions == [3, 4]
    assert log.edited.meta["true_positions"] == [3, 4]
    assert log.edited.meta["seed"] == 1
    assert log.edited.tags is None


def test_replace_marks_payload():
    log = apply_edits(seq(), EditPlan((EditOp("replace", 2, 3, (1, 2, 3)),)))
    assert log.edited.tokens == [100, 101, 1, 2, 3, 105, 106, 107, 108, 109]
    assert log.true_positions == [2, 3, 4]


def test_delete_marks_junction_and_keeps_tags():
    s = TokenSequence(tokens=list(range(8)), tags=[0, 1, 0, 1, 0, 1, 0, 1])
    log = apply_edits(s, EditPlan((EditOp("delete", 2, 3),)))
    assert log.edited.tokens == [0, 1, 5, 6, 7]
    assert log.true_positions == [2]
    assert log.edited.tags == [0, 1, 1, 0, 1]


def test_multiple_edits_shift_positions():
    plan = EditPlan((EditOp("delete", 5, 2), EditOp("insert", 1, 1, (9,))))
    assert [op.kind for op in plan.ops] == ["insert", "delete"]
    log = apply_edits(seq(), plan)
    assert log.edited.tokens == [100, 9, 101, 102, 103, 104, 107, 108, 109]
    assert log.true_positions == [1, 6]
    assert log.owners == [0, 1]


def test_partition_recomputes_tags():
    part = partition_vocabulary(200, 2, 0)
    log = apply_edits(seq(), EditPlan((EditOp("replace", 1, 1, (5,)),)), part)
    assert log.edited.tags == part.tags_of(log.edited.tokens).tolist()


@pytest.mark.parametrize("op", [
    EditOp("insert", 0, 1, (1,)),
    EditOp("replace", 8, 2, (1, 2)),
    EditOp("delete", 9, 1),
    EditOp("insert", 10, 1, (1,)),
])
def test_buffer_at_ends(op):
    with pytest.raises(InvalidPlan):
        apply_edits(seq(), EditPlan((op,)))


def test_adjacent_edits_rejected():
    plan = EditPlan((EditOp("replace", 2, 2, (1, 1)), EditOp("insert", 4, 1, (2,))))
    with pytest.raises(InvalidPlan):
        plan.validate(10)
    EditPlan((EditOp("replace", 2, 2, (1, 1)), EditOp("insert", 5, 1, (2,)))).validate(10)


def test_op_validation():
    with pytest.raises(InvalidPlan):
        EditOp("swap", 1, 1)
    with pytest.raises(InvalidPlan):
        EditOp("insert", 1, 2, (1,))
    with pytest.raises(InvalidPlan):
        EditOp("delete", 1, 1, (1,))
    with pytest.raises(InvalidPlan):
        EditOp("delete", 1, 0)


def test_sampler_deterministic_and_valid():
    a = sample_edit_plan(64, 3, 6, ["insert", "replace", "delete"], 100, seed=5)
    b = sample_edit_plan(64, 3, 6, ["insert", "replace", "delete"], 100, seed=5)
    assert a == b
    a.validate(64)
    assert len(sample_edit_plan(64, 0, 6, ["insert"], 10, 1)) == 0


def test_sampler_infeasible_and_bad_args():
    with pytest.raises(InfeasiblePlan):
        sample_edit_plan(5, 2, 3, ["replace"], 10, 0, span_min=3)
    with pytest.raises(InvalidArgument):
        sample_edit_plan(64, 1, 3, ["swap"], 10, 0)
    with pytest.raises(InvalidArgument):
        sample_edit_plan(64, 1, 0, ["insert"], 10, 0)
    with pytest.raises(InvalidArgument):
        sample_edit_plan(64, -1, 3, ["insert"], 10, 0)


def _feasible_layouts(T, footprints):
    # every start vector with the required buffers, by enumeration
    out = []
    for starts in itertools.product(range(1, T), repeat=len(footprints)):
        ok, prev = True, None
        for s, f in zip(starts, footprints):
            if s + f > T - 1 or (prev is not None and s < prev + 1):
                ok = False
                break
            prev = s + f
        if ok:
            out.append(starts)
    return out


def test_sampler_placement_is_uniform():
    T = 9
    counts = {}
    for seed in range(6000):
        plan = sample_edit_plan(T, 2, 2, ["replace"], 5, seed, span_min=2)
        key = tuple(op.start for op in plan.ops)
        counts[key] = counts.get(key, 0) + 1
    layouts = _feasible_layouts(T, [2, 2])
    assert set(counts) == set(layouts)
    freq = np.array([counts[k] for k in layouts]) / 6000
    assert np.all(np.abs(freq - 1 / len(layouts)) < 0.02)


@settings(max_examples=80, deadline=None)
@given(T=st.integers(8, 80), n=st.integers(1, 4), span_max=st.integers(1, 5), seed=st.integers(0, 2**32))
def test_sampled_plans_apply_cleanly(T, n, span_max, seed):
    try:
        plan = sample_edit_plan(T, n, span_max, ["insert", "replace", "delete"], 50, seed)
    except InfeasiblePlan:
        return
    log = apply_edits(TokenSequence(tokens=[0] * T), plan)
    ins = sum(op.span for op in plan.ops if op.kind == "insert")
    dele = sum(op.span for op in plan.ops if op.kind == "delete")
    assert len(log.edited.tokens) == T + ins - dele
    assert all(0 < p < len(log.edited.tokens) for p in log.true_positions)


def test_aligned_deletion_plan(ab):
    plan = aligned_deletion_plan(ab, 1, 2, 64)
    assert plan.ops[0].start == 33 and plan.ops[0].span == 2
    with pytest.raises(InvalidArgument):
        aligned_deletion_plan(ab, 2, 2, 64)
    with pytest.raises(InvalidPlan):
        aligned_deletion_plan(parse_pattern("ACADBCBD"), 7, 8, 16)


def test_edit_tags_with_payload_tags():
    tags, true = edit_tags([0, 1, 0, 1, 0], EditPlan((EditOp("insert", 2, 1, (99,)),)), {0: [1]})
    assert tags == [0, 1, 1, 0, 1, 0]
    assert true == [2]

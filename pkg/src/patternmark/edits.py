"""Post-generation edit simulation with ground-truth positions."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .corpus import TokenSequence
from .errors import InfeasiblePlan, InvalidArgument, InvalidPlan
from .pattern import Pattern, VocabPartition

KINDS = ("replace", "insert", "delete")


@dataclass(frozen=True)
class EditOp:
    kind: str
    start: int
    span: int
    payload: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidPlan(f"unknown edit kind {self.kind!r}")
        if self.span < 1:
            raise InvalidPlan(f"edit span must be >= 1, got {self.span}")
        object.__setattr__(self, "payload", tuple(int(t) for t in self.payload))
        if self.kind == "delete":
            if self.payload:
                raise InvalidPlan("delete ops carry no payload")
        elif len(self.payload) != self.span:
            raise InvalidPlan(f"{self.kind} payload has {len(self.payload)} tokens for span {self.span}")

    @property
    def stop(self) -> int:
        """End of the op's footprint in original coordinates.

        Replace and delete consume ``[start, start+span)``; an insert sits in
        the gap just before ``start`` and consumes nothing.
        """
        return self.start if self.kind == "insert" else self.start + self.span

    def to_dict(self) -> dict:
        return {"kind": self.kind, "start": self.start, "span": self.span}


@dataclass(frozen=True)
class EditPlan:
    ops: tuple[EditOp, ...] = ()
    seed: int | None = None

    def __post_init__(self):
        ops = tuple(sorted(self.ops, key=lambda op: (op.start, op.kind != "insert")))
        object.__setattr__(self, "ops", ops)

    def validate(self, T: int) -> None:
        # every op keeps one untouched token on each side
        prev_stop = None
        for op in self.ops:
            if op.start < 1 or op.stop > T - 1:
                raise InvalidPlan(f"{op.kind} at {op.start} (span {op.span}) out of bounds for length {T}")
            if prev_stop is not None and op.start < prev_stop + 1:
                raise InvalidPlan(f"{op.kind} at {op.start} overlaps the previous edit")
            prev_stop = op.stop

    def __len__(self) -> int:
        return len(self.ops)


@dataclass
class EditLog:
    edited: TokenSequence
    true_positions: list[int]
    plan: EditPlan
    # edit index each true position belongs to
    owners: list[int] = field(default_factory=list)


def _feasible_slack(T: int, footprints: Sequence[int]) -> int:
    return T - sum(footprints) - (len(footprints) + 1)


def sample_edit_plan(T: int, num_edits: int, span_max: int, kinds: Iterable[str], vocab_size: int,
                     seed: int, span_min: int = 1) -> EditPlan:
    """Draw a random plan of non-overlapping edits.

    Kinds and spans are uniform over their allowed sets. Given those, the
    layout is uniform over every placement that keeps at least one untouched
    token between edits and at both ends. Payload tokens are uniform over
    the vocabulary.
    """
    kinds = tuple(kinds)
    if not kinds or any(k not in KINDS for k in kinds):
        raise InvalidArgument(f"kinds must be a non-empty subset of {KINDS}, got {kinds}")
    if span_min < 1 or span_max < span_min:
        raise InvalidArgument(f"need 1 <= span_min <= span_max, got {span_min}, {span_max}")
    if num_edits < 0:
        raise InvalidArgument(f"num_edits must be non-negative, got {num_edits}")
    rng = np.random.default_rng(seed)
    if num_edits == 0:
        return EditPlan((), seed)
    chosen = [str(k) for k in rng.choice(kinds, size=num_edits)]
    spans = rng.integers(span_min, span_max + 1, size=num_edits).tolist()
    footprints = [0 if k == "insert" else s for k, s in zip(chosen, spans)]
    slack = _feasible_slack(T, footprints)
    if slack < 0:
        raise InfeasiblePlan(f"cannot place {num_edits} edits in a sequence of length {T}")
    # stars and bars: split the slack over num_edits + 1 gaps
    bars = np.sort(rng.choice(slack + num_edits, size=num_edits, replace=False))
    extra = np.diff(np.concatenate(([-1], bars, [slack + num_edits]))) - 1
    ops = []
    pos = 0
    for i, (kind, span) in enumerate(zip(chosen, spans)):
        pos += 1 + int(extra[i])
        payload = () if kind == "delete" else tuple(rng.integers(0, vocab_size, size=span).tolist())
        ops.append(EditOp(kind, pos, span, payload))
        pos += footprints[i]
    return EditPlan(tuple(ops), seed)


def apply_edits(seq: TokenSequence, plan: EditPlan, partition: VocabPartition | None = None) -> EditLog:
    """Apply ``plan`` and record where each edit lands in the edited text.

    Replacements and insertions mark every payload token. A deletion marks
    the junction: the first surviving token after the removed span.
    """
    T = len(seq.tokens)
    plan.validate(T)
    src = seq.tokens
    out: list[int] = []
    true_positions: list[int] = []
    owners: list[int] = []
    cursor = 0
    for i, op in enumerate(plan.ops):
        out.extend(src[cursor:op.start])
        if op.kind == "insert":
            true_positions.extend(range(len(out), len(out) + op.span))
            out.extend(op.payload)
            cursor = op.start
        elif op.kind == "replace":
            true_positions.extend(range(len(out), len(out) + op.span))
            out.extend(op.payload)
            cursor = op.start + op.span
        else:
            true_positions.append(len(out))
            cursor = op.start + op.span
        owners.extend([i] * (op.span if op.kind != "delete" else 1))
    out.extend(src[cursor:])

    tags = None
    if partition is not None:
        tags = partition.tags_of(out).tolist()
    elif seq.tags is not None and all(op.kind == "delete" for op in plan.ops):
        tags = _delete_tags(seq.tags, plan)
    meta = dict(seq.meta)
    meta["edits"] = [op.to_dict() for op in plan.ops]
    meta["true_positions"] = true_positions
    edited = TokenSequence(tokens=out, tags=tags, meta=meta, id=seq.id)
    return EditLog(edited=edited, true_positions=true_positions, plan=plan, owners=owners)


def _delete_tags(tags: list[int], plan: EditPlan) -> list[int]:
    keep = np.ones(len(tags), dtype=bool)
    for op in plan.ops:
        keep[op.start:op.start + op.span] = False
    return [t for t, k in zip(tags, keep) if k]


def aligned_deletion_plan(pattern: Pattern, offset: int, span: int, length: int) -> EditPlan:
    """One deletion starting at a position congruent to ``offset`` mod ``R``.

    The position is picked near the middle of a text of ``length`` tokens.
    """
    R = pattern.R
    if not 0 <= offset < R:
        raise InvalidArgument(f"offset must lie in [0, {R}), got {offset}")
    start = ((length // 2) // R) * R + offset
    if start < 1 or start + span > length - 1:
        raise InvalidPlan(f"text of length {length} too short for a span-{span} deletion at offset {offset}")
    return EditPlan((EditOp("delete", start, span),))


def edit_tags(tags: Sequence[int], plan: EditPlan, payload_tags: dict[int, Sequence[int]] | None = None):
    """Apply a plan directly to a tag sequence.

    ``payload_tags`` maps an op index to the tags of its payload; without it
    the plan's payload must already be expressed as tags.
    """
    seq = TokenSequence(tokens=list(tags))
    if payload_tags:
        ops = []
        for i, op in enumerate(plan.ops):
            if i in payload_tags:
                op = EditOp(op.kind, op.start, op.span, tuple(payload_tags[i]))
            ops.append(op)
        plan = EditPlan(tuple(ops), plan.seed)
    log = apply_edits(seq, plan)
    return log.edited.tokens, log.true_positions

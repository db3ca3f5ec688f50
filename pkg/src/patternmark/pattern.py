"""Tags, cyclic patterns, keyed vocabulary partitions and valid tag windows."""
from __future__ import annotations

import csv
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArgument, InvalidPattern, InvalidToken

LETTERS = string.ascii_uppercase


@dataclass(frozen=True)
class Pattern:
    """Cyclic tag sequence of period ``R`` over ``r`` distinct tags.

    ``tags`` holds integer tag ids, dense in ``0..r-1``. ``letters`` maps a
    tag id back to the letter it was parsed from.
    """

    tags: tuple[int, ...]
    letters: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if len(self.tags) == 0:
            raise InvalidPattern("pattern must contain at least one tag")
        present = set(self.tags)
        if present != set(range(len(present))):
            raise InvalidPattern(f"tag ids must be dense in 0..r-1, got {sorted(present)}")
        if not self.letters:
            object.__setattr__(self, "letters", tuple(LETTERS[i] for i in range(len(present))))

    @property
    def R(self) -> int:
        return len(self.tags)

    @property
    def r(self) -> int:
        return len(set(self.tags))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.tags, dtype=np.int64)

    def tag_at(self, position: int) -> int:
        return tag_of_position(position, self)

    def letter(self, tag: int) -> str:
        return self.letters[tag]

    def to_string(self) -> str:
        return "".join(self.letters[t] for t in self.tags)

    def encode(self, letters: str) -> list[int]:
        """Map a string of pattern letters to tag ids."""
        lookup = {c: i for i, c in enumerate(self.letters)}
        try:
            return [lookup[c] for c in letters]
        except KeyError as exc:
            raise InvalidPattern(f"letter {exc.args[0]!r} not in pattern alphabet") from None

    def __str__(self) -> str:
        return self.to_string()


def parse_pattern(spec: str) -> Pattern:
    """Parse a letter string such as ``"ACADBCBD"``.

    Letters are numbered by first occurrence, so ``"BA"`` and ``"AB"`` give
    the same tag sequence ``(0, 1)`` with different letter labels.
    """
    spec = spec.strip().upper()
    if not spec:
        raise InvalidPattern("empty pattern")
    if not all(c in LETTERS for c in spec):
        raise InvalidPattern(f"pattern letters must be A-Z, got {spec!r}")
    order: dict[str, int] = {}
    for c in spec:
        order.setdefault(c, len(order))
    letters = tuple(sorted(order, key=order.__getitem__))
    return Pattern(tags=tuple(order[c] for c in spec), letters=letters)


def tag_of_position(p: int, pattern: Pattern) -> int:
    if p < 0:
        raise InvalidArgument(f"position must be non-negative, got {p}")
    return pattern.tags[p % pattern.R]


@dataclass(frozen=True, eq=False)
class VocabPartition:
    """Keyed split of ``[0, vocab_size)`` into ``r`` disjoint tag subsets."""

    vocab_size: int
    r: int
    key: int
    assignment: np.ndarray

    def __post_init__(self):
        self.assignment.setflags(write=False)

    @property
    def subset_sizes(self) -> list[int]:
        return np.bincount(self.assignment, minlength=self.r).tolist()

    def subset(self, tag: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == tag)

    def mask(self, tag: int) -> np.ndarray:
        return self.assignment == tag

    def tags_of(self, tokens: Sequence[int] | np.ndarray) -> np.ndarray:
        """Vectorised :func:`tag_of_token` over a token sequence."""
        arr = np.asarray(tokens, dtype=np.int64)
        if arr.size and (arr.min() < 0 or arr.max() >= self.vocab_size):
            bad = arr[(arr < 0) | (arr >= self.vocab_size)][0]
            raise InvalidToken(f"token {int(bad)} outside vocabulary of size {self.vocab_size}")
        return self.assignment[arr].astype(np.int64)

    def __eq__(self, other):
        if not isinstance(other, VocabPartition):
            return NotImplemented
        return (
            self.vocab_size == other.vocab_size
            and self.r == other.r
            and self.key == other.key
            and np.array_equal(self.assignment, other.assignment)
        )

    def __hash__(self):
        return hash((self.vocab_size, self.r, self.key))

    def to_csv(self, path: str | Path, pattern: Pattern | None = None) -> None:
        """Write ``id,tag`` lines, tag as a letter."""
        letters = pattern.letters if pattern is not None else LETTERS
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "tag"])
            for token, tag in enumerate(self.assignment.tolist()):
                writer.writerow([token, letters[tag]])


def partition_vocabulary(vocab_size: int, r: int, key: int) -> VocabPartition:
    # seeded permutation, then contiguous near-equal blocks
    if r < 1:
        raise InvalidArgument(f"need at least one tag, got r={r}")
    if vocab_size < r:
        raise InvalidArgument(f"vocab_size {vocab_size} smaller than number of tags {r}")
    key = int(key) & 0xFFFFFFFFFFFFFFFF
    perm = np.random.default_rng(key).permutation(vocab_size)
    assignment = np.empty(vocab_size, dtype=np.int64)
    for tag, block in enumerate(np.array_split(perm, r)):
        assignment[block] = tag
    return VocabPartition(vocab_size=vocab_size, r=r, key=key, assignment=assignment)


def tag_of_token(token: int, partition: VocabPartition) -> int:
    if not 0 <= token < partition.vocab_size:
        raise InvalidToken(f"token {token} outside vocabulary of size {partition.vocab_size}")
    return int(partition.assignment[token])


def parse_key(value: int | str) -> int:
    """Accept a decimal or ``0x`` hex key, as found in config files."""
    if isinstance(value, str):
        value = int(value, 0)
    if not 0 <= value < 2**64:
        raise InvalidArgument(f"key must be an unsigned 64-bit integer, got {value}")
    return value


@dataclass(frozen=True)
class CyclicWindowSet:
    pattern: Pattern
    w: int
    windows: frozenset[tuple[int, ...]]

    def __contains__(self, window) -> bool:
        return tuple(window) in self.windows

    def __len__(self) -> int:
        return len(self.windows)

    def __iter__(self):
        return iter(sorted(self.windows))

    def as_strings(self) -> set[str]:
        return {"".join(self.pattern.letters[t] for t in win) for win in self.windows}


def valid_windows(pattern: Pattern, w: int) -> CyclicWindowSet:
    """All length-``w`` slices of the pattern repeated forever.

    A slice is determined by its start offset modulo ``R``, so there are at
    most ``R`` members whatever ``w`` is.
    """
    if w < 1:
        raise InvalidArgument(f"window length must be >= 1, got {w}")
    tags, R = pattern.tags, pattern.R
    windows = frozenset(tuple(tags[(v + i) % R] for i in range(w)) for v in range(R))
    return CyclicWindowSet(pattern=pattern, w=w, windows=windows)


def map_tags(tokens: Iterable[int], partition: VocabPartition) -> list[int]:
    return partition.tags_of(list(tokens)).tolist()

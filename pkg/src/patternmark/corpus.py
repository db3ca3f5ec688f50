"""Token sequences and the line-delimited JSON corpus format."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import InvalidInput


@dataclass
class TokenSequence:
    tokens: list[int]
    tags: list[int] | None = None
    meta: dict = field(default_factory=dict)
    id: str = ""

    def __post_init__(self):
        self.tokens = [int(t) for t in self.tokens]
        if self.tags is not None:
            self.tags = [int(t) for t in self.tags]
            if len(self.tags) != len(self.tokens):
                raise InvalidInput(
                    f"record {self.id!r}: {len(self.tags)} tags for {len(self.tokens)} tokens"
                )

    def __len__(self) -> int:
        return len(self.tokens)

    def to_record(self) -> dict:
        rec = {"id": self.id, "tokens": self.tokens}
        if self.tags is not None:
            rec["tags"] = self.tags
        rec["meta"] = self.meta
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "TokenSequence":
        if "tokens" not in rec:
            raise InvalidInput(f"record {rec.get('id')!r} has no 'tokens' field")
        return cls(tokens=rec["tokens"], tags=rec.get("tags"), meta=dict(rec.get("meta") or {}),
                   id=str(rec.get("id", "")))


def write_corpus(path: str | Path, records: Iterable[TokenSequence]) -> int:
    n = 0
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_record(), sort_keys=True, separators=(",", ":")))
            fh.write("\n")
            n += 1
    return n


def iter_corpus(path: str | Path) -> Iterator[TokenSequence]:
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InvalidInput(f"{path}:{lineno}: {exc}") from None
            yield TokenSequence.from_record(rec)


def read_corpus(path: str | Path) -> list[TokenSequence]:
    return list(iter_corpus(path))

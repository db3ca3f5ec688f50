"""Pattern-driven logit perturbation, watermarked sampling and toy token models."""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import _kernels
from .corpus import TokenSequence
from .errors import GenerationImpossible, InvalidArgument, InvalidInput
from .pattern import Pattern, VocabPartition


class TokenModel(ABC):
    """Next-token model: deterministic logits for a given context."""

    vocab_size: int

    @abstractmethod
    def next_logits(self, context: Sequence[int]) -> np.ndarray:
        ...

    def next_probs(self, context: Sequence[int]) -> np.ndarray:
        return softmax(self.next_logits(context))


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


def perturb_logits(logits, target, delta: float, hard: bool = False) -> np.ndarray:
    """Watermarked next-token distribution.

    ``target`` is a boolean mask (or index array) over the vocabulary marking
    the subset favoured at this step. Target logits get ``+delta``; with
    ``hard=True`` all mass is confined to the target subset.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise InvalidInput("logits must be finite")
    if delta < 0:
        raise InvalidArgument(f"delta must be non-negative, got {delta}")
    mask = _as_mask(target, logits.size)
    if hard:
        if not mask.any():
            raise GenerationImpossible("hard watermarking with an empty target subset")
        z = np.where(mask, logits, -np.inf)
    else:
        z = logits + delta * mask
    z = z - z.max()
    p = np.exp(z)
    return p / p.sum()


def _as_mask(target, size: int) -> np.ndarray:
    target = np.asarray(target)
    if target.dtype == np.bool_:
        if target.size != size:
            raise InvalidArgument(f"mask of size {target.size} for vocabulary of {size}")
        return target
    mask = np.zeros(size, dtype=np.bool_)
    mask[target.astype(np.int64)] = True
    return mask


@dataclass(frozen=True)
class GenerationConfig:
    delta: float = 5.8
    hard: bool = False
    length: int = 64
    sampling: str = "multinomial"
    temperature: float = 1.0
    top_p: float = 1.0
    seed: int = 0
    prompt: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if self.delta < 0:
            raise InvalidArgument(f"delta must be non-negative, got {self.delta}")
        if self.length < 1:
            raise InvalidArgument(f"length must be >= 1, got {self.length}")
        if self.sampling not in ("greedy", "multinomial"):
            raise InvalidArgument(f"sampling must be 'greedy' or 'multinomial', got {self.sampling!r}")
        if self.temperature <= 0:
            raise InvalidArgument(f"temperature must be positive, got {self.temperature}")
        if not 0 < self.top_p <= 1:
            raise InvalidArgument(f"top_p must lie in (0, 1], got {self.top_p}")
        object.__setattr__(self, "prompt", tuple(int(t) for t in self.prompt))


def _sample(p: np.ndarray, cfg: GenerationConfig, rng: np.random.Generator) -> int:
    if cfg.sampling == "greedy":
        return int(np.argmax(p))
    if cfg.temperature != 1.0:
        with np.errstate(divide="ignore"):
            logp = np.log(p) / cfg.temperature
        p = np.exp(logp - logp.max())
        p /= p.sum()
    if cfg.top_p < 1.0:
        order = np.argsort(-p, kind="stable")
        csum = np.cumsum(p[order])
        keep = int(np.searchsorted(csum, cfg.top_p)) + 1
        kept = order[:keep]
        q = np.zeros_like(p)
        q[kept] = p[kept]
        p = q / q.sum()
    cdf = np.cumsum(p)
    u = rng.random() * cdf[-1]
    return int(min(np.searchsorted(cdf, u, side="right"), p.size - 1))


def generate_watermarked(model: TokenModel, pattern: Pattern, partition: VocabPartition,
                         cfg: GenerationConfig) -> TokenSequence:
    """Sample ``cfg.length`` tokens, favouring the pattern's tag at each step.

    The first generated token takes the pattern's first tag; prompt tokens
    only serve as context.
    """
    if model.vocab_size != partition.vocab_size:
        raise InvalidArgument(
            f"model vocabulary {model.vocab_size} != partition vocabulary {partition.vocab_size}"
        )
    if pattern.r != partition.r:
        raise InvalidArgument(f"pattern has {pattern.r} tags, partition has {partition.r}")
    masks = [partition.mask(tag) for tag in range(partition.r)]
    if cfg.hard:
        for tag in set(pattern.tags):
            if not masks[tag].any():
                raise GenerationImpossible(f"tag {pattern.letter(tag)} has an empty vocabulary subset")
    rng = np.random.default_rng(cfg.seed)
    context = list(cfg.prompt)
    out: list[int] = []
    for t in range(cfg.length):
        mask = masks[pattern.tags[t % pattern.R]]
        p = perturb_logits(model.next_logits(context), mask, cfg.delta, hard=cfg.hard)
        tok = _sample(p, cfg, rng)
        out.append(tok)
        context.append(tok)
    tags = partition.assignment[np.asarray(out, dtype=np.int64)].tolist()
    meta = {"delta": "inf" if cfg.hard else cfg.delta, "seed": cfg.seed, "pattern": pattern.to_string()}
    if cfg.prompt:
        meta["prompt"] = list(cfg.prompt)
    return TokenSequence(tokens=out, tags=tags, meta=meta)


def generate_unwatermarked(model: TokenModel, partition: VocabPartition, cfg: GenerationConfig,
                           pattern: Pattern | None = None) -> TokenSequence:
    pattern = pattern or Pattern(tags=tuple(range(partition.r)))
    seq = generate_watermarked(model, pattern, partition, replace(cfg, delta=0.0, hard=False))
    seq.meta["delta"] = 0.0
    seq.meta.pop("pattern", None)
    return seq


# toy models ----------------------------------------------------------------

_MASK64 = 0xFFFFFFFFFFFFFFFF


def _splitmix(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class RandomLogitModel(TokenModel):
    """Logits drawn from a hash of the last ``context_window`` tokens.

    Each context suffix gets its own heavy-tailed (Student-t, 2 dof) logit
    vector, multiplied by ``logit_scale``; a small ``logit_scale``
    flattens the softmax. Logits are bit-identical across the numba and numpy
    backends.
    """

    def __init__(self, vocab_size: int, logit_scale: float, seed: int, context_window: int = 3):
        if vocab_size < 2:
            raise InvalidArgument(f"vocab_size must be >= 2, got {vocab_size}")
        if logit_scale <= 0:
            raise InvalidArgument(f"logit_scale must be positive, got {logit_scale}")
        self.vocab_size = vocab_size
        self.logit_scale = float(logit_scale)
        self.seed = int(seed) & _MASK64
        self.context_window = context_window

    def context_hash(self, context: Sequence[int]) -> int:
        suffix = list(context)[-self.context_window:] if self.context_window else []
        # length goes in first so short contexts never alias padded ones
        h = _splitmix(_splitmix(self.seed) ^ len(suffix))
        for tok in suffix:
            h = _splitmix(h ^ (int(tok) + 1))
        return h

    def next_logits(self, context: Sequence[int]) -> np.ndarray:
        z = _kernels.hash_noise(np.uint64(self.context_hash(context)), self.vocab_size)
        return z * self.logit_scale


def make_random_logit_model(vocab_size: int, logit_scale: float, seed: int,
                            context_window: int = 3) -> RandomLogitModel:
    return RandomLogitModel(vocab_size, logit_scale, seed, context_window)


class MarkovModel(TokenModel):
    """Order-1 or order-2 Markov chain with a seeded random transition table.

    Contexts shorter than the order are left-padded with token 0.
    """

    def __init__(self, vocab_size: int, order: int, seed: int, concentration: float = 1.0):
        if order not in (1, 2):
            raise InvalidArgument(f"order must be 1 or 2, got {order}")
        if vocab_size < 2:
            raise InvalidArgument(f"vocab_size must be >= 2, got {vocab_size}")
        self.vocab_size = vocab_size
        self.order = order
        rng = np.random.default_rng(seed)
        rows = vocab_size ** order
        table = rng.dirichlet(np.full(vocab_size, concentration), size=rows)
        table = np.maximum(table, 1e-12)
        self.table = table / table.sum(axis=1, keepdims=True)
        self._logits = np.log(self.table)

    def row_index(self, context: Sequence[int]) -> int:
        ctx = [0] * self.order + list(context)
        idx = 0
        for tok in ctx[-self.order:]:
            idx = idx * self.vocab_size + int(tok)
        return idx

    def next_logits(self, context: Sequence[int]) -> np.ndarray:
        return self._logits[self.row_index(context)].copy()

    def stationary(self) -> np.ndarray:
        """Stationary distribution over table rows (order-1 states only)."""
        if self.order != 1:
            raise InvalidArgument("stationary distribution implemented for order 1 only")
        vals, vecs = np.linalg.eig(self.table.T)
        v = np.real(vecs[:, np.argmin(np.abs(vals - 1.0))])
        return v / v.sum()


def make_markov_model(vocab_size: int, order: int, seed: int) -> MarkovModel:
    return MarkovModel(vocab_size, order, seed)


class UniformModel(TokenModel):
    def __init__(self, vocab_size: int):
        self.vocab_size = vocab_size

    def next_logits(self, context: Sequence[int]) -> np.ndarray:
        return np.zeros(self.vocab_size)


def make_model(kind: str, vocab_size: int, seed: int, **kwargs) -> TokenModel:
    """Build a toy model from config values."""
    if kind == "random":
        return make_random_logit_model(vocab_size, kwargs.get("logit_scale", 0.07), seed,
                                       kwargs.get("context_window", 3))
    if kind == "markov":
        return make_markov_model(vocab_size, kwargs.get("order", 1), seed)
    if kind == "uniform":
        return UniformModel(vocab_size)
    raise InvalidArgument(f"unknown model kind {kind!r}")

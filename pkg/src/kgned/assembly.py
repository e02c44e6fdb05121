"""Classifier input assembly.

Layout of one example, padded to ``max_seq_len``::

    [CLS] sentence .. [SEP] surface .. [SEP] triple1 .. [SEP] ... tripleK .. [SEP]

Segment ids: 0 for CLS + sentence + its SEP, 1 for the surface + its SEP,
then 2, 3, ... with every kept triple (and its SEP) in its own segment so
the model can tell triples apart at the embedding layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .context import ContextBundle, ContextConfig
from .tokenizer import CLS_ID, PAD_ID, SEP_ID, Vocab, tokenize


@dataclass(frozen=True)
class Sentence:
    text: str
    tokens: tuple[str, ...]

    @classmethod
    def from_text(cls, text: str) -> "Sentence":
        return cls(text=text, tokens=tuple(tokenize(text)))


@dataclass(frozen=True)
class Mention:
    """A character span of ``sentence`` naming an entity; end is exclusive."""

    sentence: Sentence
    start: int
    end: int
    surface: str

    def __post_init__(self):
        if not (0 <= self.start < self.end <= len(self.sentence.text)):
            raise ValueError(f"span [{self.start}, {self.end}) out of bounds")
        actual = self.sentence.text[self.start:self.end]
        if actual != self.surface:
            raise ValueError(f"surface {self.surface!r} does not match span text {actual!r}")

    @classmethod
    def make(cls, text: str, start: int, end: int) -> "Mention":
        sentence = Sentence.from_text(text)
        return cls(sentence=sentence, start=start, end=end, surface=text[start:end])


@dataclass(eq=False)
class AssembledInput:
    """Fixed-length arrays ready for the classifier."""

    token_ids: np.ndarray
    segment_ids: np.ndarray
    mask: np.ndarray
    length: int

    def same_as(self, other: "AssembledInput") -> bool:
        return (self.length == other.length
                and np.array_equal(self.token_ids, other.token_ids)
                and np.array_equal(self.segment_ids, other.segment_ids)
                and np.array_equal(self.mask, other.mask))


def assemble(vocab: Vocab, mention: Mention, bundle: ContextBundle,
             cfg: ContextConfig) -> AssembledInput:
    """Build the padded input for one (mention, candidate-context) pair.

    If the sentence and surface alone exceed ``cfg.max_seq_len`` the
    sentence is tail-truncated (and, in the pathological case of an
    oversized surface, the surface too); that situation implies a zero
    context budget, so the bundle must be empty.  A kept context that does
    not fit the remaining room is a caller error and raises ValueError.
    """
    limit = cfg.max_seq_len
    sent_tokens = list(mention.sentence.tokens) if cfg.include_sentence else []
    surf_tokens = tokenize(mention.surface)

    # CLS plus two SEPs are always present.
    fixed = 3 + len(surf_tokens)
    if fixed + len(sent_tokens) > limit:
        sent_tokens = sent_tokens[: max(0, limit - fixed)]
        if 3 + len(surf_tokens) > limit:
            surf_tokens = surf_tokens[: limit - 3]

    ids = [CLS_ID] + vocab.encode_tokens(sent_tokens) + [SEP_ID]
    segments = [0] * len(ids)
    ids.extend(vocab.encode_tokens(surf_tokens) + [SEP_ID])
    segments.extend([1] * (len(surf_tokens) + 1))
    for index, vt in enumerate(bundle.kept):
        triple_tokens = tokenize(vt.text)
        ids.extend(vocab.encode_tokens(triple_tokens) + [SEP_ID])
        segments.extend([2 + index] * (len(triple_tokens) + 1))
    if len(ids) > limit:
        raise ValueError(
            f"kept context overflows max_seq_len ({len(ids)} > {limit}); "
            "build the bundle against the budget this layout leaves")

    length = len(ids)
    pad = limit - length
    token_ids = np.asarray(ids + [PAD_ID] * pad, dtype=np.int64)
    segment_ids = np.asarray(segments + [0] * pad, dtype=np.int64)
    mask = np.asarray([1] * length + [0] * pad, dtype=np.int64)
    return AssembledInput(token_ids=token_ids, segment_ids=segment_ids,
                          mask=mask, length=length)


def context_budget(mention: Mention, cfg: ContextConfig) -> int:
    """Tokens left for context after CLS, sentence, surface, and two SEPs."""
    sent = len(mention.sentence.tokens) if cfg.include_sentence else 0
    surf = len(tokenize(mention.surface))
    return max(0, cfg.max_seq_len - (3 + sent + surf))

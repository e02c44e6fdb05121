"""Dataset representation and the pipeline from raw examples to labeled inputs.

Canonical example format is JSONL, one object per line::

    {"sentence": "...", "surface": "...", "span": [start, end],
     "gold": "Q1" | null, "candidates": ["Q1", "Q2"], "negatives": ["Q2"],
     "id": "m00001"}

``negatives`` and ``id`` are optional; ids default to ``m<line-index>``.
``gold`` may be null for out-of-KB mentions.  The gold entity is not
required to appear in ``candidates``; when it does not, the example is
flagged as gold-missing and can never be ranked correctly, which the
accuracy accounting keeps visible rather than patching.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .assembly import AssembledInput, Mention, assemble, context_budget
from .context import ContextBundle, ContextConfig, build_context
from .kg import TripleStore
from .tokenizer import Vocab


class DatasetError(ValueError):
    """A dataset file line that fails validation; carries the line number."""

    def __init__(self, path: str, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


@dataclass(frozen=True)
class MentionExample:
    id: str
    sentence: str
    surface: str
    start: int
    end: int
    gold: str | None
    candidates: tuple[str, ...]
    negatives: tuple[str, ...] = ()

    def to_mention(self) -> Mention:
        return Mention.make(self.sentence, self.start, self.end)

    @property
    def gold_missing(self) -> bool:
        """Gold entity known but absent from the candidate list."""
        return self.gold is not None and self.gold not in self.candidates

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "sentence": self.sentence,
            "surface": self.surface,
            "span": [self.start, self.end],
            "gold": self.gold,
            "candidates": list(self.candidates),
            "negatives": list(self.negatives),
        }


@dataclass(frozen=True)
class PairExample:
    """One (mention, candidate entity) classification instance."""

    example: MentionExample
    candidate: str
    label: int


def _parse_example(obj: dict, path: str, line_no: int, default_id: str) -> MentionExample:
    for required in ("sentence", "surface", "span", "gold", "candidates"):
        if required not in obj:
            raise DatasetError(path, line_no, f"missing field {required!r}")
    sentence = obj["sentence"]
    surface = obj["surface"]
    span = obj["span"]
    if (not isinstance(span, (list, tuple)) or len(span) != 2
            or not all(isinstance(v, int) for v in span)):
        raise DatasetError(path, line_no, f"span must be [start, end], got {span!r}")
    start, end = span
    if not (0 <= start < end <= len(sentence)):
        raise DatasetError(path, line_no, f"span [{start}, {end}) out of bounds")
    if sentence[start:end] != surface:
        raise DatasetError(
            path, line_no,
            f"span text {sentence[start:end]!r} does not match surface {surface!r}")
    gold = obj["gold"]
    if gold is not None and not isinstance(gold, str):
        raise DatasetError(path, line_no, f"gold must be a string or null, got {gold!r}")
    candidates = obj["candidates"]
    if not isinstance(candidates, list) or not all(isinstance(c, str) for c in candidates):
        raise DatasetError(path, line_no, "candidates must be a list of entity ids")
    negatives = obj.get("negatives", [])
    if not isinstance(negatives, list) or not all(isinstance(c, str) for c in negatives):
        raise DatasetError(path, line_no, "negatives must be a list of entity ids")
    return MentionExample(
        id=str(obj.get("id", default_id)),
        sentence=sentence, surface=surface, start=start, end=end,
        gold=gold, candidates=tuple(candidates), negatives=tuple(negatives))


def load_jsonl(path: str) -> list[MentionExample]:
    """Load examples in file order, validating every line."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(path, line_no, f"invalid JSON: {exc}") from exc
            out.append(_parse_example(obj, str(path), line_no, default_id=f"m{line_no:05d}"))
    return out


def save_jsonl(examples: list[MentionExample], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for example in examples:
            fh.write(json.dumps(example.to_json(), ensure_ascii=False) + "\n")


def to_pairs(examples: list[MentionExample]) -> list[PairExample]:
    """Expand examples into labeled pairs: one positive per non-null gold,
    one negative per explicit negative entity."""
    pairs = []
    for example in examples:
        if example.gold is not None:
            pairs.append(PairExample(example, example.gold, 1))
        for negative in example.negatives:
            pairs.append(PairExample(example, negative, 0))
    return pairs


@dataclass
class EncodingPipeline:
    """Everything needed to turn a (mention, candidate) into model input."""

    vocab: Vocab
    ctx: ContextConfig
    store: TripleStore | None = None

    def encode_pair(self, mention: Mention, candidate: str) -> AssembledInput:
        budget = context_budget(mention, self.ctx)
        if self.ctx.max_triples == 0:
            bundle = ContextBundle.empty()
        else:
            if self.store is None:
                raise ValueError("a triple store is required when max_triples > 0")
            bundle = build_context(self.store, candidate, self.ctx, budget)
        return assemble(self.vocab, mention, bundle, self.ctx)


def prepare(pair: PairExample, store: TripleStore | None, vocab: Vocab,
            ctx: ContextConfig) -> tuple[AssembledInput, int]:
    """Labeled model input for one pair: reserve room for the sentence and
    surface, hand the remaining token budget to the context builder, then
    lay everything out."""
    pipeline = EncodingPipeline(vocab=vocab, ctx=ctx, store=store)
    mention = pair.example.to_mention()
    return pipeline.encode_pair(mention, pair.candidate), pair.label


def wikidata_alignment(map_file: str) -> dict[str, str | None]:
    """Wikipedia-title to entity-id map from a two-column TSV.

    Titles with an empty id column are kept with value None; such entities
    simply get no KG context downstream.  Conflicting duplicate titles are
    an error.
    """
    mapping: dict[str, str | None] = {}
    with open(map_file, encoding="utf-8", newline="") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != 2:
                raise DatasetError(str(map_file), line_no,
                                   f"expected 2 tab-separated columns, got {len(cols)}")
            title, entity = cols
            value = entity or None
            if title in mapping and mapping[title] != value:
                raise DatasetError(str(map_file), line_no,
                                   f"conflicting ids for title {title!r}")
            mapping[title] = value
    return mapping

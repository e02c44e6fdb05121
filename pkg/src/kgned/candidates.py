"""Candidate generation from a label/alias index.

The selection operation is realized as plain label matching: ``exact``
returns entities whose normalized label or alias equals the normalized
surface form, ``contains`` returns entities with any key containing it as
a substring.  Datasets that ship precomputed candidate lists attach
through :func:`load_candidates` instead.
"""

from __future__ import annotations

from dataclasses import dataclass

from .assembly import Mention
from .kg import KIND_ALIAS, KIND_LABEL, TripleStore

INDEX_HEADER = "kgned-label-index\t1"

MODE_EXACT = "exact"
MODE_CONTAINS = "contains"


def normalize_label(text: str) -> str:
    """Lowercase and collapse all whitespace runs to single spaces."""
    return " ".join(text.lower().split())


class LabelIndex:
    def __init__(self) -> None:
        self._by_key: dict[str, set[str]] = {}

    def add(self, key: str, entity: str) -> None:
        key = normalize_label(key)
        if key:
            self._by_key.setdefault(key, set()).add(entity)

    def keys(self) -> list[str]:
        return list(self._by_key.keys())

    def entities_for(self, key: str) -> set[str]:
        return set(self._by_key.get(key, ()))

    def __len__(self) -> int:
        return len(self._by_key)


@dataclass
class CandidateSet:
    """Ordered candidate entities for one surface form.

    ``source`` is "index" for lookups against the label index and
    "precomputed" for lists loaded from a dataset file.  ``mention`` is
    None for ad-hoc surface lookups.
    """

    entities: tuple[str, ...]
    source: str
    mention: Mention | None = None

    def __len__(self) -> int:
        return len(self.entities)


def build_index(store: TripleStore) -> LabelIndex:
    """Index every primary label and alias under its normalized form."""
    index = LabelIndex()
    for record in store.all_label_records():
        if record.kind in (KIND_LABEL, KIND_ALIAS):
            index.add(record.text, record.subject)
    return index


def lookup(index: LabelIndex, surface: str, mode: str = MODE_EXACT) -> CandidateSet:
    """Entities matching ``surface`` in ascending-id order.

    An empty (or all-whitespace) surface matches nothing in either mode.
    """
    if mode not in (MODE_EXACT, MODE_CONTAINS):
        raise ValueError(f"mode must be 'exact' or 'contains', got {mode!r}")
    needle = normalize_label(surface)
    if not needle:
        return CandidateSet(entities=(), source="index")
    if mode == MODE_EXACT:
        found = index.entities_for(needle)
    else:
        found = set()
        for key in index.keys():
            if needle in key:
                found |= index.entities_for(key)
    return CandidateSet(entities=tuple(sorted(found)), source="index")


def save_index(index: LabelIndex, path: str) -> None:
    """Versioned text serialization; identical stores give identical bytes."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(INDEX_HEADER + "\n")
        for key in sorted(index.keys()):
            entities = ",".join(sorted(index.entities_for(key)))
            fh.write(f"{key}\t{entities}\n")


def load_index(path: str) -> LabelIndex:
    with open(path, encoding="utf-8", newline="") as fh:
        header = fh.readline().rstrip("\n")
        if header != INDEX_HEADER:
            raise ValueError(f"{path}: not a label index file (header {header!r})")
        index = LabelIndex()
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            key, _, entities = line.partition("\t")
            for entity in entities.split(","):
                if entity:
                    index.add(key, entity)
    return index


def load_candidates(path: str):
    """Per-mention precomputed candidate sets from a dataset JSONL file.

    Returns a dict keyed by example id; candidate order is file order with
    duplicates dropped keeping the first occurrence.
    """
    from .data import load_jsonl  # dataset schema lives with the loaders

    out: dict[str, CandidateSet] = {}
    for example in load_jsonl(path):
        seen = []
        for entity in example.candidates:
            if entity not in seen:
                seen.append(entity)
        out[example.id] = CandidateSet(entities=tuple(seen), source="precomputed",
                                       mention=example.to_mention())
    return out

"""Candidate generation: from a surface form to the entities it may mean.

The index maps every normalized label and alias to its entity ids.
``exact`` lookup answers "which entities are called precisely this",
``contains`` casts a wider net for partial surfaces.  Normalization is
deliberately mild (lowercase, collapse whitespace), so "NATIONAL
Highway" and "national   highway" hit the same key.
"""

import tempfile
from pathlib import Path

from kgned.candidates import build_index, load_index, lookup, save_index
from kgned.kg import TripleStore

store = TripleStore()
for entity, kind, text in [
    ("Q1967298", "label", "National Highway"),
    ("Q1967298", "alias", "Australian National Highway"),
    ("Q1967342", "label", "National Highway"),
    ("Q1967342", "alias", "NH network of India"),
    ("Q408", "label", "Australia"),
    ("Q408", "description", "country in Oceania"),  # descriptions are not indexed
]:
    store.add_label(entity, kind, text)

index = build_index(store)
print(f"{len(index)} keys in the index: {sorted(index.keys())}")

for surface in ("National Highway", "NATIONAL   highway", "Australia", "Oceania"):
    found = lookup(index, surface, mode="exact")
    print(f"exact   {surface!r:>24} -> {found.entities}")

for surface in ("national", "highway", "network"):
    found = lookup(index, surface, mode="contains")
    print(f"contains{surface!r:>24} -> {found.entities}")

# The index serializes to a small versioned text file.
with tempfile.TemporaryDirectory() as scratch:
    path = Path(scratch) / "index.tsv"
    save_index(index, str(path))
    print(f"\nsaved index ({path.stat().st_size} bytes):")
    for line in path.read_text(encoding="utf-8").splitlines():
        print(f"  {line}")
    reloaded = load_index(str(path))
    same = lookup(reloaded, "National Highway").entities == \
        lookup(index, "National Highway").entities
    print(f"reloaded index agrees: {same}")

"""From raw triples to a token-budgeted context string.

Two entities share the surface form "National Highway" and differ only in
their description triple.  This walks the store, the verbalizer, and the
greedy prefix selection that fits triples into a fixed token budget.
"""

from kgned.context import ContextConfig, build_context, verbalize
from kgned.kg import store_from_rows

TRIPLES = [
    ("Q1967298", "description", "highway system in Australia", 1, True),
    ("Q1967298", "label", "National Highway", 1, True),
    ("Q1967298", "dateModified", "31 May 2019", 1, True),
    ("Q1967298", "country", "Q408", 2, False),
    ("Q1967342", "description", "highway network in India", 1, True),
    ("Q1967342", "label", "National Highway", 1, True),
]

LABELS = [
    ("Q1967298", "label", "National Highway"),
    ("Q1967342", "label", "National Highway"),
    ("dateModified", "label", "date modified"),
    ("country", "label", "country"),
    ("Q408", "label", "Australia"),
]

store = store_from_rows(TRIPLES, LABELS)

print("== verbalized neighborhoods ==")
for entity in ("Q1967298", "Q1967342"):
    print(f"{entity}:")
    for triple in store.neighbors(entity, hops="1&2"):
        text = verbalize(store, triple).text
        print(f"  hop {triple.hop}: {text}")

# The context builder keeps the longest prefix of whole triples that fits
# the budget; one separator token is charged per kept triple.
print()
print("== budgeted selection for Q1967298 ==")
cfg = ContextConfig(hops="1&2", max_triples=15, max_seq_len=64)
for budget in (30, 16, 8, 3):
    bundle = build_context(store, "Q1967298", cfg, budget)
    kept = [vt.text for vt in bundle.kept]
    print(f"budget {budget:>2}: kept {len(kept)} of {len(bundle.full)}, "
          f"dropped {bundle.dropped_count}")
    for text in kept:
        print(f"    {text}")

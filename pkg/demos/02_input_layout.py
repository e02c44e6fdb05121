"""What the classifier actually sees.

One (sentence, surface form, candidate) pair becomes a single padded
token sequence: [CLS] sentence [SEP] surface [SEP] triple [SEP] ...
with a segment id per region so the model can tell the parts apart.
"""

from kgned.assembly import Mention, assemble, context_budget
from kgned.context import ContextConfig, build_context
from kgned.kg import store_from_rows
from kgned.tokenizer import build_vocab

store = store_from_rows(
    [("Q1967298", "description", "highway system in Australia", 1, True),
     ("Q1967298", "label", "National Highway", 1, True)],
    [("Q1967298", "label", "National Highway")],
)

sentence = "The National Highway connects Sydney and Canberra."
surface = "National Highway"
start = sentence.index(surface)
mention = Mention.make(sentence, start, start + len(surface))

cfg = ContextConfig(hops="1", max_triples=15, max_seq_len=48)
budget = context_budget(mention, cfg)
print(f"sentence tokens: {len(mention.sentence.tokens)}, "
      f"surface tokens: 2, context budget: {budget}")

bundle = build_context(store, "Q1967298", cfg, budget)

# The vocab would normally come from the training corpus; here it is
# built from exactly the strings this demo needs.
vocab = build_vocab([sentence, surface]
                    + [vt.text for vt in bundle.full])
inp = assemble(vocab, mention, bundle, cfg)

print(f"assembled length {inp.length} of max {cfg.max_seq_len}")
print()
print(f"{'pos':>3}  {'token id':>8}  {'segment':>7}  mask")
id_to_token = {0: "[PAD]", 1: "[UNK]", 2: "[CLS]", 3: "[SEP]"}
for i, token in enumerate(vocab.tokens):
    id_to_token[i + 4] = token
for pos in range(inp.length + 2):
    tok = int(inp.token_ids[pos])
    print(f"{pos:>3}  {tok:>8}  {int(inp.segment_ids[pos]):>7}  "
          f"{int(inp.mask[pos])}   {id_to_token[tok]}")

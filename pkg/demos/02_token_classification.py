"""Three-way token classification and the adaptive mask cache.

For a node sitting at the top of a matching stack, most vocabulary tokens
are decidable without looking deeper: they either stay inside the node's
rule (accepted/rejected up front) or they complete the rule and pop, in
which case only the full stack can decide.  Context expansion then prunes
most of those popping tokens by asking what may legally follow the rule.
"""

from grammask import parse_grammar
from grammask.cache import (
    build_context_expansion,
    build_mask_cache,
    classify_token,
    refine_dependent,
)
from grammask.grammars import ARRAY_STRING
from grammask.pda import build_pda, merge_nodes
from grammask.vocab import build_sorted_index, vocab_from_tokens

p = merge_nodes(build_pda(parse_grammar(ARRAY_STRING)))

# the node inside a string literal: the wildcard self-loop
interior = next(
    n for n in range(p.node_count)
    for ranges, dst in p.char_out[n]
    if dst == n and len(ranges) > 1
)
print("string-interior node:", interior)

# word-like tokens ride the self-loop: accepted no matter the stack below
print("  ab   ->", classify_token(p, interior, b"ab").value)
# tokens that close the quote pop out of the rule: stack-dependent
print('  "]   ->', classify_token(p, interior, b'"]').value)
# any pop attempt forces dependence, even if every stack would accept
print('  ""   ->', classify_token(p, interior, b'""').value)

# what can follow a completed string here? commas, brackets, end of input
ctx = build_context_expansion(p)
sid = p.rule_named("string").rid
for tail in (b"", b",", b"]", b"x", b"],"):
    print(f"  follow(string) allows {tail!r:6} -> {ctx.allows(sid, tail)}")

# refinement: a closing quote followed by junk can never survive
print('  refine "x ->', refine_dependent(p, ctx, interior, b'"x').value)
print('  refine ", ->', refine_dependent(p, ctx, interior, b'",').value)

# build the full cache over a toy vocabulary and look at the bookkeeping
tokens = [bytes([b]) for b in b'[]",ab\\'] + [b"ab", b'"]', b'",', b"word", b"]]"]
vocab = vocab_from_tokens(tokens + [b"<eos>"], eos_id=len(tokens), special=[len(tokens)])
idx = build_sorted_index(vocab)
cache = build_mask_cache(p, vocab, idx, use_ctx_expansion=True)
st = cache.stats
print(f"\ncache: {st.entry_count} entries over {vocab.size} tokens")
print(f"dependents before expansion: {st.dependent_before_total}, after: {st.dependent_total}")
print(f"storage variants: {st.variant_counts}")
print(f"bytes examined per entry: {st.bytes_examined_per_entry} "
      f"(sum of lengths {sum(idx.lengths)} minus shared prefixes {sum(idx.lcp)})")
for node in sorted(cache.entries):
    acc, rej, dep = st.per_node[node]
    print(f"  node {node:2}  accepted {acc:2}  rejected {rej:2}  dependent {dep}  "
          f"[{cache.variant_name(node)}]")

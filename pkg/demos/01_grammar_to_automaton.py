"""From grammar text to an optimized byte-level automaton.

Walks the front half of the pipeline: parse, normalize, build, inline,
merge — and shows why parallel stacks exist and how merging removes them.
"""

from grammask import parse_grammar, normalize_grammar, pretty_print
from grammask.grammars import ARRAY_STRING
from grammask.pda import (
    build_pda,
    inline_rules,
    merge_nodes,
    oracle_accepts,
    oracle_partial_states,
    to_dot,
)

# The array/string grammar: arrays of strings (or nested arrays), written
# in plain BNF so the automaton genuinely needs parallel stacks.
print(ARRAY_STRING)

g = parse_grammar(ARRAY_STRING)
print("rules:", g.rule_names(), "| root:", g.root)

# normalize resolves the negated class into explicit byte ranges
print("\nnormalized form:")
print(pretty_print(normalize_grammar(g)))

# Thompson-style construction: one small automaton per rule
p = build_pda(g)
print(f"raw automaton: {p.node_count} nodes, {p.edge_count} edges")

# membership through the naive set-of-stacks interpreter (the oracle)
for text in (b'["a"]', b'[["x"],""]', b'["a"', b"[x"):
    print(f"  accepts {text!r:14}: {oracle_accepts(p, text)}")

# after consuming ["a the matcher cannot know whether the string is the
# last element or will be followed by a comma: two stacks coexist
stacks = oracle_partial_states(p, b'["a')
print(f'\nstacks alive after ["a on the raw automaton: {len(stacks)}')
for st in sorted(stacks):
    print("   ", st)

# node merging removes the shared-prefix ambiguity entirely
merged = merge_nodes(p)
print(f"merged automaton: {merged.node_count} nodes, {merged.edge_count} edges")
merged_stacks = len(oracle_partial_states(merged, b'["a'))
print(f'stacks alive after ["a once merged: {merged_stacks}')

# inlining substitutes small leaf rules into their call sites
inlined = inline_rules(merged)
print(f"inlined automaton: {inlined.node_count} nodes")

# render for graphviz: python demos/01_grammar_to_automaton.py > pda.dot
print("\nfirst lines of the DOT dump:")
print("\n".join(to_dot(merged).splitlines()[:6]))

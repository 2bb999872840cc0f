import random

import pytest

from grammask.grammar import parse_grammar
from grammask.grammars import ARRAY_STRING
from grammask.pda import (
    CHAR,
    EPS,
    RULE,
    StateLimitError,
    build_pda,
    inline_rules,
    merge_nodes,
    oracle_accepts,
    oracle_partial_states,
    oracle_step_states,
    reachable_top_nodes,
    to_dot,
)

from conftest import FIVE_GRAMMARS, PROBE_ALPHABETS, joint_acceptance_scan


def test_single_literal_two_nodes_one_edge():
    p = build_pda(parse_grammar('root ::= "a"'))
    assert p.node_count == 2
    assert p.edge_count == 1
    assert p.edges[0].kind == CHAR
    assert p.edges[0].data == ((0x61, 0x61),)


def test_choice_start_has_epsilon_branches():
    p = build_pda(parse_grammar('root ::= "a" | "b"'))
    start = p.start_node()
    assert len(p.eps_out[start]) == 2
    assert not p.char_out[start]


def test_fig2_string_rule_has_self_loop():
    p = build_pda(parse_grammar(ARRAY_STRING))
    string = p.rule_named("string")
    loops = [
        e for e in p.edges
        if e.kind == CHAR and e.src == e.dst and p.node_rule[e.src] == string.rid
    ]
    assert len(loops) == 1
    assert loops[0].data == ((0x00, 0x21), (0x23, 0x5B), (0x5D, 0xFF))


def test_fig2_two_parallel_stacks():
    p = build_pda(parse_grammar(ARRAY_STRING))
    states = oracle_partial_states(p, b'["a')
    assert len(states) == 2


def test_fig2_membership():
    p = build_pda(parse_grammar(ARRAY_STRING))
    assert oracle_accepts(p, b'["a"]')
    assert oracle_accepts(p, b'[]')
    assert oracle_accepts(p, b'"ok"')
    assert oracle_accepts(p, b'[["x"],""]')
    assert not oracle_accepts(p, b'["a"')
    assert oracle_partial_states(p, b"[x") == frozenset()


def test_empty_string_rule():
    p = build_pda(parse_grammar('root ::= ""'))
    assert oracle_accepts(p, b"")
    assert not oracle_accepts(p, b"a")


def test_initial_closure_nonempty():
    p = build_pda(parse_grammar(ARRAY_STRING))
    assert len(oracle_partial_states(p, b"")) >= 1


def test_prefix_compositionality():
    p = build_pda(parse_grammar(ARRAY_STRING))
    rng = random.Random(5)
    samples = [b'["a","bc"]', b'[["x"],["y","z"]]', b'"hello"', b"[[]]"]
    for s in samples:
        for _ in range(4):
            cut = rng.randrange(len(s) + 1)
            a, b = s[:cut], s[cut:]
            direct = oracle_partial_states(p, s)
            staged = oracle_step_states(p, oracle_partial_states(p, a), b)
            assert direct == staged


def test_state_cap_guard():
    # left recursion is productive (so it validates) but the silent-move
    # closure pushes without bound; the cap must turn that into an error
    p = build_pda(parse_grammar('root ::= root "a" | "b"'))
    with pytest.raises(StateLimitError):
        oracle_partial_states(p, b"b", cap=64)


# -- inlining ---------------------------------------------------------------


def test_inline_substitutes_fragment_rule():
    g = parse_grammar("root ::= digit digit\ndigit ::= [0-9]")
    p = inline_rules(build_pda(g))
    digit_rid = p.rule_named("digit").rid
    assert not any(e.kind == RULE and e.data == digit_rid for e in p.edges)
    joint_acceptance_scan([build_pda(g), p], b"05a", 3)


def test_inline_keeps_recursive_rules():
    g = parse_grammar(ARRAY_STRING)
    p0 = build_pda(g)
    p1 = inline_rules(p0)
    array_rid = p1.rule_named("array").rid
    assert any(e.kind == RULE and e.data == array_rid for e in p1.edges) or any(
        e.kind == RULE and p1.node_rule[e.src] == array_rid for e in p1.edges
    )


def test_inline_size_guard():
    g = parse_grammar('root ::= big big\nbig ::= "0123456789abcdef0123456789"')
    p0 = build_pda(g)
    p1 = inline_rules(p0, max_rule_size=8, max_result_size=512)
    big_rid = p1.rule_named("big").rid
    assert any(e.kind == RULE and e.data == big_rid for e in p1.edges)
    assert p1.node_count == p0.node_count


def test_inline_result_size_guard():
    g = parse_grammar("root ::= d d d d d d d d\nd ::= [0-9]")
    p1 = inline_rules(build_pda(g), max_rule_size=16, max_result_size=10)
    d_rid = p1.rule_named("d").rid
    assert any(e.kind == RULE and e.data == d_rid for e in p1.edges)


# -- node merging ------------------------------------------------------------


def test_merge_non_increasing_and_idempotent():
    for text in FIVE_GRAMMARS.values():
        p0 = build_pda(parse_grammar(text))
        p1 = merge_nodes(p0)
        assert p1.node_count <= p0.node_count
        assert p1.edge_count <= p0.edge_count
        p2 = merge_nodes(p1)
        assert (p2.node_count, p2.edge_count) == (p1.node_count, p1.edge_count)


def test_merge_removes_epsilons():
    p = merge_nodes(build_pda(parse_grammar('root ::= "a" | "b" | "cd"')))
    assert not any(e.kind == EPS for e in p.edges)
    assert oracle_accepts(p, b"a") and oracle_accepts(p, b"cd")


def test_merge_same_label_siblings():
    # two alternatives sharing the first byte: the raw automaton forks on
    # 'a' into two single-inbound targets that merging must unify
    p0 = merge_nodes(build_pda(parse_grammar('root ::= "ax" | "ay"')))
    assert len(oracle_partial_states(p0, b"a")) == 1


def test_merge_reduces_fig2_ambiguity():
    raw = build_pda(parse_grammar(ARRAY_STRING))
    merged = merge_nodes(raw)
    assert len(oracle_partial_states(raw, b'["a')) == 2
    assert len(oracle_partial_states(merged, b'["a')) == 1


def test_merge_minimal_automaton_unchanged():
    p0 = build_pda(parse_grammar('root ::= "a"'))
    p1 = merge_nodes(p0)
    assert (p1.node_count, p1.edge_count) == (2, 1)


def test_merge_preserves_acceptance_at_finals():
    # s final, t not final, s has other out-edges: the epsilon must stay
    p0 = build_pda(parse_grammar('root ::= "a" | "a" "b"'))
    p1 = merge_nodes(p0)
    for s, want in [(b"a", True), (b"ab", True), (b"b", False), (b"", False)]:
        assert oracle_accepts(p1, s) == want


@pytest.mark.parametrize("name", sorted(FIVE_GRAMMARS))
def test_optimization_language_preservation_small(name):
    g = parse_grammar(FIVE_GRAMMARS[name])
    p0 = build_pda(g)
    variants = [p0, inline_rules(p0), merge_nodes(p0), merge_nodes(inline_rules(merge_nodes(p0)))]
    joint_acceptance_scan(variants, PROBE_ALPHABETS[name], 6)


def test_inline_terminates_on_chains():
    g = parse_grammar('root ::= a\na ::= b b\nb ::= c c\nc ::= "x"')
    p = inline_rules(merge_nodes(build_pda(g)))
    assert oracle_accepts(p, b"xxxx")
    assert not oracle_accepts(p, b"xxx")


# -- misc --------------------------------------------------------------------


def test_reachable_tops_exclude_transients():
    p = merge_nodes(build_pda(parse_grammar(ARRAY_STRING)))
    tops = reachable_top_nodes(p)
    assert p.start_node() in tops
    for n in tops:
        assert not (p.dead_end[n] and p.node_rule[n] != p.root)


def test_dot_output():
    p = build_pda(parse_grammar(ARRAY_STRING))
    dot = to_dot(p)
    assert dot.startswith("digraph")
    for rule in ("root", "array", "elems", "string"):
        assert f'label="{rule}"' in dot

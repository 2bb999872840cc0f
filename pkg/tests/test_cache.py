import numpy as np
import pytest

from grammask.cache import (
    ACCEPT_HEAVY,
    BITSET_FORM,
    REJECT_HEAVY,
    Classification,
    TokenMaskCache,
    build_context_expansion,
    build_mask_cache,
    choose_storage,
    classify_token,
    refine_dependent,
)
from grammask.grammar import parse_grammar
from grammask.grammars import ARRAY_STRING
from grammask.pda import build_pda, merge_nodes, oracle_step_states, reachable_top_nodes
from grammask.vocab import build_sorted_index

from conftest import make_vocab


def fig2_merged():
    return merge_nodes(build_pda(parse_grammar(ARRAY_STRING)))


def string_interior(p):
    for n in range(p.node_count):
        for ranges, dst in p.char_out[n]:
            if dst == n and len(ranges) > 1:
                return n
    raise AssertionError("no self-loop found")


def test_classify_examples():
    p = fig2_merged()
    n = string_interior(p)
    assert classify_token(p, n, b"ab") is Classification.ACCEPTED
    assert classify_token(p, n, b'"]') is Classification.DEPENDENT
    # pop attempt forces dependence regardless of ultimate validity
    assert classify_token(p, n, b'""') is Classification.DEPENDENT


def test_classify_rejects_dead_bytes():
    p = fig2_merged()
    n = string_interior(p)
    assert classify_token(p, n, b"\\x") is Classification.REJECTED


def test_classify_accept_wins_over_pop():
    # one run consumes everything in place, another pops: accepted wins
    p = merge_nodes(build_pda(parse_grammar('root ::= "ab" | sub "b"\nsub ::= "a"')))
    assert classify_token(p, p.start_node(), b"ab") is Classification.ACCEPTED


def test_classify_token_requires_bytes():
    p = fig2_merged()
    with pytest.raises(ValueError):
        classify_token(p, p.start_node(), b"")


def test_follow_fsa_fig2():
    p = fig2_merged()
    ctx = build_context_expansion(p)
    sid = p.rule_named("string").rid
    assert ctx.allows(sid, b"")
    assert ctx.allows(sid, b",")
    assert ctx.allows(sid, b"]")
    assert ctx.allows(sid, b"],")
    assert not ctx.allows(sid, b"x")
    assert not ctx.allows(sid, b"]x")


def test_refine_examples():
    p = fig2_merged()
    ctx = build_context_expansion(p)
    n = string_interior(p)
    assert refine_dependent(p, ctx, n, b'"x') is Classification.REJECTED
    assert refine_dependent(p, ctx, n, b'",') is Classification.DEPENDENT


def test_follow_unreferenced_rule_gives_no_information():
    p = merge_nodes(build_pda(parse_grammar('root ::= "a"\norphan ::= "z"')))
    ctx = build_context_expansion(p)
    orphan = p.rule_named("orphan")
    assert ctx.allows(orphan.rid, b"anything")
    n = orphan.start
    assert classify_token(p, n, b"z!") is Classification.DEPENDENT
    assert refine_dependent(p, ctx, n, b"z!") is Classification.DEPENDENT


def test_follow_wildcard_after_rule_reference():
    # the edge referencing `a` is immediately followed by another rule
    # reference, so only zero-length suffixes are known
    p = merge_nodes(build_pda(parse_grammar('root ::= a b\na ::= "x"\nb ::= "y"')))
    ctx = build_context_expansion(p)
    a = p.rule_named("a").rid
    assert ctx.allows(a, b"anything at all")


def test_root_completion_constrains_suffix():
    # root is never referenced: after it completes only end-of-input follows
    p = merge_nodes(build_pda(parse_grammar('root ::= sub\nsub ::= "ab"')))
    ctx = build_context_expansion(p)
    sub = p.rule_named("sub").rid
    assert ctx.allows(sub, b"")
    assert not ctx.allows(sub, b"x")


# -- storage -------------------------------------------------------------------


def test_choose_storage_spec_cases():
    v = 32000
    e = choose_storage(range(100, 32000), range(50), range(50, 100), v)
    assert e.variant == ACCEPT_HEAVY and len(e.ids) == 50 and len(e.dependent) == 50
    e = choose_storage(range(60), range(120, 32000), range(60, 120), v)
    assert e.variant == REJECT_HEAVY and len(e.ids) == 60
    e = choose_storage(range(16000), range(16100, 32000), range(16000, 16100), v)
    assert e.variant == BITSET_FORM
    assert e.bits is not None and len(e.bits) == 1000


def test_choose_storage_tie_break_order():
    # 32-token vocabulary, one accepted + one rejected + 30 dependent:
    # all three encodings weigh 124 bytes, so accept-heavy wins the tie
    e = choose_storage([0], [1], range(2, 32), 32)
    assert e.variant == ACCEPT_HEAVY
    # accept-heavy ties reject-heavy and both beat the bitset
    e = choose_storage([0, 1], [2, 3], [], 256)
    assert e.variant == ACCEPT_HEAVY
    # bitset strictly smaller than both lists
    e = choose_storage(range(100), range(100, 200), [], 256)
    assert e.variant == BITSET_FORM


def test_entry_partition_round_trip():
    universe = np.arange(200, dtype=np.uint32)
    for acc, rej, dep in [
        (range(0, 150), range(150, 190), range(190, 200)),
        (range(0, 10), range(10, 195), range(195, 200)),
        (range(0, 100), range(100, 200), []),
    ]:
        e = choose_storage(acc, rej, dep, 200)
        a, r, d = e.partition(universe, 200)
        assert list(a) == list(acc)
        assert list(r) == list(rej)
        assert list(d) == list(dep)


def test_narrow_node_is_reject_heavy(toy200):
    # a node that accepts only brace-opening tokens stores the tiny
    # accepted list, not the rejected ocean
    p = merge_nodes(build_pda(parse_grammar('root ::= "{" "x" "}"')))
    idx = build_sorted_index(toy200)
    cache = build_mask_cache(p, toy200, idx)
    entry = cache.entries[p.start_node()]
    assert entry.variant == REJECT_HEAVY
    assert all(toy200.tokens[t].startswith(b"{") for t in entry.ids)


def test_cache_serialize_round_trip(toy200):
    p = fig2_merged()
    idx = build_sorted_index(toy200)
    cache = build_mask_cache(p, toy200, idx, use_ctx_expansion=True)
    blob = cache.serialize()
    assert blob[:4] == b"GMC1"
    back = TokenMaskCache.deserialize(blob)
    assert back.vocab_size == cache.vocab_size
    assert set(back.entries) == set(cache.entries)
    universe = np.asarray(
        [t for t in range(toy200.size) if not toy200.is_special(t) and toy200.tokens[t]],
        dtype=np.uint32,
    )
    for n, e in cache.entries.items():
        b = back.entries[n]
        assert e.variant == b.variant
        for x, y in zip(e.partition(universe, 200), b.partition(universe, 200)):
            assert np.array_equal(x, y)
    assert back.serialize() == blob


def test_deserialize_rejects_garbage():
    with pytest.raises(ValueError, match="not a mask cache"):
        TokenMaskCache.deserialize(b"nope")


# -- build-level properties ------------------------------------------------------


def test_partition_and_minimality(toy200):
    p = fig2_merged()
    idx = build_sorted_index(toy200)
    cache = build_mask_cache(p, toy200, idx, use_ctx_expansion=True)
    n_universe = sum(1 for t in range(toy200.size) if not toy200.is_special(t))
    universe = np.asarray(
        [t for t in range(toy200.size) if not toy200.is_special(t)], dtype=np.uint32
    )
    for n, e in cache.entries.items():
        acc, rej, dep = e.partition(universe, toy200.size)
        assert len(acc) + len(rej) + len(dep) == n_universe
        sizes = [
            4 * (len(rej) + len(dep)),
            4 * (len(acc) + len(dep)),
            (toy200.size + 7) // 8 + 4 * len(dep),
        ]
        assert e.payload_size(toy200.size) == min(sizes)


def test_bytes_examined_matches_lcp_arithmetic(toy200):
    p = fig2_merged()
    idx = build_sorted_index(toy200)
    cache = build_mask_cache(p, toy200, idx, use_ctx_expansion=False)
    expected = sum(idx.lengths) - sum(idx.lcp)
    assert cache.stats.bytes_examined_per_entry == expected


def enumerate_reachable_stacks(p, alphabet, max_len, max_depth):
    """All distinct oracle stack states reachable by byte strings."""
    seen = set()
    frontier = {oracle_step_states(p, [(p.start_node(),)], b"")}
    out = set()
    for _ in range(max_len + 1):
        nxt = set()
        for states in frontier:
            for st in states:
                if len(st) <= max_depth:
                    out.add(states)
                    break
            for byte in alphabet:
                stepped = oracle_step_states(p, states, bytes([byte]))
                if stepped and stepped not in seen:
                    seen.add(stepped)
                    nxt.add(stepped)
        frontier = nxt
    return out


def test_classification_soundness_vs_oracle():
    # exhaustive: every reachable stack of depth <= 3, every token
    vocab = make_vocab(
        [bytes([b]) for b in b'[]",abx\\'] + [b"ab", b'"]', b'",', b'a"', b'""', b"]]", b"],"]
    )
    p = fig2_merged()
    idx = build_sorted_index(vocab)
    for use_ctx in (False, True):
        cache = build_mask_cache(p, vocab, idx, use_ctx_expansion=use_ctx)
        universe = np.asarray(
            [t for t in range(vocab.size) if not vocab.is_special(t)], dtype=np.uint32
        )
        keys = set(reachable_top_nodes(p))
        for states in enumerate_reachable_stacks(p, b'[]",a', 6, 3):
            for st in states:
                top = st[-1]
                if top not in keys:
                    continue
                acc, rej, dep = cache.entries[top].partition(universe, vocab.size)
                acc, rej = set(int(x) for x in acc), set(int(x) for x in rej)
                for tid in range(vocab.size - 1):
                    ok = bool(oracle_step_states(p, [st], vocab.tokens[tid]))
                    if tid in acc:
                        assert ok, (st, vocab.tokens[tid], "accepted but oracle rejects")
                    elif tid in rej:
                        assert not ok, (st, vocab.tokens[tid], "rejected but oracle accepts")

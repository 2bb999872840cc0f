import json
import random

import pytest

from grammask.vocab import (
    VocabError,
    build_sorted_index,
    dump_vocab,
    load_vocab,
    loads_vocab,
    saved_chars_ratio,
    vocab_from_tokens,
)


def test_basic_load():
    doc = {"byte_level": False, "eos_id": 3, "special": [3], "tokens": ["a", "b", "ab", "<eos>"]}
    v = loads_vocab(json.dumps(doc))
    assert v.size == 4
    assert v.tokens[:3] == (b"a", b"b", b"ab")
    assert v.eos_id == 3 and v.is_special(3)


def test_byte_level_printable_remapping():
    doc = {"byte_level": True, "eos_id": 1, "special": [1], "tokens": ["Ġa", "<eos>"]}
    v = loads_vocab(json.dumps(doc))
    assert v.tokens[0] == b" a"  # 0x20, 0x61


def test_sub_utf8_fragment_token():
    doc = {"byte_level": False, "eos_id": 1, "special": [1], "tokens": ["\\xC3", "e"]}
    v = loads_vocab(json.dumps(doc))
    assert v.tokens[0] == b"\xc3"


def test_errors():
    with pytest.raises(VocabError, match="not valid JSON"):
        loads_vocab("{")
    with pytest.raises(VocabError, match="eos_id"):
        loads_vocab(json.dumps({"tokens": ["a"]}))
    with pytest.raises(VocabError, match="outside"):
        loads_vocab(json.dumps({"eos_id": 5, "tokens": ["a"]}))
    with pytest.raises(VocabError, match="duplicate ids"):
        loads_vocab(json.dumps({"eos_id": 0, "special": [0, 0], "tokens": ["a"]}))
    with pytest.raises(VocabError, match="special token id"):
        loads_vocab(json.dumps({"eos_id": 0, "special": [9], "tokens": ["a"]}))


def test_dump_load_round_trip(tmp_path):
    tokens = [b"a", b" b", b"\xc3", b"\xc3\xa9", b'"x"', b"\\n", b"\x00\x01", b"<eos>"]
    v = vocab_from_tokens(tokens, eos_id=7, special=[7])
    for byte_level in (False, True):
        path = tmp_path / f"v{byte_level}.json"
        path.write_text(dump_vocab(v, byte_level=byte_level), encoding="utf-8")
        v2 = load_vocab(path)
        assert v2.tokens == v.tokens
        assert v2.content_hash() == v.content_hash()


def test_sorted_index_prefix_family():
    v = vocab_from_tokens([b"read", b"ready", b"reader", b"<eos>"], eos_id=3, special=[3])
    idx = build_sorted_index(v)
    assert [v.tokens[t] for t in idx.order] == [b"read", b"reader", b"ready"]
    assert idx.lcp == (0, 4, 4)
    # (4+5+6-4-4)/15
    assert saved_chars_ratio(idx) == pytest.approx(7 / 15)


def test_sorted_index_trivial_cases():
    v = vocab_from_tokens([b"solo", b"<eos>"], eos_id=1, special=[1])
    idx = build_sorted_index(v)
    assert idx.order == (0,) and idx.lcp == (0,)

    v = vocab_from_tokens([b"b", b"a", b"<eos>"], eos_id=2, special=[2])
    idx = build_sorted_index(v)
    assert [v.tokens[t] for t in idx.order] == [b"a", b"b"]
    assert idx.lcp == (0, 0)
    assert saved_chars_ratio(idx) == 1.0


def test_prefix_chain_ratio():
    v = vocab_from_tokens([b"a", b"ab", b"abc", b"<eos>"], eos_id=3, special=[3])
    assert saved_chars_ratio(build_sorted_index(v)) == pytest.approx(0.5)


def test_duplicate_tokens_keep_ascending_ids():
    v = vocab_from_tokens([b"x", b"dup", b"dup", b"a", b"dup", b"<eos>"], eos_id=5, special=[5])
    idx = build_sorted_index(v)
    dup_positions = [t for t in idx.order if v.tokens[t] == b"dup"]
    assert dup_positions == [1, 2, 4]


def test_lcp_matches_brute_force():
    rng = random.Random(17)
    tokens = [
        bytes(rng.randrange(97, 103) for _ in range(rng.randrange(0, 6))) for _ in range(800)
    ] + [b"<eos>"]
    v = vocab_from_tokens(tokens, eos_id=len(tokens) - 1, special=[len(tokens) - 1])
    idx = build_sorted_index(v)
    for k in range(1, len(idx.order)):
        a, b = v.tokens[idx.order[k]], v.tokens[idx.order[k - 1]]
        n = 0
        while n < min(len(a), len(b)) and a[n] == b[n]:
            n += 1
        assert idx.lcp[k] == n
        assert idx.lcp[k] <= min(len(a), len(b))

import random

import pytest

from grammask.bundle import compile_bundle
from grammask.grammar import parse_grammar
from grammask.grammars import ARITHMETIC, ARRAY_STRING, JSON_ECMA404, SAMPLE_SCHEMA, XML_TOY
from grammask.pda import build_pda, oracle_step_states
from grammask.schema import schema_to_grammar_text
from grammask.vocab import vocab_from_tokens


def make_vocab(tokens, specials=("<eos>",)):
    """Toy vocabulary from byte-string tokens; specials appended at the end,
    EOS last."""
    toks = [bytes(t) if not isinstance(t, str) else t.encode() for t in tokens]
    toks.extend(s.encode() for s in specials)
    size = len(toks)
    special_ids = list(range(size - len(specials), size))
    return vocab_from_tokens(toks, eos_id=size - 1, special=special_ids)


# A 200-token vocabulary that can express all five sample grammars.
def build_toy200():
    tokens = [bytes([b]) for b in range(0x20, 0x7F)]  # 95 printable ASCII singles
    tokens += [b"\n", b"\t", b"\r"]
    words = [
        "true", "false", "null", "tr", "ue", "als", "ll",
        "ab", "abc", "cat", "dog", "read", "ready", "reader",
        '":', '",', '"}', '"]', '{"', '["', '"a"', '"b',
        "], ", "}, ", ", ", ": ", '": ', "[]", "{}", "[[", "]]",
        "12", "34", "3.5", "-1", "0.", "e+", "1e9", "00",
        "+(", ")*", ")+", "((", "))", "*(",
        "<a>", "</a>", "<b>", "</b>", "<a", "a>", "</",
        "get_weather", "get_time", "name", "unit", "count", "tags",
        '\\"', "\\n", "\\u00", "u00", "  ", "   ", " \n",
    ]
    tokens += [w.encode() for w in words]
    seen = set()
    out = []
    for t in tokens:
        if t not in seen:
            seen.add(t)
            out.append(t)
    rng = random.Random(99)
    syll = ["ta", "mi", "ro", "zen", "ki", "la", "vo", "nu", "pe", "sh"]
    while len(out) < 199:
        w = "".join(rng.choice(syll) for _ in range(rng.randrange(1, 4))).encode()
        if w not in seen:
            seen.add(w)
            out.append(w)
    out = out[:199] + [b"<eos>"]
    return vocab_from_tokens(out, eos_id=199, special=[199])


def build_gen_vocab():
    """Small vocabulary tuned for mock-LLM generation tests.

    Covers every byte the five sample grammars can demand, while keeping
    the permitted set small at typical states and slightly biased toward
    closing tokens so uniform sampling terminates briskly.
    """
    singles = 'acefghilmnorstuw_012[]{},:.+-*/()<>"\\ \n'
    words = ["true", "false", "null", "get_weather", "get_time"]
    composites = ['":', '",', '"}', '"]', "},", "],", "</", "</a>", "</b>", "a>", "b>", ")*", ")+", "))"]
    tokens = [c.encode() for c in singles] + [w.encode() for w in words]
    tokens += [c.encode() for c in composites]
    return vocab_from_tokens(tokens + [b"<eos>"], eos_id=len(tokens), special=[len(tokens)])


SCHEMA_GRAMMAR = schema_to_grammar_text(SAMPLE_SCHEMA)

FIVE_GRAMMARS = {
    "array_string": ARRAY_STRING,
    "json": JSON_ECMA404,
    "arithmetic": ARITHMETIC,
    "xml": XML_TOY,
    "schema": SCHEMA_GRAMMAR,
}

# per-grammar probe alphabets exercising structure and content bytes
PROBE_ALPHABETS = {
    "array_string": b'[]",a',
    "json": b'[]",1',
    "arithmetic": b"1+*()",
    "xml": b"<a>/b",
    "schema": b'{"g:,',
}


@pytest.fixture(scope="session")
def toy200():
    return build_toy200()


@pytest.fixture(scope="session")
def bundles(toy200):
    """Fully optimized bundles for the five sample grammars."""
    return {name: compile_bundle(text, toy200) for name, text in FIVE_GRAMMARS.items()}


@pytest.fixture(scope="session")
def gen_vocab():
    return build_gen_vocab()


@pytest.fixture(scope="session")
def gen_bundles(gen_vocab):
    return {name: compile_bundle(text, gen_vocab) for name, text in FIVE_GRAMMARS.items()}


@pytest.fixture(scope="session")
def fig2_pda():
    return build_pda(parse_grammar(ARRAY_STRING))


def joint_acceptance_scan(pdas, alphabet: bytes, max_len: int):
    """Assert identical acceptance on every string up to max_len.

    Walks the byte tree once for all automata, pruning branches that are
    dead in every variant (all extensions then agree trivially).
    """
    states = [oracle_step_states(p, [(p.start_node(),)], b"") for p in pdas]

    def accepted(p, sts):
        return any(len(s) == 1 and p.is_final[s[0]] and p.node_rule[s[0]] == p.root for s in sts)

    count = 0

    def walk(prefix, state_sets):
        nonlocal count
        verdicts = [accepted(p, sts) if sts else False for p, sts in zip(pdas, state_sets)]
        assert all(v == verdicts[0] for v in verdicts), f"disagreement on {prefix!r}: {verdicts}"
        count += 1
        if len(prefix) == max_len:
            return
        for byte in alphabet:
            nxt = [
                oracle_step_states(p, sts, bytes([byte])) if sts else frozenset()
                for p, sts in zip(pdas, state_sets)
            ]
            if any(nxt):
                walk(prefix + bytes([byte]), nxt)

    walk(b"", states)
    return count


def brute_force_mask_ids(pda, vocab, stacks):
    """Oracle-side token mask: try every non-special token from the stacks."""
    out = []
    for tid in range(vocab.size):
        if vocab.is_special(tid) or not vocab.tokens[tid]:
            continue
        if oracle_step_states(pda, stacks, vocab.tokens[tid]):
            out.append(tid)
    if any(len(s) == 1 and pda.is_final[s[0]] and pda.node_rule[s[0]] == pda.root for s in stacks):
        out.append(vocab.eos_id)
    return out

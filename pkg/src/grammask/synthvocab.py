"""Deterministic synthetic byte-level vocabularies.

Shaped like a byte-level BPE vocabulary trained mostly on prose: every
single byte is a token, word pieces (with and without a leading space)
dominate, and punctuation-heavy or digit-heavy merges are a small
minority.  Two profiles:

* ``text`` — structural JSON bytes are rare inside multi-byte tokens,
  the realistic case for mask-cache size measurements;
* ``mixed`` — denser punctuation/digit merges, useful when benchmarks
  want a meatier context-dependent workload.

Same ``(size, seed, profile)`` always yields the identical vocabulary.
"""

from __future__ import annotations

import random

from .vocab import Vocabulary, vocab_from_tokens

__all__ = ["synth_vocab"]

_CONSONANTS = "bcdfghjklmnpqrstvwz"
_VOWELS = "aeiouy"
_ENDINGS = ["", "s", "ing", "ed", "er", "ly", "tion", "ment"]

_WS_RUNS = [b" " * k for k in range(2, 9)] + [b"\n", b"\n\n", b"\t", b"\r\n", b" \n", b"\n ", b"\t\t"]

_PROSE_PUNCT = [
    b". ", b", ", b"! ", b"? ", b"; ", b": ", b"'s", b"' ", b" (", b") ",
    b"--", b"...", b".\n", b",\n", b" - ", b"n't", b"'re", b"'ve",
]

_JSON_PUNCT = [
    b'":', b'",', b'"}', b'"]', b'" ', b'":"', b'": ', b'{"', b', "', b'},',
    b'],', b'"",', b'ively"', b'="', b'()', b'");', b'%,', b'\\"',
]

_QUOTE_WORDS = ["the", "and", "for", "with", "that", "name", "value", "data",
                "true", "this", "type", "id", "key", "a", "b", "c", "x", "n",
                "to", "of", "in", "is", "it", "on"]

_UTF8_PIECES = [
    "é", "ü", "ñ", "ç", "ß", "→", "…", "–", "°", "€", "中", "文", "日", "語",
    " é", " ü", "ä", "ö", "è", "à",
]
_UTF8_FRAGMENTS = [b"\xc3", b"\xe2\x80", b"\xf0\x9f", b"\xe2", b"\xc2"]


def _word(rng: random.Random, suffixed: bool = True) -> str:
    n_syll = rng.choice((1, 1, 2, 2, 2, 3, 3, 4))
    out = []
    for _ in range(n_syll):
        out.append(rng.choice(_CONSONANTS))
        out.append(rng.choice(_VOWELS))
        if rng.random() < 0.3:
            out.append(rng.choice(_CONSONANTS))
    word = "".join(out)
    return word + rng.choice(_ENDINGS) if suffixed else word


def synth_vocab(size: int = 32000, seed: int = 23917, profile: str = "text") -> Vocabulary:
    """Create a synthetic vocabulary of exactly ``size`` tokens.

    The last three ids are the special tokens ``<unk>``, ``<pad>`` and
    ``<eos>`` (eos last).
    """
    if size < 512:
        raise ValueError("synthetic vocabularies start at 512 tokens")
    # Multi-byte tokens carrying digits or JSON structure are rare in a
    # prose-trained byte-level vocabulary (modern tokenizers even force
    # digits to stay single bytes); the mixed profile relaxes that for
    # benchmarks that want more context-dependent work.
    if profile == "text":
        n_digit, n_quote, n_bracket, n_punct, n_ws = 12, 24, 12, 48, 6
    elif profile == "mixed":
        n_digit, n_quote, n_bracket, n_punct, n_ws = (
            int(size * 0.02), int(size * 0.012), int(size * 0.008), int(size * 0.03), 14)
    else:
        raise ValueError(f"unknown profile {profile!r}")

    rng = random.Random(seed)
    tokens: list = [bytes([b]) for b in range(256)]
    seen = set(tokens)

    def add(t: bytes):
        if t and t not in seen:
            seen.add(t)
            tokens.append(t)

    for t in _WS_RUNS[:n_ws]:
        add(t)

    digit_pool = [b"0,", b"1,", b"0.", b"1.", b"2:", b"1]", b"2}", b"3a", b" 1", b" 2"]
    for i in range(n_digit):
        if i < len(digit_pool):
            add(digit_pool[i])
        else:
            k = rng.choice((2, 2, 3, 4))
            add("".join(rng.choice("0123456789") for _ in range(k)).encode())

    quote_pool = ['"' + w for w in _QUOTE_WORDS] + [w + '"' for w in _QUOTE_WORDS[:8]]
    for i in range(n_quote):
        if i < len(quote_pool):
            add(quote_pool[i].encode())
        else:
            add(('"' + _word(rng)).encode())

    bracket_pool = [b"[1", b"[0", b"[[", b"]]", b"[ ", b" [", b"{ ", b" {", b"}\n", b"]\n",
                    b"()", b"(s", b")(", b"[i", b"{}", b"[]"]
    for i in range(n_bracket):
        if i < len(bracket_pool):
            add(bracket_pool[i])
        else:
            add((rng.choice("[{(") + _word(rng)[:3]).encode())

    punct_pool = _PROSE_PUNCT + _JSON_PUNCT
    for i in range(n_punct):
        if i < len(punct_pool):
            add(punct_pool[i])
        else:
            add((_word(rng)[:4] + rng.choice(".,;:!?")).encode())

    for s in _UTF8_PIECES:
        add(s.encode())
    for t in _UTF8_FRAGMENTS:
        add(t)

    # Word-piece families fill the rest: one stem yields several suffixed
    # and space/case variants, the way BPE merges cluster around stems.
    # The shared prefixes are what sorted-order rollback exploits.
    while len(tokens) < size - 3:
        stem = _word(rng, suffixed=False)
        variants = [stem]
        for ending in rng.sample(_ENDINGS[1:], k=rng.randrange(1, 4)):
            variants.append(stem + ending)
        picked = []
        for w in variants:
            style = rng.random()
            if style < 0.45:
                picked.append(" " + w)
            elif style < 0.55:
                picked.append(w.capitalize())
                picked.append(" " + w)
            else:
                picked.append(w)
        for w in picked:
            if len(tokens) < size - 3:
                add(w.encode())

    tokens = tokens[: size - 3]
    tokens.extend([b"<unk>", b"<pad>", b"<eos>"])
    return vocab_from_tokens(tokens, eos_id=size - 1, special=[size - 3, size - 2, size - 1])

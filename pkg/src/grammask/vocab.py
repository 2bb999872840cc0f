"""Tokenizer vocabulary ingestion and the sorted traversal index.

The vocabulary file is a self-contained JSON object::

    {"byte_level": bool, "eos_id": int, "special": [int, ...],
     "tokens": ["...", ...]}

Token ids are the positions in ``tokens``.  Strings use ordinary JSON
escapes plus ``\\xHH`` for raw bytes (resolved after JSON decoding), so
tokens may contain partial UTF-8 sequences.  When ``byte_level`` is true
the strings instead use the printable-byte remapping common to byte-level
BPE tokenizers, and each character maps back to exactly one byte.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

__all__ = [
    "VocabError",
    "Vocabulary",
    "SortedVocabIndex",
    "load_vocab",
    "loads_vocab",
    "vocab_from_tokens",
    "dump_vocab",
    "build_sorted_index",
    "saved_chars_ratio",
]


class VocabError(ValueError):
    """Malformed vocabulary file."""


# Printable remapping used by byte-level BPE tokenizers: every byte gets a
# visible character; bytes that are already printable map to themselves and
# the rest are displaced to 0x100 + counter.
def _byte_to_char_table() -> dict:
    visible = list(range(0x21, 0x7F)) + list(range(0xA1, 0xAD)) + list(range(0xAE, 0x100))
    table = {b: chr(b) for b in visible}
    fill = 0
    for b in range(256):
        if b not in table:
            table[b] = chr(0x100 + fill)
            fill += 1
    return table

_BYTE_TO_CHAR = _byte_to_char_table()
_CHAR_TO_BYTE = {c: b for b, c in _BYTE_TO_CHAR.items()}


def _decode_escaped(s: str) -> bytes:
    """Resolve ``\\xHH`` escapes; everything else is UTF-8 encoded."""
    out = bytearray()
    i = 0
    while i < len(s):
        c = s[i]
        if c == "\\" and i + 1 < len(s):
            nxt = s[i + 1]
            if nxt == "x" and i + 3 < len(s) + 1:
                hexpart = s[i + 2 : i + 4]
                if len(hexpart) == 2 and all(h in "0123456789abcdefABCDEF" for h in hexpart):
                    out.append(int(hexpart, 16))
                    i += 4
                    continue
            if nxt == "\\":
                out.append(0x5C)
                i += 2
                continue
        out.extend(c.encode("utf-8"))
        i += 1
    return bytes(out)


def _encode_escaped(data: bytes) -> str:
    out = []
    i = 0
    while i < len(data):
        b = data[i]
        if b == 0x5C:
            out.append("\\\\")
            i += 1
            continue
        if b < 0x20 or b == 0x7F:
            out.append(f"\\x{b:02X}")
            i += 1
            continue
        if b < 0x80:
            out.append(chr(b))
            i += 1
            continue
        # try to keep well-formed UTF-8 readable, else fall back to \xHH
        for ln in (2, 3, 4):
            chunk = data[i : i + ln]
            try:
                text = chunk.decode("utf-8")
                out.append(text)
                i += ln
                break
            except UnicodeDecodeError:
                continue
        else:
            out.append(f"\\x{b:02X}")
            i += 1
    return "".join(out)


@dataclass(frozen=True)
class Vocabulary:
    tokens: tuple  # tuple[bytes, ...] indexed by token id
    special_tokens: frozenset  # token ids, always includes eos_id
    eos_id: int

    @property
    def size(self) -> int:
        return len(self.tokens)

    def is_special(self, tid: int) -> bool:
        return tid in self.special_tokens

    def content_hash(self) -> bytes:
        h = hashlib.sha256()
        h.update(b"VOC1")
        h.update(self.eos_id.to_bytes(4, "little"))
        for tid in sorted(self.special_tokens):
            h.update(tid.to_bytes(4, "little"))
        h.update(b"|")
        for t in self.tokens:
            h.update(len(t).to_bytes(4, "little"))
            h.update(t)
        return h.digest()


def vocab_from_tokens(tokens, eos_id: int, special=()) -> Vocabulary:
    toks = tuple(bytes(t) for t in tokens)
    if not (0 <= eos_id < len(toks)):
        raise VocabError(f"eos_id {eos_id} outside vocabulary of size {len(toks)}")
    special_set = frozenset(special) | {eos_id}
    for tid in special_set:
        if not (0 <= tid < len(toks)):
            raise VocabError(f"special token id {tid} outside vocabulary")
    return Vocabulary(toks, special_set, eos_id)


def loads_vocab(text: str) -> Vocabulary:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise VocabError(f"vocabulary is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "tokens" not in doc:
        raise VocabError("vocabulary must be an object with a 'tokens' array")
    raw = doc["tokens"]
    if not isinstance(raw, list) or not all(isinstance(t, str) for t in raw):
        raise VocabError("'tokens' must be an array of strings")
    if "eos_id" not in doc:
        raise VocabError("vocabulary is missing 'eos_id'")
    byte_level = bool(doc.get("byte_level", False))
    tokens = []
    for i, s in enumerate(raw):
        if byte_level:
            try:
                tokens.append(bytes(_CHAR_TO_BYTE[c] for c in s))
            except KeyError as exc:
                raise VocabError(f"token {i}: character {exc.args[0]!r} is not in the byte-level table")
        else:
            tokens.append(_decode_escaped(s))
    special = doc.get("special", [])
    if not isinstance(special, list) or not all(isinstance(x, int) for x in special):
        raise VocabError("'special' must be an array of token ids")
    if len(set(special)) != len(special):
        raise VocabError("duplicate ids in 'special'")
    return vocab_from_tokens(tokens, doc["eos_id"], special)


def load_vocab(path) -> Vocabulary:
    """Load a vocabulary JSON file (format in the module docstring)."""
    with open(path, "r", encoding="utf-8") as fh:
        return loads_vocab(fh.read())


def dump_vocab(v: Vocabulary, byte_level: bool = False) -> str:
    """Serialize back to the vocabulary JSON format."""
    if byte_level:
        toks = ["".join(_BYTE_TO_CHAR[b] for b in t) for t in v.tokens]
    else:
        toks = [_encode_escaped(t) for t in v.tokens]
    doc = {
        "byte_level": byte_level,
        "eos_id": v.eos_id,
        "special": sorted(v.special_tokens),
        "tokens": toks,
    }
    return json.dumps(doc, ensure_ascii=False)


# ---------------------------------------------------------------------------
# Sorted index


@dataclass(frozen=True)
class SortedVocabIndex:
    """Non-special token ids in lexicographic byte order plus LCP lengths.

    ``lcp[k]`` is the length of the longest common prefix between the
    tokens at ``order[k]`` and ``order[k-1]``; checking tokens in this
    order lets a matcher roll back to the shared prefix instead of
    re-scanning it.  ``lengths[k]`` is the byte length of token
    ``order[k]``.
    """

    order: tuple  # tuple[int, ...]
    lcp: tuple  # tuple[int, ...], lcp[0] == 0
    lengths: tuple  # tuple[int, ...]


def _common_prefix_len(a: bytes, b: bytes) -> int:
    n = min(len(a), len(b))
    i = 0
    while i < n and a[i] == b[i]:
        i += 1
    return i


def build_sorted_index(v: Vocabulary) -> SortedVocabIndex:
    """Sort non-special tokens by raw bytes (stable on equal bytes)."""
    ids = [tid for tid in range(v.size) if tid not in v.special_tokens]
    ids.sort(key=lambda tid: (v.tokens[tid], tid))
    lcp = [0] * len(ids)
    for k in range(1, len(ids)):
        lcp[k] = _common_prefix_len(v.tokens[ids[k]], v.tokens[ids[k - 1]])
    return SortedVocabIndex(tuple(ids), tuple(lcp), tuple(len(v.tokens[tid]) for tid in ids))


def saved_chars_ratio(idx: SortedVocabIndex) -> float:
    """Fraction of token bytes still examined under shared-prefix rollback."""
    total = sum(idx.lengths)
    shared = sum(idx.lcp)
    if total == 0:
        return 1.0
    return (total - shared) / total

"""Compiled bundles: grammar + automaton + mask cache in one artifact.

The on-disk format is little-endian throughout and deterministic for
identical inputs: magic ``GMB1``, a version word, pipeline flags, the
vocabulary content hash, the normalized grammar text, the automaton and
(optionally) the serialized mask cache.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional

from .cache import TokenMaskCache, build_mask_cache
from .grammar import parse_grammar, pretty_print
from .pda import CHAR, RULE, Pda, PdaEdge, PdaRule, build_pda, inline_rules, merge_nodes
from .vocab import Vocabulary, build_sorted_index

__all__ = ["Bundle", "CompileOptions", "compile_bundle", "load_bundle", "save_bundle"]

_MAGIC = b"GMB1"
_VERSION = 1

FLAG_INLINE = 1
FLAG_MERGE = 2
FLAG_CACHE = 4
FLAG_CTX = 8


@dataclass
class CompileOptions:
    inline: bool = True
    merge: bool = True
    cache: bool = True
    ctx_expansion: bool = True
    inline_max_rule_size: int = 16
    inline_max_result_size: int = 512

    def __post_init__(self):
        if not self.cache:
            # context expansion refines the cache; nothing to refine without one
            self.ctx_expansion = False

    @property
    def flags(self) -> int:
        return (
            (FLAG_INLINE if self.inline else 0)
            | (FLAG_MERGE if self.merge else 0)
            | (FLAG_CACHE if self.cache else 0)
            | (FLAG_CTX if self.ctx_expansion else 0)
        )


@dataclass
class Bundle:
    grammar_text: str
    pda: Pda
    cache: Optional[TokenMaskCache]
    vocab_hash: bytes
    vocab_size: int
    options: CompileOptions


def compile_bundle(grammar_text: str, vocab: Vocabulary, options: Optional[CompileOptions] = None) -> Bundle:
    """Run the full pipeline: parse, build, optimize, classify.

    Merging runs before inlining so rule sizes are measured on compact
    automata (construction epsilons would otherwise push small fragment
    rules over the inlining limit), and again after it to clean up the
    epsilon stitches that substitution introduces.
    """
    opts = options or CompileOptions()
    g = parse_grammar(grammar_text)
    p = build_pda(g)
    if opts.merge:
        p = merge_nodes(p)
    if opts.inline:
        # Substitution stitches fragments in with epsilon edges, which can
        # push the next fragment over the size limit; alternating with
        # merging lets the inlining cascade bottom-up until stable.
        for _ in range(8):
            shape = (p.node_count, p.edge_count)
            p = inline_rules(p, opts.inline_max_rule_size, opts.inline_max_result_size)
            if opts.merge:
                p = merge_nodes(p)
            if (p.node_count, p.edge_count) == shape:
                break
    cache = None
    if opts.cache:
        idx = build_sorted_index(vocab)
        cache = build_mask_cache(p, vocab, idx, use_ctx_expansion=opts.ctx_expansion)
    return Bundle(pretty_print(g), p, cache, vocab.content_hash(), vocab.size, opts)


# ---------------------------------------------------------------------------
# Serialization


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def _pack_pda(p: Pda) -> bytes:
    out = [struct.pack("<III", p.node_count, len(p.edges), len(p.rules))]
    out.append(struct.pack("<I", p.root))
    out.append(b"".join(struct.pack("<I", rid) for rid in p.node_rule))
    for e in p.edges:
        out.append(struct.pack("<IIB", e.src, e.dst, e.kind))
        if e.kind == CHAR:
            out.append(struct.pack("<H", len(e.data)))
            out.append(b"".join(struct.pack("<BB", lo, hi) for lo, hi in e.data))
        elif e.kind == RULE:
            out.append(struct.pack("<I", e.data))
    for r in p.rules:
        out.append(_pack_str(r.name))
        out.append(struct.pack("<II", r.start, len(r.finals)))
        out.append(b"".join(struct.pack("<I", f) for f in sorted(r.finals)))
    return b"".join(out)


class _Reader:
    def __init__(self, data: bytes, pos: int = 0):
        self.data = data
        self.pos = pos

    def take(self, fmt: str):
        vals = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += struct.calcsize(fmt)
        return vals

    def take_str(self) -> str:
        (n,) = self.take("<I")
        raw = self.data[self.pos : self.pos + n]
        self.pos += n
        return raw.decode("utf-8")

    def take_blob(self, n: int) -> bytes:
        raw = self.data[self.pos : self.pos + n]
        self.pos += n
        return raw


def _unpack_pda(r: _Reader) -> Pda:
    n_nodes, n_edges, n_rules = r.take("<III")
    (root,) = r.take("<I")
    node_rule = [r.take("<I")[0] for _ in range(n_nodes)]
    edges = []
    for _ in range(n_edges):
        src, dst, kind = r.take("<IIB")
        if kind == CHAR:
            (n_ranges,) = r.take("<H")
            data = tuple(r.take("<BB") for _ in range(n_ranges))
        elif kind == RULE:
            data = r.take("<I")[0]
        else:
            data = None
        edges.append(PdaEdge(src, dst, kind, data))
    rules = []
    for rid in range(n_rules):
        name = r.take_str()
        start, n_finals = r.take("<II")
        finals = frozenset(r.take("<I")[0] for _ in range(n_finals))
        rules.append(PdaRule(rid, name, start, finals))
    return Pda(node_rule, edges, rules, root)


def save_bundle(bundle: Bundle) -> bytes:
    out = [_MAGIC, struct.pack("<II", _VERSION, bundle.options.flags)]
    out.append(struct.pack("<I", bundle.vocab_size))
    out.append(bundle.vocab_hash)
    out.append(_pack_str(bundle.grammar_text))
    pda_blob = _pack_pda(bundle.pda)
    out.append(struct.pack("<I", len(pda_blob)))
    out.append(pda_blob)
    if bundle.cache is not None:
        cache_blob = bundle.cache.serialize()
        out.append(struct.pack("<I", len(cache_blob)))
        out.append(cache_blob)
    else:
        out.append(struct.pack("<I", 0))
    return b"".join(out)


def load_bundle(data: bytes) -> Bundle:
    if data[:4] != _MAGIC:
        raise ValueError("not a grammask bundle")
    r = _Reader(data, 4)
    version, flags = r.take("<II")
    if version != _VERSION:
        raise ValueError(f"unsupported bundle version {version}")
    (vocab_size,) = r.take("<I")
    vocab_hash = r.take_blob(32)
    grammar_text = r.take_str()
    (pda_len,) = r.take("<I")
    p = _unpack_pda(_Reader(r.take_blob(pda_len)))
    (cache_len,) = r.take("<I")
    cache = TokenMaskCache.deserialize(r.take_blob(cache_len)) if cache_len else None
    opts = CompileOptions(
        inline=bool(flags & FLAG_INLINE),
        merge=bool(flags & FLAG_MERGE),
        cache=bool(flags & FLAG_CACHE),
        ctx_expansion=bool(flags & FLAG_CTX),
    )
    return Bundle(grammar_text, p, cache, vocab_hash, vocab_size, opts)

"""Adaptive token mask cache.

For a given automaton node sitting at the top of a matching stack, every
vocabulary token falls into one of three classes:

* accepted independently of the rest of the stack (some run consumes the
  whole token while staying at or above the node's frame),
* rejected independently of the rest of the stack (every run dies without
  ever leaving the node's frame), or
* context dependent: some run completes the node's rule and would have to
  pop into whatever sits below, so only the full stack can decide.

The first two classes are precomputed here for every reachable stack-top
node.  Context expansion then shrinks the third class: the byte strings
that may legally follow a rule's completion form a small automaton
(extracted from the call sites, cascading through enclosing completions),
and a dependent token whose post-pop remainder can neither extend nor
contain such a string is really just rejected.

Each cache entry is stored in whichever of three encodings is smallest:
the rejected-id list, the accepted-id list, or a bitset over the
vocabulary; the dependent-id list always rides along.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .pda import RULE, Pda, StateLimitError, reachable_top_nodes
from .pstack import EMPTY, StackArena
from .vocab import SortedVocabIndex, Vocabulary

__all__ = [
    "Classification",
    "ACCEPT_HEAVY",
    "REJECT_HEAVY",
    "BITSET_FORM",
    "MaskCacheEntry",
    "TokenMaskCache",
    "BuildStats",
    "FollowFsa",
    "SweepResult",
    "sweep",
    "classify_token",
    "refine_dependent",
    "build_context_expansion",
    "build_mask_cache",
    "choose_storage",
    "pack_bitset",
    "bitset_encoding_bytes",
]

DEFAULT_BRANCH_CAP = 4096


class Classification(Enum):
    ACCEPTED = "accepted_independent"
    REJECTED = "rejected_independent"
    DEPENDENT = "context_dependent"


# ---------------------------------------------------------------------------
# Sorted-order sweep
#
# The work horse for both preprocessing and uncached mask generation: walk a
# lexicographically sorted token list, keeping one simulation checkpoint per
# consumed byte of the current token, and roll back to the shared prefix
# before each new token.  Exactly (sum of lengths - sum of LCPs) bytes get
# fed to the automaton; an instrumentation counter records that.


@dataclass
class SweepResult:
    accepted: list  # keys whose bytes stayed alive without a bottom pop
    rejected: list  # keys that died without a bottom pop
    dependents: list  # (key, [remainder bytes per bottom pop depth]) — synthetic mode only
    bytes_examined: int


_EMPTY_SET: frozenset = frozenset()


def sweep(p: Pda, items, lcps, init_content, *, synthetic: bool, cap: int = DEFAULT_BRANCH_CAP) -> SweepResult:
    """Classify sorted byte strings simulated from the given start branches.

    ``items`` is a list of ``(key, bytes)`` in lexicographic byte order and
    ``lcps`` the aligned common-prefix lengths.  ``init_content`` lists the
    start branches as ``(return-chain tuple, current node)``.  In synthetic
    mode a pop past the bottom of the chain is recorded (with the unread
    remainder) instead of killing the branch silently.
    """
    arena = StackArena(intern=True)
    push = arena.push
    par = arena.parent
    nod = arena.node

    byte_targets = p.byte_targets
    eps_out = p.eps_out
    rule_out = p.rule_out
    is_final = p.is_final
    quiet = p.quiet
    dead_end = p.dead_end
    rule_start = tuple(r.start for r in p.rules)

    def closure(branches):
        popped = False
        seen = set(branches)
        work = [b for b in branches if not quiet[b[1]]]
        while work:
            h, n = work.pop()
            for d in eps_out[n]:
                t = (h, d)
                if t not in seen:
                    seen.add(t)
                    if not quiet[d]:
                        work.append(t)
            for rid, ret in rule_out[n]:
                t = (push(h, ret), rule_start[rid])
                if t not in seen:
                    seen.add(t)
                    if not quiet[t[1]]:
                        work.append(t)
            if is_final[n]:
                if h == EMPTY:
                    popped = True
                else:
                    t = (par[h], nod[h])
                    if t not in seen:
                        seen.add(t)
                        if not quiet[t[1]]:
                            work.append(t)
            if len(seen) > cap:
                raise StateLimitError(f"branch set exceeded cap of {cap}")
        # spent finals are interchangeable with their popped successor
        # (already in the closure), so they only bloat the checkpoints
        if any(dead_end[n] and h != EMPTY for h, n in seen):
            seen = {(h, n) for h, n in seen if not (dead_end[n] and h != EMPTY)}
        return seen, popped

    init = []
    for chain, n in init_content:
        h = EMPTY
        for ret in chain:
            h = push(h, ret)
        init.append((h, n))

    states, popped0 = closure(init)
    checkpoints = [states]
    pops = [popped0]

    accepted, rejected, dependents = [], [], []
    bytes_examined = 0

    for k in range(len(items)):
        key, tok = items[k]
        cut = lcps[k] + 1
        del checkpoints[cut:]
        del pops[cut:]
        states = checkpoints[-1]
        for i in range(cut - 1, len(tok)):
            b = tok[i]
            bytes_examined += 1
            popped = False
            if states:
                stepped = set()
                noisy = False
                for h, n in states:
                    for d in byte_targets[n][b]:
                        stepped.add((h, d))
                        if not quiet[d]:
                            noisy = True
                if not stepped:
                    states = _EMPTY_SET
                elif noisy:
                    states, popped = closure(stepped)
                else:
                    states = stepped
            checkpoints.append(states)
            pops.append(popped)
        if states:
            accepted.append(key)
        elif synthetic and any(pops):
            remainders = [tok[d:] for d, flag in enumerate(pops) if flag]
            dependents.append((key, remainders))
        else:
            rejected.append(key)

    return SweepResult(accepted, rejected, dependents, bytes_examined)


def _simulate_token(p: Pda, node: int, token: bytes, cap: int) -> SweepResult:
    return sweep(p, [(0, token)], [0], [((), node)], synthetic=True, cap=cap)


def classify_token(p: Pda, node: int, token_bytes: bytes, cap: int = DEFAULT_BRANCH_CAP) -> Classification:
    """Three-way classification of one token simulated from ``node``.

    Any run that would pop past the node's own frame makes the token
    context dependent, unless another run already accepts it in place.
    """
    if not token_bytes:
        raise ValueError("token_bytes must be non-empty")
    res = _simulate_token(p, node, token_bytes, cap)
    if res.accepted:
        return Classification.ACCEPTED
    if res.dependents:
        return Classification.DEPENDENT
    return Classification.REJECTED


def refine_dependent(p: Pda, ctx: "FollowFsa", node: int, token_bytes: bytes, cap: int = DEFAULT_BRANCH_CAP) -> Classification:
    """Re-examine a context-dependent token against the follow automaton.

    Each popping run left an unread remainder; if no remainder is a prefix
    of — or begins with — a legal continuation of the completed rule, no
    stack can save the token and it is rejected outright.
    """
    res = _simulate_token(p, node, token_bytes, cap)
    if res.accepted:
        return Classification.ACCEPTED
    if not res.dependents:
        return Classification.REJECTED
    rid = p.node_rule[node]
    _, remainders = res.dependents[0]
    if any(ctx.allows(rid, r) for r in remainders):
        return Classification.DEPENDENT
    return Classification.REJECTED


# ---------------------------------------------------------------------------
# Context expansion (follow automaton)

_END_STATE = -2


class FollowFsa:
    """Per-rule automaton of byte strings that may follow the rule.

    States are automaton nodes; the start set of rule R holds the return
    node of every edge referencing R.  Traversal follows character and
    epsilon edges.  A node with rule-reference edges is a wildcard stop
    (anything could follow through the callee).  A final node cascades into
    the follow set of its own rule — completing R may complete the
    enclosing rule too, in which case whatever follows *that* rule follows
    R as well; if the enclosing rule is the root, only end-of-input
    follows.  The result over-approximates every real continuation, so
    rejections are sound.
    """

    def __init__(self, p: Pda):
        self._p = p
        starts = {r.rid: set() for r in p.rules}
        for e in p.edges:
            if e.kind == RULE:
                starts[e.data].add(e.dst)
        self.starts = {rid: tuple(sorted(s)) for rid, s in starts.items()}
        self._wild = tuple(bool(p.rule_out[i]) for i in range(p.node_count))
        self._base = {}
        self._memo = {}

    def _expand(self, states: set):
        p = self._p
        seen = set(states)
        work = list(states)
        wild = False
        while work:
            s = work.pop()
            if s == _END_STATE:
                continue
            if self._wild[s]:
                wild = True
                continue
            for d in p.eps_out[s]:
                if d not in seen:
                    seen.add(d)
                    work.append(d)
            if p.is_final[s]:
                rid = p.node_rule[s]
                for t in self.starts[rid]:
                    if t not in seen:
                        seen.add(t)
                        work.append(t)
                if rid == p.root and _END_STATE not in seen:
                    seen.add(_END_STATE)
        return frozenset(seen), wild

    def _start_states(self, rid: int):
        got = self._base.get(rid, False)
        if got is not False:
            return got
        seed = set(self.starts[rid])
        if rid == self._p.root:
            seed.add(_END_STATE)
        out = self._expand(seed) if seed else None
        self._base[rid] = out
        return out

    def allows(self, rid: int, remainder: bytes) -> bool:
        """May some legal continuation of rule ``rid`` start with (or
        extend) ``remainder``?  Empty start information means "unknown" and
        allows everything."""
        key = (rid, remainder)
        got = self._memo.get(key)
        if got is not None:
            return got
        base = self._start_states(rid)
        if base is None:
            self._memo[key] = True
            return True
        states, wild = base
        ok = True
        if not wild:
            p = self._p
            for b in remainder:
                nxt = set()
                for s in states:
                    if s == _END_STATE or self._wild[s]:
                        continue
                    for d in p.byte_targets[s][b]:
                        nxt.add(d)
                if not nxt:
                    ok = False
                    break
                states, wild = self._expand(nxt)
                if wild:
                    break
        self._memo[key] = ok
        return ok


def build_context_expansion(p: Pda) -> FollowFsa:
    """Extract the follow automaton for every rule of the automaton."""
    return FollowFsa(p)


# ---------------------------------------------------------------------------
# Adaptive storage

ACCEPT_HEAVY, REJECT_HEAVY, BITSET_FORM = 0, 1, 2

_VARIANT_NAMES = {ACCEPT_HEAVY: "accept_heavy", REJECT_HEAVY: "reject_heavy", BITSET_FORM: "bitset"}


def pack_bitset(ids, vocab_size: int) -> np.ndarray:
    """Little-endian u32 bitset with the given token ids set."""
    words = np.zeros((vocab_size + 31) // 32, dtype=np.uint32)
    if len(ids):
        arr = np.asarray(ids, dtype=np.uint32)
        np.bitwise_or.at(words, arr >> 5, np.uint32(1) << (arr & np.uint32(31)))
    return words


@dataclass
class MaskCacheEntry:
    """One node's classification, in its byte-minimal encoding."""

    variant: int
    ids: np.ndarray  # rejected ids (accept-heavy) or accepted ids (reject-heavy)
    bits: Optional[np.ndarray]  # accepted-independent bitset (bitset form)
    dependent: np.ndarray

    def payload_size(self, vocab_size: int) -> int:
        return _variant_size(self.variant, len(self.ids), len(self.dependent), vocab_size)

    def partition(self, universe: np.ndarray, vocab_size: int):
        """Recover (accepted, rejected, dependent) id arrays.

        ``universe`` is the sorted array of ids the entry partitions (the
        non-special vocabulary)."""
        dep = self.dependent
        if self.variant == ACCEPT_HEAVY:
            rej = self.ids
            acc = np.setdiff1d(universe, np.concatenate([rej, dep]), assume_unique=False)
        elif self.variant == REJECT_HEAVY:
            acc = self.ids
            rej = np.setdiff1d(universe, np.concatenate([acc, dep]), assume_unique=False)
        else:
            unpacked = np.unpackbits(self.bits.view(np.uint8), bitorder="little")[:vocab_size]
            acc = np.nonzero(unpacked)[0].astype(np.uint32)
            rej = np.setdiff1d(universe, np.concatenate([acc, dep]), assume_unique=False)
        return acc.astype(np.uint32), rej.astype(np.uint32), dep


def _variant_size(variant: int, n_ids: int, n_dep: int, vocab_size: int) -> int:
    if variant == BITSET_FORM:
        return (vocab_size + 7) // 8 + 4 * n_dep
    return 4 * (n_ids + n_dep)


def choose_storage(accepted, rejected, dependent, vocab_size: int) -> MaskCacheEntry:
    """Pick the smallest of the three encodings for one entry.

    Ties resolve accept-heavy, then reject-heavy, then bitset.
    """
    acc = np.asarray(sorted(accepted), dtype=np.uint32)
    rej = np.asarray(sorted(rejected), dtype=np.uint32)
    dep = np.asarray(sorted(dependent), dtype=np.uint32)
    sizes = (
        _variant_size(ACCEPT_HEAVY, len(rej), len(dep), vocab_size),
        _variant_size(REJECT_HEAVY, len(acc), len(dep), vocab_size),
        _variant_size(BITSET_FORM, 0, len(dep), vocab_size),
    )
    variant = min(range(3), key=lambda i: sizes[i])
    if variant == ACCEPT_HEAVY:
        return MaskCacheEntry(ACCEPT_HEAVY, rej, None, dep)
    if variant == REJECT_HEAVY:
        return MaskCacheEntry(REJECT_HEAVY, acc, None, dep)
    return MaskCacheEntry(BITSET_FORM, np.zeros(0, dtype=np.uint32), pack_bitset(acc, vocab_size), dep)


# ---------------------------------------------------------------------------
# Cache container and serialization

_MAGIC = b"GMC1"
_VERSION = 1


@dataclass
class BuildStats:
    entry_count: int = 0
    accepted_total: int = 0
    rejected_total: int = 0
    dependent_before_total: int = 0  # before context expansion
    dependent_total: int = 0  # after (== before when expansion is off)
    bytes_examined_per_entry: int = 0
    variant_counts: dict = field(default_factory=dict)
    per_node: dict = field(default_factory=dict)  # node -> (n_acc, n_rej, n_dep)

    def mean_dependent_fraction(self, vocab_size: int) -> float:
        if not self.entry_count:
            return 0.0
        return self.dependent_total / (self.entry_count * vocab_size)


@dataclass
class TokenMaskCache:
    """Per stack-top-node mask entries for one automaton + vocabulary."""

    vocab_size: int
    entries: dict  # node id -> MaskCacheEntry
    stats: Optional[BuildStats] = None

    def serialize(self) -> bytes:
        out = [_MAGIC, struct.pack("<III", _VERSION, self.vocab_size, len(self.entries))]
        for node in sorted(self.entries):
            e = self.entries[node]
            out.append(struct.pack("<IB", node, e.variant))
            if e.variant == BITSET_FORM:
                words = e.bits.astype("<u4")
                out.append(struct.pack("<I", len(words)))
                out.append(words.tobytes())
            else:
                out.append(struct.pack("<I", len(e.ids)))
                out.append(e.ids.astype("<u4").tobytes())
            out.append(struct.pack("<I", len(e.dependent)))
            out.append(e.dependent.astype("<u4").tobytes())
        return b"".join(out)

    @classmethod
    def deserialize(cls, data: bytes) -> "TokenMaskCache":
        if data[:4] != _MAGIC:
            raise ValueError("not a mask cache blob")
        version, vocab_size, n_entries = struct.unpack_from("<III", data, 4)
        if version != _VERSION:
            raise ValueError(f"unsupported cache version {version}")
        pos = 16
        entries = {}
        for _ in range(n_entries):
            node, variant = struct.unpack_from("<IB", data, pos)
            pos += 5
            if variant == BITSET_FORM:
                (n_words,) = struct.unpack_from("<I", data, pos)
                pos += 4
                bits = np.frombuffer(data, dtype="<u4", count=n_words, offset=pos).astype(np.uint32)
                pos += 4 * n_words
                ids = np.zeros(0, dtype=np.uint32)
            else:
                (n_ids,) = struct.unpack_from("<I", data, pos)
                pos += 4
                ids = np.frombuffer(data, dtype="<u4", count=n_ids, offset=pos).astype(np.uint32)
                pos += 4 * n_ids
                bits = None
            (n_dep,) = struct.unpack_from("<I", data, pos)
            pos += 4
            dep = np.frombuffer(data, dtype="<u4", count=n_dep, offset=pos).astype(np.uint32)
            pos += 4 * n_dep
            entries[node] = MaskCacheEntry(variant, ids, bits, dep)
        return cls(vocab_size, entries)

    def serialized_bytes(self) -> int:
        return len(self.serialize())

    def variant_name(self, node: int) -> str:
        return _VARIANT_NAMES[self.entries[node].variant]


def bitset_encoding_bytes(cache: TokenMaskCache) -> int:
    """Size the cache would serialize to if every entry used the bitset
    form (same record headers, bitset payload plus the dependent list)."""
    total = len(_MAGIC) + 12
    words = (cache.vocab_size + 31) // 32
    for e in cache.entries.values():
        total += 5 + 4 + 4 * words + 4 + 4 * len(e.dependent)
    return total


# ---------------------------------------------------------------------------
# Cache build


def build_mask_cache(
    p: Pda,
    v: Vocabulary,
    idx: SortedVocabIndex,
    use_ctx_expansion: bool = True,
    cap: int = DEFAULT_BRANCH_CAP,
) -> TokenMaskCache:
    """Classify every (reachable stack-top node, token) pair.

    Tokens are swept in lexicographic order with shared-prefix rollback;
    empty and special tokens never reach the automaton (empty tokens are
    rejected outright, special tokens are the matcher's business).  With
    ``use_ctx_expansion`` the dependent set of each entry is filtered
    through the follow automaton.
    """
    follow = build_context_expansion(p) if use_ctx_expansion else None
    tokens = v.tokens

    items = []
    lcps = []
    forced_rejects = []
    for k, tid in enumerate(idx.order):
        tok = tokens[tid]
        if tok:
            items.append((tid, tok))
            lcps.append(idx.lcp[k])
        else:
            forced_rejects.append(tid)

    stats = BuildStats()
    entries = {}
    for node in reachable_top_nodes(p):
        res = sweep(p, items, lcps, [((), node)], synthetic=True, cap=cap)
        accepted = res.accepted
        rejected = res.rejected + forced_rejects
        dep_ids = []
        if follow is not None:
            rid = p.node_rule[node]
            for tid, remainders in res.dependents:
                if any(follow.allows(rid, r) for r in remainders):
                    dep_ids.append(tid)
                else:
                    rejected.append(tid)
        else:
            dep_ids = [tid for tid, _ in res.dependents]
        entry = choose_storage(accepted, rejected, dep_ids, v.size)
        entries[node] = entry
        stats.entry_count += 1
        stats.accepted_total += len(accepted)
        stats.rejected_total += len(rejected)
        stats.dependent_before_total += len(res.dependents)
        stats.dependent_total += len(dep_ids)
        stats.bytes_examined_per_entry = res.bytes_examined
        stats.variant_counts[_VARIANT_NAMES[entry.variant]] = (
            stats.variant_counts.get(_VARIANT_NAMES[entry.variant], 0) + 1
        )
        stats.per_node[node] = (len(accepted), len(rejected), len(dep_ids))

    return TokenMaskCache(v.size, entries, stats)

"""Runtime matching: parallel stacks, token masks, rollback, branching.

A matcher holds the set of surviving matching stacks for everything
accepted so far.  Stacks live in a shared persistent arena (see
``pstack``), so keeping a rollback history and splitting off independent
branches cost a handle copy per stack.

Mask generation follows the two-tier scheme: each stack top indexes the
precomputed cache entry for its node, only the entry's context-dependent
tokens are re-simulated against that stack, and the per-stack results are
merged with set operations sized by the stored (small) side of each entry.
Without a cache the matcher falls back to sweeping the sorted vocabulary
against the automaton directly.

A matcher is single-owner mutable: never mutate one instance from two
threads.  Branch-derived matchers may be driven from different threads;
they share only the arena and read-only tables.
"""

from __future__ import annotations

from collections import deque
from typing import Optional

import numpy as np

from .cache import ACCEPT_HEAVY, DEFAULT_BRANCH_CAP, REJECT_HEAVY, pack_bitset, sweep
from .pda import Pda
from .pstack import EMPTY, StackArena
from .vocab import Vocabulary, build_sorted_index

__all__ = ["TokenMask", "Matcher", "MatcherError"]


class MatcherError(RuntimeError):
    pass


class TokenMask:
    """Fixed-width bitset over the vocabulary; bit i = token i permitted.

    The wire format is little-endian u32 words: bit ``i mod 32`` of word
    ``i // 32`` marks token ``i``; bits beyond the vocabulary size are zero.
    """

    __slots__ = ("vocab_size", "words")

    def __init__(self, vocab_size: int, words: Optional[np.ndarray] = None):
        self.vocab_size = vocab_size
        n_words = (vocab_size + 31) // 32
        if words is None:
            words = np.zeros(n_words, dtype=np.uint32)
        elif len(words) != n_words:
            raise ValueError(f"expected {n_words} words, got {len(words)}")
        self.words = words

    def _trim(self):
        tail = self.vocab_size & 31
        if tail and len(self.words):
            self.words[-1] &= np.uint32((1 << tail) - 1)

    def is_allowed(self, tid: int) -> bool:
        return bool((self.words[tid >> 5] >> np.uint32(tid & 31)) & np.uint32(1))

    def set_bit(self, tid: int):
        self.words[tid >> 5] |= np.uint32(1) << np.uint32(tid & 31)

    def clear(self):
        self.words[:] = 0

    def count(self) -> int:
        return int(np.unpackbits(self.words.view(np.uint8)).sum())

    def allowed_ids(self) -> np.ndarray:
        bits = np.unpackbits(self.words.view(np.uint8), bitorder="little")[: self.vocab_size]
        return np.nonzero(bits)[0]

    def to_bytes(self) -> bytes:
        return self.words.astype("<u4").tobytes()

    @classmethod
    def from_bytes(cls, vocab_size: int, data: bytes) -> "TokenMask":
        words = np.frombuffer(data, dtype="<u4").astype(np.uint32)
        return cls(vocab_size, words)

    def to_hex(self) -> str:
        return self.to_bytes().hex()

    def copy(self) -> "TokenMask":
        return TokenMask(self.vocab_size, self.words.copy())

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, TokenMask)
            and self.vocab_size == other.vocab_size
            and bool(np.array_equal(self.words, other.words))
        )

    def __hash__(self):  # pragma: no cover - masks are not dict keys
        return hash((self.vocab_size, self.to_bytes()))


class Matcher:
    """Stateful grammar matcher over a compiled bundle.

    ``history_window`` bounds how many accepted tokens can be rolled back.
    """

    def __init__(
        self,
        bundle,
        vocab: Vocabulary,
        history_window: int = 32,
        *,
        branch_cap: int = DEFAULT_BRANCH_CAP,
        dependent_sweep_threshold: int = 64,
    ):
        if bundle.vocab_hash != vocab.content_hash():
            raise MatcherError(
                f"vocabulary does not match bundle (hash {vocab.content_hash().hex()[:12]}... "
                f"vs bundle {bundle.vocab_hash.hex()[:12]}...)"
            )
        self._bundle = bundle
        self._p: Pda = bundle.pda
        self._cache = bundle.cache
        self._v = vocab
        self._window = history_window
        self._cap = branch_cap
        self._dep_threshold = dependent_sweep_threshold

        self._arena = StackArena()
        self._history = deque()
        self._terminated = False
        self._closed = False

        p = self._p
        self._root_finals = frozenset(
            n for n in range(p.node_count) if p.is_final[n] and p.node_rule[n] == p.root
        )

        valid_ids = [
            tid for tid in range(vocab.size) if tid not in vocab.special_tokens and vocab.tokens[tid]
        ]
        self._universe_words = pack_bitset(valid_ids, vocab.size)
        self._n_words = (vocab.size + 31) // 32

        self._brute_items = None  # built lazily for uncached fills
        self._dep_items = {}  # node -> (items, lcps) for large dependent lists

        # Stacks rest at byte-step boundaries (the root start, character
        # edge targets, popped-through return nodes); closure runs inside
        # the simulations, so transient pushed/epsilon states never occupy
        # the tops set or index the cache.
        self._tops = [(EMPTY, p.start_node())]

    # -- shared state helpers ---------------------------------------------

    def _check_open(self):
        if self._closed:
            raise MatcherError("matcher is closed")

    def _close(self, branches) -> list:
        """Closure over silent moves, deduplicated by stack content."""
        p = self._p
        arena = self._arena
        push = arena.push
        par = arena.parent
        nod = arena.node
        seen = set(branches)
        work = list(branches)
        while work:
            h, n = work.pop()
            for d in p.eps_out[n]:
                t = (h, d)
                if t not in seen:
                    seen.add(t)
                    work.append(t)
            for rid, ret in p.rule_out[n]:
                t = (push(h, ret), p.rules[rid].start)
                if t not in seen:
                    seen.add(t)
                    work.append(t)
            if p.is_final[n] and h != EMPTY:
                t = (par[h], nod[h])
                if t not in seen:
                    seen.add(t)
                    work.append(t)
            if len(seen) > self._cap:
                raise MatcherError(f"stack set exceeded cap of {self._cap}")
        return list(seen)

    def _rewrite_kernel(self, stepped) -> list:
        """Pop spent finals through, then deduplicate by stack content."""
        arena = self._arena
        dead_end = self._p.dead_end
        par = arena.parent
        nod = arena.node
        by_content = {}
        for h, n in stepped:
            while dead_end[n] and h != EMPTY:
                h, n = par[h], nod[h]
            key = (arena.materialize(h), n)
            prev = by_content.get(key)
            if prev is None or h < prev:
                by_content[key] = h
        return [(h, key[1]) for key, h in sorted(by_content.items())]

    def _sim_bytes(self, branches, data: bytes) -> Optional[list]:
        p = self._p
        states = branches
        for b in data:
            closed = self._close(states)
            stepped = {(h, d) for h, n in closed for d in p.byte_targets[n][b]}
            if not stepped:
                return None
            states = self._rewrite_kernel(stepped)
        return states

    def _closed_facts(self) -> tuple:
        """(terminable, union of acceptable first bytes) over the closure.

        Closure transients are reclaimed before returning, so only facts
        leave this method, never handles.
        """
        self._arena.begin_log()
        try:
            closed = self._close(self._tops)
            term = any(h == EMPTY and n in self._root_finals for h, n in closed)
            allowed = 0
            for _, n in closed:
                allowed |= self._p.first_bytes[n]
            return term, allowed
        finally:
            self._arena.end_log()

    def _terminable(self) -> bool:
        return self._closed_facts()[0]

    def _push_history(self):
        self._history.append((self._tops, self._terminated))
        while len(self._history) > self._window:
            old_tops, _ = self._history.popleft()
            for h, _ in old_tops:
                self._arena.decref(h)

    # -- accepting ----------------------------------------------------------

    def accept_bytes(self, data: bytes) -> bool:
        """Consume raw bytes; on failure the state is unchanged."""
        self._check_open()
        if self._terminated:
            raise MatcherError("matcher is terminated")
        if not data:
            self._push_history()
            self._tops = [(h, n) for h, n in self._tops]
            for h, _ in self._tops:
                self._arena.incref(h)
            return True
        self._arena.begin_log()
        try:
            survivors = self._sim_bytes(self._tops, data)
            if survivors is not None:
                for h, _ in survivors:
                    self._arena.incref(h)
        finally:
            self._arena.end_log()
        if survivors is None:
            return False
        self._push_history()
        self._tops = survivors
        return True

    def accept_token(self, tid: int) -> bool:
        """Consume one token; EOS terminates when the stacks allow it."""
        self._check_open()
        if self._terminated:
            raise MatcherError("matcher is terminated")
        if not (0 <= tid < self._v.size):
            raise MatcherError(f"token id {tid} out of range")
        if tid == self._v.eos_id:
            if not self._terminable():
                return False
            self._push_history()
            self._tops = [(h, n) for h, n in self._tops]
            for h, _ in self._tops:
                self._arena.incref(h)
            self._terminated = True
            return True
        if self._v.is_special(tid):
            return False
        tok = self._v.tokens[tid]
        if not tok:
            return False
        return self.accept_bytes(tok)

    # -- rollback / branching ------------------------------------------------

    @property
    def history_depth(self) -> int:
        return len(self._history)

    @property
    def terminated(self) -> bool:
        return self._terminated

    def can_terminate(self) -> bool:
        self._check_open()
        return self._terminable()

    def rollback(self, steps: int):
        """Restore the state from ``steps`` acceptances ago."""
        self._check_open()
        if steps < 0 or steps > len(self._history):
            raise MatcherError(f"cannot roll back {steps} steps (history {len(self._history)})")
        if steps == 0:
            return
        entry = None
        for _ in range(steps):
            if entry is not None:
                tops, _ = entry
                for h, _ in tops:
                    self._arena.decref(h)
            entry = self._history.pop()
        for h, _ in self._tops:
            self._arena.decref(h)
        self._tops, self._terminated = entry

    def branch(self) -> "Matcher":
        """Independent matcher sharing the stack arena; O(stacks) cost."""
        self._check_open()
        m = object.__new__(Matcher)
        m._bundle = self._bundle
        m._p = self._p
        m._cache = self._cache
        m._v = self._v
        m._window = self._window
        m._cap = self._cap
        m._dep_threshold = self._dep_threshold
        m._arena = self._arena
        m._root_finals = self._root_finals
        m._universe_words = self._universe_words
        m._n_words = self._n_words
        m._brute_items = self._brute_items
        m._dep_items = self._dep_items
        m._terminated = self._terminated
        m._closed = False
        m._tops = list(self._tops)
        for h, _ in m._tops:
            self._arena.incref(h)
        m._history = deque()
        for tops, flag in self._history:
            for h, _ in tops:
                self._arena.incref(h)
            m._history.append((tops, flag))
        return m

    def close(self):
        """Release arena references; further operations raise."""
        if self._closed:
            return
        for h, _ in self._tops:
            self._arena.decref(h)
        for tops, _ in self._history:
            for h, _ in tops:
                self._arena.decref(h)
        self._tops = []
        self._history.clear()
        self._closed = True

    # -- mask generation -------------------------------------------------------

    def next_token_mask(self) -> TokenMask:
        out = TokenMask(self._v.size)
        self.fill_next_token_mask(out)
        return out

    def fill_next_token_mask(self, out: TokenMask):
        """Write the permitted-token bitset for the current state."""
        self._check_open()
        if self._terminated:
            raise MatcherError("matcher is terminated")
        if out.vocab_size != self._v.size:
            raise MatcherError("mask size does not match the vocabulary")
        if self._cache is not None:
            self._fill_cached(out)
        else:
            self._fill_brute(out)
        if self._terminable():
            out.set_bit(self._v.eos_id)
        out._trim()

    def _fill_cached(self, out: TokenMask):
        partial_rej = np.full(self._n_words, 0xFFFFFFFF, dtype=np.uint32)
        partial_acc = np.zeros(self._n_words, dtype=np.uint32)
        entries = self._cache.entries
        v = self._v.size
        for h, n in self._tops:
            entry = entries[n]
            dep_acc, dep_rej = self._resolve_dependents((h, n), entry.dependent)
            if entry.variant == REJECT_HEAVY:
                acc = entry.ids if not dep_acc else np.concatenate([entry.ids, dep_acc])
                partial_acc |= pack_bitset(acc, v)
            elif entry.variant == ACCEPT_HEAVY:
                rej = entry.ids if not dep_rej else np.concatenate([entry.ids, dep_rej])
                partial_rej &= pack_bitset(rej, v)
            else:
                acc_words = entry.bits
                if dep_acc:
                    acc_words = acc_words | pack_bitset(dep_acc, v)
                partial_rej &= ~acc_words
        rejected = partial_rej & ~partial_acc
        out.words[:] = ~rejected & self._universe_words

    def _resolve_dependents(self, top, dep_ids) -> tuple:
        """Simulate the entry's dependent tokens against one full stack."""
        if not len(dep_ids):
            return [], []
        h, n = top
        content = [(self._arena.materialize(h), n)]
        tokens = self._v.tokens
        if len(dep_ids) > self._dep_threshold:
            cached = self._dep_items.get(n)
            if cached is None:
                pairs = sorted(((tokens[t], int(t)) for t in dep_ids))
                items = [(tid, tok) for tok, tid in pairs]
                lcps = [0] * len(items)
                for k in range(1, len(items)):
                    a, b = items[k - 1][1], items[k][1]
                    m = min(len(a), len(b))
                    i = 0
                    while i < m and a[i] == b[i]:
                        i += 1
                    lcps[k] = i
                cached = (items, lcps)
                self._dep_items[n] = cached
            items, lcps = cached
            res = sweep(self._p, items, lcps, content, synthetic=False, cap=self._cap)
            return res.accepted, res.rejected
        acc, rej = [], []
        for t in dep_ids:
            tid = int(t)
            res = sweep(self._p, [(tid, tokens[tid])], [0], content, synthetic=False, cap=self._cap)
            (acc if res.accepted else rej).append(tid)
        return acc, rej

    def _fill_brute(self, out: TokenMask):
        if self._brute_items is None:
            idx = build_sorted_index(self._v)
            items, lcps = [], []
            for k, tid in enumerate(idx.order):
                tok = self._v.tokens[tid]
                if tok:
                    items.append((tid, tok))
                    lcps.append(idx.lcp[k])
            self._brute_items = (items, lcps)
        items, lcps = self._brute_items
        contents = [(self._arena.materialize(h), n) for h, n in self._tops]
        res = sweep(self._p, items, lcps, contents, synthetic=False, cap=self._cap)
        out.words[:] = pack_bitset(np.asarray(res.accepted, dtype=np.uint32), self._v.size)
        out.words &= self._universe_words

    # -- jump-forward ------------------------------------------------------------

    def find_jump_forward_bytes(self, max_len: int = 4096) -> bytes:
        """Longest byte string forced by the grammar from the current state.

        Stops at the first position with a choice of bytes, a possible
        termination, or the length cap; does not change the matcher.
        """
        self._check_open()
        if self._terminated:
            raise MatcherError("matcher is terminated")
        scratch = self.branch()
        forced = bytearray()
        try:
            while len(forced) < max_len:
                term, allowed = scratch._closed_facts()
                if term or allowed.bit_count() != 1:
                    break
                b = allowed.bit_length() - 1
                if not scratch.accept_bytes(bytes([b])):
                    break
                forced.append(b)
        finally:
            scratch.close()
        return bytes(forced)

    # -- introspection -------------------------------------------------------------

    def stack_count(self) -> int:
        return len(self._tops)

    def stack_contents(self) -> list:
        """Materialized stacks (return chains plus current node), sorted."""
        return sorted((self._arena.materialize(h) + (n,)) for h, n in self._tops)

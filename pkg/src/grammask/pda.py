"""Byte-level pushdown automaton.

The automaton is a collection of per-rule finite state automata.  Edges
carry one of three labels: a byte class (consume one byte), a rule
reference (push the return node, jump to the referenced rule's start), or
epsilon.  A matching stack is a sequence of nodes whose last element is the
current position; the elements below it are pending return nodes.

This module provides the Thompson-style construction from a normalized
grammar, the two structure optimizations (rule inlining and node merging),
and a deliberately naive set-of-stacks interpreter that serves as the
correctness oracle for everything built on top.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .grammar import (
    ByteClass,
    Choice,
    Empty,
    Grammar,
    Literal,
    Repeat,
    RuleExpr,
    RuleRef,
    Seq,
    normalize_grammar,
)

__all__ = [
    "EPS",
    "CHAR",
    "RULE",
    "PdaEdge",
    "PdaRule",
    "Pda",
    "StateLimitError",
    "build_pda",
    "inline_rules",
    "merge_nodes",
    "oracle_accepts",
    "oracle_partial_states",
    "oracle_step_states",
    "reachable_top_nodes",
    "to_dot",
]

EPS, CHAR, RULE = 0, 1, 2

DEFAULT_STATE_CAP = 4096


class StateLimitError(RuntimeError):
    """The simulation state set grew past its configured cap."""


@dataclass(frozen=True)
class PdaEdge:
    src: int
    dst: int
    kind: int
    data: object  # CHAR: tuple[(lo, hi), ...]; RULE: rule id; EPS: None


@dataclass(frozen=True)
class PdaRule:
    rid: int
    name: str
    start: int
    finals: frozenset


class Pda:
    """Immutable automaton with precomputed adjacency tables."""

    def __init__(self, node_rule: Iterable[int], edges: Iterable[PdaEdge], rules: Iterable[PdaRule], root: int):
        self.node_rule = tuple(node_rule)
        self.edges = tuple(edges)
        self.rules = tuple(rules)
        self.root = root
        self._validate()
        self._freeze()

    # -- construction-time checks ------------------------------------------

    def _validate(self):
        n = len(self.node_rule)
        for e in self.edges:
            if not (0 <= e.src < n and 0 <= e.dst < n):
                raise ValueError(f"edge {e} references missing node")
        for r in self.rules:
            if self.node_rule[r.start] != r.rid:
                raise ValueError(f"start of rule {r.name} lies outside it")
            for f in r.finals:
                if self.node_rule[f] != r.rid:
                    raise ValueError(f"final {f} of rule {r.name} lies outside it")
        if not (0 <= self.root < len(self.rules)):
            raise ValueError("missing root rule")

    def _freeze(self):
        n = len(self.node_rule)
        eps_out = [[] for _ in range(n)]
        rule_out = [[] for _ in range(n)]
        char_out = [[] for _ in range(n)]
        for e in self.edges:
            if e.kind == EPS:
                eps_out[e.src].append(e.dst)
            elif e.kind == RULE:
                rule_out[e.src].append((e.data, e.dst))
            else:
                char_out[e.src].append((e.data, e.dst))
        self.eps_out = [tuple(v) for v in eps_out]
        self.rule_out = [tuple(v) for v in rule_out]
        self.char_out = [tuple(v) for v in char_out]

        is_final = [False] * n
        for r in self.rules:
            for f in r.finals:
                is_final[f] = True
        self.is_final = tuple(is_final)

        # nodes where simulation closure is the identity (no silent moves)
        self.quiet = tuple(
            not eps_out[i] and not rule_out[i] and not is_final[i] for i in range(n)
        )
        # final nodes whose only move is the pop: a stack resting here is
        # interchangeable with its popped successor
        self.dead_end = tuple(
            is_final[i] and not eps_out[i] and not rule_out[i] and not char_out[i]
            for i in range(n)
        )

        # byte -> targets fan-out table, and a 256-bit "some edge accepts
        # this byte" mask per node (used for jump-forward and byte probing)
        empty = ()
        byte_targets = [None] * n
        first_bytes = [0] * n
        for u in range(n):
            if not char_out[u]:
                byte_targets[u] = (empty,) * 256
                continue
            row = [empty] * 256
            mask = 0
            for ranges, dst in char_out[u]:
                for lo, hi in ranges:
                    mask |= ((1 << (hi - lo + 1)) - 1) << lo
                    for b in range(lo, hi + 1):
                        row[b] += (dst,)
            byte_targets[u] = tuple(row)
            first_bytes[u] = mask
        self.byte_targets = tuple(byte_targets)
        self.first_bytes = tuple(first_bytes)

        self.rule_nodes = {r.rid: tuple(i for i in range(n) if self.node_rule[i] == r.rid) for r in self.rules}

    # -- conveniences --------------------------------------------------------

    @property
    def node_count(self) -> int:
        return len(self.node_rule)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def rule_named(self, name: str) -> PdaRule:
        for r in self.rules:
            if r.name == name:
                return r
        raise KeyError(name)

    def start_node(self) -> int:
        return self.rules[self.root].start


# ---------------------------------------------------------------------------
# Mutable builder shared by construction and the optimization passes


class _Builder:
    def __init__(self):
        self.node_rule = []
        self.edges = []  # [src, dst, kind, data]
        self.rule_names = []
        self.rule_start = []
        self.rule_finals = []
        self.root = 0

    @classmethod
    def from_pda(cls, p: Pda) -> "_Builder":
        b = cls()
        b.node_rule = list(p.node_rule)
        b.edges = [[e.src, e.dst, e.kind, e.data] for e in p.edges]
        b.rule_names = [r.name for r in p.rules]
        b.rule_start = [r.start for r in p.rules]
        b.rule_finals = [set(r.finals) for r in p.rules]
        b.root = p.root
        return b

    def new_node(self, rid: int) -> int:
        self.node_rule.append(rid)
        return len(self.node_rule) - 1

    def add_edge(self, src: int, dst: int, kind: int, data=None):
        self.edges.append([src, dst, kind, data])

    def to_pda(self) -> Pda:
        rules = [
            PdaRule(i, self.rule_names[i], self.rule_start[i], frozenset(self.rule_finals[i]))
            for i in range(len(self.rule_names))
        ]
        edges = [PdaEdge(s, d, k, v) for s, d, k, v in self.edges]
        return Pda(self.node_rule, edges, rules, self.root)

    def compacted(self, alive) -> Pda:
        """Renumber nodes, dropping dead ones, and emit a canonical Pda."""
        remap = {}
        node_rule = []
        for old in range(len(self.node_rule)):
            if alive[old]:
                remap[old] = len(node_rule)
                node_rule.append(self.node_rule[old])
        edges = sorted(
            (remap[s], remap[d], k, v)
            for s, d, k, v in self.edges
        )
        rules = [
            PdaRule(
                i,
                self.rule_names[i],
                remap[self.rule_start[i]],
                frozenset(remap[f] for f in self.rule_finals[i] if alive[f]),
            )
            for i in range(len(self.rule_names))
        ]
        return Pda(node_rule, [PdaEdge(*e) for e in edges], rules, self.root)


# ---------------------------------------------------------------------------
# Construction


def build_pda(g: Grammar) -> Pda:
    """Compile a grammar into a PDA, one FSA per rule.

    Byte classes become character edges, rule references become reference
    edges, and choices/repetitions introduce epsilon edges (minus the
    single-edge star, which compiles directly to a self loop).
    """
    g = normalize_grammar(g)
    rid_of = {r.name: i for i, r in enumerate(g.rules)}
    b = _Builder()
    b.rule_names = [r.name for r in g.rules]
    b.rule_start = [0] * len(g.rules)
    b.rule_finals = [set() for _ in g.rules]
    b.root = rid_of[g.root]

    def emit(expr: RuleExpr, src: int, rid: int) -> int:
        if isinstance(expr, Empty):
            return src
        if isinstance(expr, Literal):
            cur = src
            for byte in expr.data:
                nxt = b.new_node(rid)
                b.add_edge(cur, nxt, CHAR, ((byte, byte),))
                cur = nxt
            return cur
        if isinstance(expr, ByteClass):
            nxt = b.new_node(rid)
            b.add_edge(src, nxt, CHAR, expr.ranges)
            return nxt
        if isinstance(expr, Seq):
            cur = src
            for item in expr.items:
                cur = emit(item, cur, rid)
            return cur
        if isinstance(expr, Choice):
            join = b.new_node(rid)
            for item in expr.items:
                head = b.new_node(rid)
                b.add_edge(src, head, EPS)
                tail = emit(item, head, rid)
                b.add_edge(tail, join, EPS)
            return join
        if isinstance(expr, Repeat):
            cur = src
            for _ in range(expr.lo):
                cur = emit(expr.item, cur, rid)
            if expr.hi is None:
                # loop on a dedicated node so the loop cannot capture edges
                # of neighboring constructs
                loop = b.new_node(rid)
                b.add_edge(cur, loop, EPS)
                item = expr.item
                if isinstance(item, ByteClass):
                    b.add_edge(loop, loop, CHAR, item.ranges)
                elif isinstance(item, Literal) and len(item.data) == 1:
                    b.add_edge(loop, loop, CHAR, ((item.data[0], item.data[0]),))
                else:
                    tail = emit(item, loop, rid)
                    b.add_edge(tail, loop, EPS)
                return loop
            for _ in range(expr.hi - expr.lo):
                nxt = emit(expr.item, cur, rid)
                if any(e[0] == nxt for e in b.edges):
                    # the body exit already carries edges (a trailing loop);
                    # a skip edge must bypass them, not enter them
                    fresh = b.new_node(rid)
                    b.add_edge(nxt, fresh, EPS)
                    nxt = fresh
                b.add_edge(cur, nxt, EPS)
                cur = nxt
            return cur
        if isinstance(expr, RuleRef):
            ret = b.new_node(rid)
            b.add_edge(src, ret, RULE, rid_of[expr.name])
            return ret
        raise TypeError(expr)

    for rid, rule in enumerate(g.rules):
        entry = b.new_node(rid)
        b.rule_start[rid] = entry
        exit_node = emit(rule.body, entry, rid)
        b.rule_finals[rid] = {exit_node}

    return b.to_pda()


# ---------------------------------------------------------------------------
# Rule inlining


def inline_rules(p: Pda, max_rule_size: int = 16, max_result_size: int = 512) -> Pda:
    """Substitute small reference-free rules into their call sites.

    A rule qualifies when its FSA contains no rule-reference edges and has
    at most ``max_rule_size`` nodes; a call site is rewritten only while the
    host rule stays within ``max_result_size`` nodes.  Runs to fixpoint.
    The substituted rules are kept (possibly unreferenced) so the automaton
    still contains every rule of the grammar.
    """
    b = _Builder.from_pda(p)

    def rule_sizes():
        sizes = [0] * len(b.rule_names)
        for rid in b.node_rule:
            sizes[rid] += 1
        return sizes

    while True:
        sizes = rule_sizes()
        has_ref = [False] * len(b.rule_names)
        for s, _, k, _ in b.edges:
            if k == RULE:
                has_ref[b.node_rule[s]] = True
        inlinable = {
            rid
            for rid in range(len(b.rule_names))
            if not has_ref[rid] and sizes[rid] <= max_rule_size
        }
        changed = False
        for host in range(len(b.rule_names)):
            ref_eids = [
                i
                for i, (s, _, k, v) in enumerate(b.edges)
                if k == RULE and v in inlinable and b.node_rule[s] == host
            ]
            if not ref_eids:
                continue
            grown = sizes[host] + sum(sizes[b.edges[i][3]] for i in ref_eids)
            if grown > max_result_size:
                continue
            for eid in ref_eids:
                src, ret, _, rid = b.edges[eid]
                remap = {}
                for old in sorted(i for i, r in enumerate(b.node_rule) if r == rid):
                    remap[old] = b.new_node(host)
                for s, d, k, v in list(b.edges):
                    if b.node_rule[s] == rid and s in remap:
                        b.add_edge(remap[s], remap[d], k, v)
                b.add_edge(src, remap[b.rule_start[rid]], EPS)
                for f in b.rule_finals[rid]:
                    b.add_edge(remap[f], ret, EPS)
                b.edges[eid][2] = EPS
                b.edges[eid][3] = None
                b.edges[eid][1] = b.edges[eid][0]  # degrade to a self-eps, dropped below
            changed = True
            sizes = rule_sizes()
        if not changed:
            break

    b.edges = [e for e in b.edges if not (e[2] == EPS and e[0] == e[1])]
    return b.compacted([True] * len(b.node_rule))


# ---------------------------------------------------------------------------
# Node merging


def merge_nodes(p: Pda) -> Pda:
    """Merge equivalent neighbor nodes and eliminate removable epsilons.

    Two rewrites run to fixpoint:

    * targets of same-label edges from one source are merged when neither
      target has another inbound edge;
    * an epsilon edge ``s -> t`` is contracted when ``t`` has no other
      inbound edge, or when ``s`` has no other outbound edge (the latter
      additionally requires that ``s`` is not final unless ``t`` is, since
      contraction would otherwise extend acceptance to strings that only
      reach ``t``).

    Both rewrites preserve the recognized language while lowering node and
    edge counts, which shrinks runtime stack fan-out.
    """
    b = _Builder.from_pda(p)
    n = len(b.node_rule)
    alive = [True] * n
    is_final = [False] * n
    for rid in range(len(b.rule_names)):
        for f in b.rule_finals[rid]:
            is_final[f] = True
    is_start = [False] * n
    for s in b.rule_start:
        is_start[s] = True

    out_ids = [set() for _ in range(n)]
    in_ids = [set() for _ in range(n)]
    edge_alive = [True] * len(b.edges)
    for i, (s, d, _, _) in enumerate(b.edges):
        out_ids[s].add(i)
        in_ids[d].add(i)

    def kill_edge(eid):
        edge_alive[eid] = False
        s, d, _, _ = b.edges[eid]
        out_ids[s].discard(eid)
        in_ids[d].discard(eid)

    def fuse(keep: int, drop: int):
        """Move every connection of ``drop`` onto ``keep``."""
        for eid in list(in_ids[drop]):
            in_ids[drop].discard(eid)
            b.edges[eid][1] = keep
            in_ids[keep].add(eid)
        for eid in list(out_ids[drop]):
            out_ids[drop].discard(eid)
            b.edges[eid][0] = keep
            out_ids[keep].add(eid)
        if is_final[drop]:
            is_final[keep] = True
        if is_start[drop]:
            is_start[keep] = True
            for rid in range(len(b.rule_start)):
                if b.rule_start[rid] == drop:
                    b.rule_start[rid] = keep
        alive[drop] = False

    def dedupe_pass() -> bool:
        changed = False
        seen = {}
        for eid in range(len(b.edges)):
            if not edge_alive[eid]:
                continue
            s, d, k, v = b.edges[eid]
            if k == EPS and s == d:
                kill_edge(eid)
                changed = True
                continue
            key = (s, d, k, v)
            if key in seen:
                kill_edge(eid)
                changed = True
            else:
                seen[key] = eid
        return changed

    def sibling_pass() -> bool:
        changed = False
        for u in range(n):
            if not alive[u]:
                continue
            groups = {}
            for eid in sorted(out_ids[u]):
                s, d, k, v = b.edges[eid]
                groups.setdefault((k, v), []).append(d)
            for dsts in groups.values():
                candidates = []
                for d in dict.fromkeys(dsts):
                    if d != u and not is_start[d] and len(in_ids[d]) == 1:
                        candidates.append(d)
                if len(candidates) >= 2:
                    keep = candidates[0]
                    for drop in candidates[1:]:
                        fuse(keep, drop)
                    changed = True
        return changed

    def eps_pass() -> bool:
        changed = False
        for eid in range(len(b.edges)):
            if not edge_alive[eid]:
                continue
            s, t, k, _ = b.edges[eid]
            if k != EPS:
                continue
            if s == t:
                kill_edge(eid)
                changed = True
                continue
            if len(in_ids[t]) == 1 and not is_start[t]:
                kill_edge(eid)
                fuse(s, t)
                changed = True
            elif len(out_ids[s]) == 1 and (not is_final[s] or is_final[t]):
                kill_edge(eid)
                fuse(t, s)
                changed = True
        return changed

    while True:
        changed = dedupe_pass()
        changed |= sibling_pass()
        changed |= dedupe_pass()
        changed |= eps_pass()
        if not changed:
            break

    b.edges = [e for i, e in enumerate(b.edges) if edge_alive[i]]
    for rid in range(len(b.rule_names)):
        b.rule_finals[rid] = {f for f in range(n) if alive[f] and is_final[f] and b.node_rule[f] == rid}
    return b.compacted(alive)


# ---------------------------------------------------------------------------
# Naive oracle interpreter
#
# A parsing state is a tuple of node ids: the last element is the current
# node, the elements before it are pending return nodes.  The interpreter
# keeps the full set of such stacks and is the ground truth against which
# the cache-backed matcher is checked.


def _oracle_closure(p: Pda, states: set, cap: int) -> set:
    work = list(states)
    seen = set(states)
    while work:
        st = work.pop()
        top = st[-1]
        nxt = []
        for dst in p.eps_out[top]:
            nxt.append(st[:-1] + (dst,))
        for rid, ret in p.rule_out[top]:
            nxt.append(st[:-1] + (ret, p.rules[rid].start))
        if p.is_final[top] and len(st) > 1:
            nxt.append(st[:-1])
        for ns in nxt:
            if ns not in seen:
                seen.add(ns)
                work.append(ns)
                if len(seen) > cap:
                    raise StateLimitError(f"state set exceeded cap of {cap}")
    return seen


def oracle_step_states(p: Pda, states: Iterable[tuple], data: bytes, cap: int = DEFAULT_STATE_CAP) -> frozenset:
    """Advance a set of stacks over ``data``; empty result = dead prefix."""
    current = _oracle_closure(p, set(states), cap)
    for byte in data:
        stepped = set()
        for st in current:
            for dst in p.byte_targets[st[-1]][byte]:
                stepped.add(st[:-1] + (dst,))
        if not stepped:
            return frozenset()
        current = _oracle_closure(p, stepped, cap)
    return frozenset(current)


def oracle_partial_states(p: Pda, data: bytes, cap: int = DEFAULT_STATE_CAP) -> frozenset:
    """Surviving stacks after consuming ``data`` from the start state."""
    return oracle_step_states(p, [(p.start_node(),)], data, cap)


def oracle_accepts(p: Pda, data: bytes, cap: int = DEFAULT_STATE_CAP) -> bool:
    """True iff some run consumes ``data`` and ends the root rule with an
    empty stack."""
    return any(
        len(st) == 1 and p.is_final[st[0]] and p.node_rule[st[0]] == p.root
        for st in oracle_partial_states(p, data, cap)
    )


# ---------------------------------------------------------------------------
# Stack-top reachability (the cache key set)


def reachable_top_nodes(p: Pda) -> list:
    """Nodes where a stack can rest between tokens (the cache key set).

    A matcher stores stacks only at byte-step boundaries: tops are the root
    start, character-edge targets, and the return nodes that pop-through
    rewriting of spent finals can land on.  Nodes visited transiently
    during closure (pushed rule starts, epsilon hops) never carry a resting
    stack, and final nodes with no outgoing edges are rewritten to their
    popped successor unless they belong to the root rule (where they encode
    the terminated state).
    """
    # restrict to nodes actually reachable from the root start at all
    seen = {p.start_node()}
    work = [p.start_node()]
    while work:
        u = work.pop()
        nxt = [d for _, d in p.char_out[u]]
        nxt.extend(p.eps_out[u])
        for rid, ret in p.rule_out[u]:
            nxt.append(p.rules[rid].start)
            nxt.append(ret)
        for v in nxt:
            if v not in seen:
                seen.add(v)
                work.append(v)
    candidates = {p.start_node()}
    for u in seen:
        candidates.update(d for _, d in p.char_out[u])
        candidates.update(ret for _, ret in p.rule_out[u])
    return sorted(
        v for v in candidates if v in seen and not (p.dead_end[v] and p.node_rule[v] != p.root)
    )


# ---------------------------------------------------------------------------
# Debug output


def _ranges_label(ranges) -> str:
    def show(x):
        if 0x21 <= x <= 0x7E and chr(x) not in "\\\"":
            return chr(x)
        return f"\\\\x{x:02x}"

    return "".join(show(lo) if lo == hi else f"{show(lo)}-{show(hi)}" for lo, hi in ranges)


def to_dot(p: Pda) -> str:
    """Render the automaton as GraphViz text, one cluster per rule."""
    lines = ["digraph pda {", "  rankdir=LR;", "  node [shape=circle];"]
    for r in p.rules:
        lines.append(f"  subgraph cluster_{r.rid} {{")
        lines.append(f'    label="{r.name}";')
        for node in p.rule_nodes[r.rid]:
            shape = "doublecircle" if p.is_final[node] else "circle"
            extra = ' style=bold' if node == r.start else ""
            lines.append(f'    n{node} [shape={shape}{extra} label="{node}"];')
        lines.append("  }")
    for e in p.edges:
        if e.kind == EPS:
            label = "&epsilon;"
        elif e.kind == RULE:
            label = f"&lt;{p.rules[e.data].name}&gt;"
        else:
            label = f"[{_ranges_label(e.data)}]"
        lines.append(f'  n{e.src} -> n{e.dst} [label="{label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"

"""Persistent tree of matching stacks.

Every matching stack is a path from the synthetic root of this tree down
to a handle; pushing a frame adds a child node, popping moves to the
parent, and neither touches any other stack.  Branching a matcher or
keeping a rollback history therefore costs one handle copy per stack, not
a copy of the stack contents.

Two usage modes share the class:

* reference-counted (the runtime matcher): handles are explicitly
  retained/released and dead chains are reclaimed through a free list;
* interning (preprocessing sweeps): ``push`` deduplicates identical
  children so equal stacks get equal handles, and the whole arena is
  discarded at once instead of reference counting.
"""

from __future__ import annotations

EMPTY = -1
_FREED = -1


class StackArena:
    """Append-only arena of (parent, node) frames with optional refcounts."""

    __slots__ = ("parent", "node", "rc", "free", "alloc_count", "_intern", "_children", "_log")

    def __init__(self, intern: bool = False):
        self.parent = []
        self.node = []
        self.rc = []
        self.free = []
        self.alloc_count = 0
        self._intern = intern
        self._children = {} if intern else None
        self._log = None

    # -- shared ---------------------------------------------------------------

    def push(self, parent: int, node: int) -> int:
        """Child handle for ``parent`` with ``node`` as the stored frame."""
        if self._intern:
            key = (parent, node)
            h = self._children.get(key)
            if h is None:
                self.parent.append(parent)
                self.node.append(node)
                h = len(self.parent) - 1
                self._children[key] = h
                self.alloc_count += 1
            return h
        if self.free:
            h = self.free.pop()
            self.parent[h] = parent
            self.node[h] = node
            self.rc[h] = 0
        else:
            self.parent.append(parent)
            self.node.append(node)
            self.rc.append(0)
            h = len(self.parent) - 1
        self.alloc_count += 1
        if parent != EMPTY:
            self.rc[parent] += 1
        if self._log is not None:
            self._log.append(h)
        return h

    def materialize(self, h: int) -> tuple:
        """Stack contents bottom-up (excluding any current-node overlay)."""
        out = []
        while h != EMPTY:
            out.append(self.node[h])
            h = self.parent[h]
        out.reverse()
        return tuple(out)

    @property
    def live_nodes(self) -> int:
        return len(self.parent) - len(self.free)

    # -- refcounted mode -------------------------------------------------------

    def incref(self, h: int):
        if h != EMPTY:
            self.rc[h] += 1

    def decref(self, h: int):
        while h != EMPTY:
            self.rc[h] -= 1
            if self.rc[h] > 0:
                return
            self.free.append(h)
            self.rc[h] = _FREED
            h = self.parent[h]

    def begin_log(self):
        """Record allocations so unretained transients can be reclaimed."""
        self._log = []

    def end_log(self):
        """Free every logged allocation that nobody retained."""
        log, self._log = self._log, None
        for h in reversed(log):
            if self.rc[h] == 0:
                self.free.append(h)
                self.rc[h] = _FREED
                p = self.parent[h]
                if p != EMPTY:
                    self.decref(p)

"""Rollback and branching on the persistent stack tree.

All matching stacks — current, historical, and branched — live as paths
in one shared tree, so undoing tokens or splitting a matcher costs a few
pointer copies, never a stack copy.
"""

from grammask.bundle import compile_bundle
from grammask.grammars import JSON_ECMA404
from grammask.matcher import Matcher
from grammask.synthvocab import synth_vocab

vocab = synth_vocab(2000, profile="mixed")
bundle = compile_bundle(JSON_ECMA404, vocab)

m = Matcher(bundle, vocab, history_window=8)
for chunk in (b"[", b"1", b", ", b'"a'):
    assert m.accept_bytes(chunk)
print("consumed [1, \"a  — permitted tokens:", m.next_token_mask().count())
print("history depth:", m.history_depth)

# roll two acceptances back: state identical to just after [1
snapshot = None
m.rollback(2)
after_rollback = m.next_token_mask()
probe = Matcher(bundle, vocab)
probe.accept_bytes(b"[")
probe.accept_bytes(b"1")
print("rollback(2) reproduces the earlier mask:", after_rollback == probe.next_token_mask())

# branching: explore two continuations without re-parsing the prefix
left = m.branch()
right = m.branch()
left.accept_bytes(b"]")
right.accept_bytes(b", 2")
print("left can terminate:", left.can_terminate())
print("right can terminate:", right.can_terminate())
print("original unaffected:", m.next_token_mask() == after_rollback)

# the arena is shared: branching allocated nothing
arena = m._arena
before = arena.alloc_count
branches = [m.branch() for _ in range(100)]
print("allocations for 100 branches:", arena.alloc_count - before)
for b in branches:
    b.close()

# EOS handling: terminating and undoing the termination
t = Matcher(bundle, vocab)
t.accept_bytes(b"[]")
assert t.accept_token(vocab.eos_id)
print("terminated:", t.terminated)
t.rollback(1)
print("after rollback(1):", t.terminated)

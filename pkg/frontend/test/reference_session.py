"""Reference executor for the binding-transparency test.

Reads the op script produced by the TypeScript side and drives the engine
directly through the Python library (no session protocol), emitting the
same transcript format.  Both executors resolve every op against their own
matcher state with identical rules, so any behavioral difference between
the bindings and the library shows up as a transcript mismatch.
"""

import json
import sys
from pathlib import Path

from grammask.bundle import compile_bundle
from grammask.matcher import Matcher
from grammask.vocab import load_vocab

FIXTURES = Path(__file__).resolve().parent / "fixtures"

BYTE_POOL = [b"[", b'["a', b'"]', b"x", b"", b'","b"', b"]"]


def main(ops_path: str) -> None:
    ops = json.loads(Path(ops_path).read_text())
    vocab = load_vocab(FIXTURES / "vocab.json")
    bundle = compile_bundle((FIXTURES / "grammar.gmk").read_text(), vocab)
    matchers = [Matcher(bundle, vocab, history_window=16)]
    terminated = [False]
    transcript = []

    for op in ops:
        mi = op["km"] % len(matchers)
        m = matchers[mi]
        kind = op["t"]
        if terminated[mi] and kind in ("mask", "accept", "bytes", "jf"):
            transcript.append(f"skip-term {mi}")
            continue
        if kind == "mask":
            transcript.append(f"mask {mi} {m.next_token_mask().to_hex()}")
        elif kind == "accept":
            mask = m.next_token_mask()
            ids = [int(t) for t in mask.allowed_ids() if int(t) != vocab.eos_id]
            if not ids:
                transcript.append(f"accept-empty {mi}")
                continue
            tid = ids[op["k"] % len(ids)]
            ok = m.accept_token(tid)
            # EOS is excluded above, so termination cannot occur here; the
            # flag is tracked client-side exactly like the bindings do
            assert m.terminated == terminated[mi]
            transcript.append(f"accept {mi} {tid} {1 if ok else 0} {1 if terminated[mi] else 0}")
        elif kind == "bytes":
            data = BYTE_POOL[op["k"] % len(BYTE_POOL)]
            ok = m.accept_bytes(data)
            transcript.append(f"bytes {mi} {data.hex()} {1 if ok else 0}")
        elif kind == "rollback":
            steps = op["k"] % (m.history_depth + 1)
            m.rollback(steps)
            if steps > 0:
                terminated[mi] = False
            assert m.terminated == terminated[mi]
            transcript.append(f"rollback {mi} {steps}")
        elif kind == "branch":
            if len(matchers) >= 6:
                transcript.append(f"branch-skip {mi}")
                continue
            matchers.append(m.branch())
            terminated.append(terminated[mi])
            transcript.append(f"branch {mi} {len(matchers) - 1}")
        elif kind == "jf":
            transcript.append(f"jf {mi} {m.find_jump_forward_bytes().hex()}")
        elif kind == "term":
            transcript.append(f"term {mi} {1 if m.can_terminate() else 0}")
        else:
            raise ValueError(f"unknown op {kind}")

    print(json.dumps(transcript))


if __name__ == "__main__":
    main(sys.argv[1])

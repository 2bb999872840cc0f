#!/usr/bin/env python3
"""Export a Hugging-Face-style tokenizer.json into the vocabulary format.

Usage:
    python docs/convert_tokenizer.py tokenizer.json vocab.json [--eos TOKEN]

Reads the `model.vocab` mapping (token string -> id) plus
`added_tokens`, assumes a byte-level tokenizer (the common case for the
vocabularies this engine targets), and writes the self-contained
vocabulary JSON. Only ingestion is performed; merges and tokenization
stay with the original tokenizer.
"""

import argparse
import json
import sys


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("tokenizer_json")
    ap.add_argument("output")
    ap.add_argument("--eos", default="</s>", help="EOS token string (default </s>)")
    args = ap.parse_args()

    with open(args.tokenizer_json, "r", encoding="utf-8") as fh:
        doc = json.load(fh)

    vocab = doc.get("model", {}).get("vocab")
    if not isinstance(vocab, dict):
        print("no model.vocab mapping found", file=sys.stderr)
        return 2

    added = {t["content"]: t["id"] for t in doc.get("added_tokens", [])}
    special = sorted(added.values())

    size = max(max(vocab.values(), default=-1), max(added.values(), default=-1)) + 1
    tokens = ["<unused>"] * size
    for text, tid in vocab.items():
        tokens[tid] = text
    for text, tid in added.items():
        tokens[tid] = text

    eos_candidates = [tid for text, tid in added.items() if text == args.eos]
    if not eos_candidates:
        eos_candidates = [tid for text, tid in vocab.items() if text == args.eos]
    if not eos_candidates:
        print(f"EOS token {args.eos!r} not found; pass --eos", file=sys.stderr)
        return 2

    out = {
        "byte_level": True,
        "eos_id": eos_candidates[0],
        "special": sorted(set(special) | {eos_candidates[0]}),
        "tokens": tokens,
    }
    with open(args.output, "w", encoding="utf-8") as fh:
        json.dump(out, fh, ensure_ascii=False)
    print(f"wrote {args.output}: {size} tokens, eos {eos_candidates[0]}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

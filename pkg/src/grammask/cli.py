"""Command line front door.

Subcommands: ``compile`` (grammar + vocabulary -> bundle), ``check``
(oracle membership of a file), ``mask`` (print the current token mask),
``gen`` (mock-LLM constrained generation), ``bench`` (latency/ablation/
overlap measurements), ``schema compile`` (JSON Schema -> grammar text),
``pda dump`` (GraphViz), and ``session`` (line-delimited JSON protocol
over stdin/stdout for driving matchers from other processes).

Exit codes: 0 success; 1 negative outcome (input rejected, generation cap
reached); 2 usage or input errors.
"""

from __future__ import annotations

import argparse
import json
import random
import sys

from . import grammars
from .bench import BenchConfig, GenerationCap, generate, run_bench
from .bundle import CompileOptions, compile_bundle, load_bundle, save_bundle
from .grammar import GrammarError, parse_grammar
from .matcher import Matcher, MatcherError
from .pda import (
    StateLimitError,
    build_pda,
    inline_rules,
    merge_nodes,
    oracle_accepts,
    oracle_step_states,
    to_dot,
)
from .schema import SchemaError, schema_to_grammar_text
from .synthvocab import synth_vocab
from .vocab import VocabError, load_vocab

_USER_ERRORS = (GrammarError, SchemaError, VocabError, MatcherError, StateLimitError, ValueError, OSError)


def _read_text(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _read_bytes(path: str) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def _load_bundle_file(path: str):
    return load_bundle(_read_bytes(path))


def _compile_options(args) -> CompileOptions:
    return CompileOptions(
        inline=not args.no_inline,
        merge=not args.no_merge,
        cache=not args.no_cache,
        ctx_expansion=not args.no_ctx_expansion,
        inline_max_rule_size=args.inline_max_rule_size,
        inline_max_result_size=args.inline_max_result_size,
    )


def _add_pipeline_flags(sp):
    sp.add_argument("--no-inline", action="store_true", help="skip rule inlining")
    sp.add_argument("--no-merge", action="store_true", help="skip node merging")
    sp.add_argument("--no-cache", action="store_true", help="skip the token mask cache")
    sp.add_argument("--no-ctx-expansion", action="store_true", help="skip context expansion")
    sp.add_argument("--inline-max-rule-size", type=int, default=16)
    sp.add_argument("--inline-max-result-size", type=int, default=512)


# ---------------------------------------------------------------------------


def _cmd_compile(args) -> int:
    vocab = load_vocab(args.vocab)
    bundle = compile_bundle(_read_text(args.grammar), vocab, _compile_options(args))
    data = save_bundle(bundle)
    with open(args.output, "wb") as fh:
        fh.write(data)
    print(f"wrote {args.output}: {len(data)} bytes, {bundle.pda.node_count} nodes, "
          f"{bundle.pda.edge_count} edges")
    if args.stats and bundle.cache is not None:
        st = bundle.cache.stats
        print(f"entries: {st.entry_count}")
        print(f"accepted/rejected/dependent totals: {st.accepted_total} / {st.rejected_total} / {st.dependent_total}")
        print(f"dependent before context expansion: {st.dependent_before_total}")
        print(f"storage variants: {st.variant_counts}")
        print(f"bytes examined per entry: {st.bytes_examined_per_entry}")
    elif args.stats:
        print("no cache in this bundle")
    return 0


def _cmd_check(args) -> int:
    g = parse_grammar(_read_text(args.grammar))
    p = build_pda(g)
    data = _read_bytes(args.input)
    states = oracle_step_states(p, [(p.start_node(),)], b"")
    for offset, byte in enumerate(data):
        nxt = oracle_step_states(p, states, bytes([byte]))
        if not nxt:
            print(f"rejected at byte offset {offset} (0x{byte:02x})")
            return 1
        states = nxt
    if any(len(st) == 1 and p.is_final[st[0]] and p.node_rule[st[0]] == p.root for st in states):
        print("accepted")
        return 0
    print(f"rejected at byte offset {len(data)} (end of input)")
    return 1


def _cmd_mask(args) -> int:
    bundle = _load_bundle_file(args.bundle)
    vocab = load_vocab(args.vocab)
    m = Matcher(bundle, vocab, history_window=1)
    prefix = args.text.encode("utf-8") if args.text is not None else (
        _read_bytes(args.input) if args.input else b"")
    if prefix and not m.accept_bytes(prefix):
        print("prefix rejected by grammar", file=sys.stderr)
        return 1
    mask = m.next_token_mask()
    print(mask.to_hex())
    if args.ids:
        print(" ".join(str(i) for i in mask.allowed_ids()))
    print(f"# {mask.count()} of {vocab.size} tokens permitted", file=sys.stderr)
    return 0


def _cmd_gen(args) -> int:
    bundle = _load_bundle_file(args.bundle)
    vocab = load_vocab(args.vocab)
    rng = random.Random(args.seed)
    m = Matcher(bundle, vocab, history_window=1)
    try:
        _, text = generate(m, vocab, rng, args.max_tokens)
    except GenerationCap as cap:
        print(f"token cap {args.max_tokens} reached without EOS", file=sys.stderr)
        sys.stdout.write(cap.text.decode("utf-8", "replace"))
        return 1
    if not oracle_accepts(bundle.pda, text):
        print("internal error: generated text rejected by oracle", file=sys.stderr)
        return 2
    sys.stdout.write(text.decode("utf-8", "replace"))
    sys.stdout.write("\n")
    return 0


def _cmd_bench(args) -> int:
    if args.builtin:
        grammar_text = grammars.ALL_NAMED[args.builtin]
    else:
        grammar_text = _read_text(args.grammar)
    if args.synth_vocab:
        vocab = synth_vocab(args.synth_vocab, profile=args.synth_profile)
    else:
        vocab = load_vocab(args.vocab)
    cfg = BenchConfig(
        grammar_text=grammar_text,
        vocab=vocab,
        inline=not args.no_inline,
        merge=not args.no_merge,
        cache=not args.no_cache,
        ctx_expansion=not args.no_ctx_expansion,
        overlap=args.overlap,
        fake_forward_latency=args.fake_forward_ms / 1000.0,
        iterations=args.iterations,
        warmup=args.warmup,
        seed=args.seed,
        repeats=args.repeats,
    )
    report = run_bench(cfg, ablation=args.ablation, verify_masks=args.verify_masks)
    if args.json:
        print(report.to_json())
    elif args.csv:
        print(report.to_csv(), end="")
    else:
        print(f"vocab {report.vocab_size} tokens, saved-chars ratio {report.saved_chars:.3f}")
        for c in report.configs:
            print(c.row())
            if c.cache_bytes:
                print(f"{'':<18} cache {c.cache_bytes} B vs bitset {c.bitset_bytes} B "
                      f"({100.0 * c.cache_bytes / c.bitset_bytes:.2f}%), "
                      f"dependent {c.dependent_total} (pre-expansion {c.dependent_before_ctx})")
        if report.overlap:
            o = report.overlap
            print(f"overlap: sequential {o['sequential_tpot_ms']:.3f} ms, "
                  f"overlapped {o['overlapped_tpot_ms']:.3f} ms (ratio {o['ratio']:.3f}), "
                  f"outputs identical: {o['identical_outputs']}")
    return 0


def _cmd_schema_compile(args) -> int:
    text = schema_to_grammar_text(_read_text(args.schema), whitespace=not args.no_whitespace)
    sys.stdout.write(text)
    return 0


def _cmd_pda_dump(args) -> int:
    g = parse_grammar(_read_text(args.grammar))
    p = build_pda(g)
    if not args.no_inline:
        p = inline_rules(p, args.inline_max_rule_size, args.inline_max_result_size)
    if not args.no_merge:
        p = merge_nodes(p)
    sys.stdout.write(to_dot(p))
    return 0


# ---------------------------------------------------------------------------
# Session protocol
#
# One JSON object per line on stdin, one per line on stdout.  Requests name
# a matcher by integer handle ("m", default 0); "branch" returns a new
# handle.  Every response carries "ok"; failures carry "error" and never
# terminate the session.  See README for the full op list.


def _cmd_session(args) -> int:
    vocab = load_vocab(args.vocab)
    if args.bundle:
        bundle = _load_bundle_file(args.bundle)
    else:
        bundle = compile_bundle(_read_text(args.grammar), vocab, _compile_options(args))
    matchers = {0: Matcher(bundle, vocab, history_window=args.window)}
    next_id = 1

    def reply(doc):
        sys.stdout.write(json.dumps(doc, separators=(",", ":")) + "\n")
        sys.stdout.flush()

    reply({"ok": True, "ready": True, "vocab_size": vocab.size, "eos_id": vocab.eos_id})
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
            op = req.get("op")
            if op == "exit":
                reply({"ok": True})
                break
            if op == "info":
                reply({"ok": True, "vocab_size": vocab.size, "eos_id": vocab.eos_id,
                       "mask_words": (vocab.size + 31) // 32})
                continue
            mid = req.get("m", 0)
            if mid not in matchers:
                reply({"ok": False, "error": f"matcher {mid} is closed or unknown"})
                continue
            m = matchers[mid]
            if op == "mask":
                mask = m.next_token_mask()
                reply({"ok": True, "mask": mask.to_hex()})
            elif op == "accept_token":
                ok = m.accept_token(int(req["id"]))
                reply({"ok": True, "accepted": ok, "terminated": m.terminated})
            elif op == "accept_bytes":
                ok = m.accept_bytes(bytes.fromhex(req["bytes"]))
                reply({"ok": True, "accepted": ok})
            elif op == "rollback":
                m.rollback(int(req["steps"]))
                reply({"ok": True})
            elif op == "branch":
                matchers[next_id] = m.branch()
                reply({"ok": True, "m": next_id})
                next_id += 1
            elif op == "jump_forward":
                reply({"ok": True, "bytes": m.find_jump_forward_bytes().hex()})
            elif op == "can_terminate":
                reply({"ok": True, "value": m.can_terminate()})
            elif op == "history_depth":
                reply({"ok": True, "value": m.history_depth})
            elif op == "close":
                m.close()
                del matchers[mid]
                reply({"ok": True})
            else:
                reply({"ok": False, "error": f"unknown op {op!r}"})
        except _USER_ERRORS as exc:
            reply({"ok": False, "error": str(exc)})
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            reply({"ok": False, "error": f"bad request: {exc}"})
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="grammask", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="cmd", required=True)

    sp = sub.add_parser("compile", help="compile grammar + vocabulary into a bundle")
    sp.add_argument("grammar")
    sp.add_argument("--vocab", required=True)
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--stats", action="store_true", help="print classification statistics")
    _add_pipeline_flags(sp)
    sp.set_defaults(fn=_cmd_compile)

    sp = sub.add_parser("check", help="oracle membership test of a file")
    sp.add_argument("grammar")
    sp.add_argument("input")
    sp.set_defaults(fn=_cmd_check)

    sp = sub.add_parser("mask", help="print the token mask for a byte prefix")
    sp.add_argument("bundle")
    sp.add_argument("--vocab", required=True)
    sp.add_argument("--text", help="UTF-8 prefix to consume first")
    sp.add_argument("--input", help="file with the byte prefix")
    sp.add_argument("--ids", action="store_true", help="also print permitted token ids")
    sp.set_defaults(fn=_cmd_mask)

    sp = sub.add_parser("gen", help="mock-LLM constrained generation")
    sp.add_argument("bundle")
    sp.add_argument("--vocab", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--max-tokens", type=int, default=2048)
    sp.set_defaults(fn=_cmd_gen)

    sp = sub.add_parser("bench", help="latency benchmarks with optimization toggles")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--grammar")
    src.add_argument("--builtin", choices=sorted(grammars.ALL_NAMED))
    vsrc = sp.add_mutually_exclusive_group(required=True)
    vsrc.add_argument("--vocab")
    vsrc.add_argument("--synth-vocab", type=int, metavar="SIZE")
    sp.add_argument("--synth-profile", choices=("text", "mixed"), default="text")
    sp.add_argument("--ablation", action="store_true", help="run the cumulative optimization ladder")
    sp.add_argument("--overlap", action="store_true", help="also simulate compute overlap")
    sp.add_argument("--fake-forward-ms", type=float, default=2.0)
    sp.add_argument("--iterations", type=int, default=200)
    sp.add_argument("--warmup", type=int, default=100)
    sp.add_argument("--repeats", type=int, default=1,
                    help="timing passes per configuration; per-step minimum kept")
    sp.add_argument("--seed", type=int, default=1234)
    sp.add_argument("--verify-masks", action="store_true",
                    help="assert mask equality against the reference configuration")
    sp.add_argument("--json", action="store_true")
    sp.add_argument("--csv", action="store_true")
    _add_pipeline_flags(sp)
    sp.set_defaults(fn=_cmd_bench)

    sp = sub.add_parser("schema", help="JSON Schema tools")
    ssub = sp.add_subparsers(dest="schema_cmd", required=True)
    sc = ssub.add_parser("compile", help="convert a JSON Schema to grammar text")
    sc.add_argument("schema")
    sc.add_argument("--no-whitespace", action="store_true", help="strict mode: no inter-token whitespace")
    sc.set_defaults(fn=_cmd_schema_compile)

    sp = sub.add_parser("pda", help="automaton tools")
    psub = sp.add_subparsers(dest="pda_cmd", required=True)
    pd = psub.add_parser("dump", help="dump the automaton as GraphViz text")
    pd.add_argument("grammar")
    pd.add_argument("--dot", action="store_true", help="GraphViz output (the default and only format)")
    _add_pipeline_flags(pd)
    pd.set_defaults(fn=_cmd_pda_dump)

    sp = sub.add_parser("session", help="line-delimited JSON matcher protocol on stdio")
    bsrc = sp.add_mutually_exclusive_group(required=True)
    bsrc.add_argument("--bundle")
    bsrc.add_argument("--grammar")
    sp.add_argument("--vocab", required=True)
    sp.add_argument("--window", type=int, default=32)
    _add_pipeline_flags(sp)
    sp.set_defaults(fn=_cmd_session)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except _USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

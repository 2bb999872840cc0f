"""Per-token mask latency under the optimization ladder, plus overlap.

Reproduces the shape of the ablation table: each optimization stacked on
the previous one, measured by replaying the same generation traces.  Then
simulates running mask generation concurrently with a fake forward pass.
"""

from grammask.bench import BenchConfig, run_bench
from grammask.grammars import JSON_ECMA404
from grammask.synthvocab import synth_vocab

vocab = synth_vocab(2000, profile="mixed")
cfg = BenchConfig(
    grammar_text=JSON_ECMA404,
    vocab=vocab,
    iterations=120,
    warmup=30,
    seed=11,
    max_gen_tokens=300,
    repeats=2,
    overlap=True,
    fake_forward_latency=0.004,
)

report = run_bench(cfg, ablation=True, verify_masks=True)

print(f"vocabulary: {report.vocab_size} tokens, "
      f"saved-chars ratio {report.saved_chars:.3f}")
print()
for c in report.configs:
    print(c.row())
    if c.cache_bytes:
        print(f"{'':18} cache {c.cache_bytes} B vs all-bitset {c.bitset_bytes} B "
              f"({100 * c.cache_bytes / c.bitset_bytes:.1f}%), "
              f"dependents {c.dependent_total} (pre-expansion {c.dependent_before_ctx})")

o = report.overlap
print(f"\noverlap with a {o['fake_forward_ms']:.1f} ms fake forward pass:")
print(f"  sequential TPOT {o['sequential_tpot_ms']:.3f} ms")
print(f"  overlapped TPOT {o['overlapped_tpot_ms']:.3f} ms  (ratio {o['ratio']:.3f})")
print(f"  token outputs identical: {o['identical_outputs']}")

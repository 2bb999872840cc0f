import random

import pytest

from grammask.bench import (
    ABLATION_LADDER,
    BenchConfig,
    GenerationCap,
    generate,
    measure_tpot,
    record_traces,
    replay_latencies,
    run_bench,
)
from grammask.bundle import compile_bundle
from grammask.grammars import ARITHMETIC, ARRAY_STRING
from grammask.matcher import Matcher
from grammask.pda import oracle_accepts

from conftest import build_gen_vocab


@pytest.fixture(scope="module")
def vocab():
    return build_gen_vocab()


@pytest.fixture(scope="module")
def bundle(vocab):
    return compile_bundle(ARRAY_STRING, vocab)


def test_generation_deterministic(bundle, vocab):
    outs = []
    for _ in range(2):
        rng = random.Random(42)
        ids, text = generate(Matcher(bundle, vocab), vocab, rng, 4096)
        outs.append((tuple(ids), text))
        assert oracle_accepts(bundle.pda, text)
    assert outs[0] == outs[1]


def test_generation_cap(vocab):
    # eight forced bytes cannot fit in three tokens of this vocabulary
    b = compile_bundle('root ::= "tttttttt"', vocab)
    with pytest.raises(GenerationCap) as exc:
        generate(Matcher(b, vocab), vocab, random.Random(0), 3)
    assert len(exc.value.ids) == 3


def test_trace_replay_round_trip(bundle, vocab):
    traces = record_traces(bundle, vocab, seed=5, min_steps=40, max_gen_tokens=512)
    assert sum(len(t) for t in traces) >= 40
    times = replay_latencies(bundle, vocab, traces, warmup=5, iterations=20)
    assert len(times) == 20
    assert all(t >= 0 for t in times)


def test_ablation_ladder_runs_and_verifies_masks(vocab):
    cfg = BenchConfig(
        grammar_text=ARITHMETIC, vocab=vocab, iterations=25, warmup=5, seed=9, max_gen_tokens=256
    )
    report = run_bench(cfg, ablation=True, verify_masks=True)
    assert [c.name for c in report.configs] == [name for name, *_ in ABLATION_LADDER]
    cached = {c.name: c for c in report.configs}
    assert cached["baseline"].cache_bytes == 0
    assert cached["+cache"].cache_bytes > 0
    assert cached["+ctx_expansion"].dependent_total <= cached["+ctx_expansion"].dependent_before_ctx
    assert 0.0 <= report.saved_chars <= 1.0
    doc = report.to_json()
    assert '"configs"' in doc
    assert report.to_csv().count("\n") == len(report.configs) + 1


def test_measured_counts_deterministic(vocab):
    cfg = BenchConfig(grammar_text=ARRAY_STRING, vocab=vocab, iterations=10, warmup=2, seed=3)
    r1 = run_bench(cfg, ablation=True)
    r2 = run_bench(cfg, ablation=True)
    for a, b in zip(r1.configs, r2.configs):
        assert (a.cache_bytes, a.bitset_bytes, a.dependent_total, a.dependent_before_ctx) == (
            b.cache_bytes,
            b.bitset_bytes,
            b.dependent_total,
            b.dependent_before_ctx,
        )
    assert r1.saved_chars == r2.saved_chars


def test_overlap_preserves_outputs(bundle, vocab):
    seq, ids_a = measure_tpot(bundle, vocab, seed=77, steps=40, fake_forward=0.001, overlap=False)
    ovl, ids_b = measure_tpot(bundle, vocab, seed=77, steps=40, fake_forward=0.001, overlap=True)
    assert ids_a == ids_b
    assert len(seq) == len(ovl) == 40

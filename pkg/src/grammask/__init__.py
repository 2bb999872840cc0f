"""Grammar-constrained decoding engine.

Compiles context-free grammars to byte-level pushdown automata, precomputes
an adaptive token mask cache over a tokenizer vocabulary, and serves
per-step token bitmasks with rollback, branching and jump-forward support.
"""

from .grammar import (
    Grammar,
    GrammarError,
    parse_grammar,
    normalize_grammar,
    pretty_print,
)
from .pda import Pda, build_pda, inline_rules, merge_nodes, oracle_accepts, oracle_partial_states
from .vocab import Vocabulary, SortedVocabIndex, load_vocab, build_sorted_index, saved_chars_ratio
from .cache import (
    Classification,
    TokenMaskCache,
    build_mask_cache,
    build_context_expansion,
    classify_token,
    refine_dependent,
    choose_storage,
)
from .schema import schema_to_grammar, SchemaError
from .bundle import Bundle, compile_bundle, load_bundle
from .matcher import Matcher, TokenMask

__all__ = [
    "Grammar",
    "GrammarError",
    "parse_grammar",
    "normalize_grammar",
    "pretty_print",
    "Pda",
    "build_pda",
    "inline_rules",
    "merge_nodes",
    "oracle_accepts",
    "oracle_partial_states",
    "Vocabulary",
    "SortedVocabIndex",
    "load_vocab",
    "build_sorted_index",
    "saved_chars_ratio",
    "Classification",
    "TokenMaskCache",
    "build_mask_cache",
    "build_context_expansion",
    "classify_token",
    "refine_dependent",
    "choose_storage",
    "schema_to_grammar",
    "SchemaError",
    "Bundle",
    "compile_bundle",
    "load_bundle",
    "Matcher",
    "TokenMask",
]

__version__ = "0.1.0"

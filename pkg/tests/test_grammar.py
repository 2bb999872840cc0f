import pytest

from grammask.grammar import (
    ByteClass,
    Choice,
    Empty,
    Grammar,
    GrammarError,
    Literal,
    Repeat,
    Rule,
    RuleRef,
    Seq,
    normalize_grammar,
    parse_grammar,
    pretty_print,
)
from grammask.grammars import ARRAY_STRING
from grammask.pda import build_pda, oracle_accepts

from conftest import FIVE_GRAMMARS, joint_acceptance_scan


def test_two_literal_sequence():
    g = parse_grammar('root ::= "[" "]"')
    assert len(g.rules) == 1
    body = g.rule("root").body
    assert body == Seq((Literal(b"["), Literal(b"]")))


def test_fig2_negated_class():
    g = parse_grammar(ARRAY_STRING)
    assert set(g.rule_names()) == {"root", "array", "elems", "string"}
    string = g.rule("string").body
    classes = [e for e in string.items if isinstance(e, Repeat)]
    bc = classes[0].item
    assert bc.negated
    assert bc.ranges == ((0x22, 0x22), (0x5C, 0x5C))


def test_undefined_rule_reference():
    with pytest.raises(GrammarError, match="undefined rule reference"):
        parse_grammar("root ::= undefined_rule")


def test_duplicate_rule_name():
    with pytest.raises(GrammarError, match="duplicate rule"):
        parse_grammar('root ::= "a"\nroot ::= "b"')


def test_empty_grammar():
    with pytest.raises(GrammarError, match="empty grammar"):
        parse_grammar("  # just a comment\n")


def test_self_recursive_empty_language_rejected():
    with pytest.raises(GrammarError, match="empty language"):
        parse_grammar("root ::= root")
    with pytest.raises(GrammarError, match="empty language"):
        parse_grammar('root ::= a\na ::= "x" a')


def test_syntax_error_carries_position():
    with pytest.raises(GrammarError) as exc:
        parse_grammar('root ::= "a"\nnext ::= @')
    assert exc.value.line == 2
    assert "line 2" in str(exc.value)


def test_root_rule_selection():
    g = parse_grammar('start ::= "a"\nroot ::= "b"')
    assert g.root == "root"
    g = parse_grammar('first ::= "a"\nsecond ::= "b"')
    assert g.root == "first"


def test_literal_escapes():
    g = parse_grammar(r'root ::= "\n\t\r\"\\\x41\u00e9"')
    assert g.rule("root").body == Literal(b'\n\t\r"\\A\xc3\xa9')


def test_sub_utf8_byte_escape():
    g = parse_grammar(r'root ::= "\xC3"')
    assert g.rule("root").body == Literal(b"\xc3")


def test_unicode_literal_lowered_to_utf8():
    g = parse_grammar('root ::= "é→"')
    assert g.rule("root").body == Literal("é→".encode("utf-8"))


def test_class_ranges_and_bounds():
    g = parse_grammar("root ::= [a-fA-F0-9]{2,4}")
    body = g.rule("root").body
    assert isinstance(body, Repeat) and (body.lo, body.hi) == (2, 4)
    assert body.item.ranges == ((48, 57), (65, 70), (97, 102))
    with pytest.raises(GrammarError, match="out of order"):
        parse_grammar("root ::= [z-a]")
    with pytest.raises(GrammarError, match="bad repeat bounds"):
        parse_grammar("root ::= [a]{4,2}")


def test_negated_class_requires_ascii():
    with pytest.raises(GrammarError, match="negated classes"):
        parse_grammar("root ::= [^é]")


def test_negation_complement_exact():
    g = normalize_grammar(parse_grammar(r'root ::= [^"\\]'))
    assert g.rule("root").body == ByteClass(((0x00, 0x21), (0x23, 0x5B), (0x5D, 0xFF)))


def test_choice_flattening_and_empty_sequences():
    nested = Grammar(
        (
            Rule(
                "root",
                Choice((Choice((Literal(b"a"), Literal(b"b"))), Literal(b"c"))),
            ),
        ),
        "root",
    )
    norm = normalize_grammar(nested)
    assert norm.rule("root").body == Choice((Literal(b"a"), Literal(b"b"), Literal(b"c")))

    seq = Grammar((Rule("root", Seq((Empty(), Literal(b"x")))),), "root")
    assert normalize_grammar(seq).rule("root").body == Literal(b"x")


def test_star_canonicalization():
    g = Grammar((Rule("root", Repeat(Repeat(Literal(b"a"), 0, None), 0, None)),), "root")
    assert normalize_grammar(g).rule("root").body == Repeat(Literal(b"a"), 0, None)


@pytest.mark.parametrize("name,text", sorted(FIVE_GRAMMARS.items()))
def test_pretty_print_round_trip(name, text):
    g = parse_grammar(text)
    assert parse_grammar(pretty_print(g)) == normalize_grammar(g)


def test_pretty_print_round_trip_constructed():
    g = Grammar(
        (
            Rule("root", Choice((Seq((Literal(b'"'), RuleRef("tail"))), Empty()))),
            Rule("tail", Repeat(ByteClass(((0x30, 0x39),), negated=True), 1, None)),
        ),
        "root",
    )
    assert parse_grammar(pretty_print(g)) == normalize_grammar(g)


def test_language_preserved_by_normalization():
    # Every string up to length 8 over a 4-byte alphabet must agree
    # between the raw and the normalized grammar.
    text = 'root ::= ("a" | ("b" | "c" "a")) ("" | "c")* [^b]?'
    g = parse_grammar(text)
    pdas = [build_pda(g), build_pda(normalize_grammar(g))]
    checked = joint_acceptance_scan(pdas, b"abcd", 8)
    assert checked >= 50  # live prefixes actually compared


def test_unicode_class_expansion_membership():
    g = parse_grammar('root ::= [α-ω]')
    p = build_pda(g)
    for cp in (0x3B1, 0x3C0, 0x3C9):
        assert oracle_accepts(p, chr(cp).encode("utf-8"))
    for cp in (0x3B0, 0x3CA, 0x61, 0x2192):
        assert not oracle_accepts(p, chr(cp).encode("utf-8"))
    # multi-length range: ASCII part plus 2- and 3-byte encodings
    g = parse_grammar('root ::= [a-\u0800]')
    p = build_pda(g)
    for cp in (0x61, 0x7F, 0x80, 0x7FF, 0x800):
        assert oracle_accepts(p, chr(cp).encode("utf-8")), hex(cp)
    for cp in (0x60, 0x801):
        assert not oracle_accepts(p, chr(cp).encode("utf-8")), hex(cp)


def test_negated_class_accepts_high_bytes_individually():
    # documented deviation: ASCII-complement classes accept any byte >= 0x80
    p = build_pda(parse_grammar(r'root ::= [^"\\]'))
    assert oracle_accepts(p, b"\xc3")
    assert oracle_accepts(p, b"\xff")
    assert not oracle_accepts(p, b'"')
    assert not oracle_accepts(p, b"\xc3\xa9")  # two bytes = two class matches needed


def test_comments_and_multiline_rules():
    g = parse_grammar(
        """
        # a grammar
        root ::= item   # trailing comment
                 ("," item)*
        item ::= [0-9]
        """
    )
    p = build_pda(g)
    assert oracle_accepts(p, b"1,2,3")
    assert not oracle_accepts(p, b"1,")

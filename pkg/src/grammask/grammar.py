"""Byte-level grammar representation.

A grammar is a set of named rules over byte classes, literals, sequences,
choices, repetitions and rule references.  The surface syntax is the common
``name ::= expr`` notation: double-quoted literals with escapes, character
classes ``[...]`` / ``[^...]``, postfix ``*`` ``+`` ``?`` ``{m,n}``, infix
``|`` and parentheses.  ``#`` starts a comment.

Everything is lowered to *bytes* at parse time: literals become their UTF-8
encodings and character classes become byte ranges (classes that span
code points above U+007F are expanded into alternations of UTF-8 byte
sequences).  This keeps the downstream automaton strictly byte-level so
that tokens containing partial UTF-8 sequences can still be matched.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Union

__all__ = [
    "GrammarError",
    "ByteClass",
    "Literal",
    "Seq",
    "Choice",
    "Repeat",
    "RuleRef",
    "Empty",
    "RuleExpr",
    "Rule",
    "Grammar",
    "parse_grammar",
    "normalize_grammar",
    "pretty_print",
]


class GrammarError(ValueError):
    """Syntax or validation error in a grammar."""

    def __init__(self, message: str, line: Optional[int] = None, col: Optional[int] = None):
        if line is not None:
            message = f"{message} (line {line}, column {col})"
        super().__init__(message)
        self.line = line
        self.col = col


# ---------------------------------------------------------------------------
# Expression tree


@dataclass(frozen=True)
class ByteClass:
    """A set of byte ranges; ``negated`` complements it over 0x00-0xFF."""

    ranges: tuple  # tuple[(lo, hi), ...], inclusive bounds
    negated: bool = False

    def __post_init__(self):
        for lo, hi in self.ranges:
            if not (0 <= lo <= hi <= 0xFF):
                raise GrammarError(f"byte range out of bounds: ({lo}, {hi})")


@dataclass(frozen=True)
class Literal:
    data: bytes


@dataclass(frozen=True)
class Seq:
    items: tuple


@dataclass(frozen=True)
class Choice:
    items: tuple


@dataclass(frozen=True)
class Repeat:
    item: "RuleExpr"
    lo: int
    hi: Optional[int]  # None = unbounded

    def __post_init__(self):
        if self.lo < 0 or (self.hi is not None and self.hi < self.lo):
            raise GrammarError(f"bad repeat bounds {{{self.lo},{self.hi}}}")


@dataclass(frozen=True)
class RuleRef:
    name: str


@dataclass(frozen=True)
class Empty:
    pass


RuleExpr = Union[ByteClass, Literal, Seq, Choice, Repeat, RuleRef, Empty]


@dataclass(frozen=True)
class Rule:
    name: str
    body: RuleExpr


@dataclass(frozen=True)
class Grammar:
    rules: tuple  # tuple[Rule, ...]
    root: str

    def rule(self, name: str) -> Rule:
        for r in self.rules:
            if r.name == name:
                return r
        raise KeyError(name)

    def rule_names(self) -> list:
        return [r.name for r in self.rules]


# ---------------------------------------------------------------------------
# Byte-range helpers


def normalize_ranges(ranges) -> tuple:
    """Sort, merge and deduplicate inclusive byte ranges."""
    rs = sorted((lo, hi) for lo, hi in ranges)
    out = []
    for lo, hi in rs:
        if out and lo <= out[-1][1] + 1:
            out[-1] = (out[-1][0], max(out[-1][1], hi))
        else:
            out.append((lo, hi))
    return tuple(out)


def complement_ranges(ranges) -> tuple:
    """Complement of a normalized range set over 0x00-0xFF."""
    out = []
    next_lo = 0
    for lo, hi in normalize_ranges(ranges):
        if lo > next_lo:
            out.append((next_lo, lo - 1))
        next_lo = hi + 1
    if next_lo <= 0xFF:
        out.append((next_lo, 0xFF))
    return tuple(out)


def class_byte_ranges(bc: ByteClass) -> tuple:
    """Normalized, negation-resolved byte ranges of a class."""
    if bc.negated:
        return complement_ranges(bc.ranges)
    return normalize_ranges(bc.ranges)


# ---------------------------------------------------------------------------
# UTF-8 expansion of code-point ranges
#
# A code-point range above U+007F cannot be a single byte class; it becomes
# an alternation of sequences of byte classes, one alternative per "shape"
# of the UTF-8 encoding.  The classic recursive split keeps each alternative
# exact: aligned prefixes are emitted as fixed bytes, full trailing ranges
# as 0x80-0xBF classes.

_UTF8_BOUNDS = (0x7F, 0x7FF, 0xFFFF, 0x10FFFF)


def _encode(cp: int) -> bytes:
    return chr(cp).encode("utf-8")


def _split_same_length(lo: int, hi: int):
    """Yield byte-range sequences covering [lo, hi], same encoded length."""
    s, e = _encode(lo), _encode(hi)
    n = len(s)
    if n == 1:
        yield [(s[0], e[0])]
        return
    if s[0] == e[0]:
        for tail in _split_tail(s[1:], e[1:]):
            yield [(s[0], s[0])] + tail
        return
    # Distinct lead bytes: peel off a partial low block and a partial high
    # block, leaving full middle blocks.
    lo_lead, hi_lead = s[0], e[0]
    if any(b != 0x80 for b in s[1:]):
        for tail in _split_tail(s[1:], bytes([0xBF] * (n - 1))):
            yield [(lo_lead, lo_lead)] + tail
        lo_lead += 1
    if any(b != 0xBF for b in e[1:]):
        if lo_lead <= hi_lead - 1:
            yield [(lo_lead, hi_lead - 1)] + [(0x80, 0xBF)] * (n - 1)
        for tail in _split_tail(bytes([0x80] * (n - 1)), e[1:]):
            yield [(hi_lead, hi_lead)] + tail
    else:
        if lo_lead <= hi_lead:
            yield [(lo_lead, hi_lead)] + [(0x80, 0xBF)] * (n - 1)


def _split_tail(s: bytes, e: bytes):
    """Like _split_same_length but over continuation-byte strings."""
    if len(s) == 1:
        yield [(s[0], e[0])]
        return
    if s[0] == e[0]:
        for tail in _split_tail(s[1:], e[1:]):
            yield [(s[0], s[0])] + tail
        return
    lo_lead, hi_lead = s[0], e[0]
    if any(b != 0x80 for b in s[1:]):
        for tail in _split_tail(s[1:], bytes([0xBF] * (len(s) - 1))):
            yield [(lo_lead, lo_lead)] + tail
        lo_lead += 1
    if any(b != 0xBF for b in e[1:]):
        if lo_lead <= hi_lead - 1:
            yield [(lo_lead, hi_lead - 1)] + [(0x80, 0xBF)] * (len(s) - 1)
        for tail in _split_tail(bytes([0x80] * (len(s) - 1)), e[1:]):
            yield [(hi_lead, hi_lead)] + tail
    else:
        if lo_lead <= hi_lead:
            yield [(lo_lead, hi_lead)] + [(0x80, 0xBF)] * (len(s) - 1)


def codepoint_ranges_to_expr(ranges) -> RuleExpr:
    """Lower code-point ranges to a byte-level expression.

    ASCII sub-ranges collapse into a single byte class; anything higher is
    split per UTF-8 length and emitted as sequences of byte classes.
    Surrogates (U+D800-U+DFFF) are silently excluded.
    """
    ascii_parts = []
    alternatives = []
    for lo, hi in sorted(ranges):
        if hi > 0x10FFFF:
            raise GrammarError(f"code point out of range: {hi:#x}")
        if lo <= 0x7F:
            ascii_parts.append((lo, min(hi, 0x7F)))
            lo = 0x80
            if lo > hi:
                continue
        # split around the surrogate block
        pieces = []
        if lo < 0xD800 and hi >= 0xD800:
            pieces.append((lo, min(hi, 0xD7FF)))
            if hi > 0xDFFF:
                pieces.append((0xE000, hi))
        elif 0xD800 <= lo <= 0xDFFF:
            if hi > 0xDFFF:
                pieces.append((0xE000, hi))
        else:
            pieces.append((lo, hi))
        for plo, phi in pieces:
            # split on encoding-length boundaries
            cuts = [plo]
            for bound in _UTF8_BOUNDS:
                if plo <= bound < phi:
                    cuts.append(bound + 1)
            cuts.append(phi + 1)
            for a, b in zip(cuts, cuts[1:]):
                for seq in _split_same_length(a, b - 1):
                    alternatives.append(
                        Seq(tuple(ByteClass((r,)) for r in seq))
                        if len(seq) > 1
                        else ByteClass((seq[0],))
                    )
    out = []
    if ascii_parts:
        out.append(ByteClass(normalize_ranges(ascii_parts)))
    out.extend(alternatives)
    if not out:
        raise GrammarError("empty character class after lowering")
    if len(out) == 1:
        return out[0]
    return Choice(tuple(out))


# ---------------------------------------------------------------------------
# Tokenizer

_IDENT_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_IDENT_CONT = _IDENT_START | set("0123456789-")

_SIMPLE_ESCAPES = {"n": 0x0A, "t": 0x09, "r": 0x0D, '"': 0x22, "\\": 0x5C, "'": 0x27}


class _Tok:
    __slots__ = ("kind", "value", "line", "col")

    def __init__(self, kind, value, line, col):
        self.kind = kind
        self.value = value
        self.line = line
        self.col = col


class _Lexer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1

    def _err(self, msg):
        raise GrammarError(msg, self.line, self.col)

    def _advance(self, n=1):
        for _ in range(n):
            if self.pos < len(self.text) and self.text[self.pos] == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
            self.pos += 1

    def _peek(self, off=0):
        i = self.pos + off
        return self.text[i] if i < len(self.text) else ""

    def _escape(self, in_class: bool):
        """Parse one backslash escape, return (value, is_byte_denoted)."""
        self._advance()  # backslash
        c = self._peek()
        if not c:
            self._err("unterminated escape")
        if c in _SIMPLE_ESCAPES:
            self._advance()
            return _SIMPLE_ESCAPES[c], False
        if in_class and c in "]-^[":
            self._advance()
            return ord(c), False
        if c == "x":
            h = self.text[self.pos + 1 : self.pos + 3]
            if len(h) != 2 or any(d not in "0123456789abcdefABCDEF" for d in h):
                self._err("\\x escape needs two hex digits")
            self._advance(3)
            return int(h, 16), True
        if c == "u":
            h = self.text[self.pos + 1 : self.pos + 5]
            if len(h) != 4 or any(d not in "0123456789abcdefABCDEF" for d in h):
                self._err("\\u escape needs four hex digits")
            self._advance(5)
            return int(h, 16), False
        self._err(f"unknown escape \\{c}")

    def tokens(self) -> list:
        out = []
        while True:
            c = self._peek()
            if not c:
                out.append(_Tok("EOF", None, self.line, self.col))
                return out
            if c in " \t\r\n":
                self._advance()
                continue
            if c == "#":
                while self._peek() and self._peek() != "\n":
                    self._advance()
                continue
            line, col = self.line, self.col
            if c in _IDENT_START:
                start = self.pos
                while self._peek() in _IDENT_CONT:
                    self._advance()
                out.append(_Tok("IDENT", self.text[start : self.pos], line, col))
                continue
            if c == ":" and self.text[self.pos : self.pos + 3] == "::=":
                self._advance(3)
                out.append(_Tok("DEFINE", None, line, col))
                continue
            if c == '"':
                out.append(self._literal(line, col))
                continue
            if c == "[":
                out.append(self._char_class(line, col))
                continue
            simple = {"(": "LPAREN", ")": "RPAREN", "|": "PIPE", "*": "STAR", "+": "PLUS", "?": "QMARK"}
            if c in simple:
                self._advance()
                out.append(_Tok(simple[c], None, line, col))
                continue
            if c == "{":
                out.append(self._bounds(line, col))
                continue
            self._err(f"unexpected character {c!r}")

    def _literal(self, line, col) -> _Tok:
        self._advance()  # opening quote
        data = bytearray()
        while True:
            c = self._peek()
            if not c or c == "\n":
                raise GrammarError("unterminated string literal", line, col)
            if c == '"':
                self._advance()
                return _Tok("LITERAL", bytes(data), line, col)
            if c == "\\":
                value, is_byte = self._escape(in_class=False)
                if is_byte:
                    data.append(value)  # raw byte, may be a UTF-8 fragment
                else:
                    data.extend(chr(value).encode("utf-8"))
            else:
                data.extend(c.encode("utf-8"))
                self._advance()

    def _char_class(self, line, col) -> _Tok:
        self._advance()  # [
        negated = False
        if self._peek() == "^":
            negated = True
            self._advance()
        items = []  # (lo, hi, byte_denoted)
        first = True
        while True:
            c = self._peek()
            if not c or c == "\n":
                raise GrammarError("unterminated character class", line, col)
            if c == "]" and not first:
                self._advance()
                return _Tok("CLASS", (tuple(items), negated), line, col)
            lo, lo_byte = self._class_atom(line, col)
            hi, hi_byte = lo, lo_byte
            if self._peek() == "-" and self._peek(1) not in ("]", ""):
                self._advance()
                hi, hi_byte = self._class_atom(line, col)
            if hi < lo:
                raise GrammarError(f"class range out of order: {lo:#x}-{hi:#x}", line, col)
            items.append((lo, hi, lo_byte or hi_byte))
            first = False

    def _class_atom(self, line, col):
        c = self._peek()
        if c == "\\":
            return self._escape(in_class=True)
        self._advance()
        return ord(c), False

    def _bounds(self, line, col) -> "_Tok":
        self._advance()  # {
        digits = ""
        while self._peek().isdigit():
            digits += self._peek()
            self._advance()
        if not digits:
            self._err("repeat bounds need a count")
        lo = int(digits)
        hi: Optional[int] = lo
        if self._peek() == ",":
            self._advance()
            digits = ""
            while self._peek().isdigit():
                digits += self._peek()
                self._advance()
            hi = int(digits) if digits else None
        if self._peek() != "}":
            self._err("unterminated repeat bounds")
        self._advance()
        return _Tok("BOUNDS", (lo, hi), line, col)


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, tokens):
        self.toks = tokens
        self.i = 0

    def _peek(self, off=0) -> _Tok:
        return self.toks[min(self.i + off, len(self.toks) - 1)]

    def _next(self) -> _Tok:
        t = self.toks[self.i]
        if t.kind != "EOF":
            self.i += 1
        return t

    def _expect(self, kind) -> _Tok:
        t = self._next()
        if t.kind != kind:
            raise GrammarError(f"expected {kind}, got {t.kind}", t.line, t.col)
        return t

    def grammar(self) -> list:
        rules = []
        while self._peek().kind != "EOF":
            name_tok = self._expect("IDENT")
            self._expect("DEFINE")
            body = self.alternation()
            rules.append((name_tok.value, body, name_tok.line, name_tok.col))
        return rules

    def _at_rule_boundary(self) -> bool:
        return self._peek().kind == "IDENT" and self._peek(1).kind == "DEFINE"

    def alternation(self) -> RuleExpr:
        items = [self.sequence()]
        while self._peek().kind == "PIPE":
            self._next()
            items.append(self.sequence())
        if len(items) == 1:
            return items[0]
        return Choice(tuple(items))

    def sequence(self) -> RuleExpr:
        items = []
        while True:
            k = self._peek().kind
            if k in ("PIPE", "RPAREN", "EOF") or self._at_rule_boundary():
                break
            items.append(self.postfix())
        if not items:
            return Empty()
        if len(items) == 1:
            return items[0]
        return Seq(tuple(items))

    def postfix(self) -> RuleExpr:
        expr = self.atom()
        while True:
            t = self._peek()
            if t.kind == "STAR":
                self._next()
                expr = Repeat(expr, 0, None)
            elif t.kind == "PLUS":
                self._next()
                expr = Repeat(expr, 1, None)
            elif t.kind == "QMARK":
                self._next()
                expr = Repeat(expr, 0, 1)
            elif t.kind == "BOUNDS":
                self._next()
                lo, hi = t.value
                if hi is not None and hi < lo:
                    raise GrammarError(f"bad repeat bounds {{{lo},{hi}}}", t.line, t.col)
                expr = Repeat(expr, lo, hi)
            else:
                return expr

    def atom(self) -> RuleExpr:
        t = self._next()
        if t.kind == "LITERAL":
            if not t.value:
                return Empty()
            return Literal(t.value)
        if t.kind == "CLASS":
            items, negated = t.value
            return self._lower_class(items, negated, t)
        if t.kind == "IDENT":
            return RuleRef(t.value)
        if t.kind == "LPAREN":
            expr = self.alternation()
            self._expect("RPAREN")
            return expr
        raise GrammarError(f"unexpected {t.kind} in expression", t.line, t.col)

    @staticmethod
    def _lower_class(items, negated, tok) -> RuleExpr:
        byte_ranges = []
        cp_ranges = []
        for lo, hi, byte_denoted in items:
            if byte_denoted or hi <= 0x7F:
                if hi > 0xFF:
                    raise GrammarError(f"byte escape out of range: {hi:#x}", tok.line, tok.col)
                byte_ranges.append((lo, hi))
            else:
                cp_ranges.append((lo, hi))
        if negated:
            # Negated classes must be byte/ASCII-denoted: the complement is
            # taken over 0x00-0xFF, so bytes >= 0x80 are accepted one at a
            # time rather than as whole code points.
            if cp_ranges:
                raise GrammarError(
                    "negated classes may only contain ASCII or \\xHH members",
                    tok.line,
                    tok.col,
                )
            return ByteClass(normalize_ranges(byte_ranges), negated=True)
        if not cp_ranges:
            return ByteClass(normalize_ranges(byte_ranges))
        expr = codepoint_ranges_to_expr(cp_ranges)
        if not byte_ranges:
            return expr
        alts = [ByteClass(normalize_ranges(byte_ranges))]
        alts.extend(expr.items if isinstance(expr, Choice) else [expr])
        return Choice(tuple(alts))


# ---------------------------------------------------------------------------
# Validation


def _iter_exprs(expr: RuleExpr) -> Iterator[RuleExpr]:
    yield expr
    if isinstance(expr, (Seq, Choice)):
        for item in expr.items:
            yield from _iter_exprs(item)
    elif isinstance(expr, Repeat):
        yield from _iter_exprs(expr.item)


def _productive(expr: RuleExpr, known: set) -> bool:
    """Can this expression derive at least one finite byte string?"""
    if isinstance(expr, ByteClass):
        return bool(class_byte_ranges(expr))
    if isinstance(expr, (Literal, Empty)):
        return True
    if isinstance(expr, Seq):
        return all(_productive(e, known) for e in expr.items)
    if isinstance(expr, Choice):
        return any(_productive(e, known) for e in expr.items)
    if isinstance(expr, Repeat):
        if expr.lo == 0:
            return True
        return _productive(expr.item, known)
    if isinstance(expr, RuleRef):
        return expr.name in known
    raise TypeError(expr)


def _validate(rules: list) -> Grammar:
    if not rules:
        raise GrammarError("empty grammar")
    seen = {}
    for name, body, line, col in rules:
        if name in seen:
            raise GrammarError(f"duplicate rule name {name!r}", line, col)
        seen[name] = body
    for name, body, line, col in rules:
        for expr in _iter_exprs(body):
            if isinstance(expr, RuleRef) and expr.name not in seen:
                raise GrammarError(f"undefined rule reference {expr.name!r} in {name!r}", line, col)
    # Productivity fixpoint: reject rules that can never derive a finite
    # string (e.g. ``a ::= a``); they would make automaton matching diverge.
    productive: set = set()
    while True:
        grew = False
        for name, body, _, _ in rules:
            if name not in productive and _productive(body, productive):
                productive.add(name)
                grew = True
        if not grew:
            break
    dead = [name for name, _, _, _ in rules if name not in productive]
    if dead:
        raise GrammarError(f"rules derive no strings (empty language): {', '.join(dead)}")
    root = "root" if "root" in seen else rules[0][0]
    return Grammar(tuple(Rule(name, body) for name, body, _, _ in rules), root)


def parse_grammar(text: str) -> Grammar:
    """Parse grammar text into a validated :class:`Grammar`.

    The rule named ``root`` (or the first rule, if none is named ``root``)
    becomes the start rule.
    """
    rules = _Parser(_Lexer(text).tokens()).grammar()
    return _validate(rules)


# ---------------------------------------------------------------------------
# Normalization


def _normalize_expr(expr: RuleExpr) -> RuleExpr:
    if isinstance(expr, ByteClass):
        ranges = class_byte_ranges(expr)
        if not ranges:
            raise GrammarError("character class matches no byte")
        return ByteClass(ranges)
    if isinstance(expr, Literal):
        return Empty() if not expr.data else expr
    if isinstance(expr, Empty) or isinstance(expr, RuleRef):
        return expr
    if isinstance(expr, Seq):
        items = []
        for item in expr.items:
            item = _normalize_expr(item)
            if isinstance(item, Empty):
                continue
            if isinstance(item, Seq):
                items.extend(item.items)
            else:
                items.append(item)
        if not items:
            return Empty()
        if len(items) == 1:
            return items[0]
        return Seq(tuple(items))
    if isinstance(expr, Choice):
        items = []
        for item in expr.items:
            item = _normalize_expr(item)
            if isinstance(item, Choice):
                items.extend(item.items)
            else:
                items.append(item)
        if len(items) == 1:
            return items[0]
        return Choice(tuple(items))
    if isinstance(expr, Repeat):
        item = _normalize_expr(expr.item)
        lo, hi = expr.lo, expr.hi
        if isinstance(item, Empty) or hi == 0:
            return Empty()
        if lo == 1 and hi == 1:
            return item
        # collapse star-of-star shapes: (e*)* == e*, (e+)* == e*, (e*)+ == e*
        if hi is None and isinstance(item, Repeat) and item.hi is None and item.lo <= 1 and lo <= 1:
            return Repeat(item.item, 0 if 0 in (lo, item.lo) else 1, None)
        return Repeat(item, lo, hi)
    raise TypeError(expr)


def normalize_grammar(g: Grammar) -> Grammar:
    """Flatten nested sequences/choices, resolve negations, drop units.

    The result generates the same language; negated byte classes become
    explicit range sets over 0x00-0xFF.
    """
    return Grammar(tuple(Rule(r.name, _normalize_expr(r.body)) for r in g.rules), g.root)


# ---------------------------------------------------------------------------
# Debug emitter


def _byte_repr(b: int, in_class: bool) -> str:
    if b == 0x0A:
        return "\\n"
    if b == 0x09:
        return "\\t"
    if b == 0x0D:
        return "\\r"
    if b == 0x5C:
        return "\\\\"
    if in_class and b in (0x5D, 0x2D, 0x5E, 0x5B):
        return "\\" + chr(b)
    if not in_class and b == 0x22:
        return '\\"'
    if 0x20 <= b <= 0x7E:
        return chr(b)
    return f"\\x{b:02X}"


def _emit(expr: RuleExpr, prec: int) -> str:
    # prec: 0 = alternation, 1 = sequence, 2 = postfix operand
    if isinstance(expr, Empty):
        return '""'
    if isinstance(expr, Literal):
        return '"' + "".join(_byte_repr(b, in_class=False) for b in expr.data) + '"'
    if isinstance(expr, ByteClass):
        parts = []
        for lo, hi in expr.ranges:
            if lo == hi:
                parts.append(_byte_repr(lo, in_class=True))
            else:
                parts.append(f"{_byte_repr(lo, True)}-{_byte_repr(hi, True)}")
        return ("[^" if expr.negated else "[") + "".join(parts) + "]"
    if isinstance(expr, RuleRef):
        return expr.name
    if isinstance(expr, Repeat):
        inner = _emit(expr.item, 2)
        if (expr.lo, expr.hi) == (0, None):
            return inner + "*"
        if (expr.lo, expr.hi) == (1, None):
            return inner + "+"
        if (expr.lo, expr.hi) == (0, 1):
            return inner + "?"
        hi = "" if expr.hi is None else str(expr.hi)
        return inner + "{%d,%s}" % (expr.lo, hi)
    if isinstance(expr, Seq):
        body = " ".join(_emit(e, 2) for e in expr.items)
        return f"( {body} )" if prec >= 2 else body
    if isinstance(expr, Choice):
        body = " | ".join(_emit(e, 1) for e in expr.items)
        return f"( {body} )" if prec >= 1 else body
    raise TypeError(expr)


def pretty_print(g: Grammar) -> str:
    """Emit grammar text that reparses to ``normalize_grammar(g)``.

    The grammar is normalized before emission so that the printed form is
    canonical; the root rule is emitted first.
    """
    g = normalize_grammar(g)
    rules = list(g.rules)
    # Keep source order unless the root would not be rediscovered by the
    # parser (root rule = the one named "root", else the first rule).
    if g.root != "root" and not any(r.name == "root" for r in rules) and rules[0].name != g.root:
        rules.sort(key=lambda r: r.name != g.root)
    return "".join(f"{r.name} ::= {_emit(r.body, 0)}\n" for r in rules)

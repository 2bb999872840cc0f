"""JSON Schema to grammar conversion.

Supports a deliberately small, strict subset: ``type`` (object, array,
string, number, integer, boolean, null), ``properties`` + ``required`` +
``additionalProperties: false``, ``items``, ``minItems``/``maxItems``,
``enum`` of scalars and ``const``.  Any other keyword raises
:class:`SchemaError` naming the offenders — never silent acceptance.

String, number and whitespace sub-rules follow the ECMA-404 lexical
grammar.  Whitespace between JSON tokens is permitted by default; pass
``whitespace=False`` for the strict single-spelling mode.  Objects are
emitted with their required properties as a fixed sequence in schema
order, optional properties after them (each independently presentable);
free property order is out of scope.
"""

from __future__ import annotations

import json

from .grammar import Grammar, parse_grammar

__all__ = ["SchemaError", "schema_to_grammar", "schema_to_grammar_text"]

_SUPPORTED_KEYS = {
    "type",
    "properties",
    "required",
    "additionalProperties",
    "items",
    "enum",
    "const",
    "minItems",
    "maxItems",
}

_TYPES = {"object", "array", "string", "number", "integer", "boolean", "null"}


class SchemaError(ValueError):
    """Schema outside the supported subset, or malformed."""

    def __init__(self, message: str, unsupported=()):
        if unsupported:
            message = f"{message}: {', '.join(sorted(unsupported))}"
        super().__init__(message)
        self.unsupported = tuple(sorted(unsupported))


def _grammar_literal(text: str) -> str:
    """Quote a byte string of JSON text as a grammar literal."""
    out = ['"']
    for b in text.encode("utf-8"):
        if b == 0x22:
            out.append('\\"')
        elif b == 0x5C:
            out.append("\\\\")
        elif b == 0x0A:
            out.append("\\n")
        elif b == 0x09:
            out.append("\\t")
        elif b == 0x0D:
            out.append("\\r")
        elif 0x20 <= b <= 0x7E:
            out.append(chr(b))
        else:
            out.append(f"\\x{b:02X}")
    out.append('"')
    return "".join(out)


_PRIMITIVE_RULES = {
    "jstring": 'jstring ::= "\\"" jchar* "\\""',
    "jchar": 'jchar ::= [^"\\\\\\x00-\\x1F] | "\\\\" jescape',
    "jescape": 'jescape ::= [\\"\\\\/bfnrt] | "u" jhex jhex jhex jhex',
    "jhex": "jhex ::= [0-9a-fA-F]",
    "jinteger": 'jinteger ::= "-"? ("0" | [1-9] [0-9]*)',
    "jnumber": "jnumber ::= jinteger jfraction jexponent",
    "jfraction": 'jfraction ::= ("." [0-9]+)?',
    "jexponent": 'jexponent ::= ([eE] [-+]? [0-9]+)?',
    "jboolean": 'jboolean ::= "true" | "false"',
    "jnull": 'jnull ::= "null"',
    "ws": "ws ::= [ \\t\\n\\r]*",
}

_PRIMITIVE_DEPS = {
    "jstring": ("jchar",),
    "jchar": ("jescape",),
    "jescape": ("jhex",),
    "jnumber": ("jinteger", "jfraction", "jexponent"),
}


class _Converter:
    def __init__(self, whitespace: bool):
        self.rules = {}  # name -> rule text, insertion ordered
        self.counter = 0
        self.whitespace = whitespace

    def ws(self) -> str:
        if not self.whitespace:
            return ""
        self.need("ws")
        return " ws "

    def need(self, name: str):
        if name in self.rules:
            return
        self.rules[name] = _PRIMITIVE_RULES[name]
        for dep in _PRIMITIVE_DEPS.get(name, ()):
            self.need(dep)

    def fresh(self) -> str:
        self.counter += 1
        return f"v{self.counter}"

    def define(self, name: str, body: str):
        self.rules[name] = f"{name} ::= {body}"

    # -- schema walk -------------------------------------------------------

    def convert(self, schema, name: str) -> str:
        if not isinstance(schema, dict):
            raise SchemaError("schema nodes must be objects")
        unknown = set(schema) - _SUPPORTED_KEYS
        if unknown:
            raise SchemaError("unsupported schema keywords", unknown)
        if "const" in schema:
            self.define(name, self._scalar_literal(schema["const"]))
            return name
        if "enum" in schema:
            values = schema["enum"]
            if not isinstance(values, list) or not values:
                raise SchemaError("enum must be a non-empty array")
            self.define(name, " | ".join(self._scalar_literal(v) for v in values))
            return name
        stype = schema.get("type")
        if stype is None:
            raise SchemaError("schema node needs one of: type, enum, const")
        if isinstance(stype, list):
            raise SchemaError("unsupported schema keywords", {"type (as a list)"})
        if stype not in _TYPES:
            raise SchemaError(f"unsupported type {stype!r}")
        if stype == "string":
            self.need("jstring")
            self.define(name, "jstring")
        elif stype == "number":
            self.need("jnumber")
            self.define(name, "jnumber")
        elif stype == "integer":
            self.need("jinteger")
            self.define(name, "jinteger")
        elif stype == "boolean":
            self.need("jboolean")
            self.define(name, "jboolean")
        elif stype == "null":
            self.need("jnull")
            self.define(name, "jnull")
        elif stype == "object":
            self._object(schema, name)
        else:
            self._array(schema, name)
        return name

    def _scalar_literal(self, value) -> str:
        if isinstance(value, (dict, list)):
            raise SchemaError("enum/const values must be scalars")
        return _grammar_literal(json.dumps(value))

    def _object(self, schema, name: str):
        if schema.get("additionalProperties") is not False:
            raise SchemaError(
                "objects require additionalProperties: false (free-form objects are unsupported)"
            )
        props = schema.get("properties", {})
        if not isinstance(props, dict):
            raise SchemaError("properties must be an object")
        required = schema.get("required", [])
        if not isinstance(required, list) or any(r not in props for r in required):
            raise SchemaError("required must list property names present in properties")
        ws = self.ws()
        members = []
        for key, sub in props.items():
            sub_name = self.convert(sub, self.fresh())
            members.append((key, f"{_grammar_literal(json.dumps(key))}{ws}\":\"{ws}{sub_name}", key in required))
        req = [m for _, m, r in members if r]
        opt = [m for _, m, r in members if not r]

        comma = f'{ws}","{ws}'

        def opt_tail(parts):
            # each optional property may independently follow, order fixed
            return "".join(f"({comma}{p})?" for p in parts)

        if req:
            body = comma.join(req) + opt_tail(opt)
        elif opt:
            # first present optional has no leading comma
            alts = []
            for i in range(len(opt)):
                alts.append(opt[i] + opt_tail(opt[i + 1 :]))
            body = "( " + " | ".join(alts) + " )?"
        else:
            body = ""
        self.define(name, f'"{{"{ws}{body}{ws}"}}"' if body else f'"{{"{ws}"}}"')

    def _array(self, schema, name: str):
        items = schema.get("items")
        if items is None:
            raise SchemaError("arrays require items")
        lo = schema.get("minItems", 0)
        hi = schema.get("maxItems")
        if not isinstance(lo, int) or lo < 0 or (hi is not None and (not isinstance(hi, int) or hi < lo)):
            raise SchemaError("bad minItems/maxItems")
        item = self.convert(items, self.fresh())
        ws = self.ws()
        comma = f'{ws}","{ws}'
        if hi == 0:
            self.define(name, f'"["{ws}"]"')
            return
        bound = "*" if hi is None else f"{{0,{hi - 1}}}"
        if lo > 0:
            bound = f"{{{lo - 1},}}" if hi is None else f"{{{lo - 1},{hi - 1}}}"
        seq = f"{item} ({comma}{item}){bound}"
        if lo == 0:
            self.define(name, f'"["{ws}( {seq} )?{ws}"]"')
        else:
            self.define(name, f'"["{ws}{seq}{ws}"]"')


def schema_to_grammar_text(schema_json: str, *, whitespace: bool = True) -> str:
    """Convert a JSON Schema document to grammar text."""
    try:
        schema = json.loads(schema_json)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"schema is not valid JSON: {exc}") from exc
    conv = _Converter(whitespace)
    body_name = conv.fresh()
    rules = {}  # root first for readability
    conv.convert(schema, body_name)
    ws = "ws " if whitespace else ""
    if whitespace:
        conv.need("ws")
    rules["root"] = f"root ::= {ws}{body_name} {ws}".rstrip()
    rules.update(conv.rules)
    return "\n".join(rules.values()) + "\n"


def schema_to_grammar(schema_json: str, *, whitespace: bool = True) -> Grammar:
    """Convert a JSON Schema document to a validated grammar."""
    return parse_grammar(schema_to_grammar_text(schema_json, whitespace=whitespace))

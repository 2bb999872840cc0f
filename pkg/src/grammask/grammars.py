"""Sample grammars used by demos, benchmarks and tests."""

# Arrays and strings, recursively composable.  Written in plain BNF style
# (shared alternative prefixes, no sugar beyond the star) so the raw
# automaton genuinely needs parallel stacks; node merging then collapses
# most of that ambiguity.
ARRAY_STRING = r'''
root   ::= array | string
array  ::= "[" "]" | "[" elems "]"
elems  ::= root | root "," elems
string ::= "\"" [^"\\]* "\""
'''

# ECMA-404 JSON, the classic json.org factoring.
JSON_ECMA404 = r'''
root     ::= element
element  ::= ws value ws
value    ::= object | array | string | number | "true" | "false" | "null"
object   ::= "{" ws "}" | "{" members "}"
members  ::= member ("," member)*
member   ::= ws string ws ":" element
array    ::= "[" ws "]" | "[" elements "]"
elements ::= element ("," element)*
string   ::= "\"" char* "\""
char     ::= [^"\\\x00-\x1F] | "\\" escape
escape   ::= [\"\\/bfnrt] | "u" hex hex hex hex
hex      ::= [0-9a-fA-F]
number   ::= integer fraction exponent
integer  ::= "-"? ("0" | onenine digit*)
digit    ::= [0-9]
onenine  ::= [1-9]
fraction ::= ("." digit+)?
exponent ::= (("e" | "E") ("+" | "-")? digit+)?
ws       ::= [ \t\n\r]*
'''

# Infix arithmetic in exactly three rules, recursive through parentheses.
ARITHMETIC = r'''
root   ::= term (("+" | "-") term)*
term   ::= factor (("*" | "/") factor)*
factor ::= [0-9]+ | "(" root ")"
'''

# A toy XML fragment: two fixed element names, nestable, with text runs.
XML_TOY = r'''
root    ::= element
element ::= "<a>" item* "</a>" | "<b>" item* "</b>"
item    ::= element | text
text    ::= [a-z0-9 ]+
'''

# Fixture schema for the schema-compiled grammar (function-call flavored).
SAMPLE_SCHEMA = '''
{
  "type": "object",
  "properties": {
    "name": {"enum": ["get_weather", "get_time"]},
    "unit": {"type": "string"},
    "count": {"type": "integer"},
    "tags": {"type": "array", "items": {"type": "string"}, "minItems": 1, "maxItems": 3}
  },
  "required": ["name", "count"],
  "additionalProperties": false
}
'''

ALL_NAMED = {
    "array_string": ARRAY_STRING,
    "json": JSON_ECMA404,
    "arithmetic": ARITHMETIC,
    "xml": XML_TOY,
}

"""Concrete syntax for policy bundles: parser and pretty-printer.

The grammar is keyword-based and whitespace-insensitive; `--` starts a
comment running to end of line. One bundle may span several files (the CLI
concatenates them); there are no imports. Parsing runs in two phases —
syntax, then name resolution — and reports every error it can find rather
than stopping at the first. The printer emits a canonical rendering whose
reparse is structurally equal to the printed bundle.

Surface forms worth knowing:
  - `intersect(a, b) == []` is the empty-intersection proposition; the
    parser builds the dedicated node and the printer emits the same text.
  - A call in proposition position (`GoodProtos(s)`) references another
    policy; the typechecker inlines it.
  - Bare identifiers in expressions resolve, in order, to: bound variable,
    named constant (spliced as a literal), enum atom, entity reference.
    Constant, atom, and entity namespaces must not overlap.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable

from .ast import (
    And,
    Attr,
    AttrExpr,
    Builtin,
    BUILTINS,
    Bundle,
    Cmp,
    CmpOp,
    EmptyIntersect,
    Exists,
    Forall,
    Literal,
    Member,
    Not,
    Or,
    Policy,
    PolicyRef,
    PolicyRule,
    Proposition,
    Var,
)
from .errors import PolityError
from .model import Entity, EntitySchema
from .values import (
    BOOL_T,
    EnumDecl,
    NAT_T,
    STR_T,
    Tag,
    Value,
    ValueType,
    atom,
    boolean,
    enum_t,
    list_of,
    list_t,
    nat,
    ref,
    ref_t,
    string,
)

ENTITY_URN_PREFIX = "urn:entity:"


@dataclass(frozen=True)
class SourceFile:
    path: str
    text: str

    @classmethod
    def read(cls, path: str) -> "SourceFile":
        with open(path, "r", encoding="utf-8") as fh:
            return cls(path=path, text=fh.read())


@dataclass(frozen=True)
class ParseError:
    line: int
    column: int
    message: str
    expected: str | None = None
    path: str | None = None

    def render(self) -> str:
        where = f"{self.path or '<input>'}:{self.line}:{self.column}"
        tail = f" (expected {self.expected})" if self.expected else ""
        return f"{where}: {self.message}{tail}"


class ParseFailure(PolityError):
    def __init__(self, errors: list[ParseError]):
        super().__init__("; ".join(e.render() for e in errors[:5]))
        self.errors = errors


# --- lexer -------------------------------------------------------------------

KEYWORDS = {
    "enum", "schema", "entity", "policy", "const", "rule",
    "and", "or", "not", "exists", "forall", "in", "true", "false",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>--[^\n]*)
  | (?P<nat>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<op>==|!=|<=|>=|<|>|=|\{|\}|\(|\)|\[|\]|,|;|:|\.)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # 'nat' | 'ident' | 'string' | 'op' | 'eof'
    text: str
    line: int
    column: int


class _SyntaxError(Exception):
    def __init__(self, token: Token, message: str, expected: str | None = None):
        super().__init__(message)
        self.token = token
        self.message = message
        self.expected = expected


def _lex(src: SourceFile) -> tuple[list[Token], list[ParseError]]:
    tokens: list[Token] = []
    errors: list[ParseError] = []
    line, col, pos = 1, 1, 0
    text = src.text
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            errors.append(ParseError(line, col, f"unexpected character {text[pos]!r}",
                                     path=src.path))
            pos += 1
            col += 1
            continue
        kind = m.lastgroup
        value = m.group()
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, value, line, col))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            col = len(value) - value.rfind("\n")
        else:
            col += len(value)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens, errors


def _unquote(raw: str) -> str:
    body = raw[1:-1]
    out: list[str] = []
    i = 0
    while i < len(body):
        c = body[i]
        if c == "\\" and i + 1 < len(body):
            nxt = body[i + 1]
            out.append({"n": "\n", "t": "\t", '"': '"', "\\": "\\"}.get(nxt, nxt))
            i += 2
        else:
            out.append(c)
            i += 1
    return "".join(out)


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t") + '"'


# --- raw (phase 1) nodes -------------------------------------------------------

@dataclass
class _RName:
    name: str
    tok: Token


@dataclass
class _RLit:
    value: Value  # nat / str / bool scalars only
    tok: Token


@dataclass
class _RList:
    items: list
    tok: Token


@dataclass
class _RDot:
    base: str
    attr: str
    tok: Token


@dataclass
class _RCall:
    name: str
    args: list
    tok: Token


@dataclass
class _RCmp:
    lhs: object
    op: CmpOp
    rhs: object
    tok: Token


@dataclass
class _RMember:
    elem: object
    coll: object
    tok: Token


@dataclass
class _RAnd:
    p: object
    q: object


@dataclass
class _ROr:
    p: object
    q: object


@dataclass
class _RNot:
    p: object


@dataclass
class _RQuant:
    exists: bool
    var: str
    domain: str
    body: object
    tok: Token


@dataclass
class _RType:
    form: str  # 'nat' | 'str' | 'bool' | 'list' | 'ref' | 'name'
    name: str | None
    inner: "_RType | None"
    tok: Token


@dataclass
class _RawEnum:
    name: str
    members: list[str]
    tok: Token


@dataclass
class _RawSchema:
    name: str
    attrs: list[tuple[str, _RType, Token]]
    tok: Token


@dataclass
class _RawEntity:
    name: str
    kind: str
    attrs: list[tuple[str, object, Token]]
    tok: Token


@dataclass
class _RawConst:
    name: str
    value: object
    tok: Token


@dataclass
class _RawRule:
    name: str
    body: object
    tok: Token


@dataclass
class _RawPolicy:
    name: str
    params: list[tuple[str, str]]
    rules: list[_RawRule]
    tok: Token


# --- phase 1: syntax ----------------------------------------------------------

_TOP_KEYWORDS = ("enum", "schema", "entity", "policy", "const")


class _Parser:
    def __init__(self, tokens: list[Token], path: str):
        self.tokens = tokens
        self.pos = 0
        self.path = path
        self.errors: list[ParseError] = []

    # token plumbing

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at(self, kind: str, text: str | None = None) -> bool:
        tok = self.peek()
        return tok.kind == kind and (text is None or tok.text == text)

    def expect(self, kind: str, text: str | None = None, expected: str | None = None) -> Token:
        if self.at(kind, text):
            return self.advance()
        want = expected or (text if text is not None else kind)
        raise _SyntaxError(self.peek(), f"unexpected {self._describe(self.peek())}",
                           expected=want)

    @staticmethod
    def _describe(tok: Token) -> str:
        return "end of input" if tok.kind == "eof" else f"{tok.text!r}"

    def record(self, err: _SyntaxError) -> None:
        self.errors.append(ParseError(err.token.line, err.token.column, err.message,
                                      expected=err.expected, path=self.path))

    def sync_top(self) -> None:
        while not self.at("eof"):
            tok = self.peek()
            if tok.kind == "ident" and tok.text in _TOP_KEYWORDS:
                return
            self.advance()

    def sync_rule(self) -> None:
        depth = 0
        while not self.at("eof"):
            tok = self.peek()
            if depth == 0 and tok.text in (";", "}"):
                if tok.text == ";":
                    self.advance()
                return
            if tok.text in ("(", "[", "{"):
                depth += 1
            elif tok.text in (")", "]", "}"):
                depth = max(0, depth - 1)
            self.advance()

    # declarations

    def parse_bundle(self) -> list:
        decls = []
        while not self.at("eof"):
            try:
                decls.append(self.parse_decl())
            except _SyntaxError as err:
                self.record(err)
                if not self.at("eof"):
                    self.advance()  # guarantee progress before resyncing
                self.sync_top()
        return decls

    def parse_decl(self):
        tok = self.peek()
        if self.at("ident", "enum"):
            return self.parse_enum()
        if self.at("ident", "schema"):
            return self.parse_schema()
        if self.at("ident", "entity"):
            return self.parse_entity()
        if self.at("ident", "const"):
            return self.parse_const()
        if self.at("ident", "policy"):
            return self.parse_policy()
        raise _SyntaxError(tok, f"unexpected {self._describe(tok)}",
                           expected="enum, schema, entity, const, or policy")

    def ident(self, what: str) -> Token:
        tok = self.peek()
        if tok.kind != "ident" or tok.text in KEYWORDS:
            raise _SyntaxError(tok, f"unexpected {self._describe(tok)}", expected=what)
        return self.advance()

    def parse_enum(self) -> _RawEnum:
        start = self.advance()
        name = self.ident("enum name")
        self.expect("op", "{")
        members: list[str] = []
        while not self.at("op", "}"):
            members.append(self.ident("enum member").text)
        self.expect("op", "}")
        return _RawEnum(name.text, members, start)

    def parse_type(self) -> _RType:
        tok = self.peek()
        if tok.kind != "ident":
            raise _SyntaxError(tok, f"unexpected {self._describe(tok)}", expected="a type")
        if tok.text == "nat":
            return _RType("nat", None, None, self.advance())
        if tok.text == "str":
            return _RType("str", None, None, self.advance())
        if tok.text == "bool":
            return _RType("bool", None, None, self.advance())
        if tok.text == "list":
            start = self.advance()
            return _RType("list", None, self.parse_type(), start)
        if tok.text == "ref":
            start = self.advance()
            kind = self.ident("an entity kind")
            return _RType("ref", kind.text, None, start)
        name = self.ident("a type")
        return _RType("name", name.text, None, name)

    def parse_schema(self) -> _RawSchema:
        start = self.advance()
        name = self.ident("schema kind")
        self.expect("op", "{")
        attrs: list[tuple[str, _RType, Token]] = []
        while not self.at("op", "}"):
            attr = self.ident("attribute name")
            self.expect("op", ":")
            attrs.append((attr.text, self.parse_type(), attr))
            if not self.at("op", "}"):
                self.expect("op", ",")
        self.expect("op", "}")
        return _RawSchema(name.text, attrs, start)

    def parse_literal(self):
        tok = self.peek()
        if tok.kind == "nat":
            self.advance()
            return _RLit(nat(int(tok.text)), tok)
        if tok.kind == "string":
            self.advance()
            return _RLit(string(_unquote(tok.text)), tok)
        if tok.kind == "ident" and tok.text in ("true", "false"):
            self.advance()
            return _RLit(boolean(tok.text == "true"), tok)
        if tok.kind == "ident" and tok.text not in KEYWORDS:
            self.advance()
            return _RName(tok.text, tok)
        if self.at("op", "["):
            start = self.advance()
            items = []
            while not self.at("op", "]"):
                items.append(self.parse_literal())
                if not self.at("op", "]"):
                    self.expect("op", ",")
            self.expect("op", "]")
            return _RList(items, start)
        raise _SyntaxError(tok, f"unexpected {self._describe(tok)}", expected="a value")

    def parse_entity(self) -> _RawEntity:
        start = self.advance()
        name = self.ident("entity name")
        self.expect("op", ":")
        kind = self.ident("entity kind")
        self.expect("op", "{")
        attrs: list[tuple[str, object, Token]] = []
        while not self.at("op", "}"):
            attr = self.ident("attribute name")
            self.expect("op", "=")
            attrs.append((attr.text, self.parse_literal(), attr))
            if not self.at("op", "}"):
                self.expect("op", ",")
        self.expect("op", "}")
        return _RawEntity(name.text, kind.text, attrs, start)

    def parse_const(self) -> _RawConst:
        start = self.advance()
        name = self.ident("constant name")
        self.expect("op", "=")
        return _RawConst(name.text, self.parse_literal(), start)

    def parse_policy(self) -> _RawPolicy:
        start = self.advance()
        name = self.ident("policy name")
        self.expect("op", "(")
        params: list[tuple[str, str]] = []
        while not self.at("op", ")"):
            pname = self.ident("parameter name")
            self.expect("op", ":")
            pkind = self.ident("parameter kind")
            params.append((pname.text, pkind.text))
            if not self.at("op", ")"):
                self.expect("op", ",")
        self.expect("op", ")")
        self.expect("op", "{")
        rules: list[_RawRule] = []
        while not self.at("op", "}") and not self.at("eof"):
            try:
                rtok = self.expect("ident", "rule", expected="'rule'")
                rname = self.ident("rule name")
                self.expect("op", ":")
                body = self.parse_prop()
                self.expect("op", ";")
                rules.append(_RawRule(rname.text, body, rtok))
            except _SyntaxError as err:
                self.record(err)
                self.sync_rule()
        self.expect("op", "}")
        return _RawPolicy(name.text, params, rules, start)

    # propositions

    def parse_prop(self):
        return self.parse_or()

    def parse_or(self):
        left = self.parse_and()
        while self.at("ident", "or"):
            self.advance()
            left = _ROr(left, self.parse_and())
        return left

    def parse_and(self):
        left = self.parse_unary()
        while self.at("ident", "and"):
            self.advance()
            left = _RAnd(left, self.parse_unary())
        return left

    def parse_unary(self):
        if self.at("ident", "not"):
            self.advance()
            return _RNot(self.parse_unary())
        if self.at("ident", "exists") or self.at("ident", "forall"):
            start = self.advance()
            var = self.ident("a variable")
            self.expect("ident", "in", expected="'in'")
            domain = self.ident("a domain (kind or enum)")
            self.expect("op", ":")
            body = self.parse_prop()
            return _RQuant(start.text == "exists", var.text, domain.text, body, start)
        if self.at("op", "("):
            self.advance()
            inner = self.parse_prop()
            self.expect("op", ")")
            return inner
        return self.parse_relation()

    _CMP_TOKENS = {"==": CmpOp.EQ, "!=": CmpOp.NEQ, "<=": CmpOp.LE,
                   "<": CmpOp.LT, ">=": CmpOp.GE, ">": CmpOp.GT}

    def parse_relation(self):
        lhs = self.parse_expr()
        tok = self.peek()
        if tok.kind == "op" and tok.text in self._CMP_TOKENS:
            self.advance()
            rhs = self.parse_expr()
            return _RCmp(lhs, self._CMP_TOKENS[tok.text], rhs, tok)
        if self.at("ident", "in"):
            self.advance()
            coll = self.parse_expr()
            return _RMember(lhs, coll, tok)
        if isinstance(lhs, _RCall):
            return lhs  # proposition-position call: policy reference
        raise _SyntaxError(self.peek(), f"unexpected {self._describe(self.peek())}",
                           expected="a comparison or 'in'")

    def parse_expr(self):
        tok = self.peek()
        if tok.kind in ("nat", "string") or (tok.kind == "ident" and tok.text in ("true", "false")):
            return self.parse_literal()
        if self.at("op", "["):
            return self.parse_literal()
        if tok.kind == "ident" and tok.text not in KEYWORDS:
            name = self.advance()
            if self.at("op", "("):
                self.advance()
                args = []
                while not self.at("op", ")"):
                    args.append(self.parse_expr())
                    if not self.at("op", ")"):
                        self.expect("op", ",")
                self.expect("op", ")")
                return _RCall(name.text, args, name)
            if self.at("op", "."):
                self.advance()
                attr = self.ident("attribute name")
                return _RDot(name.text, attr.text, name)
            return _RName(name.text, name)
        raise _SyntaxError(tok, f"unexpected {self._describe(tok)}", expected="an expression")


# --- phase 2: name resolution ---------------------------------------------------


class _Resolver:
    def __init__(self) -> None:
        self.errors: list[ParseError] = []
        self.enums: dict[str, EnumDecl] = {}
        self.schemas: dict[str, EntitySchema] = {}
        self.entity_kinds: dict[str, str] = {}  # name -> kind
        self.raw_schemas: list[tuple[_RawSchema, str]] = []
        self.raw_entities: list[tuple[_RawEntity, str]] = []
        self.raw_consts: list[tuple[_RawConst, str]] = []
        self.raw_policies: list[tuple[_RawPolicy, str]] = []
        self.consts: dict[str, Value] = {}
        self.atoms: dict[str, str] = {}  # atom -> enum name ('' when ambiguous)

    def err(self, tok: Token, path: str, message: str, expected: str | None = None) -> None:
        self.errors.append(ParseError(tok.line, tok.column, message, expected, path))

    # pass A: collect declarations

    def collect(self, decls: list, path: str) -> None:
        for decl in decls:
            if isinstance(decl, _RawEnum):
                if decl.name in self.enums:
                    self.err(decl.tok, path, f"duplicate enum {decl.name!r}")
                    continue
                if len(set(decl.members)) != len(decl.members):
                    self.err(decl.tok, path, f"enum {decl.name!r} repeats a member")
                    continue
                if not decl.members:
                    self.err(decl.tok, path, f"enum {decl.name!r} has no members")
                    continue
                self.enums[decl.name] = EnumDecl(decl.name, tuple(decl.members))
                for member in decl.members:
                    self.atoms[member] = "" if member in self.atoms else decl.name
            elif isinstance(decl, _RawSchema):
                if any(s.name == decl.name for s, _ in self.raw_schemas):
                    self.err(decl.tok, path, f"duplicate schema {decl.name!r}")
                    continue
                self.raw_schemas.append((decl, path))
            elif isinstance(decl, _RawEntity):
                if decl.name in self.entity_kinds:
                    self.err(decl.tok, path, f"duplicate entity {decl.name!r}")
                    continue
                self.entity_kinds[decl.name] = decl.kind
                self.raw_entities.append((decl, path))
            elif isinstance(decl, _RawConst):
                self.raw_consts.append((decl, path))
            elif isinstance(decl, _RawPolicy):
                self.raw_policies.append((decl, path))

    # pass B: resolve

    def resolve(self) -> Bundle:
        # schema attribute types
        for raw, path in self.raw_schemas:
            attrs: dict[str, ValueType] = {}
            for attr, rtype, tok in raw.attrs:
                if attr in attrs:
                    self.err(tok, path, f"duplicate attribute {attr!r} in schema {raw.name}")
                    continue
                t = self._resolve_type(rtype, path)
                if t is not None:
                    attrs[attr] = t
            self.schemas[raw.name] = EntitySchema(raw.name, attrs)

        # entity names may not collide with enum atoms (keeps bare-name
        # resolution in expressions unambiguous)
        for decl, path in self.raw_entities:
            if decl.name in self.atoms:
                self.err(decl.tok, path, f"entity {decl.name!r} collides with an enum atom")

        # constants resolve in declaration order, so a const may reference
        # earlier consts; collisions with atoms and entities are rejected
        consts: list[tuple[str, Value]] = []
        for cdecl, path in self.raw_consts:
            if cdecl.name in self.consts:
                self.err(cdecl.tok, path, f"duplicate constant {cdecl.name!r}")
                continue
            if cdecl.name in self.atoms or cdecl.name in self.entity_kinds:
                self.err(cdecl.tok, path,
                         f"constant {cdecl.name!r} collides with an enum atom or entity")
                continue
            v = self._resolve_literal(cdecl.value, None, path)
            if v is not None:
                self.consts[cdecl.name] = v
                consts.append((cdecl.name, v))

        # entities, type-directed
        entities: list[Entity] = []
        for edecl, path in self.raw_entities:
            schema = self.schemas.get(edecl.kind)
            if schema is None:
                self.err(edecl.tok, path,
                         f"entity {edecl.name!r} has undeclared kind {edecl.kind!r}")
                continue
            attrs: dict[str, Value] = {}
            bad = False
            for attr, rlit, tok in edecl.attrs:
                declared = schema.attributes.get(attr)
                if declared is None:
                    self.err(tok, path,
                             f"kind {edecl.kind} has no attribute {attr!r}")
                    bad = True
                    continue
                if attr in attrs:
                    self.err(tok, path, f"duplicate attribute {attr!r} on entity {edecl.name}")
                    bad = True
                    continue
                v = self._resolve_literal(rlit, declared, path)
                if v is None:
                    bad = True
                    continue
                attrs[attr] = v
            if not bad:
                entities.append(Entity(ENTITY_URN_PREFIX + edecl.name, edecl.kind, attrs))

        # policies
        policies: list[Policy] = []
        seen_policies: set[str] = set()
        for pdecl, path in self.raw_policies:
            if pdecl.name in seen_policies:
                self.err(pdecl.tok, path, f"duplicate policy {pdecl.name!r}")
                continue
            seen_policies.add(pdecl.name)
            params: list[tuple[str, str]] = []
            seen_params: set[str] = set()
            for pname, pkind in pdecl.params:
                if pname in seen_params:
                    self.err(pdecl.tok, path,
                             f"duplicate parameter {pname!r} in policy {pdecl.name}")
                seen_params.add(pname)
                params.append((pname, pkind))
            rules: list[PolicyRule] = []
            seen_rules: set[str] = set()
            for rule in pdecl.rules:
                if rule.name in seen_rules:
                    self.err(rule.tok, path,
                             f"duplicate rule {rule.name!r} in policy {pdecl.name}")
                    continue
                seen_rules.add(rule.name)
                body = self._resolve_prop(rule.body, set(seen_params), path)
                if body is not None:
                    rules.append(PolicyRule(rule.name, body))
            if not pdecl.rules:
                self.err(pdecl.tok, path, f"policy {pdecl.name!r} declares no rules")
                continue
            if len(rules) == len(pdecl.rules):
                policies.append(Policy(pdecl.name, tuple(params), tuple(rules)))

        return Bundle(
            enums=tuple(self.enums.values()),
            schemas=tuple(self.schemas.values()),
            entities=tuple(entities),
            policies=tuple(policies),
            consts=tuple(consts),
        )

    def _resolve_type(self, rtype: _RType, path: str) -> ValueType | None:
        if rtype.form == "nat":
            return NAT_T
        if rtype.form == "str":
            return STR_T
        if rtype.form == "bool":
            return BOOL_T
        if rtype.form == "list":
            inner = self._resolve_type(rtype.inner, path)
            return list_t(inner) if inner is not None else None
        if rtype.form == "ref":
            return ref_t(rtype.name)
        # bare name: must be a declared enum
        if rtype.name in self.enums:
            return enum_t(rtype.name)
        self.err(rtype.tok, path, f"unknown type {rtype.name!r}",
                 expected="nat, str, bool, list, ref, or an enum name")
        return None

    def _resolve_literal(self, raw, declared: ValueType | None, path: str) -> Value | None:
        """Resolve a literal, type-directed when a declared type is known."""
        if isinstance(raw, _RLit):
            return raw.value
        if isinstance(raw, _RList):
            elem_decl = declared.elem if declared is not None and declared.tag is Tag.LIST else None
            items = []
            for item in raw.items:
                v = self._resolve_literal(item, elem_decl, path)
                if v is None:
                    return None
                items.append(v)
            try:
                return list_of(items)
            except PolityError as exc:
                self.err(raw.tok, path, str(exc))
                return None
        if isinstance(raw, _RName):
            return self._resolve_name_value(raw, declared, path)
        self.err(raw.tok, path, "expected a literal value")
        return None

    def _resolve_name_value(self, raw: _RName, declared: ValueType | None, path: str) -> Value | None:
        name = raw.name
        if declared is not None and declared.tag is Tag.ENUM:
            decl = self.enums.get(declared.enum_name or "")
            if decl is None or name not in decl.members:
                self.err(raw.tok, path,
                         f"{name!r} is not a member of enum {declared.enum_name}")
                return None
            return atom(declared.enum_name, name)
        if declared is not None and declared.tag is Tag.REF:
            kind = self.entity_kinds.get(name)
            if kind is None:
                self.err(raw.tok, path, f"unknown entity {name!r}")
                return None
            if declared.ref_kind is not None and kind != declared.ref_kind:
                self.err(raw.tok, path,
                         f"entity {name!r} has kind {kind}, expected {declared.ref_kind}")
                return None
            return ref(ENTITY_URN_PREFIX + name)
        # undirected: const, then unique enum atom, then entity
        if name in self.consts:
            return self.consts[name]
        if name in self.atoms:
            enum_name = self.atoms[name]
            if not enum_name:
                self.err(raw.tok, path, f"enum atom {name!r} is ambiguous across enums")
                return None
            return atom(enum_name, name)
        if name in self.entity_kinds:
            return ref(ENTITY_URN_PREFIX + name)
        self.err(raw.tok, path, f"unknown name {name!r}")
        return None

    # policy bodies

    def _resolve_expr(self, raw, scope: set[str], path: str) -> AttrExpr | None:
        if isinstance(raw, _RLit):
            return Literal(raw.value)
        if isinstance(raw, _RList):
            v = self._resolve_literal(raw, None, path)
            return Literal(v) if v is not None else None
        if isinstance(raw, _RName):
            if raw.name in scope:
                return Var(raw.name)
            v = self._resolve_name_value(raw, None, path)
            if v is None:
                return None
            kind = self.entity_kinds.get(raw.name) if v.tag is Tag.REF else None
            return Literal(v, ref_kind=kind)
        if isinstance(raw, _RDot):
            if raw.base not in scope:
                self.err(raw.tok, path,
                         f"attribute projection requires a bound variable, "
                         f"{raw.base!r} is not in scope")
                return None
            return Attr(raw.base, raw.attr)
        if isinstance(raw, _RCall):
            args = []
            for a in raw.args:
                r = self._resolve_expr(a, scope, path)
                if r is None:
                    return None
                args.append(r)
            return Builtin(raw.name, tuple(args))
        self.err(getattr(raw, "tok", Token("eof", "", 0, 0)), path, "expected an expression")
        return None

    def _resolve_prop(self, raw, scope: set[str], path: str) -> Proposition | None:
        if isinstance(raw, _ROr):
            p = self._resolve_prop(raw.p, scope, path)
            q = self._resolve_prop(raw.q, scope, path)
            return Or(p, q) if p is not None and q is not None else None
        if isinstance(raw, _RAnd):
            p = self._resolve_prop(raw.p, scope, path)
            q = self._resolve_prop(raw.q, scope, path)
            return And(p, q) if p is not None and q is not None else None
        if isinstance(raw, _RNot):
            p = self._resolve_prop(raw.p, scope, path)
            return Not(p) if p is not None else None
        if isinstance(raw, _RQuant):
            body = self._resolve_prop(raw.body, scope | {raw.var}, path)
            if body is None:
                return None
            cls = Exists if raw.exists else Forall
            return cls(raw.var, raw.domain, body)
        if isinstance(raw, _RCmp):
            lhs = self._resolve_expr(raw.lhs, scope, path)
            rhs = self._resolve_expr(raw.rhs, scope, path)
            if lhs is None or rhs is None:
                return None
            # `intersect(a, b) == []` is the empty-intersection proposition
            if raw.op is CmpOp.EQ:
                for first, second in ((lhs, rhs), (rhs, lhs)):
                    if (
                        isinstance(first, Builtin)
                        and first.name == "intersect"
                        and len(first.args) == 2
                        and isinstance(second, Literal)
                        and second.value.tag is Tag.LIST
                        and not second.value.payload
                    ):
                        return EmptyIntersect(first.args[0], first.args[1])
            return Cmp(lhs, raw.op, rhs)
        if isinstance(raw, _RMember):
            elem = self._resolve_expr(raw.elem, scope, path)
            coll = self._resolve_expr(raw.coll, scope, path)
            if elem is None or coll is None:
                return None
            return Member(elem, coll)
        if isinstance(raw, _RCall):
            # proposition-position call: reference to another policy
            args = []
            for a in raw.args:
                r = self._resolve_expr(a, scope, path)
                if r is None:
                    return None
                args.append(r)
            return PolicyRef(raw.name, tuple(args))
        self.err(getattr(raw, "tok", Token("eof", "", 0, 0)), path, "expected a proposition")
        return None


def parse_files(sources: Iterable[SourceFile]) -> Bundle:
    """Parse one bundle from one or more sources; raises ParseFailure with
    every diagnostic found (syntax and name resolution)."""
    errors: list[ParseError] = []
    resolver = _Resolver()
    per_file: list[tuple[list, str]] = []
    for src in sources:
        tokens, lex_errors = _lex(src)
        errors.extend(lex_errors)
        parser = _Parser(tokens, src.path)
        decls = parser.parse_bundle()
        errors.extend(parser.errors)
        per_file.append((decls, src.path))
    for decls, path in per_file:
        resolver.collect(decls, path)
    bundle = resolver.resolve()
    errors.extend(resolver.errors)
    if errors:
        raise ParseFailure(errors)
    return bundle


def parse_source(src: SourceFile) -> Bundle:
    return parse_files([src])


def parse_text(text: str, path: str = "<memory>") -> Bundle:
    return parse_files([SourceFile(path=path, text=text)])


# --- printer -------------------------------------------------------------------


def _type_text(t: ValueType) -> str:
    if t.tag is Tag.NAT:
        return "nat"
    if t.tag is Tag.STR:
        return "str"
    if t.tag is Tag.BOOL:
        return "bool"
    if t.tag is Tag.ENUM:
        return t.enum_name or "?"
    if t.tag is Tag.REF:
        return f"ref {t.ref_kind}"
    if t.tag is Tag.LIST:
        return f"list {_type_text(t.elem)}" if t.elem else "list ?"
    raise PolityError(f"unprintable type {t!r}")


class _Printer:
    def __init__(self, bundle: Bundle):
        self.bundle = bundle
        self.names_by_id = {e.id: e.name for e in bundle.entities}

    def value_text(self, v: Value) -> str:
        if v.tag is Tag.NAT:
            return str(v.payload)
        if v.tag is Tag.STR:
            return _quote(v.payload)
        if v.tag is Tag.BOOL:
            return "true" if v.payload else "false"
        if v.tag is Tag.ENUM:
            return v.payload
        if v.tag is Tag.REF:
            name = self.names_by_id.get(v.payload)
            if name is None:
                raise PolityError(f"cannot print reference to unknown entity {v.payload}")
            return name
        if v.tag is Tag.LIST:
            return "[" + ", ".join(self.value_text(x) for x in v.payload) + "]"
        raise PolityError(f"unprintable value {v!r}")

    def expr_text(self, e: AttrExpr) -> str:
        if isinstance(e, Literal):
            return self.value_text(e.value)
        if isinstance(e, Var):
            return e.name
        if isinstance(e, Attr):
            return f"{e.var}.{e.attr}"
        if isinstance(e, Builtin):
            return f"{e.name}(" + ", ".join(self.expr_text(a) for a in e.args) + ")"
        raise PolityError(f"unprintable expression {e!r}")

    # precedence: or=1 < and=2 < not=3; quantifiers bind loosest (0)
    def prop_text(self, p: Proposition, parent: int = 0) -> str:
        if isinstance(p, Or):
            text = f"{self.prop_text(p.p, 1)} or {self.prop_text(p.q, 2)}"
            return f"({text})" if parent > 1 else text
        if isinstance(p, And):
            text = f"{self.prop_text(p.p, 2)} and {self.prop_text(p.q, 3)}"
            return f"({text})" if parent > 2 else text
        if isinstance(p, Not):
            return f"not {self.prop_text(p.p, 3)}"
        if isinstance(p, (Exists, Forall)):
            kw = "exists" if isinstance(p, Exists) else "forall"
            text = f"{kw} {p.var} in {p.domain}: {self.prop_text(p.body, 0)}"
            return f"({text})" if parent > 0 else text
        if isinstance(p, Cmp):
            return f"{self.expr_text(p.lhs)} {p.op.value} {self.expr_text(p.rhs)}"
        if isinstance(p, Member):
            return f"{self.expr_text(p.elem)} in {self.expr_text(p.set)}"
        if isinstance(p, EmptyIntersect):
            return f"intersect({self.expr_text(p.a)}, {self.expr_text(p.b)}) == []"
        if isinstance(p, PolicyRef):
            return f"{p.name}(" + ", ".join(self.expr_text(a) for a in p.args) + ")"
        raise PolityError(f"unprintable proposition {p!r}")

    def render(self) -> str:
        chunks: list[str] = []
        for enum in self.bundle.enums:
            chunks.append(f"enum {enum.name} {{ " + " ".join(enum.members) + " }")
        for schema in self.bundle.schemas:
            attrs = ", ".join(
                f"{name}: {_type_text(t)}" for name, t in schema.attributes.items()
            )
            chunks.append(f"schema {schema.kind} {{ {attrs} }}")
        for name, value in self.bundle.consts:
            chunks.append(f"const {name} = {self.value_text(value)}")
        for ent in self.bundle.entities:
            attrs = ", ".join(
                f"{name} = {self.value_text(v)}" for name, v in ent.attributes.items()
            )
            chunks.append(f"entity {ent.name} : {ent.kind} {{ {attrs} }}")
        for pol in self.bundle.policies:
            params = ", ".join(f"{n}: {k}" for n, k in pol.params)
            lines = [f"policy {pol.name}({params}) {{"]
            for rule in pol.rules:
                lines.append(f"  rule {rule.name}: {self.prop_text(rule.body)};")
            lines.append("}")
            chunks.append("\n".join(lines))
        return "\n\n".join(chunks) + ("\n" if chunks else "")


def print_bundle(bundle: Bundle) -> str:
    """Canonical text whose reparse equals the bundle structurally."""
    return _Printer(bundle).render()

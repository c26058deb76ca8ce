"""Parser for the .btf behavior-tree format (Lisp-like syntax)."""

from __future__ import annotations

from dataclasses import dataclass

from .syntax import (
    ALL_PAIRS,
    Add,
    ArgRef,
    Assign,
    BtSpec,
    Eq,
    Expr,
    Literal,
    Mul,
    NodeAst,
    NodeKind,
    Not,
    SourcePos,
    StatusRef,
    SvDecl,
    SvRef,
)


class ParseError(Exception):
    def __init__(self, message, pos: SourcePos | None = None):
        self.message = message
        self.pos = pos
        where = f" at {pos}" if pos else ""
        super().__init__(f"{message}{where}")


_NODE_KINDS = {kind.value: kind for kind in NodeKind}
_PUNCT = {"(", ")"}


@dataclass(frozen=True)
class Token:
    text: str
    pos: SourcePos


def tokenize(text):
    tokens = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
        elif c in " \t\r":
            col += 1
            i += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in _PUNCT:
            tokens.append(Token(c, SourcePos(line, col)))
            col += 1
            i += 1
        else:
            start = i
            start_pos = SourcePos(line, col)
            while i < n and text[i] not in " \t\r\n;()":
                i += 1
            tokens.append(Token(text[start:i], start_pos))
            col += i - start
    return tokens


def _atom_value(text):
    """Interpret a bare atom as int, float, or identifier string."""
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


class _Reader:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    def peek(self):
        if self.i < len(self.tokens):
            return self.tokens[self.i]
        return None

    def next(self):
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of input", self._last_pos())
        self.i += 1
        return tok

    def expect(self, text):
        tok = self.next()
        if tok.text != text:
            raise ParseError(f"expected '{text}', got '{tok.text}'", tok.pos)
        return tok

    def _last_pos(self):
        if self.tokens:
            return self.tokens[-1].pos
        return SourcePos(1, 1)

    def read_sexp(self):
        """Read one datum as nested lists of Tokens."""
        tok = self.next()
        if tok.text == "(":
            items = []
            while True:
                nxt = self.peek()
                if nxt is None:
                    raise ParseError("unbalanced parenthesis", tok.pos)
                if nxt.text == ")":
                    self.next()
                    return items
                items.append(self.read_sexp())
        if tok.text == ")":
            raise ParseError("unexpected ')'", tok.pos)
        return tok


def _is_keyword(datum):
    return isinstance(datum, Token) and datum.text.startswith(":") and len(datum.text) > 1


def _parse_arg_list(items, pos):
    """:args payload: alternating name/value pairs."""
    if not isinstance(items, list):
        raise ParseError("expected a parenthesized argument list", pos)
    if len(items) % 2 != 0:
        raise ParseError("argument list must have name/value pairs", pos)
    args = []
    for name_tok, value_tok in zip(items[::2], items[1::2]):
        if isinstance(name_tok, list):
            raise ParseError("argument names must be atoms", pos)
        if isinstance(value_tok, list):
            args.append((name_tok.text, parse_expr(value_tok)))
            continue
        value = value_tok.text
        if value.startswith("$"):
            args.append((name_tok.text, ArgRef(value[1:])))
        else:
            args.append((name_tok.text, _atom_value(value)))
    return args


def parse_expr(datum):
    """Parse an Eval expression from an S-expression datum."""
    if isinstance(datum, Token):
        text = datum.text
        if text.startswith("$"):
            return ArgRef(text[1:])
        if text.endswith(".rstatus"):
            return StatusRef(text[: -len(".rstatus")])
        if "." in text:
            value = _atom_value(text)
            if isinstance(value, str):
                raise ParseError(f"unexpected dotted identifier '{text}'", datum.pos)
            return Literal(value)
        return Literal(_atom_value(text))
    if not datum:
        raise ParseError("empty expression")
    head = datum[0]
    if isinstance(head, list):
        raise ParseError("expression operator must be an atom")
    op = head.text
    rest = datum[1:]
    if op == "=":
        if len(rest) != 2:
            raise ParseError("'=' takes two operands", head.pos)
        return Eq(parse_expr(rest[0]), parse_expr(rest[1]))
    if op == "~":
        if len(rest) != 1:
            raise ParseError("'~' takes one operand", head.pos)
        return Not(parse_expr(rest[0]))
    if op == ":=":
        if len(rest) != 2 or isinstance(rest[0], list):
            raise ParseError("':=' takes a variable name and a value", head.pos)
        return Assign(rest[0].text, parse_expr(rest[1]))
    if op == "+":
        if len(rest) != 2:
            raise ParseError("'+' takes two operands", head.pos)
        return Add(parse_expr(rest[0]), parse_expr(rest[1]))
    if op == "*":
        if len(rest) != 2:
            raise ParseError("'*' takes two operands", head.pos)
        return Mul(parse_expr(rest[0]), parse_expr(rest[1]))
    raise ParseError(f"unknown expression operator '{op}'", head.pos)


def _keyword_pairs(items, start, pos):
    """Consume keyword attributes; bare keywords with no value become flags."""
    attrs = {}
    i = start
    while i < len(items) and _is_keyword(items[i]):
        key_tok = items[i]
        key = key_tok.text[1:]
        i += 1
        has_value = i < len(items) and not _is_keyword(items[i])
        if key == "args":
            if not has_value:
                raise ParseError(":args requires a value", key_tok.pos)
            attrs[key] = _parse_arg_list(items[i], key_tok.pos)
            i += 1
        elif key in ("states",):
            if not has_value or not isinstance(items[i], list):
                raise ParseError(f":{key} requires a parenthesized list", key_tok.pos)
            attrs[key] = [tok.text for tok in items[i]]
            i += 1
        elif key == "transitions":
            if i < len(items) and _is_keyword(items[i]) and items[i].text == ":all":
                attrs[key] = ALL_PAIRS
                i += 1
            elif has_value and isinstance(items[i], list):
                pairs = []
                for pair in items[i]:
                    if not isinstance(pair, list) or len(pair) != 2:
                        raise ParseError(
                            ":transitions entries must be (from to) pairs", key_tok.pos
                        )
                    pairs.append((pair[0].text, pair[1].text))
                attrs[key] = pairs
                i += 1
            else:
                raise ParseError(":transitions requires :all or a pair list", key_tok.pos)
        elif has_value and isinstance(items[i], list):
            # tolerated for unknown structured attributes
            attrs[key] = items[i]
            i += 1
        elif has_value:
            attrs[key] = _atom_value(items[i].text)
            i += 1
        else:
            attrs[key] = True  # bare flag, e.g. :SF
    return attrs, i


def _parse_node(datum):
    if isinstance(datum, Token):
        raise ParseError(f"expected a node form, got '{datum.text}'", datum.pos)
    if not datum:
        raise ParseError("empty node form")
    head = datum[0]
    if isinstance(head, list):
        raise ParseError("node kind must be an atom")
    kind = _NODE_KINDS.get(head.text)
    if kind is None:
        raise ParseError(f"unknown node kind '{head.text}'", head.pos)
    attrs, i = _keyword_pairs(datum, 1, head.pos)
    node = NodeAst(kind=kind, attrs=attrs, pos=head.pos)
    rest = datum[i:]
    if kind is NodeKind.EVAL:
        if len(rest) != 1:
            raise ParseError("Eval takes exactly one expression", head.pos)
        node.expr = parse_expr(rest[0])
    else:
        for child_datum in rest:
            node.children.append(_parse_node(child_datum))
    return node


def _parse_defsv(datum):
    head = datum[0]
    if len(datum) < 2 or isinstance(datum[1], list):
        raise ParseError("defsv requires a name", head.pos)
    name = datum[1].text
    attrs, i = _keyword_pairs(datum, 2, head.pos)
    if i != len(datum):
        raise ParseError("malformed defsv form", head.pos)
    decl = SvDecl(name=name, pos=head.pos)
    if "states" in attrs:
        decl.states = attrs["states"]
        decl.transitions = attrs.get("transitions", ALL_PAIRS)
    elif "min" in attrs or "max" in attrs:
        if "min" not in attrs or "max" not in attrs:
            raise ParseError(f"defsv {name} requires both :min and :max", head.pos)
        if not isinstance(attrs["min"], int) or not isinstance(attrs["max"], int):
            raise ParseError(f"defsv {name} bounds must be integers", head.pos)
        decl.min = attrs["min"]
        decl.max = attrs["max"]
    else:
        raise ParseError(f"defsv {name} requires :states or :min/:max", head.pos)
    if "init" not in attrs:
        raise ParseError(f"defsv {name} requires :init", head.pos)
    decl.init = attrs["init"]
    return decl


def parse_btf(text):
    """Parse a .btf document into a BtSpec. Raises ParseError on bad input."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"input is not valid UTF-8: {exc}") from None
    reader = _Reader(tokenize(text))
    doc = reader.read_sexp()
    if reader.peek() is not None:
        raise ParseError("trailing input after document", reader.peek().pos)
    if isinstance(doc, Token):
        raise ParseError("document must be a parenthesized list of forms", doc.pos)
    svs = []
    trees = []
    for form in doc:
        if isinstance(form, Token):
            raise ParseError(f"unexpected atom '{form.text}' at top level", form.pos)
        if not form:
            raise ParseError("empty top-level form")
        head = form[0]
        if isinstance(head, list):
            raise ParseError("top-level form must start with an atom")
        if head.text == "defsv":
            svs.append(_parse_defsv(form))
        elif head.text == "BehaviorTree":
            trees.append(_parse_node(form))
        else:
            raise ParseError(
                f"expected 'defsv' or 'BehaviorTree', got '{head.text}'", head.pos
            )
    if not trees:
        raise ParseError("document contains no BehaviorTree")
    return BtSpec(svs=svs, trees=trees)

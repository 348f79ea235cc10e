"""Recursive-descent parser for the PHP subset.

Two failure modes, kept deliberately distinct:

* :class:`PhpParseError` -- the token stream cannot be made sense of (lexer
  error, broken nesting).  The whole file is skipped and the error recorded.
* :class:`UnsupportedSyntax` -- a recognized-but-unmodeled construct (closure,
  heredoc-free oddities, list destructuring...).  The surrounding statement
  is converted into an OPAQUE_STMT that records the raw text and the variables
  it mentions, and parsing continues.

Double-quoted string interpolation is desugared here, at parse time, into
left-associated concatenation BINARY_OP chains whose leaves keep byte-accurate
spans into the original literal.
"""
from __future__ import annotations

import re
from typing import Optional

from .astnodes import (
    AstNode,
    Kind,
    ROLE_ARGS,
    ROLE_COND,
    ROLE_DIM,
    ROLE_EXPR,
    ROLE_FLAG,
    ROLE_KEY,
    ROLE_LEFT,
    ROLE_NAME,
    ROLE_PARAMS,
    ROLE_RIGHT,
    ROLE_STMTS,
    ROLE_VALUE,
    ROLE_VAR,
    Span,
)
from .lexer import LexError, Token, tokenize


class PhpParseError(Exception):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.message = message
        self.line = line


class UnsupportedSyntax(Exception):
    pass


_CAST_TYPES = {
    "int": "int", "integer": "int",
    "bool": "bool", "boolean": "bool",
    "float": "float", "double": "float", "real": "float",
    "string": "string",
    "array": "array",
    "object": "object",
}

_ASSIGN_OPS = {"=", ".=", "+=", "-=", "*=", "/=", "%="}

_MODIFIERS = {"public", "private", "protected", "static", "abstract", "final", "var", "readonly"}

# operator precedence for the binary levels, low to high
_EQ_OPS = {"==", "!=", "===", "!==", "<>"}
_REL_OPS = {"<", ">", "<=", ">="}
_ADD_OPS = {"+", "-", "."}
_MUL_OPS = {"*", "/", "%"}
_BIT_OPS = {"&", "|", "^"}


def parse_php(text: str, file_id: int) -> AstNode:
    """Parse one file's source text.  Raises PhpParseError on token-level failure."""
    try:
        tokens = tokenize(text)
    except LexError as exc:
        raise PhpParseError(exc.message, exc.line) from exc
    return _Parser(text, tokens, file_id).parse_file()


class _Parser:
    def __init__(self, text: str, tokens: list[Token], file_id: int):
        self.text = text
        self.toks = tokens
        self.pos = 0
        self.file_id = file_id
        self.namespace = ""
        self.aliases: dict[str, str] = {}
        self.pending_doc: Optional[str] = None

    # ---- token helpers -------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        idx = min(self.pos + ahead, len(self.toks) - 1)
        return self.toks[idx]

    def next(self) -> Token:
        tok = self.toks[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at_op(self, *ops: str) -> bool:
        tok = self.peek()
        return tok.kind == "op" and tok.text in ops

    def at_kw(self, *words: str) -> bool:
        tok = self.peek()
        return tok.kind == "name" and tok.lower() in words

    def eat_op(self, op: str) -> Token:
        tok = self.peek()
        if tok.kind != "op" or tok.text != op:
            raise PhpParseError(f"expected {op!r}, found {tok.text!r}", tok.line)
        return self.next()

    def eat_kw(self, word: str) -> Token:
        tok = self.peek()
        if tok.kind != "name" or tok.lower() != word:
            raise PhpParseError(f"expected {word!r}, found {tok.text!r}", tok.line)
        return self.next()

    def span_of(self, tok: Token) -> Span:
        return Span(self.file_id, tok.line, tok.col, tok.start, tok.end)

    def leaf(self, kind: str, tok: Token, value=None) -> AstNode:
        return AstNode(kind, self.span_of(tok), text=tok.text, value=value)

    # ---- names and namespaces ------------------------------------------

    def resolve_name(self, raw: str) -> str:
        """Flatten to a fully qualified name using current namespace + aliases."""
        if raw.startswith("\\"):
            return raw[1:]
        head, sep, rest = raw.partition("\\")
        alias = self.aliases.get(head.lower())
        if alias is not None:
            return alias + (("\\" + rest) if sep else "")
        if self.namespace:
            return self.namespace + "\\" + raw
        return raw

    # ---- file level ----------------------------------------------------

    def parse_file(self) -> AstNode:
        first = self.peek()
        root = AstNode(Kind.STMT_LIST, self.span_of(first))
        while self.peek().kind != "eof":
            stmt = self.statement()
            if stmt is not None:
                root.add(None, stmt)
        return root

    # ---- statements ----------------------------------------------------

    def statement(self) -> Optional[AstNode]:
        tok = self.peek()
        if tok.kind == "doc":
            self.next()
            self.pending_doc = tok.text
            return None
        start = self.pos
        try:
            return self._statement_inner()
        except UnsupportedSyntax:
            return self._opaque_from(start)

    def _statement_inner(self) -> Optional[AstNode]:
        tok = self.peek()
        if tok.kind == "op" and tok.text == ";":
            self.next()
            return None
        if tok.kind == "op" and tok.text == "{":
            return self.block()
        if tok.kind == "name":
            word = tok.lower()
            if word == "namespace":
                return self._namespace_stmt()
            if word == "use":
                return self._use_stmt()
            if word == "if":
                return self._if_stmt()
            if word == "while":
                return self._while_stmt()
            if word == "do":
                return self._do_while_stmt()
            if word == "for":
                return self._for_stmt()
            if word == "foreach":
                return self._foreach_stmt()
            if word == "switch":
                return self._switch_stmt()
            if word == "return":
                return self._expr_keyword_stmt(Kind.RETURN)
            if word == "throw":
                return self._expr_keyword_stmt(Kind.THROW)
            if word == "yield":
                return self._yield_stmt()
            if word == "echo" or word == "print":
                return self._echo_stmt()
            if word == "global":
                return self._global_stmt()
            if word == "break":
                return self._loopctl_stmt(Kind.BREAK)
            if word == "continue":
                return self._loopctl_stmt(Kind.CONTINUE)
            if word == "function" and self.peek(1).kind == "name":
                return self._function_decl()
            if word in ("abstract", "final") and self.peek(1).kind == "name" \
                    and self.peek(1).lower() in ("class", "interface"):
                self.next()
                return self._class_decl(abstract=(word == "abstract"))
            if word == "class" or word == "interface" or word == "trait":
                return self._class_decl(abstract=False, interface=(word != "class"))
            if word in ("include", "include_once", "require", "require_once", "declare"):
                raise UnsupportedSyntax()
            if word in ("try", "static") and self._looks_like_special(word):
                if word == "try":
                    return self._try_stmt()
                return self._static_var_stmt()
            if word in ("unset",):
                # unset($x); -- parse as a call statement, it clears bindings we
                # do not model; treat conservatively as opaque
                raise UnsupportedSyntax()
        stmt = self._expr_statement()
        return stmt

    def _looks_like_special(self, word: str) -> bool:
        nxt = self.peek(1)
        if word == "try":
            return nxt.kind == "op" and nxt.text == "{"
        return nxt.kind == "var"  # "static $x = ..."

    def _opaque_from(self, start: int) -> AstNode:
        """Consume tokens to the end of the current statement, producing an
        OPAQUE_STMT that records raw text and mentioned variables."""
        self.pos = start
        first = self.peek()
        depth = 0
        names: list[str] = []
        last = first
        while True:
            tok = self.peek()
            if tok.kind == "eof":
                break
            if tok.kind == "op" and tok.text == "}" and depth == 0:
                break
            self.next()
            last = tok
            if tok.kind == "var":
                names.append(tok.text[1:])
            if tok.kind == "op":
                if tok.text == "{":
                    depth += 1
                elif tok.text == "}":
                    depth -= 1
                    if depth == 0:
                        break
                elif tok.text == ";" and depth == 0:
                    break
        span = Span(self.file_id, first.line, first.col, first.start, last.end)
        node = AstNode(Kind.OPAQUE_STMT, span, text=self.text[first.start:last.end])
        node.attrs["vars"] = sorted(set(names))
        return node

    def block(self) -> AstNode:
        lbrace = self.eat_op("{")
        node = AstNode(Kind.STMT_LIST, self.span_of(lbrace))
        while not self.at_op("}"):
            if self.peek().kind == "eof":
                raise PhpParseError("unexpected end of file in block", lbrace.line)
            stmt = self.statement()
            if stmt is not None:
                node.add(None, stmt)
        node.span = node.span.covering(self.span_of(self.eat_op("}")))
        return node

    def _body_or_single(self) -> AstNode:
        if self.at_op("{"):
            return self.block()
        if self.at_op(":"):
            raise UnsupportedSyntax()  # alternative syntax (endif/endwhile)
        first = self.peek()
        node = AstNode(Kind.STMT_LIST, self.span_of(first))
        stmt = self.statement()
        if stmt is not None:
            node.add(None, stmt)
        return node

    def _namespace_stmt(self) -> Optional[AstNode]:
        self.eat_kw("namespace")
        tok = self.peek()
        if tok.kind == "name":
            self.next()
            self.namespace = tok.text.lstrip("\\")
        if self.at_op(";"):
            self.next()
        elif self.at_op("{"):
            raise UnsupportedSyntax()
        return None

    def _use_stmt(self) -> Optional[AstNode]:
        self.eat_kw("use")
        if self.at_kw("function", "const"):
            # alias spaces we do not track; consume to semicolon
            while not self.at_op(";") and self.peek().kind != "eof":
                self.next()
            if self.at_op(";"):
                self.next()
            return None
        tok = self.peek()
        if tok.kind != "name":
            raise UnsupportedSyntax()
        self.next()
        target = tok.text.lstrip("\\")
        alias = target.rsplit("\\", 1)[-1]
        if self.at_kw("as"):
            self.next()
            alias_tok = self.peek()
            if alias_tok.kind != "name":
                raise PhpParseError("expected alias name", alias_tok.line)
            self.next()
            alias = alias_tok.text
        self.aliases[alias.lower()] = target
        if self.at_op(";"):
            self.next()
        return None

    def _if_stmt(self) -> AstNode:
        kw = self.eat_kw("if")
        node = AstNode(Kind.IF, self.span_of(kw))
        node.add(None, self._if_elem(kw))
        while True:
            if self.at_kw("elseif"):
                kw2 = self.next()
                node.add(None, self._if_elem(kw2))
            elif self.at_kw("else") and self.peek(1).kind == "name" and self.peek(1).lower() == "if":
                kw2 = self.next()
                self.next()
                node.add(None, self._if_elem(kw2))
            elif self.at_kw("else"):
                kw2 = self.next()
                elem = AstNode(Kind.IF_ELEM, self.span_of(kw2))
                elem.add(ROLE_STMTS, self._body_or_single())
                node.add(None, elem)
                break
            else:
                break
        return node

    def _if_elem(self, kw: Token) -> AstNode:
        self.eat_op("(")
        cond = self.expression()
        self.eat_op(")")
        elem = AstNode(Kind.IF_ELEM, self.span_of(kw))
        elem.add(ROLE_COND, cond)
        elem.add(ROLE_STMTS, self._body_or_single())
        return elem

    def _while_stmt(self) -> AstNode:
        kw = self.eat_kw("while")
        self.eat_op("(")
        cond = self.expression()
        self.eat_op(")")
        node = AstNode(Kind.WHILE, self.span_of(kw))
        node.add(ROLE_COND, cond)
        node.add(ROLE_STMTS, self._body_or_single())
        return node

    def _do_while_stmt(self) -> AstNode:
        # modeled as a WHILE; the one-extra-iteration difference is invisible
        # to a join-based analysis
        kw = self.eat_kw("do")
        body = self._body_or_single()
        self.eat_kw("while")
        self.eat_op("(")
        cond = self.expression()
        self.eat_op(")")
        if self.at_op(";"):
            self.next()
        node = AstNode(Kind.WHILE, self.span_of(kw))
        node.add(ROLE_COND, cond)
        node.add(ROLE_STMTS, body)
        return node

    def _for_stmt(self) -> AstNode:
        kw = self.eat_kw("for")
        self.eat_op("(")
        node = AstNode(Kind.FOR, self.span_of(kw))
        init = self._expr_list_until(";")
        self.eat_op(";")
        cond = None
        if not self.at_op(";"):
            cond = self.expression()
        self.eat_op(";")
        step = self._expr_list_until(")")
        self.eat_op(")")
        for e in init:
            node.add("init", e)
        if cond is not None:
            node.add(ROLE_COND, cond)
        for e in step:
            node.add("step", e)
        node.add(ROLE_STMTS, self._body_or_single())
        return node

    def _expr_list_until(self, stop: str) -> list[AstNode]:
        out: list[AstNode] = []
        if self.at_op(stop):
            return out
        out.append(self.expression())
        while self.at_op(","):
            self.next()
            out.append(self.expression())
        return out

    def _foreach_stmt(self) -> AstNode:
        kw = self.eat_kw("foreach")
        self.eat_op("(")
        subject = self.expression()
        self.eat_kw("as")
        if self.at_op("&"):
            self.next()
        first = self._foreach_target()
        key = None
        value = first
        if self.at_op("=>"):
            self.next()
            if self.at_op("&"):
                self.next()
            key = first
            value = self._foreach_target()
        self.eat_op(")")
        node = AstNode(Kind.FOREACH, self.span_of(kw))
        node.add(ROLE_EXPR, subject)
        if key is not None:
            node.add(ROLE_KEY, key)
        node.add(ROLE_VALUE, value)
        node.add(ROLE_STMTS, self._body_or_single())
        return node

    def _foreach_target(self) -> AstNode:
        tok = self.peek()
        if tok.kind != "var":
            raise UnsupportedSyntax()
        self.next()
        return self.leaf(Kind.VAR, tok, value=tok.text[1:])

    def _switch_stmt(self) -> AstNode:
        kw = self.eat_kw("switch")
        self.eat_op("(")
        subject = self.expression()
        self.eat_op(")")
        self.eat_op("{")
        node = AstNode(Kind.SWITCH, self.span_of(kw))
        node.add(ROLE_COND, subject)
        while not self.at_op("}"):
            if self.at_kw("case"):
                ck = self.next()
                val = self.expression()
                if self.at_op(":") or self.at_op(";"):
                    self.next()
                elem = AstNode(Kind.IF_ELEM, self.span_of(ck))
                elem.add(ROLE_COND, val)
                elem.add(ROLE_STMTS, self._case_body())
                node.add(None, elem)
            elif self.at_kw("default"):
                dk = self.next()
                if self.at_op(":") or self.at_op(";"):
                    self.next()
                elem = AstNode(Kind.IF_ELEM, self.span_of(dk))
                elem.add(ROLE_STMTS, self._case_body())
                node.add(None, elem)
            else:
                raise PhpParseError(f"unexpected token in switch: {self.peek().text!r}",
                                    self.peek().line)
        node.span = node.span.covering(self.span_of(self.eat_op("}")))
        return node

    def _case_body(self) -> AstNode:
        first = self.peek()
        body = AstNode(Kind.STMT_LIST, self.span_of(first))
        while not (self.at_kw("case") or self.at_kw("default") or self.at_op("}")):
            if self.peek().kind == "eof":
                raise PhpParseError("unexpected end of file in switch", first.line)
            stmt = self.statement()
            if stmt is not None:
                body.add(None, stmt)
        return body

    def _expr_keyword_stmt(self, kind: str) -> AstNode:
        kw = self.next()
        node = AstNode(kind, self.span_of(kw))
        if not self.at_op(";"):
            node.add(ROLE_EXPR, self.expression())
        if self.at_op(";"):
            self.next()
        return node

    def _yield_stmt(self) -> AstNode:
        kw = self.next()
        node = AstNode(Kind.YIELD, self.span_of(kw))
        if self.peek().kind == "name" and self.peek().lower() == "from":
            self.next()    # delegation hands the inner values through
        if not self.at_op(";"):
            value = self.expression()
            if self.at_op("=>"):
                self.next()
                node.add("key", value)
                value = self.expression()
            node.add(ROLE_EXPR, value)
        if self.at_op(";"):
            self.next()
        return node

    def _echo_stmt(self) -> AstNode:
        kw = self.next()
        node = AstNode(Kind.ECHO, self.span_of(kw))
        node.add(ROLE_EXPR, self.expression())
        while self.at_op(","):
            self.next()
            node.add(ROLE_EXPR, self.expression())
        if self.at_op(";"):
            self.next()
        return node

    def _global_stmt(self) -> AstNode:
        kw = self.eat_kw("global")
        node = AstNode(Kind.GLOBAL_STMT, self.span_of(kw))
        while True:
            tok = self.peek()
            if tok.kind != "var":
                break
            self.next()
            node.add(ROLE_VAR, self.leaf(Kind.VAR, tok, value=tok.text[1:]))
            if self.at_op(","):
                self.next()
            else:
                break
        if self.at_op(";"):
            self.next()
        return node

    def _loopctl_stmt(self, kind: str) -> AstNode:
        kw = self.next()
        node = AstNode(kind, self.span_of(kw))
        if self.peek().kind == "int":
            raise UnsupportedSyntax()  # multi-level break/continue
        if self.at_op(";"):
            self.next()
        return node

    def _try_stmt(self) -> AstNode:
        # No exception edges are modeled; try/catch/finally bodies are spliced
        # into one statement list (conservative for dataflow joins).
        kw = self.eat_kw("try")
        node = AstNode(Kind.STMT_LIST, self.span_of(kw))
        body = self.block()
        for _, child in body.children:
            node.add(None, child)
        while self.at_kw("catch"):
            self.next()
            self.eat_op("(")
            depth = 1
            while depth and self.peek().kind != "eof":
                tok = self.next()
                if tok.kind == "op" and tok.text == "(":
                    depth += 1
                elif tok.kind == "op" and tok.text == ")":
                    depth -= 1
            cbody = self.block()
            for _, child in cbody.children:
                node.add(None, child)
        if self.at_kw("finally"):
            self.next()
            fbody = self.block()
            for _, child in fbody.children:
                node.add(None, child)
        return node

    def _static_var_stmt(self) -> AstNode:
        kw = self.eat_kw("static")
        node = AstNode(Kind.STMT_LIST, self.span_of(kw))
        while True:
            tok = self.peek()
            if tok.kind != "var":
                break
            self.next()
            var = self.leaf(Kind.VAR, tok, value=tok.text[1:])
            if self.at_op("="):
                eq = self.next()
                rhs = self.expression()
                assign = AstNode(Kind.ASSIGN, self.span_of(eq))
                assign.add(ROLE_VAR, var)
                assign.add(ROLE_EXPR, rhs)
                node.add(None, assign)
            if self.at_op(","):
                self.next()
            else:
                break
        if self.at_op(";"):
            self.next()
        return node

    def _expr_statement(self) -> AstNode:
        expr = self.expression()
        if self.at_op(";"):
            self.next()
        elif self.peek().kind != "eof" and not self.at_op("}"):
            raise PhpParseError(f"expected ';', found {self.peek().text!r}",
                                self.peek().line)
        return expr

    # ---- declarations --------------------------------------------------

    def _take_doc(self) -> Optional[str]:
        doc, self.pending_doc = self.pending_doc, None
        return doc

    def _function_decl(self) -> AstNode:
        doc = self._take_doc()
        kw = self.eat_kw("function")
        if self.at_op("&"):
            self.next()
        name_tok = self.peek()
        if name_tok.kind != "name":
            raise UnsupportedSyntax()  # closures
        self.next()
        node = AstNode(Kind.FUNC_DECL, self.span_of(kw))
        node.add(ROLE_NAME, self.leaf(Kind.NAME, name_tok,
                                      value=self.resolve_name(name_tok.text)))
        node.add(ROLE_PARAMS, self._param_list())
        node.add(ROLE_STMTS, self.block())
        if doc:
            node.attrs["doc"] = doc
        return node

    def _param_list(self) -> AstNode:
        lparen = self.eat_op("(")
        node = AstNode(Kind.PARAM_LIST, self.span_of(lparen))
        while not self.at_op(")"):
            node.add(None, self._param())
            if self.at_op(","):
                self.next()
        node.span = node.span.covering(self.span_of(self.eat_op(")")))
        return node

    def _param(self) -> AstNode:
        type_name = None
        tok = self.peek()
        first = tok
        if tok.kind == "name":
            if tok.lower() == "?":  # never happens; nullable handled below
                pass
            self.next()
            type_name = tok.text
            tok = self.peek()
        elif self.at_op("?"):
            self.next()
            ttok = self.peek()
            if ttok.kind == "name":
                self.next()
                type_name = ttok.text
            tok = self.peek()
        variadic = False
        if self.at_op("..."):
            self.next()
            variadic = True
            tok = self.peek()
        if self.at_op("&"):
            self.next()
            tok = self.peek()
        if tok.kind != "var":
            raise PhpParseError(f"expected parameter variable, found {tok.text!r}", tok.line)
        self.next()
        node = AstNode(Kind.PARAM, self.span_of(first))
        node.add(ROLE_NAME, self.leaf(Kind.VAR, tok, value=tok.text[1:]))
        if type_name:
            node.attrs["type"] = type_name
        node.attrs["variadic"] = variadic
        if self.at_op("="):
            self.next()
            node.attrs["has_default"] = True
            node.add(ROLE_VALUE, self.expression())
        else:
            node.attrs["has_default"] = False
        return node

    def _class_decl(self, abstract: bool, interface: bool = False) -> AstNode:
        doc = self._take_doc()
        kw = self.next()  # class / interface / trait
        name_tok = self.peek()
        if name_tok.kind != "name":
            raise PhpParseError("expected class name", name_tok.line)
        self.next()
        node = AstNode(Kind.CLASS_DECL, self.span_of(kw))
        node.add(ROLE_NAME, self.leaf(Kind.NAME, name_tok,
                                      value=self.resolve_name(name_tok.text)))
        node.attrs["abstract"] = abstract
        node.attrs["interface"] = interface
        if doc:
            node.attrs["doc"] = doc
        interfaces: list[str] = []
        if self.at_kw("extends"):
            self.next()
            parent_tok = self.peek()
            if parent_tok.kind != "name":
                raise PhpParseError("expected parent class name", parent_tok.line)
            self.next()
            if interface:
                interfaces.append(self.resolve_name(parent_tok.text))
                while self.at_op(","):
                    self.next()
                    extra = self.next()
                    interfaces.append(self.resolve_name(extra.text))
            else:
                node.attrs["parent"] = self.resolve_name(parent_tok.text)
        if self.at_kw("implements"):
            self.next()
            while True:
                itok = self.peek()
                if itok.kind != "name":
                    break
                self.next()
                interfaces.append(self.resolve_name(itok.text))
                if self.at_op(","):
                    self.next()
                else:
                    break
        node.attrs["interfaces"] = interfaces
        self.eat_op("{")
        while not self.at_op("}"):
            if self.peek().kind == "eof":
                raise PhpParseError("unexpected end of file in class body", kw.line)
            member = self._class_member(interface)
            if member is not None:
                node.add(None, member)
        node.span = node.span.covering(self.span_of(self.eat_op("}")))
        return node

    def _class_member(self, in_interface: bool) -> Optional[AstNode]:
        tok = self.peek()
        if tok.kind == "doc":
            self.next()
            self.pending_doc = tok.text
            return None
        doc = self.pending_doc
        modifiers: list[str] = []
        while self.peek().kind == "name" and self.peek().lower() in _MODIFIERS:
            # "static" may begin "static function" or a typed property
            modifiers.append(self.next().lower())
        tok = self.peek()
        if tok.kind == "name" and tok.lower() == "function":
            self.pending_doc = None
            return self._method_decl(modifiers, doc, in_interface)
        if tok.kind == "name" and tok.lower() == "const":
            self.next()
            while not self.at_op(";") and self.peek().kind != "eof":
                self.next()
            if self.at_op(";"):
                self.next()
            self.pending_doc = None
            return None
        if tok.kind == "name" and tok.lower() == "use":
            # trait use; not modeled
            self.next()
            while not self.at_op(";") and self.peek().kind != "eof":
                self.next()
            if self.at_op(";"):
                self.next()
            return None
        type_hint = None
        if tok.kind == "name":  # typed property
            self.next()
            type_hint = tok.text
            tok = self.peek()
        if tok.kind == "var":
            self.pending_doc = None
            return self._prop_decl(modifiers, doc, type_hint)
        raise PhpParseError(f"unexpected token in class body: {tok.text!r}", tok.line)

    def _method_decl(self, modifiers: list[str], doc: Optional[str],
                     in_interface: bool) -> AstNode:
        kw = self.eat_kw("function")
        if self.at_op("&"):
            self.next()
        name_tok = self.peek()
        if name_tok.kind != "name":
            raise PhpParseError("expected method name", name_tok.line)
        self.next()
        node = AstNode(Kind.METHOD_DECL, self.span_of(kw))
        node.add(ROLE_NAME, self.leaf(Kind.NAME, name_tok, value=name_tok.text))
        node.add(ROLE_PARAMS, self._param_list())
        if self.at_op(":"):  # return type hint
            self.next()
            if self.at_op("?"):
                self.next()
            rt = self.peek()
            if rt.kind == "name":
                self.next()
                node.attrs["return_type"] = rt.text
        if self.at_op(";"):
            self.next()
            node.attrs["abstract"] = True
        else:
            node.add(ROLE_STMTS, self.block())
            node.attrs["abstract"] = "abstract" in modifiers
        node.attrs["static"] = "static" in modifiers
        node.attrs["visibility"] = next(
            (m for m in modifiers if m in ("public", "private", "protected")), "public")
        if doc:
            node.attrs["doc"] = doc
        return node

    def _prop_decl(self, modifiers: list[str], doc: Optional[str],
                   type_hint: Optional[str]) -> AstNode:
        node = None
        first_tok = self.peek()
        group = AstNode(Kind.STMT_LIST, self.span_of(first_tok))
        count = 0
        while True:
            tok = self.peek()
            if tok.kind != "var":
                break
            self.next()
            node = AstNode(Kind.PROP_DECL, self.span_of(tok))
            node.add(ROLE_NAME, self.leaf(Kind.VAR, tok, value=tok.text[1:]))
            node.attrs["static"] = "static" in modifiers
            node.attrs["visibility"] = next(
                (m for m in modifiers if m in ("public", "private", "protected")), "public")
            if type_hint:
                node.attrs["type"] = type_hint
            if doc:
                node.attrs["doc"] = doc
            if self.at_op("="):
                self.next()
                node.add(ROLE_VALUE, self.expression())
            group.add(None, node)
            count += 1
            if self.at_op(","):
                self.next()
            else:
                break
        if self.at_op(";"):
            self.next()
        if count == 1:
            return group.children[0][1]
        return group

    # ---- expressions ---------------------------------------------------

    def expression(self) -> AstNode:
        return self._word_or()

    def _binary_level(self, sub, ops: set[str], word_ops: tuple[str, ...] = ()) -> AstNode:
        left = sub()
        while True:
            tok = self.peek()
            op = None
            if tok.kind == "op" and tok.text in ops:
                op = tok.text
            elif word_ops and tok.kind == "name" and tok.lower() in word_ops:
                op = {"or": "||", "and": "&&", "xor": "^", "instanceof": "instanceof"}[tok.lower()]
            if op is None:
                return left
            self.next()
            right = sub()
            node = AstNode(Kind.BINARY_OP, left.span)
            node.attrs["op"] = op
            node.add(ROLE_LEFT, left)
            node.add(ROLE_RIGHT, right)
            left = node

    def _word_or(self) -> AstNode:
        return self._binary_level(self._word_and, set(), ("or",))

    def _word_and(self) -> AstNode:
        return self._binary_level(self._assignment, set(), ("and", "xor"))

    def _assignment(self) -> AstNode:
        left = self._ternary()
        tok = self.peek()
        if tok.kind == "op" and tok.text in _ASSIGN_OPS:
            if left.kind not in (Kind.VAR, Kind.DIM, Kind.PROP_FETCH, Kind.STATIC_PROP_FETCH):
                raise UnsupportedSyntax()
            self.next()
            rhs = self._assignment()
            if tok.text != "=":
                bin_node = AstNode(Kind.BINARY_OP, left.span)
                bin_node.attrs["op"] = tok.text[0] if tok.text[0] != "." else "."
                bin_node.add(ROLE_LEFT, left)
                bin_node.add(ROLE_RIGHT, rhs)
                rhs = bin_node
            node = AstNode(Kind.ASSIGN, left.span)
            node.add(ROLE_VAR, left)
            node.add(ROLE_EXPR, rhs)
            return node
        return left

    def _ternary(self) -> AstNode:
        cond = self._coalesce()
        if self.at_op("?"):
            self.next()
            if self.at_op(":"):
                self.next()
                else_e = self._ternary()
                node = AstNode(Kind.TERNARY, cond.span)
                node.add(ROLE_COND, cond)
                node.add(ROLE_LEFT, cond)
                node.add(ROLE_RIGHT, else_e)
                return node
            then_e = self.expression()
            self.eat_op(":")
            else_e = self._ternary()
            node = AstNode(Kind.TERNARY, cond.span)
            node.add(ROLE_COND, cond)
            node.add(ROLE_LEFT, then_e)
            node.add(ROLE_RIGHT, else_e)
            return node
        return cond

    def _coalesce(self) -> AstNode:
        left = self._or_or()
        if self.at_op("??"):
            self.next()
            right = self._coalesce()
            node = AstNode(Kind.BINARY_OP, left.span)
            node.attrs["op"] = "??"
            node.add(ROLE_LEFT, left)
            node.add(ROLE_RIGHT, right)
            return node
        return left

    def _or_or(self) -> AstNode:
        return self._binary_level(self._and_and, {"||"})

    def _and_and(self) -> AstNode:
        return self._binary_level(self._bitop, {"&&"})

    def _bitop(self) -> AstNode:
        return self._binary_level(self._equality, _BIT_OPS)

    def _equality(self) -> AstNode:
        return self._binary_level(self._relational, _EQ_OPS)

    def _relational(self) -> AstNode:
        return self._binary_level(self._additive, _REL_OPS, ("instanceof",))

    def _additive(self) -> AstNode:
        return self._binary_level(self._multiplicative, _ADD_OPS)

    def _multiplicative(self) -> AstNode:
        return self._binary_level(self._unary, _MUL_OPS)

    def _unary(self) -> AstNode:
        tok = self.peek()
        if tok.kind == "op" and tok.text in ("!", "-", "+", "~", "@"):
            self.next()
            operand = self._unary()
            node = AstNode(Kind.UNARY_OP, self.span_of(tok))
            node.attrs["op"] = tok.text
            node.add(ROLE_EXPR, operand)
            return node
        if tok.kind == "op" and tok.text in ("++", "--"):
            self.next()
            target = self._unary()
            return self._incdec(target, tok)
        if tok.kind == "op" and tok.text == "(":
            nxt = self.peek(1)
            after = self.peek(2)
            if nxt.kind == "name" and nxt.lower() in _CAST_TYPES \
                    and after.kind == "op" and after.text == ")":
                self.next()
                type_tok = self.next()
                self.next()
                operand = self._unary()
                node = AstNode(Kind.CAST, self.span_of(tok))
                node.add(ROLE_FLAG, self.leaf(Kind.NAME, type_tok,
                                              value=_CAST_TYPES[type_tok.lower()]))
                node.add(ROLE_EXPR, operand)
                return node
        if tok.kind == "name" and tok.lower() == "new":
            return self._new_expr()
        if tok.kind == "name" and tok.lower() == "clone":
            self.next()
            return self._unary()  # clone preserves taint of the operand
        return self._postfix()

    def _incdec(self, target: AstNode, tok: Token) -> AstNode:
        one = AstNode(Kind.CONST_INT, self.span_of(tok), text=tok.text, value=1)
        bin_node = AstNode(Kind.BINARY_OP, target.span)
        bin_node.attrs["op"] = "+" if tok.text == "++" else "-"
        bin_node.add(ROLE_LEFT, target)
        bin_node.add(ROLE_RIGHT, one)
        node = AstNode(Kind.ASSIGN, target.span)
        node.add(ROLE_VAR, target)
        node.add(ROLE_EXPR, bin_node)
        return node

    def _new_expr(self) -> AstNode:
        kw = self.eat_kw("new")
        tok = self.peek()
        node = AstNode(Kind.NEW, self.span_of(kw))
        if tok.kind == "name":
            if tok.lower() == "class":
                raise UnsupportedSyntax()  # anonymous classes
            self.next()
            cls = self.leaf(Kind.NAME, tok, value=self.resolve_name(tok.text))
        elif tok.kind == "var":
            cls = self._postfix_no_call()
        elif tok.kind == "op" and tok.text == "(":
            self.next()
            cls = self.expression()
            self.eat_op(")")
        else:
            raise UnsupportedSyntax()
        node.add(ROLE_EXPR, cls)
        if self.at_op("("):
            node.add(ROLE_ARGS, self._arg_list())
        else:
            node.add(ROLE_ARGS, AstNode(Kind.ARG_LIST, node.span))
        return node

    def _postfix_no_call(self) -> AstNode:
        """Restricted postfix chain for `new` class expressions: a variable with
        property/static-property fetches.  A trailing paren list belongs to the
        `new` itself, so no call postfix here."""
        tok = self.peek()
        if tok.kind != "var":
            raise UnsupportedSyntax()
        self.next()
        node = self.leaf(Kind.VAR, tok, value=tok.text[1:])
        while True:
            if self.at_op("->") and self.peek(1).kind == "name":
                self.next()
                prop_tok = self.next()
                fetch = AstNode(Kind.PROP_FETCH, node.span)
                fetch.add(ROLE_EXPR, node)
                fetch.add(ROLE_NAME, self.leaf(Kind.NAME, prop_tok, value=prop_tok.text))
                node = fetch
                continue
            if self.at_op("::") and self.peek(1).kind == "var":
                self.next()
                var_tok = self.next()
                fetch = AstNode(Kind.STATIC_PROP_FETCH, node.span)
                fetch.add(ROLE_EXPR, node)
                fetch.add(ROLE_NAME, self.leaf(Kind.VAR, var_tok, value=var_tok.text[1:]))
                node = fetch
                continue
            break
        return node

    def _arg_list(self) -> AstNode:
        lparen = self.eat_op("(")
        node = AstNode(Kind.ARG_LIST, self.span_of(lparen))
        while not self.at_op(")"):
            if self.at_op("&"):
                self.next()
            if self.at_op("..."):
                self.next()  # spread: argument shape lost, keep the expression
            node.add(None, self.expression())
            if self.at_op(","):
                self.next()
        node.span = node.span.covering(self.span_of(self.eat_op(")")))
        return node

    def _postfix(self) -> AstNode:
        node = self._primary()
        while True:
            if self.at_op("("):
                call = AstNode(Kind.CALL, node.span)
                call.add(ROLE_EXPR, node)
                call.add(ROLE_ARGS, self._arg_list())
                node = call
            elif self.at_op("["):
                lb = self.next()
                dim_node = AstNode(Kind.DIM, node.span)
                dim_node.add(ROLE_EXPR, node)
                if not self.at_op("]"):
                    dim_node.add(ROLE_DIM, self.expression())
                rb = self.eat_op("]")
                dim_node.span = dim_node.span.covering(self.span_of(rb))
                node = dim_node
            elif self.at_op("->"):
                self.next()
                node = self._member_after_arrow(node)
            elif self.at_op("::"):
                self.next()
                node = self._member_after_colons(node)
            elif self.at_op("++") or self.at_op("--"):
                tok = self.next()
                node = self._incdec(node, tok)
            else:
                return node

    def _member_after_arrow(self, recv: AstNode) -> AstNode:
        tok = self.peek()
        if tok.kind == "name":
            self.next()
            member: AstNode = self.leaf(Kind.NAME, tok, value=tok.text)
        elif tok.kind == "var":
            self.next()
            member = self.leaf(Kind.VAR, tok, value=tok.text[1:])
        elif tok.kind == "op" and tok.text == "{":
            self.next()
            member = self.expression()
            self.eat_op("}")
        else:
            raise UnsupportedSyntax()
        if self.at_op("("):
            call = AstNode(Kind.METHOD_CALL, recv.span)
            call.add(ROLE_EXPR, recv)
            call.add(ROLE_NAME, member)
            call.add(ROLE_ARGS, self._arg_list())
            return call
        fetch = AstNode(Kind.PROP_FETCH, recv.span)
        fetch.add(ROLE_EXPR, recv)
        fetch.add(ROLE_NAME, member)
        return fetch

    def _member_after_colons(self, recv: AstNode) -> AstNode:
        tok = self.peek()
        if tok.kind == "name":
            self.next()
            if tok.lower() == "class":
                node = AstNode(Kind.CONST_STRING, self.span_of(tok), text=tok.text,
                               value=recv.value if recv.kind == Kind.NAME else "")
                return node
            member: AstNode = self.leaf(Kind.NAME, tok, value=tok.text)
        elif tok.kind == "var":
            self.next()
            member = self.leaf(Kind.VAR, tok, value=tok.text[1:])
        elif tok.kind == "op" and tok.text == "{":
            self.next()
            member = self.expression()
            self.eat_op("}")
        else:
            raise UnsupportedSyntax()
        if self.at_op("("):
            call = AstNode(Kind.STATIC_CALL, recv.span)
            call.add(ROLE_EXPR, recv)
            call.add(ROLE_NAME, member)
            call.add(ROLE_ARGS, self._arg_list())
            return call
        if member.kind == Kind.VAR:
            fetch = AstNode(Kind.STATIC_PROP_FETCH, recv.span)
            fetch.add(ROLE_EXPR, recv)
            fetch.add(ROLE_NAME, member)
            return fetch
        # class constant: an opaque scalar constant
        node = AstNode(Kind.NAME, recv.span.covering(member.span))
        node.value = f"{recv.value or recv.text}::{member.value}"
        node.attrs["class_const"] = True
        return node

    def _primary(self) -> AstNode:
        tok = self.peek()
        if tok.kind == "var":
            self.next()
            return self.leaf(Kind.VAR, tok, value=tok.text[1:])
        if tok.kind == "int":
            self.next()
            base = 16 if tok.text.lower().startswith("0x") else 10
            return self.leaf(Kind.CONST_INT, tok, value=int(tok.text, base))
        if tok.kind == "float":
            self.next()
            return self.leaf(Kind.CONST_INT, tok, value=float(tok.text))
        if tok.kind == "sstring":
            self.next()
            return self.leaf(Kind.CONST_STRING, tok, value=_decode_single(tok.text))
        if tok.kind == "dstring":
            self.next()
            return self._interpolate(tok)
        if tok.kind == "op" and tok.text == "(":
            self.next()
            inner = self.expression()
            self.eat_op(")")
            return inner
        if tok.kind == "op" and tok.text == "[":
            return self._array_literal_short()
        if tok.kind == "name":
            word = tok.lower()
            if word == "true" or word == "false":
                self.next()
                return self.leaf(Kind.CONST_BOOL, tok, value=(word == "true"))
            if word == "null":
                self.next()
                return self.leaf(Kind.CONST_NULL, tok, value=None)
            if word == "array" and self.peek(1).kind == "op" and self.peek(1).text == "(":
                return self._array_literal_long()
            if word == "function" or word == "fn":
                raise UnsupportedSyntax()  # closures / arrow functions
            if word == "list":
                raise UnsupportedSyntax()
            self.next()
            if word in ("self", "static", "parent", "exit", "die", "isset", "empty",
                        "unset", "print", "echo"):
                return self.leaf(Kind.NAME, tok, value=word)
            return self.leaf(Kind.NAME, tok, value=self.resolve_name(tok.text))
        raise UnsupportedSyntax()

    def _array_literal_short(self) -> AstNode:
        lb = self.eat_op("[")
        node = AstNode(Kind.ARRAY, self.span_of(lb))
        self._array_elems(node, "]")
        node.span = node.span.covering(self.span_of(self.eat_op("]")))
        return node

    def _array_literal_long(self) -> AstNode:
        kw = self.next()  # 'array'
        self.eat_op("(")
        node = AstNode(Kind.ARRAY, self.span_of(kw))
        self._array_elems(node, ")")
        node.span = node.span.covering(self.span_of(self.eat_op(")")))
        return node

    def _array_elems(self, node: AstNode, stop: str) -> None:
        while not self.at_op(stop):
            first = self.expression()
            elem = AstNode(Kind.ARRAY_ELEM, first.span)
            if self.at_op("=>"):
                self.next()
                elem.add(ROLE_KEY, first)
                elem.add(ROLE_VALUE, self.expression())
            else:
                elem.add(ROLE_VALUE, first)
            node.add(None, elem)
            if self.at_op(","):
                self.next()
            else:
                break

    # ---- interpolation -------------------------------------------------

    def _interpolate(self, tok: Token) -> AstNode:
        """Desugar a double-quoted literal into a concatenation chain."""
        parts = _split_interpolation(tok, self.file_id)
        parts = [p for p in parts
                 if not (p.kind == Kind.CONST_STRING and p.value == "")]
        if not parts:
            return AstNode(Kind.CONST_STRING, self.span_of(tok), text=tok.text, value="")
        node = parts[0]
        for part in parts[1:]:
            chain = AstNode(Kind.BINARY_OP, node.span)
            chain.attrs["op"] = "."
            chain.add(ROLE_LEFT, node)
            chain.add(ROLE_RIGHT, part)
            node = chain
        return node


_DQ_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "v": "\v", "f": "\f",
               "\\": "\\", "$": "$", '"': '"', "0": "\0", "e": "\x1b"}


def _decode_single(raw: str) -> str:
    body = raw[1:-1]
    out = []
    i = 0
    while i < len(body):
        if body[i] == "\\" and i + 1 < len(body) and body[i + 1] in ("\\", "'"):
            out.append(body[i + 1])
            i += 2
        else:
            out.append(body[i])
            i += 1
    return "".join(out)


def _decode_double_segment(seg: str) -> str:
    out = []
    i = 0
    while i < len(seg):
        ch = seg[i]
        if ch == "\\" and i + 1 < len(seg):
            nxt = seg[i + 1]
            if nxt in _DQ_ESCAPES:
                out.append(_DQ_ESCAPES[nxt])
                i += 2
                continue
            if nxt == "x" and i + 3 < len(seg) + 1:
                hex_part = seg[i + 2:i + 4]
                m = re.match(r"[0-9a-fA-F]{1,2}", hex_part)
                if m:
                    out.append(chr(int(m.group(0), 16)))
                    i += 2 + len(m.group(0))
                    continue
            out.append(ch)
            i += 1
            continue
        out.append(ch)
        i += 1
    return "".join(out)


_SIMPLE_VAR = re.compile(r"\$([A-Za-z_][A-Za-z0-9_]*)")


def _split_interpolation(tok: Token, file_id: int) -> list[AstNode]:
    """Break the raw double-quoted token into CONST_STRING / variable parts.

    Supports `$name`, `$name[key]`, `$name->prop` and `{$expr}` where expr is a
    variable with optional dim/property accesses.  Spans of the produced leaves
    index into the original literal so round-tripping works.
    """
    raw = tok.text
    body = raw[1:-1]
    base = tok.start + 1
    parts: list[AstNode] = []
    lit_start = 0
    i = 0

    def flush(upto: int) -> None:
        if upto > lit_start:
            seg = body[lit_start:upto]
            span = Span(file_id, tok.line, tok.col + 1 + lit_start,
                        base + lit_start, base + upto)
            parts.append(AstNode(Kind.CONST_STRING, span, text=seg,
                                 value=_decode_double_segment(seg)))

    def subspan(s: int, e: int) -> Span:
        return Span(file_id, tok.line, tok.col + 1 + s, base + s, base + e)

    while i < len(body):
        ch = body[i]
        if ch == "\\":
            i += 2
            continue
        if ch == "$" and i + 1 < len(body):
            m = _SIMPLE_VAR.match(body, i)
            if m:
                flush(i)
                name = m.group(1)
                end = m.end()
                var = AstNode(Kind.VAR, subspan(i, end), text=body[i:end], value=name)
                node: AstNode = var
                # simple dim:  $a[key]  (bare word, int, or quoted key)
                if end < len(body) and body[end] == "[":
                    close = body.find("]", end)
                    if close > 0:
                        key_raw = body[end + 1:close]
                        key_node = _simple_key_node(key_raw, subspan(end + 1, close))
                        if key_node is not None:
                            dim = AstNode(Kind.DIM, var.span)
                            dim.add(ROLE_EXPR, var)
                            dim.add(ROLE_DIM, key_node)
                            node = dim
                            end = close + 1
                elif body.startswith("->", end):
                    m2 = re.match(r"[A-Za-z_][A-Za-z0-9_]*", body[end + 2:])
                    if m2:
                        prop = AstNode(Kind.NAME, subspan(end + 2, end + 2 + m2.end()),
                                       text=m2.group(0), value=m2.group(0))
                        fetch = AstNode(Kind.PROP_FETCH, var.span)
                        fetch.add(ROLE_EXPR, var)
                        fetch.add(ROLE_NAME, prop)
                        node = fetch
                        end = end + 2 + m2.end()
                parts.append(node)
                i = end
                lit_start = i
                continue
        if ch == "{" and i + 1 < len(body) and body[i + 1] == "$":
            depth = 1
            j = i + 1
            while j < len(body) and depth:
                if body[j] == "{":
                    depth += 1
                elif body[j] == "}":
                    depth -= 1
                    if depth == 0:
                        break
                j += 1
            if depth == 0:
                flush(i)
                inner = body[i + 1:j]
                node = _parse_brace_expr(inner, subspan(i + 1, j), file_id)
                parts.append(node)
                i = j + 1
                lit_start = i
                continue
        i += 1
    flush(len(body))
    return parts


def _simple_key_node(key_raw: str, span: Span) -> Optional[AstNode]:
    if re.fullmatch(r"[0-9]+", key_raw):
        return AstNode(Kind.CONST_INT, span, text=key_raw, value=int(key_raw))
    if re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", key_raw):
        # inside interpolation a bare word key is a string key
        return AstNode(Kind.CONST_STRING, span, text=key_raw, value=key_raw)
    m = re.fullmatch(r"'([^']*)'", key_raw)
    if m:
        return AstNode(Kind.CONST_STRING, span, text=key_raw, value=m.group(1))
    if key_raw.startswith("$"):
        return AstNode(Kind.VAR, span, text=key_raw, value=key_raw[1:])
    return None


def _parse_brace_expr(src: str, span: Span, file_id: int) -> AstNode:
    """Parse the expression inside a `{$...}` interpolation block, then shift
    all spans so they index into the enclosing file."""
    try:
        tokens = tokenize("<?php " + src)
        sub = _Parser("<?php " + src, tokens, file_id)
        expr = sub.expression()
    except (LexError, PhpParseError, UnsupportedSyntax):
        return AstNode(Kind.VAR, span, text=src, value=src.lstrip("$"))
    delta = span.start - 6  # len("<?php ")
    _shift_spans(expr, delta, span.line, span.col - 6)
    return expr


def _shift_spans(node: AstNode, byte_delta: int, line: int, col_delta: int) -> None:
    node.span = Span(node.span.file_id, line, node.span.col + col_delta,
                     node.span.start + byte_delta, node.span.end + byte_delta)
    for _, child in node.children:
        _shift_spans(child, byte_delta, line, col_delta)

"""Recursive-descent parser producing MiniLang ASTs."""

from __future__ import annotations

from ..grammar import Ast, Draft, freeze, leaf
from . import lang
from .lexer import ParseError, Token, tokenize

_G = lang.GRAMMAR

# binary operators by ascending precedence tier; all left-associative
PRECEDENCE_TIERS = [["||"], ["&&"], ["==", "!="], ["<", "<=", ">", ">="], ["+", "-"], ["*", "/", "%"]]


def _sym(name: str):
    return _G.symbol(name)


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.pos = 0

    @property
    def cur(self) -> Token:
        return self.toks[self.pos]

    def error(self, message: str):
        raise ParseError(message, self.cur.line, self.cur.col)

    def at(self, kind: str, text: str | None = None) -> bool:
        t = self.cur
        return t.kind == kind and (text is None or t.text == text)

    def eat(self, kind: str, text: str | None = None) -> Token:
        if not self.at(kind, text):
            want = text if text is not None else kind
            self.error(f"expected {want!r}, found {self.cur.text or 'end of input'!r}")
        t = self.cur
        self.pos += 1
        return t

    # --- grammar rules -----------------------------------------------------

    def program(self) -> Draft:
        funcs = []
        while not self.at("eof"):
            funcs.append(self.func())
        if not funcs:
            self.error("empty program")
        node = Draft(_sym("Program"), None, [funcs[-1]])
        for f in reversed(funcs[:-1]):
            node = Draft(_sym("Program"), None, [f, node])
        return node

    def func(self) -> Draft:
        self.eat("kw", "fn")
        name = self.identifier()
        self.eat("op", "(")
        params = self.params()
        self.eat("op", ")")
        if self.at("op", "->"):
            self.eat("op", "->")
            ret = self.type_leaf()
        else:
            ret = leaf(_sym("int"), "int")
        body = self.block()
        return Draft(_sym("Func"), None, [name, params, ret, body])

    def params(self) -> Draft:
        empty = Draft(_sym("Params"))
        if self.at("op", ")"):
            return empty
        entries = []
        while True:
            name = self.identifier()
            self.eat("op", ":")
            entries.append((name, self.type_leaf()))
            if not self.at("op", ","):
                break
            self.eat("op", ",")
        node = empty
        for name, ty in reversed(entries):
            node = Draft(_sym("Params"), None, [name, ty, node])
        return node

    def type_leaf(self) -> Draft:
        if self.at("kw", "int"):
            self.eat("kw")
            return leaf(_sym("int"), "int")
        if self.at("kw", "bool"):
            self.eat("kw")
            return leaf(_sym("bool"), "bool")
        self.error("expected a type (int or bool)")

    def block(self) -> Draft:
        self.eat("op", "{")
        stmts = []
        while not self.at("op", "}"):
            stmts.append(self.stmt())
        self.eat("op", "}")
        node = Draft(_sym("Stmts"))
        for s in reversed(stmts):
            node = Draft(_sym("Stmts"), None, [s, node])
        return Draft(_sym("Block"), None, [node])

    def stmt(self) -> Draft:
        if self.at("kw", "var"):
            inner = self.var_decl()
        elif self.at("kw", "if"):
            inner = self.if_stmt()
        elif self.at("kw", "while"):
            inner = self.while_stmt()
        elif self.at("kw", "return"):
            inner = self.return_stmt()
        elif self.at("ident") and self.toks[self.pos + 1].kind == "op" and self.toks[self.pos + 1].text == "=":
            name = self.identifier()
            self.eat("op", "=")
            value = self.expr()
            self.eat("op", ";")
            inner = Draft(_sym("Assign"), None, [name, value])
        else:
            value = self.expr()
            self.eat("op", ";")
            inner = Draft(_sym("ExprStmt"), None, [value])
        return Draft(_sym("Stmt"), None, [inner])

    def var_decl(self) -> Draft:
        self.eat("kw", "var")
        name = self.identifier()
        self.eat("op", ":")
        ty = self.type_leaf()
        self.eat("op", "=")
        value = self.expr()
        self.eat("op", ";")
        return Draft(_sym("VarDecl"), None, [name, ty, value])

    def if_stmt(self) -> Draft:
        self.eat("kw", "if")
        self.eat("op", "(")
        cond = self.expr()
        self.eat("op", ")")
        then = self.block()
        if self.at("kw", "else"):
            self.eat("kw", "else")
            return Draft(_sym("If"), None, [cond, then, self.block()])
        return Draft(_sym("If"), None, [cond, then])

    def while_stmt(self) -> Draft:
        self.eat("kw", "while")
        self.eat("op", "(")
        cond = self.expr()
        self.eat("op", ")")
        return Draft(_sym("While"), None, [cond, self.block()])

    def return_stmt(self) -> Draft:
        self.eat("kw", "return")
        value = self.expr()
        self.eat("op", ";")
        return Draft(_sym("Return"), None, [value])

    def expr(self, tier: int = 0) -> Draft:
        if tier >= len(PRECEDENCE_TIERS):
            return self.unary()
        node = self.expr(tier + 1)
        while self.at("op") and self.cur.text in PRECEDENCE_TIERS[tier]:
            op = self.eat("op").text
            rhs = self.expr(tier + 1)
            node = Draft(_sym("Expr"), None, [node, leaf(_sym(op), op), rhs])
        return node

    def unary(self) -> Draft:
        if self.at("op", "!"):
            self.eat("op")
            return Draft(_sym("Expr"), None, [leaf(_sym("!"), "!"), self.unary()])
        return self.atom()

    def atom(self) -> Draft:
        if self.at("num"):
            t = self.eat("num")
            return Draft(_sym("Expr"), None, [leaf(_sym("Num"), t.text)])
        if self.at("kw", "true"):
            self.eat("kw")
            return Draft(_sym("Expr"), None, [leaf(_sym("true"), "true")])
        if self.at("kw", "false"):
            self.eat("kw")
            return Draft(_sym("Expr"), None, [leaf(_sym("false"), "false")])
        if self.at("op", "("):
            self.eat("op")
            inner = self.expr()
            self.eat("op", ")")
            return inner
        if self.at("ident"):
            name = self.identifier()
            if self.at("op", "("):
                self.eat("op")
                args = self.args()
                self.eat("op", ")")
                call = Draft(_sym("Call"), None, [name, args])
                return Draft(_sym("Expr"), None, [call])
            return Draft(_sym("Expr"), None, [name])
        self.error(f"expected an expression, found {self.cur.text or 'end of input'!r}")

    def args(self) -> Draft:
        empty = Draft(_sym("Args"))
        if self.at("op", ")"):
            return empty
        items = [self.expr()]
        while self.at("op", ","):
            self.eat("op")
            items.append(self.expr())
        node = empty
        for e in reversed(items):
            node = Draft(_sym("Args"), None, [e, node])
        return node

    def identifier(self) -> Draft:
        t = self.eat("ident")
        return Draft(_sym("HLIdentifier"), None, [leaf(_sym("Ident"), t.text)])


def parse(source: str) -> Ast:
    """Parse MiniLang source into an Ast conforming to lang.GRAMMAR."""
    p = _Parser(tokenize(source))
    tree = p.program()
    p.eat("eof")
    return freeze(tree)

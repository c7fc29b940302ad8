"""Random well-typed MiniLang programs, used to build synthetic corpora.

Generated programs always terminate: while loops follow a bounded-counter
template, calls only reach earlier-defined functions (no recursion), and every
function body ends in a return.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from ..grammar import Ast, Draft, freeze, leaf
from . import lang
from .types import BOOL, INT

_G = lang.GRAMMAR

FUNC_NAMES = ["f", "g", "h", "calc", "step", "mix", "scale", "check", "pick", "gap"]
VAR_NAMES = ["x", "y", "z", "t", "u", "w", "s", "acc", "tmp", "d"]
PARAM_NAMES = ["a", "b", "c", "n", "k"]
RARE_STEMS = ["delta", "omega", "gamma", "probe", "shift", "crux", "pivot", "ridge"]

LITERAL_POOL = list(range(10))


def _sym(name: str):
    return _G.symbol(name)


def _ident(name: str) -> Draft:
    return Draft(_sym("HLIdentifier"), None, [leaf(_sym("Ident"), name)])


def _num(value: int) -> Draft:
    return Draft(_sym("Expr"), None, [leaf(_sym("Num"), str(value))])


def _var(name: str) -> Draft:
    return Draft(_sym("Expr"), None, [_ident(name)])


def _binary(left: Draft, op: str, right: Draft) -> Draft:
    return Draft(_sym("Expr"), None, [left, leaf(_sym(op), op), right])


@dataclass
class _FuncSig:
    name: str
    params: tuple[str, ...]
    ret: str


@dataclass
class _GenScope:
    vars: dict[str, str] = field(default_factory=dict)  # name -> type
    frozen: set[str] = field(default_factory=set)  # loop counters: read-only

    def of_type(self, ty: str) -> list[str]:
        return sorted(n for n, t in self.vars.items() if t == ty)

    def assignable(self, ty: str) -> list[str]:
        return sorted(n for n, t in self.vars.items() if t == ty and n not in self.frozen)


class ProgramGenerator:
    """Seeded generator; one instance per corpus for reproducibility."""

    def __init__(self, rng: random.Random, rare_name_prob: float = 0.12):
        self.rng = rng
        self.rare_name_prob = rare_name_prob

    def fresh_name(self, pool: list[str], used: set[str]) -> str:
        rng = self.rng
        if rng.random() < self.rare_name_prob:
            name = f"{rng.choice(RARE_STEMS)}{rng.randrange(100)}"
            if name not in used:
                return name
        avail = [n for n in pool if n not in used]
        if avail:
            return rng.choice(avail)
        base = rng.choice(pool)
        i = 2
        while f"{base}{i}" in used:
            i += 1
        return f"{base}{i}"

    def literal(self) -> int:
        return self.rng.choice(LITERAL_POOL)

    def expr(self, ty: str, scope: _GenScope, funcs: list[_FuncSig], depth: int) -> Draft:
        rng = self.rng
        if depth <= 0 or rng.random() < 0.35:
            return self.atom(ty, scope, funcs, depth)
        if ty == INT:
            op = rng.choice(["+", "+", "-", "*"])
            return _binary(
                self.expr(INT, scope, funcs, depth - 1),
                op,
                self.expr(INT, scope, funcs, depth - 1),
            )
        kind = rng.random()
        if kind < 0.6:
            op = rng.choice(["<", "<=", ">", ">=", "==", "!="])
            return _binary(
                self.expr(INT, scope, funcs, depth - 1),
                op,
                self.expr(INT, scope, funcs, depth - 1),
            )
        if kind < 0.85:
            op = rng.choice(["&&", "||"])
            return _binary(
                self.expr(BOOL, scope, funcs, depth - 1),
                op,
                self.expr(BOOL, scope, funcs, depth - 1),
            )
        return Draft(_sym("Expr"), None, [leaf(_sym("!"), "!"), self.expr(BOOL, scope, funcs, depth - 1)])

    def atom(self, ty: str, scope: _GenScope, funcs: list[_FuncSig], depth: int) -> Draft:
        rng = self.rng
        names = scope.of_type(ty)
        callables = [f for f in funcs if f.ret == ty]
        roll = rng.random()
        if names and roll < 0.55:
            return _var(rng.choice(names))
        if callables and roll < 0.7 and depth > 0:
            return self.call(rng.choice(callables), scope, funcs, depth - 1)
        if ty == INT:
            return _num(self.literal())
        if names:
            return _var(rng.choice(names))
        # no bool material in scope: compare two ints
        return _binary(self.atom(INT, scope, funcs, 0), rng.choice(["<", "=="]), _num(self.literal()))

    def call(self, sig: _FuncSig, scope: _GenScope, funcs: list[_FuncSig], depth: int) -> Draft:
        args = Draft(_sym("Args"))
        for pty in reversed(sig.params):
            args = Draft(_sym("Args"), None, [self.atom(pty, scope, funcs, depth), args])
        call = Draft(_sym("Call"), None, [_ident(sig.name), args])
        return Draft(_sym("Expr"), None, [call])

    def stmts(self, n: int, scope: _GenScope, funcs: list[_FuncSig], used: set[str], depth: int) -> list[Draft]:
        rng = self.rng
        out = []
        for _ in range(n):
            roll = rng.random()
            if roll < 0.40:
                out.append(self.var_decl(scope, funcs, used, depth))
            elif roll < 0.70 and (scope.assignable(INT) or scope.assignable(BOOL)):
                out.append(self.assign(scope, funcs, depth))
            elif roll < 0.85 and depth > 0:
                out.append(self.if_stmt(scope, funcs, used, depth))
            elif roll < 0.95 and depth > 0:
                out.append(self.while_stmt(scope, funcs, used, depth))
            else:
                out.append(self.var_decl(scope, funcs, used, depth))
        return out

    def var_decl(self, scope: _GenScope, funcs: list[_FuncSig], used: set[str], depth: int) -> Draft:
        rng = self.rng
        ty = INT if rng.random() < 0.8 else BOOL
        name = self.fresh_name(VAR_NAMES, used)
        used.add(name)
        decl = Draft(
            _sym("VarDecl"),
            None,
            [_ident(name), leaf(_sym(ty), ty), self.expr(ty, scope, funcs, depth)],
        )
        scope.vars[name] = ty
        return Draft(_sym("Stmt"), None, [decl])

    def assign(self, scope: _GenScope, funcs: list[_FuncSig], depth: int) -> Draft:
        rng = self.rng
        choices = [(n, INT) for n in scope.assignable(INT)] + [(n, BOOL) for n in scope.assignable(BOOL)]
        name, ty = choices[rng.randrange(len(choices))]
        node = Draft(_sym("Assign"), None, [_ident(name), self.expr(ty, scope, funcs, depth)])
        return Draft(_sym("Stmt"), None, [node])

    def if_stmt(self, scope: _GenScope, funcs: list[_FuncSig], used: set[str], depth: int) -> Draft:
        cond = self.expr(BOOL, scope, funcs, depth - 1)
        then = self.block(self.rng.randrange(1, 3), scope, funcs, used, depth - 1)
        kids = [cond, then]
        if self.rng.random() < 0.5:
            kids.append(self.block(self.rng.randrange(1, 3), scope, funcs, used, depth - 1))
        return Draft(_sym("Stmt"), None, [Draft(_sym("If"), None, kids)])

    def while_stmt(self, scope: _GenScope, funcs: list[_FuncSig], used: set[str], depth: int) -> Draft:
        # bounded counter template: var i = 0; while (i < B) { ...; i = i + 1; }
        counter = self.fresh_name(["i", "j", "m"], used)
        used.add(counter)
        bound = self.rng.randrange(1, 5)
        scope.vars[counter] = INT
        inner = _GenScope(dict(scope.vars), set(scope.frozen) | {counter})
        body_stmts = _splice(self.stmts(self.rng.randrange(1, 3), inner, funcs, used, depth - 1))
        bump = Draft(
            _sym("Assign"), None, [_ident(counter), _binary(_var(counter), "+", _num(1))]
        )
        body_stmts.append(Draft(_sym("Stmt"), None, [bump]))
        spine = Draft(_sym("Stmts"))
        for s in reversed(body_stmts):
            spine = Draft(_sym("Stmts"), None, [s, spine])
        loop = Draft(
            _sym("While"),
            None,
            [_binary(_var(counter), "<", _num(bound)), Draft(_sym("Block"), None, [spine])],
        )
        decl = Draft(
            _sym("VarDecl"), None, [_ident(counter), leaf(_sym(INT), INT), _num(0)]
        )
        # pack declaration + loop as an if-true pair would distort shape; emit
        # the declaration as its own statement by returning a two-stmt bundle
        return [
            Draft(_sym("Stmt"), None, [decl]),
            Draft(_sym("Stmt"), None, [loop]),
        ]

    def block(self, n: int, outer: _GenScope, funcs: list[_FuncSig], used: set[str], depth: int) -> Draft:
        scope = _GenScope(dict(outer.vars), set(outer.frozen))
        stmts = self.stmts(n, scope, funcs, used, depth)
        spine = Draft(_sym("Stmts"))
        for s in reversed(_splice(stmts)):
            spine = Draft(_sym("Stmts"), None, [s, spine])
        return Draft(_sym("Block"), None, [spine])

    def func(self, name: str, params: list[tuple[str, str]], ret: str, funcs: list[_FuncSig], n_stmts: int, taken: set[str] | None = None) -> Draft:
        # locals must not shadow function names or later calls stop resolving
        used = set(taken or ()) | {f.name for f in funcs} | {name} | {p for p, _ in params}
        scope = _GenScope({p: t for p, t in params})
        body = self.stmts(n_stmts, scope, funcs, used, depth=2)
        ret_stmt = Draft(_sym("Return"), None, [self.expr(ret, scope, funcs, 2)])
        body.append(Draft(_sym("Stmt"), None, [ret_stmt]))
        spine = Draft(_sym("Stmts"))
        for s in reversed(_splice(body)):
            spine = Draft(_sym("Stmts"), None, [s, spine])
        params_node = Draft(_sym("Params"))
        for p, t in reversed(params):
            params_node = Draft(_sym("Params"), None, [_ident(p), leaf(_sym(t), t), params_node])
        return Draft(
            _sym("Func"),
            None,
            [_ident(name), params_node, leaf(_sym(ret), ret), Draft(_sym("Block"), None, [spine])],
        )

    def program(self, n_funcs: int | None = None, stmts_per_func: tuple[int, int] = (2, 5)) -> Ast:
        rng = self.rng
        n_funcs = n_funcs if n_funcs is not None else rng.randrange(1, 3)
        sigs: list[_FuncSig] = []
        drafts = []
        used_names: set[str] = {"main"}
        for k in range(n_funcs):
            name = self.fresh_name(FUNC_NAMES, used_names)
            used_names.add(name)
            n_params = rng.randrange(1, 3)
            params = [(PARAM_NAMES[i], INT) for i in range(n_params)]
            ret = INT if rng.random() < 0.85 else BOOL
            drafts.append(self.func(name, params, ret, list(sigs), rng.randrange(*stmts_per_func), used_names))
            sigs.append(_FuncSig(name, tuple(t for _, t in params), ret))
        main_params = [("a", INT), ("b", INT)]
        drafts.append(self.func("main", main_params, INT, list(sigs), rng.randrange(*stmts_per_func), used_names))
        node = Draft(_sym("Program"), None, [drafts[-1]])
        for f in reversed(drafts[:-1]):
            node = Draft(_sym("Program"), None, [f, node])
        return freeze(node)


def _splice(stmts: list) -> list[Draft]:
    out = []
    for s in stmts:
        if isinstance(s, list):
            out.extend(s)
        else:
            out.append(s)
    return out


def random_program(seed: int, **kwargs) -> Ast:
    return ProgramGenerator(random.Random(seed)).program(**kwargs)

"""Type checker and lexical-scope queries for MiniLang.

Scoping is lexical with shadowing: every function name is visible everywhere,
parameters and ``var`` declarations are visible from the statement after their
declaration to the end of their block. All diagnostics are collected; the
checker never raises on bad programs.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..grammar import Ast
from . import lang

INT = "int"
BOOL = "bool"


@dataclass(frozen=True)
class FuncType:
    params: tuple[str, ...]
    ret: str

    def __str__(self):
        return f"({', '.join(self.params)}) -> {self.ret}"


@dataclass(frozen=True)
class Diagnostic:
    node_id: int
    message: str

    def __str__(self):
        return f"node {self.node_id}: {self.message}"


@dataclass(frozen=True)
class Binding:
    name: str
    type: object  # INT | BOOL | FuncType
    kind: str  # 'func' | 'param' | 'var'
    decl_id: int  # HLIdentifier node of the declaration


def _param_list(tree: Ast, params_id: int) -> list[tuple[int, str, str]]:
    out = []
    node = params_id
    while tree.children(node):
        hl, ty, node = tree.children(node)
        out.append((hl, lang.identifier_name(tree, hl), tree.node(ty).token))
    return out


def _functions(tree: Ast) -> list[int]:
    funcs = []
    node = tree.root
    while True:
        kids = tree.children(node)
        funcs.append(kids[0])
        if len(kids) == 1:
            return funcs
        node = kids[1]


class _Scope:
    def __init__(self, parent: _Scope | None = None):
        self.parent = parent
        self.bindings: dict[str, Binding] = {}

    def declare(self, b: Binding) -> bool:
        if b.name in self.bindings:
            return False
        self.bindings[b.name] = b
        return True

    def lookup(self, name: str) -> Binding | None:
        s = self
        while s is not None:
            if name in s.bindings:
                return s.bindings[name]
            s = s.parent
        return None


class _Checker:
    def __init__(self, tree: Ast):
        self.tree = tree
        self.diags: list[Diagnostic] = []
        self.globals = _Scope()

    def report(self, node_id: int, message: str):
        self.diags.append(Diagnostic(node_id, message))

    def ident(self, hl_id: int) -> str | None:
        name = lang.identifier_name(self.tree, hl_id)
        if name is None:
            self.report(hl_id, "uninstantiated placeholder")
        return name

    def run(self) -> list[Diagnostic]:
        tree = self.tree
        funcs = _functions(tree)
        sigs: dict[int, FuncType] = {}
        for f in funcs:
            name_id, params_id, ret_id, _ = tree.children(f)
            name = self.ident(name_id)
            ptypes = []
            seen = set()
            for hl, pname, ty in _param_list(tree, params_id):
                ptypes.append(ty)
                if pname is None:
                    self.report(hl, "uninstantiated placeholder")
                elif pname in seen:
                    self.report(hl, f"duplicate parameter {pname!r}")
                seen.add(pname)
            sig = FuncType(tuple(ptypes), tree.node(ret_id).token)
            sigs[f] = sig
            if name is not None:
                if not self.globals.declare(Binding(name, sig, "func", name_id)):
                    self.report(name_id, f"function {name!r} already defined")
        for f in funcs:
            self.check_func(f, sigs[f])
        return self.diags

    def check_func(self, func_id: int, sig: FuncType):
        tree = self.tree
        _, params_id, _, block_id = tree.children(func_id)
        scope = _Scope(self.globals)
        for hl, pname, ty in _param_list(tree, params_id):
            if pname is not None:
                scope.declare(Binding(pname, ty, "param", hl))
        self.check_block(block_id, scope, sig.ret)

    def check_block(self, block_id: int, outer: _Scope, ret_type: str):
        scope = _Scope(outer)
        for stmt in lang.flatten_stmts(self.tree, self.tree.children(block_id)[0]):
            self.check_stmt(stmt, scope, ret_type)

    def check_stmt(self, stmt_id: int, scope: _Scope, ret_type: str):
        tree = self.tree
        inner = tree.node(tree.children(stmt_id)[0])
        kids = inner.children
        kind = inner.symbol.name
        if kind == "VarDecl":
            declared = tree.node(kids[1]).token
            got = self.check_expr(kids[2], scope)
            if got is not None and got != declared:
                self.report(kids[2], f"initializer has type {got}, expected {declared}")
            name = self.ident(kids[0])
            if name is not None:
                if not scope.declare(Binding(name, declared, "var", kids[0])):
                    self.report(kids[0], f"{name!r} already declared in this scope")
        elif kind == "Assign":
            name = self.ident(kids[0])
            got = self.check_expr(kids[1], scope)
            if name is None:
                return
            b = scope.lookup(name)
            if b is None:
                self.report(kids[0], f"unknown identifier {name!r}")
            elif b.kind == "func":
                self.report(kids[0], f"cannot assign to function {name!r}")
            elif got is not None and got != b.type:
                self.report(kids[1], f"assigning {got} to {b.type} variable {name!r}")
        elif kind == "If":
            got = self.check_expr(kids[0], scope)
            if got is not None and got != BOOL:
                self.report(kids[0], f"condition has type {got}, expected bool")
            self.check_block(kids[1], scope, ret_type)
            if len(kids) == 3:
                self.check_block(kids[2], scope, ret_type)
        elif kind == "While":
            got = self.check_expr(kids[0], scope)
            if got is not None and got != BOOL:
                self.report(kids[0], f"condition has type {got}, expected bool")
            self.check_block(kids[1], scope, ret_type)
        elif kind == "Return":
            got = self.check_expr(kids[0], scope)
            if got is not None and got != ret_type:
                self.report(kids[0], f"returning {got} from a {ret_type} function")
        elif kind == "ExprStmt":
            self.check_expr(kids[0], scope)

    def check_expr(self, expr_id: int, scope: _Scope) -> str | None:
        tree = self.tree
        kids = tree.children(expr_id)
        if len(kids) == 3:
            op = tree.node(kids[1]).symbol.name
            lt = self.check_expr(kids[0], scope)
            rt = self.check_expr(kids[2], scope)
            return self.binary_type(expr_id, op, lt, rt)
        if len(kids) == 2:  # ! Expr
            got = self.check_expr(kids[1], scope)
            if got is not None and got != BOOL:
                self.report(kids[1], f"operand of ! has type {got}, expected bool")
            return BOOL
        child = tree.node(kids[0])
        name = child.symbol.name
        if name == "Num":
            return INT
        if name in ("true", "false"):
            return BOOL
        if name == "HLIdentifier":
            ident = self.ident(child.id)
            if ident is None:
                return None
            b = scope.lookup(ident)
            if b is None:
                self.report(child.id, f"unknown identifier {ident!r}")
                return None
            if b.kind == "func":
                self.report(child.id, f"function {ident!r} used as a value")
                return None
            return b.type
        if name == "Call":
            return self.check_call(child.id, scope)
        raise AssertionError(f"unexpected Expr child {name}")

    def check_call(self, call_id: int, scope: _Scope) -> str | None:
        tree = self.tree
        callee_id, args_id = tree.children(call_id)
        arg_types = []
        node = args_id
        while tree.children(node):
            e, node = tree.children(node)
            arg_types.append(self.check_expr(e, scope))
        name = self.ident(callee_id)
        if name is None:
            return None
        b = scope.lookup(name)
        if b is None:
            self.report(callee_id, f"unknown identifier {name!r}")
            return None
        if b.kind != "func":
            self.report(callee_id, f"{name!r} is not a function")
            return None
        sig: FuncType = b.type
        if len(arg_types) != len(sig.params):
            self.report(call_id, f"{name!r} expects {len(sig.params)} arguments, got {len(arg_types)}")
            return sig.ret
        for i, (got, want) in enumerate(zip(arg_types, sig.params)):
            if got is not None and got != want:
                self.report(call_id, f"argument {i + 1} of {name!r} has type {got}, expected {want}")
        return sig.ret

    def binary_type(self, expr_id: int, op: str, lt, rt) -> str | None:
        def both(want):
            for side, got in (("left", lt), ("right", rt)):
                if got is not None and got != want:
                    self.report(expr_id, f"{side} operand of {op} has type {got}, expected {want}")

        if op in ("+", "-", "*", "/", "%"):
            both(INT)
            return INT
        if op in ("<", "<=", ">", ">="):
            both(INT)
            return BOOL
        if op in ("==", "!="):
            if lt is not None and rt is not None and lt != rt:
                self.report(expr_id, f"comparing {lt} with {rt}")
            return BOOL
        if op in ("&&", "||"):
            both(BOOL)
            return BOOL
        raise AssertionError(f"unexpected operator {op}")


def typecheck(tree: Ast) -> list[Diagnostic]:
    """All type errors in the program; an empty list means well-typed."""
    return _Checker(tree).run()


def typechecks(tree: Ast) -> bool:
    return not typecheck(tree)


def collect_identifiers(tree: Ast, at: int) -> list[tuple[str, object, str]]:
    """Identifiers accessible at statement `at`: (name, type, kind) triples.

    Includes every function name plus the parameters and earlier declarations
    of the scopes enclosing `at`, innermost binding winning on shadowing.
    Ordered by declaration position.
    """
    if tree.node(at).symbol != lang.STMT:
        raise ValueError(f"node {at} is not a statement")
    visible: dict[str, Binding] = {}
    for f in _functions(tree):
        name_id, params_id, ret_id, _ = tree.children(f)
        name = lang.identifier_name(tree, name_id)
        if name is None:
            continue
        ptypes = tuple(ty for _, _, ty in _param_list(tree, params_id))
        sig = FuncType(ptypes, tree.node(ret_id).token)
        visible.setdefault(name, Binding(name, sig, "func", name_id))

    func = lang.enclosing_function(tree, at)
    if func is not None:
        for hl, pname, ty in _param_list(tree, tree.children(func)[1]):
            if pname is not None:
                visible[pname] = Binding(pname, ty, "param", hl)

    # ancestors of `at` that are Stmt nodes, outermost first, plus `at` itself
    chain = []
    i = at
    while i is not None:
        if tree.node(i).symbol == lang.STMT:
            chain.append(i)
        i = tree.node(i).parent
    chain.reverse()

    for stmt in chain:
        for sibling in lang.statement_list(tree, stmt):
            if sibling == stmt:
                break
            inner = tree.node(tree.children(sibling)[0])
            if inner.symbol.name == "VarDecl":
                hl, ty_id, _ = inner.children
                name = lang.identifier_name(tree, hl)
                if name is not None:
                    visible[name] = Binding(name, tree.node(ty_id).token, "var", hl)

    out = sorted(visible.values(), key=lambda b: (b.decl_id, b.name))
    return [(b.name, b.type, b.kind) for b in out]

"""Statement-coverage-recording interpreter for MiniLang."""

from __future__ import annotations

import json
from dataclasses import dataclass

from ..grammar import Ast
from . import lang

DEFAULT_FUEL = 10**6
MAX_CALL_DEPTH = 200

PASS = "pass"
WRONG_VALUE = "wrong-value"
TIMEOUT = "timeout"
RUNTIME = "runtime"
INVALID = "invalid"


@dataclass(frozen=True)
class TestCase:
    entry: str
    args: tuple
    expect: object  # int | bool


@dataclass(frozen=True)
class CoverageRecord:
    """Execution flags for one test run: which Stmt nodes ran, and the verdict."""

    covered: frozenset[int]
    passed: bool
    outcome: str
    detail: str = ""


def load_test_suite(text: str) -> list[TestCase]:
    data = json.loads(text)
    return [TestCase(d["entry"], tuple(d["args"]), d["expect"]) for d in data]


def dump_test_suite(tests: list[TestCase]) -> str:
    return json.dumps(
        [{"entry": t.entry, "args": list(t.args), "expect": t.expect} for t in tests],
        indent=2,
    ) + "\n"


class _Timeout(Exception):
    pass


class _Fail(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class _Return(Exception):
    def __init__(self, value):
        self.value = value


class _Interp:
    def __init__(self, tree: Ast, fuel: int):
        self.tree = tree
        self.fuel = fuel
        self.covered: set[int] = set()
        self.functions: dict[str, int] = {}
        node = tree.root
        while True:
            kids = tree.children(node)
            f = kids[0]
            name = lang.function_name(tree, f)
            if name is not None:
                self.functions.setdefault(name, f)
            if len(kids) == 1:
                break
            node = kids[1]

    def tick(self, cost: int = 1):
        self.fuel -= cost
        if self.fuel < 0:
            raise _Timeout()

    def call(self, name: str, args: list, depth: int):
        if depth > MAX_CALL_DEPTH:
            raise _Fail("call depth exceeded")
        if name not in self.functions:
            raise _Fail(f"no function named {name!r}")
        f = self.functions[name]
        _, params_id, _, block_id = self.tree.children(f)
        env = [{}]
        node = params_id
        i = 0
        while self.tree.children(node):
            hl, _, node = self.tree.children(node)
            if i >= len(args):
                raise _Fail(f"{name!r}: missing argument {i + 1}")
            env[0][lang.identifier_name(self.tree, hl)] = args[i]
            i += 1
        if i != len(args):
            raise _Fail(f"{name!r}: expected {i} arguments, got {len(args)}")
        try:
            self.exec_block(block_id, env, depth)
        except _Return as r:
            return r.value
        raise _Fail(f"{name!r} finished without returning")

    def exec_block(self, block_id: int, env: list[dict], depth: int):
        env.append({})
        try:
            for stmt in lang.flatten_stmts(self.tree, self.tree.children(block_id)[0]):
                self.exec_stmt(stmt, env, depth)
        finally:
            env.pop()

    def exec_stmt(self, stmt_id: int, env: list[dict], depth: int):
        self.tick()
        self.covered.add(stmt_id)
        tree = self.tree
        inner = tree.node(tree.children(stmt_id)[0])
        kids = inner.children
        kind = inner.symbol.name
        if kind == "VarDecl":
            env[-1][lang.identifier_name(tree, kids[0])] = self.eval(kids[2], env, depth)
        elif kind == "Assign":
            name = lang.identifier_name(tree, kids[0])
            value = self.eval(kids[1], env, depth)
            for scope in reversed(env):
                if name in scope:
                    scope[name] = value
                    return
            raise _Fail(f"assignment to unknown identifier {name!r}")
        elif kind == "If":
            if self.eval(kids[0], env, depth):
                self.exec_block(kids[1], env, depth)
            elif len(kids) == 3:
                self.exec_block(kids[2], env, depth)
        elif kind == "While":
            while True:
                self.tick()
                if not self.eval(kids[0], env, depth):
                    break
                self.covered.add(stmt_id)
                self.exec_block(kids[1], env, depth)
        elif kind == "Return":
            raise _Return(self.eval(kids[0], env, depth))
        elif kind == "ExprStmt":
            self.eval(kids[0], env, depth)
        else:
            raise _Fail(f"unknown statement form {kind}")

    def eval(self, expr_id: int, env: list[dict], depth: int):
        tree = self.tree
        kids = tree.children(expr_id)
        if len(kids) == 3:
            op = tree.node(kids[1]).symbol.name
            left = self.eval(kids[0], env, depth)
            if op == "&&":
                return bool(left) and bool(self.eval(kids[2], env, depth))
            if op == "||":
                return bool(left) or bool(self.eval(kids[2], env, depth))
            right = self.eval(kids[2], env, depth)
            if op in ("/", "%") and right == 0:
                raise _Fail("division by zero")
            # integer division floors, matching Python
            return {
                "+": lambda: left + right,
                "-": lambda: left - right,
                "*": lambda: left * right,
                "/": lambda: left // right,
                "%": lambda: left % right,
                "<": lambda: left < right,
                "<=": lambda: left <= right,
                ">": lambda: left > right,
                ">=": lambda: left >= right,
                "==": lambda: left == right,
                "!=": lambda: left != right,
            }[op]()
        if len(kids) == 2:
            return not self.eval(kids[1], env, depth)
        child = tree.node(kids[0])
        name = child.symbol.name
        if name == "Num":
            return int(child.token)
        if name == "true":
            return True
        if name == "false":
            return False
        if name == "HLIdentifier":
            ident = lang.identifier_name(tree, child.id)
            if ident is None:
                raise _Fail("uninstantiated placeholder")
            for scope in reversed(env):
                if ident in scope:
                    return scope[ident]
            raise _Fail(f"unknown identifier {ident!r}")
        if name == "Call":
            callee_id, args_id = tree.children(child.id)
            callee = lang.identifier_name(tree, callee_id)
            args = []
            node = args_id
            while tree.children(node):
                e, node = tree.children(node)
                args.append(self.eval(e, env, depth))
            self.tick()
            return self.call(callee, args, depth + 1)
        raise _Fail(f"unexpected expression form {name}")


def call_entry(tree: Ast, entry: str, args, fuel: int = DEFAULT_FUEL):
    """Evaluate an entry point; returns (value, None) or (None, failure reason)."""
    interp = _Interp(tree, fuel)
    try:
        return interp.call(entry, list(args), 0), None
    except _Timeout:
        return None, TIMEOUT
    except _Fail as f:
        return None, f.reason
    except RecursionError:
        return None, "recursion limit"


def run(tree: Ast, test: TestCase, fuel: int = DEFAULT_FUEL) -> CoverageRecord:
    """Execute one test; division-by-zero and fuel exhaustion are failing verdicts."""
    interp = _Interp(tree, fuel)
    try:
        got = interp.call(test.entry, list(test.args), 0)
    except _Timeout:
        return CoverageRecord(frozenset(interp.covered), False, TIMEOUT)
    except _Fail as f:
        return CoverageRecord(frozenset(interp.covered), False, RUNTIME, f.reason)
    except RecursionError:
        return CoverageRecord(frozenset(interp.covered), False, RUNTIME, "recursion limit")
    # bool is an int subtype in Python, so compare types exactly
    if type(got) is type(test.expect) and got == test.expect:
        return CoverageRecord(frozenset(interp.covered), True, PASS)
    return CoverageRecord(frozenset(interp.covered), False, WRONG_VALUE, f"got {got!r}")

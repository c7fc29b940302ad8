"""MiniLang grammar definition and tree navigation helpers.

MiniLang is a small imperative language (ints, bools, functions, if/while)
whose statement positions always admit statement-sequence insertion, which is
what makes insert-before edits syntactically safe. Identifier occurrences are
``HLIdentifier`` nonterminals wrapping an ``Ident`` leaf so that edits can
re-target them without touching the surrounding structure.
"""

from __future__ import annotations

from ..grammar import Ast, Grammar, Production, Symbol, nonterm, subtree_size, term

NONTERMINAL_NAMES = [
    "Program", "Func", "Params", "Block", "Stmts", "Stmt",
    "VarDecl", "Assign", "If", "While", "Return", "ExprStmt",
    "Expr", "Call", "Args", "HLIdentifier",
]

BINARY_OPS = ["+", "-", "*", "/", "%", "<", "<=", ">", ">=", "==", "!=", "&&", "||"]

TERMINAL_NAMES = ["Ident", "Num", "placeholder", "int", "bool", "true", "false", "!"] + BINARY_OPS

PLACEHOLDER_TOKEN = "placeholder"


def _build_grammar() -> Grammar:
    nt = {name: nonterm(name) for name in NONTERMINAL_NAMES}
    t = {name: term(name) for name in TERMINAL_NAMES}
    rules: list[tuple[str, list[str]]] = [
        ("Program", ["Func"]),
        ("Program", ["Func", "Program"]),
        ("Func", ["HLIdentifier", "Params", "int", "Block"]),
        ("Func", ["HLIdentifier", "Params", "bool", "Block"]),
        ("Params", []),
        ("Params", ["HLIdentifier", "int", "Params"]),
        ("Params", ["HLIdentifier", "bool", "Params"]),
        ("Block", ["Stmts"]),
        ("Stmts", []),
        ("Stmts", ["Stmt", "Stmts"]),
        ("Stmt", ["VarDecl"]),
        ("Stmt", ["Assign"]),
        ("Stmt", ["If"]),
        ("Stmt", ["While"]),
        ("Stmt", ["Return"]),
        ("Stmt", ["ExprStmt"]),
        ("VarDecl", ["HLIdentifier", "int", "Expr"]),
        ("VarDecl", ["HLIdentifier", "bool", "Expr"]),
        ("Assign", ["HLIdentifier", "Expr"]),
        ("If", ["Expr", "Block"]),
        ("If", ["Expr", "Block", "Block"]),
        ("While", ["Expr", "Block"]),
        ("Return", ["Expr"]),
        ("ExprStmt", ["Expr"]),
        ("Expr", ["Num"]),
        ("Expr", ["true"]),
        ("Expr", ["false"]),
        ("Expr", ["HLIdentifier"]),
        ("Expr", ["Call"]),
    ]
    rules += [("Expr", ["Expr", op, "Expr"]) for op in BINARY_OPS]
    rules += [
        ("Expr", ["!", "Expr"]),
        ("Call", ["HLIdentifier", "Args"]),
        ("Args", []),
        ("Args", ["Expr", "Args"]),
        ("HLIdentifier", ["Ident"]),
        ("HLIdentifier", ["placeholder"]),
    ]
    syms = {**nt, **t}
    prods = [
        Production(i, syms[lhs], tuple(syms[s] for s in rhs))
        for i, (lhs, rhs) in enumerate(rules)
    ]
    return Grammar(syms.values(), prods, nt["Program"])


GRAMMAR = _build_grammar()

STMT = GRAMMAR.symbol("Stmt")
STMTS = GRAMMAR.symbol("Stmts")
FUNC = GRAMMAR.symbol("Func")
EXPR = GRAMMAR.symbol("Expr")
HL_IDENTIFIER = GRAMMAR.symbol("HLIdentifier")
IDENT = GRAMMAR.symbol("Ident")
NUM = GRAMMAR.symbol("Num")
PLACEHOLDER = GRAMMAR.symbol("placeholder")


def production_of(tree: Ast, node_id: int) -> Production:
    """The unique production a nonterminal node conforms to."""
    n = tree.node(node_id)
    rhs = tuple(tree.node(c).symbol.name for c in n.children)
    p = GRAMMAR.find_production(n.symbol, rhs)
    if p is None:
        raise ValueError(f"node {node_id}: {n.symbol.name} -> {rhs} not in MiniLang grammar")
    return p


def statement_nodes(tree: Ast) -> list[int]:
    """All Stmt node ids, in pre-order."""
    return [n.id for n in tree.nodes if n.symbol == STMT]


def enclosing_statement(tree: Ast, node_id: int) -> int | None:
    """The nearest Stmt ancestor (or the node itself)."""
    i = node_id
    while i is not None:
        if tree.node(i).symbol == STMT:
            return i
        i = tree.node(i).parent
    return None


def enclosing_function(tree: Ast, node_id: int) -> int | None:
    i = node_id
    while i is not None:
        if tree.node(i).symbol == FUNC:
            return i
        i = tree.node(i).parent
    return None


def statement_list(tree: Ast, stmt_id: int) -> list[int]:
    """The statement sequence (list of Stmt ids) containing the given Stmt."""
    spine = tree.node(stmt_id).parent  # the Stmts node holding this Stmt
    while True:
        parent = tree.node(spine).parent
        if parent is None or tree.node(parent).symbol != STMTS:
            break
        spine = parent
    out = []
    i = spine
    while True:
        kids = tree.node(i).children
        if not kids:
            break
        out.append(kids[0])
        i = kids[1]
    return out


def flatten_stmts(tree: Ast, stmts_id: int) -> list[int]:
    """Stmt ids along a Stmts spine starting at `stmts_id`."""
    out = []
    i = stmts_id
    while True:
        kids = tree.node(i).children
        if not kids:
            return out
        out.append(kids[0])
        i = kids[1]


def identifier_name(tree: Ast, hl_id: int) -> str | None:
    """Token under an HLIdentifier node; None for an uninstantiated placeholder."""
    child = tree.node(tree.children(hl_id)[0])
    if child.symbol == PLACEHOLDER:
        return None
    return child.token


def function_name(tree: Ast, func_id: int) -> str | None:
    return identifier_name(tree, tree.children(func_id)[0])


def is_modifiable(tree: Ast, node_id: int) -> bool:
    n = tree.node(node_id)
    return not n.symbol.is_terminal and subtree_size(tree, node_id) > 1

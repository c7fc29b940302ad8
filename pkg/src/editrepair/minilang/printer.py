"""Pretty-printer emitting re-parseable MiniLang source."""

from __future__ import annotations

from ..grammar import Ast
from . import lang
from .parser import PRECEDENCE_TIERS

_TIER = {op: i for i, ops in enumerate(PRECEDENCE_TIERS) for op in ops}
_UNARY_LEVEL = max(_TIER.values()) + 1


class PrintError(ValueError):
    pass


def _expr_level(tree: Ast, node_id: int) -> int:
    kids = tree.children(node_id)
    if len(kids) == 3:
        return _TIER[tree.node(kids[1]).symbol.name]
    if len(kids) == 2:  # unary !
        return _UNARY_LEVEL
    return _UNARY_LEVEL + 1  # atoms


def _expr(tree: Ast, node_id: int, min_level: int, allow_placeholder: bool) -> str:
    level = _expr_level(tree, node_id)
    kids = tree.children(node_id)
    if len(kids) == 3:
        op = tree.node(kids[1]).token
        text = (
            _expr(tree, kids[0], level, allow_placeholder)
            + f" {op} "
            + _expr(tree, kids[2], level + 1, allow_placeholder)
        )
    elif len(kids) == 2:
        text = "!" + _expr(tree, kids[1], _UNARY_LEVEL, allow_placeholder)
    else:
        child = tree.node(kids[0])
        if child.symbol.name == "Call":
            text = _call(tree, child.id, allow_placeholder)
        elif child.symbol.name == "HLIdentifier":
            text = _ident(tree, child.id, allow_placeholder)
        else:
            text = child.token
    if level < min_level:
        return f"({text})"
    return text


def _ident(tree: Ast, hl_id: int, allow_placeholder: bool) -> str:
    name = lang.identifier_name(tree, hl_id)
    if name is None:
        if not allow_placeholder:
            raise PrintError(
                f"node {hl_id}: placeholder must be instantiated before printing"
            )
        return lang.PLACEHOLDER_TOKEN
    return name


def _call(tree: Ast, call_id: int, allow_placeholder: bool) -> str:
    callee, args = tree.children(call_id)
    items = []
    node = args
    while tree.children(node):
        e, node = tree.children(node)
        items.append(_expr(tree, e, 0, allow_placeholder))
    return _ident(tree, callee, allow_placeholder) + "(" + ", ".join(items) + ")"


def _block(tree: Ast, block_id: int, indent: int, allow_placeholder: bool) -> list[str]:
    pad = "    " * indent
    lines = [pad + "{"]
    for stmt in lang.flatten_stmts(tree, tree.children(block_id)[0]):
        lines.extend(_stmt(tree, stmt, indent + 1, allow_placeholder))
    lines.append(pad + "}")
    return lines


def _stmt(tree: Ast, stmt_id: int, indent: int, allow_placeholder: bool) -> list[str]:
    pad = "    " * indent
    inner = tree.node(tree.children(stmt_id)[0])
    kids = inner.children
    kind = inner.symbol.name
    if kind == "VarDecl":
        name = _ident(tree, kids[0], allow_placeholder)
        ty = tree.node(kids[1]).token
        value = _expr(tree, kids[2], 0, allow_placeholder)
        return [f"{pad}var {name}: {ty} = {value};"]
    if kind == "Assign":
        name = _ident(tree, kids[0], allow_placeholder)
        return [f"{pad}{name} = {_expr(tree, kids[1], 0, allow_placeholder)};"]
    if kind == "If":
        lines = [f"{pad}if ({_expr(tree, kids[0], 0, allow_placeholder)})"]
        lines.extend(_block(tree, kids[1], indent, allow_placeholder))
        if len(kids) == 3:
            lines.append(pad + "else")
            lines.extend(_block(tree, kids[2], indent, allow_placeholder))
        return lines
    if kind == "While":
        lines = [f"{pad}while ({_expr(tree, kids[0], 0, allow_placeholder)})"]
        lines.extend(_block(tree, kids[1], indent, allow_placeholder))
        return lines
    if kind == "Return":
        return [f"{pad}return {_expr(tree, kids[0], 0, allow_placeholder)};"]
    if kind == "ExprStmt":
        return [f"{pad}{_expr(tree, kids[0], 0, allow_placeholder)};"]
    raise PrintError(f"node {stmt_id}: unknown statement form {kind}")


def _func(tree: Ast, func_id: int, allow_placeholder: bool) -> list[str]:
    name_id, params_id, ret_id, block_id = tree.children(func_id)
    params = []
    node = params_id
    while tree.children(node):
        hl, ty, node = tree.children(node)
        params.append(f"{_ident(tree, hl, allow_placeholder)}: {tree.node(ty).token}")
    head = f"fn {_ident(tree, name_id, allow_placeholder)}({', '.join(params)}) -> {tree.node(ret_id).token}"
    return [head] + _block(tree, block_id, 0, allow_placeholder)


def to_source(tree: Ast, allow_placeholder: bool = False) -> str:
    """Emit MiniLang source. Fails on uninstantiated placeholders by default."""
    if tree.node(tree.root).symbol.name != "Program":
        raise PrintError("expected a Program tree")
    funcs = []
    node = tree.root
    while True:
        kids = tree.children(node)
        funcs.append(kids[0])
        if len(kids) == 1:
            break
        node = kids[1]
    chunks = ["\n".join(_func(tree, f, allow_placeholder)) for f in funcs]
    return "\n\n".join(chunks) + "\n"

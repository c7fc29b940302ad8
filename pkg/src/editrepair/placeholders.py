"""Instantiation of placeholder identifiers in patched programs.

A feasible identifier must (1) be accessible at the placeholder's position and
(2) keep the whole program well-typed. Both criteria are enforced at once by
substituting and re-typechecking: an out-of-scope name fails the typecheck as
an unknown identifier.
"""

from __future__ import annotations

from .edits import EditContext
from .grammar import Ast, Draft, freeze
from .minilang import typechecks
from .minilang.lang import IDENT


class PlaceholderError(ValueError):
    pass


def find_placeholders(tree: Ast) -> list[int]:
    """Ids of placeholder leaves, in pre-order."""
    return [n.id for n in tree.nodes if n.symbol.name == "placeholder"]


def candidate_identifiers(program: Ast) -> list[str]:
    """Every identifier occurring in the program, ordered by first occurrence."""
    first: dict[str, int] = {}
    for n in program.nodes:
        if n.symbol.name == "Ident" and n.token not in first:
            first[n.token] = n.id
    return sorted(first, key=lambda name: (first[name], name))


def substitute(tree: Ast, placeholder_id: int, name: str) -> Ast:
    """Replace one placeholder leaf with a concrete identifier."""
    if tree.node(placeholder_id).symbol.name != "placeholder":
        raise PlaceholderError(f"node {placeholder_id} is not a placeholder")

    def build(node_id: int) -> Draft:
        n = tree.node(node_id)
        if node_id == placeholder_id:
            return Draft(IDENT, name)
        return Draft(n.symbol, n.token, [build(c) for c in n.children])

    return freeze(build(tree.root))


def instantiate_all(tree: Ast, ctx: EditContext | None = None) -> list[Ast]:
    """All feasible concretizations of a patched program.

    With no placeholder the program passes through as a singleton. Candidate
    identifiers are drawn from the original program when a context is given
    (the project's lexical identifier pool), otherwise from the patched tree
    itself; every returned program typechecks.
    """
    holes = find_placeholders(tree)
    if not holes:
        return [tree]
    if len(holes) > 1:
        raise PlaceholderError(f"{len(holes)} placeholders; at most one is instantiable")
    pool_source = ctx.program if ctx is not None else tree
    out = []
    for name in candidate_identifiers(pool_source):
        candidate = substitute(tree, holes[0], name)
        if typechecks(candidate):
            out.append(candidate)
    return out

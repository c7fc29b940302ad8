"""Symbol-typed grammars and pre-order-numbered ASTs.

Every tree in this package (host programs and edit scripts alike) is an
``Ast``: a flat array of nodes whose ids are their 1-based positions in the
pre-order traversal. Trees are immutable values; editing goes through the
mutable ``Draft`` builder and ``freeze``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

TERMINAL = "terminal"
NONTERMINAL = "nonterminal"


class GrammarError(ValueError):
    pass


class UnknownNodeError(KeyError):
    pass


@dataclass(frozen=True)
class Symbol:
    name: str
    kind: str

    def __post_init__(self):
        if self.kind not in (TERMINAL, NONTERMINAL):
            raise GrammarError(f"bad symbol kind {self.kind!r}")

    @property
    def is_terminal(self) -> bool:
        return self.kind == TERMINAL

    def __repr__(self):
        return f"{self.name}:{'T' if self.is_terminal else 'N'}"


def term(name: str) -> Symbol:
    return Symbol(name, TERMINAL)


def nonterm(name: str) -> Symbol:
    return Symbol(name, NONTERMINAL)


@dataclass(frozen=True)
class Production:
    id: int
    lhs: Symbol
    rhs: tuple[Symbol, ...]

    def __post_init__(self):
        if self.lhs.is_terminal:
            raise GrammarError(f"production {self.id} lhs {self.lhs} is a terminal")

    def __repr__(self):
        rhs = " ".join(s.name for s in self.rhs) or "ε"
        return f"[{self.id}] {self.lhs.name} -> {rhs}"


class Grammar:
    """A set of symbols plus densely-numbered productions and a start symbol."""

    def __init__(self, symbols, productions, start: Symbol):
        self.symbols: dict[str, Symbol] = {}
        for s in symbols:
            if s.name in self.symbols and self.symbols[s.name] != s:
                raise GrammarError(f"symbol name {s.name!r} used with two kinds")
            self.symbols[s.name] = s
        self.productions: tuple[Production, ...] = tuple(productions)
        self.start = start
        self._by_lhs: dict[str, list[Production]] = {}
        self._by_shape: dict[tuple, Production] = {}
        self._check()

    def _check(self):
        for i, p in enumerate(self.productions):
            if p.id != i:
                raise GrammarError(f"production ids not dense at {p}")
            if p.lhs.name not in self.symbols:
                raise GrammarError(f"{p}: unknown lhs")
            for s in p.rhs:
                if self.symbols.get(s.name) != s:
                    raise GrammarError(f"{p}: rhs symbol {s} not in grammar")
            self._by_lhs.setdefault(p.lhs.name, []).append(p)
            shape = (p.lhs.name,) + tuple(s.name for s in p.rhs)
            if shape in self._by_shape:
                raise GrammarError(f"duplicate production shape {shape}")
            self._by_shape[shape] = p
        if self.start.name not in self.symbols:
            raise GrammarError("start symbol not in grammar")
        for s in self.symbols.values():
            if not s.is_terminal and s.name not in self._by_lhs:
                raise GrammarError(f"nonterminal {s.name} has no production")

    @property
    def num_productions(self) -> int:
        return len(self.productions)

    def symbol(self, name: str) -> Symbol:
        try:
            return self.symbols[name]
        except KeyError:
            raise GrammarError(f"unknown symbol {name!r}") from None

    def productions_for(self, sym: Symbol) -> list[Production]:
        return self._by_lhs.get(sym.name, [])

    def find_production(self, lhs: Symbol, rhs_names) -> Production | None:
        return self._by_shape.get((lhs.name,) + tuple(rhs_names))


@dataclass(frozen=True)
class AstNode:
    id: int
    symbol: Symbol
    token: str | None
    children: tuple[int, ...]
    parent: int | None

    def __post_init__(self):
        if self.symbol.is_terminal != (self.token is not None):
            raise GrammarError(
                f"node {self.id} ({self.symbol}): token present iff terminal"
            )


class Ast:
    """Immutable tree; node ids equal 1-based pre-order positions."""

    __slots__ = ("nodes",)

    def __init__(self, nodes: tuple[AstNode, ...]):
        self.nodes = nodes
        for k, n in enumerate(nodes):
            if n.id != k + 1:
                raise GrammarError(f"node at position {k} has id {n.id}")

    @property
    def root(self) -> int:
        return 1

    def __len__(self):
        return len(self.nodes)

    def node(self, node_id: int) -> AstNode:
        if not 1 <= node_id <= len(self.nodes):
            raise UnknownNodeError(node_id)
        return self.nodes[node_id - 1]

    def children(self, node_id: int) -> tuple[int, ...]:
        return self.node(node_id).children

    def __repr__(self):
        return f"Ast<{len(self.nodes)} nodes, root {self.nodes[0].symbol.name}>"


@dataclass(eq=False)
class Draft:
    """Mutable builder node; turn into an Ast with freeze().

    Identity semantics (eq=False) so drafts can key dicts during splicing.
    """

    symbol: Symbol
    token: str | None = None
    children: list[Draft] = field(default_factory=list)

    def clone(self) -> Draft:
        return Draft(self.symbol, self.token, [c.clone() for c in self.children])


def freeze(draft: Draft) -> Ast:
    """Number a draft tree in pre-order and produce the immutable Ast."""
    nodes: list[AstNode] = []

    def visit(d: Draft, parent: int | None) -> int:
        my_id = len(nodes) + 1
        nodes.append(None)  # reserve the slot so children see correct ids
        kids = tuple(visit(c, my_id) for c in d.children)
        nodes[my_id - 1] = AstNode(my_id, d.symbol, d.token, kids, parent)
        return my_id

    visit(draft, None)
    return Ast(tuple(nodes))


def thaw(tree: Ast, root: int | None = None) -> Draft:
    """Detach a subtree as a mutable draft."""
    n = tree.node(tree.root if root is None else root)
    return Draft(n.symbol, n.token, [thaw(tree, c) for c in n.children])


def leaf(sym: Symbol, token: str) -> Draft:
    return Draft(sym, token)


def preorder_ids(tree: Ast) -> list[int]:
    """Pre-order traversal; by construction equals [1..len(tree)]."""
    order: list[int] = []
    stack = [tree.root]
    while stack:
        i = stack.pop()
        order.append(i)
        stack.extend(reversed(tree.children(i)))
    return order


def subtree_size(tree: Ast, root: int) -> int:
    n = tree.node(root)
    # pre-order numbering makes every subtree a contiguous id range, so the
    # size is the distance to the first id outside it
    last = root
    while True:
        kids = tree.node(last).children
        if not kids:
            break
        last = kids[-1]
    return last - root + 1


def subtree(tree: Ast, root: int) -> Ast:
    """A detached copy of the subtree at `root`, renumbered in pre-order."""
    tree.node(root)
    return freeze(thaw(tree, root))


def structural_equal(a: Ast, b: Ast) -> bool:
    """Symbol/token/children equality, ignoring node ids."""
    if len(a) != len(b):
        return False
    stack = [(a.root, b.root)]
    while stack:
        i, j = stack.pop()
        na, nb = a.node(i), b.node(j)
        if na.symbol != nb.symbol or na.token != nb.token:
            return False
        if len(na.children) != len(nb.children):
            return False
        stack.extend(zip(na.children, nb.children))
    return True


def subtrees_equal(a: Ast, a_root: int, b: Ast, b_root: int) -> bool:
    """structural_equal on subtrees of two (possibly different) trees."""
    stack = [(a_root, b_root)]
    while stack:
        i, j = stack.pop()
        na, nb = a.node(i), b.node(j)
        if na.symbol != nb.symbol or na.token != nb.token:
            return False
        if len(na.children) != len(nb.children):
            return False
        stack.extend(zip(na.children, nb.children))
    return True


def descendants(tree: Ast, root: int) -> range:
    """Ids of the subtree at `root` (inclusive); contiguous by pre-order."""
    return range(root, root + subtree_size(tree, root))


def conformance_violations(tree: Ast, grammar: Grammar) -> list[str]:
    """Check every node matches exactly one production of the grammar."""
    out = []
    for n in tree.nodes:
        if grammar.symbols.get(n.symbol.name) != n.symbol:
            out.append(f"node {n.id}: symbol {n.symbol} not in grammar")
            continue
        if n.symbol.is_terminal:
            continue
        rhs = tuple(tree.node(c).symbol.name for c in n.children)
        if grammar.find_production(n.symbol, rhs) is None:
            out.append(f"node {n.id}: {n.symbol.name} -> {' '.join(rhs) or 'ε'} matches no production")
    return out


# --- S-expression serialization ---------------------------------------------
#
# `(Symbol child ...)` for nonterminals, `(Symbol "token")` for terminals;
# NodeID references render unquoted: `(NodeID 9)`.

NODE_ID_SYMBOL = "NodeID"


class SexprError(ValueError):
    pass


def _quote(token: str) -> str:
    return '"' + token.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_sexpr(tree: Ast, root: int | None = None) -> str:
    def emit(i: int) -> str:
        n = tree.node(i)
        if n.symbol.is_terminal:
            if n.symbol.name == NODE_ID_SYMBOL:
                return f"({n.symbol.name} {n.token})"
            return f"({n.symbol.name} {_quote(n.token)})"
        inner = "".join(" " + emit(c) for c in n.children)
        return f"({n.symbol.name}{inner})"

    return emit(tree.root if root is None else root)


def _tokenize_sexpr(text: str):
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
        elif c in "()":
            yield c
            i += 1
        elif c == '"':
            j, buf = i + 1, []
            while j < n and text[j] != '"':
                if text[j] == "\\":
                    j += 1
                    if j >= n:
                        raise SexprError("dangling escape")
                buf.append(text[j])
                j += 1
            if j >= n:
                raise SexprError("unterminated string")
            yield ("str", "".join(buf))
            i = j + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in '()"':
                j += 1
            yield ("atom", text[i:j])
            i = j


def from_sexpr(text: str, grammar: Grammar) -> Ast:
    """Parse the S-expression form back into an Ast over `grammar`."""
    toks = list(_tokenize_sexpr(text))
    pos = 0

    def expect(t):
        nonlocal pos
        if pos >= len(toks) or toks[pos] != t:
            raise SexprError(f"expected {t!r} at token {pos}")
        pos += 1

    def parse_node() -> Draft:
        nonlocal pos
        expect("(")
        if pos >= len(toks) or not isinstance(toks[pos], tuple) or toks[pos][0] != "atom":
            raise SexprError(f"expected symbol name at token {pos}")
        sym = grammar.symbol(toks[pos][1])
        pos += 1
        if sym.is_terminal:
            if pos >= len(toks) or not isinstance(toks[pos], tuple):
                raise SexprError(f"terminal {sym.name} needs a token")
            kind, value = toks[pos]
            pos += 1
            expect(")")
            return Draft(sym, value)
        kids = []
        while pos < len(toks) and toks[pos] == "(":
            kids.append(parse_node())
        expect(")")
        return Draft(sym, None, kids)

    root = parse_node()
    if pos != len(toks):
        raise SexprError("trailing content after tree")
    return freeze(root)

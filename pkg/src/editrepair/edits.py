"""The edit language: grammar derivation, validation, and application.

An edit script is itself an Ast, drawn over a grammar derived mechanically
from the host grammar:

    Edits  -> Edit Edits | end
    Edit   -> Insert | Modify
    Insert -> Stmt                          (the host statement nonterminal)
    Modify -> NodeID X                      (one production per host nonterminal X)
    X      -> NodeID                        (copy; one per host nonterminal)
           |  original host productions
    HLIdentifier -> placeholder | frequent identifiers
    Expr   -> frequent literals             (replaces arbitrary-token literals)

``insert`` splices a generated statement immediately before the faulty
statement; ``modify`` replaces a subtree of the faulty statement with a
generated subtree rooted at the same symbol; ``copy`` leaves resolve to deep
copies of same-symbol subtrees of the surrounding method. Together these rules
make every applied result re-parseable.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .grammar import (
    Ast,
    Draft,
    Grammar,
    NODE_ID_SYMBOL,
    Production,
    Symbol,
    conformance_violations,
    descendants,
    freeze,
    nonterm,
    subtree_size,
    term,
    thaw,
)
from .minilang import lang

ID_PREFIX = "id:"
NUM_PREFIX = "num:"

RULE_PLAIN = "plain"
RULE_COPY = "copy"
RULE_LOCATE = "locate"


class EditError(ValueError):
    def __init__(self, violations):
        super().__init__("; ".join(violations))
        self.violations = list(violations)


@dataclass(frozen=True)
class EditContext:
    """A program plus the faulty statement and its surrounding method."""

    program: Ast
    faulty_stmt: int
    method: int

    def __post_init__(self):
        if self.program.node(self.faulty_stmt).symbol.name != "Stmt":
            raise ValueError(f"node {self.faulty_stmt} is not a statement")
        if self.program.node(self.method).symbol.name != "Func":
            raise ValueError(f"node {self.method} is not a function")
        if self.faulty_stmt not in descendants(self.program, self.method):
            raise ValueError("faulty statement lies outside the surrounding method")


def context_for(program: Ast, faulty_stmt: int) -> EditContext:
    method = lang.enclosing_function(program, faulty_stmt)
    if method is None:
        raise ValueError(f"statement {faulty_stmt} has no enclosing function")
    return EditContext(program, faulty_stmt, method)


def enumerate_modifiable(ctx: EditContext) -> list[int]:
    """Nonterminal nodes of size > 1 in the faulty statement, in pre-order."""
    tree = ctx.program
    return [
        i
        for i in descendants(tree, ctx.faulty_stmt)
        if not tree.node(i).symbol.is_terminal and subtree_size(tree, i) > 1
    ]


def enumerate_copyable(ctx: EditContext, symbol: Symbol) -> list[int]:
    """Size>1 nodes with the given symbol in the surrounding method."""
    if symbol.is_terminal or symbol.name not in lang.GRAMMAR.symbols:
        raise ValueError(f"{symbol} is not a host nonterminal")
    tree = ctx.program
    return [
        i
        for i in descendants(tree, ctx.method)
        if tree.node(i).symbol == symbol and subtree_size(tree, i) > 1
    ]


class EditGrammar:
    """Derived edit grammar plus the classification of its productions."""

    def __init__(self, grammar: Grammar, host: Grammar, rule_kinds: dict[int, str],
                 frequent_ids: tuple[str, ...], frequent_literals: tuple[str, ...]):
        self.grammar = grammar
        self.host = host
        self.rule_kinds = rule_kinds
        self.frequent_ids = frequent_ids
        self.frequent_literals = frequent_literals
        self.edits = grammar.symbol("Edits")
        self.edit = grammar.symbol("Edit")
        self.insert = grammar.symbol("Insert")
        self.modify = grammar.symbol("Modify")
        self.node_id = grammar.symbol(NODE_ID_SYMBOL)
        self.end = grammar.symbol("end")
        self.stmt = grammar.symbol("Stmt")
        self.identifier = grammar.symbol("HLIdentifier")
        self.copy_production = {
            grammar.productions[pid].lhs.name: grammar.productions[pid]
            for pid, kind in rule_kinds.items()
            if kind == RULE_COPY
        }
        self.modify_production = {
            grammar.productions[pid].rhs[1].name: grammar.productions[pid]
            for pid, kind in rule_kinds.items()
            if kind == RULE_LOCATE
        }

    def kind(self, production: Production) -> str:
        return self.rule_kinds[production.id]

    def canonical_token(self, symbol: Symbol) -> str:
        """The fixed token a rule-expanded terminal leaf carries."""
        name = symbol.name
        if name.startswith(ID_PREFIX):
            return name[len(ID_PREFIX):]
        if name.startswith(NUM_PREFIX):
            return name[len(NUM_PREFIX):]
        if name == NODE_ID_SYMBOL:
            raise ValueError("NodeID tokens come from providers, not rules")
        if name in ("Ident", "Num"):
            raise ValueError(f"{name} leaves cannot be rule-generated")
        return name

    def production_of(self, tree: Ast, node_id: int) -> Production:
        n = tree.node(node_id)
        rhs = tuple(tree.node(c).symbol.name for c in n.children)
        p = self.grammar.find_production(n.symbol, rhs)
        if p is None:
            raise ValueError(f"node {node_id}: {n.symbol.name} -> {rhs} not an edit production")
        return p

    # --- script structure ----------------------------------------------------

    def edit_items(self, script: Ast) -> list[int]:
        """Inner Insert/Modify node ids along the Edits spine, in order."""
        items = []
        node = script.root
        while True:
            kids = script.children(node)
            if len(kids) == 1:  # Edits -> end
                return items
            items.append(script.children(kids[0])[0])
            node = kids[1]

    def copy_nodes(self, script: Ast) -> list[int]:
        """Nodes expanded through a copy production."""
        out = []
        for n in script.nodes:
            if (
                not n.symbol.is_terminal
                and n.symbol != self.modify
                and len(n.children) == 1
                and script.node(n.children[0]).symbol == self.node_id
            ):
                out.append(n.id)
        return out

    def count_placeholders(self, tree: Ast) -> int:
        return sum(1 for n in tree.nodes if n.symbol.name == "placeholder")

    # --- validation ----------------------------------------------------------

    def validate(self, script: Ast, ctx: EditContext) -> list[str]:
        """Structural violations of the script against the context; [] is ok."""
        out = []
        if script.node(script.root).symbol != self.edits:
            return [f"script root is {script.node(script.root).symbol.name}, not Edits"]
        out.extend(conformance_violations(script, self.grammar))
        if out:
            return out
        program = ctx.program

        def ref_of(node_id: int) -> int | None:
            token = script.node(node_id).token
            try:
                return int(token)
            except (TypeError, ValueError):
                out.append(f"node {node_id}: NodeID token {token!r} is not an integer")
                return None

        for item in self.edit_items(script):
            if script.node(item).symbol != self.modify:
                continue
            nid, gen = script.children(item)
            ref = ref_of(nid)
            if ref is None:
                continue
            if not 1 <= ref <= len(program):
                out.append(f"modify target {ref} not in program")
                continue
            target = program.node(ref)
            if ref not in descendants(program, ctx.faulty_stmt):
                out.append(f"modify target {ref} lies outside the faulty statement")
            if target.symbol.is_terminal:
                out.append(f"modify target {ref} is a terminal")
            elif subtree_size(program, ref) <= 1:
                out.append(f"modify target {ref} has size 1")
            if script.node(gen).symbol != target.symbol:
                out.append(
                    f"modify generates {script.node(gen).symbol.name} for a {target.symbol.name} target"
                )
        for cnode in self.copy_nodes(script):
            ref = ref_of(script.children(cnode)[0])
            if ref is None:
                continue
            if not 1 <= ref <= len(program):
                out.append(f"copy source {ref} not in program")
                continue
            if ref not in descendants(program, ctx.method):
                out.append(f"copy source {ref} lies outside the surrounding method")
            if program.node(ref).symbol != script.node(cnode).symbol:
                out.append(
                    f"copy source {ref} is a {program.node(ref).symbol.name}, "
                    f"expected {script.node(cnode).symbol.name}"
                )
            elif subtree_size(ctx.program, ref) <= 1:
                out.append(f"copy source {ref} has size 1")
        return out

    # --- application ---------------------------------------------------------

    def materialize(self, script: Ast, gen_id: int, ctx: EditContext) -> Draft:
        """Turn a generated edit-form subtree into a host-form draft,
        resolving copies against the original program."""
        node = script.node(gen_id)
        kids = node.children
        if node.symbol.is_terminal:
            return Draft(node.symbol, node.token)
        if len(kids) == 1 and script.node(kids[0]).symbol == self.node_id:
            ref = int(script.node(kids[0]).token)
            return thaw(ctx.program, ref)
        if node.symbol == self.identifier:
            child = script.node(kids[0])
            if child.symbol.name.startswith(ID_PREFIX):
                name = child.symbol.name[len(ID_PREFIX):]
                return Draft(node.symbol, None, [Draft(self.host.symbol("Ident"), name)])
            return Draft(node.symbol, None, [Draft(child.symbol, child.token)])
        if kids and script.node(kids[0]).symbol.name.startswith(NUM_PREFIX):
            child = script.node(kids[0])
            value = child.symbol.name[len(NUM_PREFIX):]
            return Draft(node.symbol, None, [Draft(self.host.symbol("Num"), value)])
        return Draft(node.symbol, node.token, [self.materialize(script, c, ctx) for c in kids])

    def apply(self, script: Ast, ctx: EditContext) -> Ast:
        """Apply the script; the result is renumbered and re-parseable.

        NodeID references (both modify targets and copy sources) always refer
        to the pre-application ids of ctx.program, no matter how many edits
        precede them in the script.
        """
        violations = self.validate(script, ctx)
        if violations:
            raise EditError(violations)
        program = ctx.program
        drafts: dict[int, Draft] = {}
        parents: dict[Draft, Draft | None] = {}

        def build(node_id: int, parent: Draft | None) -> Draft:
            n = program.node(node_id)
            d = Draft(n.symbol, n.token)
            drafts[node_id] = d
            parents[d] = parent
            d.children = [build(c, d) for c in n.children]
            return d

        root = build(program.root, None)

        def replace(old: Draft, new: Draft):
            parent = parents[old]
            parent.children[parent.children.index(old)] = new
            parents[new] = parent

        for item in self.edit_items(script):
            inode = script.node(item)
            if inode.symbol == self.insert:
                stmt = self.materialize(script, inode.children[0], ctx)
                faulty = drafts[ctx.faulty_stmt]
                spine = parents[faulty]  # the Stmts node [faulty, rest]
                wrapper = Draft(spine.symbol, None, [stmt, spine])
                replace(spine, wrapper)
                parents[spine] = wrapper
            else:
                nid, gen = inode.children
                target = drafts[int(script.node(nid).token)]
                replace(target, self.materialize(script, gen, ctx))
        return freeze(root)


def derive_edit_grammar(
    host: Grammar,
    frequent_ids,
    frequent_literals=(),
    stmt_symbol: str = "Stmt",
    identifier_symbol: str = "HLIdentifier",
    identifier_leaf: str = "Ident",
    literal_parent: str = "Expr",
    literal_leaf: str = "Num",
) -> EditGrammar:
    """Mechanically derive the edit grammar from a host grammar.

    Identifier leaves become per-name productions of the identifier
    nonterminal (plus ``placeholder``); arbitrary-token literals likewise
    become per-value productions, since a rule-based decoder can only emit
    tokens that exist as rules. The identifier nonterminal gets no copy
    production: it stands for what is lexically a single token in the host
    language, and re-targeting it is the placeholder mechanism's job.
    """
    for name in (stmt_symbol, identifier_symbol):
        if host.symbols.get(name) is None or host.symbols[name].is_terminal:
            raise ValueError(f"host grammar has no designated nonterminal {name!r}")
    frequent_ids = tuple(frequent_ids)
    frequent_literals = tuple(str(v) for v in frequent_literals)

    edits, edit, insert, modify = map(nonterm, ["Edits", "Edit", "Insert", "Modify"])
    node_id, end = term(NODE_ID_SYMBOL), term("end")
    symbols = {s.name: s for s in (edits, edit, insert, modify, node_id, end)}
    for s in host.symbols.values():
        symbols[s.name] = s
    id_terms = {w: term(ID_PREFIX + w) for w in frequent_ids}
    lit_terms = {v: term(NUM_PREFIX + v) for v in frequent_literals}
    symbols.update({s.name: s for s in id_terms.values()})
    symbols.update({s.name: s for s in lit_terms.values()})

    host_nts = [s for s in host.symbols.values() if not s.is_terminal]
    ident = host.symbol(identifier_symbol)
    rules: list[tuple[Symbol, tuple[Symbol, ...], str]] = [
        (edits, (edit, edits), RULE_PLAIN),
        (edits, (end,), RULE_PLAIN),
        (edit, (insert,), RULE_PLAIN),
        (edit, (modify,), RULE_PLAIN),
        (insert, (host.symbol(stmt_symbol),), RULE_PLAIN),
    ]
    rules += [(modify, (node_id, x), RULE_LOCATE) for x in host_nts]
    dropped = {
        (identifier_symbol, (identifier_leaf,)),
        (identifier_symbol, ("placeholder",)),  # re-added below, placed with Rule 6
        (literal_parent, (literal_leaf,)),
    }
    for p in host.productions:
        shape = (p.lhs.name, tuple(s.name for s in p.rhs))
        if shape in dropped:
            continue
        rules.append((p.lhs, p.rhs, RULE_PLAIN))
    rules += [(x, (node_id,), RULE_COPY) for x in host_nts if x != ident]
    rules.append((ident, (symbols["placeholder"],), RULE_PLAIN))
    rules += [(ident, (id_terms[w],), RULE_PLAIN) for w in frequent_ids]
    rules += [(host.symbol(literal_parent), (lit_terms[v],), RULE_PLAIN) for v in frequent_literals]

    productions = [Production(i, lhs, tuple(rhs)) for i, (lhs, rhs, _) in enumerate(rules)]
    kinds = {i: kind for i, (_, _, kind) in enumerate(rules)}
    grammar = Grammar(symbols.values(), productions, edits)
    return EditGrammar(grammar, host, kinds, frequent_ids, frequent_literals)


# --- script construction helpers ---------------------------------------------


def make_script(eg: EditGrammar, items: list[Draft]) -> Ast:
    """Assemble Edit drafts into a terminated Edits script."""
    node = Draft(eg.edits, None, [Draft(eg.end, "end")])
    for item in reversed(items):
        node = Draft(eg.edits, None, [Draft(eg.edit, None, [item]), node])
    return freeze(node)


def insert_item(eg: EditGrammar, stmt: Draft) -> Draft:
    return Draft(eg.insert, None, [stmt])


def modify_item(eg: EditGrammar, target_id: int, gen: Draft) -> Draft:
    return Draft(eg.modify, None, [Draft(eg.node_id, str(target_id)), gen])


def copy_of(eg: EditGrammar, symbol: Symbol, source_id: int) -> Draft:
    return Draft(symbol, None, [Draft(eg.node_id, str(source_id))])


# --- random well-formed scripts (fuzzing support) -----------------------------


class ScriptFuzzer:
    """Draws random valid edit scripts for a context; apply() must succeed on
    everything this produces."""

    def __init__(self, eg: EditGrammar, rng: random.Random, copy_prob: float = 0.3,
                 placeholder_prob: float = 0.3, max_depth: int = 6):
        self.eg = eg
        self.rng = rng
        self.copy_prob = copy_prob
        self.placeholder_prob = placeholder_prob
        self.max_depth = max_depth
        self._min_cost = self._minimal_costs()

    def _minimal_costs(self) -> dict[str, int]:
        g = self.eg.grammar
        cost = {s.name: 1 for s in g.symbols.values() if s.is_terminal}
        changed = True
        while changed:
            changed = False
            for p in g.productions:
                if self.eg.kind(p) != RULE_PLAIN:
                    continue
                if all(s.name in cost for s in p.rhs):
                    c = 1 + sum(cost[s.name] for s in p.rhs)
                    if c < cost.get(p.lhs.name, 1 << 30):
                        cost[p.lhs.name] = c
                        changed = True
        return cost

    def _plain_productions(self, symbol: Symbol) -> list[Production]:
        return [
            p
            for p in self.eg.grammar.productions_for(symbol)
            if self.eg.kind(p) == RULE_PLAIN
        ]

    def gen_symbol(self, symbol: Symbol, ctx: EditContext, depth: int) -> Draft:
        eg = self.eg
        if symbol.is_terminal:
            return Draft(symbol, eg.canonical_token(symbol))
        if symbol.name in eg.copy_production and self.rng.random() < self.copy_prob:
            sources = enumerate_copyable(ctx, eg.host.symbol(symbol.name))
            if sources:
                return copy_of(eg, symbol, self.rng.choice(sources))
        options = self._plain_productions(symbol)
        if symbol == eg.identifier:
            non_ph = [p for p in options if p.rhs[0].name != "placeholder"]
            if non_ph and self.rng.random() >= self.placeholder_prob:
                options = non_ph
        if depth <= 0:
            best = min(
                1 + sum(self._min_cost.get(s.name, 1 << 30) for s in p.rhs)
                for p in options
            )
            options = [
                p
                for p in options
                if 1 + sum(self._min_cost.get(s.name, 1 << 30) for s in p.rhs) == best
            ]
        p = self.rng.choice(options)
        return Draft(symbol, None, [self.gen_symbol(s, ctx, depth - 1) for s in p.rhs])

    def random_script(self, ctx: EditContext) -> Ast:
        eg = self.eg
        items = []
        roll = self.rng.random()
        with_insert = roll < 0.45
        with_modify = roll >= 0.25
        if with_insert:
            items.append(insert_item(eg, self.gen_symbol(eg.stmt, ctx, self.max_depth)))
        if with_modify:
            target = self.rng.choice(enumerate_modifiable(ctx))
            symbol = ctx.program.node(target).symbol
            items.append(modify_item(eg, target, self.gen_symbol(symbol, ctx, self.max_depth)))
        return make_script(eg, items)

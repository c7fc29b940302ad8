"""Training data construction: reference edit scripts from program pairs,
identifier abstraction, synthetic corpora, and the dataset format.

A (buggy, fixed) pair is usable when the two programs differ in exactly one
statement (a modify) or the fixed program has exactly one extra statement (an
insert). The reference script picks the smallest replaceable subtree, rewrites
sub-subtrees that already occur in the surrounding method as copy operations
(largest match first, earliest source on ties), and abstracts identifiers that
are rare in the training set to placeholders, recording the concrete names so
the extraction can be replayed exactly.
"""

from __future__ import annotations

import hashlib
import json
import random
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property

from .edits import (
    EditContext,
    EditGrammar,
    RULE_COPY,
    context_for,
    copy_of,
    derive_edit_grammar,
    enumerate_copyable,
    insert_item,
    make_script,
    modify_item,
)
from .grammar import (
    Ast,
    Draft,
    freeze,
    structural_equal,
    subtree_size,
    subtrees_equal,
)
from .minilang import (
    TestCase,
    collect_identifiers,
    enclosing_statement,
    parse,
    run,
    to_source,
    typechecks,
)
from .minilang.interp import call_entry
from .minilang.lang import GRAMMAR, flatten_stmts, production_of, statement_list
from .placeholders import find_placeholders, substitute

IDENTICAL = "identical"
MULTI_HUNK = "multi-hunk"
INSERT_AT_END = "insert-at-end"
OUT_OF_VOCAB_LITERAL = "literal-not-frequent"
TOO_MANY_PLACEHOLDERS = "needs-multiple-placeholders"
ROUND_TRIP_FAILED = "round-trip-failed"


class PairRejected(Exception):
    def __init__(self, reason: str, detail: str = ""):
        super().__init__(reason if not detail else f"{reason}: {detail}")
        self.reason = reason


@dataclass(frozen=True)
class PatchPair:
    id: str
    buggy: Ast
    fixed: Ast
    tests: tuple[TestCase, ...] = ()


@dataclass(frozen=True)
class Hunk:
    kind: str  # 'modify' | 'insert'
    faulty_stmt: int  # Stmt id in buggy (the successor statement for inserts)
    fixed_stmt: int  # matching Stmt id in fixed, or the inserted statement


def diff_single_hunk(buggy: Ast, fixed: Ast) -> Hunk:
    """Locate the unique modified/inserted statement, or reject the pair."""
    if structural_equal(buggy, fixed):
        raise PairRejected(IDENTICAL)
    hunks: list[Hunk] = []

    def add(h: Hunk):
        if h in hunks:
            return
        hunks.append(h)
        if len(hunks) > 1:
            raise PairRejected(MULTI_HUNK)

    def mismatch(b_id: int, f_id: int):
        stmt = enclosing_statement(buggy, b_id)
        if stmt is None:
            raise PairRejected(MULTI_HUNK, "difference outside any statement")
        add(Hunk("modify", stmt, enclosing_statement(fixed, f_id)))

    def walk(b_id: int, f_id: int):
        nb, nf = buggy.node(b_id), fixed.node(f_id)
        if nb.symbol != nf.symbol:
            mismatch(b_id, f_id)
            return
        if nb.symbol.is_terminal:
            if nb.token != nf.token:
                mismatch(b_id, f_id)
            return
        if nb.symbol.name == "Stmts":
            walk_stmt_lists(flatten_stmts(buggy, b_id), flatten_stmts(fixed, f_id))
            return
        kb, kf = nb.children, nf.children
        if len(kb) != len(kf):
            mismatch(b_id, f_id)
            return
        for cb, cf in zip(kb, kf):
            walk(cb, cf)

    def walk_stmt_lists(la: list[int], lb: list[int]):
        if len(la) == len(lb):
            for sa, sb in zip(la, lb):
                walk(sa, sb)
            return
        if len(la) + 1 != len(lb):
            raise PairRejected(MULTI_HUNK, "statement count differs by more than one")
        for k in range(len(la) + 1):
            prefix = all(subtrees_equal(buggy, la[i], fixed, lb[i]) for i in range(k))
            suffix = all(
                subtrees_equal(buggy, la[i], fixed, lb[i + 1]) for i in range(k, len(la))
            )
            if prefix and suffix:
                if k == len(la):
                    raise PairRejected(INSERT_AT_END)
                add(Hunk("insert", la[k], lb[k]))
                return
        raise PairRejected(MULTI_HUNK, "no single insertion point")

    walk(buggy.root, fixed.root)
    if not hunks:
        raise PairRejected(IDENTICAL)
    return hunks[0]


@dataclass(frozen=True)
class Step:
    """One expansion decision of the reference script."""

    node: int  # script node expanded at this step
    provider: str  # 'rule' | 'copy' | 'locate'
    target: int  # production id, or referenced program node id
    path: tuple[str, ...]  # symbol names from the script root to `node`
    parent: int  # index of the rule-sequence entry that created `node`
    left_sibling: int | None


@dataclass(frozen=True)
class TrainingExample:
    id: str
    ctx: EditContext
    script: Ast
    placeholder_values: tuple[str, ...]
    kind: str  # 'modify' | 'insert'
    eg: EditGrammar = field(repr=False)

    @cached_property
    def steps(self) -> tuple[Step, ...]:
        return tuple(linearize_script(self.eg, self.script))


def linearize_script(eg: EditGrammar, script: Ast) -> list[Step]:
    """The leftmost depth-first expansion sequence that rebuilds the script.

    The rule-entry space starts with a synthetic entry 0 for the start rule
    that creates the script root, so step k corresponds to entry k+1.
    """
    steps: list[Step] = []
    entry_of_node: dict[int, int] = {script.root: 0}
    path_names: dict[int, tuple[str, ...]] = {}

    def path_of(node_id: int) -> tuple[str, ...]:
        if node_id not in path_names:
            n = script.node(node_id)
            if n.parent is None:
                path_names[node_id] = (n.symbol.name,)
            else:
                path_names[node_id] = path_of(n.parent) + (n.symbol.name,)
        return path_names[node_id]

    # pre-order over nonterminal nodes = leftmost derivation order
    children_of_entry: dict[int, list[int]] = {}
    for n in script.nodes:
        if n.symbol.is_terminal:
            continue
        entry = len(steps) + 1
        if n.symbol == eg.modify:
            provider, target = "locate", int(script.node(n.children[0]).token)
        elif len(n.children) == 1 and script.node(n.children[0]).symbol == eg.node_id:
            provider, target = "copy", int(script.node(n.children[0]).token)
        else:
            provider, target = "rule", eg.production_of(script, n.id).id
        parent_entry = entry_of_node[n.id]
        siblings = children_of_entry.setdefault(parent_entry, [])
        left = siblings[-1] if siblings else None
        siblings.append(entry)
        steps.append(Step(n.id, provider, target, path_of(n.id), parent_entry, left))
        for c in n.children:
            entry_of_node[c] = entry
    return steps


# --- reference script extraction ---------------------------------------------


def _smallest_modify_target(buggy: Ast, fixed: Ast, hunk: Hunk) -> tuple[int, int]:
    a, b = hunk.faulty_stmt, hunk.fixed_stmt
    while True:
        ka, kb = buggy.node(a).children, fixed.node(b).children
        if len(ka) != len(kb):
            return a, b
        diffs = [i for i in range(len(ka)) if not subtrees_equal(buggy, ka[i], fixed, kb[i])]
        if len(diffs) != 1:
            return a, b
        ca, cb = ka[diffs[0]], kb[diffs[0]]
        if (
            buggy.node(ca).symbol != fixed.node(cb).symbol
            or buggy.node(ca).symbol.is_terminal
            or subtree_size(buggy, ca) <= 1
        ):
            return a, b
        a, b = ca, cb


class _EditFormBuilder:
    def __init__(self, eg: EditGrammar, ctx: EditContext, copy_enabled: bool):
        self.eg = eg
        self.ctx = ctx
        self.copy_enabled = copy_enabled
        self.placeholder_values: list[str] = []

    def build(self, fixed: Ast, node_id: int) -> Draft:
        eg = self.eg
        node = fixed.node(node_id)
        if node.symbol.is_terminal:
            return Draft(node.symbol, node.token)
        if (
            self.copy_enabled
            and node.symbol.name in eg.copy_production
            and subtree_size(fixed, node_id) > 1
        ):
            for src in enumerate_copyable(self.ctx, node.symbol):
                if subtrees_equal(self.ctx.program, src, fixed, node_id):
                    return copy_of(eg, node.symbol, src)
        if node.symbol == eg.identifier:
            child = fixed.node(node.children[0])
            if child.symbol.name == "placeholder":
                raise PairRejected(ROUND_TRIP_FAILED, "placeholder in fixed program")
            name = child.token
            if name in eg.frequent_ids:
                sym = eg.grammar.symbol(f"id:{name}")
                return Draft(node.symbol, None, [Draft(sym, name)])
            self.placeholder_values.append(name)
            if len(self.placeholder_values) > 1:
                raise PairRejected(TOO_MANY_PLACEHOLDERS)
            ph = eg.grammar.symbol("placeholder")
            return Draft(node.symbol, None, [Draft(ph, "placeholder")])
        if len(node.children) == 1 and fixed.node(node.children[0]).symbol.name == "Num":
            value = fixed.node(node.children[0]).token
            if value not in eg.frequent_literals:
                raise PairRejected(OUT_OF_VOCAB_LITERAL, value)
            sym = eg.grammar.symbol(f"num:{value}")
            return Draft(node.symbol, None, [Draft(sym, value)])
        return Draft(node.symbol, None, [self.build(fixed, c) for c in node.children])


def reinstantiate(patched: Ast, values) -> Ast:
    """Replace placeholders with the recorded concrete identifiers, in order."""
    out = patched
    for value in values:
        holes = find_placeholders(out)
        out = substitute(out, holes[0], value)
    return out


def extract_oracle(pair: PatchPair, eg: EditGrammar, copy_enabled: bool = True) -> TrainingExample:
    """Derive the reference edit script for an accepted pair.

    Raises PairRejected when the pair is not a single-statement change or the
    fix is not representable in the edit grammar.
    """
    hunk = diff_single_hunk(pair.buggy, pair.fixed)
    ctx = context_for(pair.buggy, hunk.faulty_stmt)
    builder = _EditFormBuilder(eg, ctx, copy_enabled)
    if hunk.kind == "modify":
        target, fixed_node = _smallest_modify_target(pair.buggy, pair.fixed, hunk)
        gen = builder.build(pair.fixed, fixed_node)
        script = make_script(eg, [modify_item(eg, target, gen)])
    else:
        gen = builder.build(pair.fixed, hunk.fixed_stmt)
        script = make_script(eg, [insert_item(eg, gen)])
    example = TrainingExample(
        pair.id, ctx, script, tuple(builder.placeholder_values), hunk.kind, eg
    )
    patched = eg.apply(script, ctx)
    if not structural_equal(reinstantiate(patched, example.placeholder_values), pair.fixed):
        raise PairRejected(ROUND_TRIP_FAILED, pair.id)
    return example


def extract_many(pairs, eg: EditGrammar, copy_enabled: bool = True):
    """Extract every pair; returns (examples, Counter of rejection reasons)."""
    examples, rejects = [], Counter()
    for pair in pairs:
        try:
            examples.append(extract_oracle(pair, eg, copy_enabled))
        except PairRejected as r:
            rejects[r.reason] += 1
    return examples, rejects


# --- token frequencies and grammar derivation ---------------------------------


def token_frequencies(pairs) -> tuple[Counter, Counter]:
    ids, lits = Counter(), Counter()
    for pair in pairs:
        for tree in (pair.buggy, pair.fixed):
            for n in tree.nodes:
                if n.symbol.name == "Ident":
                    ids[n.token] += 1
                elif n.symbol.name == "Num":
                    lits[n.token] += 1
    return ids, lits


def frequent_tokens(pairs, threshold: int = 10) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Identifiers/literals occurring at least `threshold` times in the corpus.

    10 suits desk-scale corpora of a few thousand pairs; a full-scale corpus
    (hundreds of thousands of pairs) would use 100.
    """
    ids, lits = token_frequencies(pairs)
    keep_ids = tuple(sorted(w for w, c in ids.items() if c >= threshold))
    keep_lits = tuple(sorted((v for v, c in lits.items() if c >= threshold), key=lambda v: (len(v), v)))
    return keep_ids, keep_lits


def grammar_for_corpus(pairs, threshold: int = 10) -> EditGrammar:
    ids, lits = frequent_tokens(pairs, threshold)
    return derive_edit_grammar(GRAMMAR, ids, lits)


# --- synthetic corpora ---------------------------------------------------------

MUTATION_KINDS = ("swap-op", "literal", "swap-ident", "swap-call", "argument", "delete-stmt")
SINGLE_TOKEN_KINDS = ("swap-op", "literal", "swap-ident", "swap-call")

_OP_FAMILIES = [["+", "-", "*", "/", "%"], ["<", "<=", ">", ">="], ["==", "!="], ["&&", "||"]]
_OP_FAMILY = {op: family for family in _OP_FAMILIES for op in family}


def _replace_node(tree: Ast, node_id: int, repl: Draft) -> Ast:
    def build(i: int) -> Draft:
        if i == node_id:
            return repl
        n = tree.node(i)
        return Draft(n.symbol, n.token, [build(c) for c in n.children])

    return freeze(build(tree.root))


def _delete_stmt(tree: Ast, stmt_id: int) -> Ast:
    spine = tree.node(stmt_id).parent  # Stmts node [stmt, rest]
    rest = tree.node(spine).children[1]

    def build(i: int) -> Draft:
        if i == spine:
            return build(rest)
        n = tree.node(i)
        return Draft(n.symbol, n.token, [build(c) for c in n.children])

    return freeze(build(tree.root))


class Mutator:
    """Inverse-edit mutations over well-typed programs; buggy = mutate(fixed)."""

    def __init__(self, rng: random.Random, kinds=MUTATION_KINDS):
        self.rng = rng
        self.kinds = kinds

    def mutate(self, fixed: Ast) -> Ast | None:
        kind = self.rng.choice(self.kinds)
        out = getattr(self, kind.replace("-", "_"))(fixed)
        if out is None or structural_equal(out, fixed) or not typechecks(out):
            return None
        return out

    def _binary_exprs(self, tree: Ast) -> list[int]:
        return [
            n.id
            for n in tree.nodes
            if n.symbol.name == "Expr" and len(n.children) == 3
        ]

    def swap_op(self, tree: Ast) -> Ast | None:
        nodes = self._binary_exprs(tree)
        if not nodes:
            return None
        expr = self.rng.choice(nodes)
        op_leaf = tree.node(tree.children(expr)[1])
        family = [op for op in _OP_FAMILY[op_leaf.symbol.name] if op != op_leaf.symbol.name]
        op = self.rng.choice(family)
        sym = GRAMMAR.symbol(op)
        return _replace_node(tree, op_leaf.id, Draft(sym, op))

    def literal(self, tree: Ast) -> Ast | None:
        nums = [n.id for n in tree.nodes if n.symbol.name == "Num"]
        if not nums:
            return None
        leaf_id = self.rng.choice(nums)
        old = int(tree.node(leaf_id).token)
        new = self.rng.choice([v for v in range(10) if v != old])
        return _replace_node(tree, leaf_id, Draft(GRAMMAR.symbol("Num"), str(new)))

    def _swap_use(self, tree: Ast, uses: list[int], want_func: bool) -> Ast | None:
        self.rng.shuffle(uses)
        for hl in uses:
            stmt = enclosing_statement(tree, hl)
            if stmt is None:
                continue
            name = tree.node(tree.children(hl)[0]).token
            bindings = collect_identifiers(tree, stmt)
            current = next((b for b in bindings if b[0] == name), None)
            if current is None:
                continue
            same_type = [
                b[0]
                for b in bindings
                if b[0] != name and b[1] == current[1] and (b[2] == "func") == want_func
            ]
            if not same_type:
                continue
            repl = self.rng.choice(same_type)
            ident = Draft(GRAMMAR.symbol("Ident"), repl)
            return _replace_node(tree, tree.children(hl)[0], ident)
        return None

    def swap_ident(self, tree: Ast) -> Ast | None:
        # variable uses in expression position
        uses = [
            n.children[0]
            for n in tree.nodes
            if n.symbol.name == "Expr"
            and len(n.children) == 1
            and tree.node(n.children[0]).symbol.name == "HLIdentifier"
        ]
        return self._swap_use(tree, uses, want_func=False)

    def swap_call(self, tree: Ast) -> Ast | None:
        uses = [
            n.children[0]
            for n in tree.nodes
            if n.symbol.name == "Call"
        ]
        return self._swap_use(tree, uses, want_func=True)

    def argument(self, tree: Ast) -> Ast | None:
        # replace one call argument with a literal or same-type variable
        args = []
        for n in tree.nodes:
            if n.symbol.name == "Args" and n.children:
                args.append(n.children[0])
        if not args:
            return None
        expr = self.rng.choice(args)
        stmt = enclosing_statement(tree, expr)
        ints = [b[0] for b in collect_identifiers(tree, stmt) if b[1] == "int"] if stmt else []
        if ints and self.rng.random() < 0.5:
            name = self.rng.choice(ints)
            hl = Draft(GRAMMAR.symbol("HLIdentifier"), None, [Draft(GRAMMAR.symbol("Ident"), name)])
            repl = Draft(GRAMMAR.symbol("Expr"), None, [hl])
        else:
            repl = Draft(GRAMMAR.symbol("Expr"), None, [Draft(GRAMMAR.symbol("Num"), str(self.rng.randrange(10)))])
        return _replace_node(tree, expr, repl)

    def delete_stmt(self, tree: Ast) -> Ast | None:
        candidates = []
        for n in tree.nodes:
            if n.symbol.name != "Stmt":
                continue
            siblings = statement_list(tree, n.id)
            if siblings and siblings[-1] != n.id:
                candidates.append(n.id)
        if not candidates:
            return None
        return _delete_stmt(tree, self.rng.choice(candidates))


def mutate_corpus(seeds, n: int, seed: int, kinds=MUTATION_KINDS, max_tries_factor: int = 60):
    """Generate n (buggy, fixed) pairs by mutating seed programs."""
    rng = random.Random(seed)
    mutator = Mutator(rng, kinds)
    pairs: list[PatchPair] = []
    tries = 0
    while len(pairs) < n:
        tries += 1
        if tries > max_tries_factor * max(n, 1):
            raise RuntimeError(f"mutation stalled after {tries} attempts ({len(pairs)}/{n})")
        fixed = seeds[rng.randrange(len(seeds))]
        buggy = mutator.mutate(fixed)
        if buggy is None:
            continue
        try:
            diff_single_hunk(buggy, fixed)
        except PairRejected:
            continue
        pairs.append(PatchPair(f"pair{len(pairs):05d}", buggy, fixed))
    return pairs


def attach_tests(pair: PatchPair, seed: int, n_tests: int = 3, max_tries: int = 40) -> PatchPair | None:
    """Give a pair a test suite the fixed program passes and the buggy fails."""
    rng = random.Random(seed)
    tests: list[TestCase] = []
    seen_args = set()
    for _ in range(max_tries):
        if len(tests) >= max(n_tests, 3) and any(
            not run(pair.buggy, t).passed for t in tests
        ):
            break
        args = (rng.randrange(0, 10), rng.randrange(0, 10))
        if args in seen_args:
            continue
        seen_args.add(args)
        value, failure = call_entry(pair.fixed, "main", args)
        if failure is not None:
            continue
        tests.append(TestCase("main", args, value))
    if len(tests) < n_tests or all(run(pair.buggy, t).passed for t in tests):
        return None
    return PatchPair(pair.id, pair.buggy, pair.fixed, tuple(tests))


# --- dataset files -------------------------------------------------------------


def tested_corpus(seeds, n: int, seed: int, kinds=MUTATION_KINDS, n_tests: int = 3):
    """n pairs, each carrying a test suite the buggy program fails."""
    out: list[PatchPair] = []
    rounds = 0
    while len(out) < n:
        if rounds > 80:
            raise RuntimeError(f"test attachment stalled ({len(out)}/{n})")
        batch = mutate_corpus(seeds, max(n, 8), seed + 7919 * rounds, kinds)
        for k, pair in enumerate(batch):
            tested = attach_tests(pair, seed=seed + 104729 * rounds + k, n_tests=n_tests)
            if tested is not None:
                out.append(PatchPair(f"bug{len(out):05d}", tested.buggy, tested.fixed, tested.tests))
                if len(out) >= n:
                    break
        rounds += 1
    return out


def save_pairs(path, pairs):
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            record = {
                "id": pair.id,
                "buggy_source": to_source(pair.buggy),
                "fixed_source": to_source(pair.fixed),
            }
            if pair.tests:
                record["tests"] = [
                    {"entry": t.entry, "args": list(t.args), "expect": t.expect}
                    for t in pair.tests
                ]
            fh.write(json.dumps(record) + "\n")


def load_pairs(path) -> list[PatchPair]:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            tests = tuple(
                TestCase(t["entry"], tuple(t["args"]), t["expect"])
                for t in record.get("tests", ())
            )
            pairs.append(
                PatchPair(record["id"], parse(record["buggy_source"]), parse(record["fixed_source"]), tests)
            )
    return pairs


def split_pairs(pairs, val_fraction: float = 0.2):
    """Stable train/validation split keyed on a hash of the pair id."""
    train, val = [], []
    cut = int(val_fraction * 100)
    for pair in pairs:
        digest = hashlib.sha256(pair.id.encode()).digest()
        (val if digest[0] % 100 < cut else train).append(pair)
    return train, val

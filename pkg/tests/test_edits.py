import random

import pytest

from editrepair.edits import (
    EditError,
    RULE_COPY,
    RULE_PLAIN,
    ScriptFuzzer,
    context_for,
    copy_of,
    derive_edit_grammar,
    enumerate_copyable,
    enumerate_modifiable,
    insert_item,
    make_script,
    modify_item,
)
from editrepair.grammar import (
    Draft,
    freeze,
    from_sexpr,
    structural_equal,
    subtree,
    subtree_size,
    to_sexpr,
)
from editrepair.minilang import parse, statement_nodes, to_source
from editrepair.minilang.lang import GRAMMAR

SRC = """\
fn main(a: int, b: int) -> int {
    var x: int = a + 1;
    x = x * 2;
    return x + b;
}
"""


@pytest.fixture()
def ctx():
    prog = parse(SRC)
    return context_for(prog, statement_nodes(prog)[1])


@pytest.fixture()
def eg():
    return derive_edit_grammar(GRAMMAR, ["a", "b"], ["0", "1", "2", "3"])


def host_nonterminals():
    return [s for s in GRAMMAR.symbols.values() if not s.is_terminal]


def test_insert_production_exists(eg):
    insert = eg.grammar.symbol("Insert")
    prods = eg.grammar.productions_for(insert)
    assert len(prods) == 1
    assert [s.name for s in prods[0].rhs] == ["Stmt"]


def test_copy_production_per_host_nonterminal(eg):
    # one copy production per host nonterminal; the identifier nonterminal is
    # excluded because it stands for a single lexical token
    expected = {s.name for s in host_nonterminals()} - {"HLIdentifier"}
    assert set(eg.copy_production) == expected
    for name, prod in eg.copy_production.items():
        assert prod.lhs.name == name
        assert [s.name for s in prod.rhs] == ["NodeID"]
        assert eg.kind(prod) == RULE_COPY


def test_identifier_productions_rule6(eg):
    prods = eg.grammar.productions_for(eg.identifier)
    assert len(prods) == 3  # placeholder plus the two frequent identifiers
    rhs = {p.rhs[0].name for p in prods}
    assert rhs == {"placeholder", "id:a", "id:b"}
    assert all(eg.kind(p) == RULE_PLAIN for p in prods)


def test_modify_production_per_host_nonterminal(eg):
    assert set(eg.modify_production) == {s.name for s in host_nonterminals()}


def test_production_ids_dense(eg):
    assert [p.id for p in eg.grammar.productions] == list(range(eg.grammar.num_productions))


def test_missing_designated_nonterminal():
    with pytest.raises(ValueError):
        derive_edit_grammar(GRAMMAR, [], [], stmt_symbol="NoSuchThing")


def test_enumerate_modifiable(ctx):
    prog = ctx.program
    got = enumerate_modifiable(ctx)
    want = [
        i
        for i in range(ctx.faulty_stmt, ctx.faulty_stmt + subtree_size(prog, ctx.faulty_stmt))
        if not prog.node(i).symbol.is_terminal and subtree_size(prog, i) > 1
    ]
    assert got == want
    assert got == sorted(got)
    assert all(1 <= i <= len(prog) for i in got)


def test_enumerate_copyable(ctx):
    stmt_sym = GRAMMAR.symbol("Stmt")
    got = enumerate_copyable(ctx, stmt_sym)
    assert len(got) == 3  # all three statements of the method
    assert all(ctx.program.node(i).symbol == stmt_sym for i in got)
    assert enumerate_copyable(ctx, GRAMMAR.symbol("While")) == []
    with pytest.raises(ValueError):
        enumerate_copyable(ctx, GRAMMAR.symbol("Num"))


def test_validate_empty_script(eg, ctx):
    assert eg.validate(make_script(eg, []), ctx) == []


def test_validate_modify_terminal_target(eg, ctx):
    # point the modify at a terminal leaf inside the faulty statement
    leaf = next(
        i for i in enumerate_modifiable(ctx)
        for c in ctx.program.children(i)
        if ctx.program.node(c).symbol.is_terminal
    )
    term = next(
        c for c in ctx.program.children(leaf) if ctx.program.node(c).symbol.is_terminal
    )
    gen = Draft(ctx.program.node(term).symbol, "x")
    bad = make_script(eg, [Draft(eg.modify, None, [Draft(eg.node_id, str(term)), gen])])
    assert any("terminal" in v or "matches no production" in v for v in eg.validate(bad, ctx))


def test_validate_copy_symbol_mismatch(eg, ctx):
    stmt_source = enumerate_copyable(ctx, GRAMMAR.symbol("Stmt"))[0]
    expr_target = next(
        i for i in enumerate_modifiable(ctx) if ctx.program.node(i).symbol.name == "Expr"
    )
    gen = copy_of(eg, GRAMMAR.symbol("Expr"), stmt_source)  # Stmt subtree into Expr hole
    bad = make_script(eg, [modify_item(eg, expr_target, gen)])
    assert any("copy source" in v for v in eg.validate(bad, ctx))


def test_apply_empty_script_is_identity(eg, ctx):
    out = eg.apply(make_script(eg, []), ctx)
    assert structural_equal(out, ctx.program)


def test_apply_modify_expression(eg):
    prog = parse("fn main(){ return 1 + 1; }")
    ctx = context_for(prog, statement_nodes(prog)[0])
    target = next(
        i for i in enumerate_modifiable(ctx)
        if prog.node(i).symbol.name == "Expr" and len(prog.children(i)) == 3
    )
    gen = Draft(GRAMMAR.symbol("Expr"), None, [
        Draft(GRAMMAR.symbol("Expr"), None, [Draft(eg.grammar.symbol("num:2"), "2")]),
        Draft(GRAMMAR.symbol("*"), "*"),
        Draft(GRAMMAR.symbol("Expr"), None, [Draft(eg.grammar.symbol("num:3"), "3")]),
    ])
    out = eg.apply(make_script(eg, [modify_item(eg, target, gen)]), ctx)
    assert "return 2 * 3;" in to_source(out)


def test_apply_insert_duplicates_statement(eg, ctx):
    script = make_script(eg, [insert_item(eg, copy_of(eg, GRAMMAR.symbol("Stmt"), ctx.faulty_stmt))])
    out = eg.apply(script, ctx)
    text = to_source(out)
    assert text.count("x = x * 2;") == 2
    reparsed = parse(text)
    assert len(statement_nodes(reparsed)) == len(statement_nodes(ctx.program)) + 1


def test_apply_insert_goes_before_faulty_statement(eg, ctx):
    gen = Draft(GRAMMAR.symbol("Stmt"), None, [
        Draft(GRAMMAR.symbol("Return"), None, [
            Draft(GRAMMAR.symbol("Expr"), None, [Draft(eg.grammar.symbol("num:0"), "0")]),
        ]),
    ])
    out = eg.apply(make_script(eg, [insert_item(eg, gen)]), ctx)
    lines = [ln.strip() for ln in to_source(out).splitlines()]
    assert lines.index("return 0;") < lines.index("x = x * 2;")


def test_apply_rejects_invalid_script(eg, ctx):
    bad = make_script(eg, [modify_item(eg, 10_000, Draft(GRAMMAR.symbol("Expr"), None, [
        Draft(eg.grammar.symbol("num:0"), "0")
    ]))])
    with pytest.raises(EditError):
        eg.apply(bad, ctx)


def test_apply_modify_equal_subtree_is_identity(eg, ctx):
    target = enumerate_modifiable(ctx)[1]

    def as_draft(tree, j):
        m = tree.node(j)
        return Draft(m.symbol, m.token, [as_draft(tree, c) for c in m.children])

    # regenerate the exact replaced subtree via a copy of itself
    gen = copy_of(eg, ctx.program.node(target).symbol, target)
    out = eg.apply(make_script(eg, [modify_item(eg, target, gen)]), ctx)
    assert structural_equal(out, ctx.program)


def test_apply_preserves_everything_outside(eg, ctx):
    fz = ScriptFuzzer(eg, random.Random(0))
    script = fz.random_script(ctx)
    out = eg.apply(script, ctx)
    # the other two statements survive verbatim
    src = to_source(out, allow_placeholder=True)
    assert "var x: int = a + 1;" in src
    assert "return x + b;" in src


def test_theorem1_fuzz_small(eg, ctx):
    fz = ScriptFuzzer(eg, random.Random(7))
    for _ in range(150):
        script = fz.random_script(ctx)
        assert eg.validate(script, ctx) == []
        out = eg.apply(script, ctx)
        text = to_source(out, allow_placeholder=True)
        parse(text.replace("placeholder", "ph_0"))


def test_multi_edit_scripts_apply_in_order(eg, ctx):
    gen1 = Draft(GRAMMAR.symbol("Stmt"), None, [
        Draft(GRAMMAR.symbol("Return"), None, [
            Draft(GRAMMAR.symbol("Expr"), None, [Draft(eg.grammar.symbol("num:1"), "1")]),
        ]),
    ])
    target = next(
        i for i in enumerate_modifiable(ctx) if ctx.program.node(i).symbol.name == "Expr"
    )
    gen2 = Draft(GRAMMAR.symbol("Expr"), None, [Draft(eg.grammar.symbol("num:3"), "3")])
    script = make_script(eg, [insert_item(eg, gen1), modify_item(eg, target, gen2)])
    out = eg.apply(script, ctx)
    text = to_source(out)
    assert "return 1;" in text and "x = 3;" in text


def test_script_sexpr_roundtrip(eg, ctx):
    fz = ScriptFuzzer(eg, random.Random(3))
    for _ in range(30):
        script = fz.random_script(ctx)
        back = from_sexpr(to_sexpr(script), eg.grammar)
        assert structural_equal(back, script)
        assert "(NodeID " in to_sexpr(script) or "(end" in to_sexpr(script)


def test_nodeid_rendering(eg, ctx):
    script = make_script(eg, [insert_item(eg, copy_of(eg, GRAMMAR.symbol("Stmt"), ctx.faulty_stmt))])
    text = to_sexpr(script)
    assert f"(NodeID {ctx.faulty_stmt})" in text  # integer, unquoted

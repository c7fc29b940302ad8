import random

import pytest

from editrepair.grammar import Draft, freeze, structural_equal, subtree
from editrepair.minilang import (
    CoverageRecord,
    ParseError,
    PrintError,
    collect_identifiers,
    dump_test_suite,
    enclosing_statement,
    load_test_suite,
    parse,
    run,
    statement_list,
    statement_nodes,
    to_source,
    typecheck,
    typechecks,
)
from editrepair.minilang import TestCase as MiniTest
from editrepair.minilang.lang import GRAMMAR, PLACEHOLDER, STMT
from editrepair.minilang.randprog import ProgramGenerator


def test_parse_hand_checked_tree():
    t = parse("fn main(){ return 1; }")
    names = [n.symbol.name for n in t.nodes]
    assert names[0] == "Program"
    assert names[1] == "Func"
    assert names.count("Func") == 1
    stmts = statement_nodes(t)
    assert len(stmts) == 1
    ret = t.node(t.children(stmts[0])[0])
    assert ret.symbol.name == "Return"


def test_parse_missing_expression_is_syntax_error():
    with pytest.raises(ParseError) as err:
        parse("fn f(){ return ; }")
    assert err.value.line == 1 and err.value.col > 0


def test_parse_reports_line_and_column():
    with pytest.raises(ParseError) as err:
        parse("fn main() {\n  var x: int = $;\n}")
    assert err.value.line == 2


def test_roundtrip_on_corpus():
    gen = ProgramGenerator(random.Random(5))
    for _ in range(120):
        t = gen.program()
        assert structural_equal(parse(to_source(parse(to_source(t)))), parse(to_source(t)))


def test_print_single_return():
    t = parse("fn main() -> int { return 1 + 2; }")
    assert "return 1 + 2;" in to_source(t)


def test_print_refuses_placeholder():
    t = parse("fn main(){ return 1; }")
    hl = next(n.id for n in t.nodes if n.symbol.name == "HLIdentifier")

    def swap(node_id):
        def build(i):
            n = t.node(i)
            if i == t.children(hl)[0]:
                return Draft(PLACEHOLDER, "placeholder")
            return Draft(n.symbol, n.token, [build(c) for c in n.children])

        return freeze(build(t.root))

    broken = swap(hl)
    with pytest.raises(PrintError):
        to_source(broken)
    assert "placeholder" in to_source(broken, allow_placeholder=True)


def test_precedence_printing_preserves_structure():
    t = parse("fn main(){ return (1 + 2) * (3 - 4); }")
    assert structural_equal(parse(to_source(t)), t)
    assert "(1 + 2) * (3 - 4)" in to_source(t)


def test_typecheck_ok():
    assert typecheck(parse("fn main(){ var x:int = 1; return x; }")) == []


def test_typecheck_unknown_identifier():
    diags = typecheck(parse("fn main(){ return y; }"))
    assert len(diags) == 1 and "unknown identifier 'y'" in diags[0].message


def test_typecheck_mismatch_rule_table():
    diags = typecheck(parse("fn main(){ var b:bool = 1 + true; return 0; }"))
    assert any("expected int" in d.message for d in diags)


def test_typecheck_operator_rules():
    cases = {
        "fn main(){ var b:bool = 1 < 2; return 0; }": True,
        "fn main(){ var b:bool = true && false; return 0; }": True,
        "fn main(){ var b:bool = !true; return 0; }": True,
        "fn main(){ var x:int = true + 1; return x; }": False,
        "fn main(){ var b:bool = 1 && 2; return 0; }": False,
        "fn main(){ if (1) { return 0; } return 1; }": False,
        "fn main() -> bool { return 1; }": False,
    }
    for src, ok in cases.items():
        assert typechecks(parse(src)) == ok, src


def test_typecheck_shadowing_and_duplicates():
    assert typechecks(parse("fn main(){ var x:int = 1; if (x < 2) { var x:bool = true; } return x; }"))
    assert not typechecks(parse("fn main(){ var x:int = 1; var x:int = 2; return x; }"))
    assert not typechecks(parse("fn f(){ return 0; }\nfn f(){ return 1; }"))


def test_run_pass_and_coverage():
    t = parse("fn main(){ return 2; }")
    rec = run(t, MiniTest("main", (), 2))
    assert rec.passed and rec.outcome == "pass"
    assert statement_nodes(t)[0] in rec.covered


def test_run_wrong_value():
    t = parse("fn main(){ return 2; }")
    rec = run(t, MiniTest("main", (), 3))
    assert not rec.passed and rec.outcome == "wrong-value"


def test_run_timeout():
    t = parse("fn main(){ while (true) { } return 1; }")
    rec = run(t, MiniTest("main", (), 1), fuel=10**5)
    assert rec.outcome == "timeout"


def test_run_division_by_zero():
    t = parse("fn main(a: int){ return 1 / a; }")
    rec = run(t, MiniTest("main", (0,), 1))
    assert rec.outcome == "runtime"


def test_run_bool_int_distinction():
    t = parse("fn main() -> int { return 1; }")
    assert not run(t, MiniTest("main", (), True)).passed
    t2 = parse("fn main() -> bool { return true; }")
    assert run(t2, MiniTest("main", (), True)).passed


def test_interpreter_determinism():
    gen = ProgramGenerator(random.Random(8))
    t = gen.program()
    test = MiniTest("main", (3, 4), 0)
    assert run(t, test) == run(t, test)


def test_coverage_branches():
    t = parse("fn main(a: int){ if (a < 0) { return 0; } return 1; }")
    stmts = statement_nodes(t)
    rec = run(t, MiniTest("main", (5,), 1))
    inner = [s for s in stmts if enclosing_statement(t, t.node(s).parent) is not None]
    assert all(s not in rec.covered for s in inner)  # the if-branch never ran


def test_collect_identifiers_params_and_functions():
    t = parse("fn main(a: int, b: int) -> int { return a; }")
    at = statement_nodes(t)[0]
    got = collect_identifiers(t, at)
    assert {(n, k) for n, _, k in got} == {("main", "func"), ("a", "param"), ("b", "param")}


def test_collect_identifiers_sees_earlier_declarations():
    t = parse("fn main(){ var x:int = 0; return x; }")
    first, second = statement_nodes(t)
    assert "x" not in [n for n, _, _ in collect_identifiers(t, first)]
    assert ("x", "int", "var") in collect_identifiers(t, second)


def test_collect_identifiers_excludes_sibling_blocks():
    t = parse(
        "fn main(a: int){ if (a < 0) { var inner:int = 1; } if (a > 0) { return a; } return 0; }"
    )
    if_stmts = [
        s for s in statement_nodes(t)
        if t.node(t.children(s)[0]).symbol.name == "If"
    ]
    second_if = if_stmts[1]
    ret_in_second = next(
        s for s in statement_nodes(t)
        if s != second_if and enclosing_statement(t, t.node(s).parent) == second_if
    )
    assert "inner" not in [n for n, _, _ in collect_identifiers(t, ret_in_second)]


def test_statement_insertion_closure():
    gen = ProgramGenerator(random.Random(11))
    for _ in range(40):
        prog = gen.program()
        stmts = statement_nodes(prog)
        target = stmts[gen.rng.randrange(len(stmts))]
        donor = gen.program()
        donor_stmts = statement_nodes(donor)
        stmt_tree = subtree(donor, donor_stmts[gen.rng.randrange(len(donor_stmts))])

        def build(i, spine):
            n = prog.node(i)
            if i == spine:

                def as_draft(tree, j):
                    m = tree.node(j)
                    return Draft(m.symbol, m.token, [as_draft(tree, c) for c in m.children])

                inner = Draft(n.symbol, None, [build(c, None) for c in n.children])
                return Draft(n.symbol, None, [as_draft(stmt_tree, stmt_tree.root), inner])
            return Draft(n.symbol, n.token, [build(c, spine) for c in n.children])

        spine = prog.node(target).parent
        grown = freeze(build(prog.root, spine))
        parse(to_source(grown, allow_placeholder=True).replace("placeholder", "ph_x"))


def test_no_unknown_identifier_at_runtime_when_typechecked():
    gen = ProgramGenerator(random.Random(13))
    for _ in range(60):
        t = gen.program()
        assert typechecks(t)
        rec = run(t, MiniTest("main", (2, 7), 0))
        assert "unknown identifier" not in rec.detail


def test_test_suite_json_roundtrip(tmp_path):
    tests = [MiniTest("main", (1, 2), 3), MiniTest("main", (0, 0), True)]
    text = dump_test_suite(tests)
    assert load_test_suite(text) == tests

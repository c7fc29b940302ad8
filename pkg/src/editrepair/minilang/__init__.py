from .interp import (
    CoverageRecord,
    DEFAULT_FUEL,
    TestCase,
    dump_test_suite,
    load_test_suite,
    run,
)
from .lang import (
    GRAMMAR,
    PLACEHOLDER_TOKEN,
    enclosing_function,
    enclosing_statement,
    flatten_stmts,
    function_name,
    identifier_name,
    production_of,
    statement_list,
    statement_nodes,
)
from .lexer import ParseError
from .parser import parse
from .printer import PrintError, to_source
from .randprog import ProgramGenerator, random_program
from .types import Diagnostic, FuncType, collect_identifiers, typecheck, typechecks

__all__ = [
    "GRAMMAR",
    "PLACEHOLDER_TOKEN",
    "CoverageRecord",
    "DEFAULT_FUEL",
    "Diagnostic",
    "FuncType",
    "ParseError",
    "PrintError",
    "ProgramGenerator",
    "TestCase",
    "collect_identifiers",
    "dump_test_suite",
    "enclosing_function",
    "enclosing_statement",
    "flatten_stmts",
    "function_name",
    "identifier_name",
    "load_test_suite",
    "parse",
    "production_of",
    "random_program",
    "run",
    "statement_list",
    "statement_nodes",
    "to_source",
    "typecheck",
    "typechecks",
]

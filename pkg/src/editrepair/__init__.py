"""Edit-script program repair for MiniLang.

The package is organized bottom-up: `grammar` (symbol-typed trees), `minilang`
(the host language), `edits` (the edit grammar and its application semantics),
`placeholders` (identifier instantiation), `oracle` (training-pair extraction
and synthetic corpora), `autodiff`/`model` (the neural edit decoder), and
`localize`/`training`/`repair` (the end-to-end pipeline).
"""

from .edits import (
    EditContext,
    EditGrammar,
    context_for,
    derive_edit_grammar,
    enumerate_copyable,
    enumerate_modifiable,
)
from .grammar import (
    Ast,
    AstNode,
    Draft,
    Grammar,
    Production,
    Symbol,
    freeze,
    from_sexpr,
    preorder_ids,
    structural_equal,
    subtree,
    subtree_size,
    thaw,
    to_sexpr,
)
from .localize import ochiai
from .oracle import (
    PatchPair,
    diff_single_hunk,
    extract_oracle,
    mutate_corpus,
    tested_corpus,
)
from .placeholders import find_placeholders, instantiate_all
from .repair import Budget, RepairReport, evaluate, repair
from .training import TrainConfig, train

__all__ = [
    "Ast",
    "AstNode",
    "Budget",
    "Draft",
    "EditContext",
    "EditGrammar",
    "Grammar",
    "PatchPair",
    "Production",
    "RepairReport",
    "Symbol",
    "TrainConfig",
    "context_for",
    "derive_edit_grammar",
    "diff_single_hunk",
    "enumerate_copyable",
    "enumerate_modifiable",
    "evaluate",
    "extract_oracle",
    "find_placeholders",
    "freeze",
    "from_sexpr",
    "instantiate_all",
    "mutate_corpus",
    "ochiai",
    "preorder_ids",
    "repair",
    "structural_equal",
    "subtree",
    "subtree_size",
    "tested_corpus",
    "thaw",
    "to_sexpr",
    "train",
]

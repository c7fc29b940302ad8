"""Localize-generate-validate repair orchestration.

For each suspicious statement (Ochiai order, or a given location), the decoder
proposes edit scripts by beam search; each script is applied, placeholders are
instantiated with every feasible identifier, and candidates are validated by
type checking and then the test suite, stopping at the first candidate that
passes everything. Reports are fully deterministic for a fixed seed and
checkpoint: they carry work counters rather than wall-clock times.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

from .edits import EditContext, EditGrammar, context_for
from .grammar import Ast, structural_equal, to_sexpr
from .localize import ochiai
from .minilang import parse, run, statement_nodes, to_source, typecheck
from .model.decoder import ModelSession, beam_search
from .model.params import ModelParams
from .oracle import PairRejected, PatchPair, diff_single_hunk, extract_oracle, reinstantiate
from .placeholders import PlaceholderError, find_placeholders, instantiate_all

COMPILE_FAIL = "compile-fail"
TEST_FAIL = "test-fail"
PLAUSIBLE = "plausible"

REPAIRED = "repaired"
NO_PATCH = "no-patch"
NOTHING_TO_REPAIR = "nothing-to-repair"


@dataclass
class Budget:
    beam: int = 100
    candidates_per_statement: int = 100
    top_statements: int = 10
    wall_clock: float | None = 600.0  # seconds; None disables the limit
    max_expansions: int = 128

    def to_dict(self):
        return {
            "beam": self.beam,
            "candidates_per_statement": self.candidates_per_statement,
            "top_statements": self.top_statements,
            "wall_clock": self.wall_clock,
            "max_expansions": self.max_expansions,
        }


@dataclass
class CandidateOutcome:
    statement: int
    script: str
    source: str | None
    score: float
    verdict: str
    tests_run: int


@dataclass
class RepairReport:
    status: str
    seed: int
    budget: Budget
    ranking: list[tuple[int, float]]
    candidates: list[CandidateOutcome] = field(default_factory=list)
    patch_source: str | None = None
    patch_statement: int | None = None
    patch_script: str | None = None
    detail: str = ""

    @property
    def repaired(self) -> bool:
        return self.status == REPAIRED

    def to_json(self) -> str:
        data = {
            "status": self.status,
            "seed": self.seed,
            "budget": self.budget.to_dict(),
            "ranking": [[stmt, score] for stmt, score in self.ranking],
            "candidates": [
                {
                    "statement": c.statement,
                    "script": c.script,
                    "source": c.source,
                    "score": c.score,
                    "verdict": c.verdict,
                    "tests_run": c.tests_run,
                }
                for c in self.candidates
            ],
            "patch": None
            if self.patch_source is None
            else {
                "statement": self.patch_statement,
                "script": self.patch_script,
                "source": self.patch_source,
            },
            "detail": self.detail,
            "work": {"candidates_validated": len(self.candidates)},
        }
        return json.dumps(data, indent=2, sort_keys=True) + "\n"


class _Clock:
    def __init__(self, limit: float | None):
        self.limit = limit
        self.start = time.monotonic()

    @property
    def expired(self) -> bool:
        return self.limit is not None and time.monotonic() - self.start > self.limit


def _validate_candidate(program: Ast, tests, report: RepairReport, statement: int,
                        script_text: str, score: float) -> bool:
    """Run the suite on a type-correct instantiation; True when plausible."""
    ran = 0
    for test in tests:
        record = run(program, test)
        ran += 1
        if not record.passed:
            report.candidates.append(
                CandidateOutcome(statement, script_text, to_source(program), score, TEST_FAIL, ran)
            )
            return False
    report.candidates.append(
        CandidateOutcome(statement, script_text, to_source(program), score, PLAUSIBLE, ran)
    )
    return True


def repair(program: Ast, tests, params: ModelParams, budget: Budget | None = None,
           perfect_loc: int | None = None, seed: int = 0,
           allow_placeholder: bool = True) -> RepairReport:
    """Attempt to repair a failing program; see the module docstring.

    With `perfect_loc`, fault localization is skipped and only that statement
    is attempted.
    """
    budget = budget or Budget()
    eg = params.eg
    diags = typecheck(program)
    if diags:
        return RepairReport("input-does-not-compile", seed, budget, [],
                            detail="; ".join(map(str, diags)))
    records = [run(program, t) for t in tests]
    if all(r.passed for r in records):
        return RepairReport(NOTHING_TO_REPAIR, seed, budget, [])

    if perfect_loc is not None:
        ranking = [(perfect_loc, 1.0)]
    else:
        stmts = set(statement_nodes(program))
        ranking = [(s, v) for s, v in ochiai(records) if s in stmts]
    report = RepairReport(NO_PATCH, seed, budget, ranking[: budget.top_statements])
    clock = _Clock(budget.wall_clock)

    for stmt, _ in report.ranking:
        ctx = context_for(program, stmt)
        session = ModelSession(params, ctx, train=False, use_masks=True)
        candidates = beam_search(
            session,
            beam=budget.beam,
            max_candidates=budget.candidates_per_statement,
            max_expansions=budget.max_expansions,
            allow_placeholder=allow_placeholder,
        )
        for cand in candidates:
            if clock.expired:
                report.detail = "wall-clock budget exhausted"
                return report
            patched = eg.apply(cand.script, ctx)
            try:
                concrete = instantiate_all(patched, ctx)
            except PlaceholderError:
                continue
            if not concrete and find_placeholders(patched):
                report.candidates.append(
                    CandidateOutcome(stmt, cand.text, None, cand.logprob, COMPILE_FAIL, 0)
                )
                continue
            for program_variant in concrete:
                if typecheck(program_variant):
                    report.candidates.append(
                        CandidateOutcome(stmt, cand.text, None, cand.logprob, COMPILE_FAIL, 0)
                    )
                    continue
                if _validate_candidate(program_variant, tests, report, stmt, cand.text, cand.logprob):
                    report.status = REPAIRED
                    report.patch_source = to_source(program_variant)
                    report.patch_statement = stmt
                    report.patch_script = cand.text
                    return report
    return report


def replay_oracle(pair: PatchPair, eg: EditGrammar) -> bool:
    """Repair by replaying the extracted reference script (no model)."""
    example = extract_oracle(pair, eg)
    patched = eg.apply(example.script, example.ctx)
    restored = reinstantiate(patched, example.placeholder_values)
    if not structural_equal(restored, pair.fixed):
        return False
    return all(run(restored, t).passed for t in pair.tests)


def evaluate(pairs, params: ModelParams, budget: Budget | None = None,
             perfect_localization: bool = True, seed: int = 0, log=None):
    """Repair a corpus of test-equipped pairs and summarize the outcome."""
    budget = budget or Budget()
    n = len(pairs)
    repaired = exact = 0
    candidates_tried = []
    outcomes = []
    for pair in pairs:
        loc = None
        if perfect_localization:
            try:
                loc = diff_single_hunk(pair.buggy, pair.fixed).faulty_stmt
            except PairRejected:
                loc = None
        report = repair(pair.buggy, list(pair.tests), params, budget,
                        perfect_loc=loc, seed=seed)
        candidates_tried.append(len(report.candidates))
        is_exact = False
        if report.repaired:
            repaired += 1
            is_exact = structural_equal(parse(report.patch_source), pair.fixed)
            exact += int(is_exact)
        outcomes.append({"id": pair.id, "repaired": report.repaired, "exact": is_exact,
                         "candidates": len(report.candidates)})
        if log:
            log(f"{pair.id}: {'repaired' if report.repaired else 'no patch'}"
                f" ({len(report.candidates)} candidates)")
    return {
        "n": n,
        "repaired": repaired,
        "repair_rate": repaired / n if n else 0.0,
        "exact": exact,
        "exact_rate": exact / n if n else 0.0,
        "mean_candidates": sum(candidates_tried) / n if n else 0.0,
        "outcomes": outcomes,
    }

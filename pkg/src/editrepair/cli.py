"""Command-line interface.

Exit codes: 0 = task ok (for `repair`, a plausible patch was found),
1 = repair found no patch, 2 = usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .edits import context_for
from .grammar import from_sexpr, to_sexpr
from .localize import ochiai
from .minilang import load_test_suite, parse, run, to_source, typecheck
from .model.params import ModelParams
from .oracle import (
    SINGLE_TOKEN_KINDS,
    MUTATION_KINDS,
    extract_many,
    grammar_for_corpus,
    load_pairs,
    mutate_corpus,
    save_pairs,
    tested_corpus,
)
from .repair import Budget, evaluate, repair
from .training import TrainConfig, train

OK, NO_PATCH_FOUND, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _read(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(str(e)) from None


def _load_program(path):
    return parse(_read(path))


def cmd_extract(args) -> int:
    pairs = load_pairs(args.pairs)
    eg = grammar_for_corpus(pairs, args.threshold)
    examples, rejects = extract_many(pairs, eg, copy_enabled=not args.no_copy)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            for ex in examples:
                fh.write(json.dumps({
                    "id": ex.id,
                    "kind": ex.kind,
                    "faulty_stmt": ex.ctx.faulty_stmt,
                    "script": to_sexpr(ex.script),
                    "placeholders": list(ex.placeholder_values),
                }) + "\n")
    summary = {
        "pairs": len(pairs),
        "accepted": len(examples),
        "rejected": sum(rejects.values()),
        "reject_reasons": dict(sorted(rejects.items())),
        "frequent_ids": len(eg.frequent_ids),
        "frequent_literals": len(eg.frequent_literals),
    }
    print(json.dumps(summary, indent=2, sort_keys=True))
    return OK


def cmd_mutate(args) -> int:
    seed_files = sorted(Path(args.seed_dir).glob("*.mini"))
    if not seed_files:
        raise UsageError(f"no .mini programs under {args.seed_dir}")
    seeds = [parse(f.read_text(encoding="utf-8")) for f in seed_files]
    kinds = SINGLE_TOKEN_KINDS if args.single_token else MUTATION_KINDS
    if args.tests:
        pairs = tested_corpus(seeds, args.n, args.rng, kinds=kinds, n_tests=args.tests)
    else:
        pairs = mutate_corpus(seeds, args.n, args.rng, kinds=kinds)
    save_pairs(args.out, pairs)
    print(f"wrote {len(pairs)} pairs to {args.out}")
    return OK


def cmd_train(args) -> int:
    config_data = json.loads(_read(args.config))
    dataset = config_data.get("dataset")
    if not dataset:
        raise UsageError("config must name a 'dataset' (pairs JSONL)")
    config = TrainConfig.from_json(json.dumps(config_data))
    if args.seed is not None:
        config.seed = args.seed
    pairs = load_pairs(dataset)
    out = args.out or config_data.get("checkpoint", "model.ckpt")
    _, metrics = train(pairs, config, checkpoint_path=out)
    print(json.dumps({"checkpoint": str(out),
                      "train_nll": metrics["train_nll"],
                      "val_nll": metrics["val_nll"]}, indent=2))
    return OK


def cmd_localize(args) -> int:
    program = _load_program(args.program)
    diags = typecheck(program)
    if diags:
        raise UsageError("program does not typecheck: " + "; ".join(map(str, diags)))
    tests = load_test_suite(_read(args.tests))
    records = [run(program, t) for t in tests]
    for stmt, score in ochiai(records):
        print(f"{stmt}\t{score:.6f}")
    return OK


def cmd_repair(args) -> int:
    program = _load_program(args.program)
    tests = load_test_suite(_read(args.tests))
    params = ModelParams.load(args.checkpoint)
    budget = Budget(
        beam=args.beam,
        candidates_per_statement=args.candidates,
        top_statements=args.top_statements,
        wall_clock=args.wall_clock,
    )
    report = repair(program, tests, params, budget,
                    perfect_loc=args.perfect_loc, seed=args.seed,
                    allow_placeholder=not args.no_placeholder)
    text = report.to_json()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        print(text, end="")
    return OK if report.repaired else NO_PATCH_FOUND


def cmd_apply_edit(args) -> int:
    program = _load_program(args.program)
    script_text = _read(args.script)
    if args.checkpoint:
        eg = ModelParams.load(args.checkpoint).eg
    else:
        # derive a grammar wide enough for the identifier/literal rules the
        # script itself mentions
        from .edits import ID_PREFIX, NUM_PREFIX, derive_edit_grammar
        from .minilang.lang import GRAMMAR

        words = {w.strip('()"') for w in script_text.split()}
        ids = sorted(w[len(ID_PREFIX):] for w in words if w.startswith(ID_PREFIX))
        lits = sorted(w[len(NUM_PREFIX):] for w in words if w.startswith(NUM_PREFIX))
        eg = derive_edit_grammar(GRAMMAR, ids, lits)
    script = from_sexpr(script_text, eg.grammar)
    ctx = context_for(program, args.stmt)
    patched = eg.apply(script, ctx)
    print(to_source(patched, allow_placeholder=True), end="")
    return OK


def cmd_eval(args) -> int:
    pairs = [p for p in load_pairs(args.corpus) if p.tests]
    if not pairs:
        raise UsageError("corpus has no test-equipped pairs")
    params = ModelParams.load(args.checkpoint)
    budget = Budget(beam=args.beam, top_statements=args.top_statements,
                    wall_clock=args.wall_clock)
    summary = evaluate(pairs, params, budget,
                       perfect_localization=args.perfect_loc, seed=args.seed,
                       log=print if args.verbose else None)
    summary = {k: v for k, v in summary.items() if k != "outcomes"}
    print(json.dumps(summary, indent=2, sort_keys=True))
    return OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="editrepair",
                                 description="Edit-script program repair for MiniLang.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract reference edit scripts from a pairs file")
    p.add_argument("pairs")
    p.add_argument("--threshold", type=int, default=10)
    p.add_argument("--no-copy", action="store_true")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_extract)

    p = sub.add_parser("mutate", help="generate a synthetic (buggy, fixed) corpus")
    p.add_argument("--seed-dir", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--rng", type=int, default=0)
    p.add_argument("--out", default="pairs.jsonl")
    p.add_argument("--tests", type=int, default=0, help="attach this many tests per pair")
    p.add_argument("--single-token", action="store_true")
    p.set_defaults(fn=cmd_mutate)

    p = sub.add_parser("train", help="train the edit decoder")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("localize", help="rank suspicious statements")
    p.add_argument("program")
    p.add_argument("tests")
    p.set_defaults(fn=cmd_localize)

    p = sub.add_parser("repair", help="repair a failing program")
    p.add_argument("program")
    p.add_argument("tests")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--beam", type=int, default=100)
    p.add_argument("--candidates", type=int, default=100)
    p.add_argument("--top-statements", type=int, default=10)
    p.add_argument("--wall-clock", type=float, default=600.0)
    p.add_argument("--perfect-loc", type=int)
    p.add_argument("--no-placeholder", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_repair)

    p = sub.add_parser("apply-edit", help="apply a serialized edit script")
    p.add_argument("program")
    p.add_argument("script")
    p.add_argument("--stmt", type=int, required=True)
    p.add_argument("--checkpoint")
    p.set_defaults(fn=cmd_apply_edit)

    p = sub.add_parser("eval", help="repair a whole corpus and summarize")
    p.add_argument("--corpus", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--beam", type=int, default=100)
    p.add_argument("--top-statements", type=int, default=10)
    p.add_argument("--wall-clock", type=float, default=600.0)
    p.add_argument("--perfect-loc", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(fn=cmd_eval)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())

"""The edit decoder: three providers, a decider, legality masking, and beam
search over expansion frontiers.

Every expansion step queries the rule predictor (a distribution over edit
productions), the tree copier and subtree locator (pointer distributions over
the encoded method positions), and a decider that weighs the providers. The
combined probability vector concatenates the three, each scaled by its decider
weight. During inference a logic mask pins structurally-illegal entries to
exactly zero; during training the masks are off and the model learns the
legality structure from data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..edits import EditContext, EditGrammar, RULE_PLAIN
from ..grammar import Ast, Draft, Symbol, freeze, to_sexpr
from .params import ModelParams
from .readers import (
    ContextEncoding,
    ast_reader,
    code_reader,
    cross_kv,
    encode_context,
    rule_entry_adjacency,
    tree_path_reader,
)

RULE, COPY, LOCATE = 0, 1, 2


def responsibilities(eg: EditGrammar, symbol: Symbol) -> tuple[bool, bool, bool]:
    """Which providers may expand this nonterminal (rule, copy, locate)."""
    name = symbol.name
    if name == "Modify":
        return (False, False, True)
    if name in ("Edits", "Edit", "Insert") or symbol == eg.identifier:
        return (True, False, False)
    return (True, True, False)


def rule_legality(eg: EditGrammar, symbol: Symbol) -> np.ndarray:
    """Mask of plain productions whose left-hand side is `symbol`."""
    cache = getattr(eg, "_rule_masks", None)
    if cache is None:
        cache = eg._rule_masks = {}
    if symbol.name not in cache:
        mask = np.zeros(eg.grammar.num_productions, dtype=bool)
        for p in eg.grammar.productions_for(symbol):
            if eg.kind(p) == RULE_PLAIN:
                mask[p.id] = True
        cache[symbol.name] = mask
    return cache[symbol.name]


@dataclass
class StepDistribution:
    """The combined choice distribution o for one expansion step."""

    o: np.ndarray  # [n_rules + 2L] probabilities
    n_rules: int
    length: int

    @property
    def rule_part(self) -> np.ndarray:
        return self.o[: self.n_rules]

    @property
    def copy_part(self) -> np.ndarray:
        return self.o[self.n_rules : self.n_rules + self.length]

    @property
    def locate_part(self) -> np.ndarray:
        return self.o[self.n_rules + self.length :]

    @property
    def lam(self) -> np.ndarray:
        """Decider weights, recovered as the mass assigned to each provider."""
        return np.array([self.rule_part.sum(), self.copy_part.sum(), self.locate_part.sum()])

    def action_of(self, index: int):
        if index < self.n_rules:
            return (RULE, index)
        index -= self.n_rules
        if index < self.length:
            return (COPY, index)
        return (LOCATE, index - self.length)


class Frontier:
    """A partial edit script in leftmost depth-first expansion order."""

    __slots__ = (
        "nodes", "stack", "entries", "entry_parent", "entry_sibling",
        "last_child", "node_entry", "logprob", "placeholders", "expansions", "order",
    )

    # node rows are [symbol, token, children tuple | None, parent index]

    def __init__(self):
        self.nodes: list[list] = []
        self.stack: list[int] = []
        self.entries: list[int] = []
        self.entry_parent: list[int] = []
        self.entry_sibling: list[int | None] = []
        self.last_child: dict[int, int] = {}
        self.node_entry: list[int] = []
        self.logprob = 0.0
        self.placeholders = 0
        self.expansions = 0
        self.order = 0

    @classmethod
    def initial(cls, eg: EditGrammar, params: ModelParams) -> "Frontier":
        f = cls()
        f.nodes.append([eg.edits, None, None, None])
        f.node_entry.append(0)
        f.stack.append(0)
        f.entries.append(params.start_slot)
        f.entry_parent.append(0)
        f.entry_sibling.append(None)
        return f

    def clone(self) -> "Frontier":
        f = Frontier()
        f.nodes = [row[:] for row in self.nodes]
        f.stack = self.stack[:]
        f.entries = self.entries[:]
        f.entry_parent = self.entry_parent[:]
        f.entry_sibling = self.entry_sibling[:]
        f.last_child = dict(self.last_child)
        f.node_entry = self.node_entry[:]
        f.logprob = self.logprob
        f.placeholders = self.placeholders
        f.expansions = self.expansions
        f.order = self.order
        return f

    @property
    def complete(self) -> bool:
        return not self.stack

    def current_node(self) -> int:
        return self.stack[-1]

    def current_symbol(self) -> Symbol:
        return self.nodes[self.stack[-1]][0]

    def path_symbols(self) -> list[str]:
        names = []
        i = self.stack[-1]
        while i is not None:
            names.append(self.nodes[i][0].name)
            i = self.nodes[i][3]
        return names[::-1]

    def _new_entry(self, slot: int, node_idx: int) -> int:
        entry = len(self.entries)
        parent = self.node_entry[node_idx]
        self.entries.append(slot)
        self.entry_parent.append(parent)
        self.entry_sibling.append(self.last_child.get(parent))
        self.last_child[parent] = entry
        return entry

    def _add_node(self, symbol: Symbol, token, parent: int, entry: int) -> int:
        idx = len(self.nodes)
        self.nodes.append([symbol, token, () if token is not None else None, parent])
        self.node_entry.append(entry)
        return idx

    def expand_rule(self, eg: EditGrammar, params: ModelParams, production) -> None:
        node_idx = self.stack.pop()
        entry = self._new_entry(production.id, node_idx)
        kids = []
        pending = []
        for sym in production.rhs:
            if sym.is_terminal:
                token = eg.canonical_token(sym)
                kids.append(self._add_node(sym, token, node_idx, entry))
                if sym.name == "placeholder":
                    self.placeholders += 1
            else:
                idx = self._add_node(sym, None, node_idx, entry)
                kids.append(idx)
                pending.append(idx)
        self.nodes[node_idx][2] = tuple(kids)
        self.stack.extend(reversed(pending))
        self.expansions += 1

    def expand_copy(self, eg: EditGrammar, params: ModelParams, source_id: int) -> None:
        node_idx = self.stack.pop()
        entry = self._new_entry(params.copy_slot, node_idx)
        leaf = self._add_node(eg.node_id, str(source_id), node_idx, entry)
        self.nodes[node_idx][2] = (leaf,)
        self.expansions += 1

    def expand_locate(self, eg: EditGrammar, params: ModelParams, target_id: int,
                      target_symbol: Symbol) -> None:
        node_idx = self.stack.pop()
        entry = self._new_entry(params.locate_slot, node_idx)
        leaf = self._add_node(eg.node_id, str(target_id), node_idx, entry)
        gen = self._add_node(target_symbol, None, node_idx, entry)
        self.nodes[node_idx][2] = (leaf, gen)
        self.stack.append(gen)
        self.expansions += 1

    def to_script(self) -> Ast:
        def build(idx: int) -> Draft:
            symbol, token, children, _ = self.nodes[idx]
            return Draft(symbol, token, [build(c) for c in children or ()])

        return freeze(build(0))


@dataclass(frozen=True)
class ScriptCandidate:
    script: Ast
    logprob: float
    text: str


class ModelSession:
    """One context's worth of decoding/training state.

    Code features (and the cross-attention projections of them) are computed
    once per session and shared by every step, both along a training example's
    oracle steps and across beam branches.
    """

    def __init__(self, params: ModelParams, ctx: EditContext, train: bool = False,
                 use_masks: bool = True, rng: np.random.Generator | None = None):
        self.params = params
        self.eg = params.eg
        self.ctx = ctx
        self.train = train
        self.use_masks = use_masks
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.enc: ContextEncoding = encode_context(ctx, params)
        self._code = None
        self._ast_cross = None
        self._path_code = None
        self._onehots: dict[int, ad.Tensor] = {}

    def drop(self, t):
        return ad.dropout(t, self.params.hp.dropout, self.rng, self.train)

    def _ensure_features(self):
        if self._code is not None:
            return
        p = self.params
        self._code = code_reader(p, self.enc, self.drop)
        self._ast_cross = [cross_kv(p, f"ast{i}.cross", self._code) for i in range(p.hp.ast_blocks)]
        self._path_code = [cross_kv(p, f"path{i}.code_attn", self._code) for i in range(p.hp.path_blocks)]

    def _last_row(self, feats, length: int):
        if length not in self._onehots:
            pick = np.zeros((1, length))
            pick[0, -1] = 1.0
            self._onehots[length] = ad.Tensor(pick)
        return ad.matmul(self._onehots[length], feats)

    def _provider_tensors(self, entry_ids, parents, siblings, path_names, symbol: Symbol,
                          ast_feats=None, ast_cache=None, ast_bias=None):
        """Returns (o, layout) where o is a [1, n_rules + 2L] Tensor."""
        p, eg, enc = self.params, self.eg, self.enc
        self._ensure_features()
        if ast_feats is None:
            a_hat = rule_entry_adjacency(parents, siblings)
            ast_feats = ast_reader(p, entry_ids, a_hat, self._code, self.drop,
                                   code_cache=self._ast_cross)
        path_ids = np.array([p.symbol_ids[name] for name in path_names], dtype=np.int64)
        path_feats = tree_path_reader(p, path_ids, ast_feats, self._code, self.drop,
                                      ast_cache=ast_cache, code_cache=self._path_code,
                                      ast_bias=ast_bias)
        d_vec = self._last_row(path_feats, len(path_ids))

        length = enc.length
        rule_logits = ad.matmul(d_vec, p["rule.w"]) + p["rule.b"]
        copy_logits = self._pointer(d_vec, "copier")
        locate_logits = self._pointer(d_vec, "locator")
        decider_logits = ad.matmul(d_vec, p["decider.w"]) + p["decider.b"]

        if not self.use_masks:
            p_rule = ad.softmax(rule_logits, axis=-1)
            p_copy = ad.softmax(copy_logits, axis=-1)
            p_locate = ad.softmax(locate_logits, axis=-1)
            lam = ad.softmax(decider_logits, axis=-1)
        else:
            rule_mask = rule_legality(eg, symbol)
            copy_mask = enc.copyable.get(symbol.name, np.zeros(length, dtype=bool)) \
                if symbol.name in eg.copy_production else np.zeros(length, dtype=bool)
            locate_mask = enc.locatable
            resp = responsibilities(eg, symbol)
            active = (
                resp[RULE] and bool(rule_mask.any()),
                resp[COPY] and bool(copy_mask.any()),
                resp[LOCATE] and bool(locate_mask.any()),
            )
            if not any(active):
                return None, None
            p_rule = self._masked_softmax(rule_logits, rule_mask, active[RULE])
            p_copy = self._masked_softmax(copy_logits, copy_mask, active[COPY])
            p_locate = self._masked_softmax(locate_logits, locate_mask, active[LOCATE])
            lam = self._masked_softmax(decider_logits, np.array(active), True)
        parts = []
        for k, prob in ((RULE, p_rule), (COPY, p_copy), (LOCATE, p_locate)):
            parts.append(prob * self._lam_column(lam, k))
        return ad.concat(parts, axis=1), (p.n_rules, length)

    def _pointer(self, d_vec, prefix: str):
        p = self.params
        mixed = ad.tanh(ad.matmul(d_vec, p[f"{prefix}.w1"]) + ad.matmul(self._code, p[f"{prefix}.w2"]))
        v = ad.reshape(p[f"{prefix}.v"], (p.hp.d, 1))
        return ad.reshape(ad.matmul(mixed, v), (1, self.enc.length))

    @staticmethod
    def _masked_softmax(logits, mask, active: bool):
        if not active or not mask.any():
            return ad.Tensor(np.zeros(logits.shape))
        return ad.softmax(ad.masked_fill(logits, ~mask), axis=-1)

    _LAM_COLS = None

    def _lam_column(self, lam, k: int):
        cols = ModelSession._LAM_COLS
        if cols is None or cols[0].data.dtype != ad.get_dtype():
            eye = np.eye(3)
            cols = ModelSession._LAM_COLS = tuple(ad.Tensor(eye[i][None, :]) for i in range(3))
        return ad.reduce_sum(lam * cols[k], axis=1, keepdims=True)

    # --- training -------------------------------------------------------------

    def target_index(self, step) -> int:
        if step.provider == "rule":
            return step.target
        pos = self.enc.position_of(step.target)
        if step.provider == "copy":
            return self.params.n_rules + pos
        return self.params.n_rules + self.enc.length + pos

    def nll_of_steps(self, steps) -> ad.Tensor:
        """Total negative log-likelihood of an oracle expansion sequence.

        The causal rule-sequence encoder runs once over the whole sequence;
        each step then addresses its own prefix through a visibility bias on
        the path reader's attention.
        """
        from .readers import ast_reader as _ast_reader

        p = self.params
        self._ensure_features()
        entries = [p.start_slot] + [self._slot(s) for s in steps]
        parents = [0] + [s.parent for s in steps]
        siblings = [None] + [s.left_sibling for s in steps]
        a_hat = rule_entry_adjacency(parents, siblings)
        ast_feats = _ast_reader(p, entries, a_hat, self._code, self.drop,
                                code_cache=self._ast_cross)
        ast_cache = [cross_kv(p, f"path{i}.ast_attn", ast_feats) for i in range(p.hp.path_blocks)]
        total = None
        width = p.n_rules + 2 * self.enc.length
        n_entries = len(entries)
        for k, step in enumerate(steps):
            bias = np.zeros(n_entries)
            bias[k + 1 :] = -np.inf
            o, _ = self._provider_tensors(
                None, None, None, step.path, self.eg.grammar.symbol(step.path[-1]),
                ast_feats=ast_feats, ast_cache=ast_cache, ast_bias=bias,
            )
            onehot = np.zeros((1, width))
            onehot[0, self.target_index(step)] = 1.0
            picked = ad.reduce_sum(o * ad.Tensor(onehot))
            nll = -ad.log(picked)
            total = nll if total is None else total + nll
        return total

    def _slot(self, step) -> int:
        if step.provider == "rule":
            return step.target
        return self.params.copy_slot if step.provider == "copy" else self.params.locate_slot

    # --- inference -------------------------------------------------------------

    def step_distribution(self, frontier: Frontier) -> StepDistribution | None:
        with ad.no_grad():
            out, layout = self._provider_tensors(
                frontier.entries, frontier.entry_parent, frontier.entry_sibling,
                frontier.path_symbols(), frontier.current_symbol(),
            )
        if out is None:
            return None
        n_rules, length = layout
        return StepDistribution(o=out.data[0], n_rules=n_rules, length=length)

    def apply_action(self, frontier: Frontier, index: int, dist: StepDistribution,
                     order: int) -> Frontier:
        eg, params, enc = self.eg, self.params, self.enc
        kind, arg = dist.action_of(index)
        f = frontier.clone()
        f.logprob += float(np.log(dist.o[index]))
        f.order = order
        if kind == RULE:
            f.expand_rule(eg, params, eg.grammar.productions[arg])
        elif kind == COPY:
            f.expand_copy(eg, params, enc.node_of(arg))
        else:
            node = enc.node_of(arg)
            f.expand_locate(eg, params, node, self.ctx.program.node(node).symbol)
        return f


def beam_search(session: ModelSession, beam: int = 100, max_candidates: int = 100,
                max_expansions: int = 128, allow_placeholder: bool = True) -> list[ScriptCandidate]:
    """Breadth-limited best-first edit generation.

    Completed scripts leave the search set and the search continues until
    max_candidates scripts are found or the beam dies out. Scripts with more
    than one placeholder are discarded during the search; duplicates (by
    serialization) are kept once at their best-scoring occurrence.
    """
    params, eg = session.params, session.eg
    frontiers = [Frontier.initial(eg, params)]
    done: dict[str, ScriptCandidate] = {}
    counter = 1
    ph_production = next(
        p.id for p in eg.grammar.productions_for(eg.identifier)
        if len(p.rhs) == 1 and p.rhs[0].name == "placeholder"
    )
    while frontiers and len(done) < max_candidates:
        proposals = []
        for f in frontiers:
            if f.expansions >= max_expansions:
                continue
            dist = session.step_distribution(f)
            if dist is None:
                continue
            (indices,) = np.nonzero(dist.o)
            if not allow_placeholder:
                indices = indices[indices != ph_production]
            if indices.size > beam:
                top = np.argpartition(-dist.o[indices], beam - 1)[:beam]
                indices = indices[top]
            for i in indices:
                proposals.append((f.logprob + float(np.log(dist.o[i])), f, int(i), dist))
        if not proposals:
            break
        proposals.sort(key=lambda item: (-item[0], item[1].order, item[2]))
        survivors = []
        for score, f, index, dist in proposals[:beam]:
            nf = session.apply_action(f, index, dist, counter)
            counter += 1
            if nf.placeholders > 1:
                continue
            if nf.complete:
                script = nf.to_script()
                text = to_sexpr(script)
                if text not in done:
                    done[text] = ScriptCandidate(script, nf.logprob, text)
                    if len(done) >= max_candidates:
                        break
            else:
                survivors.append(nf)
        frontiers = survivors
    return sorted(done.values(), key=lambda c: (-c.logprob, c.text))


def greedy_decode(session: ModelSession, max_expansions: int = 128,
                  allow_placeholder: bool = True) -> ScriptCandidate | None:
    out = beam_search(session, beam=1, max_candidates=1,
                      max_expansions=max_expansions, allow_placeholder=allow_placeholder)
    return out[0] if out else None

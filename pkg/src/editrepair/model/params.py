"""Model hyperparameters, the named-tensor registry, and checkpoint IO."""

from __future__ import annotations

from collections import Counter
from dataclasses import asdict, dataclass

import numpy as np

from .. import autodiff as ad
from ..edits import EditGrammar, derive_edit_grammar
from ..minilang.lang import GRAMMAR

UNK = "<unk>"
TAG_FAULTY, TAG_BEFORE, TAG_AFTER, TAG_OTHER = 0, 1, 2, 3


@dataclass(frozen=True)
class Hyperparams:
    d: int = 256
    heads: int = 8
    code_blocks: int = 5
    ast_blocks: int = 9
    path_blocks: int = 2
    dropout: float = 0.1
    position_offset: int = 0

    def __post_init__(self):
        if self.d % self.heads:
            raise ValueError(f"d={self.d} not divisible by heads={self.heads}")


def paper_preset() -> Hyperparams:
    return Hyperparams()


def desk_preset() -> Hyperparams:
    return Hyperparams(d=64, heads=4, code_blocks=2, ast_blocks=3, path_blocks=1)


PRESETS = {"paper": paper_preset, "desk": desk_preset}


def token_vocab_for(eg: EditGrammar, programs, min_count: int = 2) -> list[str]:
    """Context-encoder vocabulary: host symbol names plus recurring tokens."""
    counts = Counter()
    for tree in programs:
        for n in tree.nodes:
            counts[n.token if n.symbol.is_terminal else n.symbol.name] += 1
    vocab = [UNK]
    vocab += sorted(s for s in eg.host.symbols)
    extras = {w for w, c in counts.items() if c >= min_count}
    extras |= set(eg.frequent_ids) | set(eg.frequent_literals)
    vocab += sorted(w for w in extras if w not in set(vocab))
    return vocab


class ModelParams:
    """All trainable weights, keyed by name, plus the vocabulary tables."""

    def __init__(self, hp: Hyperparams, eg: EditGrammar, token_vocab: list[str], seed: int = 0):
        self.hp = hp
        self.eg = eg
        self.token_vocab = list(token_vocab)
        self.token_ids = {w: i for i, w in enumerate(self.token_vocab)}
        self.symbol_vocab = sorted(eg.grammar.symbols)
        self.symbol_ids = {s: i for i, s in enumerate(self.symbol_vocab)}
        self.n_rules = eg.grammar.num_productions
        # rule-entry embedding slots: productions, then copy / locate / start
        self.copy_slot = self.n_rules
        self.locate_slot = self.n_rules + 1
        self.start_slot = self.n_rules + 2
        self.tensors: dict[str, ad.Tensor] = {}
        self._init(seed)

    # --- construction -------------------------------------------------------

    def _init(self, seed: int):
        rng = np.random.default_rng(seed)
        d = self.hp.d

        def mat(name, rows, cols):
            bound = 1.0 / np.sqrt(rows)
            self.tensors[name] = ad.Tensor(rng.uniform(-bound, bound, (rows, cols)), requires_grad=True)

        def vec(name, n, scale=0.0):
            data = rng.uniform(-scale, scale, n) if scale else np.zeros(n)
            self.tensors[name] = ad.Tensor(data, requires_grad=True)

        def embed(name, rows):
            # comparable in scale to the sinusoidal position values they join
            self.tensors[name] = ad.Tensor(rng.normal(0.0, 0.5, (rows, d)), requires_grad=True)

        embed("tok_embed", len(self.token_vocab))
        embed("tag_embed", 4)
        embed("rule_embed", self.n_rules + 3)
        embed("sym_embed", len(self.symbol_vocab))

        def attn(prefix):
            for w in ("wq", "wk", "wv", "wo"):
                mat(f"{prefix}.{w}", d, d)

        def gate(prefix):
            for w in ("wq", "wk1", "wv1", "wk2", "wv2"):
                mat(f"{prefix}.{w}", d, d)

        for i in range(self.hp.code_blocks):
            attn(f"code{i}.attn")
            gate(f"code{i}.gate")
            mat(f"code{i}.conv.wg", d, d)
        for i in range(self.hp.ast_blocks):
            attn(f"ast{i}.attn")
            gate(f"ast{i}.gate")
            attn(f"ast{i}.cross")
            mat(f"ast{i}.conv.wg", d, d)
        for i in range(self.hp.path_blocks):
            attn(f"path{i}.ast_attn")
            attn(f"path{i}.code_attn")
        mat("path_fc1.w", d, d)
        vec("path_fc1.b", d)
        mat("path_fc2.w", d, d)
        vec("path_fc2.b", d)

        mat("rule.w", d, self.n_rules)
        vec("rule.b", self.n_rules)
        mat("copier.w1", d, d)
        mat("copier.w2", d, d)
        vec("copier.v", d, scale=1.0 / np.sqrt(d))
        mat("locator.w1", d, d)
        mat("locator.w2", d, d)
        vec("locator.v", d, scale=1.0 / np.sqrt(d))
        mat("decider.w", d, 3)
        vec("decider.b", 3)

    def __getitem__(self, name: str) -> ad.Tensor:
        return self.tensors[name]

    def trainables(self) -> list[ad.Tensor]:
        return list(self.tensors.values())

    def zero_grad(self):
        for t in self.tensors.values():
            t.zero_grad()

    def token_id(self, token: str) -> int:
        return self.token_ids.get(token, 0)

    # --- persistence ----------------------------------------------------------

    def save(self, path):
        meta = {
            "hyperparams": asdict(self.hp),
            "token_vocab": self.token_vocab,
            "frequent_ids": list(self.eg.frequent_ids),
            "frequent_literals": list(self.eg.frequent_literals),
        }
        arrays = {name: t.data for name, t in self.tensors.items()}
        ad.save_checkpoint(path, arrays, meta)

    @classmethod
    def load(cls, path) -> "ModelParams":
        arrays, meta = ad.load_checkpoint(path)
        hp = Hyperparams(**meta["hyperparams"])
        eg = derive_edit_grammar(GRAMMAR, meta["frequent_ids"], meta["frequent_literals"])
        params = cls(hp, eg, meta["token_vocab"], seed=0)
        for name, t in params.tensors.items():
            if name not in arrays:
                raise ValueError(f"checkpoint missing tensor {name}")
            if arrays[name].shape != t.data.shape:
                raise ValueError(
                    f"checkpoint tensor {name} has shape {arrays[name].shape}, expected {t.data.shape}"
                )
            t.data = arrays[name].astype(ad.get_dtype())
        return params

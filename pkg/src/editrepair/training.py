"""Training loop for the edit decoder.

Training maximizes the likelihood of the reference expansion sequences
(equivalently, minimizes their negative log-likelihood). The legality masks
are disabled in the training forward pass so the model sees gradients for the
full choice distribution; dropout is active; validation NLL is computed with
both off.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .model.decoder import ModelSession
from .model.params import Hyperparams, ModelParams, PRESETS, token_vocab_for
from .oracle import extract_many, frequent_tokens, split_pairs
from .edits import derive_edit_grammar
from .minilang.lang import GRAMMAR


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    lr: float = 1e-4
    dropout: float = 0.1
    batch_size: int = 16
    epochs: int = 5
    seed: int = 0
    preset: str = "desk"  # 'paper' uses the full-scale model sizes
    frequent_threshold: int = 10
    val_fraction: float = 0.2
    copy_enabled: bool = True

    def hyperparams(self) -> Hyperparams:
        hp = PRESETS[self.preset]()
        return Hyperparams(**{**asdict(hp), "dropout": self.dropout})

    @classmethod
    def from_json(cls, text: str) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        data = {k: v for k, v in json.loads(text).items() if k in known}
        return cls(**data)


class Trainer:
    """Holds optimizer state so training can proceed in measured bursts."""

    def __init__(self, params: ModelParams, config: TrainConfig):
        self.params = params
        self.config = config
        self.opt = ad.Adam(params.trainables(), lr=config.lr)
        self.rng = np.random.default_rng(config.seed)
        self.order = np.random.default_rng(config.seed + 1)
        self.steps_done = 0
        self._queue: list = []

    def _batches(self, examples):
        idx = np.arange(len(examples))
        self.order.shuffle(idx)
        bs = self.config.batch_size
        for lo in range(0, len(idx), bs):
            yield [examples[i] for i in idx[lo : lo + bs]]

    def _step(self, batch) -> float:
        self.opt.zero_grad()
        total = None
        for ex in batch:
            sess = ModelSession(self.params, ex.ctx, train=True, use_masks=False, rng=self.rng)
            nll = sess.nll_of_steps(ex.steps)
            total = nll if total is None else total + nll
        loss = total * (1.0 / len(batch))
        value = loss.item()
        if not np.isfinite(value):
            raise TrainingDiverged(f"loss became {value} at step {self.steps_done}")
        ad.backward(loss)
        self.opt.step()
        self.steps_done += 1
        return value

    def run_steps(self, examples, n_steps: int) -> float:
        """Run n optimizer steps, drawing shuffled batches; returns mean loss."""
        losses = []
        while len(losses) < n_steps:
            if not self._queue:
                self._queue = list(self._batches(examples))
            losses.append(self._step(self._queue.pop(0)))
        return float(np.mean(losses))

    def run_epoch(self, examples) -> float:
        losses = [self._step(b) for b in self._batches(examples)]
        return float(np.mean(losses))

    def mean_nll(self, examples) -> float:
        """Per-example NLL with dropout and masks off."""
        if not examples:
            return float("nan")
        total = 0.0
        with ad.no_grad():
            for ex in examples:
                sess = ModelSession(self.params, ex.ctx, train=False, use_masks=False)
                total += sess.nll_of_steps(ex.steps).item()
        return total / len(examples)


def build_model(pairs, config: TrainConfig, train_pairs=None) -> tuple[ModelParams, list, list]:
    """Derive grammar/vocabulary from the training split and set up the model.

    Returns (params, train_examples, val_examples).
    """
    if train_pairs is None:
        train_pairs, val_pairs = split_pairs(pairs, config.val_fraction)
    else:
        val_pairs = [p for p in pairs if p not in train_pairs]
    ids, lits = frequent_tokens(train_pairs, config.frequent_threshold)
    eg = derive_edit_grammar(GRAMMAR, ids, lits)
    train_examples, _ = extract_many(train_pairs, eg, config.copy_enabled)
    val_examples, _ = extract_many(val_pairs, eg, config.copy_enabled)
    vocab = token_vocab_for(eg, [p.buggy for p in train_pairs])
    params = ModelParams(config.hyperparams(), eg, vocab, seed=config.seed)
    return params, train_examples, val_examples


def train(pairs, config: TrainConfig, checkpoint_path=None, log=print):
    """End-to-end training from patch pairs; returns (params, metrics)."""
    params, train_examples, val_examples = build_model(pairs, config)
    if not train_examples:
        raise ValueError("no usable training examples")
    trainer = Trainer(params, config)
    metrics = {"train_nll": [], "val_nll": [], "n_train": len(train_examples), "n_val": len(val_examples)}
    for epoch in range(config.epochs):
        train_loss = trainer.run_epoch(train_examples)
        val_loss = trainer.mean_nll(val_examples)
        metrics["train_nll"].append(train_loss)
        metrics["val_nll"].append(val_loss)
        if log:
            log(f"epoch {epoch + 1}/{config.epochs}: train NLL {train_loss:.4f}  val NLL {val_loss:.4f}")
        if checkpoint_path:
            params.save(checkpoint_path)
    if checkpoint_path:
        params.save(checkpoint_path)
    return params, metrics

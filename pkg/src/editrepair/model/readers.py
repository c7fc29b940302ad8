"""The three encoders feeding the edit decoder.

The code reader encodes the method surrounding the faulty statement as its
pre-order node sequence (self-attention, a gate against positional tags, and
graph convolution over the child/left-sibling edges). The rule-sequence reader
encodes the decisions taken so far, and the path reader encodes the root path
of the node being expanded, attending to both other encoders.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .. import autodiff as ad
from ..edits import EditContext
from ..grammar import descendants, subtree_size
from ..minilang.lang import statement_list
from .params import ModelParams, TAG_AFTER, TAG_BEFORE, TAG_FAULTY, TAG_OTHER


@lru_cache(maxsize=512)
def _position_table(length: int, d: int, offset: int) -> np.ndarray:
    pos = np.arange(offset, offset + length, dtype=np.float64)[:, None]
    j = np.arange(0, d, 2, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, j / d)
    table = np.zeros((length, d))
    table[:, 0::2] = np.sin(angle)
    table[:, 1::2] = np.cos(angle[:, : d // 2])
    table.setflags(write=False)
    return table


def position_embedding(length: int, d: int, offset: int = 0) -> np.ndarray:
    """Interleaved sinusoidal embeddings, one row per position."""
    return _position_table(length, d, offset)


@dataclass
class ContextEncoding:
    """Pre-computed model inputs for one edit context."""

    ctx: EditContext
    start: int  # program id of the first method node; position p <-> id start+p
    length: int
    token_ids: np.ndarray
    tag_ids: np.ndarray
    a_hat: np.ndarray
    symbols: list[str]
    copyable: dict[str, np.ndarray]
    locatable: np.ndarray

    def position_of(self, node_id: int) -> int:
        p = node_id - self.start
        if not 0 <= p < self.length:
            raise ValueError(f"node {node_id} outside the encoded method")
        return p

    def node_of(self, position: int) -> int:
        return self.start + position


def _normalized_adjacency(program, ids: list[int]) -> np.ndarray:
    n = len(ids)
    index = {node: k for k, node in enumerate(ids)}
    a = np.zeros((n, n))
    for node in ids:
        prev_child = None
        for c in program.node(node).children:
            a[index[node], index[c]] = 1.0  # node -> child
            if prev_child is not None:
                a[index[c], index[prev_child]] = 1.0  # node -> left sibling
            prev_child = c
    col = np.maximum(a.sum(axis=0), 1.0)
    row = np.maximum(a.sum(axis=1), 1.0)
    return a / np.sqrt(col[:, None] * row[None, :])


def encode_context(ctx: EditContext, params: ModelParams) -> ContextEncoding:
    program = ctx.program
    ids = list(descendants(program, ctx.method))
    start = ctx.method
    n = len(ids)

    tokens, symbols = [], []
    sizes = np.empty(n, dtype=np.int64)
    nonterminal = np.empty(n, dtype=bool)
    for k, node_id in enumerate(ids):
        node = program.node(node_id)
        symbols.append(node.symbol.name)
        tokens.append(node.token if node.symbol.is_terminal else node.symbol.name)
        sizes[k] = subtree_size(program, node_id)
        nonterminal[k] = not node.symbol.is_terminal
    token_ids = np.array([params.token_id(t) for t in tokens], dtype=np.int64)

    tags = np.full(n, TAG_OTHER, dtype=np.int64)
    siblings = statement_list(program, ctx.faulty_stmt)
    at = siblings.index(ctx.faulty_stmt)

    def mark(node_id: int, tag: int):
        for i in descendants(program, node_id):
            tags[i - start] = tag

    if at > 0:
        mark(siblings[at - 1], TAG_BEFORE)
    if at + 1 < len(siblings):
        mark(siblings[at + 1], TAG_AFTER)
    mark(ctx.faulty_stmt, TAG_FAULTY)

    big = nonterminal & (sizes > 1)
    copyable: dict[str, np.ndarray] = {}
    sym_arr = np.array(symbols)
    for name in set(symbols):
        copyable[name] = big & (sym_arr == name)
    lo = ctx.faulty_stmt - start
    hi = lo + subtree_size(program, ctx.faulty_stmt)
    in_faulty = np.zeros(n, dtype=bool)
    in_faulty[lo:hi] = True
    locatable = big & in_faulty

    return ContextEncoding(
        ctx=ctx,
        start=start,
        length=n,
        token_ids=token_ids,
        tag_ids=tags,
        a_hat=_normalized_adjacency(program, ids),
        symbols=symbols,
        copyable=copyable,
        locatable=locatable,
    )


# --- sub-layers ----------------------------------------------------------------


@lru_cache(maxsize=512)
def _causal_bias(n: int) -> np.ndarray:
    bias = np.zeros((n, n))
    bias[np.triu_indices(n, k=1)] = -np.inf
    bias.setflags(write=False)
    return bias


def multi_head_attention(params: ModelParams, prefix: str, q_in, kv_in, kv_cache=None,
                         bias: np.ndarray | None = None):
    """softmax(QK^T/sqrt(dk))V per head, heads re-joined by a linear map.

    `bias` is an additive score mask (0 / -inf), broadcast across heads.
    """
    d, heads = params.hp.d, params.hp.heads
    dk = d // heads
    lq = q_in.shape[0]
    q = ad.matmul(q_in, params[f"{prefix}.wq"])
    if kv_cache is None:
        k = ad.matmul(kv_in, params[f"{prefix}.wk"])
        v = ad.matmul(kv_in, params[f"{prefix}.wv"])
    else:
        k, v = kv_cache
    lk = k.shape[0]

    def heads_first(t, length):
        return ad.transpose(ad.reshape(t, (length, heads, dk)), (1, 0, 2))

    qh = heads_first(q, lq)
    kh = heads_first(k, lk)
    vh = heads_first(v, lk)
    scores = ad.matmul(qh, ad.transpose(kh, (0, 2, 1))) * (1.0 / np.sqrt(dk))
    if bias is not None:
        scores = scores + ad.Tensor(bias)
    scores = ad.softmax(scores, axis=-1)
    mixed = ad.transpose(ad.matmul(scores, vh), (1, 0, 2))
    return ad.matmul(ad.reshape(mixed, (lq, d)), params[f"{prefix}.wo"])


def cross_kv(params: ModelParams, prefix: str, kv_in):
    return (ad.matmul(kv_in, params[f"{prefix}.wk"]), ad.matmul(kv_in, params[f"{prefix}.wv"]))


_COL0 = None
_COL1 = None


def _gate_columns():
    global _COL0, _COL1
    if _COL0 is None or _COL0.data.dtype != ad.get_dtype():
        _COL0 = ad.Tensor(np.array([[1.0, 0.0]]))
        _COL1 = ad.Tensor(np.array([[0.0, 1.0]]))
    return _COL0, _COL1


def gating(params: ModelParams, prefix: str, q_src, c1, c2):
    """Per-position convex mix of two value projections, keyed on q."""
    q = ad.matmul(q_src, params[f"{prefix}.wq"])
    k1 = ad.matmul(c1, params[f"{prefix}.wk1"])
    v1 = ad.matmul(c1, params[f"{prefix}.wv1"])
    k2 = ad.matmul(c2, params[f"{prefix}.wk2"])
    v2 = ad.matmul(c2, params[f"{prefix}.wv2"])
    z1 = ad.reduce_sum(q * k1, axis=1, keepdims=True)
    z2 = ad.reduce_sum(q * k2, axis=1, keepdims=True)
    weights = ad.softmax(ad.concat([z1, z2], axis=1), axis=1)
    col0, col1 = _gate_columns()
    w1 = ad.reduce_sum(weights * col0, axis=1, keepdims=True)
    w2 = ad.reduce_sum(weights * col1, axis=1, keepdims=True)
    return w1 * v1 + w2 * v2


def tree_conv(params: ModelParams, prefix: str, u, a_hat: ad.Tensor):
    """Neighbor aggregation over the normalized graph, added residually."""
    g = ad.matmul(ad.matmul(a_hat, u), params[f"{prefix}.wg"])
    return u + g


# --- readers ---------------------------------------------------------------------


def code_reader(params: ModelParams, enc: ContextEncoding, drop):
    # sub-layer outputs join their inputs additively: without any residual
    # path the attention stack degenerates to near-uniform averaging and
    # cannot be trained to address individual positions
    hp = params.hp
    pos = ad.Tensor(position_embedding(enc.length, hp.d, hp.position_offset))
    x = ad.embedding_lookup(params["tok_embed"], enc.token_ids) + pos
    tags = ad.embedding_lookup(params["tag_embed"], enc.tag_ids)
    a_hat = ad.Tensor(enc.a_hat)
    for i in range(hp.code_blocks):
        a = x + drop(multi_head_attention(params, f"code{i}.attn", x, x))
        u = a + drop(gating(params, f"code{i}.gate", a, a, tags))
        x = tree_conv(params, f"code{i}.conv", u, a_hat)
    return x


def rule_entry_adjacency(parents: list[int], left_siblings: list[int | None]) -> np.ndarray:
    """Row-normalized graph over rule entries: each entry aggregates the entry
    that created its node and its previously-expanded sibling. Edges point
    backward in expansion order, so features of a prefix never depend on later
    entries and teacher-forced training matches stepwise inference exactly."""
    n = len(parents)
    a = np.zeros((n, n))
    for k in range(1, n):
        a[k, parents[k]] = 1.0
        if left_siblings[k] is not None:
            a[k, left_siblings[k]] = 1.0
    return a / np.maximum(a.sum(axis=1, keepdims=True), 1.0)


def ast_reader(params: ModelParams, entry_ids: np.ndarray, a_hat: np.ndarray,
               code_feats, drop, code_cache=None):
    """Causal encoder over the rule-entry sequence of a partial edit script."""
    hp = params.hp
    n = len(entry_ids)
    rules = ad.embedding_lookup(params["rule_embed"], np.asarray(entry_ids))
    pos = ad.Tensor(position_embedding(n, hp.d, hp.position_offset))
    x = rules + pos
    a_hat_t = ad.Tensor(a_hat)
    bias = _causal_bias(n)
    for i in range(hp.ast_blocks):
        a = x + drop(multi_head_attention(params, f"ast{i}.attn", x, x, bias=bias))
        u = a + drop(gating(params, f"ast{i}.gate", a, a, rules))
        cache = code_cache[i] if code_cache is not None else None
        c = u + drop(multi_head_attention(params, f"ast{i}.cross", u, code_feats, cache))
        x = tree_conv(params, f"ast{i}.conv", c, a_hat_t)
    return x


def tree_path_reader(params: ModelParams, path_symbol_ids: np.ndarray, ast_feats,
                     code_feats, drop, ast_cache=None, code_cache=None,
                     ast_bias: np.ndarray | None = None):
    """Root-path encoder; `ast_bias` can restrict which rule entries are
    visible (used to address one step of a teacher-forced sequence)."""
    hp = params.hp
    pos = ad.Tensor(position_embedding(len(path_symbol_ids), hp.d, hp.position_offset))
    x = ad.embedding_lookup(params["sym_embed"], path_symbol_ids) + pos
    for i in range(hp.path_blocks):
        x = x + drop(multi_head_attention(params, f"path{i}.ast_attn", x, ast_feats,
                                          ast_cache[i] if ast_cache else None, bias=ast_bias))
        x = x + drop(multi_head_attention(params, f"path{i}.code_attn", x, code_feats,
                                          code_cache[i] if code_cache else None))
    h = ad.gelu(ad.matmul(x, params["path_fc1.w"]) + params["path_fc1.b"])
    return x + drop(ad.matmul(h, params["path_fc2.w"]) + params["path_fc2.b"])

import random

import numpy as np
import pytest

from editrepair import autodiff as ad
from editrepair.edits import context_for
from editrepair.grammar import Draft, freeze, structural_equal
from editrepair.minilang import parse, statement_nodes, to_source
from editrepair.minilang.lang import GRAMMAR
from editrepair.model.decoder import ModelSession
from editrepair.model.params import TAG_AFTER, TAG_BEFORE, TAG_FAULTY, TAG_OTHER
from editrepair.model.readers import (
    ast_reader,
    code_reader,
    encode_context,
    gating,
    multi_head_attention,
    position_embedding,
    rule_entry_adjacency,
    tree_conv,
    tree_path_reader,
)

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


def test_position_embedding_zero_row():
    p = position_embedding(3, 8)
    assert np.allclose(p[0, 0::2], 0.0)
    assert np.allclose(p[0, 1::2], 1.0)


def test_position_embedding_first_component_is_sine():
    p = position_embedding(10, 8)
    assert np.allclose(p[:, 0], np.sin(np.arange(10)))


def test_position_embedding_rotation_identity():
    # [sin(p+k), cos(p+k)] is a rotation of [sin p, cos p] by angle k/f per pair
    d, k = 16, 5
    p = position_embedding(40, d)
    freqs = 1.0 / np.power(10000.0, np.arange(0, d, 2) / d)
    for pos in (0, 3, 17):
        for j, f in enumerate(freqs):
            s, c = p[pos, 2 * j], p[pos, 2 * j + 1]
            angle = k * f
            rot_s = s * np.cos(angle) + c * np.sin(angle)
            rot_c = c * np.cos(angle) - s * np.sin(angle)
            assert abs(rot_s - p[pos + k, 2 * j]) < 1e-9
            assert abs(rot_c - p[pos + k, 2 * j + 1]) < 1e-9


def test_position_embedding_offset_knob():
    assert np.allclose(position_embedding(4, 8, offset=3), position_embedding(7, 8)[3:])


def test_encode_context_tags(ctx):
    params = _tiny_params(ctx)
    enc = encode_context(ctx, params)
    prog = ctx.program
    stmts = statement_nodes(prog)
    tag_of = {node: enc.tag_ids[enc.position_of(node)] for node in stmts}
    assert tag_of[stmts[1]] == TAG_FAULTY
    assert tag_of[stmts[0]] == TAG_BEFORE
    assert tag_of[stmts[2]] == TAG_AFTER
    # the method header is neither
    assert enc.tag_ids[0] == TAG_OTHER


def test_encode_context_adjacency_normalization(ctx):
    params = _tiny_params(ctx)
    enc = encode_context(ctx, params)
    a = enc.a_hat
    assert a.shape == (enc.length, enc.length)
    assert (a >= 0).all()
    # two-node chain: parent -> child edge normalized by unit degrees
    prog = parse("fn main(){ return 1; }")
    c2 = context_for(prog, statement_nodes(prog)[0])
    e2 = encode_context(c2, _tiny_params(c2))
    row = e2.a_hat[0]
    assert row.max() <= 1.0


def _tiny_params(ctx, seed=0, d=16, heads=2):
    from editrepair.edits import derive_edit_grammar
    from editrepair.model.params import Hyperparams, ModelParams, token_vocab_for

    eg = derive_edit_grammar(GRAMMAR, ["a", "b", "x"], ["0", "1", "2"])
    hp = Hyperparams(d=d, heads=heads, code_blocks=1, ast_blocks=1, path_blocks=1, dropout=0.0)
    vocab = token_vocab_for(eg, [ctx.program])
    return ModelParams(hp, eg, vocab, seed=seed)


def _no_drop(t):
    return t


def test_mha_single_position_is_linear_map(ctx):
    params = _tiny_params(ctx)
    rng = np.random.default_rng(0)
    x = ad.Tensor(rng.normal(size=(1, 16)))
    out = multi_head_attention(params, "code0.attn", x, x)
    v = np.matmul(x.data, params["code0.attn.wv"].data)
    want = np.matmul(v, params["code0.attn.wo"].data)
    assert np.allclose(out.data, want, atol=1e-5)


def test_mha_uniform_keys_average_values(ctx):
    params = _tiny_params(ctx)
    rng = np.random.default_rng(1)
    base = rng.normal(size=16)
    kv = ad.Tensor(np.tile(base, (5, 1)))  # identical rows -> uniform attention
    q = ad.Tensor(rng.normal(size=(3, 16)))
    out = multi_head_attention(params, "code0.attn", q, kv)
    v = np.matmul(kv.data, params["code0.attn.wv"].data)
    want = np.matmul(v.mean(axis=0, keepdims=True), params["code0.attn.wo"].data)
    assert np.allclose(out.data, np.tile(want, (3, 1)), atol=1e-5)


def test_mha_matches_hand_rolled_reference(ctx):
    params = _tiny_params(ctx)
    d, h = 16, 2
    rng = np.random.default_rng(2)
    x = rng.normal(size=(3, d)).astype(np.float32)
    out = multi_head_attention(params, "code0.attn", ad.Tensor(x), ad.Tensor(x)).data

    wq = params["code0.attn.wq"].data
    wk = params["code0.attn.wk"].data
    wv = params["code0.attn.wv"].data
    wo = params["code0.attn.wo"].data
    q, k, v = x @ wq, x @ wk, x @ wv
    dk = d // h
    heads = []
    for j in range(h):
        qs, ks, vs = (m[:, j * dk:(j + 1) * dk] for m in (q, k, v))
        scores = qs @ ks.T / np.sqrt(dk)
        e = np.exp(scores - scores.max(axis=-1, keepdims=True))
        w = e / e.sum(axis=-1, keepdims=True)
        heads.append(w @ vs)
    want = np.concatenate(heads, axis=1) @ wo
    assert np.allclose(out, want, atol=1e-5)


def test_gating_identical_inputs_returns_value_projection(ctx):
    params = _tiny_params(ctx)
    # force the two branches to share projections
    params.tensors["code0.gate.wk2"].data = params["code0.gate.wk1"].data.copy()
    params.tensors["code0.gate.wv2"].data = params["code0.gate.wv1"].data.copy()
    rng = np.random.default_rng(3)
    c = ad.Tensor(rng.normal(size=(4, 16)))
    out = gating(params, "code0.gate", c, c, c)
    want = np.matmul(c.data, params["code0.gate.wv1"].data)
    assert np.allclose(out.data, want, atol=1e-5)


def test_gating_is_convex_combination_hand_calc(ctx):
    params = _tiny_params(ctx, d=2, heads=1)
    rng = np.random.default_rng(4)
    q = rng.normal(size=(1, 2))
    c1 = rng.normal(size=(1, 2))
    c2 = rng.normal(size=(1, 2))
    out = gating(params, "code0.gate", ad.Tensor(q), ad.Tensor(c1), ad.Tensor(c2)).data

    def proj(x, name):
        return x @ params[name].data

    z1 = float((proj(q, "code0.gate.wq") * proj(c1, "code0.gate.wk1")).sum())
    z2 = float((proj(q, "code0.gate.wq") * proj(c2, "code0.gate.wk2")).sum())
    a1, a2 = np.exp(z1), np.exp(z2)
    want = (a1 * proj(c1, "code0.gate.wv1") + a2 * proj(c2, "code0.gate.wv2")) / (a1 + a2)
    assert np.allclose(out, want, atol=1e-5)


def test_tree_conv_identity_adjacency(ctx):
    params = _tiny_params(ctx)
    params.tensors["code0.conv.wg"].data = np.eye(16, dtype=np.float32)
    rng = np.random.default_rng(5)
    u = ad.Tensor(rng.normal(size=(4, 16)))
    out = tree_conv(params, "code0.conv", u, ad.Tensor(np.eye(4)))
    assert np.allclose(out.data, 2 * u.data, atol=1e-5)  # aggregation plus residual


def test_code_reader_shapes_and_determinism(ctx):
    params = _tiny_params(ctx)
    enc = encode_context(ctx, params)
    out1 = code_reader(params, enc, _no_drop)
    out2 = code_reader(params, enc, _no_drop)
    assert out1.shape == (enc.length, 16)
    assert np.array_equal(out1.data, out2.data)
    assert np.isfinite(out1.data).all()


def test_code_reader_tag_sensitivity(ctx):
    params = _tiny_params(ctx)
    enc = encode_context(ctx, params)
    out1 = code_reader(params, enc, _no_drop).data
    flipped = enc.tag_ids.copy()
    pos = int(np.argmax(flipped == TAG_OTHER))
    flipped[pos] = TAG_FAULTY
    enc2 = type(enc)(**{**enc.__dict__, "tag_ids": flipped})
    out2 = code_reader(params, enc2, _no_drop).data
    assert not np.allclose(out1, out2)


def test_swapping_equal_other_subtrees_leaves_features_unchanged():
    # swapping two structurally-equal 'other'-tagged sibling statements yields
    # the same encoded inputs position for position, so code features are
    # bitwise identical (with position embeddings, only the equal-subtree
    # permutation has this property)
    src = """\
fn main(a: int) -> int {
    a = a + 1;
    a = a + 1;
    var x: int = 2;
    return x + a;
}
"""
    prog = parse(src)
    stmts = statement_nodes(prog)
    ctx = context_for(prog, stmts[3])  # the return statement is faulty
    params = _tiny_params(ctx)
    enc = encode_context(ctx, params)

    first, second = stmts[0], stmts[1]
    assert structural_equal(
        freeze(_as_draft(prog, first)), freeze(_as_draft(prog, second))
    )
    swapped = _swap_stmts(prog, first, second)
    ctx2 = context_for(swapped, statement_nodes(swapped)[3])
    enc2 = encode_context(ctx2, params)
    assert np.array_equal(enc.token_ids, enc2.token_ids)
    assert np.array_equal(enc.tag_ids, enc2.tag_ids)
    out1 = code_reader(params, enc, _no_drop).data
    out2 = code_reader(params, enc2, _no_drop).data
    assert np.array_equal(out1, out2)


def _as_draft(tree, node_id):
    n = tree.node(node_id)
    return Draft(n.symbol, n.token, [_as_draft(tree, c) for c in n.children])


def _swap_stmts(tree, a, b):
    def build(i):
        if i == a:
            return _as_draft(tree, b)
        if i == b:
            return _as_draft(tree, a)
        n = tree.node(i)
        return Draft(n.symbol, n.token, [build(c) for c in n.children])

    return freeze(build(tree.root))


def test_ast_reader_length_one_for_start_state(ctx):
    params = _tiny_params(ctx)
    enc = encode_context(ctx, params)
    code = code_reader(params, enc, _no_drop)
    a_hat = rule_entry_adjacency([0], [None])
    out = ast_reader(params, [params.start_slot], a_hat, code, _no_drop)
    assert out.shape == (1, 16)


def test_ast_reader_depends_on_code_features(ctx):
    params = _tiny_params(ctx)
    enc = encode_context(ctx, params)
    code = code_reader(params, enc, _no_drop)
    a_hat = rule_entry_adjacency([0, 0], [None, None])
    entries = [params.start_slot, 0]
    out1 = ast_reader(params, entries, a_hat, code, _no_drop).data
    bumped = ad.Tensor(code.data + 0.37)
    out2 = ast_reader(params, entries, a_hat, bumped, _no_drop).data
    assert not np.allclose(out1, out2)


def test_ast_reader_causal_prefix_equivalence(ctx):
    # row k of a full causal pass equals the last row of the prefix pass
    params = _tiny_params(ctx)
    enc = encode_context(ctx, params)
    code = code_reader(params, enc, _no_drop)
    entries = [params.start_slot, 0, 2, 4, 1]
    parents = [0, 0, 1, 1, 2]
    sibs = [None, None, None, 2, None]
    full = ast_reader(params, entries, rule_entry_adjacency(parents, sibs), code, _no_drop).data
    for k in range(1, len(entries) + 1):
        prefix = ast_reader(
            params, entries[:k], rule_entry_adjacency(parents[:k], sibs[:k]), code, _no_drop
        ).data
        assert np.allclose(full[k - 1], prefix[-1], atol=1e-5)


def test_tree_path_reader_shapes(ctx):
    params = _tiny_params(ctx)
    enc = encode_context(ctx, params)
    code = code_reader(params, enc, _no_drop)
    ast = ast_reader(params, [params.start_slot], rule_entry_adjacency([0], [None]), code, _no_drop)
    one = tree_path_reader(params, np.array([params.symbol_ids["Edits"]]), ast, code, _no_drop)
    assert one.shape == (1, 16)
    three = tree_path_reader(
        params,
        np.array([params.symbol_ids[s] for s in ("Edits", "Edit", "Insert")]),
        ast, code, _no_drop,
    )
    assert three.shape == (3, 16)
    assert np.isfinite(three.data).all()


def test_reader_outputs_finite_many_trials(ctx):
    params = _tiny_params(ctx)
    rng = np.random.default_rng(0)
    gen_rng = random.Random(0)
    from editrepair.minilang.randprog import ProgramGenerator

    gen = ProgramGenerator(gen_rng)
    trials = 0
    with ad.no_grad():
        while trials < 300:
            prog = gen.program()
            stmts = statement_nodes(prog)
            c = context_for(prog, stmts[gen_rng.randrange(len(stmts))])
            enc = encode_context(c, params)
            out = code_reader(params, enc, _no_drop)
            assert np.isfinite(out.data).all()
            trials += 1


def test_gradients_flow_to_every_parameter(ctx, small_examples, untrained_params):
    params = untrained_params
    for t in params.trainables():
        t.zero_grad()
    total = None
    for ex in small_examples[:6]:
        sess = ModelSession(params, ex.ctx, train=False, use_masks=False)
        nll = sess.nll_of_steps(ex.steps)
        total = nll if total is None else total + nll
    ad.backward(total)
    dead = [name for name, t in params.tensors.items() if not np.abs(t.grad).any()]
    assert not dead, dead

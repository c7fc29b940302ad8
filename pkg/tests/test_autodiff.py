import numpy as np
import pytest

from editrepair import autodiff as ad


@pytest.fixture()
def f64():
    ad.set_dtype(np.float64)
    yield
    ad.set_dtype(np.float32)


def relerr(a, b):
    return abs(a - b) / max(1e-6, abs(a), abs(b))


def finite_diff_check(fn, tensors, eps=1e-5, tol=1e-4, rng=None):
    """Central differences against analytic gradients on sampled coordinates."""
    rng = rng or np.random.default_rng(0)
    out = fn()
    ad.backward(out)
    for t in tensors:
        flat = t.data.reshape(-1)
        grad = t.grad.reshape(-1)
        count = min(6, flat.size)
        for i in rng.choice(flat.size, size=count, replace=False):
            old = flat[i]
            flat[i] = old + eps
            up = fn().item()
            flat[i] = old - eps
            down = fn().item()
            flat[i] = old
            numeric = (up - down) / (2 * eps)
            assert relerr(numeric, grad[i]) < tol, (numeric, grad[i])


def test_softmax_symmetry():
    y = ad.softmax(ad.Tensor([0.0, 0.0]))
    assert np.allclose(y.data, [0.5, 0.5])


def test_softmax_rows_sum_to_one():
    rng = np.random.default_rng(1)
    y = ad.softmax(ad.Tensor(rng.normal(size=(4, 7))), axis=-1)
    assert np.allclose(y.data.sum(axis=-1), 1.0, atol=1e-6)


def test_masked_fill_zero_mass():
    x = ad.Tensor(np.zeros((2, 5)))
    mask = np.array([[True, False, False, True, False]] * 2)
    y = ad.softmax(ad.masked_fill(x, mask), axis=-1)
    assert (y.data[mask] == 0.0).all()
    assert np.allclose(y.data.sum(axis=-1), 1.0)


def test_gelu_zero():
    assert ad.gelu(ad.Tensor([0.0])).data[0] == 0.0


def test_backward_sum_gives_ones():
    w = ad.Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
    ad.backward(ad.reduce_sum(w))
    assert np.array_equal(w.grad, np.ones((2, 3)))


def test_backward_product_rule():
    x = ad.Tensor([3.0], requires_grad=True)
    y = ad.Tensor([4.0], requires_grad=True)
    ad.backward(ad.reduce_sum(x * y))
    assert x.grad[0] == 4.0 and y.grad[0] == 3.0


def test_backward_requires_scalar():
    w = ad.Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ValueError):
        ad.backward(w * 2.0)


def test_backward_accumulates_fanout():
    x = ad.Tensor([2.0], requires_grad=True)
    y = x * 3.0
    ad.backward(ad.reduce_sum(y + y))
    assert x.grad[0] == 6.0


@pytest.mark.parametrize("name", [
    "add", "sub", "mul", "div", "matmul", "batched_matmul", "transpose",
    "reshape", "concat", "reduce_sum", "softmax", "tanh", "exp", "log",
    "gelu", "embedding", "masked_fill",
])
def test_finite_difference_per_op(name, f64):
    rng = np.random.default_rng(7)
    a = ad.Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    b = ad.Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    m = ad.Tensor(rng.normal(size=(4, 5)), requires_grad=True)
    b3 = ad.Tensor(rng.normal(size=(2, 4, 3)), requires_grad=True)
    a3 = ad.Tensor(rng.normal(size=(2, 3, 4)), requires_grad=True)
    table = ad.Tensor(rng.normal(size=(6, 4)), requires_grad=True)
    mask = rng.random((3, 4)) < 0.4
    mask[:, 0] = False  # keep every softmax row alive
    fns = {
        "add": (lambda: ad.reduce_sum(ad.tanh(a + b)), [a, b]),
        "sub": (lambda: ad.reduce_sum(ad.tanh(a - b)), [a, b]),
        "mul": (lambda: ad.reduce_sum(ad.tanh(a * b)), [a, b]),
        "div": (lambda: ad.reduce_sum(ad.tanh(a / (b + 3.0))), [a, b]),
        "matmul": (lambda: ad.reduce_sum(ad.tanh(ad.matmul(a, m))), [a, m]),
        "batched_matmul": (lambda: ad.reduce_sum(ad.tanh(ad.matmul(a3, b3))), [a3, b3]),
        "transpose": (lambda: ad.reduce_sum(ad.tanh(ad.transpose(a3, (2, 0, 1)))), [a3]),
        "reshape": (lambda: ad.reduce_sum(ad.tanh(ad.reshape(a, (2, 6)))), [a]),
        "concat": (lambda: ad.reduce_sum(ad.tanh(ad.concat([a, b], axis=1))), [a, b]),
        "reduce_sum": (lambda: ad.reduce_sum(ad.tanh(ad.reduce_sum(a, axis=0, keepdims=True))), [a]),
        "softmax": (lambda: ad.reduce_sum(ad.softmax(a, axis=-1) * b), [a, b]),
        "tanh": (lambda: ad.reduce_sum(ad.tanh(a) * b), [a]),
        "exp": (lambda: ad.reduce_sum(ad.exp(a * 0.3)), [a]),
        "log": (lambda: ad.reduce_sum(ad.log(ad.exp(a) + 1.0)), [a]),
        "gelu": (lambda: ad.reduce_sum(ad.gelu(a) * b), [a]),
        "embedding": (lambda: ad.reduce_sum(ad.tanh(ad.embedding_lookup(table, [0, 2, 2, 5]))), [table]),
        "masked_fill": (lambda: ad.reduce_sum(ad.softmax(ad.masked_fill(a, mask), axis=-1) * b), [a]),
    }
    fn, tensors = fns[name]
    finite_diff_check(fn, tensors)


def test_broadcast_bias_gradient(f64):
    rng = np.random.default_rng(3)
    x = ad.Tensor(rng.normal(size=(5, 4)), requires_grad=True)
    bias = ad.Tensor(rng.normal(size=(4,)), requires_grad=True)
    finite_diff_check(lambda: ad.reduce_sum(ad.tanh(x + bias)), [x, bias])


def test_dropout_train_and_eval():
    rng = np.random.default_rng(0)
    x = ad.Tensor(np.ones((100, 10)))
    out_eval = ad.dropout(x, 0.5, rng, train=False)
    assert out_eval is x
    out_train = ad.dropout(x, 0.5, np.random.default_rng(0), train=True)
    kept = out_train.data != 0
    assert 0.3 < kept.mean() < 0.7
    assert np.allclose(out_train.data[kept], 2.0)


def test_no_grad_builds_no_graph():
    w = ad.Tensor(np.ones(3), requires_grad=True)
    with ad.no_grad():
        y = ad.reduce_sum(w * 2.0)
    assert y._backward is None and y._parents == ()


def test_adam_zero_gradient_is_noop():
    w = ad.Tensor([1.0, -2.0], requires_grad=True)
    opt = ad.Adam([w], lr=0.1)
    before = w.data.copy()
    opt.zero_grad()
    opt.step()
    assert np.array_equal(w.data, before)


def test_adam_quadratic_convergence():
    w = ad.Tensor([5.0], requires_grad=True)
    opt = ad.Adam([w], lr=0.01)
    for _ in range(5000):
        opt.zero_grad()
        ad.backward(ad.reduce_sum(w * w))
        opt.step()
        if w.data[0] ** 2 < 1e-6:
            break
    assert w.data[0] ** 2 < 1e-6


def test_adam_first_step_is_signed_lr():
    w = ad.Tensor([1.0, -1.0, 2.5], requires_grad=True)
    before = w.data.copy()
    opt = ad.Adam([w], lr=0.05)
    opt.zero_grad()
    ad.backward(ad.reduce_sum(w * ad.Tensor([3.0, -2.0, 0.5])))
    opt.step()
    move = w.data - before
    grad_sign = np.sign([3.0, -2.0, 0.5])
    assert np.allclose(move, -0.05 * grad_sign, atol=1e-4)


def test_training_determinism_bitwise():
    def little_run():
        ad.set_dtype(np.float32)
        rng = np.random.default_rng(0)
        w = ad.Tensor(np.linspace(-1, 1, 8).reshape(2, 4), requires_grad=True)
        opt = ad.Adam([w], lr=1e-2)
        for _ in range(50):
            opt.zero_grad()
            x = ad.Tensor(np.arange(8.0).reshape(4, 2) / 7.0)
            h = ad.dropout(ad.tanh(ad.matmul(w, x)), 0.2, rng, train=True)
            ad.backward(ad.reduce_sum(h * h))
            opt.step()
        return w.data.tobytes()

    assert little_run() == little_run()


def test_checkpoint_roundtrip(tmp_path):
    arrays = {
        "a.w": np.arange(12, dtype=np.float32).reshape(3, 4),
        "b": np.array([1.5, -2.5], dtype=np.float32),
    }
    meta = {"d": 64, "vocab": ["x", "y"], "version_note": 1}
    path = tmp_path / "model.ckpt"
    ad.save_checkpoint(path, arrays, meta)
    loaded, hp = ad.load_checkpoint(path)
    assert hp == meta
    for k in arrays:
        assert np.array_equal(loaded[k], arrays[k])
    # manifest line is valid standalone JSON
    import json

    with open(path, "rb") as fh:
        manifest = json.loads(fh.readline())
    assert manifest["format_version"] == 1
    assert [t["name"] for t in manifest["tensors"]] == ["a.w", "b"]


def test_checkpoint_truncation_detected(tmp_path):
    path = tmp_path / "model.ckpt"
    ad.save_checkpoint(path, {"w": np.ones(4, dtype=np.float32)}, {})
    data = path.read_bytes()
    path.write_bytes(data[:-4])
    with pytest.raises(ValueError):
        ad.load_checkpoint(path)

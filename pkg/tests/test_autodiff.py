import numpy as np
import pytest

from graphforget import autodiff as ad


def finite_diff(f, x, h=1e-6):
    """Central differences of a scalar function over an array."""
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp = x.copy()
        xp[idx] += h
        xm = x.copy()
        xm[idx] -= h
        g[idx] = (f(xp) - f(xm)) / (2 * h)
    return g


def test_sum_gradient_is_ones():
    w = ad.param(np.arange(6.0).reshape(2, 3))
    loss = ad.reduce_sum(w)
    (g,) = ad.grad(loss, [w])
    assert np.array_equal(g, np.ones((2, 3)))


def test_unused_parameter_gets_zero_gradient():
    w = ad.param(np.ones((2, 2)))
    other = ad.param(np.ones(3))
    loss = ad.reduce_sum(w)
    g_w, g_other = ad.grad(loss, [w, other])
    assert np.array_equal(g_other, np.zeros(3))


def test_non_scalar_loss_rejected():
    w = ad.param(np.ones((2, 2)))
    with pytest.raises(ValueError, match="scalar"):
        ad.backward(ad.relu(w))


def test_matmul_gradients_match_fd():
    rng = np.random.default_rng(0)
    a_val = rng.normal(size=(3, 4))
    b_val = rng.normal(size=(4, 2))
    a, b = ad.param(a_val), ad.param(b_val)
    loss = ad.reduce_sum(ad.relu(ad.matmul(a, b)))
    g_a, g_b = ad.grad(loss, [a, b])

    def f_a(x):
        return float(ad.reduce_sum(ad.relu(ad.matmul(ad.param(x), ad.constant(b_val)))).value)

    def f_b(x):
        return float(ad.reduce_sum(ad.relu(ad.matmul(ad.constant(a_val), ad.param(x)))).value)

    assert np.allclose(g_a, finite_diff(f_a, a_val), atol=1e-6)
    assert np.allclose(g_b, finite_diff(f_b, b_val), atol=1e-6)


def test_spmm_gradient_matches_fd():
    from scipy import sparse

    rng = np.random.default_rng(1)
    s = sparse.random(5, 5, density=0.5, random_state=2, format="csr")
    s = (s + s.T).tocsr()
    h_val = rng.normal(size=(5, 3))
    h = ad.param(h_val)
    loss = ad.reduce_sum(ad.relu(ad.spmm(s, h)))
    (g,) = ad.grad(loss, [h])

    def f(x):
        return float(ad.reduce_sum(ad.relu(ad.spmm(s, ad.param(x)))).value)

    assert np.allclose(g, finite_diff(f, h_val), atol=1e-6)


def test_edge_logits_with_repeated_nodes():
    rng = np.random.default_rng(3)
    h_val = rng.normal(size=(4, 3))
    pairs = np.array([[0, 1], [0, 2], [1, 0]])  # node 0 appears three times
    h = ad.param(h_val)
    loss = ad.reduce_sum(ad.edge_logits(h, pairs))
    (g,) = ad.grad(loss, [h])

    def f(x):
        hn = ad.param(x)
        return float(ad.reduce_sum(ad.edge_logits(hn, pairs)).value)

    assert np.allclose(g, finite_diff(f, h_val), atol=1e-6)


def test_losses_match_fd():
    rng = np.random.default_rng(4)
    z_val = rng.normal(size=6)
    labels = np.array([1.0, 0, 1, 0, 1, 1])
    target = rng.uniform(0.1, 0.9, size=6)

    z = ad.param(z_val)
    p = ad.sigmoid(z, 1.7)
    loss = ad.add(ad.bce(p, labels), ad.kl_bernoulli(target, ad.sigmoid(z, 0.8)))
    (g,) = ad.grad(loss, [z])

    def f(x):
        zz = ad.param(x)
        pp = ad.sigmoid(zz, 1.7)
        return float(ad.add(ad.bce(pp, labels), ad.kl_bernoulli(target, ad.sigmoid(zz, 0.8))).value)

    assert np.allclose(g, finite_diff(f, z_val), atol=1e-6)


def test_mse_rows_gradient():
    rng = np.random.default_rng(5)
    a_val = rng.normal(size=(5, 2))
    rows = np.array([0, 2, 4])
    target = rng.normal(size=(3, 2))
    a = ad.param(a_val)
    loss = ad.mse_rows(a, target, rows)
    (g,) = ad.grad(loss, [a])
    assert np.array_equal(g[1], np.zeros(2))  # untouched rows get no gradient

    def f(x):
        return float(ad.mse_rows(ad.param(x), target, rows).value)

    assert np.allclose(g, finite_diff(f, a_val), atol=1e-6)


def test_scale_by_scalar_gradient():
    rng = np.random.default_rng(6)
    x_val = rng.normal(size=(3, 2))
    s_val = np.array([0.7])
    x, s = ad.param(x_val), ad.param(s_val)
    loss = ad.reduce_sum(ad.relu(ad.scale_by(x, ad.add_const(s, 1.0))))
    g_x, g_s = ad.grad(loss, [x, s])

    def f_s(sv):
        return float(
            ad.reduce_sum(ad.relu(ad.scale_by(ad.constant(x_val), ad.add_const(ad.param(sv), 1.0)))).value
        )

    assert np.allclose(g_s, finite_diff(f_s, s_val), atol=1e-6)


def test_constant_subtree_not_traversed():
    c = ad.constant(np.ones((2, 2)))
    w = ad.param(np.ones((2, 2)))
    loss = ad.reduce_sum(ad.add(w, c))
    ad.backward(loss)
    assert c.grad is None
    assert np.array_equal(w.grad, np.ones((2, 2)))


def test_grad_accumulates_over_shared_nodes():
    w = ad.param(np.array([[1.0, 2.0]]))
    doubled = ad.add(w, w)
    loss = ad.reduce_sum(doubled)
    (g,) = ad.grad(loss, [w])
    assert np.array_equal(g, np.full((1, 2), 2.0))


def test_backward_is_deterministic():
    rng = np.random.default_rng(7)
    a_val = rng.normal(size=(4, 4))

    def run():
        a = ad.param(a_val)
        loss = ad.reduce_sum(ad.relu(ad.matmul(a, a)))
        return ad.grad(loss, [a])[0]

    assert np.array_equal(run(), run())

import math

import numpy as np
import pytest

from degbench import tensor as T
from degbench.attacks import AttackError, FgsmConfig, adversarial_sweep, fgsm_untargeted, input_gradient
from degbench.metrics import top_k_from_scores
from degbench.models import Dense, ModelConfig, Network, build_small_cnn, predict


def linear_model(w: np.ndarray, b: np.ndarray) -> Network:
    cfg = ModelConfig((1, 2, 2), (Dense(2, "softmax"),), "cross_entropy", name="linear")
    net = Network(cfg)
    net.params["dense1.w"] = w.astype(np.float32)
    net.params["dense1.b"] = b.astype(np.float32)
    return net


def softplus(z):
    return math.log1p(math.exp(z))


def batch(n=6, side=16, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(0.1, 0.9, (n, 3, side, side)).astype(np.float32), rng.integers(0, 4, n)


def test_eps_zero_is_bitwise_identity():
    net = Network(build_small_cnn(16, 4))
    x, y = batch()
    assert fgsm_untargeted(net, x, y, 0.0).tobytes() == x.tobytes()


@pytest.mark.parametrize("eps", [0.01, 0.05, 0.3])
def test_infinity_norm_bound(eps):
    net = Network(build_small_cnn(16, 4))
    x, y = batch()
    adv = fgsm_untargeted(net, x, y, eps)
    d = np.abs(adv.astype(np.float64) - x)
    assert d.max() <= eps + 1e-6
    g = input_gradient(net, x, y)
    free = (g != 0) & (x + eps < 1) & (x - eps > 0)
    np.testing.assert_allclose(d[free], eps, atol=1e-6)
    assert np.all(d[g == 0] == 0)
    assert adv.min() >= 0 and adv.max() <= 1 and adv.shape == x.shape


def test_linear_model_loss_increase_closed_form():
    rng = np.random.default_rng(3)
    for trial in range(10):
        w = rng.normal(size=(4, 2))
        b = rng.normal(size=2)
        net = linear_model(w, b)
        x = rng.uniform(0.3, 0.7, (1, 1, 2, 2))
        y = int(rng.integers(0, 2))
        o = 1 - y
        w32, b32 = w.astype(np.float32).astype(np.float64), b.astype(np.float32).astype(np.float64)
        dw = w32[:, o] - w32[:, y]
        xf = x.reshape(-1).astype(np.float32).astype(np.float64)
        margin = xf @ dw + b32[o] - b32[y]
        for eps in (1e-3, 0.05, 0.2):
            adv = fgsm_untargeted(net, x.astype(np.float32), np.array([y]), eps)
            loss = lambda v: float(net.loss_and_forward(v, np.array([y]))[0].data)  # noqa: E731
            gained = loss(adv) - loss(x.astype(np.float32))
            # exact: the margin grows by eps * ||dw||_1 under sign steps
            exact = softplus(margin + eps * np.abs(dw).sum()) - softplus(margin)
            assert abs(gained - exact) < 1e-4
        first_order = 1e-3 * np.abs(dw).sum() / (1 + math.exp(-margin))  # eps * |w|_1 * p_other
        adv = fgsm_untargeted(net, x.astype(np.float32), np.array([y]), 1e-3)
        gained = loss(adv) - loss(x.astype(np.float32))
        assert abs(gained - first_order) < 1e-4


def test_sweep_eps_zero_row():
    net = Network(build_small_cnn(16, 4))
    x, y = batch()
    (rec,) = adversarial_sweep(net, x, y, [0.0])
    assert rec.top1 == top_k_from_scores(predict(net, x), y, 1)
    assert math.isinf(rec.mean_psnr) and rec.n_infinite == len(x)


def test_sweep_psnr_strictly_decreasing():
    net = Network(build_small_cnn(16, 4))
    x, y = batch(8)
    recs = adversarial_sweep(net, x, y, [0.01, 0.05, 0.1])
    p = [r.mean_psnr for r in recs]
    assert p[0] > p[1] > p[2]
    for r, eps in zip(recs, (0.01, 0.05, 0.1)):
        # unclipped sign steps give about 20 log10(1/eps)
        assert abs(r.mean_psnr - 20 * math.log10(1 / eps)) < 1.5
        assert r.n_infinite == 0


def test_sweep_errors():
    net = Network(build_small_cnn(16, 4))
    x, y = batch()
    with pytest.raises(AttackError):
        adversarial_sweep(net, x, y, [])
    with pytest.raises(AttackError):
        adversarial_sweep(net, x[:0], y[:0], [0.1])
    with pytest.raises(AttackError):
        FgsmConfig(-0.1)
    with pytest.raises(AttackError):
        fgsm_untargeted(net, x, y, -1.0)


def test_non_differentiable_path_rejected():
    net = Network(build_small_cnn(16, 4))
    x, y = batch()
    with T.no_grad():
        with pytest.raises(AttackError):
            fgsm_untargeted(net, x, y, 0.1)


def test_deterministic():
    net = Network(build_small_cnn(16, 4), seed=1)
    x, y = batch()
    assert fgsm_untargeted(net, x, y, 0.05).tobytes() == fgsm_untargeted(net, x, y, 0.05).tobytes()


def test_capsule_model_uses_margin_loss_gradient():
    from degbench.models import build_named
    net = Network(build_named("capsnet_r1", 32, 4))
    x, y = batch(side=32)
    adv = fgsm_untargeted(net, x, y, 0.02)
    assert np.abs(adv - x).max() > 0

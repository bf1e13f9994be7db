import numpy as np
import pytest

from stcopula.ann import (MlpQuantileSelector, ann_point_forecast, lag_features, mlp_forward, mlp_train,
                          optimal_quantile_target)
from stcopula.exceptions import DomainError
from stcopula.models import ProbForecast

SIZES = (7, 32, 16, 1)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def test_zero_network_outputs_half():
    m = MlpQuantileSelector.zeros(SIZES)
    x = np.random.default_rng(0).normal(size=(20, 7)) * 100
    assert np.all(mlp_forward(m, x) == 0.5)


def test_output_bias_ten():
    m = MlpQuantileSelector.zeros(SIZES)
    m.biases[-1][0] = 10.0
    assert mlp_forward(m, np.ones(7)) == pytest.approx(_sigmoid(10.0), abs=1e-12)
    assert mlp_forward(m, np.ones(7)) == pytest.approx(0.99995, abs=1e-5)


def test_lipschitz_continuity():
    m = MlpQuantileSelector.initialize(SIZES, 3)
    x = np.random.default_rng(4).normal(size=7)
    # sigmoid and tanh are 1/4- and 1-Lipschitz
    L = 0.25 * np.prod([np.linalg.norm(w, 2) for w in m.weights])
    for j in range(7):
        dx = np.zeros(7)
        dx[j] = 1e-6
        assert abs(mlp_forward(m, x + dx) - mlp_forward(m, x)) <= L * 1e-6 * (1 + 1e-9)


@pytest.mark.parametrize("draw", range(20))
def test_gradient_check(draw):
    rng = np.random.default_rng(100 + draw)
    m = MlpQuantileSelector.initialize(SIZES, rng)
    m.set_params(m.get_params() + rng.normal(0, 0.3, m.get_params().size))
    x = rng.normal(size=(16, 7))
    t = rng.random(16)
    _, g = m.loss_and_grad(x, t)
    theta = m.get_params()
    num = np.empty_like(theta)
    h = 1e-5
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        m.set_params(theta + e)
        up = m.loss_and_grad(x, t)[0]
        m.set_params(theta - e)
        down = m.loss_and_grad(x, t)[0]
        num[i] = (up - down) / (2 * h)
    m.set_params(theta)
    assert np.linalg.norm(g - num) / np.linalg.norm(g + num) <= 1e-4


def test_constant_target_is_learned():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(400, 7))
    res = mlp_train(x, np.full(400, 0.5), epochs=50, rng=1)
    assert res.train_loss[-1] <= 1e-3
    assert res.val_loss[res.best_epoch] <= res.val_loss[0]


def test_realizable_target_recovery():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(1500, 7))
    w = rng.normal(size=7)
    t = _sigmoid(x @ w / np.sqrt(7) + 0.2)
    res = mlp_train(x[:1000], t[:1000], epochs=200, rng=2)
    held_out = np.mean((res.model.predict(x[1000:]) - t[1000:]) ** 2)
    assert held_out <= 0.01


def test_zero_epochs_returns_initialization():
    rng = np.random.default_rng(7)
    x, t = rng.normal(size=(100, 7)), rng.random(100)
    init = MlpQuantileSelector.initialize(SIZES, 9)
    res = mlp_train(x, t, epochs=0, init=init)
    assert res.best_epoch == 0
    assert np.array_equal(res.model.get_params(), init.get_params())


def test_training_input_checks():
    with pytest.raises(DomainError):
        mlp_train(np.zeros((10, 3)), np.zeros(10))
    with pytest.raises(DomainError):
        mlp_train(np.zeros((100, 3)), np.zeros(99))


def test_standardize_mask():
    rng = np.random.default_rng(8)
    x = np.column_stack([rng.normal(50, 10, 200), rng.random(200)])
    res = mlp_train(x, rng.random(200), epochs=1, standardize=[True, False])
    assert res.model.shift[0] == pytest.approx(x[:180, 0].mean())
    assert res.model.shift[1] == 0.0 and res.model.scale[1] == 1.0


def test_text_roundtrip():
    m = MlpQuantileSelector.initialize(SIZES, 11, shift=np.arange(7.0), scale=np.arange(1.0, 8.0))
    back = MlpQuantileSelector.loads(m.dumps())
    x = np.random.default_rng(1).normal(size=(5, 7))
    assert np.array_equal(back.predict(x), m.predict(x))
    assert back.layer_sizes == m.layer_sizes


def test_optimal_quantile_target_cases():
    rng = np.random.default_rng(12)
    f = ProbForecast(rng.normal(size=(1001, 1)))
    xs = np.sort(f.samples[:, 0])
    assert optimal_quantile_target(f, 0, np.median(xs)) == pytest.approx(0.5, abs=1.0 / 1000)
    assert optimal_quantile_target(f, 0, xs[0] - 5.0) == pytest.approx(1.0 / 1002)
    assert optimal_quantile_target(f, 0, xs[-1] + 5.0) == pytest.approx(1001.0 / 1002)


def test_optimal_quantile_target_grid_search():
    rng = np.random.default_rng(13)
    for _ in range(5):
        f = ProbForecast(rng.standard_t(3, size=(500, 2)))
        y = rng.normal()
        lev = optimal_quantile_target(f, 1, y)
        grid = np.arange(1, 1000) / 1000
        err = (np.quantile(f.samples[:, 1], grid) - y) ** 2
        assert (np.quantile(f.samples[:, 1], lev) - y) ** 2 <= err.min() + 1e-12


def test_ann_point_forecast():
    rng = np.random.default_rng(14)
    f = ProbForecast(rng.normal(size=(999, 2)))
    zero = MlpQuantileSelector.zeros((3, 4, 1))
    assert ann_point_forecast(zero, np.ones(3), f, 1) == pytest.approx(np.median(f.samples[:, 1]))
    frozen = MlpQuantileSelector.zeros((3, 4, 1))
    frozen.biases[-1][0] = np.log(0.9 / 0.1)
    assert ann_point_forecast(frozen, np.ones(3), f, 0) == pytest.approx(np.quantile(f.samples[:, 0], 0.9))


def test_trained_selector_beats_median_on_lower_mode():
    rng = np.random.default_rng(15)
    n, draws = 600, 400
    feats, targets, forecasts, ys = [], [], [], []
    for _ in range(n):
        shift = rng.normal()
        s = np.concatenate([rng.normal(-2 + shift, 0.3, draws // 2), rng.normal(2 + shift, 0.3, draws // 2)])
        f = ProbForecast(s[:, None])
        y = -2 + shift + rng.normal(0, 0.3)
        feats.append([shift, 1.0])
        targets.append(optimal_quantile_target(f, 0, y))
        forecasts.append(f)
        ys.append(y)
    res = mlp_train(np.array(feats[:400]), targets[:400], epochs=100, rng=3)
    ann = [ann_point_forecast(res.model, feats[i], forecasts[i], 0) for i in range(400, n)]
    med = [np.median(forecasts[i].samples[:, 0]) for i in range(400, n)]
    truth = np.array(ys[400:])
    assert np.sqrt(np.mean((np.array(ann) - truth) ** 2)) < np.sqrt(np.mean((np.array(med) - truth) ** 2))


def test_lag_features():
    diffs = np.arange(20.0).reshape(10, 2)
    out = lag_features(diffs, 5, lags=3)
    assert np.array_equal(out, [10, 11, 8, 9, 6, 7])
    assert np.array_equal(lag_features(diffs, 0, lags=3), [0, 1, 0, 0, 0, 0])

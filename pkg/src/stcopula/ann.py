"""Multilayer perceptron that picks the quantile level used as point forecast.

The network maps recent observations and the last few optimal quantile
levels to a level in (0, 1).  Hidden layers use tanh, the output a sigmoid,
and training minimizes the mean squared error against the realized optimal
levels (the empirical PIT of the outcome under each forecast).
"""
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, TrainingError
from .models import point_quantile

DEFAULT_HIDDEN = (32, 16)
DEFAULT_LAGS = 5
DEFAULT_PAST_LEVELS = 3


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class MlpQuantileSelector:
    """Feed-forward network ``input -> tanh ... -> sigmoid``.

    ``weights[l]`` has shape ``(layer_sizes[l + 1], layer_sizes[l])``.
    Inputs are standardized with ``(x - shift) / scale`` before the first
    layer; both default to the identity.
    """

    def __init__(self, weights, biases, shift=None, scale=None):
        self.weights = [np.array(w, dtype=float) for w in weights]
        self.biases = [np.array(b, dtype=float).ravel() for b in biases]
        if len(self.weights) != len(self.biases) or not self.weights:
            raise DomainError("need one bias vector per weight matrix")
        sizes = [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]
        for w, b, n_in, n_out in zip(self.weights, self.biases, sizes[:-1], sizes[1:]):
            if w.shape != (n_out, n_in) or b.shape != (n_out,):
                raise DomainError("inconsistent layer shapes")
        if sizes[-1] != 1:
            raise DomainError("output layer must have one unit")
        self.layer_sizes = tuple(sizes)
        n_in = sizes[0]
        self.shift = np.zeros(n_in) if shift is None else np.asarray(shift, dtype=float)
        self.scale = np.ones(n_in) if scale is None else np.asarray(scale, dtype=float)

    @classmethod
    def initialize(cls, layer_sizes, rng, shift=None, scale=None):
        """Glorot-uniform weights, zero biases."""
        rng = np.random.default_rng(rng)
        weights, biases = [], []
        for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            lim = np.sqrt(6.0 / (n_in + n_out))
            weights.append(rng.uniform(-lim, lim, size=(n_out, n_in)))
            biases.append(np.zeros(n_out))
        return cls(weights, biases, shift, scale)

    @classmethod
    def zeros(cls, layer_sizes):
        return cls([np.zeros((o, i)) for i, o in zip(layer_sizes[:-1], layer_sizes[1:])],
                   [np.zeros(o) for o in layer_sizes[1:]])

    @property
    def n_inputs(self):
        return self.layer_sizes[0]

    def copy(self):
        return MlpQuantileSelector([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                                   self.shift.copy(), self.scale.copy())

    # flat parameter view, used by the optimizer and the gradient check
    def get_params(self):
        return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(self.weights, self.biases)])

    def set_params(self, theta):
        pos = 0
        for w, b in zip(self.weights, self.biases):
            w[...] = theta[pos:pos + w.size].reshape(w.shape)
            pos += w.size
            b[...] = theta[pos:pos + b.size]
            pos += b.size

    def _prepare(self, features):
        x = np.atleast_2d(np.asarray(features, dtype=float))
        if x.shape[1] != self.n_inputs:
            raise DomainError(f"expected {self.n_inputs} features, got {x.shape[1]}")
        return (x - self.shift) / self.scale

    def _forward(self, x):
        acts = [x]
        a = x
        last = len(self.weights) - 1
        for layer, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w.T + b
            a = _sigmoid(z) if layer == last else np.tanh(z)
            acts.append(a)
        return acts

    def predict(self, features):
        out = self._forward(self._prepare(features))[-1][:, 0]
        return out if np.ndim(features) == 2 else float(out[0])

    def loss_and_grad(self, features, targets):
        """Mean squared error and its gradient w.r.t. :meth:`get_params`."""
        x = self._prepare(features)
        t = np.asarray(targets, dtype=float).ravel()
        acts = self._forward(x)
        y = acts[-1][:, 0]
        n = x.shape[0]
        resid = y - t
        loss = float(np.mean(resid ** 2))
        delta = (2.0 / n) * resid[:, None] * y[:, None] * (1.0 - y[:, None])
        grads = []
        for layer in range(len(self.weights) - 1, -1, -1):
            a_prev = acts[layer]
            grads.append((delta.T @ a_prev, delta.sum(axis=0)))
            if layer:
                delta = (delta @ self.weights[layer]) * (1.0 - a_prev ** 2)
        grads.reverse()
        return loss, np.concatenate([np.concatenate([gw.ravel(), gb]) for gw, gb in grads])

    def dumps(self):
        """Flat text document: a layer-size header, then one line per weight matrix and bias."""
        fmt = lambda arr: " ".join(repr(float(v)) for v in np.ravel(arr))
        lines = ["layers " + " ".join(map(str, self.layer_sizes)), "shift " + fmt(self.shift),
                 "scale " + fmt(self.scale)]
        for w, b in zip(self.weights, self.biases):
            lines.append(fmt(w))
            lines.append(fmt(b))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text):
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        sizes = [int(v) for v in lines[0].split()[1:]]
        shift = np.array(lines[1].split()[1:], dtype=float)
        scale = np.array(lines[2].split()[1:], dtype=float)
        weights, biases = [], []
        for layer, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            weights.append(np.array(lines[3 + 2 * layer].split(), dtype=float).reshape(n_out, n_in))
            biases.append(np.array(lines[4 + 2 * layer].split(), dtype=float))
        return cls(weights, biases, shift, scale)


def mlp_forward(m, features):
    return m.predict(features)


@dataclass(frozen=True)
class TrainingResult:
    model: MlpQuantileSelector
    best_epoch: int
    train_loss: list
    val_loss: list


def mlp_train(features, targets, epochs=200, step_size=0.05, rng=0, hidden=DEFAULT_HIDDEN,
              momentum=0.9, batch_size=32, val_fraction=0.1, standardize=None, init=None):
    """Mini-batch gradient descent with momentum.

    The last ``val_fraction`` of the records (chronologically) is held out
    and the parameters of the epoch with the lowest validation loss are
    returned; epoch 0 is the initialization itself.

    Parameters
    ----------
    standardize : array_like of bool, optional
        Feature columns to standardize by their training mean and standard
        deviation.  Other columns are passed unchanged.
    """
    x = np.asarray(features, dtype=float)
    t = np.asarray(targets, dtype=float).ravel()
    if x.ndim != 2 or x.shape[0] != t.size:
        raise DomainError("features must be a matrix with one row per target")
    if x.shape[0] < 50:
        raise DomainError(f"need at least 50 training records, got {x.shape[0]}")
    rng = np.random.default_rng(rng)
    n_val = max(1, int(round(val_fraction * x.shape[0])))
    x_tr, t_tr = x[:-n_val], t[:-n_val]
    x_val, t_val = x[-n_val:], t[-n_val:]

    shift = np.zeros(x.shape[1])
    scale = np.ones(x.shape[1])
    if standardize is not None:
        cols = np.asarray(standardize, dtype=bool)
        shift[cols] = x_tr[:, cols].mean(axis=0)
        sd = x_tr[:, cols].std(axis=0)
        scale[cols] = np.where(sd > 0, sd, 1.0)

    if init is None:
        model = MlpQuantileSelector.initialize((x.shape[1], *hidden, 1), rng, shift, scale)
    else:
        model = init.copy()
    theta = model.get_params()
    velocity = np.zeros_like(theta)
    best = model.copy()
    best_val = model.loss_and_grad(x_val, t_val)[0]
    best_epoch = 0
    train_hist, val_hist = [model.loss_and_grad(x_tr, t_tr)[0]], [best_val]
    n = x_tr.shape[0]
    for epoch in range(1, epochs + 1):
        perm = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = perm[start:start + batch_size]
            _, g = model.loss_and_grad(x_tr[idx], t_tr[idx])
            velocity = momentum * velocity - step_size * g
            theta = theta + velocity
            model.set_params(theta)
        tr = model.loss_and_grad(x_tr, t_tr)[0]
        va = model.loss_and_grad(x_val, t_val)[0]
        if not (np.isfinite(tr) and np.isfinite(va) and np.all(np.isfinite(theta))):
            raise TrainingError(f"training diverged at epoch {epoch}")
        train_hist.append(tr)
        val_hist.append(va)
        if va < best_val:
            best, best_val, best_epoch = model.copy(), va, epoch
    return TrainingResult(best, best_epoch, train_hist, val_hist)


def optimal_quantile_target(f, series, y):
    """Level whose empirical quantile reproduces ``y`` (the MSE-optimal level).

    Consistent with :func:`stcopula.models.point_quantile`, which
    interpolates linearly between order statistics.  Clipped to
    ``[1/(n+1), n/(n+1)]``.
    """
    xs = np.sort(f.samples[:, series])
    n = xs.size
    level = np.interp(y, xs, np.arange(n) / (n - 1.0))
    return float(np.clip(level, 1.0 / (n + 1.0), n / (n + 1.0)))


def ann_point_forecast(m, features, f, series):
    return float(point_quantile(f, m.predict(features))[series])


def lag_features(diffs, t, lags=DEFAULT_LAGS):
    """Flattened ``diffs[t-lags+1 .. t]`` (most recent first); rows before the start are zero-padded."""
    diffs = np.asarray(diffs, dtype=float)
    d = diffs.shape[1]
    out = np.zeros((lags, d))
    lo = max(0, t - lags + 1)
    window = diffs[lo:t + 1][::-1]
    out[: window.shape[0]] = window
    return out.ravel()

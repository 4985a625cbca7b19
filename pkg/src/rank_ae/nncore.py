"""Small dense layers with hand-written backward passes, plus Adam.

Everything works on 1-D vectors or on 2-D ``(batch, dim)`` arrays; gradients
of a batch are summed into the parameter's ``grad`` buffer, which is only
cleared by an explicit ``zero_grad``.
"""
import math

import numpy as np


class Parameter:
    """A trainable array and its gradient accumulator."""

    __slots__ = ("value", "grad")

    def __init__(self, value):
        self.value = value
        self.grad = np.zeros_like(value)

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self):
        self.grad[...] = 0

    def __repr__(self):
        return f"Parameter(shape={self.value.shape}, dtype={self.value.dtype})"


def init_params(rng, shape, dtype=np.float64):
    """Glorot-uniform matrix of ``shape = (fan_out, fan_in)``; 1-D shapes are
    biases and come back as zeros."""
    if isinstance(shape, int) or len(shape) == 1:
        return np.zeros(shape, dtype=dtype)
    fan_out, fan_in = shape[0], shape[1]
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class LinearLayer:
    """``y = W x + b`` with ``W`` of shape (out, in)."""

    def __init__(self, weight, bias=None):
        self.weight = weight if isinstance(weight, Parameter) else Parameter(weight)
        if bias is not None and not isinstance(bias, Parameter):
            bias = Parameter(bias)
        self.bias = bias

    @classmethod
    def create(cls, rng, in_dim, out_dim, bias=True, dtype=np.float64):
        w = init_params(rng, (out_dim, in_dim), dtype)
        b = init_params(rng, (out_dim,), dtype) if bias else None
        return cls(w, b)

    @property
    def in_dim(self):
        return self.weight.shape[1]

    @property
    def out_dim(self):
        return self.weight.shape[0]

    def parameters(self):
        return [self.weight] if self.bias is None else [self.weight, self.bias]


def _check_in(layer, x):
    if x.shape[-1] != layer.in_dim:
        raise ValueError(f"linear layer expects input dim {layer.in_dim}, got {x.shape[-1]}")


def linear_forward(layer, x):
    x = np.asarray(x)
    _check_in(layer, x)
    out = x @ layer.weight.value.T
    if layer.bias is not None:
        out = out + layer.bias.value
    return out


def linear_backward(layer, x, grad_out):
    """Accumulate dW, db and return the gradient w.r.t. the input."""
    x = np.asarray(x)
    grad_out = np.asarray(grad_out)
    _check_in(layer, x)
    if grad_out.shape[-1] != layer.out_dim or grad_out.shape[:-1] != x.shape[:-1]:
        raise ValueError(f"grad_out shape {grad_out.shape} does not match layer output for input {x.shape}")
    if x.ndim == 1:
        layer.weight.grad += np.outer(grad_out, x)
        if layer.bias is not None:
            layer.bias.grad += grad_out
    else:
        layer.weight.grad += grad_out.T @ x
        if layer.bias is not None:
            layer.bias.grad += grad_out.sum(axis=0)
    return grad_out @ layer.weight.value


def relu_forward(x):
    return np.maximum(x, 0)


def relu_backward(x, grad_out):
    # subgradient at 0 is 0
    return np.where(x > 0, grad_out, 0)


def sigmoid_forward(x):
    x = np.asarray(x)
    # split by sign so neither branch overflows
    out = np.empty_like(x, dtype=np.result_type(x, np.float32))
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ez = np.exp(x[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def sigmoid_backward(x, grad_out, out=None):
    s = sigmoid_forward(x) if out is None else out
    return s * (1 - s) * grad_out


def mse_loss(a, b):
    """Mean squared error over the last axis and its gradient w.r.t. ``a``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"mse_loss length mismatch: {a.shape} vs {b.shape}")
    h = a.shape[-1]
    diff = a - b
    return (diff * diff).sum(axis=-1) / h, (2.0 / h) * diff


class AdamState:
    """Adam with decoupled weight decay over a fixed list of parameters."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.0):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]


def adam_step(state, params=None, grads=None):
    """One bias-corrected Adam update applied in place.

    By default uses ``state.params`` and their ``.grad`` buffers; ``params`` and
    ``grads`` may be given as parallel lists of arrays instead.
    """
    if params is None:
        values = [p.value for p in state.params]
        grads = [p.grad for p in state.params]
    else:
        values = list(params)
        grads = list(grads)
    if len(values) != len(state.m):
        raise ValueError(f"expected {len(state.m)} parameter arrays, got {len(values)}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for value, g, m, v in zip(values, grads, state.m, state.v):
        if value.shape != g.shape or value.shape != m.shape:
            raise ValueError(f"shape mismatch in adam_step: {value.shape} / {g.shape} / {m.shape}")
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        if state.weight_decay:
            value *= 1 - state.lr * state.weight_decay
        value -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return values


def finite_diff_gradcheck(loss_fn, params, epsilon=1e-6, max_coords=None, rng=None):
    """Largest relative error between analytic and central-difference gradients.

    ``loss_fn()`` must return ``(loss, grads)`` where ``grads`` parallels
    ``params`` (a list of float64 arrays that the function reads in place).
    When ``max_coords`` is set, that many coordinates are sampled at random.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    loss0, analytic = loss_fn()
    if not np.isfinite(loss0):
        raise FloatingPointError("loss is not finite at the base point")
    analytic = [np.array(g, dtype=np.float64, copy=True) for g in analytic]

    coords = [(k, i) for k, p in enumerate(params) for i in range(p.size)]
    if max_coords is not None and len(coords) > max_coords:
        rng = rng or np.random.default_rng(0)
        pick = rng.choice(len(coords), size=max_coords, replace=False)
        coords = [coords[i] for i in sorted(pick)]

    worst = 0.0
    for k, i in coords:
        flat = params[k].reshape(-1)
        orig = flat[i]
        flat[i] = orig + epsilon
        up, _ = loss_fn()
        flat[i] = orig - epsilon
        down, _ = loss_fn()
        flat[i] = orig
        if not (np.isfinite(up) and np.isfinite(down)):
            raise FloatingPointError("loss became non-finite during gradcheck")
        numeric = (up - down) / (2 * epsilon)
        a = analytic[k].reshape(-1)[i]
        err = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
        worst = max(worst, err)
    return worst

"""Minimal complex-valued neural network engine with explicit backward passes.

Every layer exposes forward(x, train) -> (y, cache) and
backward(cache, g) -> (g_in, grads).  Gradients follow the conjugate
convention for real losses: for y = W x the weight gradient is g_y x^H and
the input gradient W^H g_y, so a plain step W <- W - lr * g_W descends.
Dense activations use the (features, batch) layout; convolutional tensors
use (batch, channels, height, width).
"""
from __future__ import annotations

import numpy as np

from .linalg import crandn

__all__ = [
    "Dense",
    "Conv2d",
    "ComplexBatchNorm",
    "CRelu",
    "AvgPool2d",
    "Flatten",
    "ComplexNet",
    "modulus_softmax_loss",
    "Sgd",
    "Adam",
    "numerical_gradient",
    "finite_difference_gradient",
    "forward_pass",
    "backward_pass",
    "optimizer_step",
    "save_checkpoint",
    "load_checkpoint",
]


class Dense:
    """y = W x + b on (n_in, batch) activations."""

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, bias: bool = True):
        self.w = crandn(rng, (n_out, n_in), var=1.0 / n_in)
        self.b = np.zeros(n_out, dtype=np.complex128) if bias else None

    def parameters(self):
        p = {"w": self.w}
        if self.b is not None:
            p["b"] = self.b
        return p

    def forward(self, x, train=True):
        y = self.w @ x
        if self.b is not None:
            y = y + self.b[:, None]
        return y, {"x": x}

    def backward(self, cache, g):
        grads = {"w": g @ cache["x"].conj().T}
        if self.b is not None:
            grads["b"] = g.sum(axis=1)
        return self.w.conj().T @ g, grads


def _im2col(x, nk, pad):
    """(B, C, H, W) -> patch matrix (B*Ho*Wo, C*nk*nk), stride 1."""
    b, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (nk, nk), axis=(2, 3))
    # win: (B, C, Ho, Wo, nk, nk) -> (B, Ho, Wo, C, nk, nk)
    ho, wo = win.shape[2], win.shape[3]
    col = win.transpose(0, 2, 3, 1, 4, 5).reshape(b * ho * wo, c * nk * nk)
    return np.ascontiguousarray(col), (ho, wo)


def _col2im(gcol, x_shape, nk, pad, ho, wo):
    """Adjoint of _im2col: scatter patch gradients back onto the image."""
    b, c, h, w = x_shape
    g = gcol.reshape(b, ho, wo, c, nk, nk).transpose(0, 3, 1, 2, 4, 5)
    out = np.zeros((b, c, h + 2 * pad, w + 2 * pad), dtype=gcol.dtype)
    for u in range(nk):
        for v in range(nk):
            out[:, :, u:u + ho, v:v + wo] += g[:, :, :, :, u, v]
    if pad:
        out = out[:, :, pad:-pad, pad:-pad]
    return out


class Conv2d:
    """Complex 2-d convolution, stride 1.

    padding "same" keeps the spatial size (odd kernels only), "valid" shrinks
    it by nk - 1.  Kernels have shape (n_out, n_in, nk, nk).
    """

    def __init__(self, n_in: int, n_out: int, nk: int, rng: np.random.Generator,
                 bias: bool = True, padding: str = "same"):
        if padding not in ("same", "valid"):
            raise ValueError("padding must be 'same' or 'valid'")
        if padding == "same" and nk % 2 == 0:
            raise ValueError("'same' padding needs an odd kernel")
        self.nk = nk
        self.pad = (nk - 1) // 2 if padding == "same" else 0
        self.kernels = crandn(rng, (n_out, n_in, nk, nk), var=1.0 / (n_in * nk * nk))
        self.b = np.zeros(n_out, dtype=np.complex128) if bias else None

    def parameters(self):
        p = {"kernels": self.kernels}
        if self.b is not None:
            p["b"] = self.b
        return p

    def forward(self, x, train=True):
        n_out = self.kernels.shape[0]
        col, (ho, wo) = _im2col(x, self.nk, self.pad)
        wmat = self.kernels.reshape(n_out, -1).T  # (C*nk*nk, n_out)
        y = col @ wmat
        if self.b is not None:
            y = y + self.b
        y = y.reshape(x.shape[0], ho, wo, n_out).transpose(0, 3, 1, 2)
        return y, {"col": col, "x_shape": x.shape, "ho": ho, "wo": wo}

    def backward(self, cache, g):
        n_out = self.kernels.shape[0]
        ho, wo = cache["ho"], cache["wo"]
        gmat = g.transpose(0, 2, 3, 1).reshape(-1, n_out)
        g_w = (cache["col"].conj().T @ gmat).T.reshape(self.kernels.shape)
        grads = {"kernels": g_w}
        if self.b is not None:
            grads["b"] = gmat.sum(axis=0)
        wmat = self.kernels.reshape(n_out, -1).T
        gcol = gmat @ wmat.conj().T
        g_x = _col2im(gcol, cache["x_shape"], self.nk, self.pad, ho, wo)
        return g_x, grads


def _bn_axes(x, n_features):
    """Return (stat axes, parameter broadcast shape) for 2-d or 4-d input."""
    if x.ndim == 2:
        if x.shape[0] != n_features:
            raise ValueError("feature axis mismatch")
        return (1,), (n_features, 1)
    if x.ndim == 4:
        if x.shape[1] != n_features:
            raise ValueError("channel axis mismatch")
        return (0, 2, 3), (1, n_features, 1, 1)
    raise ValueError("batch norm expects 2-d or 4-d input")


class ComplexBatchNorm:
    """Normalizes real and imaginary parts separately, then a complex affine.

    Train mode uses batch statistics and updates running averages; eval mode
    uses the running averages.  The affine scale gamma multiplies the full
    complex value, so it can rotate as well as stretch.
    """

    def __init__(self, n_features: int, momentum: float = 0.1, eps: float = 1e-8):
        self.n = n_features
        self.momentum = momentum
        self.eps = eps
        self.gamma = np.ones(n_features, dtype=np.complex128)
        self.beta = np.zeros(n_features, dtype=np.complex128)
        self.running_mean = np.zeros(n_features, dtype=np.complex128)
        self.running_var_re = np.ones(n_features, dtype=np.float64)
        self.running_var_im = np.ones(n_features, dtype=np.float64)

    def parameters(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def forward(self, x, train=True):
        axes, shape = _bn_axes(x, self.n)
        if train:
            mu_re = x.real.mean(axis=axes)
            mu_im = x.imag.mean(axis=axes)
            var_re = x.real.var(axis=axes)
            var_im = x.imag.var(axis=axes)
            m = self.momentum
            self.running_mean += m * ((mu_re + 1j * mu_im) - self.running_mean)
            self.running_var_re += m * (var_re - self.running_var_re)
            self.running_var_im += m * (var_im - self.running_var_im)
        else:
            mu_re, mu_im = self.running_mean.real, self.running_mean.imag
            var_re, var_im = self.running_var_re, self.running_var_im
        s_re = np.sqrt(var_re + self.eps)
        s_im = np.sqrt(var_im + self.eps)
        u = (x.real - mu_re.reshape(shape)) / s_re.reshape(shape)
        v = (x.imag - mu_im.reshape(shape)) / s_im.reshape(shape)
        xhat = u + 1j * v
        y = self.gamma.reshape(shape) * xhat + self.beta.reshape(shape)
        cache = {"xhat": xhat, "s_re": s_re, "s_im": s_im,
                 "axes": axes, "shape": shape, "train": train}
        return y, cache

    def backward(self, cache, g):
        axes, shape = cache["axes"], cache["shape"]
        xhat = cache["xhat"]
        g_gamma = (g * xhat.conj()).sum(axis=axes)
        g_beta = g.sum(axis=axes)
        g_hat = self.gamma.conj().reshape(shape) * g
        s_re = cache["s_re"].reshape(shape)
        s_im = cache["s_im"].reshape(shape)
        if cache["train"]:
            # Real-part and imaginary-part normalizations backprop separately,
            # each through the usual batch-statistics correction terms.
            n_red = int(np.prod([g.shape[a] for a in axes]))

            def through(h, u, s):
                corr = h - h.mean(axis=axes).reshape(shape) \
                    - u * ((h * u).sum(axis=axes).reshape(shape) / n_red)
                return corr / s

            g_x = through(g_hat.real, xhat.real, s_re) + 1j * through(g_hat.imag, xhat.imag, s_im)
        else:
            g_x = g_hat.real / s_re + 1j * g_hat.imag / s_im
        return g_x, {"gamma": g_gamma, "beta": g_beta}


class CRelu:
    """ReLU applied to real and imaginary parts independently."""

    def parameters(self):
        return {}

    def forward(self, x, train=True):
        mr = x.real > 0
        mi = x.imag > 0
        return x.real * mr + 1j * (x.imag * mi), {"mr": mr, "mi": mi}

    def backward(self, cache, g):
        return g.real * cache["mr"] + 1j * (g.imag * cache["mi"]), {}


class AvgPool2d:
    """Average pooling on (B, C, H, W); pool='global' collapses to 1x1."""

    def __init__(self, pool="global"):
        self.pool = pool

    def parameters(self):
        return {}

    def forward(self, x, train=True):
        b, c, h, w = x.shape
        if self.pool == "global":
            y = x.mean(axis=(2, 3), keepdims=True)
            return y, {"shape": x.shape, "count": h * w}
        p = int(self.pool)
        if h % p or w % p:
            raise ValueError("spatial size must divide the pool size")
        y = x.reshape(b, c, h // p, p, w // p, p).mean(axis=(3, 5))
        return y, {"shape": x.shape, "count": p * p}

    def backward(self, cache, g):
        b, c, h, w = cache["shape"]
        if self.pool == "global":
            g_x = np.broadcast_to(g / cache["count"], cache["shape"]).copy()
            return g_x, {}
        p = int(self.pool)
        g_x = np.repeat(np.repeat(g, p, axis=2), p, axis=3) / cache["count"]
        return g_x, {}


class Flatten:
    """(B, C, H, W) -> (C*H*W, B) so dense layers can follow conv stacks."""

    def parameters(self):
        return {}

    def forward(self, x, train=True):
        return x.reshape(x.shape[0], -1).T, {"shape": x.shape}

    def backward(self, cache, g):
        return g.T.reshape(cache["shape"]), {}


class ComplexNet:
    """A plain sequence of layers with dict-of-arrays parameters."""

    def __init__(self, layers):
        self.layers = list(layers)

    def parameters(self):
        out = {}
        for i, layer in enumerate(self.layers):
            for name, arr in layer.parameters().items():
                out[f"{i}.{name}"] = arr
        return out

    def forward(self, x, train=True):
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x, train=train)
            caches.append(cache)
        return x, caches

    def backward(self, caches, g):
        if len(caches) != len(self.layers):
            raise ValueError("cache list does not match the layer stack")
        grads = {}
        for i in range(len(self.layers) - 1, -1, -1):
            g, layer_grads = self.layers[i].backward(caches[i], g)
            for name, arr in layer_grads.items():
                grads[f"{i}.{name}"] = arr
        return g, grads


def modulus_softmax_loss(logits: np.ndarray, labels: np.ndarray):
    """Cross-entropy on softmax of squared moduli of complex logits.

    logits: (classes, batch) complex; labels: (batch,) ints.
    Returns (mean loss, gradient wrt logits, accuracy).
    """
    s = np.abs(logits) ** 2
    s = s - s.max(axis=0, keepdims=True)
    e = np.exp(s)
    p = e / e.sum(axis=0, keepdims=True)
    b = labels.shape[0]
    picked = p[labels, np.arange(b)]
    loss = float(-np.log(np.maximum(picked, 1e-300)).mean())
    d = p.copy()
    d[labels, np.arange(b)] -= 1.0
    g = d * logits / b
    acc = float((s.argmax(axis=0) == labels).mean())
    return loss, g, acc


class Sgd:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: dict, grads: dict):
        for name, g in grads.items():
            params[name] -= self.lr * g

    def state_dict(self):
        return {"t": np.array(0)}

    def load_state_dict(self, state):
        pass


class Adam:
    """Adam applied to real and imaginary parts independently.

    First moments live on the complex value; second moments are kept per
    part so a purely real gradient never normalizes the imaginary axis.
    Bias correction uses a single global step counter.
    """

    def __init__(self, lr: float = 0.005, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {}
        self.v_re = {}
        self.v_im = {}

    def step(self, params: dict, grads: dict):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for name, g in grads.items():
            if name not in self.m:
                self.m[name] = np.zeros_like(g)
                self.v_re[name] = np.zeros(g.shape, dtype=np.float64)
                self.v_im[name] = np.zeros(g.shape, dtype=np.float64)
            m = self.m[name] = b1 * self.m[name] + (1 - b1) * g
            vr = self.v_re[name] = b2 * self.v_re[name] + (1 - b2) * g.real ** 2
            vi = self.v_im[name] = b2 * self.v_im[name] + (1 - b2) * g.imag ** 2
            mh = m / c1
            upd = mh.real / (np.sqrt(vr / c2) + self.eps) \
                + 1j * (mh.imag / (np.sqrt(vi / c2) + self.eps))
            params[name] -= self.lr * upd

    def state_dict(self):
        out = {"t": np.array(self.t)}
        for name in self.m:
            out[f"m::{name}"] = self.m[name]
            out[f"vr::{name}"] = self.v_re[name]
            out[f"vi::{name}"] = self.v_im[name]
        return out

    def load_state_dict(self, state):
        self.t = int(state["t"])
        self.m, self.v_re, self.v_im = {}, {}, {}
        for key, arr in state.items():
            if key == "t":
                continue
            kind, name = key.split("::", 1)
            if kind == "m":
                self.m[name] = arr.astype(np.complex128)
            elif kind == "vr":
                self.v_re[name] = arr.astype(np.float64)
            elif kind == "vi":
                self.v_im[name] = arr.astype(np.float64)


def numerical_gradient(loss_fn, params: dict, eps: float = 1e-6) -> dict:
    """Central differences on real and imaginary parts of each parameter.

    loss_fn() must evaluate the scalar loss using the arrays in params, which
    are perturbed in place and restored.  Returns gradients in the same
    conjugate convention as the analytic backward passes,
    0.5 * (dL/dRe + i dL/dIm).
    """
    grads = {}
    for name, p in params.items():
        g = np.zeros(p.shape, dtype=np.complex128)
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            lp = loss_fn()
            flat[i] = orig - eps
            lm = loss_fn()
            d_re = (lp - lm) / (2 * eps)
            flat[i] = orig + 1j * eps
            lp = loss_fn()
            flat[i] = orig - 1j * eps
            lm = loss_fn()
            d_im = (lp - lm) / (2 * eps)
            flat[i] = orig
            gflat[i] = 0.5 * (d_re + 1j * d_im)
        grads[name] = g
    return grads


def finite_difference_gradient(net: ComplexNet, x: np.ndarray, loss_fn,
                               eps: float = 1e-6) -> dict:
    """Numeric gradient of loss_fn(net(x)) for every network parameter."""

    def total():
        y, _ = net.forward(x, train=True)
        return loss_fn(y)

    return numerical_gradient(total, net.parameters(), eps=eps)


# Functional aliases mirroring the object surface.

def forward_pass(net: ComplexNet, x: np.ndarray, train: bool = True):
    return net.forward(x, train=train)


def backward_pass(net: ComplexNet, caches, g):
    return net.backward(caches, g)


def optimizer_step(opt, params: dict, grads: dict):
    opt.step(params, grads)


# -- checkpoints ------------------------------------------------------------

def _net_state(net: ComplexNet) -> dict:
    out = dict(net.parameters())
    for i, layer in enumerate(net.layers):
        if isinstance(layer, ComplexBatchNorm):
            out[f"{i}.running_mean"] = layer.running_mean
            out[f"{i}.running_var_re"] = layer.running_var_re
            out[f"{i}.running_var_im"] = layer.running_var_im
    return out


def save_checkpoint(path, net: ComplexNet, optimizer=None, step: int = 0) -> None:
    """Write parameters, batch-norm running stats, optimizer state and the
    step counter to an .npz archive; loading restores them exactly."""
    payload = {f"net::{k}": v for k, v in _net_state(net).items()}
    payload["meta::step"] = np.array(step)
    if optimizer is not None:
        for k, v in optimizer.state_dict().items():
            payload[f"opt::{k}"] = v
    np.savez(path, **payload)


def load_checkpoint(path, net: ComplexNet, optimizer=None) -> int:
    """Restore a checkpoint written by save_checkpoint into net (and
    optimizer, when given).  Returns the stored step counter."""
    with np.load(path) as data:
        state = _net_state(net)
        for key in data.files:
            if key.startswith("net::"):
                name = key[5:]
                if name not in state:
                    raise ValueError(f"checkpoint key {name} not in this network")
                state[name][...] = data[key]
        if optimizer is not None:
            opt_state = {k[5:]: data[k] for k in data.files if k.startswith("opt::")}
            optimizer.load_state_dict(opt_state)
        return int(data["meta::step"])

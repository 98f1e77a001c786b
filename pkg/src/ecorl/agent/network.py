"""Two-branch MLP with hand-written backpropagation.

Parameters live in one flat buffer; each layer's weight and bias are views
into it, so optimizers, target syncs and checkpoints act on a single array.
"""

from __future__ import annotations

import numpy as np

GRID_WIDTHS = (64, 64, 32)
INV_WIDTHS = (16, 16, 16)
HEAD_WIDTHS = (16,)


class Layer:
    __slots__ = ("name", "W", "b", "dW", "db")

    def __init__(self, name, W, b, dW, db):
        self.name = name
        self.W, self.b = W, b
        self.dW, self.db = dW, db


def _forward(layers, x, relu_last):
    cache = []
    a = x
    last = len(layers) - 1
    for i, layer in enumerate(layers):
        z = a @ layer.W
        z += layer.b
        if i < last or relu_last:
            mask = z > 0
            z *= mask
        else:
            mask = None
        cache.append((a, mask))
        a = z
    return a, cache


def _backward(layers, cache, dout, need_input_grad):
    d = dout
    for i in range(len(layers) - 1, -1, -1):
        layer = layers[i]
        a_in, mask = cache[i]
        if mask is not None:
            d = d * mask
        np.matmul(a_in.T, d, out=layer.dW)
        np.sum(d, axis=0, out=layer.db)
        if i > 0 or need_input_grad:
            d = d @ layer.W.T
    return d


class QNetwork:
    """grid branch + inventory branch, concatenated, then a linear-output head.

    Hidden activations (including branch outputs) are ReLU; the final head
    layer is linear.  A branch with no layers passes its input through.
    """

    def __init__(
        self,
        grid_in: int,
        inv_in: int,
        n_out: int = 6,
        grid_widths=GRID_WIDTHS,
        inv_widths=INV_WIDTHS,
        head_widths=HEAD_WIDTHS,
        dtype=np.float32,
        rng: np.random.Generator | None = None,
    ):
        self.grid_in, self.inv_in, self.n_out = int(grid_in), int(inv_in), int(n_out)
        self.dtype = np.dtype(dtype)
        self.arch = (tuple(grid_widths), tuple(inv_widths), tuple(head_widths))

        shapes = []
        fan = self.grid_in
        for w in grid_widths:
            shapes.append(("grid", fan, w))
            fan = w
        g_out = fan
        fan = self.inv_in
        for w in inv_widths:
            shapes.append(("inv", fan, w))
            fan = w
        fan = g_out + fan
        for w in tuple(head_widths) + (self.n_out,):
            shapes.append(("head", fan, w))
            fan = w

        self.shapes = [(i, o) for _, i, o in shapes]
        self.n_params = sum(i * o + o for i, o in self.shapes)
        self.params = np.zeros(self.n_params, dtype=self.dtype)
        self.grad = np.zeros(self.n_params, dtype=self.dtype)

        self.grid_layers, self.inv_layers, self.head_layers = [], [], []
        groups = {"grid": self.grid_layers, "inv": self.inv_layers, "head": self.head_layers}
        off = 0
        for branch, i, o in shapes:
            W = self.params[off : off + i * o].reshape(i, o)
            dW = self.grad[off : off + i * o].reshape(i, o)
            off += i * o
            b, db = self.params[off : off + o], self.grad[off : off + o]
            off += o
            groups[branch].append(Layer(f"{branch}.{len(groups[branch])}", W, b, dW, db))
        self.layers = self.grid_layers + self.inv_layers + self.head_layers

        if rng is not None:
            self.init_params(rng)

    @classmethod
    def for_channels(cls, n_channels: int, n_actions: int = 6, **kw) -> "QNetwork":
        return cls(25 * n_channels, n_channels + 1, n_actions, **kw)

    @property
    def obs_size(self) -> int:
        return self.grid_in + self.inv_in

    def init_params(self, rng: np.random.Generator):
        """He-uniform weights, zero biases."""
        for layer in self.layers:
            fan_in = layer.W.shape[0]
            limit = np.sqrt(6.0 / fan_in) if fan_in else 0.0
            layer.W[...] = rng.uniform(-limit, limit, size=layer.W.shape)
            layer.b[...] = 0.0

    def clone(self) -> "QNetwork":
        g, i, h = self.arch
        net = QNetwork(self.grid_in, self.inv_in, self.n_out, g, i, h, dtype=self.dtype)
        net.params[:] = self.params
        return net

    def copy_from(self, other: "QNetwork"):
        self.params[:] = other.params

    def _as_batch(self, obs) -> np.ndarray:
        if hasattr(obs, "grid_view"):
            obs = np.concatenate([obs.grid_view, obs.inventory_view])
        x = np.asarray(obs)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.obs_size:
            raise ValueError(f"observation has shape {np.shape(obs)}, network expects (..., {self.obs_size})")
        if x.dtype != self.dtype:
            x = x.astype(self.dtype)
        return x

    def forward(self, x: np.ndarray, keep_cache: bool = False):
        x = self._as_batch(x)
        g, gc = _forward(self.grid_layers, x[:, : self.grid_in], relu_last=True)
        h, hc = _forward(self.inv_layers, x[:, self.grid_in :], relu_last=True)
        out, oc = _forward(self.head_layers, np.concatenate([g, h], axis=1), relu_last=False)
        if keep_cache:
            return out, (gc, hc, oc, g.shape[1])
        return out

    def backward(self, cache, dout: np.ndarray) -> np.ndarray:
        """Accumulate d(loss)/d(params) into ``self.grad`` (overwritten) and return it."""
        gc, hc, oc, g_width = cache
        dout = np.asarray(dout, dtype=self.dtype)
        dcat = _backward(self.head_layers, oc, dout, need_input_grad=True)
        if self.grid_layers:
            _backward(self.grid_layers, gc, dcat[:, :g_width], need_input_grad=False)
        if self.inv_layers:
            _backward(self.inv_layers, hc, dcat[:, g_width:], need_input_grad=False)
        return self.grad


def q_forward(net: QNetwork, obs) -> np.ndarray:
    """Q-values for one observation (vector) or a batch (matrix)."""
    out = net.forward(obs)
    if np.ndim(obs) == 1 or hasattr(obs, "grid_view"):
        return out[0]
    return out

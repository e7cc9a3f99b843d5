"""Small dense tanh networks with hand-written backprop and Adam.

Weights are stored as ``W`` with shape ``(fan_out, fan_in)`` so a layer computes
``x @ W.T + b`` on a batch of row vectors.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

HEADS = ("identity", "softmax")
MAGIC = b"BSNN"
FORMAT_VERSION = 1


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class _Cache:
    net: "DenseNet"
    inputs: list  # input to each layer, batch-shaped
    output: np.ndarray
    squeeze: bool


class DenseNet:
    """Fully connected net: tanh on every hidden layer, then an output head."""

    def __init__(self, sizes, head: str = "identity", rng: np.random.Generator | None = None):
        if head not in HEADS:
            raise ValueError(f"head must be one of {HEADS}, got {head!r}")
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.sizes = tuple(int(s) for s in sizes)
        self.head = head
        rng = rng if rng is not None else np.random.default_rng()
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
            self.biases.append(np.zeros(fan_out))

    @property
    def params(self) -> list[np.ndarray]:
        """Parameter arrays in (W1, b1, W2, b2, ...) order; updates happen in place."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "DenseNet":
        other = DenseNet.__new__(DenseNet)
        other.sizes, other.head = self.sizes, self.head
        other.weights = [w.copy() for w in self.weights]
        other.biases = [b.copy() for b in self.biases]
        return other

    def logits(self, x: np.ndarray) -> np.ndarray:
        """Pre-head output, without building a backward cache."""
        h = np.asarray(x, dtype=float)
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.T + b
            if i < last:
                h = np.tanh(h)
        return h

    def __call__(self, x: np.ndarray) -> np.ndarray:
        z = self.logits(x)
        return softmax(z) if self.head == "softmax" else z

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, _Cache]:
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        h = x[None, :] if squeeze else x
        if h.shape[1] != self.sizes[0]:
            raise ValueError(f"input has {h.shape[1]} features, net expects {self.sizes[0]}")
        inputs = []
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(h)
            h = h @ w.T + b
            if i < last:
                h = np.tanh(h)
        if self.head == "softmax":
            h = softmax(h)
        cache = _Cache(self, inputs, h, squeeze)
        return (h[0] if squeeze else h), cache

    def backward(self, cache: _Cache, grad: np.ndarray, wrt_logits: bool = False) -> list[np.ndarray]:
        """Gradients for :attr:`params` given dLoss/d(output) summed over the batch.

        With a softmax head, ``wrt_logits=True`` means ``grad`` is already taken
        with respect to the pre-softmax logits.
        """
        if cache is None or cache.net is not self:
            raise ValueError("backward needs the cache from this net's forward()")
        g = np.asarray(grad, dtype=float)
        if cache.squeeze:
            g = g[None, :]
        if g.shape != cache.output.shape:
            raise ValueError(f"upstream gradient shape {g.shape} != output shape {cache.output.shape}")
        if self.head == "softmax" and not wrt_logits:
            p = cache.output
            g = p * (g - (g * p).sum(axis=1, keepdims=True))
        grads = [None] * (2 * len(self.weights))
        for i in reversed(range(len(self.weights))):
            a = cache.inputs[i]
            grads[2 * i] = g.T @ a
            grads[2 * i + 1] = g.sum(axis=0)
            if i > 0:
                # a is tanh output of the previous layer
                g = (g @ self.weights[i]) * (1.0 - a * a)
        return grads


def actor_net(state_size: int, action_size: int, hidden: int = 64, rng=None) -> DenseNet:
    return DenseNet((state_size, hidden, hidden, action_size), head="softmax", rng=rng)


def critic_net(state_size: int, hidden: int = 64, rng=None) -> DenseNet:
    return DenseNet((state_size, hidden, hidden, 1), head="identity", rng=rng)


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState) -> list[np.ndarray]:
    """Bias-corrected Adam update, applied to ``params`` in place."""
    if len(params) != len(grads):
        raise ValueError(f"{len(params)} parameters but {len(grads)} gradients")
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    for p, g, m in zip(params, grads, state.m):
        if p.shape != g.shape or p.shape != m.shape:
            raise ValueError(f"shape mismatch: param {p.shape}, grad {g.shape}, moment {m.shape}")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params


# -- serialization -------------------------------------------------------------
# little-endian: magic, u32 version, u8 head, u32 layer count,
# then per layer u32 rows, u32 cols, rows*cols f64 weights (row-major), rows f64 biases

def save_weights(net: DenseNet) -> bytes:
    out = [MAGIC, struct.pack("<IBI", FORMAT_VERSION, HEADS.index(net.head), len(net.weights))]
    for w, b in zip(net.weights, net.biases):
        rows, cols = w.shape
        out.append(struct.pack("<II", rows, cols))
        out.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        out.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    return b"".join(out)


def load_weights(data: bytes, template: DenseNet | None = None) -> DenseNet:
    """Rebuild a net from :func:`save_weights` output.

    If ``template`` is given, the stored layer sizes and head must match it.
    """
    data = bytes(data)
    if data[:4] != MAGIC:
        raise ValueError("not a weight file (bad magic tag)")
    pos = 4
    hdr = struct.calcsize("<IBI")
    if len(data) < pos + hdr:
        raise ValueError("truncated weight file header")
    version, head_id, n_layers = struct.unpack_from("<IBI", data, pos)
    pos += hdr
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported weight format version {version}")
    if head_id >= len(HEADS):
        raise ValueError(f"unknown head id {head_id}")
    weights, biases = [], []
    for layer in range(n_layers):
        if len(data) < pos + 8:
            raise ValueError(f"truncated weight file at layer {layer} header")
        rows, cols = struct.unpack_from("<II", data, pos)
        pos += 8
        nbytes = 8 * (rows * cols + rows)
        if len(data) < pos + nbytes:
            raise ValueError(f"truncated weight file in layer {layer} data")
        w = np.frombuffer(data, dtype="<f8", count=rows * cols, offset=pos).reshape(rows, cols)
        pos += 8 * rows * cols
        b = np.frombuffer(data, dtype="<f8", count=rows, offset=pos)
        pos += 8 * rows
        if weights and weights[-1].shape[0] != cols:
            raise ValueError(f"layer {layer} expects {cols} inputs but previous layer emits "
                             f"{weights[-1].shape[0]}")
        weights.append(w.astype(float))
        biases.append(b.astype(float))
    if pos != len(data):
        raise ValueError(f"{len(data) - pos} trailing bytes after last layer")
    if not weights:
        raise ValueError("weight file has no layers")
    sizes = (weights[0].shape[1],) + tuple(w.shape[0] for w in weights)
    head = HEADS[head_id]
    if template is not None and (sizes != template.sizes or head != template.head):
        raise ValueError(f"dimension mismatch: file has sizes {sizes} ({head}), "
                         f"expected {template.sizes} ({template.head})")
    net = DenseNet.__new__(DenseNet)
    net.sizes, net.head, net.weights, net.biases = sizes, head, weights, biases
    return net

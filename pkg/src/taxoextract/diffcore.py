"""Differentiable numpy primitives with hand-written backward passes.

Every layer keeps its weights in a shared :class:`ParameterStore`. ``forward``
returns the output together with a cache; ``backward`` takes the upstream
gradient and the cache, accumulates parameter gradients in the store and
returns the gradient with respect to the layer input.
"""
from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

PAD_ID = 0
UNK_ID = 1


class ShapeError(ValueError):
    pass


class ParameterStore:
    """Named float64 tensors with matching gradient buffers.

    Each parameter is initialised from its own generator seeded by
    ``(seed, crc32(name))`` so adding or removing a parameter never changes
    the initial values of the others.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.values: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.frozen: set[str] = set()

    def rng_for(self, name: str) -> np.random.Generator:
        return np.random.default_rng([self.seed, zlib.crc32(name.encode("utf-8"))])

    def add(self, name: str, value: np.ndarray, frozen: bool = False) -> np.ndarray:
        if name in self.values:
            raise KeyError(f"parameter {name!r} already exists")
        value = np.array(value, dtype=np.float64)
        self.values[name] = value
        self.grads[name] = np.zeros_like(value)
        if frozen:
            self.frozen.add(name)
        return value

    def uniform(self, name: str, shape, scale: float) -> np.ndarray:
        return self.add(name, self.rng_for(name).uniform(-scale, scale, size=shape))

    def glorot(self, name: str, shape) -> np.ndarray:
        fan_out, fan_in = shape[0], int(np.prod(shape[1:]))
        return self.uniform(name, shape, np.sqrt(6.0 / (fan_in + fan_out)))

    def zeros(self, name: str, shape) -> np.ndarray:
        return self.add(name, np.zeros(shape))

    def __getitem__(self, name: str) -> np.ndarray:
        return self.values[name]

    def __contains__(self, name: str) -> bool:
        return name in self.values

    def names(self) -> list[str]:
        return list(self.values)

    def trainable(self) -> list[str]:
        return [n for n in self.values if n not in self.frozen]

    def zero_grad(self) -> None:
        for g in self.grads.values():
            g.fill(0.0)

    def state(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.values.items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for k, v in state.items():
            if k not in self.values:
                raise KeyError(f"unknown parameter {k!r} in state")
            if self.values[k].shape != v.shape:
                raise ShapeError(f"{k}: expected shape {self.values[k].shape}, got {v.shape}")
            self.values[k][...] = v


# -- activations -------------------------------------------------------------

def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def tanh(x):
    return np.tanh(x)


def masked_softmax(scores, mask, axis=-1):
    """Softmax restricted to ``mask``; masked entries come out exactly zero."""
    scores = np.where(mask, scores, -np.inf)
    shift = np.max(scores, axis=axis, keepdims=True)
    shift = np.where(np.isfinite(shift), shift, 0.0)
    ex = np.where(mask, np.exp(scores - shift), 0.0)
    total = ex.sum(axis=axis, keepdims=True)
    return ex / np.where(total > 0, total, 1.0)


def logsumexp(x, axis=-1):
    m = np.max(x, axis=axis, keepdims=True)
    return np.squeeze(m, axis) + np.log(np.sum(np.exp(x - m), axis=axis))


# -- dense -------------------------------------------------------------------

class Dense:
    """Affine map ``y = W x + b`` over the last axis."""

    def __init__(self, store: ParameterStore, name: str, in_dim: int, out_dim: int, bias: bool = True):
        self.store = store
        self.name = name
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.bias = bias
        if name + ".W" not in store:
            store.glorot(name + ".W", (out_dim, in_dim))
            if bias:
                store.zeros(name + ".b", (out_dim,))

    def forward(self, x):
        if x.shape[-1] != self.in_dim:
            raise ShapeError(f"{self.name}: input last dimension {x.shape[-1]} != {self.in_dim}")
        y = x @ self.store[self.name + ".W"].T
        if self.bias:
            y = y + self.store[self.name + ".b"]
        return y, x

    def backward(self, dy, x):
        W = self.store[self.name + ".W"]
        self.store.grads[self.name + ".W"] += dy.reshape(-1, self.out_dim).T @ x.reshape(-1, self.in_dim)
        if self.bias:
            self.store.grads[self.name + ".b"] += dy.reshape(-1, self.out_dim).sum(axis=0)
        return dy @ W


# -- embedding ---------------------------------------------------------------

class Embedding:
    """Row lookup; ids outside the table map to the OOV row and are counted."""

    def __init__(self, store: ParameterStore, name: str, vocab_size: int, dim: int, scale: float = 0.05):
        self.store = store
        self.name = name
        self.vocab_size = vocab_size
        self.dim = dim
        self.oov_count = 0
        if name not in store:
            store.uniform(name, (vocab_size, dim), scale)

    def lookup_ids(self, ids):
        ids = np.asarray(ids, dtype=np.int64)
        bad = (ids < 0) | (ids >= self.vocab_size)
        if bad.any():
            self.oov_count += int(bad.sum())
            ids = np.where(bad, UNK_ID, ids)
        return ids

    def forward(self, ids):
        ids = self.lookup_ids(ids)
        return self.store[self.name][ids], ids

    def backward(self, dy, ids):
        np.add.at(self.store.grads[self.name], ids.reshape(-1), dy.reshape(-1, self.dim))


def load_word_vectors(path, vocab: dict[str, int], table: np.ndarray) -> int:
    """Overwrite rows of ``table`` from a ``token v1 ... vn`` text file; returns rows filled."""
    filled = 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.rstrip().split(" ")
            if len(parts) != table.shape[1] + 1:
                continue
            idx = vocab.get(parts[0])
            if idx is not None:
                table[idx] = [float(x) for x in parts[1:]]
                filled += 1
    return filled


# -- dropout -----------------------------------------------------------------

def dropout_mask(rng: np.random.Generator, shape, rate: float) -> np.ndarray:
    """Bernoulli keep-mask pre-scaled by ``1 / (1 - rate)``."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)


def dropout(x, rate: float, rng: np.random.Generator | None, training: bool):
    """Return ``(y, mask)``; in inference mode ``y is x`` and mask is None."""
    if not training or rate == 0.0:
        return x, None
    mask = dropout_mask(rng, x.shape, rate)
    return x * mask, mask


# -- recurrent ---------------------------------------------------------------

class LSTM:
    """Single-direction LSTM with gate order input, forget, cell, output.

    Masked steps leave the recurrent state untouched and emit zeros.
    """

    def __init__(self, store: ParameterStore, name: str, in_dim: int, hidden: int, reverse: bool = False):
        self.store = store
        self.name = name
        self.in_dim = in_dim
        self.hidden = hidden
        self.reverse = reverse
        if name + ".W" not in store:
            store.uniform(name + ".W", (4 * hidden, in_dim), 0.08)
            store.uniform(name + ".U", (4 * hidden, hidden), 0.08)
            b = np.zeros(4 * hidden)
            b[hidden:2 * hidden] = 1.0
            store.add(name + ".b", b)

    def forward(self, x, mask):
        B, T, D = x.shape
        if D != self.in_dim:
            raise ShapeError(f"{self.name}: input dimension {D} != {self.in_dim}")
        if mask.shape != (B, T):
            raise ShapeError(f"{self.name}: mask shape {mask.shape} != {(B, T)}")
        H = self.hidden
        W, U, b = self.store[self.name + ".W"], self.store[self.name + ".U"], self.store[self.name + ".b"]
        xs = x @ W.T + b
        m = mask.astype(np.float64)
        h = np.zeros((B, H))
        c = np.zeros((B, H))
        out = np.zeros((B, T, H))
        steps = []
        order = range(T - 1, -1, -1) if self.reverse else range(T)
        for t in order:
            z = xs[:, t] + h @ U.T
            i = sigmoid(z[:, :H])
            f = sigmoid(z[:, H:2 * H])
            g = np.tanh(z[:, 2 * H:3 * H])
            o = sigmoid(z[:, 3 * H:])
            c_new = f * c + i * g
            tc = np.tanh(c_new)
            h_new = o * tc
            mt = m[:, t, None]
            steps.append((t, h, c, i, f, g, o, tc, mt))
            c = mt * c_new + (1 - mt) * c
            h = mt * h_new + (1 - mt) * h
            out[:, t] = mt * h_new
        return out, (x, steps)

    def backward(self, dout, cache):
        x, steps = cache
        B, T, _ = x.shape
        H = self.hidden
        W, U = self.store[self.name + ".W"], self.store[self.name + ".U"]
        dxs = np.zeros((B, T, 4 * H))
        dU = np.zeros_like(U)
        dh = np.zeros((B, H))
        dc = np.zeros((B, H))
        for t, h_prev, c_prev, i, f, g, o, tc, mt in reversed(steps):
            dh_new = mt * (dout[:, t] + dh)
            dc_new = mt * dc + dh_new * o * (1 - tc * tc)
            dz = np.concatenate([
                dc_new * g * i * (1 - i),
                dc_new * c_prev * f * (1 - f),
                dc_new * i * (1 - g * g),
                dh_new * tc * o * (1 - o),
            ], axis=1)
            dxs[:, t] = dz
            dU += dz.T @ h_prev
            dh = dz @ U + (1 - mt) * dh
            dc = dc_new * f + (1 - mt) * dc
        self.store.grads[self.name + ".U"] += dU
        flat = dxs.reshape(-1, 4 * H)
        self.store.grads[self.name + ".W"] += flat.T @ x.reshape(-1, x.shape[2])
        self.store.grads[self.name + ".b"] += flat.sum(axis=0)
        return dxs @ W


class BiLSTM:
    """Forward and backward LSTMs concatenated to ``2 * hidden`` features."""

    def __init__(self, store: ParameterStore, name: str, in_dim: int, hidden: int):
        self.fwd = LSTM(store, name + ".fwd", in_dim, hidden)
        self.bwd = LSTM(store, name + ".bwd", in_dim, hidden, reverse=True)
        self.hidden = hidden

    @property
    def out_dim(self) -> int:
        return 2 * self.hidden

    def forward(self, x, mask):
        if x.shape[1] == 0:
            return np.zeros(x.shape[:2] + (self.out_dim,)), None
        hf, cf = self.fwd.forward(x, mask)
        hb, cb = self.bwd.forward(x, mask)
        return np.concatenate([hf, hb], axis=-1), (cf, cb)

    def backward(self, dout, cache):
        if cache is None:
            return np.zeros(dout.shape[:2] + (self.fwd.in_dim,))
        cf, cb = cache
        H = self.hidden
        return self.fwd.backward(dout[..., :H], cf) + self.bwd.backward(dout[..., H:], cb)


# -- gradient checking -------------------------------------------------------

@dataclass
class GradCheckReport:
    max_rel_error: float
    per_param: dict[str, float] = field(default_factory=dict)
    checked: int = 0

    def passed(self, tol: float = 1e-4) -> bool:
        return self.max_rel_error <= tol


def gradient_check(loss_fn, params: dict[str, np.ndarray], analytic: dict[str, np.ndarray],
                   eps: float = 1e-5, samples: int = 20, seed: int = 0,
                   names: list[str] | None = None) -> GradCheckReport:
    """Compare analytic gradients with central differences.

    ``loss_fn()`` must read the arrays in ``params`` (they are perturbed in
    place and restored). Up to ``samples`` coordinates per parameter are
    checked; the error per coordinate is
    ``|a - n| / max(1, |a|, |n|)``.
    """
    rng = np.random.default_rng(seed)
    report = GradCheckReport(0.0)
    for name in names or list(params):
        value = params[name]
        flat = value.reshape(-1)
        if flat.size == 0:
            continue
        grad = np.asarray(analytic[name]).reshape(-1)
        coords = np.arange(flat.size) if flat.size <= samples else rng.choice(flat.size, samples, replace=False)
        worst = 0.0
        for k in coords:
            orig = flat[k]
            flat[k] = orig + eps
            fp = float(loss_fn())
            flat[k] = orig - eps
            fm = float(loss_fn())
            flat[k] = orig
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise FloatingPointError(f"non-finite loss while perturbing {name}[{k}]")
            numeric = (fp - fm) / (2 * eps)
            a = grad[k]
            err = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
            worst = max(worst, err)
            report.checked += 1
        report.per_param[name] = worst
        report.max_rel_error = max(report.max_rel_error, worst)
    return report


# -- checkpoints -------------------------------------------------------------

MAGIC = b"TXK1"


def save_tensors(path, tensors: dict[str, np.ndarray]) -> None:
    """Write tensors as ``TXK1`` + count + (name, rank, extents, float64 data)*; little-endian u64 fields."""
    chunks = [MAGIC, struct.pack("<Q", len(tensors))]
    for name, arr in tensors.items():
        arr = np.asarray(arr, dtype="<f8")
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<Q", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<Q", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        chunks.append(arr.tobytes(order="C"))
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


def load_tensors(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise ValueError(f"{path}: not a TXK1 checkpoint")
    pos = 4
    (count,) = struct.unpack_from("<Q", data, pos)
    pos += 8
    out = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<Q", data, pos)
        pos += 8
        name = data[pos:pos + nlen].decode("utf-8")
        pos += nlen
        (rank,) = struct.unpack_from("<Q", data, pos)
        pos += 8
        shape = struct.unpack_from(f"<{rank}Q", data, pos)
        pos += 8 * rank
        size = int(np.prod(shape)) if rank else 1
        arr = np.frombuffer(data, dtype="<f8", count=size, offset=pos).reshape(shape).astype(np.float64)
        pos += 8 * size
        out[name] = arr
    if pos != len(data):
        raise ValueError(f"{path}: {len(data) - pos} trailing bytes")
    return out

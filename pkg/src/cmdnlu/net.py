"""Small recurrent sequence networks in numpy.

Supports tanh RNN and LSTM cells, stacked layers, bidirectional layers and
two output modes: one score vector for the whole sequence (``last_step``)
or one per time step (``per_step``).  Gradients come from hand-written
backpropagation through time; all arithmetic is float64.

Parameters live in a plain dict keyed ``"l{layer}.{fw|bw}.{W|U|b}"`` plus
``"out.W"`` / ``"out.b"``.  LSTM blocks are packed in gate order
input, forget, output, candidate.
"""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigurationError, ValidationError

CELLS = ("rnn", "lstm")
OUTPUT_MODES = ("last_step", "per_step")
FORMAT_VERSION = 1
LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class SequenceModelConfig:
    cell: str
    layers: int
    hidden: int
    bidirectional: bool
    input_dim: int
    output_dim: int
    output_mode: str = "last_step"
    seed: int = 0

    def __post_init__(self):
        if self.cell not in CELLS:
            raise ValidationError(f"unknown cell {self.cell!r}")
        if self.output_mode not in OUTPUT_MODES:
            raise ValidationError(f"unknown output mode {self.output_mode!r}")
        for name in ("layers", "hidden", "input_dim", "output_dim"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be at least 1")

    @property
    def directions(self):
        return ("fw", "bw") if self.bidirectional else ("fw",)

    @property
    def gates(self):
        return 4 if self.cell == "lstm" else 1

    @property
    def top_dim(self):
        return self.hidden * len(self.directions)

    def layer_input_dim(self, layer):
        return self.input_dim if layer == 0 else self.top_dim

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


def param_shapes(config):
    shapes = {}
    G, H = config.gates, config.hidden
    for layer in range(config.layers):
        for d in config.directions:
            key = f"l{layer}.{d}"
            shapes[key + ".W"] = (G * H, config.layer_input_dim(layer))
            shapes[key + ".U"] = (G * H, H)
            shapes[key + ".b"] = (G * H,)
    shapes["out.W"] = (config.output_dim, config.top_dim)
    shapes["out.b"] = (config.output_dim,)
    return shapes


def init_scale(fan_in, fan_out):
    return math.sqrt(6.0 / (fan_in + fan_out))


def init_params(config):
    """Uniform init in [-s, s], s = sqrt(6 / (fan_in + fan_out)).

    For LSTM, each gate block is treated as its own H x fan_in matrix.
    Biases start at zero except the LSTM forget gate, which starts at 1.
    """
    rng = np.random.default_rng(config.seed)
    H = config.hidden
    params = {}
    for name, shape in param_shapes(config).items():
        if len(shape) == 1:
            b = np.zeros(shape)
            if config.cell == "lstm" and not name.startswith("out."):
                b[H:2 * H] = 1.0
            params[name] = b
            continue
        rows, cols = shape
        fan_out = H if not name.startswith("out.") else rows
        s = init_scale(cols, fan_out)
        params[name] = rng.uniform(-s, s, size=shape)
    return params


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _check_step_shapes(x, h_prev, W, U, b, gates):
    H = h_prev.shape[0]
    if W.shape != (gates * H, x.shape[0]) or U.shape != (gates * H, H) or b.shape != (gates * H,):
        raise ValidationError(
            f"shape mismatch: x{x.shape} h{h_prev.shape} W{W.shape} U{U.shape} b{b.shape}")


def rnn_step(x, h_prev, W, U, b):
    _check_step_shapes(x, h_prev, W, U, b, 1)
    return np.tanh(W @ x + U @ h_prev + b)


def lstm_step(x, h_prev, c_prev, W, U, b):
    """One LSTM step; returns ``(h, c)``."""
    _check_step_shapes(x, h_prev, W, U, b, 4)
    if c_prev.shape != h_prev.shape:
        raise ValidationError("cell state and hidden state shapes differ")
    H = h_prev.shape[0]
    a = W @ x + U @ h_prev + b
    i, f, o = sigmoid(a[:H]), sigmoid(a[H:2 * H]), sigmoid(a[2 * H:3 * H])
    g = np.tanh(a[3 * H:])
    c = f * c_prev + i * g
    return o * np.tanh(c), c


# -- sequence kernels -------------------------------------------------------
# X is (T, in); the returned hidden states are (T, H).

def _rnn_forward(X, W, U, b):
    T, H = X.shape[0], U.shape[1]
    pre = X @ W.T + b
    Hs = np.empty((T, H))
    h = np.zeros(H)
    for t in range(T):
        h = np.tanh(pre[t] + U @ h)
        Hs[t] = h
    return Hs, (X, Hs)


def _rnn_backward(dHs, cache, W, U):
    X, Hs = cache
    T, H = Hs.shape
    dA = np.empty((T, H))
    dh_next = np.zeros(H)
    for t in range(T - 1, -1, -1):
        da = (dHs[t] + dh_next) * (1.0 - Hs[t] ** 2)
        dA[t] = da
        dh_next = U.T @ da
    dW = dA.T @ X
    dU = dA[1:].T @ Hs[:-1]
    return dA @ W, dW, dU, dA.sum(axis=0)


def _lstm_forward(X, W, U, b):
    T, H = X.shape[0], U.shape[1]
    pre = X @ W.T + b
    Hs = np.empty((T, H))
    Cs = np.empty((T, H))
    acts = np.empty((T, 4 * H))
    h = np.zeros(H)
    c = np.zeros(H)
    for t in range(T):
        a = pre[t] + U @ h
        act = acts[t]
        act[:3 * H] = sigmoid(a[:3 * H])
        act[3 * H:] = np.tanh(a[3 * H:])
        c = act[H:2 * H] * c + act[:H] * act[3 * H:]
        h = act[2 * H:3 * H] * np.tanh(c)
        Hs[t] = h
        Cs[t] = c
    return Hs, (X, Hs, Cs, acts)


def _lstm_backward(dHs, cache, W, U):
    X, Hs, Cs, acts = cache
    T, H = Hs.shape
    dA = np.empty((T, 4 * H))
    dh_next = np.zeros(H)
    dc_next = np.zeros(H)
    zeros = np.zeros(H)
    for t in range(T - 1, -1, -1):
        i, f, o, g = acts[t, :H], acts[t, H:2 * H], acts[t, 2 * H:3 * H], acts[t, 3 * H:]
        tc = np.tanh(Cs[t])
        c_prev = Cs[t - 1] if t > 0 else zeros
        dh = dHs[t] + dh_next
        dc = dc_next + dh * o * (1.0 - tc ** 2)
        da = dA[t]
        da[:H] = dc * g * i * (1.0 - i)
        da[H:2 * H] = dc * c_prev * f * (1.0 - f)
        da[2 * H:3 * H] = dh * tc * o * (1.0 - o)
        da[3 * H:] = dc * i * (1.0 - g ** 2)
        dc_next = dc * f
        dh_next = U.T @ da
    dW = dA.T @ X
    dU = dA[1:].T @ Hs[:-1]
    return dA @ W, dW, dU, dA.sum(axis=0)


_KERNELS = {
    "rnn": (_rnn_forward, _rnn_backward),
    "lstm": (_lstm_forward, _lstm_backward),
}


@dataclass
class ForwardResult:
    outputs: np.ndarray  # (T, top_dim) top-layer states before projection
    scores: np.ndarray   # (output_dim,) or (T, output_dim); raw, no softmax
    cache: list = field(repr=False, default_factory=list)


def forward(config, params, inputs):
    """Run the network on a ``input_dim x T`` matrix."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[0] != config.input_dim:
        raise ValidationError(
            f"expected input of shape ({config.input_dim}, T), got {inputs.shape}")
    if inputs.shape[1] == 0:
        raise ValueError("cannot run a network on an empty sequence")
    run = _KERNELS[config.cell][0]
    X = inputs.T
    caches = []
    for layer in range(config.layers):
        outs = []
        for d in config.directions:
            key = f"l{layer}.{d}"
            src = X if d == "fw" else X[::-1]
            Hs, cache = run(src, params[key + ".W"], params[key + ".U"], params[key + ".b"])
            outs.append(Hs if d == "fw" else Hs[::-1])
            caches.append(cache)
        X = outs[0] if len(outs) == 1 else np.concatenate(outs, axis=1)
    scores = _project(config, params, X)
    return ForwardResult(X, scores, caches)


def _final_state(config, top):
    if not config.bidirectional:
        return top[-1]
    H = config.hidden
    return np.concatenate([top[-1, :H], top[0, H:]])


def _project(config, params, top):
    if config.output_mode == "per_step":
        return top @ params["out.W"].T + params["out.b"]
    return params["out.W"] @ _final_state(config, top) + params["out.b"]


def backward(config, params, result, dscores):
    """Gradients of a loss w.r.t. every parameter given d(loss)/d(scores)."""
    back = _KERNELS[config.cell][1]
    top = result.outputs
    H = config.hidden
    grads = {}
    if config.output_mode == "per_step":
        grads["out.W"] = dscores.T @ top
        grads["out.b"] = dscores.sum(axis=0)
        dX = dscores @ params["out.W"]
    else:
        grads["out.W"] = np.outer(dscores, _final_state(config, top))
        grads["out.b"] = dscores.copy()
        dv = params["out.W"].T @ dscores
        dX = np.zeros_like(top)
        if config.bidirectional:
            dX[-1, :H] = dv[:H]
            dX[0, H:] = dv[H:]
        else:
            dX[-1] = dv
    caches = iter(reversed(result.cache))
    for layer in reversed(range(config.layers)):
        parts = []
        for d in reversed(config.directions):
            key = f"l{layer}.{d}"
            cache = next(caches)
            if d == "fw":
                dH = dX[:, :H]
                dIn, dW, dU, db = back(dH, cache, params[key + ".W"], params[key + ".U"])
            else:
                dH = dX[::-1, H:]
                dIn, dW, dU, db = back(dH, cache, params[key + ".W"], params[key + ".U"])
                dIn = dIn[::-1]
            grads[key + ".W"], grads[key + ".U"], grads[key + ".b"] = dW, dU, db
            parts.append(dIn)
        dX = sum(parts)
    return grads


def softmax(scores):
    scores = np.asarray(scores, dtype=np.float64)
    z = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(probs, gold):
    """Negative log-likelihood; ``gold`` is an index or one index per row."""
    probs = np.asarray(probs)
    if probs.ndim == 1:
        return -math.log(max(probs[gold], LOG_FLOOR))
    picked = probs[np.arange(len(gold)), gold]
    return float(-np.log(np.maximum(picked, LOG_FLOOR)).sum())


def loss_and_grads(config, params, inputs, gold):
    """Softmax cross-entropy (summed over steps in per_step mode) and gradients."""
    result = forward(config, params, inputs)
    probs = softmax(result.scores)
    loss = cross_entropy(probs, gold)
    dscores = probs.copy()
    if dscores.ndim == 1:
        dscores[gold] -= 1.0
    else:
        dscores[np.arange(len(gold)), gold] -= 1.0
    return loss, backward(config, params, result, dscores)


def loss_only(config, params, inputs, gold):
    return cross_entropy(softmax(forward(config, params, inputs).scores), gold)


# -- optimizers -------------------------------------------------------------

@dataclass
class AdamState:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    scratch: dict = field(default_factory=dict, repr=False)


def adam_update(params, grads, state):
    """One bias-corrected Adam step, applied in place; returns ``params``."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, g in grads.items():
        if name not in state.m:
            state.m[name] = np.zeros_like(g)
            state.v[name] = np.zeros_like(g)
            state.scratch[name] = np.empty_like(g)
        m, v, tmp = state.m[name], state.v[name], state.scratch[name]
        m *= b1
        np.multiply(g, 1.0 - b1, out=tmp)
        m += tmp
        v *= b2
        np.multiply(g, g, out=tmp)
        tmp *= 1.0 - b2
        v += tmp
        np.multiply(v, 1.0 / c2, out=tmp)
        np.sqrt(tmp, out=tmp)
        tmp += state.eps
        np.divide(m, tmp, out=tmp)
        tmp *= state.lr / c1
        params[name] -= tmp
    return params


@dataclass
class AdagradState:
    lr: float = 0.05
    eps: float = 1e-8
    accum: dict = field(default_factory=dict)


def adagrad_update(params, grads, state):
    """One AdaGrad step, applied in place; returns ``params``."""
    for name, g in grads.items():
        acc = state.accum.setdefault(name, np.zeros_like(g))
        acc += g * g
        params[name] -= state.lr * g / (np.sqrt(acc) + state.eps)
    return params


def clip_by_global_norm(grads, max_norm):
    total = math.sqrt(sum(float(np.vdot(g, g)) for g in grads.values()))
    if total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


# -- training ---------------------------------------------------------------

@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    lr: list = field(default_factory=list)
    best_epoch: int = None


def train(config, params, examples, epochs, lr=0.01, seed=0, val_examples=None,
          patience=3, clip=5.0, target_loss=None, keep_best=True):
    """Per-example Adam training; mutates ``params`` and returns a TrainHistory.

    ``examples`` is a list of ``(inputs, gold)`` pairs.  With validation
    examples the learning rate halves after ``patience`` epochs without a
    new best validation loss, and with ``keep_best`` the parameters of the
    best-validation epoch are restored at the end.  Training stops early
    once the mean training loss drops below ``target_loss``.
    """
    if not examples:
        raise ValueError("no training examples")
    rng = np.random.default_rng(seed)
    state = AdamState(lr=lr)
    history = TrainHistory()
    best_val = math.inf
    best_params = None
    stale = 0
    for _ in range(epochs):
        total = 0.0
        for idx in rng.permutation(len(examples)):
            inputs, gold = examples[idx]
            loss, grads = loss_and_grads(config, params, inputs, gold)
            if clip:
                clip_by_global_norm(grads, clip)
            adam_update(params, grads, state)
            total += loss
        history.train_loss.append(total / len(examples))
        history.lr.append(state.lr)
        if val_examples:
            val = sum(loss_only(config, params, x, y) for x, y in val_examples) / len(val_examples)
            history.val_loss.append(val)
            if val < best_val - 1e-9:
                best_val, stale = val, 0
                history.best_epoch = len(history.val_loss) - 1
                if keep_best:
                    best_params = {k: v.copy() for k, v in params.items()}
            else:
                stale += 1
                if stale >= patience:
                    state.lr /= 2.0
                    stale = 0
        if target_loss is not None and history.train_loss[-1] < target_loss:
            break
    if best_params is not None:
        for k, v in best_params.items():
            params[k][...] = v
    return history


# -- checkpoints ------------------------------------------------------------

def params_to_json(params):
    return {name: {"shape": list(p.shape), "data": p.ravel().tolist()}
            for name, p in params.items()}


def params_from_json(config, data):
    shapes = param_shapes(config)
    if set(data) != set(shapes):
        raise ConfigurationError("checkpoint parameter names do not match config")
    params = {}
    for name, shape in shapes.items():
        entry = data[name]
        if tuple(entry["shape"]) != shape:
            raise ConfigurationError(
                f"parameter {name}: checkpoint shape {entry['shape']} != expected {list(shape)}")
        arr = np.asarray(entry["data"], dtype=np.float64)
        if arr.size != math.prod(shape):
            raise ConfigurationError(f"parameter {name}: wrong number of values")
        params[name] = arr.reshape(shape)
    return params


def save_checkpoint(path, config, params, vocab_fingerprint, **extra):
    payload = {
        "format_version": FORMAT_VERSION,
        "config": config.to_dict(),
        "params": params_to_json(params),
        "vocab_fingerprint": vocab_fingerprint,
    }
    payload.update(extra)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f)


def load_checkpoint(path):
    """Return ``(config, params, payload)``; raises ConfigurationError on mismatch."""
    with open(path, encoding="utf-8") as f:
        payload = json.load(f)
    if payload.get("format_version") != FORMAT_VERSION:
        raise ConfigurationError(
            f"unsupported checkpoint version {payload.get('format_version')!r}")
    config = SequenceModelConfig.from_dict(payload["config"])
    params = params_from_json(config, payload["params"])
    return config, params, payload

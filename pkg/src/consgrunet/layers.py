"""Forward/backward kernels for every layer of the network, plus Adam.

Each public operation takes its parameter bundle and a `Tensor`, returns a
`Tensor` plus an opaque cache, and has an exact hand-derived backward. The
math lives in dtype-generic `*_arrays` functions operating on bare ndarrays;
the public wrappers pin everything to float32. Gradient tests drive the same
array kernels in float64 against central finite differences.

Conventions locked here (and by the tests):
  * GRU update: h_t = (1 - z_t) * h_{t-1} + z_t * hhat_t, with
    z = sigmoid(W_z x + U_z h + b_z), r likewise, and
    hhat = tanh(W_h x + U_h (r * h) + b_h). One bias per gate.
  * Gated skip: y = main + sigmoid(gamma) * P(skip), a learnable per-channel
    gate on the skip path; P is a kernel-1 projection only when the channel
    counts differ.
  * Weight init: uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)); biases and gate
    logits start at zero (gate half open).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, LabelError
from .tensor import Tensor


# ---------------------------------------------------------------------------
# array-level kernels (dtype generic)
# ---------------------------------------------------------------------------

def sigmoid_arrays(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def conv1d_forward_arrays(w, b, x, stride: int, padding: int):
    """y[o, t] = b[o] + sum_{c,k} w[o,c,k] * x_pad[c, t*stride + k]."""
    c_out, c_in, k = w.shape
    if x.ndim != 2 or x.shape[0] != c_in:
        raise DimensionError(
            f"conv1d input {list(x.shape)} does not match weights {list(w.shape)}"
        )
    t = x.shape[1]
    t_pad = t + 2 * padding
    if t_pad < k:
        raise DimensionError(
            f"window of length {t} (padding {padding}) is shorter than kernel {k}"
        )
    if padding:
        xp = np.zeros((c_in, t_pad), dtype=x.dtype)
        xp[:, padding : padding + t] = x
    else:
        xp = x
    t_out = (t_pad - k) // stride + 1
    # im2col: cols[c*k + j, t] = xp[c, t*stride + j]
    windows = np.lib.stride_tricks.sliding_window_view(xp, k, axis=1)
    cols = np.ascontiguousarray(
        windows[:, ::stride][:, :t_out].transpose(0, 2, 1)
    ).reshape(c_in * k, t_out)
    y = w.reshape(c_out, c_in * k) @ cols + b[:, None]
    cache = (w, x.shape, cols, stride, padding, xp.shape[1])
    return y, cache


def conv1d_backward_arrays(cache, gy):
    w, x_shape, cols, stride, padding, t_pad = cache
    c_out, c_in, k = w.shape
    t_out = cols.shape[1]
    if gy.shape != (c_out, t_out):
        raise DimensionError(
            f"conv1d grad shape {list(gy.shape)} != output shape {[c_out, t_out]}"
        )
    gb = gy.sum(axis=1)
    gw = (gy @ cols.T).reshape(c_out, c_in, k)
    gcols = (w.reshape(c_out, c_in * k).T @ gy).reshape(c_in, k, t_out)
    gxp = np.zeros((c_in, t_pad), dtype=gy.dtype)
    for j in range(k):
        gxp[:, j::stride][:, :t_out] += gcols[:, j, :]
    gx = gxp[:, padding : padding + x_shape[1]]
    if padding:
        gx = np.ascontiguousarray(gx)
    return gx, gw, gb


def gated_skip_forward_arrays(gamma, proj_w, proj_b, main, skip_in):
    if main.ndim != 2 or skip_in.ndim != 2 or main.shape[1] != skip_in.shape[1]:
        raise DimensionError(
            f"gated skip time extents differ: main {list(main.shape)}, "
            f"skip {list(skip_in.shape)}"
        )
    if proj_w is None:
        if skip_in.shape[0] != main.shape[0]:
            raise DimensionError(
                f"skip channels {skip_in.shape[0]} != main channels "
                f"{main.shape[0]} and no projection present"
            )
        pskip, pcache = skip_in, None
    else:
        pskip, pcache = conv1d_forward_arrays(proj_w, proj_b, skip_in, 1, 0)
    g = sigmoid_arrays(gamma)
    y = main + g[:, None] * pskip
    return y, (g, pskip, pcache, main.shape)


def gated_skip_backward_arrays(cache, gy):
    g, pskip, pcache, main_shape = cache
    if gy.shape != main_shape:
        raise DimensionError(
            f"gated skip grad shape {list(gy.shape)} != output shape {list(main_shape)}"
        )
    grad_main = gy
    grad_pskip = gy * g[:, None]
    grad_gamma = (gy * pskip).sum(axis=1) * g * (1.0 - g)
    if pcache is None:
        return grad_main, grad_pskip, grad_gamma, None, None
    grad_skip_in, grad_pw, grad_pb = conv1d_backward_arrays(pcache, grad_pskip)
    return grad_main, grad_skip_in, grad_gamma, grad_pw, grad_pb


def gru_forward_arrays(params: dict, x_seq, h0):
    """Run the GRU over a [T, I] sequence from state h0, returning [T, H]."""
    w_z, w_r, w_h = params["W_z"], params["W_r"], params["W_h"]
    u_z, u_r, u_h = params["U_z"], params["U_r"], params["U_h"]
    b_z, b_r, b_h = params["b_z"], params["b_r"], params["b_h"]
    hidden = w_z.shape[0]
    if x_seq.ndim != 2 or x_seq.shape[1] != w_z.shape[1]:
        raise DimensionError(
            f"gru input {list(x_seq.shape)} does not match W [{hidden}, {w_z.shape[1]}]"
        )
    steps = x_seq.shape[0]
    # Input projections for the whole sequence in one product per gate.
    xz = x_seq @ w_z.T + b_z
    xr = x_seq @ w_r.T + b_r
    xh = x_seq @ w_h.T + b_h
    h_seq = np.empty((steps, hidden), dtype=x_seq.dtype)
    z_all = np.empty_like(h_seq)
    r_all = np.empty_like(h_seq)
    hhat_all = np.empty_like(h_seq)
    h_prev_all = np.empty_like(h_seq)
    rh_all = np.empty_like(h_seq)
    h = h0
    for t in range(steps):
        z = sigmoid_arrays(xz[t] + u_z @ h)
        r = sigmoid_arrays(xr[t] + u_r @ h)
        rh = r * h
        hhat = np.tanh(xh[t] + u_h @ rh)
        h_prev_all[t] = h
        z_all[t], r_all[t], hhat_all[t], rh_all[t] = z, r, hhat, rh
        h = (1.0 - z) * h + z * hhat
        h_seq[t] = h
    cache = (params, x_seq, z_all, r_all, hhat_all, h_prev_all, rh_all)
    return h_seq, cache


def gru_backward_arrays(cache, grad_h_seq):
    params, x_seq, z_all, r_all, hhat_all, h_prev_all, rh_all = cache
    if grad_h_seq.shape != z_all.shape:
        raise DimensionError(
            f"gru grad shape {list(grad_h_seq.shape)} != output shape {list(z_all.shape)}"
        )
    u_z, u_r, u_h = params["U_z"], params["U_r"], params["U_h"]
    w_z, w_r, w_h = params["W_z"], params["W_r"], params["W_h"]
    steps = x_seq.shape[0]
    da_z = np.empty_like(grad_h_seq)
    da_r = np.empty_like(grad_h_seq)
    da_h = np.empty_like(grad_h_seq)
    dh = np.zeros_like(grad_h_seq[0])
    for t in range(steps - 1, -1, -1):
        dh_t = grad_h_seq[t] + dh
        z, r, hhat, h_prev = z_all[t], r_all[t], hhat_all[t], h_prev_all[t]
        dz = dh_t * (hhat - h_prev)
        dhhat = dh_t * z
        dh = dh_t * (1.0 - z)
        a_h = dhhat * (1.0 - hhat * hhat)
        drh = u_h.T @ a_h
        dr = drh * h_prev
        dh = dh + drh * r
        a_z = dz * z * (1.0 - z)
        dh = dh + u_z.T @ a_z
        a_r = dr * r * (1.0 - r)
        dh = dh + u_r.T @ a_r
        da_z[t], da_r[t], da_h[t] = a_z, a_r, a_h
    grads = {
        "W_z": da_z.T @ x_seq,
        "W_r": da_r.T @ x_seq,
        "W_h": da_h.T @ x_seq,
        "U_z": da_z.T @ h_prev_all,
        "U_r": da_r.T @ h_prev_all,
        "U_h": da_h.T @ rh_all,
        "b_z": da_z.sum(axis=0),
        "b_r": da_r.sum(axis=0),
        "b_h": da_h.sum(axis=0),
    }
    grad_x_seq = da_z @ w_z + da_r @ w_r + da_h @ w_h
    return grad_x_seq, grads, dh


def dense_forward_arrays(w, b, x):
    if x.ndim != 1 or x.shape[0] != w.shape[1]:
        raise DimensionError(
            f"dense input {list(x.shape)} does not match weights {list(w.shape)}"
        )
    return w @ x + b, (w, x)


def dense_backward_arrays(cache, gy):
    w, x = cache
    if gy.shape != (w.shape[0],):
        raise DimensionError(
            f"dense grad shape {list(gy.shape)} != output shape [{w.shape[0]}]"
        )
    gw = np.outer(gy, x)
    gx = w.T @ gy
    return gx, gw, gy.copy()


def relu_forward_arrays(x):
    y = np.maximum(x, 0.0)
    return y, (x > 0)


def relu_backward_arrays(mask, gy):
    return gy * mask


def softmax_cross_entropy_arrays(logits, targets):
    """Mean cross-entropy over rows, with max-subtraction stabilization."""
    if logits.ndim != 2:
        raise DimensionError(f"logits must be [B, K], got {list(logits.shape)}")
    batch, classes = logits.shape
    targets = np.asarray(targets, dtype=np.int64)
    if targets.shape != (batch,):
        raise LabelError(
            f"expected {batch} targets, got shape {list(targets.shape)}"
        )
    if targets.size and (targets.min() < 0 or targets.max() >= classes):
        raise LabelError(
            f"target out of range [0, {classes}): {int(targets.min())}..{int(targets.max())}"
        )
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    denom = exp.sum(axis=1, keepdims=True)
    logp = shifted - np.log(denom)
    rows = np.arange(batch)
    # + 0.0 folds IEEE -0.0 into 0.0 when every row is fully saturated
    loss = float(-logp[rows, targets].mean()) + 0.0
    grad = exp / denom
    grad[rows, targets] -= 1.0
    grad /= batch
    return loss, grad


# ---------------------------------------------------------------------------
# parameter bundles
# ---------------------------------------------------------------------------

@dataclass
class Conv1dParams:
    weights: Tensor  # [C_out, C_in, K]
    bias: Tensor  # [C_out]
    stride: int = 1
    padding: int = 0

    def __post_init__(self):
        if self.weights.rank != 3 or self.bias.rank != 1:
            raise DimensionError("conv weights must be [C_out, C_in, K], bias [C_out]")
        if self.bias.shape[0] != self.weights.shape[0]:
            raise DimensionError(
                f"bias extent {self.bias.shape[0]} != out channels {self.weights.shape[0]}"
            )
        if self.weights.shape[2] < 1 or self.stride < 1 or self.padding < 0:
            raise DimensionError("need kernel >= 1, stride >= 1, padding >= 0")


@dataclass
class GatedSkipParams:
    gate_logits: Tensor  # [C_out]
    projection: Conv1dParams | None = None  # kernel-1 conv, present iff C_in != C_out

    def __post_init__(self):
        if self.gate_logits.rank != 1:
            raise DimensionError("gate logits must be rank 1")
        if self.projection is not None:
            if self.projection.weights.shape[2] != 1:
                raise DimensionError("skip projection kernel size must be exactly 1")
            if self.projection.weights.shape[0] != self.gate_logits.shape[0]:
                raise DimensionError("projection output != gate channel count")


@dataclass
class GruParams:
    W_z: Tensor
    W_r: Tensor
    W_h: Tensor
    U_z: Tensor
    U_r: Tensor
    U_h: Tensor
    b_z: Tensor
    b_r: Tensor
    b_h: Tensor

    def __post_init__(self):
        hidden, inp = self.W_z.shape
        for name in ("W_z", "W_r", "W_h"):
            if getattr(self, name).shape != (hidden, inp):
                raise DimensionError(f"{name} must be [{hidden}, {inp}]")
        for name in ("U_z", "U_r", "U_h"):
            if getattr(self, name).shape != (hidden, hidden):
                raise DimensionError(f"{name} must be [{hidden}, {hidden}]")
        for name in ("b_z", "b_r", "b_h"):
            if getattr(self, name).shape != (hidden,):
                raise DimensionError(f"{name} must be [{hidden}]")

    @property
    def hidden_size(self) -> int:
        return self.W_z.shape[0]

    @property
    def input_size(self) -> int:
        return self.W_z.shape[1]

    def as_arrays(self) -> dict:
        return {name: getattr(self, name).array for name in GRU_PARAM_NAMES}


GRU_PARAM_NAMES = ("W_z", "W_r", "W_h", "U_z", "U_r", "U_h", "b_z", "b_r", "b_h")


@dataclass
class DenseParams:
    weights: Tensor  # [O, I]
    bias: Tensor  # [O]

    def __post_init__(self):
        if self.weights.rank != 2 or self.bias.shape != (self.weights.shape[0],):
            raise DimensionError(
                f"dense weights {list(self.weights.shape)} and bias "
                f"{list(self.bias.shape)} are inconsistent"
            )


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if self.t < 0:
            raise ValueError("step count must be >= 0")


def init_adam(params: dict, lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> AdamState:
    state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
    for name, value in params.items():
        state.m[name] = np.zeros_like(value)
        state.v[name] = np.zeros_like(value)
    return state


def adam_step(params: dict, grads: dict, state: AdamState):
    """One Adam update with bias correction. Mutates params and state."""
    state.t += 1
    m_corr = 1.0 - state.beta1 ** state.t
    v_corr = 1.0 - state.beta2 ** state.t
    for name, theta in params.items():
        g = grads[name]
        if g.shape != theta.shape:
            raise DimensionError(
                f"grad shape {list(g.shape)} != param shape {list(theta.shape)} for {name}"
            )
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        theta -= state.lr * (m / m_corr) / (np.sqrt(v / v_corr) + state.eps)
    return params, state


# ---------------------------------------------------------------------------
# public Tensor-typed operations
# ---------------------------------------------------------------------------

def conv1d_forward(p: Conv1dParams, x: Tensor):
    y, cache = conv1d_forward_arrays(
        p.weights.array, p.bias.array, x.array, p.stride, p.padding
    )
    return Tensor(y), cache


def conv1d_backward(cache, grad_y: Tensor):
    gx, gw, gb = conv1d_backward_arrays(cache, grad_y.array)
    return Tensor(gx), Tensor(gw), Tensor(gb)


def gated_skip_apply(p: GatedSkipParams, main: Tensor, skip_in: Tensor):
    proj_w = p.projection.weights.array if p.projection is not None else None
    proj_b = p.projection.bias.array if p.projection is not None else None
    y, cache = gated_skip_forward_arrays(
        p.gate_logits.array, proj_w, proj_b, main.array, skip_in.array
    )
    return Tensor(y), cache


def gated_skip_backward(cache, grad_y: Tensor):
    gm, gs, gg, gpw, gpb = gated_skip_backward_arrays(cache, grad_y.array)
    grad_proj = None if gpw is None else (Tensor(gpw), Tensor(gpb))
    return Tensor(gm), Tensor(gs), Tensor(gg), grad_proj


def gru_forward(p: GruParams, x_seq: Tensor, h0: Tensor):
    h_seq, cache = gru_forward_arrays(p.as_arrays(), x_seq.array, h0.array)
    return Tensor(h_seq), cache


def gru_backward(cache, grad_h_seq: Tensor):
    gx, grads, gh0 = gru_backward_arrays(cache, grad_h_seq.array)
    return Tensor(gx), {k: Tensor(v) for k, v in grads.items()}, Tensor(gh0)


def dense_forward(p: DenseParams, x: Tensor):
    y, cache = dense_forward_arrays(p.weights.array, p.bias.array, x.array)
    return Tensor(y), cache


def dense_backward(cache, grad_y: Tensor):
    gx, gw, gb = dense_backward_arrays(cache, grad_y.array)
    return Tensor(gx), Tensor(gw), Tensor(gb)


def softmax_cross_entropy(logits: Tensor, targets):
    loss, grad = softmax_cross_entropy_arrays(logits.array, targets)
    return loss, Tensor(grad)


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------

def _uniform_fan_in(rng: np.random.Generator, shape, fan_in: int) -> Tensor:
    bound = float(np.sqrt(1.0 / fan_in))
    return Tensor(rng.uniform(-bound, bound, size=shape).astype(np.float32))


def init_conv1d(rng, c_out: int, c_in: int, kernel: int, stride: int = 1,
                padding: int = 0) -> Conv1dParams:
    return Conv1dParams(
        weights=_uniform_fan_in(rng, (c_out, c_in, kernel), c_in * kernel),
        bias=Tensor(np.zeros(c_out, dtype=np.float32)),
        stride=stride,
        padding=padding,
    )


def init_gated_skip(rng, c_out: int, c_in: int) -> GatedSkipParams:
    projection = None
    if c_in != c_out:
        projection = init_conv1d(rng, c_out, c_in, kernel=1)
    return GatedSkipParams(
        gate_logits=Tensor(np.zeros(c_out, dtype=np.float32)),
        projection=projection,
    )


def init_gru(rng, input_size: int, hidden: int) -> GruParams:
    def w():
        return _uniform_fan_in(rng, (hidden, input_size), input_size)

    def u():
        return _uniform_fan_in(rng, (hidden, hidden), hidden)

    def b():
        return Tensor(np.zeros(hidden, dtype=np.float32))

    return GruParams(W_z=w(), W_r=w(), W_h=w(), U_z=u(), U_r=u(), U_h=u(),
                     b_z=b(), b_r=b(), b_h=b())


def init_dense(rng, out_size: int, in_size: int) -> DenseParams:
    return DenseParams(
        weights=_uniform_fan_in(rng, (out_size, in_size), in_size),
        bias=Tensor(np.zeros(out_size, dtype=np.float32)),
    )

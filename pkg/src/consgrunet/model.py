"""Network assembly: config, whole-window forward/backward, counting, I/O.

The architecture is a stack of 1D conv blocks, each wrapped by a learnable
gated skip connection, feeding a GRU whose final hidden state goes through a
dense layer and a classification head. The default configuration keeps the
model under a million parameters (987,317 with GRU hidden size 447, about
3.95 MB serialized).

Weight files use the little-endian "CSGN" container: magic, version, a
key=value text header (config, seed, normalization stats), the parameter
tensors as named records in a fixed canonical order, and a trailing CRC32
over everything after the magic.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from . import layers
from .errors import ConfigError, DimensionError, FormatError, IntegrityError
from .layers import (
    Conv1dParams,
    DenseParams,
    GatedSkipParams,
    GruParams,
    GRU_PARAM_NAMES,
)
from .tensor import Tensor

MAGIC = b"CSGN"
VERSION = 1

# Fixed header keys, written in this order; anything else round-trips
# through ModelState.extras.
_HEADER_KEYS = (
    "input_channels",
    "window_len",
    "conv_blocks",
    "gru_hidden",
    "dense_hidden",
    "num_classes",
    "seed",
    "mu",
    "sigma",
)


@dataclass(frozen=True)
class ConvBlockConfig:
    out_channels: int
    kernel: int
    stride: int = 1
    padding: int = 0


DEFAULT_CONV_BLOCKS = (
    ConvBlockConfig(64, 5, 1, 2),
    ConvBlockConfig(128, 3, 1, 1),
    ConvBlockConfig(128, 3, 1, 1),
)

# GRU width chosen so the default model lands at 987,317 parameters.
DEFAULT_GRU_HIDDEN = 447


@dataclass(frozen=True)
class ModelConfig:
    input_channels: int = 10
    window_len: int = 20
    conv_blocks: tuple[ConvBlockConfig, ...] = DEFAULT_CONV_BLOCKS
    gru_hidden: int = DEFAULT_GRU_HIDDEN
    dense_hidden: int = 256
    num_classes: int = 53
    seed: int = 0

    def validate(self):
        if self.num_classes < 2:
            raise ConfigError(f"need at least 2 classes, got {self.num_classes}")
        if self.input_channels < 1 or self.window_len < 1:
            raise ConfigError("input_channels and window_len must be >= 1")
        if not self.conv_blocks:
            raise ConfigError("need at least one conv block")
        if self.gru_hidden < 1 or self.dense_hidden < 1:
            raise ConfigError("gru_hidden and dense_hidden must be >= 1")
        self.conv_output_len()

    def conv_output_len(self) -> int:
        """Sequence length after the conv stack; errors if any block collapses."""
        t = self.window_len
        for i, blk in enumerate(self.conv_blocks):
            if blk.kernel < 1 or blk.stride < 1 or blk.padding < 0:
                raise ConfigError(f"conv block {i} has invalid kernel/stride/padding")
            t_pad = t + 2 * blk.padding
            if t_pad < blk.kernel:
                raise ConfigError(
                    f"conv block {i}: padded length {t_pad} < kernel {blk.kernel}"
                )
            t = (t_pad - blk.kernel) // blk.stride + 1
            if t < 1:
                raise ConfigError(f"conv block {i} produces zero-length output")
        return t


@dataclass
class ModelState:
    config: ModelConfig
    blocks: list[tuple[Conv1dParams, GatedSkipParams]]
    gru: GruParams
    dense: DenseParams
    head: DenseParams
    mu: Tensor  # per-channel normalization mean
    sigma: Tensor  # per-channel normalization std, > 0
    extras: dict = field(default_factory=dict)  # workflow keys carried in the header

    def parameters(self) -> dict:
        """Name -> ndarray view of every trainable tensor, canonical order."""
        out = {}
        for i, (conv, skip) in enumerate(self.blocks):
            out[f"block{i}.conv.w"] = conv.weights.array
            out[f"block{i}.conv.b"] = conv.bias.array
            out[f"block{i}.skip.gamma"] = skip.gate_logits.array
            if skip.projection is not None:
                out[f"block{i}.skip.proj.w"] = skip.projection.weights.array
                out[f"block{i}.skip.proj.b"] = skip.projection.bias.array
        for name in GRU_PARAM_NAMES:
            out[f"gru.{name}"] = getattr(self.gru, name).array
        out["dense.w"] = self.dense.weights.array
        out["dense.b"] = self.dense.bias.array
        out["head.w"] = self.head.weights.array
        out["head.b"] = self.head.bias.array
        return out

    def clone(self) -> "ModelState":
        blocks = []
        for conv, skip in self.blocks:
            conv2 = Conv1dParams(conv.weights.copy(), conv.bias.copy(),
                                 conv.stride, conv.padding)
            proj = skip.projection
            proj2 = None
            if proj is not None:
                proj2 = Conv1dParams(proj.weights.copy(), proj.bias.copy(),
                                     proj.stride, proj.padding)
            blocks.append((conv2, GatedSkipParams(skip.gate_logits.copy(), proj2)))
        gru2 = GruParams(**{n: getattr(self.gru, n).copy() for n in GRU_PARAM_NAMES})
        return ModelState(
            config=self.config,
            blocks=blocks,
            gru=gru2,
            dense=DenseParams(self.dense.weights.copy(), self.dense.bias.copy()),
            head=DenseParams(self.head.weights.copy(), self.head.bias.copy()),
            mu=self.mu.copy(),
            sigma=self.sigma.copy(),
            extras=dict(self.extras),
        )

    def set_normalization(self, mu, sigma):
        mu = Tensor(mu)
        sigma = Tensor(sigma)
        c = self.config.input_channels
        if mu.shape != (c,) or sigma.shape != (c,):
            raise DimensionError(f"normalization stats must have {c} entries")
        if not np.all(sigma.array > 0):
            raise ConfigError("sigma must be strictly positive")
        self.mu = mu
        self.sigma = sigma


def build_model(config: ModelConfig) -> ModelState:
    """Allocate and seed-initialize every parameter of the network."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    blocks = []
    c_in = config.input_channels
    for blk in config.conv_blocks:
        conv = layers.init_conv1d(rng, blk.out_channels, c_in, blk.kernel,
                                  blk.stride, blk.padding)
        skip = layers.init_gated_skip(rng, blk.out_channels, c_in)
        blocks.append((conv, skip))
        c_in = blk.out_channels
    gru = layers.init_gru(rng, input_size=c_in, hidden=config.gru_hidden)
    dense = layers.init_dense(rng, config.dense_hidden, config.gru_hidden)
    head = layers.init_dense(rng, config.num_classes, config.dense_hidden)
    return ModelState(
        config=config,
        blocks=blocks,
        gru=gru,
        dense=dense,
        head=head,
        mu=Tensor(np.zeros(config.input_channels, dtype=np.float32)),
        sigma=Tensor(np.ones(config.input_channels, dtype=np.float32)),
    )


# ---------------------------------------------------------------------------
# forward / backward over one window (array-level core, dtype generic)
# ---------------------------------------------------------------------------

def forward_window_arrays(config: ModelConfig, params: dict, mu, sigma, window):
    """Window [C, L] -> (logits [num_classes], cache); normalizes first."""
    if window.ndim != 2 or window.shape != (config.input_channels, config.window_len):
        raise DimensionError(
            f"window shape {list(window.shape)} != "
            f"[{config.input_channels}, {config.window_len}]"
        )
    x = (window - mu[:, None]) / sigma[:, None]
    return forward_normalized_arrays(config, params, x)


def forward_normalized_arrays(config: ModelConfig, params: dict, x):
    """Network body on an already-normalized [C, L] input."""
    if x.ndim != 2 or x.shape != (config.input_channels, config.window_len):
        raise DimensionError(
            f"window shape {list(x.shape)} != "
            f"[{config.input_channels}, {config.window_len}]"
        )
    block_caches = []
    for i, blk in enumerate(config.conv_blocks):
        pre, conv_cache = layers.conv1d_forward_arrays(
            params[f"block{i}.conv.w"], params[f"block{i}.conv.b"],
            x, blk.stride, blk.padding,
        )
        act, relu_mask = layers.relu_forward_arrays(pre)
        proj_w = params.get(f"block{i}.skip.proj.w")
        proj_b = params.get(f"block{i}.skip.proj.b")
        y, skip_cache = layers.gated_skip_forward_arrays(
            params[f"block{i}.skip.gamma"], proj_w, proj_b, act, x,
        )
        block_caches.append((conv_cache, relu_mask, skip_cache))
        x = y
    feats = np.ascontiguousarray(x.T)  # [T', C'] time-major for the GRU
    gru_params = {n: params[f"gru.{n}"] for n in GRU_PARAM_NAMES}
    h0 = np.zeros(config.gru_hidden, dtype=feats.dtype)
    h_seq, gru_cache = layers.gru_forward_arrays(gru_params, feats, h0)
    hidden, dense_cache = layers.dense_forward_arrays(
        params["dense.w"], params["dense.b"], h_seq[-1],
    )
    hidden_act, dense_mask = layers.relu_forward_arrays(hidden)
    logits, head_cache = layers.dense_forward_arrays(
        params["head.w"], params["head.b"], hidden_act,
    )
    cache = (config, block_caches, gru_cache, h_seq.shape,
             dense_cache, dense_mask, head_cache)
    return logits, cache


def backward_window_arrays(cache, grad_logits):
    """Exact parameter gradients for one window. Returns name -> ndarray."""
    (config, block_caches, gru_cache, h_seq_shape,
     dense_cache, dense_mask, head_cache) = cache
    grads = {}
    g_hidden_act, grads["head.w"], grads["head.b"] = layers.dense_backward_arrays(
        head_cache, grad_logits,
    )
    g_hidden = layers.relu_backward_arrays(dense_mask, g_hidden_act)
    g_hlast, grads["dense.w"], grads["dense.b"] = layers.dense_backward_arrays(
        dense_cache, g_hidden,
    )
    grad_h_seq = np.zeros(h_seq_shape, dtype=grad_logits.dtype)
    grad_h_seq[-1] = g_hlast
    g_feats, gru_grads, _ = layers.gru_backward_arrays(gru_cache, grad_h_seq)
    for name, value in gru_grads.items():
        grads[f"gru.{name}"] = value
    gx = np.ascontiguousarray(g_feats.T)
    for i in range(len(config.conv_blocks) - 1, -1, -1):
        conv_cache, relu_mask, skip_cache = block_caches[i]
        g_main, g_skip_in, g_gamma, gpw, gpb = layers.gated_skip_backward_arrays(
            skip_cache, gx,
        )
        grads[f"block{i}.skip.gamma"] = g_gamma
        if gpw is not None:
            grads[f"block{i}.skip.proj.w"] = gpw
            grads[f"block{i}.skip.proj.b"] = gpb
        g_pre = layers.relu_backward_arrays(relu_mask, g_main)
        g_x, gw, gb = layers.conv1d_backward_arrays(conv_cache, g_pre)
        grads[f"block{i}.conv.w"] = gw
        grads[f"block{i}.conv.b"] = gb
        gx = g_x + g_skip_in
    return grads


def forward_window(m: ModelState, window: Tensor):
    logits, cache = forward_window_arrays(
        m.config, m.parameters(), m.mu.array, m.sigma.array, window.array,
    )
    return Tensor(logits), cache


def backward_window(cache, grad_logits: Tensor) -> dict:
    grads = backward_window_arrays(cache, grad_logits.array)
    return grads


# ---------------------------------------------------------------------------
# parameter accounting
# ---------------------------------------------------------------------------

def count_params(m: ModelState):
    """(total, per-component breakdown) of trainable parameter counts."""
    breakdown = {}
    cfg = m.config
    c_in = cfg.input_channels
    for i, blk in enumerate(cfg.conv_blocks):
        breakdown[f"block{i}.conv"] = blk.out_channels * c_in * blk.kernel + blk.out_channels
        skip = blk.out_channels
        if c_in != blk.out_channels:
            skip += blk.out_channels * c_in + blk.out_channels
        breakdown[f"block{i}.skip"] = skip
        c_in = blk.out_channels
    h, i_sz = cfg.gru_hidden, c_in
    breakdown["gru"] = 3 * (h * i_sz + h * h + h)
    breakdown["dense"] = cfg.dense_hidden * h + cfg.dense_hidden
    breakdown["head"] = cfg.num_classes * cfg.dense_hidden + cfg.num_classes
    total = sum(breakdown.values())
    return total, breakdown


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _format_f32(value) -> str:
    # repr of the exact double for this float32 value; parses back bit-exactly
    return repr(float(np.float32(value)))


def _header_text(m: ModelState) -> str:
    cfg = m.config
    blocks = ",".join(
        f"{b.out_channels}:{b.kernel}:{b.stride}:{b.padding}" for b in cfg.conv_blocks
    )
    lines = [
        f"input_channels={cfg.input_channels}",
        f"window_len={cfg.window_len}",
        f"conv_blocks={blocks}",
        f"gru_hidden={cfg.gru_hidden}",
        f"dense_hidden={cfg.dense_hidden}",
        f"num_classes={cfg.num_classes}",
        f"seed={cfg.seed}",
        "mu=" + ",".join(_format_f32(v) for v in m.mu.array),
        "sigma=" + ",".join(_format_f32(v) for v in m.sigma.array),
    ]
    for key in sorted(m.extras):
        value = str(m.extras[key])
        if key in _HEADER_KEYS or "=" in key or "\n" in key or "\n" in value:
            raise ConfigError(f"invalid extra header entry {key!r}")
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


def _parse_header(text: str) -> tuple[ModelConfig, np.ndarray, np.ndarray, dict]:
    fields = {}
    for line in text.splitlines():
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"malformed header line {line!r}")
        key, _, value = line.partition("=")
        fields[key] = value
    try:
        blocks = tuple(
            ConvBlockConfig(*(int(p) for p in item.split(":")))
            for item in fields["conv_blocks"].split(",")
        )
        cfg = ModelConfig(
            input_channels=int(fields["input_channels"]),
            window_len=int(fields["window_len"]),
            conv_blocks=blocks,
            gru_hidden=int(fields["gru_hidden"]),
            dense_hidden=int(fields["dense_hidden"]),
            num_classes=int(fields["num_classes"]),
            seed=int(fields["seed"]),
        )
        mu = np.array([np.float32(float(v)) for v in fields["mu"].split(",")],
                      dtype=np.float32)
        sigma = np.array([np.float32(float(v)) for v in fields["sigma"].split(",")],
                         dtype=np.float32)
    except (KeyError, ValueError, TypeError) as exc:
        raise FormatError(f"bad model header: {exc}") from exc
    extras = {k: v for k, v in fields.items() if k not in _HEADER_KEYS}
    return cfg, mu, sigma, extras


def save_model(m: ModelState, path):
    header = _header_text(m).encode("utf-8")
    chunks = [struct.pack("<HI", VERSION, len(header)), header]
    for name, arr in m.parameters().items():
        name_b = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(name_b)))
        chunks.append(name_b)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    body = b"".join(chunks)
    crc = zlib.crc32(body) & 0xFFFFFFFF
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(body)
        fh.write(struct.pack("<I", crc))


def load_model(path) -> ModelState:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4 or data[:4] != MAGIC:
        raise FormatError("not a CSGN model file (bad magic)", offset=0)
    if len(data) < 14:
        raise IntegrityError("model file truncated", offset=len(data))
    (version,) = struct.unpack_from("<H", data, 4)
    if version != VERSION:
        raise FormatError(
            f"unsupported model version {version} (reader supports {VERSION})",
            offset=4,
        )
    stored_crc = struct.unpack_from("<I", data, len(data) - 4)[0]
    actual_crc = zlib.crc32(data[4 : len(data) - 4]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise IntegrityError(
            f"CRC mismatch: stored {stored_crc:#010x}, computed {actual_crc:#010x}",
            offset=len(data) - 4,
        )
    (header_len,) = struct.unpack_from("<I", data, 6)
    pos = 10
    end = len(data) - 4
    if pos + header_len > end:
        raise IntegrityError("model file truncated inside header", offset=pos)
    try:
        header = data[pos : pos + header_len].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"header is not valid UTF-8: {exc}", offset=pos) from exc
    pos += header_len
    cfg, mu, sigma, extras = _parse_header(header)

    tensors = {}
    order = []
    while pos < end:
        if pos + 2 > end:
            raise IntegrityError("model file truncated in record header", offset=pos)
        (name_len,) = struct.unpack_from("<H", data, pos)
        pos += 2
        if pos + name_len + 1 > end:
            raise IntegrityError("model file truncated in record name", offset=pos)
        name = data[pos : pos + name_len].decode("utf-8")
        pos += name_len
        rank = data[pos]
        pos += 1
        if pos + 4 * rank > end:
            raise IntegrityError("model file truncated in record extents", offset=pos)
        extents = struct.unpack_from(f"<{rank}I", data, pos)
        pos += 4 * rank
        count = int(np.prod(extents, dtype=np.int64)) if rank else 0
        if rank < 1 or count < 1:
            raise FormatError(f"record {name!r} has invalid shape {extents}", offset=pos)
        if pos + 4 * count > end:
            raise IntegrityError("model file truncated in record payload", offset=pos)
        payload = np.frombuffer(data, dtype="<f4", count=count, offset=pos)
        pos += 4 * count
        tensors[name] = payload.reshape(extents).astype(np.float32)
        order.append(name)

    state = build_model(cfg)
    state.extras = extras
    state.set_normalization(mu, sigma)
    expected = list(state.parameters().keys())
    if order != expected:
        raise FormatError(
            f"record names/order mismatch: got {order[:3]}..., expected {expected[:3]}...",
            offset=10 + header_len,
        )
    params = state.parameters()
    for name, arr in tensors.items():
        if params[name].shape != arr.shape:
            raise FormatError(
                f"record {name!r} shape {arr.shape} != configured {params[name].shape}"
            )
        params[name][...] = arr
    return state


def model_file_size(m: ModelState) -> int:
    """Exact on-disk byte size the model serializes to."""
    header = _header_text(m).encode("utf-8")
    size = 4 + 2 + 4 + len(header) + 4  # magic, version, header_len, header, crc
    for name, arr in m.parameters().items():
        size += 2 + len(name.encode("utf-8")) + 1 + 4 * arr.ndim + 4 * arr.size
    return size


def default_config(**overrides) -> ModelConfig:
    return replace(ModelConfig(), **overrides)

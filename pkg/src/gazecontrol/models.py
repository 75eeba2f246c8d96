"""Sequence classifiers over gaze feature windows: a 2-layer LSTM stack and a
2-block transformer encoder, both built on the numcore tape.

Parameter counts are load-bearing: closed-form formulas and the built models
must agree, and the reference configurations reproduce the published totals
(57,157 / 54,467 for the LSTM; 130,433 / 81,989 for the transformer).
"""
from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, asdict

import numpy as np

from . import numcore as nc
from .numcore import Tensor, ParamSet

CHECKPOINT_MAGIC = b"GZF1"
CHECKPOINT_VERSION = 1


class InvalidConfig(ValueError):
    pass


class CorruptFile(ValueError):
    pass


class VersionMismatch(ValueError):
    pass


class ArchMismatch(ValueError):
    pass


@dataclass
class LstmConfig:
    m: int            # window length (frames)
    L: int            # features per frame
    C: int            # label count
    units: int = 64
    layers: int = 2

    def validate(self):
        if min(self.m, self.L, self.C, self.units, self.layers) < 1:
            raise InvalidConfig(f"all LstmConfig fields must be >= 1: {self}")


@dataclass
class TransformerConfig:
    m: int
    L: int
    C: int
    blocks: int = 2
    heads: int = 2
    ffn_hidden: int = 1024
    # the post-encoder residual uses the position-encoded input by default;
    # set False to add the raw input instead
    residual_encoded_input: bool = True

    @property
    def head_size(self) -> int:
        # each attention head is as wide as the feature vector
        return self.L

    def validate(self):
        if min(self.m, self.L, self.C, self.blocks, self.heads, self.ffn_hidden) < 1:
            raise InvalidConfig(f"all TransformerConfig fields must be >= 1: {self}")


def lstm_param_count(config: LstmConfig) -> int:
    """sum over layers of 4*(U*(I+U)+U), plus the U*C+C softmax head."""
    u = config.units
    total = 0
    inp = config.L
    for _ in range(config.layers):
        total += 4 * (u * (inp + u) + u)
        inp = u
    total += u * config.C + config.C
    return total


def transformer_param_count(config: TransformerConfig) -> int:
    L, h = config.L, config.heads
    d = h * config.head_size  # q/k/v width across heads
    per_block = (
        3 * (L * d + d)        # q, k, v projections
        + (d * L + L)          # output projection back to L
        + 2 * (2 * L)          # two layer norms (scale + shift)
        + (L * config.ffn_hidden + config.ffn_hidden)
        + (config.ffn_hidden * L + L)
    )
    return config.m * L + config.blocks * per_block + (L * config.C + config.C)


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class SequenceModel:
    """Common surface for both architectures."""

    arch: str

    def __init__(self, config, params: ParamSet, dtype):
        self.config = config
        self.params = params
        self.dtype = dtype

    def forward(self, x: np.ndarray) -> Tensor:
        raise NotImplementedError

    def param_count(self) -> int:
        return self.params.n_params()

    def _check_batch(self, x: np.ndarray):
        if x.ndim != 3 or x.shape[1] != self.config.m or x.shape[2] != self.config.L:
            raise nc.ShapeMismatch(
                f"batch shape {x.shape} does not match (n, {self.config.m}, {self.config.L})")

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        """Inference without tape recording; rows are probability vectors."""
        with nc.no_grad():
            return self.forward(np.asarray(x, dtype=self.dtype)).data

    def predict(self, x: np.ndarray) -> np.ndarray:
        probs = self.predict_proba(x)
        return probs.argmax(axis=1)


class LstmClassifier(SequenceModel):
    """Two stacked LSTM layers; the final step's hidden state feeds a softmax head."""

    arch = "lstm"

    def forward(self, x: np.ndarray) -> Tensor:
        self._check_batch(x)
        cfg = self.config
        p = self.params
        n, m, _ = x.shape
        # time-major flat input so each step's rows are one contiguous block
        X = nc.tensor(np.ascontiguousarray(
            x.transpose(1, 0, 2).reshape(m * n, cfg.L), dtype=self.dtype))
        u = cfg.units
        seq: Tensor | None = None  # (m*n, width), blocks ordered by time step
        last_h: Tensor | None = None
        for layer in range(cfg.layers):
            Wx = p[f"lstm{layer}.Wx"]
            Wh = p[f"lstm{layer}.Wh"]
            b = p[f"lstm{layer}.b"]
            # input contribution for every step in one matmul
            zx = nc.add(nc.matmul(X if seq is None else seq, Wx), b)
            h = nc.tensor(np.zeros((n, u), dtype=self.dtype))
            c = nc.tensor(np.zeros((n, u), dtype=self.dtype))
            outs = []
            for t in range(m):
                z = nc.add(nc.slice_axis(zx, 0, t * n, n), nc.matmul(h, Wh))
                h, c = nc.lstm_cell(z, c)
                outs.append(h)
            if layer + 1 < cfg.layers:
                seq = nc.concat(outs, axis=0)
            last_h = outs[-1]
        logits = nc.add(nc.matmul(last_h, p["head.W"]), p["head.b"])
        return nc.softmax(logits, axis=-1)


class TransformerClassifier(SequenceModel):
    """Encoder blocks with learned positional embedding, residual merge with the
    inputs, global max pooling over time, and a softmax head."""

    arch = "transformer"

    def forward(self, x: np.ndarray, collect_attention: list | None = None) -> Tensor:
        self._check_batch(x)
        cfg = self.config
        p = self.params
        n, m, L = x.shape
        d = cfg.heads * cfg.head_size
        X = nc.tensor(np.ascontiguousarray(x, dtype=self.dtype))
        encoded = nc.add(X, p["pos"])
        h = encoded
        inv_sqrt = 1.0 / np.sqrt(cfg.head_size)

        # dense layers run on (n*m, width) so BLAS sees one large matmul
        def dense(t, W, b, width):
            flat = nc.reshape(t, (n * m, width))
            return nc.add(nc.matmul(flat, W), b)

        for blk in range(cfg.blocks):
            pre = f"block{blk}."
            q = dense(h, p[pre + "attn.Wq"], p[pre + "attn.bq"], L)
            k = dense(h, p[pre + "attn.Wk"], p[pre + "attn.bk"], L)
            v = dense(h, p[pre + "attn.Wv"], p[pre + "attn.bv"], L)
            # (n*m, d) -> (n, heads, m, head_size)
            def heads(t):
                return nc.transpose(nc.reshape(t, (n, m, cfg.heads, cfg.head_size)), (0, 2, 1, 3))
            qh, kh, vh = heads(q), heads(k), heads(v)
            scores = nc.scale(nc.matmul(qh, nc.transpose(kh, (0, 1, 3, 2))), inv_sqrt)
            attn = nc.softmax(scores, axis=-1)
            if collect_attention is not None:
                collect_attention.append(attn.data.copy())
            ctx = nc.matmul(attn, vh)
            merged = nc.reshape(nc.transpose(ctx, (0, 2, 1, 3)), (n * m, d))
            out = nc.reshape(nc.add(nc.matmul(merged, p[pre + "attn.Wo"]), p[pre + "attn.bo"]),
                             (n, m, L))
            h = nc.layer_norm(nc.add(h, out), p[pre + "norm1.g"], p[pre + "norm1.b"])
            f1 = nc.swish(dense(h, p[pre + "ffn.W1"], p[pre + "ffn.b1"], L))
            f = nc.reshape(nc.add(nc.matmul(f1, p[pre + "ffn.W2"]), p[pre + "ffn.b2"]),
                           (n, m, L))
            h = nc.layer_norm(nc.add(h, f), p[pre + "norm2.g"], p[pre + "norm2.b"])
        h = nc.add(h, encoded if cfg.residual_encoded_input else X)
        pooled = nc.global_max(h, axis=1)
        logits = nc.add(nc.matmul(pooled, p["head.W"]), p["head.b"])
        return nc.softmax(logits, axis=-1)

    def attention_maps(self, x: np.ndarray) -> list[np.ndarray]:
        """Per-block attention weights, shape (n, heads, m, m)."""
        maps: list[np.ndarray] = []
        with nc.no_grad():
            self.forward(np.asarray(x, dtype=self.dtype), collect_attention=maps)
        return maps


def build_lstm(config: LstmConfig, seed: int = 0, dtype=np.float32) -> LstmClassifier:
    config.validate()
    rng = np.random.default_rng(seed)
    p = ParamSet()
    u = config.units
    inp = config.L
    for layer in range(config.layers):
        p.add(f"lstm{layer}.Wx", _glorot(rng, inp + u, 4 * u, (inp, 4 * u), dtype))
        p.add(f"lstm{layer}.Wh", _glorot(rng, inp + u, 4 * u, (u, 4 * u), dtype))
        b = np.zeros(4 * u, dtype=dtype)
        b[u:2 * u] = 1.0  # forget-gate bias starts open
        p.add(f"lstm{layer}.b", b)
        inp = u
    p.add("head.W", _glorot(rng, u, config.C, (u, config.C), dtype))
    p.add("head.b", np.zeros(config.C, dtype=dtype))
    model = LstmClassifier(config, p, dtype)
    assert model.param_count() == lstm_param_count(config)
    return model


def build_transformer(config: TransformerConfig, seed: int = 0, dtype=np.float32) -> TransformerClassifier:
    config.validate()
    rng = np.random.default_rng(seed)
    p = ParamSet()
    L = config.L
    d = config.heads * config.head_size
    p.add("pos", _glorot(rng, config.m, L, (config.m, L), dtype))
    for blk in range(config.blocks):
        pre = f"block{blk}."
        for name in ("Wq", "Wk", "Wv"):
            p.add(pre + f"attn.{name}", _glorot(rng, L, d, (L, d), dtype))
            p.add(pre + f"attn.b{name[-1].lower()}", np.zeros(d, dtype=dtype))
        p.add(pre + "attn.Wo", _glorot(rng, d, L, (d, L), dtype))
        p.add(pre + "attn.bo", np.zeros(L, dtype=dtype))
        p.add(pre + "norm1.g", np.ones(L, dtype=dtype))
        p.add(pre + "norm1.b", np.zeros(L, dtype=dtype))
        p.add(pre + "ffn.W1", _glorot(rng, L, config.ffn_hidden, (L, config.ffn_hidden), dtype))
        p.add(pre + "ffn.b1", np.zeros(config.ffn_hidden, dtype=dtype))
        p.add(pre + "ffn.W2", _glorot(rng, config.ffn_hidden, L, (config.ffn_hidden, L), dtype))
        p.add(pre + "ffn.b2", np.zeros(L, dtype=dtype))
        p.add(pre + "norm2.g", np.ones(L, dtype=dtype))
        p.add(pre + "norm2.b", np.zeros(L, dtype=dtype))
    p.add("head.W", _glorot(rng, L, config.C, (L, config.C), dtype))
    p.add("head.b", np.zeros(config.C, dtype=dtype))
    model = TransformerClassifier(config, p, dtype)
    assert model.param_count() == transformer_param_count(config)
    return model


_ARCHES = {"lstm": (LstmConfig, build_lstm), "transformer": (TransformerConfig, build_transformer)}


def save_checkpoint(model: SequenceModel, path):
    """Binary layout: magic, length-prefixed JSON header, raw little-endian
    tensor payloads in header order, CRC32 of everything before it."""
    tensors = []
    payload = bytearray()
    for name in model.params.names():
        arr = model.params[name].data
        tensors.append({"name": name, "shape": list(arr.shape), "dtype": str(arr.dtype)})
        payload += np.ascontiguousarray(arr).astype(arr.dtype.newbyteorder("<")).tobytes()
    header = {
        "version": CHECKPOINT_VERSION,
        "arch": model.arch,
        "config": asdict(model.config),
        "dtype": str(np.dtype(model.dtype)),
        "tensors": tensors,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode()
    blob = CHECKPOINT_MAGIC + struct.pack("<I", len(header_bytes)) + header_bytes + bytes(payload)
    crc = zlib.crc32(blob) & 0xFFFFFFFF
    with open(path, "wb") as fh:
        fh.write(blob + struct.pack("<I", crc))


def load_checkpoint(path, arch: str | None = None) -> SequenceModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[:4] != CHECKPOINT_MAGIC:
        raise CorruptFile(f"{path}: not a checkpoint file")
    stored_crc = struct.unpack("<I", blob[-4:])[0]
    if zlib.crc32(blob[:-4]) & 0xFFFFFFFF != stored_crc:
        raise CorruptFile(f"{path}: checksum mismatch")
    header_len = struct.unpack("<I", blob[4:8])[0]
    try:
        header = json.loads(blob[8:8 + header_len])
    except (ValueError, UnicodeDecodeError) as exc:
        raise CorruptFile(f"{path}: unreadable header") from exc
    if header.get("version") != CHECKPOINT_VERSION:
        raise VersionMismatch(f"{path}: version {header.get('version')} != {CHECKPOINT_VERSION}")
    if header["arch"] not in _ARCHES:
        raise ArchMismatch(f"{path}: unknown architecture {header['arch']!r}")
    if arch is not None and header["arch"] != arch:
        raise ArchMismatch(f"{path}: contains {header['arch']!r}, expected {arch!r}")
    config_cls, builder = _ARCHES[header["arch"]]
    model = builder(config_cls(**header["config"]), seed=0, dtype=np.dtype(header["dtype"]))
    offset = 8 + header_len
    arrays = {}
    for spec in header["tensors"]:
        dt = np.dtype(spec["dtype"]).newbyteorder("<")
        count = int(np.prod(spec["shape"])) if spec["shape"] else 1
        nbytes = count * dt.itemsize
        raw = blob[offset:offset + nbytes]
        if len(raw) != nbytes:
            raise CorruptFile(f"{path}: truncated tensor payload for {spec['name']!r}")
        arrays[spec["name"]] = np.frombuffer(raw, dtype=dt).reshape(spec["shape"]).astype(spec["dtype"])
        offset += nbytes
    model.params.load_arrays(arrays)
    return model

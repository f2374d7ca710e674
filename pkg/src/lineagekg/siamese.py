"""Multi-path Siamese sequence model, implemented from scratch on numpy.

Each of the three edge-token paths runs through shared embeddings and stacked
bidirectional LSTM layers; per-path global max pooling feeds a dense fusion
layer, and the score is the sigmoid of the cosine similarity between the fused
path representation and the target relation embedding.  Arithmetic is 64-bit;
gradients are analytic and checked against finite differences in the tests.

PAD positions carry hidden and cell state through unchanged and are masked out
of pooling, so appending extra padding never changes a score.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .paths import PAD, PathSample

CHECKPOINT_MAGIC = b"LKGCKPT/1\n"

_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8


class ModelError(Exception):
    pass


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    num_relations: int
    embed_dim: int = 32
    hidden_dim: int = 32
    layers: int = 2
    fusion_dim: int = 64
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 3
    seed: int = 0

    def __post_init__(self):
        for name in ("vocab_size", "num_relations", "embed_dim", "hidden_dim",
                     "layers", "fusion_dim", "batch_size", "epochs"):
            if getattr(self, name) < 1:
                raise ModelError(f"{name} must be >= 1")


class Parameters:
    """All trainable tensors, keyed by name in a fixed declared order."""

    def __init__(self, cfg: ModelConfig, arrays: dict[str, np.ndarray]):
        self.cfg = cfg
        self.arrays = arrays

    @staticmethod
    def tensor_names(cfg: ModelConfig) -> list[str]:
        names = ["token_emb", "rel_emb"]
        for layer in range(cfg.layers):
            for direction in ("f", "b"):
                prefix = f"lstm{layer}{direction}"
                names += [f"{prefix}_W", f"{prefix}_U", f"{prefix}_b"]
        names += ["fusion_W", "fusion_b"]
        return names

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {name: np.zeros_like(a) for name, a in self.arrays.items()}

    def all_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in self.arrays.values())

    def copy(self) -> "Parameters":
        return Parameters(self.cfg, {k: a.copy() for k, a in self.arrays.items()})


def init_parameters(cfg: ModelConfig) -> Parameters:
    """Embeddings ~ N(0, 0.1); recurrent and fusion weights uniform in
    +-1/sqrt(hidden); biases zero except the forget gate at 1.0."""
    rng = np.random.default_rng(cfg.seed)
    h = cfg.hidden_dim
    bound = 1.0 / math.sqrt(h)
    arrays: dict[str, np.ndarray] = {
        "token_emb": rng.normal(0.0, 0.1, (cfg.vocab_size, cfg.embed_dim)),
        "rel_emb": rng.normal(0.0, 0.1, (cfg.num_relations, cfg.fusion_dim)),
    }
    for layer in range(cfg.layers):
        in_dim = cfg.embed_dim if layer == 0 else 2 * h
        for direction in ("f", "b"):
            prefix = f"lstm{layer}{direction}"
            arrays[f"{prefix}_W"] = rng.uniform(-bound, bound, (4 * h, in_dim))
            arrays[f"{prefix}_U"] = rng.uniform(-bound, bound, (4 * h, h))
            bias = np.zeros(4 * h)
            bias[h:2 * h] = 1.0  # forget gate
            arrays[f"{prefix}_b"] = bias
    arrays["fusion_W"] = rng.uniform(-bound, bound, (3 * 2 * h, cfg.fusion_dim))
    arrays["fusion_b"] = np.zeros(cfg.fusion_dim)
    return Parameters(cfg, arrays)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


@dataclass
class _DirectionTrace:
    order: list[int]
    x_t: list[np.ndarray]
    h_prev: list[np.ndarray]
    c_prev: list[np.ndarray]
    gates: list[tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]]
    c_new: list[np.ndarray]
    tanh_c: list[np.ndarray]
    masks: list[np.ndarray]
    outputs: np.ndarray  # (P, T, h), aligned to absolute positions


class ForwardCache:
    """Everything required to reproduce the analytic gradients."""

    def __init__(self):
        self.tokens: np.ndarray = None
        self.mask: np.ndarray = None
        self.layer_inputs: list[np.ndarray] = []
        self.traces: list[tuple[_DirectionTrace, _DirectionTrace]] = []
        self.top: np.ndarray = None
        self.pool_argmax: np.ndarray = None
        self.pool_valid: np.ndarray = None
        self.x_cat: np.ndarray = None
        self.p: np.ndarray = None
        self.p_norm: float = 0.0
        self.relation: int = -1
        self.r_vec: np.ndarray = None
        self.r_norm: float = 0.0
        self.z: float = 0.0
        self.prob: float = 0.0


def _run_direction(params: Parameters, layer: int, direction: str,
                   inputs: np.ndarray, mask: np.ndarray) -> _DirectionTrace:
    h_dim = params.cfg.hidden_dim
    P, T, _ = inputs.shape
    W = params.arrays[f"lstm{layer}{direction}_W"]
    U = params.arrays[f"lstm{layer}{direction}_U"]
    b = params.arrays[f"lstm{layer}{direction}_b"]
    order = list(range(T)) if direction == "f" else list(range(T - 1, -1, -1))
    h = np.zeros((P, h_dim))
    c = np.zeros((P, h_dim))
    trace = _DirectionTrace(order, [], [], [], [], [], [], [],
                            np.zeros((P, T, h_dim)))
    for t in order:
        x_t = inputs[:, t]
        m = mask[:, t:t + 1]
        z = x_t @ W.T + h @ U.T + b
        i = _sigmoid(z[:, :h_dim])
        f = _sigmoid(z[:, h_dim:2 * h_dim])
        gg = np.tanh(z[:, 2 * h_dim:3 * h_dim])
        o = _sigmoid(z[:, 3 * h_dim:])
        c_new = f * c + i * gg
        tanh_c = np.tanh(c_new)
        h_new = o * tanh_c
        trace.x_t.append(x_t)
        trace.h_prev.append(h)
        trace.c_prev.append(c)
        trace.gates.append((i, f, gg, o))
        trace.c_new.append(c_new)
        trace.tanh_c.append(tanh_c)
        trace.masks.append(m)
        h = m * h_new + (1.0 - m) * h
        c = m * c_new + (1.0 - m) * c
        trace.outputs[:, t] = h
    return trace


def forward(params: Parameters, sample: PathSample) -> tuple[float, ForwardCache]:
    """Score one (paths, relation) pair; returns probability in (0, 1)."""
    cfg = params.cfg
    if not 0 <= sample.relation < cfg.num_relations:
        raise ModelError(f"relation id out of range: {sample.relation}")
    T = max(len(p) for p in sample.paths)
    tokens = np.full((len(sample.paths), T), PAD, dtype=np.int64)
    for idx, path in enumerate(sample.paths):
        tokens[idx, :len(path)] = path
    if tokens.max(initial=0) >= cfg.vocab_size or tokens.min(initial=0) < 0:
        raise ModelError("token id out of range")

    cache = ForwardCache()
    cache.tokens = tokens
    cache.mask = (tokens != PAD).astype(np.float64)
    cache.relation = sample.relation

    current = params.arrays["token_emb"][tokens]
    for layer in range(cfg.layers):
        cache.layer_inputs.append(current)
        trace_f = _run_direction(params, layer, "f", current, cache.mask)
        trace_b = _run_direction(params, layer, "b", current, cache.mask)
        cache.traces.append((trace_f, trace_b))
        current = np.concatenate([trace_f.outputs, trace_b.outputs], axis=2)
    cache.top = current

    P, T, F = current.shape
    neg_inf = np.where(cache.mask[:, :, None] > 0, current, -np.inf)
    cache.pool_valid = cache.mask.any(axis=1)
    pooled = np.zeros((P, F))
    argmax = np.zeros((P, F), dtype=np.int64)
    for p_idx in range(P):
        if cache.pool_valid[p_idx]:
            argmax[p_idx] = np.argmax(neg_inf[p_idx], axis=0)
            pooled[p_idx] = current[p_idx, argmax[p_idx], np.arange(F)]
    cache.pool_argmax = argmax

    cache.x_cat = pooled.reshape(-1)
    u = cache.x_cat @ params.arrays["fusion_W"] + params.arrays["fusion_b"]
    cache.p = np.tanh(u)
    cache.p_norm = float(np.linalg.norm(cache.p))
    cache.r_vec = params.arrays["rel_emb"][sample.relation]
    cache.r_norm = float(np.linalg.norm(cache.r_vec))
    if cache.p_norm == 0.0 or cache.r_norm == 0.0:
        cache.z = 0.0
    else:
        cache.z = float(
            (cache.p / cache.p_norm) @ (cache.r_vec / cache.r_norm)
        )
    cache.prob = float(_sigmoid(np.array(cache.z)))
    return cache.prob, cache


def bce_loss(prob: float, label: int) -> float:
    eps = 1e-12
    p = min(max(prob, eps), 1.0 - eps)
    return -(label * math.log(p) + (1 - label) * math.log(1.0 - p))


def _backward_direction(params: Parameters, layer: int, direction: str,
                        trace: _DirectionTrace, d_outputs: np.ndarray,
                        grads: dict[str, np.ndarray]) -> np.ndarray:
    h_dim = params.cfg.hidden_dim
    W = params.arrays[f"lstm{layer}{direction}_W"]
    U = params.arrays[f"lstm{layer}{direction}_U"]
    P, T, _ = d_outputs.shape
    in_dim = trace.x_t[0].shape[1]
    d_inputs = np.zeros((P, T, in_dim))
    dW = grads[f"lstm{layer}{direction}_W"]
    dU = grads[f"lstm{layer}{direction}_U"]
    db = grads[f"lstm{layer}{direction}_b"]
    dh_next = np.zeros((P, h_dim))
    dc_next = np.zeros((P, h_dim))
    for step in range(len(trace.order) - 1, -1, -1):
        t = trace.order[step]
        m = trace.masks[step]
        i, f, gg, o = trace.gates[step]
        dh_total = d_outputs[:, t] + dh_next
        dc_total = dc_next
        dh_new = m * dh_total
        dh_prev_carry = (1.0 - m) * dh_total
        dc_from_out = m * dc_total
        dc_prev_carry = (1.0 - m) * dc_total
        do = dh_new * trace.tanh_c[step]
        dc_new = dc_from_out + dh_new * o * (1.0 - trace.tanh_c[step] ** 2)
        df = dc_new * trace.c_prev[step]
        di = dc_new * gg
        dgg = dc_new * i
        dc_prev = dc_new * f + dc_prev_carry
        dz = np.concatenate([
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            dgg * (1.0 - gg ** 2),
            do * o * (1.0 - o),
        ], axis=1)
        dW += dz.T @ trace.x_t[step]
        dU += dz.T @ trace.h_prev[step]
        db += dz.sum(axis=0)
        d_inputs[:, t] += dz @ W
        dh_next = dz @ U + dh_prev_carry
        dc_next = dc_prev
    return d_inputs


def backward(params: Parameters, cache: ForwardCache, label: int) -> dict[str, np.ndarray]:
    """Analytic gradients of the binary cross-entropy loss."""
    grads = params.zeros_like()
    dz = cache.prob - float(label)  # dL/dz through sigmoid + BCE

    if cache.p_norm == 0.0 or cache.r_norm == 0.0:
        return grads  # score pinned at 0.5; no parameter influences it

    p_hat = cache.p / cache.p_norm
    r_hat = cache.r_vec / cache.r_norm
    dp = dz * (r_hat - cache.z * p_hat) / cache.p_norm
    grads["rel_emb"][cache.relation] = dz * (p_hat - cache.z * r_hat) / cache.r_norm

    du = dp * (1.0 - cache.p ** 2)
    grads["fusion_W"] += np.outer(cache.x_cat, du)
    grads["fusion_b"] += du
    dx_cat = params.arrays["fusion_W"] @ du

    P, T, F = cache.top.shape
    d_top = np.zeros((P, T, F))
    d_pooled = dx_cat.reshape(P, F)
    for p_idx in range(P):
        if cache.pool_valid[p_idx]:
            d_top[p_idx, cache.pool_argmax[p_idx], np.arange(F)] += d_pooled[p_idx]

    h_dim = params.cfg.hidden_dim
    d_current = d_top
    for layer in range(params.cfg.layers - 1, -1, -1):
        trace_f, trace_b = cache.traces[layer]
        d_inputs = _backward_direction(
            params, layer, "f", trace_f, d_current[:, :, :h_dim], grads
        )
        d_inputs += _backward_direction(
            params, layer, "b", trace_b, d_current[:, :, h_dim:], grads
        )
        d_current = d_inputs

    np.add.at(
        grads["token_emb"],
        cache.tokens.reshape(-1),
        d_current.reshape(-1, params.cfg.embed_dim),
    )
    return grads


@dataclass
class TrainResult:
    epoch_losses: list[float]
    step_losses: list[float]


def train(params: Parameters, samples: Sequence[PathSample],
          cfg: Optional[ModelConfig] = None) -> TrainResult:
    """Mini-batch Adam over the sample sequence; deterministic under the seed.

    Samples are reshuffled each epoch with a seeded generator; gradients are
    averaged per batch.  Raises on NaN loss, reporting the batch index.
    """
    import random as _random

    cfg = cfg or params.cfg
    if not samples:
        raise ModelError("empty training stream")
    adam_m = params.zeros_like()
    adam_v = params.zeros_like()
    step = 0
    epoch_losses: list[float] = []
    step_losses: list[float] = []
    indices = list(range(len(samples)))
    for epoch in range(cfg.epochs):
        rng = _random.Random(f"{cfg.seed}:epoch:{epoch}")
        rng.shuffle(indices)
        total = 0.0
        count = 0
        for start in range(0, len(indices), cfg.batch_size):
            batch = indices[start:start + cfg.batch_size]
            grads = params.zeros_like()
            batch_loss = 0.0
            for idx in batch:
                sample = samples[idx]
                prob, cache = forward(params, sample)
                batch_loss += bce_loss(prob, sample.label)
                sample_grads = backward(params, cache, sample.label)
                for name, g in sample_grads.items():
                    grads[name] += g
            batch_loss /= len(batch)
            if math.isnan(batch_loss):
                raise RuntimeError(
                    f"NaN loss at epoch {epoch} batch {start // cfg.batch_size}"
                )
            scale = 1.0 / len(batch)
            step += 1
            lr = cfg.learning_rate
            bias1 = 1.0 - _ADAM_BETA1 ** step
            bias2 = 1.0 - _ADAM_BETA2 ** step
            for name, array in params.arrays.items():
                g = grads[name] * scale
                adam_m[name] = _ADAM_BETA1 * adam_m[name] + (1 - _ADAM_BETA1) * g
                adam_v[name] = _ADAM_BETA2 * adam_v[name] + (1 - _ADAM_BETA2) * g * g
                m_hat = adam_m[name] / bias1
                v_hat = adam_v[name] / bias2
                array -= lr * m_hat / (np.sqrt(v_hat) + _ADAM_EPS)
            if not params.all_finite():
                raise RuntimeError(
                    f"non-finite parameters after epoch {epoch}"
                    f" batch {start // cfg.batch_size}"
                )
            step_losses.append(batch_loss)
            total += batch_loss * len(batch)
            count += len(batch)
        epoch_losses.append(total / count)
    return TrainResult(epoch_losses, step_losses)


def predict(params: Parameters, samples: Sequence[PathSample]) -> list[float]:
    return [forward(params, sample)[0] for sample in samples]


# -- checkpoint I/O -----------------------------------------------------------------


def save_checkpoint(params: Parameters, path) -> None:
    """Text header (magic + config) followed by little-endian float64 blocks."""
    with Path(path).open("wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write((json.dumps(asdict(params.cfg), sort_keys=True) + "\n").encode("utf-8"))
        for name in Parameters.tensor_names(params.cfg):
            array = np.ascontiguousarray(params.arrays[name], dtype="<f8")
            dims = " ".join(str(d) for d in array.shape)
            fh.write(f"{name} {len(array.shape)} {dims}\n".encode("utf-8"))
            fh.write(array.tobytes())


def load_checkpoint(path) -> Parameters:
    with Path(path).open("rb") as fh:
        magic = fh.readline()
        if magic != CHECKPOINT_MAGIC:
            raise ModelError(f"bad checkpoint magic: {magic!r}")
        cfg = ModelConfig(**json.loads(fh.readline().decode("utf-8")))
        arrays: dict[str, np.ndarray] = {}
        for name in Parameters.tensor_names(cfg):
            header = fh.readline().decode("utf-8").split()
            if not header or header[0] != name:
                raise ModelError(f"unexpected tensor header: {header!r}")
            ndim = int(header[1])
            shape = tuple(int(d) for d in header[2:2 + ndim])
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(count * 8)
            if len(raw) != count * 8:
                raise ModelError(f"truncated tensor block: {name}")
            arrays[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
    return Parameters(cfg, arrays)

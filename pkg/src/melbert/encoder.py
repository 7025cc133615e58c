"""Post-layer-norm transformer encoder, shared by both towers.

One parameter set encodes both input kinds. Sentence-style inputs get
token + position + segment embeddings summed elementwise; the bare
target input gets token embeddings only, so its encoding is a pure
function of the sub-token ids. Each block is multi-head self-attention
with a residual then layer norm, followed by a two-layer GELU feedforward
with a residual then layer norm (norms after the residual adds).

Desk-scale defaults (2 layers, 2 heads, width 64) keep every test fast;
the full-scale geometry (12/12/768) is reachable through the same config.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, ContractError
from .inputs import NUM_SEGMENTS, SentenceInput, TargetInput
from .rng import Rng


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int
    num_layers: int = 2
    num_heads: int = 2
    hidden_dim: int = 64
    ffn_dim: int = 256
    max_positions: int = 192
    dropout: float = 0.2
    init_std: float = 0.02

    def __post_init__(self):
        if min(self.vocab_size, self.num_layers, self.num_heads, self.hidden_dim, self.ffn_dim, self.max_positions) < 1:
            raise ConfigError("all encoder dimensions must be positive")
        if self.hidden_dim % self.num_heads != 0:
            raise ConfigError(
                f"hidden_dim {self.hidden_dim} not divisible by num_heads {self.num_heads}"
            )
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderConfig":
        return cls(**d)


@dataclass
class EncoderOutput:
    cls: Tensor                      # [d], the sequence-level vector
    positions: Tensor                # [L, d], one row per input id
    attentions: Optional[list[np.ndarray]] = None  # per layer [H, L, L]


def pool_span(output: EncoderOutput, span: tuple[int, int], pooling: str = "mean") -> Tensor:
    """Span vector: mean of the covered rows, or the [CLS] row."""
    if pooling == "cls":
        return output.cls
    if pooling != "mean":
        raise ConfigError(f"unknown pooling {pooling!r} (mean or cls)")
    s, e = span
    length = output.positions.shape[0]
    if not 0 <= s < e <= length:
        raise ContractError(f"span ({s}, {e}) empty or outside sequence of length {length}")
    return ad.tmean(output.positions[s:e], axis=0)


class Encoder:
    """Owns the parameter tensors and runs the forward pass."""

    def __init__(self, cfg: EncoderConfig, rng: Rng):
        self.cfg = cfg
        self.params: dict[str, Tensor] = {}
        self.call_count = 0

        def tn(name, shape):
            self.params[name] = Tensor(rng.truncated_normal(shape, std=cfg.init_std), requires_grad=True)

        def zeros(name, shape):
            self.params[name] = Tensor(np.zeros(shape), requires_grad=True)

        def ones(name, shape):
            self.params[name] = Tensor(np.ones(shape), requires_grad=True)

        d, f = cfg.hidden_dim, cfg.ffn_dim
        tn("emb.tok", (cfg.vocab_size, d))
        tn("emb.pos", (cfg.max_positions, d))
        tn("emb.seg", (NUM_SEGMENTS, d))
        for i in range(cfg.num_layers):
            for proj in ("q", "k", "v", "o"):
                tn(f"layer{i}.attn.{proj}.w", (d, d))
                zeros(f"layer{i}.attn.{proj}.b", (d,))
            ones(f"layer{i}.ln1.g", (d,))
            zeros(f"layer{i}.ln1.b", (d,))
            tn(f"layer{i}.ffn.w1", (d, f))
            zeros(f"layer{i}.ffn.b1", (f,))
            tn(f"layer{i}.ffn.w2", (f, d))
            zeros(f"layer{i}.ffn.b2", (d,))
            ones(f"layer{i}.ln2.g", (d,))
            zeros(f"layer{i}.ln2.b", (d,))

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for name, tensor in self.params.items():
            if name not in arrays:
                raise ContractError(f"checkpoint is missing parameter {name!r}")
            if arrays[name].shape != tensor.data.shape:
                raise ContractError(
                    f"parameter {name!r} shape {arrays[name].shape} != expected {tensor.data.shape}"
                )
            tensor.data = arrays[name].astype(np.float64).copy()

    def encode(
        self,
        inp: SentenceInput | TargetInput,
        mode: str = "eval",
        rng: Rng | None = None,
        keep_attention: bool = False,
    ) -> EncoderOutput:
        if mode not in ("train", "eval"):
            raise ContractError(f"mode must be train or eval, got {mode!r}")
        training = mode == "train"
        if training and rng is None:
            raise ContractError("training-mode encode needs an rng for dropout")
        cfg = self.cfg
        ids = np.asarray(inp.ids, dtype=np.int64)
        L = len(ids)
        if L == 0:
            raise ContractError("cannot encode an empty id sequence")
        if L > cfg.max_positions:
            raise ContractError(f"sequence length {L} exceeds max_positions {cfg.max_positions}")
        self.call_count += 1

        p = cfg.dropout
        P = self.params
        x = ad.embedding(P["emb.tok"], ids)
        if isinstance(inp, SentenceInput):
            x = ad.add(x, ad.embedding(P["emb.pos"], np.asarray(inp.positions, dtype=np.int64)))
            x = ad.add(x, ad.embedding(P["emb.seg"], np.asarray(inp.segments, dtype=np.int64)))
        x = ad.dropout(x, p, training, rng)

        d = cfg.hidden_dim
        heads = cfg.num_heads
        dh = d // heads
        scale = 1.0 / np.sqrt(dh)
        attentions: list[np.ndarray] | None = [] if keep_attention else None

        for i in range(cfg.num_layers):
            def proj(name):
                return ad.add(ad.matmul(x, P[f"layer{i}.attn.{name}.w"]), P[f"layer{i}.attn.{name}.b"])

            def split_heads(t):
                return ad.transpose(ad.reshape(t, (L, heads, dh)), (1, 0, 2))

            q = split_heads(proj("q"))
            k = split_heads(proj("k"))
            v = split_heads(proj("v"))
            scores = ad.mul(ad.matmul(q, ad.transpose(k, (0, 2, 1))), Tensor(scale))
            probs = ad.softmax(scores, axis=-1)
            if attentions is not None:
                attentions.append(probs.data.copy())
            probs = ad.dropout(probs, p, training, rng)
            ctx = ad.reshape(ad.transpose(ad.matmul(probs, v), (1, 0, 2)), (L, d))
            attn_out = ad.add(ad.matmul(ctx, P[f"layer{i}.attn.o.w"]), P[f"layer{i}.attn.o.b"])
            attn_out = ad.dropout(attn_out, p, training, rng)
            x = ad.layer_norm(ad.add(x, attn_out), P[f"layer{i}.ln1.g"], P[f"layer{i}.ln1.b"])

            h = ad.gelu(ad.add(ad.matmul(x, P[f"layer{i}.ffn.w1"]), P[f"layer{i}.ffn.b1"]))
            h = ad.add(ad.matmul(h, P[f"layer{i}.ffn.w2"]), P[f"layer{i}.ffn.b2"])
            h = ad.dropout(h, p, training, rng)
            x = ad.layer_norm(ad.add(x, h), P[f"layer{i}.ln2.g"], P[f"layer{i}.ln2.b"])

        return EncoderOutput(cls=x[0], positions=x, attentions=attentions)

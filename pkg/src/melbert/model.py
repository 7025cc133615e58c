"""The five scoring variants wired to the shared encoder.

The full model runs the encoder twice per instance (late interaction):
once over the sentence with positions and segments, once over the bare
target. Both interaction heads read from those passes and a logistic
combiner produces the score. Ablations drop one head. The two baselines
need a single encoder pass: all-to-all packs sentence and target into
one unmarked sequence and classifies from [CLS]; the sequence-labeling
baseline classifies from the segment-marked target vector directly.

Because the target pass sees no context, its vector depends only on the
target's sub-token ids, so evaluation caches it per id sequence. Any
parameter update invalidates the cache.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .autodiff import Tensor
from .bpe import Vocab
from .data import Instance
from .encoder import Encoder, EncoderConfig, pool_span
from .errors import ConfigError, ContractError
from .heads import (
    HeadParams,
    combine_pair,
    combine_single,
    contrast_head,
    declared_head_param_count,
    init_head_params,
    interaction_head,
)
from .inputs import SentenceInput, TargetInput, build_pair_input, build_sentence_input, build_target_input
from .rng import Rng


class Variant(str, Enum):
    MELBERT = "melbert"
    NO_MIP = "no_mip"
    NO_SPV = "no_spv"
    BASE_ALL2ALL = "base_all2all"
    SEQ = "seq"

    @classmethod
    def parse(cls, name: str) -> "Variant":
        try:
            return cls(name.lower())
        except ValueError:
            raise ConfigError(
                f"unknown variant {name!r} (choose from {[v.value for v in cls]})"
            ) from None


@dataclass(frozen=True)
class ModelConfig:
    encoder: EncoderConfig
    variant: Variant = Variant.MELBERT
    head_dim: Optional[int] = None      # None: same as encoder width
    threshold: float = 0.5
    target_pooling: str = "mean"        # "mean" over span, or "cls"
    max_len: int = 150

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError(f"threshold must lie in (0, 1), got {self.threshold}")
        if self.target_pooling not in ("mean", "cls"):
            raise ConfigError(f"target_pooling must be mean or cls, got {self.target_pooling!r}")
        if self.max_len < 4:
            raise ConfigError("max_len must allow [CLS], target, [SEP] and the POS marker")

    @property
    def resolved_head_dim(self) -> int:
        return self.head_dim if self.head_dim is not None else self.encoder.hidden_dim

    def to_dict(self) -> dict:
        return {
            "encoder": self.encoder.to_dict(),
            "variant": self.variant.value,
            "head_dim": self.head_dim,
            "threshold": self.threshold,
            "target_pooling": self.target_pooling,
            "max_len": self.max_len,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(
            encoder=EncoderConfig.from_dict(d["encoder"]),
            variant=Variant.parse(d["variant"]),
            head_dim=d.get("head_dim"),
            threshold=d.get("threshold", 0.5),
            target_pooling=d.get("target_pooling", "mean"),
            max_len=d.get("max_len", 150),
        )


@dataclass(frozen=True)
class Prediction:
    score: float
    label: int


@dataclass
class PassCounters:
    sentence: int = 0
    target: int = 0
    target_cache_hits: int = 0


class MetaphorModel:
    """Encoder + heads for one variant, with prediction utilities."""

    def __init__(self, cfg: ModelConfig, vocab: Vocab, seed: int = 0):
        if cfg.encoder.vocab_size != len(vocab):
            raise ContractError(
                f"encoder vocab_size {cfg.encoder.vocab_size} != vocabulary size {len(vocab)}"
            )
        self.cfg = cfg
        self.vocab = vocab
        init_rng = Rng(seed, "init")
        self.encoder = Encoder(cfg.encoder, init_rng.child("encoder"))
        self.heads = init_head_params(
            cfg.variant.value, cfg.encoder.hidden_dim, cfg.resolved_head_dim,
            init_rng.child("heads"), init_std=cfg.encoder.init_std,
        )
        self.counters = PassCounters()
        self._target_cache: dict[tuple[int, ...], np.ndarray] = {}

    # -- parameters ------------------------------------------------------

    def parameters(self) -> dict[str, Tensor]:
        out = {f"enc.{k}": v for k, v in self.encoder.params.items()}
        out.update(self.heads.named())
        return out

    def param_count(self) -> int:
        return sum(t.data.size for t in self.parameters().values())

    def head_param_count(self) -> int:
        return sum(t.data.size for t in self.heads.named().values())

    def zero_grads(self) -> None:
        for t in self.parameters().values():
            t.grad = None

    def mark_updated(self) -> None:
        """Must be called after any parameter mutation; drops the cache."""
        self._target_cache.clear()

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for name, tensor in self.parameters().items():
            if name not in arrays:
                raise ContractError(f"checkpoint is missing parameter {name!r}")
            if arrays[name].shape != tensor.data.shape:
                raise ContractError(
                    f"parameter {name!r} shape {arrays[name].shape} != expected {tensor.data.shape}"
                )
            tensor.data = arrays[name].astype(np.float64).copy()
        self.mark_updated()

    def export_arrays(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.parameters().items()}

    # -- inputs ----------------------------------------------------------

    def build_inputs(self, inst: Instance) -> tuple[SentenceInput, Optional[TargetInput]]:
        if self.cfg.variant is Variant.BASE_ALL2ALL:
            return build_pair_input(inst, self.vocab, self.cfg.max_len), None
        sent = build_sentence_input(inst, self.vocab, self.cfg.max_len)
        if self.cfg.variant in (Variant.SEQ, Variant.NO_MIP):
            return sent, None  # neither looks at the isolated target
        return sent, build_target_input(inst, self.vocab)

    # -- scoring ---------------------------------------------------------

    def _target_vector(self, tgt: TargetInput, mode: str, rng) -> Tensor:
        if mode == "eval":
            hit = self._target_cache.get(tgt.ids)
            if hit is not None:
                self.counters.target_cache_hits += 1
                return Tensor(hit)
            out = self.encoder.encode(tgt, "eval")
            self.counters.target += 1
            v = pool_span(out, tgt.target_span, self.cfg.target_pooling)
            self._target_cache[tgt.ids] = v.data.copy()
            return v
        out = self.encoder.encode(tgt, mode, rng)
        self.counters.target += 1
        return pool_span(out, tgt.target_span, self.cfg.target_pooling)

    def score_inputs(
        self,
        sent: SentenceInput,
        tgt: Optional[TargetInput],
        mode: str = "eval",
        rng: Rng | None = None,
    ) -> Tensor:
        """Scalar score in (0, 1) for one prepared instance."""
        variant = self.cfg.variant
        p = self.cfg.encoder.dropout
        training = mode == "train"
        out = self.encoder.encode(sent, mode, rng)
        self.counters.sentence += 1

        if variant is Variant.BASE_ALL2ALL:
            return combine_single(out.cls, self.heads)
        v_st = pool_span(out, sent.target_span)
        if variant is Variant.SEQ:
            return combine_single(v_st, self.heads)

        if variant is Variant.NO_MIP:
            h_g = contrast_head(out.cls, v_st, self.heads, p, training, rng)
            return combine_single(h_g, self.heads)

        if tgt is None:
            raise ContractError(f"variant {variant.value} needs a target input")
        v_t = self._target_vector(tgt, mode, rng)
        h_f = interaction_head(v_st, v_t, self.heads, p, training, rng)
        if variant is Variant.NO_SPV:
            return combine_single(h_f, self.heads)
        h_g = contrast_head(out.cls, v_st, self.heads, p, training, rng)
        return combine_pair(h_f, h_g, self.heads)

    def score_instance(self, inst: Instance, mode: str = "eval", rng: Rng | None = None) -> Tensor:
        sent, tgt = self.build_inputs(inst)
        return self.score_inputs(sent, tgt, mode, rng)

    def predict(self, inst: Instance) -> Prediction:
        score = self.score_instance(inst, mode="eval").item()
        return Prediction(score=score, label=int(score >= self.cfg.threshold))

"""Interaction heads, score combination, and training losses.

Two small MLPs consume pairs of encoder vectors:

- the interaction head ``f`` compares the contextualized target vector
  with its context-free encoding (literal vs in-context meaning),
- the contrast head ``g`` compares the sentence vector with the
  contextualized target vector (sentence-level incongruity).

Each maps a concatenated 2d vector through one affine layer with GELU.
The full model combines both head outputs through a single logistic
unit; ablations keep one head and a combiner sized to match (the weight
vector shrinks to h rather than being zero-padded). The two sequence
baselines score a single encoder vector directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, ContractError, DimensionError
from .rng import Rng


@dataclass
class HeadParams:
    """Variant-dependent head parameter set; unused slots stay None."""

    f_w: Optional[Tensor] = None  # [2d, h] interaction head
    f_b: Optional[Tensor] = None  # [h]
    g_w: Optional[Tensor] = None  # [2d, h] contrast head
    g_b: Optional[Tensor] = None  # [h]
    w: Optional[Tensor] = None    # combiner weights: [2h], [h], or [d]
    b: Optional[Tensor] = None    # combiner bias, scalar

    def named(self, prefix: str = "head.") -> dict[str, Tensor]:
        out = {}
        for name in ("f_w", "f_b", "g_w", "g_b", "w", "b"):
            t = getattr(self, name)
            if t is not None:
                out[prefix + name.replace("_", ".")] = t
        return out


def init_head_params(variant: str, hidden_dim: int, head_dim: int, rng: Rng, init_std: float = 0.02) -> HeadParams:
    d, h = hidden_dim, head_dim

    def tn(shape):
        return Tensor(rng.truncated_normal(shape, std=init_std), requires_grad=True)

    def zeros(shape):
        return Tensor(np.zeros(shape), requires_grad=True)

    if variant == "melbert":
        return HeadParams(f_w=tn((2 * d, h)), f_b=zeros((h,)), g_w=tn((2 * d, h)), g_b=zeros((h,)),
                          w=tn((2 * h,)), b=zeros(()))
    if variant == "no_spv":
        return HeadParams(f_w=tn((2 * d, h)), f_b=zeros((h,)), w=tn((h,)), b=zeros(()))
    if variant == "no_mip":
        return HeadParams(g_w=tn((2 * d, h)), g_b=zeros((h,)), w=tn((h,)), b=zeros(()))
    if variant in ("base_all2all", "seq"):
        return HeadParams(w=tn((d,)), b=zeros(()))
    raise ConfigError(f"unknown variant {variant!r}")


def declared_head_param_count(variant: str, hidden_dim: int, head_dim: int) -> int:
    """Parameter count each variant is supposed to carry."""
    d, h = hidden_dim, head_dim
    mlp = 2 * d * h + h
    if variant == "melbert":
        return 2 * mlp + 2 * h + 1
    if variant in ("no_spv", "no_mip"):
        return mlp + h + 1
    if variant in ("base_all2all", "seq"):
        return d + 1
    raise ConfigError(f"unknown variant {variant!r}")


def _pair_mlp(a: Tensor, b: Tensor, w: Tensor, bias: Tensor,
              dropout_p: float, training: bool, rng) -> Tensor:
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionError(f"head inputs must be equal-length vectors, got {a.shape} and {b.shape}")
    if w.shape[0] != 2 * a.shape[0]:
        raise DimensionError(f"head weight expects input {w.shape[0]}, got 2x{a.shape[0]}")
    z = ad.concat([a, b], axis=0)
    out = ad.add(ad.reshape(ad.matmul(ad.reshape(z, (1, -1)), w), (-1,)), bias)
    out = ad.gelu(out)
    return ad.dropout(out, dropout_p, training, rng)


def interaction_head(v_st: Tensor, v_t: Tensor, hp: HeadParams,
                     dropout_p: float = 0.0, training: bool = False, rng=None) -> Tensor:
    """Compare the in-context target vector against its isolated encoding."""
    return _pair_mlp(v_st, v_t, hp.f_w, hp.f_b, dropout_p, training, rng)


def contrast_head(v_s: Tensor, v_st: Tensor, hp: HeadParams,
                  dropout_p: float = 0.0, training: bool = False, rng=None) -> Tensor:
    """Compare the sentence vector against the in-context target vector."""
    return _pair_mlp(v_s, v_st, hp.g_w, hp.g_b, dropout_p, training, rng)


def combine_pair(h_f: Tensor, h_g: Tensor, hp: HeadParams) -> Tensor:
    """Logistic combination of both head outputs; scalar score in (0, 1)."""
    z = ad.concat([h_f, h_g], axis=0)
    if hp.w.shape != z.shape:
        raise DimensionError(f"combiner weight {hp.w.shape} does not match heads {z.shape}")
    return ad.sigmoid(ad.add(ad.tsum(ad.mul(z, hp.w)), hp.b))


def combine_single(h: Tensor, hp: HeadParams) -> Tensor:
    """Logistic readout of one vector (ablations and baselines)."""
    if hp.w.shape != h.shape:
        raise DimensionError(f"combiner weight {hp.w.shape} does not match input {h.shape}")
    return ad.sigmoid(ad.add(ad.tsum(ad.mul(h, hp.w)), hp.b))


def bce_loss(scores: Tensor, labels, pos_weight: float = 1.0) -> Tensor:
    """Weighted binary cross-entropy, mean-reduced.

    Positives get pos_weight, negatives weight 1; predictions are clamped
    to [1e-12, 1 - 1e-12] before the logs.
    """
    if pos_weight < 1.0:
        raise ConfigError(f"pos_weight must be >= 1 (1 disables weighting), got {pos_weight}")
    y = np.asarray(labels, dtype=np.float64)
    if scores.ndim != 1 or y.shape != scores.shape:
        raise ContractError(f"scores {scores.shape} and labels {y.shape} must be equal-length vectors")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ContractError("labels must be binary 0/1")
    s = ad.clip(scores, 1e-12, 1.0 - 1e-12)
    weights = np.where(y == 1.0, pos_weight, 1.0)
    per = ad.add(ad.mul(ad.log(s), Tensor(y)), ad.mul(ad.log(ad.sub(1.0, s)), Tensor(1.0 - y)))
    return ad.neg(ad.tmean(ad.mul(per, Tensor(weights))))


def mse_loss(scores: Tensor, targets) -> Tensor:
    """Mean squared error for graded (regression) labels."""
    t = np.asarray(targets, dtype=np.float64)
    if scores.ndim != 1 or t.shape != scores.shape:
        raise ContractError(f"scores {scores.shape} and targets {t.shape} must be equal-length vectors")
    diff = ad.sub(scores, Tensor(t))
    return ad.tmean(ad.mul(diff, diff))

"""Training loop: Adam with warmup/decay, per-epoch checkpoints that
resume bit-exactly, multi-seed orchestration, and bagged k-fold CV.

Batches are processed instance-by-instance (two encoder passes for the
late-interaction variants) under one tape, so the mean loss over the
batch backpropagates in a single sweep. Every random decision after
model init flows from one Philox stream whose state is written into the
training checkpoint; restoring it replays the identical shuffle and
dropout sequence, which is what makes an interrupted run byte-identical
to an uninterrupted one.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from . import autodiff as ad
from .autodiff import Tape
from .bpe import Vocab
from .checkpoint import load_checkpoint, save_checkpoint
from .data import Instance, kfold_split
from .errors import ConfigError, ContractError, TrainingDivergedError
from .heads import bce_loss, mse_loss
from .model import MetaphorModel, ModelConfig, Prediction
from .rng import Rng


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 3
    batch_size: int = 32
    peak_lr: float = 3e-4
    warmup_fraction: float = 2.0 / 3.0
    pos_weight: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    grad_clip: Optional[float] = None
    objective: str = "bce"  # or "mse" for graded labels
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be positive")
        if not 0.0 < self.warmup_fraction < 1.0:
            raise ConfigError(f"warmup_fraction must lie in (0, 1), got {self.warmup_fraction}")
        if self.peak_lr <= 0:
            raise ConfigError("peak_lr must be positive")
        if self.objective not in ("bce", "mse"):
            raise ConfigError(f"objective must be bce or mse, got {self.objective!r}")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ConfigError("grad_clip must be positive when set")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seeds"] = list(self.seeds)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["seeds"] = tuple(d.get("seeds", (0, 1, 2, 3, 4)))
        return cls(**d)


def lr_at(step: int, total_steps: int, cfg: TrainConfig) -> float:
    """Piecewise-linear rate: 0 to peak over the warmup, then back to 0.

    The boundary is rounded to a whole step and both segments multiply by a
    ratio whose endpoints are exactly 0.0 and 1.0, so the peak is hit
    bit-exactly rather than to within a rounding error.
    """
    if total_steps < 1:
        raise ContractError("total_steps must be positive")
    if not 0 <= step <= total_steps:
        raise ContractError(f"step {step} outside [0, {total_steps}]")
    warmup_steps = round(cfg.warmup_fraction * total_steps)
    if warmup_steps > 0 and step <= warmup_steps:
        return cfg.peak_lr * (step / warmup_steps)
    return cfg.peak_lr * ((total_steps - step) / (total_steps - warmup_steps))


class AdamState:
    """First/second moment accumulators plus the bias-correction counter."""

    def __init__(self, m: dict[str, np.ndarray], v: dict[str, np.ndarray], t: int = 0):
        self.m = m
        self.v = v
        self.t = t

    @classmethod
    def init_like(cls, params) -> "AdamState":
        return cls(
            m={k: np.zeros_like(t.data) for k, t in params.items()},
            v={k: np.zeros_like(t.data) for k, t in params.items()},
        )


def global_grad_norm(params) -> float:
    total = 0.0
    for t in params.values():
        if t.grad is not None:
            total += float((t.grad * t.grad).sum())
    return float(np.sqrt(total))


def clip_gradients(params, max_norm: float) -> float:
    """Scale all gradients so their global norm is at most max_norm."""
    norm = global_grad_norm(params)
    if norm > max_norm:
        scale = max_norm / norm
        for t in params.values():
            if t.grad is not None:
                t.grad = t.grad * scale
    return norm

def adam_step(params, state: AdamState, lr: float, cfg: TrainConfig) -> None:
    """One update; a missing gradient counts as zeros (moments still decay)."""
    state.t += 1
    bc1 = 1.0 - cfg.beta1 ** state.t
    bc2 = 1.0 - cfg.beta2 ** state.t
    for name, tensor in params.items():
        g = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
        state.m[name] = cfg.beta1 * state.m[name] + (1.0 - cfg.beta1) * g
        state.v[name] = cfg.beta2 * state.v[name] + (1.0 - cfg.beta2) * (g * g)
        m_hat = state.m[name] / bc1
        v_hat = state.v[name] / bc2
        tensor.data = tensor.data - lr * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)


@dataclass
class TrainResult:
    model: MetaphorModel
    seed: int
    loss_curve: list[float]
    global_step: int


def _loss_fn(cfg: TrainConfig) -> Callable:
    if cfg.objective == "bce":
        return lambda scores, labels: bce_loss(scores, labels, cfg.pos_weight)
    return mse_loss


def _train_labels(dataset, cfg: TrainConfig) -> np.ndarray:
    if cfg.objective == "bce":
        return np.array([float(i.gold) for i in dataset])
    return np.array([i.label for i in dataset])


def save_train_checkpoint(path, model, train_cfg, adam, train_rng, seed, epoch, global_step, loss_curve):
    meta = {
        "kind": "train",
        "model": model.cfg.to_dict(),
        "train": train_cfg.to_dict(),
        "seed": seed,
        "epoch": epoch,
        "global_step": global_step,
        "adam_t": adam.t,
        "rng_state": train_rng.state(),
        "loss_curve": list(loss_curve),
    }
    arrays = model.export_arrays()
    for k, a in adam.m.items():
        arrays[f"adam.m.{k}"] = a
    for k, a in adam.v.items():
        arrays[f"adam.v.{k}"] = a
    save_checkpoint(path, meta, arrays)


def save_model_checkpoint(path, model: MetaphorModel) -> None:
    save_checkpoint(path, {"kind": "model", "model": model.cfg.to_dict()}, model.export_arrays())


def load_model(path, vocab: Vocab) -> MetaphorModel:
    meta, arrays = load_checkpoint(path)
    if meta.get("kind") not in ("model", "train"):
        raise ContractError(f"checkpoint kind {meta.get('kind')!r} is not loadable as a model")
    cfg = ModelConfig.from_dict(meta["model"])
    model = MetaphorModel(cfg, vocab, seed=0)
    model.load_arrays({k: v for k, v in arrays.items() if not k.startswith("adam.")})
    return model


def train_single(
    model_cfg: ModelConfig,
    vocab: Vocab,
    dataset: list[Instance],
    cfg: TrainConfig,
    seed: int,
    log_fh=None,
    checkpoint_path=None,
    checkpoint_every_epoch: bool = False,
    resume_from=None,
    stop_after_epoch: Optional[int] = None,
    after_epoch: Optional[Callable[[int, MetaphorModel, list[float]], bool]] = None,
) -> TrainResult:
    """Train one model from one seed; optionally resume a saved run.

    Resuming restores parameters, optimizer moments, step counters, and
    the training RNG state, then continues to cfg.epochs; the result is
    bit-identical to never having stopped. stop_after_epoch ends the run
    early at that epoch boundary (the schedule still spans cfg.epochs),
    which stands in for an interrupted job. after_epoch, when given, is
    called with (epoch, model, loss_curve) at each boundary and may
    return True to stop early (e.g. a validation-F1 target was hit).
    """
    if not dataset:
        raise ContractError("cannot train on an empty dataset")
    model = MetaphorModel(model_cfg, vocab, seed)
    adam = AdamState.init_like(model.parameters())
    train_rng = Rng(seed, "train")
    start_epoch = 0
    global_step = 0
    loss_curve: list[float] = []

    if resume_from is not None:
        meta, arrays = load_checkpoint(resume_from)
        if meta.get("kind") != "train":
            raise ContractError("resume checkpoint must be a training checkpoint")
        if meta["model"] != model_cfg.to_dict() or meta["train"] != cfg.to_dict():
            raise ContractError("resume checkpoint was written under a different configuration")
        if meta["seed"] != seed:
            raise ContractError(f"resume checkpoint is for seed {meta['seed']}, not {seed}")
        model.load_arrays({k: v for k, v in arrays.items() if not k.startswith("adam.")})
        adam = AdamState(
            m={k[len("adam.m."):]: v for k, v in arrays.items() if k.startswith("adam.m.")},
            v={k[len("adam.v."):]: v for k, v in arrays.items() if k.startswith("adam.v.")},
            t=meta["adam_t"],
        )
        train_rng.set_state(meta["rng_state"])
        start_epoch = meta["epoch"]
        global_step = meta["global_step"]
        loss_curve = list(meta["loss_curve"])

    prepared = [model.build_inputs(i) for i in dataset]
    labels = _train_labels(dataset, cfg)
    loss_fn = _loss_fn(cfg)
    n = len(dataset)
    n_batches = (n + cfg.batch_size - 1) // cfg.batch_size
    total_steps = cfg.epochs * n_batches

    for epoch in range(start_epoch, cfg.epochs):
        perm = train_rng.permutation(n)
        epoch_losses = []
        for b in range(n_batches):
            idx = perm[b * cfg.batch_size : (b + 1) * cfg.batch_size]
            with Tape():
                scores = [
                    ad.reshape(model.score_inputs(*prepared[j], mode="train", rng=train_rng), (1,))
                    for j in idx
                ]
                loss = loss_fn(ad.concat(scores), labels[idx])
            loss_value = loss.item()
            if not np.isfinite(loss_value):
                raise TrainingDivergedError(
                    f"non-finite loss {loss_value} at epoch {epoch}, step {global_step} "
                    f"(seed {seed}); try a lower peak_lr or enable grad_clip"
                )
            model.zero_grads()
            ad.backward(loss)
            if cfg.grad_clip is not None:
                clip_gradients(model.parameters(), cfg.grad_clip)
            global_step += 1
            lr = lr_at(global_step, total_steps, cfg)
            adam_step(model.parameters(), adam, lr, cfg)
            model.mark_updated()
            epoch_losses.append(loss_value)
            if log_fh is not None:
                log_fh.write(json.dumps({
                    "seed": seed, "epoch": epoch, "step": global_step,
                    "lr": lr, "loss": loss_value,
                }, sort_keys=True) + "\n")
        loss_curve.append(float(np.mean(epoch_losses)))
        if checkpoint_path is not None and (checkpoint_every_epoch or epoch == cfg.epochs - 1):
            save_train_checkpoint(
                checkpoint_path, model, cfg, adam, train_rng,
                seed, epoch + 1, global_step, loss_curve,
            )
        if stop_after_epoch is not None and epoch + 1 >= stop_after_epoch:
            break
        if after_epoch is not None and after_epoch(epoch, model, loss_curve):
            break
    return TrainResult(model=model, seed=seed, loss_curve=loss_curve, global_step=global_step)


def train(model_cfg: ModelConfig, vocab: Vocab, dataset, cfg: TrainConfig, log_fh=None) -> list[TrainResult]:
    """One training run per configured seed."""
    return [train_single(model_cfg, vocab, dataset, cfg, seed, log_fh=log_fh) for seed in cfg.seeds]


class CvEnsemble:
    """Bagging over k fold-trained models: mean score, then threshold."""

    def __init__(self, models: list[MetaphorModel]):
        if not models:
            raise ContractError("ensemble needs at least one model")
        self.models = models
        self.threshold = models[0].cfg.threshold

    def score(self, inst: Instance) -> float:
        return float(np.mean([m.score_instance(inst).item() for m in self.models]))

    def predict(self, inst: Instance) -> Prediction:
        s = self.score(inst)
        return Prediction(score=s, label=int(s >= self.threshold))


def bagging_cv_train(
    model_cfg: ModelConfig,
    vocab: Vocab,
    dataset,
    k: int,
    cfg: TrainConfig,
    seed: int,
) -> tuple[CvEnsemble, list[TrainResult]]:
    """Train k models on k-fold train parts; ensemble averages their scores.

    Fold i trains with seed seed+i so the members differ by both data
    part and initialization.
    """
    folds = kfold_split(dataset, k, seed)
    results = [
        train_single(model_cfg, vocab, part, cfg, seed=seed + i)
        for i, (part, _held) in enumerate(folds)
    ]
    return CvEnsemble([r.model for r in results]), results

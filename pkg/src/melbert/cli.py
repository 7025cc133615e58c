"""Command-line front end.

Subcommands cover the full workflow: tokenizer-train builds a
vocabulary from a corpus, train fits one model, eval scores a
checkpoint with per-group breakdowns, predict scores a single sentence,
ablate runs all five variants under one protocol, and cv trains a
bagged k-fold ensemble. Settings come from an optional config file of
``key = value`` lines, overridden by command-line flags. Exit codes:
0 success, 1 runtime failure, 2 usage problems (bad flags, missing
files, malformed settings).
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys

from .bpe import Vocab, train_bpe
from .data import Instance, load_corpus, summarize
from .encoder import EncoderConfig
from .errors import ConfigError, MelbertError
from .evaluation import (
    evaluate_model,
    render_table,
    report_to_json,
    zero_shot_eval,
)
from .model import MetaphorModel, ModelConfig, Variant
from .training import (
    TrainConfig,
    bagging_cv_train,
    load_model,
    save_model_checkpoint,
    train_single,
)


class UsageError(Exception):
    """Operator mistake: wrong path, malformed setting, bad combination."""


def _opt_float(v: str):
    return None if v.lower() == "none" else float(v)


def _opt_int(v: str):
    return None if v.lower() == "none" else int(v)


def _seed_list(v: str):
    return tuple(int(part) for part in v.split(","))


COERCERS = {
    "variant": str,
    "seed": int,
    "seeds": _seed_list,
    "epochs": int,
    "batch_size": int,
    "peak_lr": float,
    "warmup_fraction": float,
    "pos_weight": float,
    "grad_clip": _opt_float,
    "objective": str,
    "max_len": int,
    "threshold": float,
    "num_layers": int,
    "num_heads": int,
    "hidden_dim": int,
    "ffn_dim": int,
    "dropout": float,
    "init_std": float,
    "head_dim": _opt_int,
    "target_pooling": str,
    "vocab_size": int,
    "k": int,
}

DEFAULTS = {
    "variant": "melbert",
    "seed": 0,
    "seeds": (0, 1, 2, 3, 4),
    "epochs": 3,
    "batch_size": 32,
    "peak_lr": 3e-4,
    "warmup_fraction": 2.0 / 3.0,
    "pos_weight": 1.0,
    "grad_clip": None,
    "objective": "bce",
    "max_len": 150,
    "threshold": 0.5,
    "num_layers": 2,
    "num_heads": 2,
    "hidden_dim": 64,
    "ffn_dim": 256,
    "dropout": 0.2,
    "init_std": 0.02,
    "head_dim": None,
    "target_pooling": "mean",
    "vocab_size": 4000,
    "k": 5,
}


def parse_config_file(path) -> dict:
    """Read ``key = value`` lines; # starts a comment anywhere."""
    settings = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in COERCERS:
                raise ConfigError(f"{path}:{lineno}: unknown setting {key!r}")
            try:
                settings[key] = COERCERS[key](value)
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: bad value {value!r} for {key}") from None
    return settings


def resolve_settings(args) -> dict:
    """defaults < config file < explicit flags."""
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        _require_file(args.config, "config file")
        settings.update(parse_config_file(args.config))
    for key in COERCERS:
        flag = getattr(args, key, None)
        if flag is not None:
            settings[key] = flag
    return settings


def echo_settings(settings: dict) -> str:
    return "\n".join(f"{k} = {settings[k]}" for k in sorted(settings))


def settings_for_report(settings: dict) -> dict:
    out = dict(settings)
    out["seeds"] = list(settings["seeds"])
    return out


def _require_file(path, what: str) -> None:
    if not os.path.isfile(path):
        raise UsageError(f"{what} not found: {path}")


def dataset_sha256(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _load_instances(path) -> list[Instance]:
    result = load_corpus(path)
    for err in result.errors[:5]:
        print(f"warning: {path}:{err.line}: {err.message}", file=sys.stderr)
    if len(result.errors) > 5:
        print(f"warning: {len(result.errors) - 5} further malformed rows", file=sys.stderr)
    if not result.instances:
        raise UsageError(f"{path} contains no usable rows")
    return result.instances


def model_config_from(settings: dict, vocab: Vocab) -> ModelConfig:
    enc = EncoderConfig(
        vocab_size=len(vocab),
        num_layers=settings["num_layers"],
        num_heads=settings["num_heads"],
        hidden_dim=settings["hidden_dim"],
        ffn_dim=settings["ffn_dim"],
        max_positions=max(192, settings["max_len"] + 8),
        dropout=settings["dropout"],
        init_std=settings["init_std"],
    )
    return ModelConfig(
        encoder=enc,
        variant=Variant.parse(settings["variant"]),
        head_dim=settings["head_dim"],
        threshold=settings["threshold"],
        target_pooling=settings["target_pooling"],
        max_len=settings["max_len"],
    )


def train_config_from(settings: dict) -> TrainConfig:
    return TrainConfig(
        epochs=settings["epochs"],
        batch_size=settings["batch_size"],
        peak_lr=settings["peak_lr"],
        warmup_fraction=settings["warmup_fraction"],
        pos_weight=settings["pos_weight"],
        grad_clip=settings["grad_clip"],
        objective=settings["objective"],
        seeds=(settings["seed"],),
    )


# -- subcommands -----------------------------------------------------------


def cmd_tokenizer_train(args) -> int:
    _require_file(args.corpus, "corpus")
    instances = _load_instances(args.corpus)
    corpus_lines = (" ".join(inst.tokens) for inst in instances)
    vocab = train_bpe(corpus_lines, args.vocab_size)
    vocab.save(args.out)
    print(f"wrote {len(vocab)} tokens ({len(vocab.merges)} merges) to {args.out}")
    return 0


def cmd_train(args) -> int:
    settings = resolve_settings(args)
    _require_file(args.corpus, "corpus")
    _require_file(args.vocab, "vocabulary")
    vocab = Vocab.load(args.vocab)
    instances = _load_instances(args.corpus)
    model_cfg = model_config_from(settings, vocab)
    train_cfg = train_config_from(settings)

    print(echo_settings(settings))
    summary = summarize(instances)
    print(f"corpus: {summary.token_count} target tokens, {summary.metaphor_pct:.1f}% "
          f"positive, {summary.sentence_count} sentences")
    if args.dry_run:
        print("dry run: settings and corpus look usable, stopping before training")
        return 0

    log_fh = open(args.log, "w", encoding="utf-8") if args.log else None
    try:
        result = train_single(
            model_cfg, vocab, instances, train_cfg, seed=settings["seed"],
            log_fh=log_fh,
            checkpoint_path=args.save_train_state,
            checkpoint_every_epoch=args.save_train_state is not None,
            resume_from=args.resume,
        )
    finally:
        if log_fh is not None:
            log_fh.close()
    save_model_checkpoint(args.out, result.model)
    curve = ", ".join(f"{v:.4f}" for v in result.loss_curve)
    print(f"trained {settings['variant']} for {result.global_step} steps; "
          f"epoch losses: {curve}")
    print(f"model written to {args.out}")
    return 0


def _parse_breakdown(spec: str) -> list[str]:
    parts = [p.strip() for p in spec.split(",") if p.strip()]
    bad = [p for p in parts if p not in ("genre", "pos")]
    if bad:
        raise UsageError(f"unknown breakdown group(s) {bad}; choose from genre, pos")
    return parts


def cmd_eval(args) -> int:
    _require_file(args.checkpoint, "checkpoint")
    _require_file(args.vocab, "vocabulary")
    _require_file(args.corpus, "corpus")
    groups = _parse_breakdown(args.breakdown)
    vocab = Vocab.load(args.vocab)
    model = load_model(args.checkpoint, vocab)
    if args.threshold is not None:
        model.cfg = dataclasses.replace(model.cfg, threshold=args.threshold)
    instances = _load_instances(args.corpus)
    if args.zero_shot:
        report = zero_shot_eval(model, vocab, instances)
    else:
        report = evaluate_model(model, instances)

    print(render_table({"overall": report.overall}))
    if "genre" in groups and report.by_genre:
        print()
        print(render_table(report.by_genre, title="by genre"))
    if "pos" in groups and report.by_pos:
        print()
        print(render_table(report.by_pos, title="by part of speech"))
    if report.skipped_genre:
        print(f"\nnote: {report.skipped_genre} instances without genre were "
              f"excluded from the genre table")
    for key, value in sorted(report.flags.items()):
        print(f"{key}: {value:.4f}")

    if args.report:
        config = {
            "checkpoint": str(args.checkpoint),
            "corpus": str(args.corpus),
            "threshold": model.cfg.threshold,
            "variant": model.cfg.variant.value,
        }
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(report_to_json(report, config, dataset_sha256(args.corpus)))
        print(f"report written to {args.report}")
    return 0


def cmd_predict(args) -> int:
    _require_file(args.checkpoint, "checkpoint")
    _require_file(args.vocab, "vocabulary")
    vocab = Vocab.load(args.vocab)
    model = load_model(args.checkpoint, vocab)
    tokens = tuple(args.sentence.split())
    if not 0 <= args.target_index < len(tokens):
        raise UsageError(
            f"--target-index {args.target_index} outside the sentence "
            f"({len(tokens)} tokens)"
        )
    inst = Instance(
        sentence_id="cli", tokens=tokens, target_index=args.target_index,
        label=0.0, pos_tag=args.pos_tag,
    )
    pred = model.predict(inst)
    print(json.dumps({
        "target": inst.target_word,
        "score": round(pred.score, 6),
        "label": pred.label,
        "reading": "metaphoric" if pred.label else "literal",
    }, sort_keys=True))
    return 0


def cmd_ablate(args) -> int:
    settings = resolve_settings(args)
    _require_file(args.corpus, "corpus")
    _require_file(args.eval_corpus, "evaluation corpus")
    _require_file(args.vocab, "vocabulary")
    vocab = Vocab.load(args.vocab)
    train_set = _load_instances(args.corpus)
    eval_set = _load_instances(args.eval_corpus)
    os.makedirs(args.out_dir, exist_ok=True)
    sha = dataset_sha256(args.eval_corpus)
    train_cfg = train_config_from(settings)

    rows = {}
    for variant in Variant:
        run = dict(settings, variant=variant.value)
        model_cfg = model_config_from(run, vocab)
        result = train_single(model_cfg, vocab, train_set, train_cfg, seed=settings["seed"])
        report = evaluate_model(result.model, eval_set)
        rows[variant.value] = report.overall
        out_path = os.path.join(args.out_dir, f"{variant.value}.json")
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(report_to_json(report, settings_for_report(run), sha))
    print(render_table(rows, title="variant comparison"))
    print(f"\nfive reports written to {args.out_dir}")
    return 0


def cmd_cv(args) -> int:
    settings = resolve_settings(args)
    _require_file(args.corpus, "corpus")
    _require_file(args.eval_corpus, "evaluation corpus")
    _require_file(args.vocab, "vocabulary")
    vocab = Vocab.load(args.vocab)
    train_set = _load_instances(args.corpus)
    eval_set = _load_instances(args.eval_corpus)
    model_cfg = model_config_from(settings, vocab)
    train_cfg = train_config_from(settings)
    ensemble, results = bagging_cv_train(
        model_cfg, vocab, train_set, k=settings["k"], cfg=train_cfg, seed=settings["seed"],
    )
    report = evaluate_model(ensemble, eval_set)
    print(render_table({"ensemble": report.overall}, title=f"{settings['k']}-fold bagging"))
    if args.report:
        config = settings_for_report(settings)
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(report_to_json(report, config, dataset_sha256(args.eval_corpus)))
        print(f"report written to {args.report}")
    return 0


# -- parser ----------------------------------------------------------------


def _add_settings_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="file of key = value lines")
    p.add_argument("--variant", choices=[v.value for v in Variant])
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--peak-lr", dest="peak_lr", type=float)
    p.add_argument("--pos-weight", dest="pos_weight", type=float)
    p.add_argument("--max-len", dest="max_len", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--num-layers", dest="num_layers", type=int)
    p.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    p.add_argument("--dropout", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="melbert",
        description="metaphor detection with late-interaction encoders",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tokenizer-train", help="learn a subword vocabulary from a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab-size", dest="vocab_size", type=int, default=DEFAULTS["vocab_size"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tokenizer_train)

    p = sub.add_parser("train", help="train one model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--out", required=True, help="model checkpoint to write")
    p.add_argument("--log", help="JSON-lines step log")
    p.add_argument("--save-train-state", dest="save_train_state",
                   help="resumable training checkpoint, written every epoch")
    p.add_argument("--resume", help="continue from a training checkpoint")
    p.add_argument("--dry-run", dest="dry_run", action="store_true",
                   help="validate settings and corpus, then stop")
    _add_settings_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint against a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--report", help="write the full report as JSON")
    p.add_argument("--breakdown", default="genre,pos")
    p.add_argument("--threshold", type=float)
    p.add_argument("--zero-shot", dest="zero_shot", action="store_true",
                   help="also report unknown-token exposure")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="score one sentence")
    p.add_argument("--vocab", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--sentence", required=True, help="space-separated tokens")
    p.add_argument("--target-index", dest="target_index", type=int, required=True)
    p.add_argument("--pos-tag", dest="pos_tag", default="VERB")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("ablate", help="train and evaluate all five variants")
    p.add_argument("--corpus", required=True)
    p.add_argument("--eval-corpus", dest="eval_corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    _add_settings_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("cv", help="bagged k-fold cross-validation ensemble")
    p.add_argument("--corpus", required=True)
    p.add_argument("--eval-corpus", dest="eval_corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--report", help="write the ensemble report as JSON")
    _add_settings_flags(p)
    p.set_defaults(func=cmd_cv)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2
    except ConfigError as e:
        # bad settings are operator mistakes, same class as bad flags
        print(f"usage error: {e}", file=sys.stderr)
        return 2
    except MelbertError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

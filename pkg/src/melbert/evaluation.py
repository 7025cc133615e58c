"""Classification metrics, grouped breakdowns, significance and
correlation statistics, and report rendering.

Every statistic here is computed from its textbook formula; scipy is
used only for distribution lookups (the t CDF) and average ranks, so
the tests can cross-check each value against an independent route.
Zero-denominator cases never raise: the metric is reported as 0.0 and
the condition is recorded in the report's flags.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .bpe import MARKER, UNK_ID, Vocab
from .data import Instance
from .errors import ContractError
from .model import Prediction


@dataclass
class MetricsReport:
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f1: float
    n: int
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn,
            "precision": self.precision, "recall": self.recall, "f1": self.f1,
            "n": self.n, "flags": list(self.flags),
        }


def score_predictions(predicted: list[int], gold: list[int]) -> MetricsReport:
    """Precision/recall/F1 for the positive (metaphor) class."""
    if len(predicted) != len(gold):
        raise ContractError(f"{len(predicted)} predictions for {len(gold)} gold labels")
    if not predicted:
        raise ContractError("cannot score an empty prediction list")
    p = np.asarray(predicted)
    g = np.asarray(gold)
    if not (np.isin(p, (0, 1)).all() and np.isin(g, (0, 1)).all()):
        raise ContractError("labels must be 0 or 1")
    tp = int(((p == 1) & (g == 1)).sum())
    fp = int(((p == 1) & (g == 0)).sum())
    fn = int(((p == 0) & (g == 1)).sum())
    tn = int(((p == 0) & (g == 0)).sum())
    flags = []
    if tp + fp == 0:
        precision = 0.0
        flags.append("no_positive_predictions")
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall = 0.0
        flags.append("no_positive_gold")
    else:
        recall = tp / (tp + fn)
    if precision + recall == 0.0:
        f1 = 0.0
        flags.append("f1_undefined")
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return MetricsReport(tp, fp, fn, tn, precision, recall, f1, n=len(predicted), flags=flags)


def breakdown(
    predicted: list[int], gold: list[int], keys: list
) -> tuple[dict[str, MetricsReport], int]:
    """Per-group metrics; instances with a missing key are counted, not scored."""
    if not len(predicted) == len(gold) == len(keys):
        raise ContractError("predictions, gold labels, and group keys must align")
    groups: dict[str, tuple[list[int], list[int]]] = {}
    skipped = 0
    for p, g, k in zip(predicted, gold, keys):
        if k is None:
            skipped += 1
            continue
        groups.setdefault(str(k), ([], []))
        groups[str(k)][0].append(p)
        groups[str(k)][1].append(g)
    reports = {k: score_predictions(ps, gs) for k, (ps, gs) in sorted(groups.items())}
    return reports, skipped


@dataclass
class EvalReport:
    overall: MetricsReport
    by_genre: dict[str, MetricsReport]
    by_pos: dict[str, MetricsReport]
    skipped_genre: int = 0
    flags: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "overall": self.overall.to_dict(),
            "by_genre": {k: v.to_dict() for k, v in self.by_genre.items()},
            "by_pos": {k: v.to_dict() for k, v in self.by_pos.items()},
            "skipped_genre": self.skipped_genre,
            "flags": dict(self.flags),
        }


def evaluate_model(model, instances: list[Instance]) -> EvalReport:
    """Run predictions and aggregate overall and per-group metrics.

    Works for anything with a predict(instance) -> Prediction method,
    which covers both single models and CV ensembles.
    """
    if not instances:
        raise ContractError("cannot evaluate on an empty dataset")
    preds: list[Prediction] = [model.predict(inst) for inst in instances]
    labels = [p.label for p in preds]
    gold = [int(i.gold) for i in instances]
    overall = score_predictions(labels, gold)
    by_genre, skipped = breakdown(labels, gold, [i.genre for i in instances])
    by_pos, _ = breakdown(labels, gold, [i.pos_tag for i in instances])
    return EvalReport(overall=overall, by_genre=by_genre, by_pos=by_pos, skipped_genre=skipped)


@dataclass(frozen=True)
class TTestResult:
    statistic: float
    df: float
    p_value: float


def welch_ttest(a, b) -> TTestResult:
    """Two-sided Welch t-test for unequal variances.

    The statistic and Welch-Satterthwaite degrees of freedom come from
    the formulas directly; only the tail probability is looked up.
    Degenerate zero-variance samples short-circuit: equal means give
    p = 1, unequal means p = 0.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ContractError("each sample needs at least two observations")
    va = a.var(ddof=1) / a.size
    vb = b.var(ddof=1) / b.size
    if va + vb == 0.0:
        same = float(a.mean()) == float(b.mean())
        return TTestResult(statistic=0.0 if same else np.inf, df=float(a.size + b.size - 2),
                           p_value=1.0 if same else 0.0)
    t = (a.mean() - b.mean()) / np.sqrt(va + vb)
    df = (va + vb) ** 2 / (va ** 2 / (a.size - 1) + vb ** 2 / (b.size - 1))
    p = 2.0 * stats.t.sf(abs(t), df)
    return TTestResult(statistic=float(t), df=float(df), p_value=float(p))


@dataclass
class RegressionReport:
    pearson: float
    spearman: float
    n: int
    flags: list[str] = field(default_factory=list)


def regression_scores(predicted, target) -> RegressionReport:
    """Pearson and Spearman correlation for graded novelty scores.

    A constant series has no defined correlation; both values are
    reported as 0.0 with a flag instead of dividing by zero.
    """
    x = np.asarray(predicted, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ContractError("predicted and target must be equal-length vectors")
    if x.size < 3:
        raise ContractError("correlation needs at least three pairs")
    flags = []
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        return RegressionReport(0.0, 0.0, n=x.size, flags=["constant_series"])

    def pearson(u, v):
        uc = u - u.mean()
        vc = v - v.mean()
        return float((uc * vc).sum() / np.sqrt((uc * uc).sum() * (vc * vc).sum()))

    rx = stats.rankdata(x)  # average ranks for ties
    ry = stats.rankdata(y)
    if np.ptp(rx) == 0.0 or np.ptp(ry) == 0.0:
        # ties can flatten the ranks even when the raw series varies
        return RegressionReport(pearson(x, y), 0.0, n=x.size, flags=["constant_ranks"])
    return RegressionReport(pearson(x, y), pearson(rx, ry), n=x.size, flags=flags)


def zero_shot_eval(model, vocab: Vocab, instances: list[Instance]) -> EvalReport:
    """Evaluate on a corpus the model never trained on, tracking UNK rates.

    Targets that dissolve entirely into [UNK] make the interaction head
    blind, so the report carries both the instance-level and token-level
    unknown rates for interpretation.
    """
    report = evaluate_model(model, instances)
    unk_targets = 0
    unk_tokens = 0
    total_tokens = 0
    for inst in instances:
        ids = []
        for pos, word in enumerate(inst.tokens):
            ids.extend(vocab.encode_word(word, initial=pos == 0))
        total_tokens += len(ids)
        unk_tokens += sum(1 for i in ids if i == UNK_ID)
        tgt = vocab.encode_word(inst.target_word, initial=inst.target_index == 0)
        # the word-start sentinel is always known; the question is whether
        # any actual content survives
        content = [i for i in tgt if vocab.id_to_token.get(i) != MARKER]
        if content and all(i == UNK_ID for i in content):
            unk_targets += 1
    report.flags["unk_target_rate"] = unk_targets / len(instances)
    report.flags["unk_token_rate"] = unk_tokens / total_tokens if total_tokens else 0.0
    return report


def render_table(rows: dict[str, MetricsReport], title: str = "") -> str:
    """Fixed-width table with percentages to one decimal."""
    lines = []
    if title:
        lines.append(title)
    name_w = max([len(k) for k in rows] + [len("group")])
    lines.append(f"{'group':<{name_w}}  {'n':>6}  {'prec':>6}  {'rec':>6}  {'f1':>6}")
    for name, r in rows.items():
        lines.append(
            f"{name:<{name_w}}  {r.n:>6}  {100 * r.precision:>6.1f}  "
            f"{100 * r.recall:>6.1f}  {100 * r.f1:>6.1f}"
        )
    return "\n".join(lines)


def report_to_json(report: EvalReport, config: dict, dataset_sha256: str,
                   seeds: dict | None = None) -> str:
    """Serialize a full evaluation with its provenance for later diffing."""
    doc = {
        "config": config,
        "dataset_sha256": dataset_sha256,
        "overall": report.overall.to_dict(),
        "by_genre": {k: v.to_dict() for k, v in report.by_genre.items()},
        "by_pos": {k: v.to_dict() for k, v in report.by_pos.items()},
        "seeds": seeds or {},
        "flags": dict(report.flags),
        "skipped_genre": report.skipped_genre,
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def seed_summary(f1_values: list[float]) -> dict:
    """Mean and sample standard deviation across per-seed F1 scores."""
    if not f1_values:
        raise ContractError("need at least one seed result")
    arr = np.asarray(f1_values, dtype=np.float64)
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return {"per_seed_f1": [float(v) for v in arr], "mean_f1": float(arr.mean()), "std_f1": sd}

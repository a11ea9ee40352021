"""Tagging accuracy under gold segmentation, plus ablation summaries.

With segmentation fixed, the shared-task aligned F1 collapses to plain
token accuracy, so this scorer reports accuracy and calls it that. FEATS
comparisons run on canonical bundle strings, making them insensitive to
pair order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .data import Sentence, morph_bundle_tag


class AlignmentError(ValueError):
    """Gold and predicted corpora do not share the same segmentation."""


@dataclass
class EvalReport:
    task: str
    total: int
    correct: int
    confusion: dict[tuple[str, str], int] = field(default_factory=dict)

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else 0.0

    def lines(self) -> list[str]:
        out = [f"task: {self.task}",
               f"tokens: {self.total}",
               f"correct: {self.correct}",
               f"accuracy: {self.accuracy:.4f}"]
        errors = sorted(((n, g, p) for (g, p), n in self.confusion.items()
                         if g != p), reverse=True)
        if errors:
            out.append("top errors (count gold -> predicted):")
            for n, g, p in errors[:10]:
                out.append(f"  {n}  {g} -> {p}")
        return out


def _tags_of(item, task: str) -> list[str]:
    if isinstance(item, Sentence):
        return item.gold_tags(task)
    return list(item)


def score(gold_sentences: list[Sentence], predictions, task: str) -> EvalReport:
    """Token accuracy of predictions against gold, exact string match on the
    task column. ``predictions`` may be Sentences (a tagged file) or plain
    per-sentence tag-string lists."""
    if len(gold_sentences) != len(predictions):
        raise AlignmentError(
            f"{len(gold_sentences)} gold sentences vs {len(predictions)} "
            f"predicted")
    total = correct = 0
    confusion: dict[tuple[str, str], int] = {}
    for i, (g_sent, p_item) in enumerate(zip(gold_sentences, predictions)):
        g_tags = g_sent.gold_tags(task)
        p_tags = _tags_of(p_item, task)
        if len(g_tags) != len(p_tags):
            raise AlignmentError(
                f"sentence {i + 1}: {len(g_tags)} gold tokens vs "
                f"{len(p_tags)} predicted (segmentation must match)")
        if task == "feats":
            g_tags = [morph_bundle_tag(t) for t in g_tags]
            p_tags = [morph_bundle_tag(t) for t in p_tags]
        for g, p in zip(g_tags, p_tags):
            total += 1
            if g == p:
                correct += 1
            confusion[(g, p)] = confusion.get((g, p), 0) + 1
    return EvalReport(task=task, total=total, correct=correct,
                      confusion=confusion)


# ---------------------------------------------------------------------------
# ablation summaries

def mean_stdev(values) -> tuple[float, float]:
    """Mean and sample standard deviation (n-1); a single value has stdev 0."""
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise ValueError("no values to summarize")
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), sd


@dataclass
class AblationRow:
    config: str
    n_seeds: int
    mean: float
    stdev: float
    values: list[float]


def ablation_report(results: dict[str, list[float]]) -> list[AblationRow]:
    """Per-configuration mean/stdev over seeds, in insertion order."""
    rows = []
    for config, values in results.items():
        if not values:
            raise ValueError(f"configuration {config!r} has no results")
        m, sd = mean_stdev(values)
        rows.append(AblationRow(config=config, n_seeds=len(values),
                                mean=m, stdev=sd, values=list(values)))
    return rows


def render_table(rows: list[AblationRow]) -> str:
    width = max(len(r.config) for r in rows)
    lines = [f"{'config'.ljust(width)}  seeds    mean   stdev"]
    for r in rows:
        lines.append(f"{r.config.ljust(width)}  {r.n_seeds:5d}  "
                     f"{100 * r.mean:6.2f}  {100 * r.stdev:6.2f}")
    return "\n".join(lines)


def render_csv(rows: list[AblationRow], task: str) -> str:
    lines = ["config,seed,task,accuracy"]
    for r in rows:
        for seed, v in enumerate(r.values):
            lines.append(f"{r.config},{seed},{task},{v:.6f}")
    return "\n".join(lines) + "\n"


def paired_t(xs, ys) -> tuple[float, float]:
    """Two-tailed paired t statistic and p-value for matched samples."""
    xs, ys = list(xs), list(ys)
    if len(xs) != len(ys):
        raise ValueError(f"paired test needs equal lengths, "
                         f"got {len(xs)} and {len(ys)}")
    if len(xs) < 2:
        raise ValueError("paired test needs at least 2 pairs")
    t, p = stats.ttest_rel(xs, ys)
    return float(t), float(p)

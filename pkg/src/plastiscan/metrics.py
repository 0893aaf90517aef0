"""Two-class accuracy assessment with explicit not-a-value handling.

Plastic is the positive class.  Any ratio whose denominator is zero becomes a
:class:`NotAValue` carrying the reason; NA renders as ``"NA"`` in CSV and
text output and never silently collapses to 0.

McNemar's test is the continuity-corrected form on the discordant counts
``b = fp`` and ``c = fn``: ``chi2 = (|b - c| - 1)^2 / (b + c)`` against a
1-degree chi-square, with p = 1 when b + c = 0.  Cohen's kappa uses the
standard two-rater expected agreement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import (
    BadLabelError,
    ClassSetMismatchError,
    EmptyInputError,
    LengthMismatchError,
)
from .spectra import LABEL_NAMES, PLASTIC, WATER

__all__ = [
    "NotAValue",
    "MetricValue",
    "ConfusionMatrix",
    "MetricsReport",
    "ClassMetrics",
    "ClassReport",
    "AggregateReport",
    "METRIC_KEYS",
    "confusion",
    "evaluate",
    "mcnemar_p",
    "chi2_sf_1dof",
    "class_report",
    "average_reports",
    "metrics_rows",
    "format_value",
    "render_metrics_text",
    "render_aggregate_text",
]


@dataclass(frozen=True)
class NotAValue:
    """Marker for an undefined metric, with the reason it is undefined."""

    reason: str

    def __repr__(self) -> str:
        return f"NA({self.reason!r})"


MetricValue = Union[float, NotAValue]


def is_na(value: MetricValue) -> bool:
    return isinstance(value, NotAValue)


def format_value(value: MetricValue, decimals: int | None = None) -> str:
    """Render a metric: full shortest repr by default, fixed decimals if asked."""
    if is_na(value):
        return "NA"
    return repr(float(value)) if decimals is None else f"{value:.{decimals}f}"


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with plastic positive: tp/fn split plastic truth, fp/tn water."""

    tp: int
    fn: int
    fp: int
    tn: int

    def __post_init__(self) -> None:
        for name in ("tp", "fn", "fp", "tn"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 0:
                raise ValueError(f"{name} must be a non-negative int, got {value!r}")
        if self.total == 0:
            raise EmptyInputError("confusion matrix has no samples")

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn


def confusion(y_true: Sequence[int], y_pred: Sequence[int]) -> ConfusionMatrix:
    """Tally a confusion matrix from paired label sequences."""
    t = np.asarray(y_true).reshape(-1)
    p = np.asarray(y_pred).reshape(-1)
    if t.size != p.size:
        raise LengthMismatchError(f"y_true has {t.size} labels, y_pred has {p.size}")
    if t.size == 0:
        raise EmptyInputError("no labels to tally")
    for arr, name in ((t, "y_true"), (p, "y_pred")):
        bad = set(np.unique(arr).tolist()) - set(LABEL_NAMES)
        if bad:
            raise BadLabelError(f"{name} contains unknown label(s) {sorted(bad)}")
    return ConfusionMatrix(
        tp=int(np.sum((t == PLASTIC) & (p == PLASTIC))),
        fn=int(np.sum((t == PLASTIC) & (p == WATER))),
        fp=int(np.sum((t == WATER) & (p == PLASTIC))),
        tn=int(np.sum((t == WATER) & (p == WATER))),
    )


def _ratio(num: int, den: int, reason: str) -> MetricValue:
    return NotAValue(reason) if den == 0 else num / den


def chi2_sf_1dof(x: float) -> float:
    """Upper tail P(X >= x) of the 1-degree chi-square distribution."""
    if x < 0:
        raise ValueError(f"chi-square statistic must be >= 0, got {x}")
    return math.erfc(math.sqrt(x / 2.0))


def mcnemar_p(cm: ConfusionMatrix) -> float:
    """Continuity-corrected McNemar p on the discordant counts (b=fp, c=fn)."""
    b, c = cm.fp, cm.fn
    if b + c == 0:
        return 1.0
    chi2 = (abs(b - c) - 1.0) ** 2 / (b + c)
    return chi2_sf_1dof(chi2)


@dataclass(frozen=True)
class MetricsReport:
    """The nine headline metrics for one evaluation."""

    accuracy: MetricValue
    kappa: MetricValue
    mcnemar_p: MetricValue
    sensitivity: MetricValue
    specificity: MetricValue
    precision: MetricValue
    recall: MetricValue
    f1: MetricValue
    balanced_accuracy: MetricValue


METRIC_KEYS: tuple[str, ...] = (
    "accuracy", "kappa", "mcnemar_p", "sensitivity", "specificity",
    "precision", "recall", "f1", "balanced_accuracy",
)

_METRIC_LABELS: Mapping[str, str] = {
    "accuracy": "Accuracy",
    "kappa": "Kappa",
    "mcnemar_p": "McNemar p-value",
    "sensitivity": "Sensitivity",
    "specificity": "Specificity",
    "precision": "Precision",
    "recall": "Recall",
    "f1": "F1",
    "balanced_accuracy": "Balanced accuracy",
}


def _f1_from(precision: MetricValue, recall: MetricValue) -> MetricValue:
    if is_na(precision) or is_na(recall):
        return NotAValue("precision or recall is undefined")
    if precision + recall == 0.0:
        return NotAValue("precision and recall are both zero")
    return 2.0 * precision * recall / (precision + recall)


def evaluate(cm: ConfusionMatrix) -> MetricsReport:
    """All nine metrics from a confusion matrix; zero denominators give NA."""
    total = cm.total
    accuracy = (cm.tp + cm.tn) / total
    sensitivity = _ratio(cm.tp, cm.tp + cm.fn, "no plastic rows in truth")
    specificity = _ratio(cm.tn, cm.tn + cm.fp, "no water rows in truth")
    precision = _ratio(cm.tp, cm.tp + cm.fp, "no plastic predictions")
    f1 = _f1_from(precision, sensitivity)
    if is_na(sensitivity) or is_na(specificity):
        balanced: MetricValue = NotAValue("sensitivity or specificity is undefined")
    else:
        balanced = (sensitivity + specificity) / 2.0
    p_truth_plastic = (cm.tp + cm.fn) / total
    p_pred_plastic = (cm.tp + cm.fp) / total
    p_expected = (
        p_truth_plastic * p_pred_plastic
        + (1.0 - p_truth_plastic) * (1.0 - p_pred_plastic)
    )
    if 1.0 - p_expected <= 0.0:
        kappa: MetricValue = NotAValue("expected chance agreement is exact")
    else:
        kappa = (accuracy - p_expected) / (1.0 - p_expected)
    return MetricsReport(
        accuracy=accuracy,
        kappa=kappa,
        mcnemar_p=mcnemar_p(cm),
        sensitivity=sensitivity,
        specificity=specificity,
        precision=precision,
        recall=sensitivity,
        f1=f1,
        balanced_accuracy=balanced,
    )


def metrics_rows(report: MetricsReport) -> list[tuple[str, MetricValue]]:
    """(key, value) pairs in canonical metric order."""
    return [(key, getattr(report, key)) for key in METRIC_KEYS]


def render_metrics_text(report: MetricsReport, title: str | None = None) -> str:
    """Fixed three-decimal text block, one labelled metric per line."""
    lines = [title] if title else []
    width = max(len(label) for label in _METRIC_LABELS.values())
    for key, value in metrics_rows(report):
        lines.append(f"{_METRIC_LABELS[key]:<{width}}  {format_value(value, 3)}")
    return "\n".join(lines) + "\n"


# --- per-class reports and averaging ----------------------------------------

@dataclass(frozen=True)
class ClassMetrics:
    precision: MetricValue
    recall: MetricValue
    f1: MetricValue
    support: float  # truth count (mean count after averaging)


@dataclass(frozen=True)
class ClassReport:
    """Per-class precision/recall/F1/support plus overall accuracy."""

    per_class: Mapping[str, ClassMetrics]
    accuracy: MetricValue

    def __post_init__(self) -> None:
        object.__setattr__(self, "per_class", dict(self.per_class))


def class_report(cm: ConfusionMatrix) -> ClassReport:
    """Both classes' rows; the water row swaps positive/negative roles."""
    plastic_precision = _ratio(cm.tp, cm.tp + cm.fp, "no plastic predictions")
    plastic_recall = _ratio(cm.tp, cm.tp + cm.fn, "no plastic rows in truth")
    water_precision = _ratio(cm.tn, cm.tn + cm.fn, "no water predictions")
    water_recall = _ratio(cm.tn, cm.tn + cm.fp, "no water rows in truth")
    return ClassReport(
        per_class={
            "plastic": ClassMetrics(
                precision=plastic_precision,
                recall=plastic_recall,
                f1=_f1_from(plastic_precision, plastic_recall),
                support=float(cm.tp + cm.fn),
            ),
            "water": ClassMetrics(
                precision=water_precision,
                recall=water_recall,
                f1=_f1_from(water_precision, water_recall),
                support=float(cm.tn + cm.fp),
            ),
        },
        accuracy=(cm.tp + cm.tn) / cm.total,
    )


@dataclass(frozen=True)
class AggregateReport:
    """Mean of several class reports plus macro / weighted summary rows.

    Aggregation averages the constituent reports' metrics and supports
    directly (it does not re-pool the underlying counts); macro rows average
    the two class rows, weighted rows weight them by averaged support.
    """

    per_class: Mapping[str, ClassMetrics]
    accuracy: MetricValue
    macro: ClassMetrics
    weighted: ClassMetrics
    n_reports: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "per_class", dict(self.per_class))


def _mean_values(values: Sequence[MetricValue]) -> MetricValue:
    undefined = sum(1 for v in values if is_na(v))
    if undefined:
        return NotAValue(f"undefined in {undefined} of {len(values)} inputs")
    return float(np.mean([float(v) for v in values]))


def _weighted_mean(values: Sequence[MetricValue], weights: Sequence[float]) -> MetricValue:
    undefined = sum(1 for v in values if is_na(v))
    if undefined:
        return NotAValue(f"undefined in {undefined} of {len(values)} inputs")
    total = float(np.sum(weights))
    if total == 0.0:
        return NotAValue("total support is zero")
    return float(np.dot([float(v) for v in values], weights) / total)


def average_reports(reports: Sequence[ClassReport]) -> AggregateReport:
    """Average reports from several sites/dates into one summary table."""
    if not reports:
        raise EmptyInputError("no reports to average")
    classes = tuple(reports[0].per_class)
    for report in reports[1:]:
        if tuple(report.per_class) != classes:
            raise ClassSetMismatchError(
                f"report classes {tuple(report.per_class)} != {classes}"
            )
    per_class: dict[str, ClassMetrics] = {}
    for cls in classes:
        rows = [report.per_class[cls] for report in reports]
        per_class[cls] = ClassMetrics(
            precision=_mean_values([r.precision for r in rows]),
            recall=_mean_values([r.recall for r in rows]),
            f1=_mean_values([r.f1 for r in rows]),
            support=float(np.mean([r.support for r in rows])),
        )
    supports = [per_class[cls].support for cls in classes]
    total_support = float(np.sum(supports))
    macro = ClassMetrics(
        precision=_mean_values([per_class[c].precision for c in classes]),
        recall=_mean_values([per_class[c].recall for c in classes]),
        f1=_mean_values([per_class[c].f1 for c in classes]),
        support=total_support,
    )
    weighted = ClassMetrics(
        precision=_weighted_mean([per_class[c].precision for c in classes], supports),
        recall=_weighted_mean([per_class[c].recall for c in classes], supports),
        f1=_weighted_mean([per_class[c].f1 for c in classes], supports),
        support=total_support,
    )
    return AggregateReport(
        per_class=per_class,
        accuracy=_mean_values([r.accuracy for r in reports]),
        macro=macro,
        weighted=weighted,
        n_reports=len(reports),
    )


def render_aggregate_text(agg: AggregateReport) -> str:
    """Two-decimal summary table: class rows, accuracy, macro, weighted."""
    header = f"{'':<14}{'precision':>10}{'recall':>10}{'f1-score':>10}{'support':>10}"
    lines = [header]

    def row(name: str, m: ClassMetrics) -> str:
        return (
            f"{name:<14}"
            f"{format_value(m.precision, 2):>10}"
            f"{format_value(m.recall, 2):>10}"
            f"{format_value(m.f1, 2):>10}"
            f"{m.support:>10.2f}"
        )

    for cls, m in agg.per_class.items():
        lines.append(row(cls, m))
    lines.append(
        f"{'accuracy':<14}{'':>10}{'':>10}"
        f"{format_value(agg.accuracy, 2):>10}{agg.macro.support:>10.2f}"
    )
    lines.append(row("macro avg", agg.macro))
    lines.append(row("weighted avg", agg.weighted))
    return "\n".join(lines) + "\n"

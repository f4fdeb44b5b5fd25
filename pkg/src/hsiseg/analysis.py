"""Score aggregation, class-neighborhood structure, and method ranking."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .cube import LabelMap, SegmentationMask
from .errors import ConfigurationError, StructuralError
from .metrics import MetricRecord
from .ood import parse_synthesized_id
from .rng import RngStream

#: Matrix cells below this are blanked when pretty-printing (data keeps all).
NEIGHBORHOOD_DISPLAY_FLOOR = 0.001


# --- hierarchical aggregation --------------------------------------------------


@dataclass(frozen=True)
class SubjectScore:
    metric: str
    class_name: str
    subject_id: str
    value: float
    images: int


@dataclass(frozen=True)
class ClassScore:
    metric: str
    class_name: str
    value: float
    subjects: int


@dataclass(frozen=True)
class OverallScore:
    metric: str
    mean: float
    sd: float
    classes: int


@dataclass
class AggregationResult:
    """Image -> subject -> class -> overall means, each level carrying its n."""

    per_subject: list[SubjectScore]
    per_class: list[ClassScore]
    overall: list[OverallScore]

    def class_mean(self, metric: str, class_name: str) -> float:
        for s in self.per_class:
            if s.metric == metric and s.class_name == class_name:
                return s.value
        raise KeyError((metric, class_name))

    def subject_values(self, metric: str) -> list[tuple[str, str, float]]:
        """(subject, class, value) triples — the resampling unit for ranking."""
        return [(s.subject_id, s.class_name, s.value) for s in self.per_subject if s.metric == metric]


def aggregate_hierarchical(records: Iterable[MetricRecord]) -> AggregationResult:
    """Mean per (metric, class, subject) over images, then per class over
    subjects, then mean/SD (population) over class means.

    A subject contributes to a class only through images that HAVE a record
    for it; classes a subject never saw don't drag its mean down.
    """
    by_subject: dict[tuple[str, str, str], list[float]] = {}
    for r in records:
        by_subject.setdefault((r.metric, r.class_name, r.subject_id), []).append(r.value)

    per_subject = [
        SubjectScore(metric, class_name, subject, float(np.mean(values)), len(values))
        for (metric, class_name, subject), values in sorted(by_subject.items())
    ]

    by_class: dict[tuple[str, str], list[float]] = {}
    for s in per_subject:
        by_class.setdefault((s.metric, s.class_name), []).append(s.value)
    per_class = [
        ClassScore(metric, class_name, float(np.mean(values)), len(values))
        for (metric, class_name), values in sorted(by_class.items())
    ]

    by_metric: dict[str, list[float]] = {}
    for c in per_class:
        by_metric.setdefault(c.metric, []).append(c.value)
    overall = [
        OverallScore(metric, float(np.mean(values)), float(np.std(values)), len(values))
        for metric, values in sorted(by_metric.items())
    ]
    return AggregationResult(per_subject, per_class, overall)


def aggregate_removal(records: Iterable[MetricRecord]) -> list[MetricRecord]:
    """Collapse removal-scenario records to their per-image worst case.

    Removal scores ask "which single missing class hurts this class most?":
    per (source image, metric, observed class), keep the minimum over the
    removed classes. Ties resolve to the smallest removed-class name. Records
    whose image_id doesn't parse as synthesized pass through unchanged.
    """
    groups: dict[tuple[str, str, str], list[tuple[MetricRecord, str]]] = {}
    passthrough: list[MetricRecord] = []
    for r in records:
        parsed = parse_synthesized_id(r.image_id)
        if parsed is None:
            passthrough.append(r)
            continue
        source_id, _, removed_class = parsed
        groups.setdefault((source_id, r.metric, r.class_name), []).append((r, removed_class))

    out = list(passthrough)
    for (source_id, _, _), members in sorted(groups.items()):
        record, _ = min(members, key=lambda pair: (pair[0].value, pair[1]))
        out.append(
            MetricRecord(
                image_id=source_id,
                subject_id=record.subject_id,
                scenario=record.scenario,
                class_name=record.class_name,
                metric=record.metric,
                value=record.value,
                support=record.support,
            )
        )
    return out


# --- class neighborhood --------------------------------------------------------


@dataclass
class NeighborhoodMatrix:
    """Column j = distribution of class j's cross-class 4-adjacencies.

    ``values[i, j]`` is the share of class j's boundary contact made with
    class i, aggregated image -> subject -> overall. Columns of classes that
    never touch another class are all-zero with ``column_support`` 0.
    """

    values: np.ndarray
    class_names: list[str]
    column_support: np.ndarray

    def format_lines(self, floor: float = NEIGHBORHOOD_DISPLAY_FLOOR) -> list[str]:
        width = max((len(n) for n in self.class_names), default=4) + 1
        head = " " * width + "".join(f"{n:>{width}}" for n in self.class_names)
        lines = [head]
        for i, row_name in enumerate(self.class_names):
            cells = []
            for j in range(len(self.class_names)):
                v = self.values[i, j]
                cells.append(f"{v:>{width}.3f}" if v >= floor else " " * (width - 1) + ".")
            lines.append(f"{row_name:<{width}}" + "".join(cells))
        return lines


def _adjacency_counts(mask: SegmentationMask, k: int) -> np.ndarray:
    """Symmetric KxK counts of unordered valid cross-class 4-neighbor pairs."""
    labels = mask.labels
    valid = mask.valid
    counts = np.zeros((k, k), dtype=np.int64)
    for a, b, ok in (
        (labels[:, :-1], labels[:, 1:], valid[:, :-1] & valid[:, 1:]),
        (labels[:-1, :], labels[1:, :], valid[:-1, :] & valid[1:, :]),
    ):
        cross = ok & (a != b)
        ai = a[cross].astype(np.int64)
        bi = b[cross].astype(np.int64)
        np.add.at(counts, (ai, bi), 1)
        np.add.at(counts, (bi, ai), 1)
    return counts


def neighborhood_matrix(
    masks: Iterable[tuple[SegmentationMask, str]],
    labelmap: LabelMap,
) -> NeighborhoodMatrix:
    """Image-level column-normalized adjacency, averaged per subject then
    across subjects. Takes (mask, subject_id) pairs."""
    k = len(labelmap)
    subject_sums: dict[str, np.ndarray] = {}
    subject_counts: dict[str, np.ndarray] = {}
    seen_any = False
    for mask, subject_id in masks:
        seen_any = True
        present = mask.present_classes()
        if present.size and int(present.max()) >= k:
            raise StructuralError(
                f"mask for subject {subject_id!r} has labels outside the label map"
            )
        counts = _adjacency_counts(mask, k)
        totals = counts.sum(axis=0)
        defined = totals > 0
        proportions = np.zeros((k, k), dtype=np.float64)
        np.divide(counts, totals[None, :], out=proportions, where=defined[None, :])
        sums = subject_sums.setdefault(subject_id, np.zeros((k, k), dtype=np.float64))
        n = subject_counts.setdefault(subject_id, np.zeros(k, dtype=np.int64))
        sums[:, defined] += proportions[:, defined]
        n += defined
    if not seen_any:
        raise StructuralError("neighborhood_matrix needs at least one mask")

    overall = np.zeros((k, k), dtype=np.float64)
    support = np.zeros(k, dtype=np.int64)
    for subject_id in sorted(subject_sums):
        sums = subject_sums[subject_id]
        n = subject_counts[subject_id]
        defined = n > 0
        subject_matrix = np.zeros((k, k), dtype=np.float64)
        subject_matrix[:, defined] = sums[:, defined] / n[defined][None, :]
        overall[:, defined] += subject_matrix[:, defined]
        support += defined
    defined = support > 0
    overall[:, defined] /= support[defined][None, :]
    return NeighborhoodMatrix(overall, [c.name for c in labelmap.classes], support)


# --- method ranking ------------------------------------------------------------


@dataclass(frozen=True)
class MethodRanking:
    method: str
    mean_rank: float
    median_rank: float
    ci_low: float
    ci_high: float
    #: achieved rank -> relative frequency over the bootstrap samples
    rank_frequencies: dict[float, float] = field(default_factory=dict)


@dataclass
class RankingResult:
    methods: list[str]
    samples: int
    with_replacement: bool
    per_method: list[MethodRanking]


def bootstrap_ranking(
    per_method: Mapping[str, Sequence[tuple[str, str, float]]],
    *,
    samples: int = 1000,
    seed: int = 0,
    with_replacement: bool = True,
    higher_is_better: bool = True,
) -> RankingResult:
    """Rank methods by bootstrapped class-mean-of-subject-means scores.

    Input: method -> (subject, class, value) triples, one per (subject,
    class); every method must cover the same grid. Each bootstrap sample
    redraws, per class, that class's subjects (with replacement by default;
    without replacement degenerates to the identity resample, yielding the
    point-estimate ranking in every sample), using the SAME subject draw for
    all methods, then ranks methods by the mean over classes of resampled
    subject means. Ties share average ranks.
    """
    if samples < 1:
        raise ConfigurationError(f"samples must be >= 1, got {samples}")
    if not per_method:
        raise ConfigurationError("ranking needs at least one method")
    methods = list(per_method)

    grid: list[tuple[str, str]] | None = None
    scores: dict[str, dict[tuple[str, str], float]] = {}
    for method in methods:
        triples = per_method[method]
        keys = [(subject, class_name) for subject, class_name, _ in triples]
        if len(set(keys)) != len(keys):
            raise StructuralError(f"method {method!r}: duplicate (subject, class) scores")
        if grid is None:
            grid = sorted(keys)
        elif sorted(keys) != grid:
            raise StructuralError(
                f"method {method!r} is not evaluated on the same (subject, class) grid"
            )
        scores[method] = {(s, c): float(v) for s, c, v in triples}

    class_names = sorted({c for _, c in grid})
    subjects_of = {
        c: sorted({s for s, cc in grid if cc == c}) for c in class_names
    }
    # value tensors: per class, an (n_methods, n_subjects) block
    blocks = {
        c: np.array(
            [[scores[m][(s, c)] for s in subjects_of[c]] for m in methods], dtype=np.float64
        )
        for c in class_names
    }

    g = RngStream(seed).generator()
    n_methods = len(methods)
    ranks = np.empty((samples, n_methods), dtype=np.float64)
    for b in range(samples):
        agg = np.zeros(n_methods, dtype=np.float64)
        for c in class_names:
            n = len(subjects_of[c])
            idx = g.integers(0, n, size=n) if with_replacement else np.arange(n)
            agg += blocks[c][:, idx].mean(axis=1)
        agg /= len(class_names)
        ranks[b] = rankdata(-agg if higher_is_better else agg, method="average")

    per_method_out = []
    for m_index, method in enumerate(methods):
        column = ranks[:, m_index]
        achieved, counts = np.unique(column, return_counts=True)
        per_method_out.append(
            MethodRanking(
                method=method,
                mean_rank=float(column.mean()),
                median_rank=float(np.median(column)),
                ci_low=float(np.percentile(column, 2.5)),
                ci_high=float(np.percentile(column, 97.5)),
                rank_frequencies={float(r): float(n) / samples for r, n in zip(achieved, counts)},
            )
        )
    return RankingResult(methods, samples, with_replacement, per_method_out)

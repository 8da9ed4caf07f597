"""Ground truth, separation, PR curves, rank at max recall and winning numbers."""

from __future__ import annotations

import math
from collections import defaultdict
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .discovery import FdCandidate, ScoredCandidate, enumerate_candidates, score_all
from .errors import ContractError
from .measures import DEFAULT_SFI_ALPHA, MeasureId, score
from .relation import Relation, contingency

if TYPE_CHECKING:
    from .benchgen import LabeledRelation


@dataclass(frozen=True)
class GroundTruth:
    """The design FDs of one relation: perfect (satisfied) and approximate (the positives)."""

    relation_name: str
    perfect_fds: list[FdCandidate] = field(default_factory=list)
    approximate_fds: list[FdCandidate] = field(default_factory=list)

    def __post_init__(self) -> None:
        perfect = sorted(set(self.perfect_fds))
        approx = sorted(set(self.approximate_fds))
        both = set(perfect) & set(approx)
        if both:
            raise ContractError(f"FDs listed as both perfect and approximate: {sorted(map(str, both))}")
        object.__setattr__(self, "perfect_fds", perfect)
        object.__setattr__(self, "approximate_fds", approx)

    def check_against(self, R: Relation) -> None:
        for fd in self.perfect_fds + self.approximate_fds:
            missing = [a for a in fd.lhs + fd.rhs if a not in R.attributes]
            if missing:
                raise ContractError(f"{fd} references unknown attributes {missing} of {R.name!r}")

    def to_json(self) -> dict:
        return {
            "relation": self.relation_name,
            "perfect": [fd.to_json() for fd in self.perfect_fds],
            "approximate": [fd.to_json() for fd in self.approximate_fds],
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> GroundTruth:
        try:
            return cls(
                str(obj["relation"]),
                [FdCandidate.from_json(x) for x in obj.get("perfect", [])],
                [FdCandidate.from_json(x) for x in obj.get("approximate", [])],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ContractError(f"malformed ground truth: {exc}") from None


# Separation on labeled benchmarks


def designated_scores(
    bench: Sequence[LabeledRelation],
    m: MeasureId | str,
    sfi_alpha: float = DEFAULT_SFI_ALPHA,
) -> np.ndarray:
    """Score of each relation's designated candidate under ``m``."""
    m = MeasureId.parse(m)
    out = np.empty(len(bench))
    for i, lr in enumerate(bench):
        t = contingency(lr.relation, lr.candidate.lhs, lr.candidate.rhs)
        out[i] = score(m, t, sfi_alpha=sfi_alpha).value
    return out


def _split(bench: Sequence[LabeledRelation]) -> tuple[np.ndarray, np.ndarray]:
    labels = np.array([lr.label for lr in bench])
    fd, nonfd = labels == "fd", labels == "nonfd"
    if not fd.any() or not nonfd.any():
        raise ContractError("separation needs at least one fd and one nonfd relation")
    return fd, nonfd


def separation(
    m: MeasureId | str, bench: Sequence[LabeledRelation], sfi_alpha: float = DEFAULT_SFI_ALPHA
) -> float:
    """Mean score on the fd-labelled relations minus mean score on the nonfd ones."""
    fd, nonfd = _split(bench)
    s = designated_scores(bench, m, sfi_alpha)
    return float(s[fd].mean() - s[nonfd].mean())


@dataclass(frozen=True)
class SensitivityRow:
    measure: MeasureId
    step: int
    controlled_value: float
    mean_fd_score: float
    mean_nonfd_score: float

    @property
    def separation(self) -> float:
        return self.mean_fd_score - self.mean_nonfd_score

    def to_record(self) -> dict:
        return {
            "measure": self.measure.value,
            "step": self.step,
            "controlled_value": self.controlled_value,
            "mean_fd_score": self.mean_fd_score,
            "mean_nonfd_score": self.mean_nonfd_score,
            "separation": self.separation,
        }


def sensitivity_curve(
    bench: Sequence[LabeledRelation],
    measures: Sequence[MeasureId | str],
    sfi_alpha: float = DEFAULT_SFI_ALPHA,
) -> list[SensitivityRow]:
    """Per-step separation for every measure, ordered by (measure, step)."""
    steps = np.array([lr.step for lr in bench])
    values = {}
    for lr in bench:
        values.setdefault(lr.step, lr.controlled_value)
    rows = []
    for m in measures:
        m = MeasureId.parse(m)
        s = designated_scores(bench, m, sfi_alpha)
        for step in sorted(values):
            sel = [lr for lr, st in zip(bench, steps) if st == step]
            fd, nonfd = _split(sel)
            sub = s[steps == step]
            rows.append(
                SensitivityRow(m, int(step), float(values[step]), float(sub[fd].mean()), float(sub[nonfd].mean()))
            )
    return rows


# Ranking metrics


@dataclass(frozen=True)
class PrCurve:
    points: tuple[tuple[float, float], ...]
    auc: float


def _positive_keys(truth: Iterable[GroundTruth]) -> set[tuple[str, FdCandidate]]:
    return {(gt.relation_name, fd) for gt in truth for fd in gt.approximate_fds}


def pr_curve(scored: Iterable[ScoredCandidate], truth: Iterable[GroundTruth]) -> PrCurve:
    """Micro-pooled precision/recall over one global threshold sweep.

    Satisfied candidates are dropped. Candidates with equal score form a single
    threshold group; refused candidates (no score) form a final group below
    every score. AUC is the step sum of recall increments times precision.
    """
    positives = _positive_keys(truth)
    if not positives:
        raise ContractError("pr_curve needs at least one positive (approximate FD)")
    groups: dict[float, list[bool]] = defaultdict(list)
    for sc in scored:
        if sc.satisfied:
            continue
        key = -math.inf if sc.score is None else sc.score.value
        groups[key].append((sc.relation, sc.candidate) in positives)
    tp = returned = 0
    prev_recall = 0.0
    auc = 0.0
    points = []
    for key in sorted(groups, reverse=True):
        labels = groups[key]
        tp += sum(labels)
        returned += len(labels)
        recall, precision = tp / len(positives), tp / returned
        auc += (recall - prev_recall) * precision
        prev_recall = recall
        points.append((recall, precision))
    return PrCurve(tuple(points), min(max(auc, 0.0), 1.0))


def per_relation_auc(
    scored: Iterable[ScoredCandidate], truth: Iterable[GroundTruth]
) -> dict[str, float | None]:
    """AUC of every relation on its own; None for relations without positives."""
    by_rel: dict[str, list[ScoredCandidate]] = defaultdict(list)
    for sc in scored:
        by_rel[sc.relation].append(sc)
    out: dict[str, float | None] = {}
    for gt in truth:
        if gt.approximate_fds:
            out[gt.relation_name] = pr_curve(by_rel[gt.relation_name], [gt]).auc
        else:
            out[gt.relation_name] = None
    return out


def _counted(scored: Sequence[ScoredCandidate], truth: GroundTruth) -> list[ScoredCandidate]:
    found = {sc.candidate: sc for sc in scored}
    eps = math.inf
    for fd in truth.approximate_fds:
        sc = found.get(fd)
        if sc is None or sc.score is None:
            raise ContractError(f"approximate FD {fd} of {truth.relation_name!r} has no score")
        if sc.satisfied:
            raise ContractError(f"approximate FD {fd} of {truth.relation_name!r} is satisfied")
        eps = min(eps, sc.score.value)
    return [sc for sc in scored if sc.score is not None and not sc.satisfied and sc.score.value >= eps]


def rank_at_max_recall(scored: Sequence[ScoredCandidate], truth: GroundTruth) -> int:
    """How many non-satisfied candidates score at least as high as the worst positive."""
    if not truth.approximate_fds:
        return 0
    return len(_counted(scored, truth))


@dataclass(frozen=True)
class MislabeledDiagnostics:
    avg_lhs_uniqueness: float
    avg_rhs_skew: float
    count: int

    @property
    def empty(self) -> bool:
        return self.count == 0

    def to_record(self) -> dict:
        return {
            "avg_lhs_uniqueness": self.avg_lhs_uniqueness,
            "avg_rhs_skew": self.avg_rhs_skew,
            "count": self.count,
            "empty": self.empty,
        }


def mislabeled_diagnostics(
    scored: Sequence[ScoredCandidate], truth: GroundTruth
) -> MislabeledDiagnostics:
    """Average diagnostics of the negatives counted in :func:`rank_at_max_recall`."""
    if not truth.approximate_fds:
        return MislabeledDiagnostics(0.0, 0.0, 0)
    positives = set(truth.approximate_fds)
    wrong = [sc for sc in _counted(scored, truth) if sc.candidate not in positives]
    if not wrong:
        return MislabeledDiagnostics(0.0, 0.0, 0)
    return MislabeledDiagnostics(
        float(np.mean([sc.lhs_uniqueness for sc in wrong])),
        float(np.mean([sc.rhs_skew for sc in wrong])),
        len(wrong),
    )


RunKey = tuple[str, str, str, float]  # (measure, relation, channel, eta)


def winning_numbers(results: Mapping[RunKey, int]) -> dict[tuple[str, str], float]:
    """Per channel, the percentage of (relation, channel, eta) triples each measure wins.

    A measure wins a triple when its rank is minimal; tied measures all win.
    """
    measures = sorted({str(k[0]) for k in results})
    triples = sorted({k[1:] for k in results})
    wins: dict[tuple[str, str], int] = defaultdict(int)
    totals: dict[str, int] = defaultdict(int)
    for rel, channel, eta in triples:
        ranks = {}
        for m in measures:
            key = (m, rel, channel, eta)
            if key not in results:
                raise ContractError(f"missing rank for measure {m} on {(rel, channel, eta)}")
            ranks[m] = results[key]
        best = min(ranks.values())
        totals[channel] += 1
        for m, r in ranks.items():
            if r == best:
                wins[(m, channel)] += 1
    return {(m, c): 100.0 * wins[(m, c)] / totals[c] for c in sorted(totals) for m in measures}


# Whole-benchmark evaluation


@dataclass(frozen=True)
class EvalItem:
    relation: Relation
    truth: GroundTruth
    channel: str | None = None
    eta: float | None = None


@dataclass
class EvaluationReport:
    measures: list[MeasureId]
    pooled_auc: dict[MeasureId, float | None]
    per_relation_auc: dict[MeasureId, dict[str, float | None]]
    ranks: dict[str, dict[MeasureId, int | None]]
    mislabeled: dict[str, dict[MeasureId, MislabeledDiagnostics | None]]
    winning: dict[tuple[str, str], float] | None
    errors: int = 0

    def to_json(self) -> dict:
        ms = [m.value for m in self.measures]
        out = {
            "measures": ms,
            "auc": {
                m.value: {"pooled": self.pooled_auc[m], "per_relation": self.per_relation_auc[m]}
                for m in self.measures
            },
            "rank_at_max_recall": {
                rel: {m.value: r for m, r in row.items()} for rel, row in self.ranks.items()
            },
            "mislabeled": {
                rel: {m.value: (None if d is None else d.to_record()) for m, d in row.items()}
                for rel, row in self.mislabeled.items()
            },
            "errors": self.errors,
        }
        if self.winning is not None:
            channels = sorted({c for _, c in self.winning})
            out["winning_numbers"] = {
                c: {m: self.winning[(m, c)] for m in ms} for c in channels
            }
        return out


def _item_key(item: EvalItem, index: int) -> str:
    if item.channel is None:
        return item.truth.relation_name
    return f"{item.truth.relation_name}@{item.channel}:{item.eta}#{index}"


def evaluate(
    items: Sequence[EvalItem],
    measures: Sequence[MeasureId | str],
    *,
    max_lhs: int = 1,
    sfi_alpha: float = DEFAULT_SFI_ALPHA,
    time_budget: float | None = None,
    jobs: int = 1,
) -> EvaluationReport:
    """Rank every candidate of every relation and collect all ranking metrics.

    Items are keyed by relation name, extended with the run's channel and
    error rate when those are given, so the same base relation may appear in
    several runs. Winning numbers are computed only when the items span more
    than one (channel, eta) run.
    """
    measures = [MeasureId.parse(m) for m in measures]
    keys = [_item_key(it, i) for i, it in enumerate(items)]
    if len(set(keys)) != len(keys):
        raise ContractError("duplicate relation names among evaluation items")
    pooled: dict[MeasureId, list[ScoredCandidate]] = {m: [] for m in measures}
    truths = []
    ranks: dict[str, dict[MeasureId, int | None]] = {}
    mislabeled: dict[str, dict[MeasureId, MislabeledDiagnostics | None]] = {}
    errors = 0
    for key, it in zip(keys, items):
        it.truth.check_against(it.relation)
        R = it.relation.rename(key)
        gt = GroundTruth(key, it.truth.perfect_fds, it.truth.approximate_fds)
        truths.append(gt)
        ranked = score_all(
            R, enumerate_candidates(R, max_lhs), measures,
            sfi_alpha=sfi_alpha, time_budget=time_budget, jobs=jobs,
        )
        ranks[key], mislabeled[key] = {}, {}
        for m in measures:
            errors += sum(sc.error is not None for sc in ranked[m])
            pooled[m].extend(ranked[m])
            if not gt.approximate_fds:
                ranks[key][m] = mislabeled[key][m] = None
                continue
            try:
                ranks[key][m] = rank_at_max_recall(ranked[m], gt)
                mislabeled[key][m] = mislabeled_diagnostics(ranked[m], gt)
            except ContractError:
                # a refused or missing positive leaves the rank undefined
                ranks[key][m] = mislabeled[key][m] = None
    has_pos = any(gt.approximate_fds for gt in truths)
    pooled_auc = {m: (pr_curve(pooled[m], truths).auc if has_pos else None) for m in measures}
    rel_auc = {m: per_relation_auc(pooled[m], truths) for m in measures}
    runs = {(it.channel, it.eta) for it in items if it.channel is not None}
    winning = None
    if len(runs) > 1:
        results = {}
        for key, it in zip(keys, items):
            if it.channel is None or not it.truth.approximate_fds:
                continue
            if any(ranks[key][m] is None for m in measures):
                continue
            for m in measures:
                results[(m.value, it.truth.relation_name, it.channel, it.eta)] = ranks[key][m]
        winning = winning_numbers(results) if results else {}
    return EvaluationReport(measures, pooled_auc, rel_auc, ranks, mislabeled, winning, errors)

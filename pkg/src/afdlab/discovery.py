"""Candidate enumeration, ranking and threshold discovery."""

from __future__ import annotations

import itertools
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, RefusalError
from .measures import DEFAULT_SFI_ALPHA, SLOW_MEASURES, MeasureId, Score, score
from .relation import ContingencyTable, Relation, contingency, lhs_uniqueness, rhs_skew


@dataclass(frozen=True, order=True)
class FdCandidate:
    lhs: tuple[str, ...]
    rhs: tuple[str, ...]

    def __post_init__(self) -> None:
        lhs = (self.lhs,) if isinstance(self.lhs, str) else tuple(self.lhs)
        rhs = (self.rhs,) if isinstance(self.rhs, str) else tuple(self.rhs)
        lhs, rhs = tuple(sorted(set(lhs))), tuple(sorted(set(rhs)))
        if not lhs or not rhs:
            raise ContractError("FD sides must be nonempty")
        if set(lhs) & set(rhs):
            raise ContractError(f"FD sides overlap: {lhs} -> {rhs}")
        object.__setattr__(self, "lhs", lhs)
        object.__setattr__(self, "rhs", rhs)

    @classmethod
    def parse(cls, text: str) -> FdCandidate:
        """Parse ``"A,B->C"``."""
        left, sep, right = text.partition("->")
        if not sep:
            raise ContractError(f"not an FD: {text!r}")
        return cls(
            tuple(a.strip() for a in left.split(",") if a.strip()),
            tuple(a.strip() for a in right.split(",") if a.strip()),
        )

    @property
    def is_linear(self) -> bool:
        return len(self.lhs) == 1 and len(self.rhs) == 1

    def __str__(self) -> str:
        return f"{','.join(self.lhs)}->{','.join(self.rhs)}"

    def to_json(self) -> list[list[str]]:
        return [list(self.lhs), list(self.rhs)]

    @classmethod
    def from_json(cls, obj: Sequence[Sequence[str]]) -> FdCandidate:
        lhs, rhs = obj
        return cls(tuple(lhs), tuple(rhs))


@dataclass(frozen=True)
class ScoredCandidate:
    """A candidate's score plus the diagnostics of its NULL-filtered table.

    ``score`` is None when scoring was refused; ``error`` then says why.
    """

    relation: str
    candidate: FdCandidate
    measure: MeasureId
    score: Score | None
    n_effective: int
    lhs_uniqueness: float
    rhs_skew: float
    error: str | None = None

    @property
    def value(self) -> float | None:
        return None if self.score is None else self.score.value

    @property
    def satisfied(self) -> bool:
        return self.score is not None and self.score.satisfied

    def sort_key(self):
        if self.score is None:
            return (1, 0.0, self.candidate)
        return (0, -self.score.value, self.candidate)

    def to_record(self) -> dict:
        return {
            "relation": self.relation,
            "lhs": list(self.candidate.lhs),
            "rhs": list(self.candidate.rhs),
            "measure": self.measure.value,
            "score": self.value,
            "satisfied": self.satisfied,
            "n_effective": self.n_effective,
            "lhs_uniqueness": self.lhs_uniqueness,
            "rhs_skew": self.rhs_skew,
            "error": self.error,
        }


def enumerate_candidates(R: Relation, max_lhs: int = 1) -> list[FdCandidate]:
    """All FDs with up to ``max_lhs`` LHS attributes and one RHS attribute.

    A candidate is kept only if some row has every one of its attributes
    non-NULL.
    """
    if max_lhs < 1:
        raise ContractError("max_lhs must be at least 1")
    attrs = sorted(R.attributes)
    if len(attrs) < 2:
        return []
    present = {a: np.array([c is not None for c in R.column(a)], dtype=bool) for a in attrs}
    out = []
    for size in range(1, min(max_lhs, len(attrs) - 1) + 1):
        for lhs in itertools.combinations(attrs, size):
            lhs_mask = np.logical_and.reduce([present[a] for a in lhs])
            if not lhs_mask.any():
                continue
            for y in attrs:
                if y in lhs or not (lhs_mask & present[y]).any():
                    continue
                out.append(FdCandidate(lhs, (y,)))
    return sorted(out)


def _diagnostics(t: ContingencyTable) -> tuple[float, float]:
    if t.is_empty:
        return 0.0, 0.0
    return lhs_uniqueness(t), rhs_skew(t)


def score_candidate(
    R: Relation,
    cand: FdCandidate,
    measures: Sequence[MeasureId],
    sfi_alpha: float = DEFAULT_SFI_ALPHA,
    time_budget: float | None = None,
) -> list[ScoredCandidate]:
    """Score one candidate under several measures, sharing its contingency table."""
    t = contingency(R, cand.lhs, cand.rhs)
    uniq, skew = _diagnostics(t)
    out = []
    for m in measures:
        budget = time_budget if m in SLOW_MEASURES else None
        try:
            s, err = score(m, t, sfi_alpha=sfi_alpha, time_budget=budget), None
        except RefusalError as exc:
            s, err = None, f"{type(exc).__name__}: {exc}"
        out.append(ScoredCandidate(R.name, cand, m, s, t.n, uniq, skew, err))
    return out


def _score_task(args) -> list[ScoredCandidate]:
    return score_candidate(*args)


def score_all(
    R: Relation,
    cands: Iterable[FdCandidate],
    measures: Sequence[MeasureId | str],
    *,
    sfi_alpha: float = DEFAULT_SFI_ALPHA,
    time_budget: float | None = None,
    jobs: int = 1,
) -> dict[MeasureId, list[ScoredCandidate]]:
    """Rank ``cands`` under every measure in ``measures``.

    Candidates are scored independently (in parallel when ``jobs > 1``); the
    returned lists are sorted by score descending, ties and errors ordered by
    candidate, so the output does not depend on ``jobs``.
    """
    measures = [MeasureId.parse(m) for m in measures]
    cands = list(cands)
    tasks = [(R, c, measures, sfi_alpha, time_budget) for c in cands]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_score_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        results = [_score_task(t) for t in tasks]
    ranked: dict[MeasureId, list[ScoredCandidate]] = {m: [] for m in measures}
    for per_candidate in results:
        for sc in per_candidate:
            ranked[sc.measure].append(sc)
    for m in measures:
        ranked[m].sort(key=ScoredCandidate.sort_key)
    return ranked


def rank(
    R: Relation,
    m: MeasureId | str,
    cands: Iterable[FdCandidate],
    **kwargs,
) -> list[ScoredCandidate]:
    """Score and sort ``cands`` by measure ``m``, best first."""
    m = MeasureId.parse(m)
    return score_all(R, cands, [m], **kwargs)[m]


def check_epsilon(epsilon: float) -> float:
    if not 0.0 <= epsilon < 1.0:
        raise ContractError(f"epsilon must lie in [0, 1), got {epsilon!r}")
    return float(epsilon)


def above_threshold(ranked: Iterable[ScoredCandidate], epsilon: float) -> list[ScoredCandidate]:
    """The violated candidates whose score lies in ``[epsilon, 1)``."""
    epsilon = check_epsilon(epsilon)
    return [
        sc for sc in ranked
        if sc.score is not None and not sc.satisfied and epsilon <= sc.score.value < 1.0
    ]


def discover(
    R: Relation,
    m: MeasureId | str,
    epsilon: float,
    cands: Iterable[FdCandidate] | None = None,
    max_lhs: int = 1,
    **kwargs,
) -> set[FdCandidate]:
    """All FDs violated by ``R`` whose score under ``m`` lies in ``[epsilon, 1)``."""
    epsilon = check_epsilon(epsilon)
    if cands is None:
        cands = enumerate_candidates(R, max_lhs)
    return {sc.candidate for sc in above_threshold(rank(R, m, cands, **kwargs), epsilon)}

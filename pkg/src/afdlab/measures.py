"""The AFD measure catalog behind a single :func:`score` entry point.

Every measure maps a contingency table to ``[0, 1]``. A table that satisfies
the FD, or is empty, scores exactly 1 under every measure; the formulas below
only run on violated tables, where ``|dom(Y)| > 1`` and ``|dom(X)| < n`` keep
every denominator positive.
"""

from __future__ import annotations

import enum
import itertools
import time
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from . import infotheory as it
from .errors import BudgetExceeded, ContractError, RefusalError
from .relation import ContingencyTable

DEFAULT_SFI_ALPHA = 0.5
DEFAULT_SFI_CELL_CAP = 10**7
RFI_PRIME_SATURATION = 1e-12


class MeasureId(str, enum.Enum):
    RHO = "rho"
    G1 = "g1"
    G1_PRIME = "g1_prime"
    G2 = "g2"
    G3 = "g3"
    G3_PRIME = "g3_prime"
    G1_SHANNON = "g1_shannon"
    FI = "fi"
    RFI_PLUS = "rfi_plus"
    RFI_PRIME_PLUS = "rfi_prime_plus"
    SFI = "sfi"
    PDEP = "pdep"
    TAU = "tau"
    MU_PLUS = "mu_plus"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, name: str | MeasureId) -> MeasureId:
        try:
            return cls(name)
        except ValueError:
            raise ContractError(f"unknown measure {name!r}") from None


ALL_MEASURES: tuple[MeasureId, ...] = tuple(MeasureId)
SLOW_MEASURES = frozenset({MeasureId.RFI_PLUS, MeasureId.RFI_PRIME_PLUS, MeasureId.SFI})

MEASURE_CLASS = {
    MeasureId.RHO: "simple",
    MeasureId.G2: "simple",
    MeasureId.G3: "simple",
    MeasureId.G3_PRIME: "simple",
    MeasureId.G1_SHANNON: "shannon",
    MeasureId.FI: "shannon",
    MeasureId.RFI_PLUS: "shannon",
    MeasureId.RFI_PRIME_PLUS: "shannon",
    MeasureId.SFI: "shannon",
    MeasureId.G1: "logical",
    MeasureId.G1_PRIME: "logical",
    MeasureId.PDEP: "logical",
    MeasureId.TAU: "logical",
    MeasureId.MU_PLUS: "logical",
}


@dataclass(frozen=True)
class Score:
    value: float
    satisfied: bool

    def __post_init__(self) -> None:
        if self.satisfied and self.value != 1.0:
            raise ContractError("a satisfied FD must score exactly 1")
        if not 0.0 <= self.value <= 1.0:
            raise ContractError(f"score {self.value!r} outside [0, 1]")


# Per-measure formulas. Each assumes a non-empty, violated table.


def rho(t: ContingencyTable) -> float:
    return t.lhs_domain_size / t.joint_domain_size


def g1(t: ContingencyTable) -> float:
    return 1.0 - it.cond_logical_entropy(t)


def g1_prime(t: ContingencyTable) -> float:
    # pairs equal on the whole XY projection can never violate the FD
    c = t.cell_counts
    bound = t.n**2 - int((c * c).sum())
    return 1.0 - it.violating_pairs(t) / bound


def g2(t: ContingencyTable) -> float:
    impure = sum(
        t.lhs_marginals[x] for x, inner in t.lhs_groups.items() if len(inner) > 1
    )
    return 1.0 - impure / t.n


def _kept_by_g3(t: ContingencyTable) -> int:
    return sum(max(inner.values()) for inner in t.lhs_groups.values())


def g3(t: ContingencyTable) -> float:
    return _kept_by_g3(t) / t.n


def g3_prime(t: ContingencyTable) -> float:
    k = t.lhs_domain_size
    return (_kept_by_g3(t) - k) / (t.n - k)


def g1_shannon(t: ContingencyTable) -> float:
    return max(1.0 - it.cond_shannon_entropy(t), 0.0)


def fi(t: ContingencyTable) -> float:
    return it.mutual_information(t) / it.rhs_entropy(t)


def expected_fi(t: ContingencyTable, deadline: float | None = None) -> float:
    # H(Y) is identical in every re-pairing, so E[FI] = E[I] / H(Y)
    return it.expected_mi_permutation(t, deadline) / it.rhs_entropy(t)


def rfi_plus(t: ContingencyTable, deadline: float | None = None) -> float:
    return max(fi(t) - expected_fi(t, deadline), 0.0)


def rfi_prime_plus(t: ContingencyTable, deadline: float | None = None) -> float:
    e = expected_fi(t, deadline)
    if e >= 1.0 - RFI_PRIME_SATURATION:
        return 0.0
    return max((fi(t) - e) / (1.0 - e), 0.0)


def sfi(
    t: ContingencyTable,
    alpha: float = DEFAULT_SFI_ALPHA,
    cell_cap: int | None = DEFAULT_SFI_CELL_CAP,
    deadline: float | None = None,
) -> float:
    """FI of the Laplace-smoothed table: every (x, y) cell gets ``alpha`` added.

    The dense table is never built; zero cells are accounted for in closed
    form. ``cell_cap`` still bounds its nominal size so that callers get the
    same refusal behaviour as a dense implementation would impose.
    """
    if alpha <= 0:
        raise ContractError("SFI smoothing parameter must be positive")
    kx, ky = t.lhs_domain_size, t.rhs_domain_size
    if cell_cap is not None and kx * ky > cell_cap:
        raise RefusalError(f"smoothed table would have {kx * ky} cells (cap {cell_cap})")
    if deadline is not None and time.monotonic() > deadline:
        raise BudgetExceeded("SFI exceeded its time budget")
    total = t.n + alpha * kx * ky
    c = t.cell_counts.astype(float) + alpha
    row = t.cell_lhs_index
    a = t.lhs_counts.astype(float) + alpha * ky
    nonzero_part = -(c * np.log2(c / a[row])).sum()
    # zero cells of the dense table hold alpha alone
    zero_cells = ky - np.bincount(row, minlength=kx)
    zero_part = -(zero_cells * alpha * np.log2(alpha / a)).sum()
    h_cond = (nonzero_part + zero_part) / total
    b = t.rhs_counts.astype(float) + alpha * kx
    p = b / total
    h_y = float(-(p * np.log2(p)).sum())
    value = (h_y - h_cond) / h_y
    return min(max(value, 0.0), 1.0)


def pdep(t: ContingencyTable) -> float:
    c = t.cell_counts.astype(float)
    a = t.lhs_counts[t.cell_lhs_index].astype(float)
    return float((c * c / a).sum() / t.n)


def tau(t: ContingencyTable) -> float:
    base = it.rhs_self_dependency(t)
    return (pdep(t) - base) / (1.0 - base)


def mu(t: ContingencyTable) -> float:
    """Unclamped mu; may be negative."""
    e = it.expected_pdep_closed_form(t)
    return (pdep(t) - e) / (1.0 - e)


def mu_plus(t: ContingencyTable) -> float:
    return max(mu(t), 0.0)


_SIMPLE: dict[MeasureId, Callable[[ContingencyTable], float]] = {
    MeasureId.RHO: rho,
    MeasureId.G1: g1,
    MeasureId.G1_PRIME: g1_prime,
    MeasureId.G2: g2,
    MeasureId.G3: g3,
    MeasureId.G3_PRIME: g3_prime,
    MeasureId.G1_SHANNON: g1_shannon,
    MeasureId.FI: fi,
    MeasureId.PDEP: pdep,
    MeasureId.TAU: tau,
    MeasureId.MU_PLUS: mu_plus,
}


def score(
    m: MeasureId | str,
    t: ContingencyTable,
    *,
    sfi_alpha: float = DEFAULT_SFI_ALPHA,
    sfi_cell_cap: int | None = DEFAULT_SFI_CELL_CAP,
    time_budget: float | None = None,
) -> Score:
    """Score table ``t`` with measure ``m``.

    ``time_budget`` (seconds) only applies to the slow measures and raises
    :class:`~afdlab.errors.BudgetExceeded` once spent.
    """
    m = MeasureId.parse(m)
    if t.is_empty or t.is_satisfied():
        return Score(1.0, True)
    deadline = None if time_budget is None else time.monotonic() + time_budget
    if m is MeasureId.RFI_PLUS:
        value = rfi_plus(t, deadline)
    elif m is MeasureId.RFI_PRIME_PLUS:
        value = rfi_prime_plus(t, deadline)
    elif m is MeasureId.SFI:
        value = sfi(t, sfi_alpha, sfi_cell_cap, deadline)
    else:
        value = _SIMPLE[m](t)
    return Score(min(max(float(value), 0.0), 1.0), False)


# Brute-force oracles used to cross-check the closed forms.

G3_ORACLE_LIMIT = 12
PAIR_ORACLE_LIMIT = 10**4


def oracle_g3_bruteforce(t: ContingencyTable) -> float:
    """g3 by exhaustive search over one retained RHS value per LHS group.

    A maximal satisfying subrelation keeps, in each group, all copies of a
    single RHS value, so it suffices to enumerate those choices.
    """
    if t.is_empty:
        return 1.0
    if t.lhs_domain_size > G3_ORACLE_LIMIT or any(
        len(inner) > G3_ORACLE_LIMIT for inner in t.lhs_groups.values()
    ):
        raise RefusalError("g3 oracle size guard exceeded")
    options = [list(inner.values()) for inner in t.lhs_groups.values()]
    best = 0
    for choice in itertools.product(*options):
        best = max(best, sum(choice))
    return best / t.n


@dataclass(frozen=True)
class PairCounts:
    violating_pairs: int
    tuples_in_violation: int


def oracle_pair_counts(t: ContingencyTable) -> PairCounts:
    """Quadratic scan over all ordered tuple pairs of the expanded table."""
    if t.n > PAIR_ORACLE_LIMIT:
        raise RefusalError(f"pair scan over n={t.n} refused (limit {PAIR_ORACLE_LIMIT})")
    xs, ys = t.expand()
    pairs = 0
    involved = [False] * t.n
    for i in range(t.n):
        for j in range(t.n):
            if xs[i] == xs[j] and ys[i] != ys[j]:
                pairs += 1
                involved[i] = True
    return PairCounts(pairs, sum(involved))

"""Shannon and logical entropy kernels plus permutation null-model expectations.

All logarithms are base 2. Ratios such as the fraction of information do not
depend on the base, but ``1 - H(Y|X)`` does, so the base is fixed here.
"""

from __future__ import annotations

import math
import time
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass
from itertools import permutations

import numpy as np
from scipy.special import gammaln

from .errors import BudgetExceeded, ContractError, RefusalError
from .relation import ContingencyTable

SUM_TOLERANCE = 1e-12
# Above this table size hypergeometric probabilities are built from log-gamma.
EXACT_BINOMIAL_LIMIT = 1000
MI_CLAMP = 1e-12


@dataclass(frozen=True)
class Distribution:
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        w = tuple(float(x) for x in self.weights)
        if any(x < 0 or math.isnan(x) for x in w):
            raise ContractError("distribution weights must be nonnegative")
        if abs(math.fsum(w) - 1.0) > SUM_TOLERANCE:
            raise ContractError(f"distribution weights sum to {math.fsum(w)!r}, not 1")
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_counts(cls, counts: Sequence[float]) -> Distribution:
        total = math.fsum(counts)
        if total <= 0:
            raise ContractError("cannot normalise an all-zero count vector")
        return cls(tuple(c / total for c in counts))


def _weights(d: Distribution | Sequence[float]) -> np.ndarray:
    if not isinstance(d, Distribution):
        d = Distribution(tuple(d))
    return np.asarray(d.weights, dtype=float)


def _entropy_of_counts(counts: np.ndarray) -> float:
    counts = np.asarray(counts, dtype=float)
    counts = counts[counts > 0]
    total = counts.sum()
    p = counts / total
    return max(float(-(p * np.log2(p)).sum()), 0.0)


def shannon_entropy(d: Distribution | Sequence[float]) -> float:
    """Entropy in bits with ``0 log 0 = 0``."""
    p = _weights(d)
    p = p[p > 0]
    return max(float(-(p * np.log2(p)).sum()), 0.0)


def logical_entropy(d: Distribution | Sequence[float]) -> float:
    """Probability that two independent draws differ, ``1 - sum(p**2)``."""
    p = _weights(d)
    return max(1.0 - float(p @ p), 0.0)


def _require_rows(t: ContingencyTable, what: str) -> None:
    if t.is_empty:
        raise ContractError(f"{what} of an empty table")


def lhs_entropy(t: ContingencyTable) -> float:
    _require_rows(t, "lhs_entropy")
    return _entropy_of_counts(t.lhs_counts)


def rhs_entropy(t: ContingencyTable) -> float:
    _require_rows(t, "rhs_entropy")
    return _entropy_of_counts(t.rhs_counts)


def cond_shannon_entropy(t: ContingencyTable) -> float:
    """H(Y|X): the group entropies of Y weighted by the group shares of X."""
    _require_rows(t, "cond_shannon_entropy")
    c = t.cell_counts.astype(float)
    a = t.lhs_counts[t.cell_lhs_index].astype(float)
    return max(float(-(c * np.log2(c / a)).sum() / t.n), 0.0)


def violating_pairs(t: ContingencyTable) -> int:
    """Ordered pairs of tuples that agree on X but differ on Y (exact integer)."""
    c = t.cell_counts
    a = t.lhs_counts[t.cell_lhs_index]
    return int((c * (a - c)).sum())


def cond_logical_entropy(t: ContingencyTable) -> float:
    """h(Y|X) = sum_xy p(xy) [p(x) - p(xy)], i.e. violating pairs over n**2."""
    _require_rows(t, "cond_logical_entropy")
    return violating_pairs(t) / t.n**2


def mutual_information(t: ContingencyTable) -> float:
    """I(X;Y) = H(Y) - H(Y|X) in bits, with rounding noise clamped to 0."""
    _require_rows(t, "mutual_information")
    mi = rhs_entropy(t) - cond_shannon_entropy(t)
    if mi < 0:
        if mi < -MI_CLAMP:
            # genuine negativity would mean a broken kernel
            raise ArithmeticError(f"negative mutual information {mi!r}")
        return 0.0
    return mi


def _multiplicities(counts: np.ndarray) -> list[tuple[int, int]]:
    return sorted(Counter(int(c) for c in counts).items())


def _hypergeom_pmf(n: int, a: int, b: int, lo: int, hi: int) -> np.ndarray:
    """P(M = m) for m in [lo, hi] when drawing ``a`` of ``n`` items, ``b`` marked."""
    if n <= EXACT_BINOMIAL_LIMIT:
        denom = math.comb(n, a)
        return np.array(
            [math.comb(b, m) * math.comb(n - b, a - m) / denom for m in range(lo, hi + 1)]
        )
    m = np.arange(lo, hi + 1, dtype=float)
    log_pmf = (
        gammaln(b + 1) - gammaln(m + 1) - gammaln(b - m + 1)
        + gammaln(n - b + 1) - gammaln(a - m + 1) - gammaln(n - b - a + m + 1)
        - gammaln(n + 1) + gammaln(a + 1) + gammaln(n - a + 1)
    )
    return np.exp(log_pmf)


def expected_mi_permutation(t: ContingencyTable, deadline: float | None = None) -> float:
    """Exact mean of I(X;Y) over all re-pairings of the X and Y columns.

    With both marginals fixed, the count of cell (x, y) under a uniformly
    random re-pairing is hypergeometric, so the mean is a finite triple sum.
    Cells sharing the same pair of marginal counts contribute identically and
    are folded together.

    ``deadline`` is an optional ``time.monotonic()`` value; once passed a
    :class:`BudgetExceeded` is raised.
    """
    _require_rows(t, "expected_mi_permutation")
    n = t.n
    total = 0.0
    for a, ka in _multiplicities(t.lhs_counts):
        if deadline is not None and time.monotonic() > deadline:
            raise BudgetExceeded("expected mutual information exceeded its time budget")
        for b, kb in _multiplicities(t.rhs_counts):
            lo, hi = max(1, a + b - n), min(a, b)
            if lo > hi:
                continue
            pmf = _hypergeom_pmf(n, a, b, lo, hi)
            m = np.arange(lo, hi + 1, dtype=float)
            terms = (m / n) * np.log2(n * m / (a * b)) * pmf
            total += ka * kb * float(terms.sum())
    return max(total, 0.0)


def expected_mi_montecarlo(t: ContingencyTable, samples: int = 1000, seed: int = 0) -> float:
    """Monte-Carlo estimate of :func:`expected_mi_permutation` by column shuffles."""
    _require_rows(t, "expected_mi_montecarlo")
    xs = np.repeat(np.arange(len(t.lhs_marginals)), t.lhs_counts)
    pos = {y: j for j, y in enumerate(t.rhs_marginals)}
    ys = np.array([pos[y] for y in t.expand()[1]], dtype=np.int64)
    # expand() walks groups in the same order as lhs_counts
    rng = np.random.Generator(np.random.Philox(seed))
    ky = len(pos)
    acc = 0.0
    for _ in range(samples):
        perm = rng.permutation(ys)
        joint = np.bincount(xs * ky + perm, minlength=len(t.lhs_marginals) * ky)
        acc += _mi_from_joint(joint.reshape(-1, ky)[None], t.n)[0]
    return acc / samples


def _mi_from_joint(joint: np.ndarray, n: int) -> np.ndarray:
    """Mutual information in bits for a stack of joint count matrices."""
    joint = joint.astype(float)
    a = joint.sum(axis=2, keepdims=True)
    b = joint.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(joint > 0, joint / n * np.log2(n * joint / (a * b)), 0.0)
    return terms.sum(axis=(1, 2))


def _all_pairings(t: ContingencyTable, limit: int) -> np.ndarray:
    """Joint count matrices for every one of the n! RHS-column permutations."""
    if t.n > limit:
        raise RefusalError(f"enumeration over {t.n}! permutations refused (limit {limit})")
    xs = np.repeat(np.arange(len(t.lhs_marginals)), t.lhs_counts)
    pos = {y: j for j, y in enumerate(t.rhs_marginals)}
    ys = np.array([pos[y] for y in t.expand()[1]], dtype=np.int64)
    kx, ky = len(t.lhs_marginals), len(pos)
    perms = np.array(list(permutations(range(t.n))), dtype=np.int64).reshape(-1, t.n)
    codes = xs[None, :] * ky + ys[perms]
    joint = np.zeros((perms.shape[0], kx * ky), dtype=np.int64)
    rows = np.repeat(np.arange(perms.shape[0]), t.n)
    np.add.at(joint, (rows, codes.ravel()), 1)
    return joint.reshape(-1, kx, ky)


def expected_mi_enumeration(t: ContingencyTable, limit: int = 8) -> float:
    """Average I(X;Y) over all n! permutations of the expanded RHS column."""
    _require_rows(t, "expected_mi_enumeration")
    return float(_mi_from_joint(_all_pairings(t, limit), t.n).mean())


def expected_pdep_enumeration(t: ContingencyTable, limit: int = 8) -> float:
    """Average probabilistic dependency over all n! RHS-column permutations."""
    _require_rows(t, "expected_pdep_enumeration")
    joint = _all_pairings(t, limit).astype(float)
    a = joint.sum(axis=2)
    a_safe = np.where(a > 0, a, 1.0)
    pdeps = ((joint**2).sum(axis=2) / a_safe).sum(axis=1) / t.n
    return float(pdeps.mean())


def rhs_self_dependency(t: ContingencyTable) -> float:
    """pdep(Y) = sum_y p(y)**2, the chance two random tuples agree on Y."""
    _require_rows(t, "rhs_self_dependency")
    b = t.rhs_counts.astype(float)
    return float((b @ b) / t.n**2)


def expected_pdep_closed_form(t: ContingencyTable) -> float:
    """Mean pdep under random re-pairings: pdep(Y) + (K-1)/(N-1) * (1 - pdep(Y))."""
    if t.n < 2:
        raise ContractError("expected pdep needs at least two tuples")
    base = rhs_self_dependency(t)
    k = len(t.lhs_marginals)
    return base + (k - 1) / (t.n - 1) * (1.0 - base)

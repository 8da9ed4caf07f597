"""Bag-semantic relations, CSV ingestion and contingency tables.

Cells are uninterpreted string tokens or ``None`` (NULL). Nothing is coerced:
``"1"`` and ``"1.0"`` are different values, because FD semantics are purely
equality based.
"""

from __future__ import annotations

import csv
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ContractError, ParseError, SchemaError

Cell = str | None
ValueTuple = tuple[str, ...]

DEFAULT_NULL_TOKENS = frozenset({""})


@dataclass(frozen=True)
class Relation:
    """An immutable, column-oriented bag of tuples."""

    name: str
    attributes: tuple[str, ...]
    columns: tuple[tuple[Cell, ...], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "attributes", tuple(self.attributes))
        object.__setattr__(self, "columns", tuple(tuple(c) for c in self.columns))
        if len(set(self.attributes)) != len(self.attributes):
            dupes = sorted(a for a, k in Counter(self.attributes).items() if k > 1)
            raise SchemaError(f"duplicate attribute names: {dupes}")
        if len(self.columns) != len(self.attributes):
            raise SchemaError("one column per attribute is required")
        lengths = {len(c) for c in self.columns}
        if len(lengths) > 1:
            raise SchemaError(f"columns have different lengths: {sorted(lengths)}")

    @classmethod
    def from_rows(
        cls, name: str, attributes: Sequence[str], rows: Iterable[Sequence[Cell]]
    ) -> Relation:
        rows = [tuple(r) for r in rows]
        width = len(attributes)
        for i, r in enumerate(rows):
            if len(r) != width:
                raise SchemaError(f"row {i} has {len(r)} cells, expected {width}")
        columns = tuple(tuple(r[j] for r in rows) for j in range(width))
        return cls(name, tuple(attributes), columns)

    @property
    def row_count(self) -> int:
        return len(self.columns[0]) if self.columns else 0

    def __len__(self) -> int:
        return self.row_count

    def index(self, attribute: str) -> int:
        try:
            return self.attributes.index(attribute)
        except ValueError:
            raise SchemaError(f"unknown attribute {attribute!r} in {self.name!r}") from None

    def column(self, attribute: str) -> tuple[Cell, ...]:
        return self.columns[self.index(attribute)]

    def rows(self) -> Iterable[tuple[Cell, ...]]:
        return zip(*self.columns) if self.columns else iter(())

    def with_column(self, attribute: str, values: Sequence[Cell]) -> Relation:
        """Return a copy with one column replaced."""
        j = self.index(attribute)
        if len(values) != self.row_count:
            raise ContractError("replacement column has the wrong length")
        cols = list(self.columns)
        cols[j] = tuple(values)
        return Relation(self.name, self.attributes, tuple(cols))

    def rename(self, name: str) -> Relation:
        return Relation(name, self.attributes, self.columns)

    def to_csv(self, path: str | Path, null_token: str = "", delimiter: str = ",") -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
            writer.writerow(self.attributes)
            for row in self.rows():
                writer.writerow([null_token if c is None else c for c in row])


def load_csv(
    path: str | Path,
    null_tokens: Iterable[str] = DEFAULT_NULL_TOKENS,
    delimiter: str = ",",
    name: str | None = None,
) -> Relation:
    """Read a headed CSV file into a :class:`Relation`.

    Cells equal to one of ``null_tokens`` become NULL; everything else is kept
    verbatim as a string.
    """
    path = Path(path)
    nulls = frozenset(null_tokens)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: missing header") from None
        except csv.Error as exc:
            raise ParseError(f"{path}:{reader.line_num}: {exc}") from None
        width = len(header)
        rows: list[tuple[Cell, ...]] = []
        try:
            for record in reader:
                if len(record) != width:
                    raise ParseError(
                        f"{path}:{reader.line_num}: expected {width} fields, got {len(record)}"
                    )
                rows.append(tuple(None if c in nulls else c for c in record))
        except csv.Error as exc:
            raise ParseError(f"{path}:{reader.line_num}: {exc}") from None
    return Relation.from_rows(name if name is not None else path.stem, header, rows)


def _as_key(value) -> ValueTuple:
    return tuple(value) if isinstance(value, tuple) else (value,)


@dataclass(frozen=True, eq=False)
class ContingencyTable:
    """Joint frequencies of an FD candidate's LHS and RHS projections.

    ``lhs_groups`` maps each LHS value tuple to a map from RHS value tuple to
    its (positive) multiplicity. Groups and their entries are stored in sorted
    key order so that every derived quantity is reproducible.
    """

    lhs_groups: Mapping[ValueTuple, Mapping[ValueTuple, int]]
    n: int = field(init=False)
    lhs_marginals: Mapping[ValueTuple, int] = field(init=False)
    rhs_marginals: Mapping[ValueTuple, int] = field(init=False)

    def __post_init__(self) -> None:
        groups: dict[ValueTuple, dict[ValueTuple, int]] = {}
        for x in sorted(self.lhs_groups, key=_as_key):
            inner = self.lhs_groups[x]
            cleaned = {}
            for y in sorted(inner, key=_as_key):
                c = inner[y]
                if int(c) != c or c <= 0:
                    raise ContractError(f"counts must be positive integers, got {c!r}")
                cleaned[_as_key(y)] = int(c)
            if cleaned:
                groups[_as_key(x)] = cleaned
        lhs = {x: sum(inner.values()) for x, inner in groups.items()}
        rhs: Counter[ValueTuple] = Counter()
        for inner in groups.values():
            rhs.update(inner)
        object.__setattr__(self, "lhs_groups", groups)
        object.__setattr__(self, "lhs_marginals", lhs)
        object.__setattr__(self, "rhs_marginals", dict(sorted(rhs.items())))
        object.__setattr__(self, "n", sum(lhs.values()))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple]) -> ContingencyTable:
        """Build a table from an iterable of ``(lhs_value, rhs_value)`` pairs."""
        groups: dict = {}
        for (x, y), c in Counter((_as_key(x), _as_key(y)) for x, y in pairs).items():
            groups.setdefault(x, {})[y] = c
        return cls(groups)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ContingencyTable):
            return NotImplemented
        return self.lhs_groups == other.lhs_groups

    def __hash__(self) -> int:
        return hash(tuple((x, tuple(inner.items())) for x, inner in self.lhs_groups.items()))

    def __repr__(self) -> str:
        return f"ContingencyTable(n={self.n}, groups={dict(self.lhs_groups)!r})"

    @property
    def is_empty(self) -> bool:
        return self.n == 0

    def is_satisfied(self) -> bool:
        """True iff every LHS value maps to exactly one RHS value."""
        return all(len(inner) == 1 for inner in self.lhs_groups.values())

    @property
    def lhs_domain_size(self) -> int:
        return len(self.lhs_marginals)

    @property
    def rhs_domain_size(self) -> int:
        return len(self.rhs_marginals)

    @property
    def joint_domain_size(self) -> int:
        return sum(len(inner) for inner in self.lhs_groups.values())

    def transpose(self) -> ContingencyTable:
        groups: dict = {}
        for x, inner in self.lhs_groups.items():
            for y, c in inner.items():
                groups.setdefault(y, {})[x] = c
        return ContingencyTable(groups)

    def expand(self) -> tuple[list[ValueTuple], list[ValueTuple]]:
        """Return the LHS and RHS columns of the underlying bag, row by row."""
        xs: list[ValueTuple] = []
        ys: list[ValueTuple] = []
        for x, inner in self.lhs_groups.items():
            for y, c in inner.items():
                xs.extend([x] * c)
                ys.extend([y] * c)
        return xs, ys

    # Array views used by the numeric kernels.

    @cached_property
    def cell_counts(self) -> np.ndarray:
        return np.array(
            [c for inner in self.lhs_groups.values() for c in inner.values()], dtype=np.int64
        )

    @cached_property
    def cell_lhs_index(self) -> np.ndarray:
        return np.repeat(
            np.arange(len(self.lhs_groups)),
            [len(inner) for inner in self.lhs_groups.values()],
        ).astype(np.int64)

    @cached_property
    def cell_rhs_index(self) -> np.ndarray:
        pos = {y: j for j, y in enumerate(self.rhs_marginals)}
        return np.array(
            [pos[y] for inner in self.lhs_groups.values() for y in inner], dtype=np.int64
        )

    @cached_property
    def lhs_counts(self) -> np.ndarray:
        return np.array(list(self.lhs_marginals.values()), dtype=np.int64)

    @cached_property
    def rhs_counts(self) -> np.ndarray:
        return np.array(list(self.rhs_marginals.values()), dtype=np.int64)


def _canonical_attrs(R: Relation, attrs: Iterable[str], side: str) -> tuple[str, ...]:
    if isinstance(attrs, str):
        attrs = (attrs,)
    out = tuple(sorted(set(attrs)))
    if not out:
        raise ContractError(f"{side} attribute set is empty")
    for a in out:
        if a not in R.attributes:
            raise ContractError(f"unknown {side} attribute {a!r} in relation {R.name!r}")
    return out


def contingency(R: Relation, lhs: Iterable[str], rhs: Iterable[str]) -> ContingencyTable:
    """Group the NULL-free rows of ``R`` by their (lhs, rhs) projections.

    A row is dropped when any attribute of ``lhs`` or ``rhs`` is NULL in it;
    the filter is applied per candidate, not relation wide.
    """
    lhs = _canonical_attrs(R, lhs, "lhs")
    rhs = _canonical_attrs(R, rhs, "rhs")
    overlap = set(lhs) & set(rhs)
    if overlap:
        raise ContractError(f"lhs and rhs overlap on {sorted(overlap)}")
    xcols = [R.column(a) for a in lhs]
    ycols = [R.column(a) for a in rhs]
    pairs: Counter = Counter()
    for x, y in zip(zip(*xcols), zip(*ycols)):
        if None in x or None in y:
            continue
        pairs[(x, y)] += 1
    groups: dict = {}
    for (x, y), c in pairs.items():
        groups.setdefault(x, {})[y] = c
    return ContingencyTable(groups)


def lhs_uniqueness(t: ContingencyTable) -> float:
    """Share of distinct LHS values among the table's tuples, |dom(X)| / n."""
    if t.is_empty:
        raise ContractError("lhs_uniqueness of an empty table")
    return len(t.lhs_marginals) / t.n


def rhs_skew(t: ContingencyTable) -> float:
    """Fisher-Pearson skewness of the RHS distribution on frequency-rank positions.

    RHS values are ranked by descending frequency (ties by value order) and the
    value at rank ``i`` of ``K`` is placed at ``(i - 0.5) / K``. The skewness of
    that frequency-weighted point set is returned; a degenerate distribution
    has skew 0.
    """
    if t.is_empty:
        raise ContractError("rhs_skew of an empty table")
    ranked = sorted(t.rhs_marginals.items(), key=lambda kv: (-kv[1], kv[0]))
    k = len(ranked)
    if k < 2:
        return 0.0
    w = np.array([c for _, c in ranked], dtype=float) / t.n
    u = (np.arange(1, k + 1) - 0.5) / k
    mean = float(w @ u)
    d = u - mean
    m2 = float(w @ d**2)
    if m2 <= 0.0:
        return 0.0
    m3 = float(w @ d**3)
    return m3 / m2**1.5

"""Synthetic FD / non-FD benchmark generation and controlled error injection.

Randomness comes from numpy's Philox (4x64 counter-based) bit generator seeded
through ``SeedSequence``; Beta variates use the two-Gamma construction
``G_a / (G_a + G_b)``. Together these are identified as :data:`RNG_SCHEME` in
corpus manifests, so a manifest pins down how its relations were drawn.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .discovery import FdCandidate
from .errors import ContractError, ParseError, RefusalError
from .evaluation import GroundTruth
from .relation import Relation, contingency, load_csv

RNG_SCHEME = "philox4x64-seedsequence/beta-two-gamma/v1"
CORPUS_FORMAT = "afdlab-corpus/1"

LHS_ATTR, RHS_ATTR = "X", "Y"
DESIGN_FD = FdCandidate((LHS_ATTR,), (RHS_ATTR,))

# default parameter sampler ranges
N_ROWS_RANGE = (100, 10_000)
ETA_RANGE = (0.005, 0.02)
BETA_RANGE = (1.0, 10.0)
MAX_DEFAULT_SKEW = 1.0

ERROR_SWEEP = (0.0, 0.10)
LHS_SWEEP = (0.1, 0.9)
RHS_SWEEP = (0.0, 10.0)

SKEW_TOLERANCE = 1e-9
BETA_UPPER = 1e6
RHS_SWEEP_BETA = 10.0

MAX_RETRIES = 100


def make_rng(*seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(list(seed))))


def derive_seed(*parts: int) -> int:
    """A 63-bit seed derived deterministically from ``parts``."""
    state = np.random.SeedSequence(list(parts)).generate_state(1, np.uint64)[0]
    return int(state >> np.uint64(1))


# Beta distribution helpers


def beta_skew(alpha: float, beta: float) -> float:
    """Skewness of Beta(alpha, beta)."""
    if alpha <= 0 or beta <= 0:
        raise ContractError("Beta shape parameters must be positive")
    s = alpha + beta
    return 2 * (beta - alpha) * math.sqrt(s + 1) / ((s + 2) * math.sqrt(alpha * beta))


def _bisect(f, lo: float, hi: float, target: float, increasing: bool) -> float:
    for _ in range(500):
        mid = 0.5 * (lo + hi)
        v = f(mid)
        if abs(v - target) <= SKEW_TOLERANCE * 0.1:
            return mid
        if (v < target) == increasing:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, abs(hi)):
            break
    return 0.5 * (lo + hi)


def solve_beta_for_skew(target: float, alpha: float = 1.0) -> float:
    """The ``beta >= alpha`` for which Beta(alpha, beta) has skewness ``target``.

    Skewness grows with beta but saturates at ``2 / sqrt(alpha)``; targets that
    cannot be reached below ``beta = 1e6`` are refused.
    """
    if target < 0:
        raise ContractError("target skew must be nonnegative")
    if alpha <= 0:
        raise ContractError("alpha must be positive")
    if target == 0:
        return float(alpha)
    if beta_skew(alpha, BETA_UPPER) < target:
        raise RefusalError(
            f"skew {target} is not attainable with alpha={alpha} "
            f"(supremum {2 / math.sqrt(alpha):.6g})"
        )
    return _bisect(lambda b: beta_skew(alpha, b), alpha, BETA_UPPER, target, True)


def solve_alpha_for_skew(target: float, beta: float) -> float:
    """The ``alpha <= beta`` for which Beta(alpha, beta) has skewness ``target``."""
    if target < 0:
        raise ContractError("target skew must be nonnegative")
    if target == 0:
        return float(beta)
    return _bisect(lambda a: beta_skew(a, beta), 1e-12, beta, target, False)


def beta_shapes_for_skew(target: float) -> tuple[float, float]:
    """Shapes within alpha in (0, 1], beta in [1, 10] reaching skewness ``target``.

    Up to the skew of Beta(1, 10) alpha stays at 1 and beta grows; beyond that
    beta is held at 10 and alpha shrinks.
    """
    if target < 0:
        raise ContractError("target skew must be nonnegative")
    if target <= beta_skew(1.0, RHS_SWEEP_BETA):
        return 1.0, solve_beta_for_skew(target, 1.0)
    return solve_alpha_for_skew(target, RHS_SWEEP_BETA), RHS_SWEEP_BETA


def sample_values(
    k: int, alpha: float, beta: float, rng: np.random.Generator, size: int
) -> np.ndarray:
    """``size`` domain indices in ``[0, k)``, each ``floor(u * k)`` for u ~ Beta."""
    if k < 1:
        raise ContractError("domain size must be at least 1")
    ga = rng.standard_gamma(alpha, size)
    gb = rng.standard_gamma(beta, size)
    total = ga + gb
    u = np.divide(ga, total, out=np.zeros(size), where=total > 0)
    return np.minimum(np.floor(u * k).astype(np.int64), k - 1)


def sample_value(k: int, alpha: float, beta: float, rng: np.random.Generator) -> int:
    return int(sample_values(k, alpha, beta, rng, 1)[0])


# Generator parameters and outputs


@dataclass(frozen=True)
class GenParams:
    n_rows: int
    dom_x: int
    dom_y: int
    alpha_x: float
    beta_x: float
    alpha_y: float
    beta_y: float
    eta: float
    seed: int
    # place every X value at least once, so that |dom_R(X)| == dom_x exactly
    cover_x: bool = False

    def __post_init__(self) -> None:
        if self.n_rows < 1 or self.dom_x < 1 or self.dom_y < 1:
            raise ContractError("sizes must be positive")
        if min(self.alpha_x, self.beta_x, self.alpha_y, self.beta_y) <= 0:
            raise ContractError("Beta shapes must be positive")
        if not 0.0 <= self.eta <= 1.0:
            raise ContractError("eta must lie in [0, 1]")
        if self.cover_x and self.dom_x > self.n_rows:
            raise ContractError("cover_x needs dom_x <= n_rows")


def _sample_shapes(rng: np.random.Generator, max_skew: float) -> tuple[float, float]:
    while True:
        alpha = 1.0 - rng.random()
        beta = rng.uniform(*BETA_RANGE)
        if beta_skew(alpha, beta) <= max_skew:
            return alpha, beta


def sample_params(
    rng: np.random.Generator,
    seed: int,
    n_rows_range: tuple[int, int] = N_ROWS_RANGE,
    max_skew: float = MAX_DEFAULT_SKEW,
) -> GenParams:
    """Draw generator parameters uniformly from the default ranges."""
    n = int(rng.integers(n_rows_range[0], n_rows_range[1], endpoint=True))
    dom_x = int(rng.integers(math.ceil(n / 5), math.floor(3 * n / 4), endpoint=True))
    dom_y = int(rng.integers(5, max(5, dom_x // 2), endpoint=True))
    ax, bx = _sample_shapes(rng, max_skew)
    ay, by = _sample_shapes(rng, max_skew)
    eta = float(rng.uniform(*ETA_RANGE))
    return GenParams(n, dom_x, dom_y, ax, bx, ay, by, eta, seed)


@dataclass(frozen=True)
class LabeledRelation:
    relation: Relation
    label: str  # "fd" or "nonfd"
    ground_truth: GroundTruth
    controlled_value: float
    params: GenParams | None = None
    step: int = 0
    candidate: FdCandidate = DESIGN_FD
    corrupted_rows: tuple[int, ...] = field(default=(), compare=False)


def _x_column(p: GenParams, rng: np.random.Generator) -> np.ndarray:
    if not p.cover_x:
        return sample_values(p.dom_x, p.alpha_x, p.beta_x, rng, p.n_rows)
    rest = sample_values(p.dom_x, p.alpha_x, p.beta_x, rng, p.n_rows - p.dom_x)
    return rng.permutation(np.concatenate([np.arange(p.dom_x), rest]))


def _to_relation(name: str, xs: np.ndarray, ys: np.ndarray) -> Relation:
    return Relation(
        name,
        (LHS_ATTR, RHS_ATTR),
        (tuple(str(v) for v in xs.tolist()), tuple(str(v) for v in ys.tolist())),
    )


def _truth_for(R: Relation, label: str) -> GroundTruth:
    if label == "nonfd":
        return GroundTruth(R.name, [], [])
    if contingency(R, DESIGN_FD.lhs, DESIGN_FD.rhs).is_satisfied():
        return GroundTruth(R.name, [DESIGN_FD], [])
    return GroundTruth(R.name, [], [DESIGN_FD])


def gen_nonfd(
    p: GenParams, name: str = "nonfd", controlled_value: float = math.nan, step: int = 0
) -> LabeledRelation:
    """X and Y drawn independently from their Beta-discretised domains."""
    rng = make_rng(p.seed, 0)
    xs = _x_column(p, rng)
    ys = sample_values(p.dom_y, p.alpha_y, p.beta_y, rng, p.n_rows)
    R = _to_relation(name, xs, ys)
    return LabeledRelation(R, "nonfd", _truth_for(R, "nonfd"), controlled_value, p, step)


def copy_donor_values(
    values: Sequence[str], rng: np.random.Generator, replaced: Sequence[str]
) -> list[str]:
    """For each value in ``replaced``, the value of a uniformly chosen row of
    ``values`` that differs from it."""
    counts = Counter(values)
    domain = sorted(counts)
    weights = np.array([counts[v] for v in domain], dtype=float)
    pos = {v: i for i, v in enumerate(domain)}
    out = []
    for v in replaced:
        w = weights.copy()
        if v in pos:
            w[pos[v]] = 0.0
        total = w.sum()
        if total <= 0:
            raise RefusalError("no row with a different value is available as copy donor")
        out.append(domain[int(rng.choice(len(domain), p=w / total))])
    return out


def gen_fd(
    p: GenParams, name: str = "fd", controlled_value: float = math.nan, step: int = 0
) -> LabeledRelation:
    """A relation built to satisfy X -> Y, then passed through the copy channel.

    Exactly ``floor(eta * n_rows)`` distinct rows get their Y value replaced by
    the Y value of a random other row carrying a different Y value.
    """
    rng = make_rng(p.seed, 1)
    dictionary = sample_values(p.dom_y, p.alpha_y, p.beta_y, rng, p.dom_x)
    xs = _x_column(p, rng)
    ys = [str(v) for v in dictionary[xs].tolist()]
    k = math.floor(p.eta * p.n_rows)
    rows: tuple[int, ...] = ()
    if k > 0:
        rows = tuple(sorted(int(i) for i in rng.choice(p.n_rows, size=k, replace=False)))
        donors = copy_donor_values(ys, rng, [ys[i] for i in rows])
        for i, v in zip(rows, donors):
            ys[i] = v
    R = Relation(name, (LHS_ATTR, RHS_ATTR), (tuple(str(v) for v in xs.tolist()), tuple(ys)))
    return LabeledRelation(R, "fd", _truth_for(R, "fd"), controlled_value, p, step, DESIGN_FD, rows)


def _linspace(lo: float, hi: float, steps: int) -> list[float]:
    if steps == 1:
        return [lo]
    return [lo + (hi - lo) * i / (steps - 1) for i in range(steps)]


def _params_for(
    kind: str, value: float, rng: np.random.Generator, seed: int, n_rows_range: tuple[int, int]
) -> GenParams:
    p = sample_params(rng, seed, n_rows_range)
    if kind == "error":
        return replace(p, eta=value)
    if kind == "lhs":
        dom_x = max(1, round(value * p.n_rows))
        dom_y = int(rng.integers(5, max(5, dom_x // 2), endpoint=True))
        return replace(p, dom_x=dom_x, dom_y=dom_y, cover_x=True)
    if kind == "rhs":
        ay, by = beta_shapes_for_skew(value)
        return replace(p, alpha_y=ay, beta_y=by)
    raise ContractError(f"unknown benchmark kind {kind!r}")


def _generate(kind, label, value, step, index, seed, n_rows_range) -> LabeledRelation:
    make = gen_fd if label == "fd" else gen_nonfd
    name = f"{kind}_{step:03d}_{label}_{index:05d}"
    last: RefusalError | None = None
    for attempt in range(MAX_RETRIES):
        s = derive_seed(seed, index, attempt)
        p = _params_for(kind, value, make_rng(s, 2), s, n_rows_range)
        try:
            return make(p, name, value, step)
        except RefusalError as exc:
            last = exc
    raise RefusalError(f"relation {index} ({name}): {last}")


def gen_benchmark(
    kind: str,
    steps: int,
    per_step: int,
    seed: int,
    n_rows_range: tuple[int, int] = N_ROWS_RANGE,
) -> list[LabeledRelation]:
    """Generate one of the three sensitivity benchmarks.

    ``error`` sweeps the error rate over [0, 0.1], ``lhs`` the LHS-uniqueness
    over [0.1, 0.9] and ``rhs`` the target Y skew over [0, 10]. Each step gets
    ``per_step`` fd relations and ``per_step`` nonfd relations; relation ``i``
    is drawn from a seed derived from ``(seed, i)``. A draw whose copy channel
    finds no donor (constant Y) is redrawn from the next derived seed.
    """
    if steps < 1 or per_step < 1:
        raise ContractError("steps and per_step must be at least 1")
    sweep = {"error": ERROR_SWEEP, "lhs": LHS_SWEEP, "rhs": RHS_SWEEP}.get(kind)
    if sweep is None:
        raise ContractError(f"unknown benchmark kind {kind!r}")
    out = []
    index = 0
    for label in ("fd", "nonfd"):
        for step, value in enumerate(_linspace(*sweep, steps)):
            for _ in range(per_step):
                out.append(_generate(kind, label, value, step, index, seed, n_rows_range))
                index += 1
    return out


# Error injection on existing relations

CHANNELS = ("copy", "typo", "bogus")


@dataclass(frozen=True)
class ErrorSpec:
    channel: str
    eta: float
    seed: int = 0

    def __post_init__(self) -> None:
        if self.channel not in CHANNELS:
            raise ContractError(f"unknown error channel {self.channel!r}")
        if not 0.0 <= self.eta <= 1.0:
            raise ContractError("eta must lie in [0, 1]")


def typo_variants(v: str) -> tuple[str, str, str]:
    """Three fixed misspellings of ``v``, each different from ``v``."""
    doubled = v + v[-1] if v else "_"
    if len(v) >= 2 and v[0] != v[1]:
        swapped = v[1] + v[0] + v[2:]
    else:
        swapped = "~" + v
    return doubled, swapped, v + "_t"


@dataclass(frozen=True)
class InjectionResult:
    relation: Relation
    new_afds: list[FdCandidate]
    selected: list[FdCandidate]
    modified_rows: dict[FdCandidate, tuple[int, ...]]


def _pick_rows(
    groups: dict[tuple, list[int]], k: int, rng: np.random.Generator
) -> tuple[int, ...]:
    pool: list[int] = []
    for key in sorted(groups):
        rows = groups[key]
        cap = len(rows) // 2
        if cap:
            pool.extend(rng.permutation(rows)[:cap].tolist())
    chosen = rng.choice(len(pool), size=k, replace=False)
    return tuple(sorted(pool[i] for i in chosen))


def inject_errors(
    R: Relation,
    perfect_fds: Iterable[FdCandidate],
    spec: ErrorSpec,
    approximate_fds: Iterable[FdCandidate] = (),
) -> InjectionResult:
    """Corrupt the RHS of selected perfect FDs through one error channel.

    FDs are visited in canonical order. One is selected only if its RHS is
    not the RHS of an earlier selection or of an existing approximate FD, and
    is not in the LHS of an earlier selection. A selected FD gets
    ``k = floor(eta * n)`` RHS cells changed (``n`` counting its NULL-free
    rows) with at most ``floor(N_x / 2)`` per LHS group, which keeps every
    group's majority value and so guarantees a violation. FDs that cannot
    absorb ``k`` changes under that cap are left alone.

    ``new_afds`` lists every input perfect FD the corrupted relation violates,
    including any broken as a side effect of another FD's corruption.
    """
    if not 0.0 <= spec.eta <= 1.0:
        raise ContractError("eta must lie in [0, 1]")
    perfect = sorted(set(perfect_fds))
    for fd in perfect:
        if len(fd.rhs) != 1:
            raise ContractError(f"only single-attribute RHS can be corrupted: {fd}")
        if not contingency(R, fd.lhs, fd.rhs).is_satisfied():
            raise ContractError(f"perfect FD {fd} is violated by the input relation")
    afd_rhs = {a for fd in approximate_fds for a in fd.rhs}
    rng = make_rng(spec.seed, 3)
    used_rhs: set[str] = set()
    used_lhs: set[str] = set()
    current = R
    selected: list[FdCandidate] = []
    modified: dict[FdCandidate, tuple[int, ...]] = {}
    bogus_counter = 0
    for fd in perfect:
        y = fd.rhs[0]
        if y in used_rhs or y in afd_rhs or y in used_lhs:
            continue
        xcols = [current.column(a) for a in fd.lhs]
        ycol = list(current.column(y))
        groups: dict[tuple, list[int]] = {}
        for i, (xv, yv) in enumerate(zip(zip(*xcols), ycol)):
            if yv is None or None in xv:
                continue
            groups.setdefault(xv, []).append(i)
        n_eff = sum(len(g) for g in groups.values())
        k = math.floor(spec.eta * n_eff)
        budget = sum(len(g) // 2 for g in groups.values())
        if k == 0 or budget < k:
            continue
        rows = _pick_rows(groups, k, rng)
        originals = [ycol[i] for i in rows]
        if spec.channel == "copy":
            try:
                new_values = copy_donor_values([v for v in ycol if v is not None], rng, originals)
            except RefusalError:
                continue
        elif spec.channel == "typo":
            new_values = [typo_variants(v)[int(rng.integers(3))] for v in originals]
        else:
            taken = {v for col in current.columns for v in col if v is not None}
            new_values = []
            for _ in originals:
                while f"bogus_{bogus_counter}" in taken:
                    bogus_counter += 1
                new_values.append(f"bogus_{bogus_counter}")
                bogus_counter += 1
        for i, v in zip(rows, new_values):
            ycol[i] = v
        current = current.with_column(y, ycol)
        selected.append(fd)
        modified[fd] = rows
        used_rhs.add(y)
        used_lhs.update(fd.lhs)
    new_afds = [fd for fd in perfect if not contingency(current, fd.lhs, fd.rhs).is_satisfied()]
    return InjectionResult(current, new_afds, selected, modified)


def gen_planted_relation(
    name: str,
    n_rows: int,
    n_attrs: int,
    n_planted: int,
    eta: float,
    seed: int,
) -> LabeledRelation:
    """A wide relation with ``n_planted`` X_i -> Y_i pairs and independent filler.

    Each planted pair is generated like :func:`gen_fd` (copy channel at rate
    ``eta``); the remaining columns are independent Beta-discretised draws
    whose domain sizes are log-uniform on ``[2, n_rows]``.
    """
    if 2 * n_planted > n_attrs:
        raise ContractError("not enough attributes for the planted pairs")
    rng = make_rng(seed, 4)
    attrs = [f"A{i}" for i in range(n_attrs)]
    columns: list[tuple[str, ...]] = []
    planted: list[FdCandidate] = []
    for i in range(n_planted):
        for attempt in range(MAX_RETRIES):
            s = derive_seed(seed, i, attempt)
            p = replace(sample_params(make_rng(s, 2), s, (n_rows, n_rows)), eta=eta)
            try:
                lr = gen_fd(p)
                break
            except RefusalError:
                continue
        else:
            raise RefusalError(f"planted pair {i} found no copy donor")
        columns.extend(lr.relation.columns)
        planted.append(FdCandidate((attrs[2 * i],), (attrs[2 * i + 1],)))
    for j in range(2 * n_planted, n_attrs):
        p = sample_params(rng, seed, (n_rows, n_rows))
        # log-uniform domain sizes span near-constant to near-key columns
        dom = int(round(math.exp(rng.uniform(math.log(2), math.log(n_rows)))))
        columns.append(tuple(str(v) for v in sample_values(dom, p.alpha_x, p.beta_x, rng, n_rows).tolist()))
    R = Relation(name, tuple(attrs), tuple(columns))
    approx = [fd for fd in planted if not contingency(R, fd.lhs, fd.rhs).is_satisfied()]
    perfect = [fd for fd in planted if fd not in approx]
    return LabeledRelation(R, "planted", GroundTruth(name, perfect, approx), eta)


# Corpus files


def params_to_json(p: GenParams | None) -> dict | None:
    return None if p is None else asdict(p)


def write_corpus(
    bench: Sequence[LabeledRelation], outdir: str | Path, meta: dict | None = None
) -> Path:
    """Write one CSV per relation plus ``manifest.json``; returns the manifest path."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    entries = []
    for lr in bench:
        csv_name = f"{lr.relation.name}.csv"
        lr.relation.to_csv(outdir / csv_name)
        entries.append(
            {
                "name": lr.relation.name,
                "csv": csv_name,
                "label": lr.label,
                "controlled_value": lr.controlled_value,
                "step": lr.step,
                "candidate": lr.candidate.to_json(),
                "params": params_to_json(lr.params),
                "truth": lr.ground_truth.to_json(),
            }
        )
    manifest = {"format": CORPUS_FORMAT, "rng": RNG_SCHEME, **(meta or {}), "relations": entries}
    path = outdir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_corpus(manifest_path: str | Path) -> list[LabeledRelation]:
    """Load a corpus from its manifest, or from the directory holding it."""
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / "manifest.json"
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{manifest_path}: {exc}") from None
    if manifest.get("format") != CORPUS_FORMAT:
        raise ParseError(f"{manifest_path}: unsupported corpus format {manifest.get('format')!r}")
    out = []
    for e in manifest["relations"]:
        R = load_csv(manifest_path.parent / e["csv"], name=e["name"])
        params = GenParams(**e["params"]) if e.get("params") else None
        out.append(
            LabeledRelation(
                R,
                e["label"],
                GroundTruth.from_json(e["truth"]),
                float(e["controlled_value"]),
                params,
                int(e.get("step", 0)),
                FdCandidate.from_json(e.get("candidate", DESIGN_FD.to_json())),
            )
        )
    return out

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import replace

import numpy as np
import pytest

from afdlab import infotheory as it
from afdlab.benchgen import (
    DESIGN_FD,
    ErrorSpec,
    GenParams,
    beta_shapes_for_skew,
    beta_skew,
    derive_seed,
    gen_benchmark,
    gen_fd,
    gen_nonfd,
    gen_planted_relation,
    inject_errors,
    load_corpus,
    make_rng,
    sample_params,
    sample_value,
    sample_values,
    solve_alpha_for_skew,
    solve_beta_for_skew,
    typo_variants,
    write_corpus,
)
from afdlab.discovery import FdCandidate
from afdlab.errors import ContractError, RefusalError
from afdlab.measures import score
from afdlab.relation import Relation, contingency

BASE = GenParams(800, 200, 20, 1.0, 2.0, 1.0, 2.0, 0.0, 17)


def test_beta_skew_examples():
    assert beta_skew(1, 1) == 0
    assert beta_skew(2, 2) == 0
    assert beta_skew(1, 9) == pytest.approx(16 * math.sqrt(11) / 36, abs=1e-12)
    with pytest.raises(ContractError):
        beta_skew(0, 1)


def test_solve_beta_examples():
    assert solve_beta_for_skew(0) == 1.0
    assert solve_beta_for_skew(1.4741) == pytest.approx(9, abs=1e-3)
    assert beta_skew(1, solve_beta_for_skew(0.5)) == pytest.approx(0.5, abs=1e-8)


@pytest.mark.parametrize("s", [2.0, 5.0, 10.0])
def test_skew_above_two_needs_alpha_below_one(s):
    # with alpha = 1 the skew approaches 2 from below as beta grows, so these
    # targets are out of reach; a smaller alpha lifts the ceiling to 2/sqrt(alpha)
    with pytest.raises(RefusalError):
        solve_beta_for_skew(s, alpha=1.0)
    assert beta_skew(0.01, solve_beta_for_skew(s, alpha=0.01)) == pytest.approx(s, abs=1e-8)


def test_shapes_for_skew_stay_in_default_ranges():
    for s in np.linspace(0, 10, 41):
        a, b = beta_shapes_for_skew(float(s))
        assert 0 < a <= 1 and 1 <= b <= 10
        assert beta_skew(a, b) == pytest.approx(s, abs=1e-8)
    assert beta_shapes_for_skew(0.0) == (1.0, 1.0)
    assert beta_skew(solve_alpha_for_skew(3.0, 10.0), 10.0) == pytest.approx(3.0, abs=1e-8)


def test_sample_value_basics():
    rng = make_rng(1)
    assert {sample_value(1, 0.3, 4, rng) for _ in range(50)} == {0}
    with pytest.raises(ContractError):
        sample_value(0, 1, 1, rng)


def test_sample_values_uniform_frequencies():
    counts = np.bincount(sample_values(10, 1.0, 1.0, make_rng(2), 100_000), minlength=10)
    sigma = math.sqrt(100_000 * 0.1 * 0.9)
    assert np.all(np.abs(counts - 10_000) <= 3 * sigma)


def test_sample_values_right_tailed():
    counts = np.bincount(sample_values(10, 0.5, 5.0, make_rng(3), 100_000), minlength=10)
    assert counts[0] > counts[9]


def test_derived_seeds_are_stable_and_distinct():
    assert derive_seed(1, 2) == derive_seed(1, 2)
    assert len({derive_seed(7, i) for i in range(100)}) == 100
    assert 0 <= derive_seed(3) < 2**63


def test_sample_params_ranges():
    rng = make_rng(9)
    for _ in range(200):
        p = sample_params(rng, 0)
        assert 100 <= p.n_rows <= 10_000
        assert p.n_rows / 5 <= p.dom_x <= 3 * p.n_rows / 4
        assert 5 <= p.dom_y <= max(5, p.dom_x / 2)
        assert 0.005 <= p.eta <= 0.02
        for a, b in ((p.alpha_x, p.beta_x), (p.alpha_y, p.beta_y)):
            assert 0 < a <= 1 and 1 <= b <= 10 and beta_skew(a, b) <= 1


def test_gen_nonfd_determinism_and_degenerate():
    assert gen_nonfd(BASE).relation == gen_nonfd(BASE).relation
    assert gen_nonfd(BASE).relation != gen_nonfd(replace(BASE, seed=18)).relation
    one = gen_nonfd(replace(BASE, dom_x=1, dom_y=1))
    assert set(one.relation.rows()) == {("0", "0")}
    assert one.label == "nonfd" and one.ground_truth.approximate_fds == []


def test_gen_nonfd_is_nearly_independent():
    p = GenParams(10_000, 20, 20, 1.0, 1.5, 1.0, 2.0, 0.0, 4)
    t = contingency(gen_nonfd(p).relation, ["X"], ["Y"])
    assert it.mutual_information(t) <= 0.05


def test_gen_fd_without_errors_is_satisfied():
    for seed in range(10):
        lr = gen_fd(replace(BASE, seed=seed))
        assert contingency(lr.relation, ["X"], ["Y"]).is_satisfied()
        assert lr.ground_truth.perfect_fds == [DESIGN_FD]


def test_gen_fd_copy_channel_contract():
    clean = gen_fd(BASE).relation
    lr = gen_fd(replace(BASE, eta=0.03))
    R = lr.relation
    k = math.floor(0.03 * BASE.n_rows)
    assert R.column("X") == clean.column("X")
    changed = [i for i, (a, b) in enumerate(zip(clean.column("Y"), R.column("Y"))) if a != b]
    assert len(changed) == k == len(lr.corrupted_rows)
    assert set(R.column("Y")) <= set(clean.column("Y"))
    assert lr.ground_truth.approximate_fds == [DESIGN_FD]
    assert score("g3", contingency(R, ["X"], ["Y"])).value >= 1 - 0.03


def test_gen_fd_refuses_constant_rhs():
    with pytest.raises(RefusalError):
        gen_fd(replace(BASE, dom_y=1, eta=0.01))


def test_cover_x_realises_uniqueness():
    p = replace(BASE, dom_x=720, cover_x=True)
    R = gen_fd(p).relation
    assert len(set(R.column("X"))) == 720
    with pytest.raises(ContractError):
        replace(BASE, dom_x=900, cover_x=True)


def test_gen_benchmark_layout():
    bench = gen_benchmark("error", 5, 2, seed=3, n_rows_range=(100, 300))
    assert len(bench) == 20
    assert sum(lr.label == "fd" for lr in bench) == 10
    assert sorted({lr.controlled_value for lr in bench}) == pytest.approx([0, 0.025, 0.05, 0.075, 0.1])
    for lr in bench:
        assert lr.params.eta == lr.controlled_value
        assert 100 <= lr.params.n_rows <= 300
    again = gen_benchmark("error", 5, 2, seed=3, n_rows_range=(100, 300))
    assert [lr.relation for lr in bench] == [lr.relation for lr in again]
    assert len({lr.relation.name for lr in bench}) == 20


def test_gen_benchmark_lhs_and_rhs_sweeps():
    lhs = gen_benchmark("lhs", 3, 2, seed=1, n_rows_range=(200, 400))
    for lr in lhs:
        u = len(set(lr.relation.column("X"))) / len(lr.relation)
        assert u == pytest.approx(lr.controlled_value, abs=1 / len(lr.relation))
    rhs = gen_benchmark("rhs", 3, 2, seed=1, n_rows_range=(200, 400))
    first = [lr for lr in rhs if lr.step == 0]
    assert all(lr.controlled_value == 0 and (lr.params.alpha_y, lr.params.beta_y) == (1.0, 1.0) for lr in first)
    last = [lr for lr in rhs if lr.step == 2]
    assert all(beta_skew(lr.params.alpha_y, lr.params.beta_y) == pytest.approx(10) for lr in last)
    with pytest.raises(ContractError):
        gen_benchmark("middle", 3, 2, seed=1)
    with pytest.raises(ContractError):
        gen_benchmark("lhs", 0, 2, seed=1)


def test_corpus_round_trip(tmp_path):
    bench = gen_benchmark("rhs", 2, 2, seed=5, n_rows_range=(100, 200))
    path = write_corpus(bench, tmp_path / "c", {"kind": "rhs"})
    manifest = json.loads(path.read_text())
    assert manifest["rng"].startswith("philox")
    assert len(manifest["relations"]) == 8
    back = load_corpus(path)
    assert [lr.relation for lr in load_corpus(path.parent)] == [lr.relation for lr in back]
    for a, b in zip(bench, back):
        assert a.relation == b.relation
        assert a.params == b.params and a.ground_truth == b.ground_truth
        assert (a.label, a.step, a.candidate) == (b.label, b.step, b.candidate)
    path2 = write_corpus(gen_benchmark("rhs", 2, 2, seed=5, n_rows_range=(100, 200)), tmp_path / "d")
    for name in ("manifest.json", f"{bench[0].relation.name}.csv"):
        a_text = (tmp_path / "c" / name).read_text()
        b_text = (tmp_path / "d" / name).read_text()
        if name == "manifest.json":
            a_text = json.dumps({k: v for k, v in json.loads(a_text).items() if k != "kind"})
            b_text = json.dumps(json.loads(b_text))
        assert a_text == b_text


def test_typo_variants_differ_from_original():
    for v in ["abc", "a", "", "aab", "zz", "~", "12"]:
        variants = typo_variants(v)
        assert len(variants) == 3 and v not in variants
    assert typo_variants("abc") == ("abcc", "bac", "abc_t")
    assert typo_variants("a") == ("aa", "~a", "a_t")


def _two_fd_relation(n: int = 600, seed: int = 0) -> tuple[Relation, list[FdCandidate]]:
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 60, n)
    b = (a * 7) % 13
    c = (a * 3) % 5
    d = rng.integers(0, 4, n)
    R = Relation("R", ("A", "B", "C", "D"),
                 tuple(tuple(str(v) for v in col) for col in (a, b, c, d)))
    return R, [FdCandidate("A", "B"), FdCandidate("A", "C")]


@pytest.mark.parametrize("channel", ["copy", "typo", "bogus"])
@pytest.mark.parametrize("eta", [0.01, 0.05])
def test_inject_channel_contract(channel, eta):
    R, fds = _two_fd_relation()
    res = inject_errors(R, fds, ErrorSpec(channel, eta, seed=2))
    k = math.floor(eta * len(R))
    assert res.selected == fds
    assert sorted(res.new_afds) == fds
    for fd in fds:
        y = fd.rhs[0]
        before, after = R.column(y), res.relation.column(y)
        diff = [i for i, (u, v) in enumerate(zip(before, after)) if u != v]
        assert diff == list(res.modified_rows[fd]) and len(diff) == k
        t = contingency(res.relation, fd.lhs, fd.rhs)
        assert not t.is_satisfied()
        assert score("g3", t).value >= 1 - eta
        if channel == "copy":
            assert set(after) <= set(before)
        if channel == "bogus":
            assert len(set(after)) == len(set(before)) + k
        if channel == "typo":
            for i in diff:
                assert after[i] in typo_variants(before[i])
    assert res.relation.column("A") == R.column("A")
    assert res.relation.column("D") == R.column("D")


def test_inject_is_deterministic_and_eta_zero_is_identity():
    R, fds = _two_fd_relation()
    spec = ErrorSpec("typo", 0.02, seed=5)
    assert inject_errors(R, fds, spec).relation == inject_errors(R, fds, spec).relation
    res = inject_errors(R, fds, ErrorSpec("copy", 0.0))
    assert res.relation == R and res.new_afds == [] and res.selected == []


def test_inject_selection_rules():
    R, fds = _two_fd_relation()
    # C is already the RHS of an approximate FD
    res = inject_errors(R, fds, ErrorSpec("copy", 0.02), approximate_fds=[FdCandidate("D", "C")])
    assert res.selected == [FdCandidate("A", "B")]
    # a second FD with the same RHS is skipped
    R2 = R.with_column("D", R.column("A"))
    res2 = inject_errors(R2, [FdCandidate("A", "B"), FdCandidate("D", "B")], ErrorSpec("bogus", 0.02))
    assert res2.selected == [FdCandidate("A", "B")]
    # D -> A comes after A -> B, whose LHS is A, so it is skipped
    res3 = inject_errors(R2, [FdCandidate("D", "A"), FdCandidate("A", "B")], ErrorSpec("typo", 0.02))
    assert res3.selected == [FdCandidate("A", "B")]
    # the corruption of B breaks no listed FD other than A -> B
    assert res3.new_afds == [FdCandidate("A", "B")]


def test_inject_skips_fds_without_budget():
    # every X group is a singleton, so no modification can be made
    R = Relation.from_rows("K", ["K", "V"], [(str(i), str(i % 3)) for i in range(100)])
    res = inject_errors(R, [FdCandidate("K", "V")], ErrorSpec("copy", 0.05))
    assert res.selected == [] and res.relation == R


def test_inject_contract_errors():
    R, fds = _two_fd_relation()
    with pytest.raises(ContractError):
        ErrorSpec("copy", 1.5)
    with pytest.raises(ContractError):
        ErrorSpec("swap", 0.1)
    with pytest.raises(ContractError):
        inject_errors(R, [FdCandidate("D", "B")], ErrorSpec("copy", 0.01))


def test_planted_relation_design():
    lr = gen_planted_relation("P", 500, 8, 2, 0.01, seed=3)
    assert lr.relation.attributes == tuple(f"A{i}" for i in range(8))
    assert lr.ground_truth.approximate_fds == [FdCandidate("A0", "A1"), FdCandidate("A2", "A3")]
    assert gen_planted_relation("P", 500, 8, 2, 0.01, seed=3).relation == lr.relation
    with pytest.raises(ContractError):
        gen_planted_relation("P", 500, 3, 2, 0.01, seed=3)

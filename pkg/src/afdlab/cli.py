"""Command-line interface: ``afdlab score|discover|synth|inject|eval|sensitivity``.

Exit codes: 0 success, 1 partial success (some candidates were refused),
2 usage or contract errors. Output formats are described in FORMATS.md.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from collections.abc import Sequence
from pathlib import Path

from . import __version__
from .benchgen import (
    CHANNELS,
    N_ROWS_RANGE,
    ErrorSpec,
    gen_benchmark,
    inject_errors,
    load_corpus,
    write_corpus,
)
from .discovery import FdCandidate, above_threshold, check_epsilon, enumerate_candidates, score_all
from .errors import AfdError, ContractError
from .evaluation import EvalItem, GroundTruth, evaluate, sensitivity_curve
from .measures import ALL_MEASURES, DEFAULT_SFI_ALPHA, MeasureId
from .relation import DEFAULT_NULL_TOKENS, load_csv

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2
DEFAULT_EPSILON = 0.9


class UsageError(Exception):
    pass


def parse_measures(text: str) -> list[MeasureId]:
    names = [t.strip() for t in text.split(",") if t.strip()]
    if not names:
        raise ContractError("empty measure list")
    if names == ["all"]:
        return list(ALL_MEASURES)
    out = []
    for n in names:
        m = MeasureId.parse(n)
        if m not in out:
            out.append(m)
    return out


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--null-token", action="append", dest="null_tokens", metavar="TOKEN",
                   help="cell value read as NULL (repeatable; default: empty string)")
    p.add_argument("--delimiter", default=",", help="CSV field delimiter (default ',')")
    p.add_argument("--seed", type=int, default=0, help="master random seed (default 0)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    p.add_argument("--format", choices=("json", "csv"), default=None, help="output format")
    p.add_argument("-o", "--output", default="-", help="output file (default stdout)")


def _scoring(p: argparse.ArgumentParser, measures_default: str = "all") -> None:
    p.add_argument("--measures", default=measures_default,
                   help="comma-separated measure names or 'all'")
    p.add_argument("--max-lhs", type=int, default=1, help="largest LHS size enumerated (default 1)")
    p.add_argument("--sfi-alpha", type=float, default=DEFAULT_SFI_ALPHA)
    p.add_argument("--time-budget", type=float, default=None,
                   help="per-candidate seconds for rfi_plus, rfi_prime_plus and sfi")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="afdlab", description="Approximate FD scoring and evaluation.")
    parser.add_argument("--version", action="version", version=f"afdlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score every candidate FD of a CSV relation")
    p.add_argument("input")
    _common(p)
    _scoring(p)

    p = sub.add_parser("discover", help="list violated FDs scoring in [epsilon, 1)")
    p.add_argument("input")
    _common(p)
    _scoring(p, measures_default="mu_plus")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)

    p = sub.add_parser("synth", help="generate a synthetic sensitivity corpus")
    _common(p)
    _bench_args(p)
    p.add_argument("--outdir", required=True)

    p = sub.add_parser("inject", help="inject errors into the perfect FDs of a relation")
    p.add_argument("input")
    _common(p)
    p.add_argument("--truth", required=True, help="ground-truth JSON for the input")
    p.add_argument("--channel", choices=CHANNELS, required=True)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-truth", required=True)

    p = sub.add_parser("eval", help="AUC-PR, rank at max recall and winning numbers")
    _common(p)
    _scoring(p)
    p.add_argument("--corpus", action="append", default=[], metavar="MANIFEST", help="corpus manifest.json or its directory")
    p.add_argument("--pair", action="append", nargs=2, default=[], metavar=("CSV", "TRUTH"))

    p = sub.add_parser("sensitivity", help="separation per step of a synthetic sweep")
    _common(p)
    _bench_args(p)
    p.add_argument("--measures", default="all")
    p.add_argument("--sfi-alpha", type=float, default=DEFAULT_SFI_ALPHA)
    return parser


def _bench_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kind", choices=("error", "lhs", "rhs"), required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--per-step", type=int, required=True)
    p.add_argument("--n-min", type=int, default=N_ROWS_RANGE[0])
    p.add_argument("--n-max", type=int, default=N_ROWS_RANGE[1])


# Output helpers


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, allow_nan=True) + "\n"


def _csv_text(records: Sequence[dict], fields: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in records:
        w.writerow({k: (";".join(v) if isinstance(v, list) else ("" if v is None else v))
                    for k, v in r.items()})
    return buf.getvalue()


def _emit(args, text: str) -> None:
    if args.output == "-":
        sys.stdout.write(text)
    else:
        Path(args.output).write_text(text, encoding="utf-8")


def _null_tokens(args) -> frozenset[str]:
    return frozenset(args.null_tokens) if args.null_tokens else DEFAULT_NULL_TOKENS


def _load(args, path: str, name: str | None = None):
    return load_csv(path, _null_tokens(args), args.delimiter, name=name)


SCORE_FIELDS = ("relation", "lhs", "rhs", "measure", "score", "satisfied",
                "n_effective", "lhs_uniqueness", "rhs_skew", "error")


# Subcommands


def cmd_score(args) -> int:
    measures = parse_measures(args.measures)
    R = _load(args, args.input)
    ranked = score_all(R, enumerate_candidates(R, args.max_lhs), measures,
                       sfi_alpha=args.sfi_alpha, time_budget=args.time_budget, jobs=args.jobs)
    records = [sc.to_record() for m in measures for sc in ranked[m]]
    if (args.format or "json") == "csv":
        _emit(args, _csv_text(records, SCORE_FIELDS))
    else:
        _emit(args, _json_text({"relation": R.name, "measures": [m.value for m in measures],
                                "records": records}))
    return EXIT_PARTIAL if any(r["error"] for r in records) else EXIT_OK


def cmd_discover(args) -> int:
    epsilon = check_epsilon(args.epsilon)
    measures = parse_measures(args.measures)
    R = _load(args, args.input)
    ranked = score_all(R, enumerate_candidates(R, args.max_lhs), measures,
                       sfi_alpha=args.sfi_alpha, time_budget=args.time_budget, jobs=args.jobs)
    found = [sc.to_record() for m in measures for sc in above_threshold(ranked[m], epsilon)]
    errors = sum(sc.error is not None for m in measures for sc in ranked[m])
    if (args.format or "json") == "csv":
        for r in found:
            r["epsilon"] = epsilon
        _emit(args, _csv_text(found, SCORE_FIELDS + ("epsilon",)))
    else:
        _emit(args, _json_text({"relation": R.name, "epsilon": epsilon,
                                "measures": [m.value for m in measures],
                                "discovered": found, "errors": errors}))
    return EXIT_PARTIAL if errors else EXIT_OK


def _n_range(args) -> tuple[int, int]:
    if not 1 <= args.n_min <= args.n_max:
        raise ContractError("need 1 <= --n-min <= --n-max")
    return args.n_min, args.n_max


def cmd_synth(args) -> int:
    bench = gen_benchmark(args.kind, args.steps, args.per_step, args.seed, _n_range(args))
    meta = {"kind": args.kind, "steps": args.steps, "per_step": args.per_step,
            "seed": args.seed, "n_rows_range": list(_n_range(args))}
    path = write_corpus(bench, args.outdir, meta)
    n_fd = sum(lr.label == "fd" for lr in bench)
    summary = {"manifest": str(path), "relations": len(bench), "fd": n_fd, "nonfd": len(bench) - n_fd}
    if (args.format or "json") == "csv":
        _emit(args, _csv_text([summary], list(summary)))
    else:
        _emit(args, _json_text(summary))
    return EXIT_OK


def _read_truth(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ContractError(f"{path}: invalid JSON ({exc})") from None


def cmd_inject(args) -> int:
    raw = _read_truth(args.truth)
    truth = GroundTruth.from_json(raw)
    R = _load(args, args.input, name=truth.relation_name)
    truth.check_against(R)
    spec = ErrorSpec(args.channel, args.eta, args.seed)
    res = inject_errors(R, truth.perfect_fds, spec, truth.approximate_fds)
    moved = set(res.new_afds)
    new_truth = GroundTruth(
        truth.relation_name,
        [fd for fd in truth.perfect_fds if fd not in moved],
        truth.approximate_fds + res.new_afds,
    )
    null_token = sorted(_null_tokens(args))[0]
    res.relation.to_csv(args.out_csv, null_token=null_token, delimiter=args.delimiter)
    out = new_truth.to_json() | {"channel": args.channel, "eta": args.eta, "seed": args.seed}
    Path(args.out_truth).write_text(_json_text(out), encoding="utf-8")
    summary = {
        "selected": [str(fd) for fd in res.selected],
        "new_afds": [str(fd) for fd in res.new_afds],
        "modified_cells": sum(len(v) for v in res.modified_rows.values()),
    }
    if (args.format or "json") == "csv":
        _emit(args, _csv_text([summary], list(summary)))
    else:
        _emit(args, _json_text(summary))
    return EXIT_OK


def _eval_items(args) -> list[EvalItem]:
    items = []
    for manifest in args.corpus:
        for lr in load_corpus(manifest):
            items.append(EvalItem(lr.relation, lr.ground_truth))
    for csv_path, truth_path in args.pair:
        raw = _read_truth(truth_path)
        truth = GroundTruth.from_json(raw)
        R = _load(args, csv_path, name=truth.relation_name)
        eta = raw.get("eta")
        items.append(EvalItem(R, truth, raw.get("channel"), None if eta is None else float(eta)))
    if not items:
        raise UsageError("eval needs at least one --corpus or --pair")
    return items


def cmd_eval(args) -> int:
    measures = parse_measures(args.measures)
    report = evaluate(_eval_items(args), measures, max_lhs=args.max_lhs, sfi_alpha=args.sfi_alpha,
                      time_budget=args.time_budget, jobs=args.jobs)
    data = report.to_json()
    if (args.format or "json") == "csv":
        rows = []
        for rel, per_m in data["rank_at_max_recall"].items():
            for m in data["measures"]:
                rows.append({"relation": rel, "measure": m,
                             "auc": data["auc"][m]["per_relation"].get(rel),
                             "rank_at_max_recall": per_m[m]})
        for m in data["measures"]:
            rows.append({"relation": "*pooled*", "measure": m, "auc": data["auc"][m]["pooled"],
                         "rank_at_max_recall": None})
        _emit(args, _csv_text(rows, ("relation", "measure", "auc", "rank_at_max_recall")))
    else:
        _emit(args, _json_text(data))
    return EXIT_PARTIAL if report.errors else EXIT_OK


SENSITIVITY_FIELDS = ("measure", "step", "controlled_value", "mean_fd_score",
                      "mean_nonfd_score", "separation")


def cmd_sensitivity(args) -> int:
    measures = parse_measures(args.measures)
    bench = gen_benchmark(args.kind, args.steps, args.per_step, args.seed, _n_range(args))
    rows = [r.to_record() for r in sensitivity_curve(bench, measures, args.sfi_alpha)]
    if (args.format or "csv") == "csv":
        _emit(args, _csv_text(rows, SENSITIVITY_FIELDS))
    else:
        _emit(args, _json_text({"kind": args.kind, "seed": args.seed, "rows": rows}))
    return EXIT_OK


COMMANDS = {
    "score": cmd_score,
    "discover": cmd_discover,
    "synth": cmd_synth,
    "inject": cmd_inject,
    "eval": cmd_eval,
    "sensitivity": cmd_sensitivity,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("afdlab: error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (AfdError, UsageError, OSError) as exc:
        print(f"afdlab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Command-line surface: score, correlate, pairwise, train, report.

Every command is a pure function of its input files, flags and seed; re-running
with identical inputs produces byte-identical outputs. Exit codes: 0 success,
2 usage/config error, 3 data/validation error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import corpus, ensemble, lexical, scores, stats

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _load_dataset(path: str, name: str, overlap_policy: bool = True) -> corpus.Dataset:
    try:
        ds = corpus.load_dataset(path, corpus.DatasetName(name))
    except FileNotFoundError as exc:
        raise CliError(str(exc), EXIT_DATA)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_DATA)
    if overlap_policy:
        ds = corpus.apply_overlap_policy(ds)
    return ds


def _canonical_metric(name: str) -> str:
    for m in lexical.NATIVE_METRICS:
        if m.lower() == name.lower():
            return m
    raise CliError(
        f"unknown metric {name!r}; valid native metrics: "
        + ", ".join(lexical.NATIVE_METRICS),
        EXIT_CONFIG,
    )


def cmd_score(args) -> int:
    metrics = [_canonical_metric(m) for m in args.metrics.split(",") if m]
    if not metrics:
        raise CliError("no metrics requested", EXIT_CONFIG)
    ds = _load_dataset(args.dataset, args.name)
    if ds.is_pair_dataset:
        raise CliError("score expects a rating dataset", EXIT_CONFIG)
    synonyms = lexical.load_synonym_table(args.synonyms) if args.synonyms else None
    matrix = lexical.score_dataset(ds, metrics, synonyms=synonyms)
    missing = matrix.missing_cells()
    if missing:
        ids = sorted({i for i, _ in missing})
        print(f"warning: {len(ids)} instance(s) without references left unscored",
              file=sys.stderr)
        keep = [i for i in matrix.instance_ids if i not in set(ids)]
        matrix = matrix.select_instances(keep)
    matrix.save(args.out)
    return EXIT_OK


def _read_ratings(ds: corpus.Dataset) -> dict[str, float]:
    ratings = {}
    for inst in ds.instances:
        if inst.rating is None:
            raise CliError(f"instance {inst.instance_id!r} has no rating", EXIT_DATA)
        ratings[inst.instance_id] = inst.rating
    return ratings


def cmd_correlate(args) -> int:
    ds = _load_dataset(args.dataset, args.name)
    if ds.is_pair_dataset:
        raise CliError("correlate expects a rating dataset", EXIT_CONFIG)
    if ds.name == corpus.DatasetName.POLARIS:
        ds = corpus.Dataset(
            name=ds.name,
            instances=tuple(i for i in ds.instances if i.split == "test"),
            rating_range=ds.rating_range,
            correlation_kind=ds.correlation_kind,
        )
    try:
        mats = [scores.ingest_external(p, allow_unknown=args.allow_unknown)
                for p in args.scores]
        matrix = mats[0] if len(mats) == 1 else scores.join(mats)
    except scores.ScoreError as exc:
        raise CliError(str(exc), EXIT_DATA)
    wanted = [i.instance_id for i in ds.instances]
    missing = [i for i in wanted if i not in set(matrix.instance_ids)]
    if missing:
        raise CliError(
            f"score files miss {len(missing)} instance(s): {missing[:10]}", EXIT_DATA
        )
    matrix = matrix.select_instances(wanted)
    try:
        reports, errors = stats.correlate(
            matrix, _read_ratings(ds), ds.correlation_kind, ds.name.value
        )
    except stats.StatsError as exc:
        raise CliError(str(exc), EXIT_NUMERIC)
    payload = {
        "dataset": ds.name.value,
        "kind": ds.correlation_kind.value,
        "n": len(wanted),
        "reports": [
            {"metric": r.metric, "kind": r.kind, "value": r.value, "n": r.n}
            for r in reports
        ],
        "errors": errors,
    }
    _write_report(payload, args.out, args.format, kind="correlation")
    return EXIT_OK


def cmd_pairwise(args) -> int:
    ds = _load_dataset(args.dataset, args.name)
    if not ds.is_pair_dataset:
        raise CliError("pairwise expects a pair dataset", EXIT_CONFIG)
    metrics = [_canonical_metric(m) for m in args.metrics.split(",") if m]
    if not metrics:
        raise CliError("no metrics requested", EXIT_CONFIG)

    results = []
    for metric in metrics:
        scorer = _native_pair_scorer(metric, ds)
        if ds.name == corpus.DatasetName.PASCAL50S:
            try:
                rep = stats.pascal50s_run(
                    ds, scorer, base_seed=args.seed, instances=args.instances,
                    metric_name=metric,
                )
            except stats.StatsError as exc:
                raise CliError(str(exc), EXIT_DATA)
            results.append({
                "metric": metric,
                "per_category": {
                    c: {"mean": m, "std": s}
                    for c, (m, s) in rep.per_category_accuracy.items()
                },
                "overall_mean": rep.overall_mean,
                "seeds": list(rep.seeds),
                "tie_credit": rep.tie_credit,
            })
        else:
            pairs = corpus.filter_reformulations(ds.pairs)
            acc = stats.pairwise_accuracy(
                pairs,
                [scorer(p.candidate_a, p.references) for p in pairs],
                [scorer(p.candidate_b, p.references) for p in pairs],
            )
            results.append({"metric": metric, "accuracy": acc, "n": len(pairs)})

    payload = {"dataset": ds.name.value, "seed": args.seed, "results": results}
    _write_report(payload, args.out, args.format, kind="pairwise")
    return EXIT_OK


def _native_pair_scorer(metric: str, ds: corpus.Dataset):
    from .textnorm import tokenize

    stats_df = None
    if metric == "CIDEr":
        ref_sets = [[tokenize(r) for r in p.references] for p in ds.pairs]
        stats_df = lexical.build_df([rs for rs in ref_sets if rs])

    def scorer(candidate: str, references) -> float:
        cand = tokenize(candidate)
        refs = [tokenize(r) for r in references]
        if metric.startswith("BLEU"):
            return lexical.bleu_n(cand, refs, int(metric[4]))
        if metric == "ROUGE":
            return lexical.rouge_l(cand, refs)
        if metric == "CIDEr":
            return lexical.cider_d(cand, refs, stats_df)
        return lexical.meteor(cand, refs)

    return scorer


def cmd_train(args) -> int:
    ds = _load_dataset(args.dataset, args.name)
    if ds.is_pair_dataset:
        raise CliError("train expects a rating dataset", EXIT_CONFIG)
    split = args.split
    instances = [i for i in ds.instances if split == "all" or i.split == split]
    if not instances:
        raise CliError(f"no instances in split {split!r}", EXIT_DATA)
    try:
        matrix = scores.ingest_external(args.scores, allow_unknown=args.allow_unknown)
        ids = [i.instance_id for i in instances]
        missing = [i for i in ids if i not in set(matrix.instance_ids)]
        if missing:
            raise CliError(
                f"score file misses {len(missing)} instance(s): {missing[:10]}",
                EXIT_DATA,
            )
        matrix = matrix.select_instances(ids)
    except scores.ScoreError as exc:
        raise CliError(str(exc), EXIT_DATA)
    ratings = {
        i.instance_id: i.rating for i in instances if i.rating is not None
    }
    if len(ratings) != len(instances):
        raise CliError("training instances must all carry ratings", EXIT_DATA)
    meta = {"dataset": ds.name.value, "split": split}
    config = ensemble.EnsembleConfig(epsilon=args.epsilon, folds=args.folds)
    try:
        if args.dominant:
            model = ensemble.dominant_ensemble(
                matrix, ratings, bleu_order=args.bleu_order,
                training_meta=meta, allow_nontrain=args.allow_nontrain,
            )
        else:
            model = ensemble.fit_ensemble(
                matrix, ratings, config,
                training_meta=meta, allow_nontrain=args.allow_nontrain,
            )
    except ensemble.RankDeficiencyError as exc:
        raise CliError(str(exc), EXIT_NUMERIC)
    except ValueError as exc:
        if "refusing to fit" in str(exc):
            raise CliError(str(exc), EXIT_CONFIG)
        raise CliError(str(exc), EXIT_NUMERIC)
    ensemble.save_model(model, args.out)
    return EXIT_OK


def _fmt1(value: float) -> str:
    return f"{100.0 * value:.1f}"


def _write_report(payload: dict, out: str | None, fmt: str, kind: str) -> None:
    if fmt == "json":
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    else:
        lines = []
        if kind == "correlation":
            lines.append("metric,kind,value,n")
            for r in payload["reports"]:
                lines.append(f"{r['metric']},{r['kind']},{_fmt1(r['value'])},{r['n']}")
        else:
            for r in payload["results"]:
                if "per_category" in r:
                    cats = sorted(r["per_category"])
                    lines.append("metric," + ",".join(cats) + ",mean")
                    cells = [
                        f"{_fmt1(r['per_category'][c]['mean'])}±"
                        f"{_fmt1(r['per_category'][c]['std'])}"
                        for c in cats
                    ]
                    lines.append(f"{r['metric']}," + ",".join(cells)
                                 + f",{_fmt1(r['overall_mean'])}")
                else:
                    lines.append("metric,accuracy,n")
                    lines.append(f"{r['metric']},{_fmt1(r['accuracy'])},{r['n']}")
        text = "\n".join(lines) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_report(args) -> int:
    try:
        payload = json.loads(Path(args.input).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(str(exc), EXIT_DATA)
    kind = "correlation" if "reports" in payload else "pairwise"
    _write_report(payload, args.out, args.format, kind)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="capeval", description="Caption evaluation toolkit"
    )
    parser.add_argument("--seed", type=int, default=0, help="base random seed")
    parser.add_argument("--jobs", type=int, default=1,
                        help="worker count (results are worker-count independent)")
    parser.add_argument("--format", choices=["csv", "json"], default="json")
    sub = parser.add_subparsers(dest="command", required=True)

    names = [n.value for n in corpus.DatasetName]

    p = sub.add_parser("score", help="score a rating dataset with native metrics")
    p.add_argument("--dataset", required=True)
    p.add_argument("--name", choices=names, default="Custom")
    p.add_argument("--metrics", required=True,
                   help="comma-separated native metric names")
    p.add_argument("--synonyms", help="optional synonym table for METEOR")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("correlate", help="correlate score columns with ratings")
    p.add_argument("--dataset", required=True)
    p.add_argument("--name", choices=names, default="Custom")
    p.add_argument("--scores", required=True, nargs="+")
    p.add_argument("--allow-unknown", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("pairwise", help="pairwise preference accuracy")
    p.add_argument("--dataset", required=True)
    p.add_argument("--name", choices=names, required=True)
    p.add_argument("--metrics", required=True)
    p.add_argument("--instances", type=int, default=5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_pairwise)

    p = sub.add_parser("train", help="fit an ensemble model")
    p.add_argument("--dataset", required=True)
    p.add_argument("--name", choices=names, default="Polaris")
    p.add_argument("--scores", required=True)
    p.add_argument("--split", default="train",
                   help="train|val|test|unsplit|all (leakage guard applies)")
    p.add_argument("--dominant", action="store_true")
    p.add_argument("--bleu-order", type=int, default=4, choices=[1, 2, 3, 4])
    p.add_argument("--epsilon", type=float, default=0.0001)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--allow-unknown", action="store_true")
    p.add_argument("--allow-nontrain", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("report", help="render a JSON report as a CSV table")
    p.add_argument("--input", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())

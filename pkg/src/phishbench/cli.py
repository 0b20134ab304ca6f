"""Command-line pipeline: synth, ingest, clean, split, train, score, bench,
eval, audit, serve.

Every command takes --config (JSON) plus flag overrides (flags win), needs
an explicit seed, and writes its artifacts under --run-dir together with an
index.json embedding the exact configuration used. Exit codes: 0 ok,
1 pipeline error, 2 usage error; errors go to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import benchmarks as bench_mod
from . import cleaning as clean_mod
from . import metrics as metrics_mod
from . import splitting as split_mod
from .config import PipelineConfig, load_config, rates_and_m
from .corpus import Corpus, load_corpus, validate_record, write_corpus
from .errors import PhishbenchError
from .htmltools import load_keywords
from .linear_model import (FeatureSpec, LinearHingeClassifier, extract_features,
                           fit_feature_spec, train_linear)
from .synth import synth_corpus


class UsageError(ValueError):
    pass


def _emit_error(code: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": {"code": code, "message": message}}) + "\n")


def _update_index(run_dir: Path, config: PipelineConfig, artifacts: dict) -> None:
    run_dir.mkdir(parents=True, exist_ok=True)
    index_path = run_dir / "index.json"
    index = {"config": config.to_dict(), "artifacts": {}}
    if index_path.exists():
        index = json.loads(index_path.read_text(encoding="utf-8"))
        index["config"] = config.to_dict()
    index.setdefault("artifacts", {}).update(artifacts)
    index_path.write_text(json.dumps(index, sort_keys=True, indent=2) + "\n",
                          encoding="utf-8")


def _load_input_corpus(path: str | None) -> Corpus:
    if not path:
        raise UsageError("a corpus path is required (--corpus or config)")
    if not Path(path).exists():
        raise UsageError(f"corpus path does not exist: {path}")
    return load_corpus(path)


def _write_meta(path: Path, config: PipelineConfig) -> None:
    meta = {"config": config.to_dict()}
    path.with_suffix(path.suffix + ".meta.json").write_text(
        json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _scripted_provider(path: str | None, default_verdict: str | None):
    verdicts = {}
    if path:
        if not Path(path).exists():
            raise UsageError(f"decisions file does not exist: {path}")
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if line.strip():
                row = json.loads(line)
                verdicts[row["prototype_sha256"]] = row["verdict"]

    def provider(ctx):
        verdict = verdicts.get(ctx.record.sha256, default_verdict)
        if verdict is None:
            raise LookupError(f"no scripted verdict for prototype {ctx.record.sha256}")
        return verdict

    return provider


def _load_scores(path: str | None) -> dict:
    if not path:
        return {}
    if not Path(path).exists():
        raise UsageError(f"scores file does not exist: {path}")
    scores = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            row = json.loads(line)
            scores[row["sha256"]] = float(row["score"])
    return scores


def _write_scores(scores: dict, path: Path) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for sha in sorted(scores):
            fh.write(json.dumps({"sha256": sha, "score": scores[sha]}) + "\n")


def cmd_synth(args, config: PipelineConfig) -> int:
    corpus = synth_corpus(args.n_benign, args.n_phish, seed=config.seed,
                          flip_fraction=args.flip_fraction)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_corpus(corpus, out)
    print(f"wrote {len(corpus)} records to {out}")
    return 0


def cmd_ingest(args, config: PipelineConfig) -> int:
    corpus = _load_input_corpus(args.corpus or config.corpus)
    violations = [vars(v) for v in corpus.violations]
    for rec in corpus:
        violations.extend(
            vars(v) for v in validate_record(rec) if v.rule == "hash-mismatch")
    keywords = (load_keywords(config.cleaning["keywords_file"])
                if config.cleaning.get("keywords_file") else None)
    filtered, reasons = clean_mod.auto_filter(corpus, keywords)
    run_dir = Path(config.run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    out = run_dir / "ingested.jsonl"
    write_corpus(filtered, out)
    _write_meta(out, config)
    report = {"input_records": len(corpus), "kept_records": len(filtered),
              "auto_removed": reasons, "violations": violations}
    (run_dir / "ingest_report.json").write_text(
        json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    _update_index(run_dir, config, {"ingested": "ingested.jsonl",
                                    "ingest_report": "ingest_report.json"})
    print(f"ingest: kept {len(filtered)}/{len(corpus)} "
          f"(dups {reasons['url_dup']}, no-html {reasons['html_missing']}, "
          f"bad-title {reasons['bad_title']})")
    return 0


def cmd_clean(args, config: PipelineConfig) -> int:
    corpus = _load_input_corpus(args.corpus or config.corpus)
    run_dir = Path(config.run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    if args.serve:
        from .service import serve_cleaning
        serve_cleaning(corpus, config, port=args.port,
                       journal_path=args.journal or str(run_dir / "journal.jsonl"))
        return 0
    provider = _scripted_provider(args.decisions, args.default_verdict)
    journal = (clean_mod.DecisionJournal(args.journal) if args.journal else None)
    keywords = (load_keywords(config.cleaning["keywords_file"])
                if config.cleaning.get("keywords_file") else None)
    cleaned, report = clean_mod.run_cleaning(
        corpus, 0, provider,
        propagate_sim=config.cleaning["propagate_sim"],
        budget_lsh=config.cleaning["budget_lsh"],
        budget_title=config.cleaning["budget_title"],
        n_bits=config.cleaning["n_bits"], seed=config.seed,
        keywords=keywords, journal=journal)
    out = run_dir / "cleaned.jsonl"
    write_corpus(cleaned, out)
    _write_meta(out, config)
    (run_dir / "clean_report.json").write_text(
        json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    _update_index(run_dir, config, {"cleaned": "cleaned.jsonl",
                                    "clean_report": "clean_report.json"})
    print(f"clean: removed {len(report.removed_ids)} by triage, kept {len(cleaned)}")
    return 0


def cmd_split(args, config: PipelineConfig) -> int:
    corpus = _load_input_corpus(args.corpus or config.corpus)
    result = split_mod.make_split(
        corpus, p=config.split["p"], tau=config.split["tau"],
        n_bits=config.split["n_bits"], n_tables=config.split["n_tables"],
        seed=config.seed, exact=config.split.get("exact", False))
    run_dir = Path(config.run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    out = run_dir / "split_manifest.jsonl"
    split_mod.write_split_manifest(result, out, config=config.to_dict())
    _update_index(run_dir, config, {"split_manifest": "split_manifest.jsonl"})
    print(f"split: train {len(result.train_ids)}, test {len(result.test_ids)}, "
          f"dropped for leakage {len(result.dropped_for_leakage)}")
    return 0


def cmd_train(args, config: PipelineConfig) -> int:
    corpus = _load_input_corpus(args.corpus or config.corpus)
    split = split_mod.load_split_manifest(args.split)
    train_records = [corpus.get(sha) for sha in sorted(split.train_ids)]
    if not train_records:
        raise UsageError("split manifest has no train records present in the corpus")
    spec = fit_feature_spec(train_records, k_top=config.model["k_top"])
    features = [extract_features(rec, spec) for rec in train_records]
    labels = [1 if rec.label == "phishing" else 0 for rec in train_records]
    model = train_linear(features, labels, lam=config.model["lam"],
                         tolerance=config.model["tolerance"],
                         class_weighting=config.model["class_weight"],
                         seed=config.seed)
    run_dir = Path(config.run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    spec_path = run_dir / "feature_spec.json"
    spec_path.write_text(spec.to_json() + "\n", encoding="utf-8")
    model.save(run_dir / "model.json", spec=spec)
    _update_index(run_dir, config, {"model": "model.json",
                                    "feature_spec": "feature_spec.json"})
    print(f"train: {len(train_records)} records, dim {spec.dim}, "
          f"{len(model.history_)} optimizer steps")
    return 0


def cmd_score(args, config: PipelineConfig) -> int:
    corpus = _load_input_corpus(args.corpus or config.corpus)
    spec = FeatureSpec.from_json(Path(args.feature_spec).read_text(encoding="utf-8"))
    model = LinearHingeClassifier.load(args.model)
    ids = corpus.ids()
    if args.split:
        split = split_mod.load_split_manifest(args.split)
        wanted = split.test_ids if args.subset == "test" else split.train_ids
        ids = [sha for sha in ids if sha in wanted]
    features = [extract_features(corpus.get(sha), spec) for sha in ids]
    values = model.predict_score(features)
    scores = {sha: float(v) for sha, v in zip(ids, values)}
    out = Path(args.out) if args.out else Path(config.run_dir) / "scores.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_scores(scores, out)
    _update_index(out.parent, config, {"scores": out.name})
    print(f"score: wrote {len(scores)} scores to {out}")
    return 0


def cmd_bench(args, config: PipelineConfig) -> int:
    corpus = _load_input_corpus(args.corpus or config.corpus)
    split = split_mod.load_split_manifest(args.split)
    test_ids = set(split.test_ids)
    if args.extras:
        extras = _load_input_corpus(args.extras)
        corpus, test_ids = bench_mod.augment_benign(corpus, test_ids, extras)
    labels = corpus.labels()
    tau_html = config.benchmark["tau_html"]
    if tau_html > 0:
        from .cleaning import cleaning_text
        from .text_vectors import TfidfEncoder
        phish_ids = sorted(sha for sha in test_ids if labels[sha] == "phishing")
        if phish_ids:
            encoder = TfidfEncoder(tokenization="words").fit(
                cleaning_text(corpus.get(sha)) for sha in phish_ids)
            html_vectors = {sha: encoder.transform_one(cleaning_text(corpus.get(sha)))
                            for sha in phish_ids}
            test_ids = bench_mod.prune_similar_phish(test_ids, labels, html_vectors,
                                                     tau_html, seed=config.seed)
    k_percent = config.benchmark["k_percent"]
    if k_percent > 0:
        scores = _load_scores(args.scores)
        if not scores:
            raise UsageError("difficulty filtering needs --scores "
                             "(or set benchmark.k_percent to 0)")
        test_ids = bench_mod.difficulty_filter(
            test_ids, labels, scores, delta=config.benchmark["delta"],
            k_percent=k_percent, seed=config.seed)
    if config.benchmark.get("m_map") is None:
        # auto mode: size m per rate from pilot variance at the configured
        # margin and confidence
        scores = _load_scores(args.scores)
        if not scores:
            raise UsageError("auto instance counts need --scores for the pilot")
        rates = [float(r) for r in config.benchmark["rates"]]
        m_map = {}
        for rate in rates:
            variance = bench_mod.estimate_variance_pilot(
                test_ids, labels, scores, rate,
                pilot_count=int(config.benchmark.get("pilot_count", 5)),
                seed=config.seed)
            m_map[rate] = bench_mod.estimate_instances(
                variance, config.benchmark["margin"],
                config.benchmark["confidence"]).m
    else:
        rates, m_map = rates_and_m(config)
    suite = bench_mod.sample_benchmarks(test_ids, labels, rates=rates,
                                        m_map=m_map, seed=config.seed)
    suite.params.update({"delta": config.benchmark["delta"],
                         "k_percent": k_percent, "tau_html": tau_html})
    run_dir = Path(config.run_dir)
    suite_dir = run_dir / "benchmarks"
    bench_mod.write_suite(suite, suite_dir, config=config.to_dict())
    _update_index(run_dir, config, {"benchmarks": "benchmarks/"})
    print(f"bench: {len(suite.instances)} instance manifests in {suite_dir}")
    return 0


def cmd_eval(args, config: PipelineConfig) -> int:
    scores = _load_scores(args.scores)
    if not scores:
        raise UsageError("--scores is required")
    run_dir = Path(config.run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    if args.suite:
        suite = bench_mod.load_suite(args.suite)
        for inst in suite.instances:
            ids = sorted(inst.all_ids())
            inst_scores = [scores[sha] for sha in ids]
            inst_labels = [1 if sha in inst.phish_ids else 0 for sha in ids]
            report = metrics_mod.evaluate(inst_scores, inst_labels, with_roc=False)
            rows.append({"base_rate_percent": inst.base_rate_percent,
                         "instance_index": inst.instance_index,
                         **report.to_dict()})
        by_rate: dict = {}
        for row in rows:
            by_rate.setdefault(row["base_rate_percent"], []).append(row)
        aggregates = {}
        for rate, group in sorted(by_rate.items()):
            ap_mean, ap_err = metrics_mod.aggregate_instances(
                [g["ap"] for g in group], seed=config.seed)
            pr_mean, pr_err = metrics_mod.aggregate_instances(
                [g["p_at_r"]["0.9"] for g in group], seed=config.seed)
            aggregates[str(rate)] = {"n_instances": len(group),
                                     "ap_mean": ap_mean, "ap_error": ap_err,
                                     "p_at_r90_mean": pr_mean, "p_at_r90_error": pr_err}
        (run_dir / "aggregates.json").write_text(
            json.dumps({"config": config.to_dict(), "aggregates": aggregates},
                       sort_keys=True, indent=2) + "\n", encoding="utf-8")
        artifacts = {"evaluations": "evaluations.jsonl", "aggregates": "aggregates.json"}
        print(f"eval: {len(rows)} instances across {len(aggregates)} base rates")
    else:
        corpus = _load_input_corpus(args.corpus or config.corpus)
        split = split_mod.load_split_manifest(args.split)
        labels_map = corpus.labels()
        ids = sorted(split.test_ids)
        report = metrics_mod.evaluate([scores[sha] for sha in ids],
                                      [1 if labels_map[sha] == "phishing" else 0
                                       for sha in ids],
                                      ci_resamples=1000, seed=config.seed)
        rows.append({"split": "test", **report.to_dict()})
        artifacts = {"evaluations": "evaluations.jsonl"}
        print(f"eval: test split AP {report.ap:.4f}")
    with (run_dir / "evaluations.jsonl").open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    _update_index(run_dir, config, artifacts)
    return 0


def cmd_audit(args, config: PipelineConfig) -> int:
    corpus = _load_input_corpus(args.corpus or config.corpus)
    provider = _scripted_provider(args.decisions, args.default_verdict)
    keywords = (load_keywords(config.cleaning["keywords_file"])
                if config.cleaning.get("keywords_file") else None)
    report = clean_mod.audit_rejection_rate(
        corpus, config.cleaning["budget_lsh"], config.cleaning["budget_title"],
        provider, propagate_sim=config.cleaning["propagate_sim"],
        n_bits=config.cleaning["n_bits"], seed=config.seed, keywords=keywords)
    run_dir = Path(config.run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "audit.json").write_text(
        json.dumps({"config": config.to_dict(), "audit": report.to_dict()},
                   sort_keys=True, indent=2) + "\n", encoding="utf-8")
    (run_dir / "audit.txt").write_text(report.to_table() + "\n", encoding="utf-8")
    _update_index(run_dir, config, {"audit": "audit.json", "audit_table": "audit.txt"})
    print(report.to_table())
    return 0


def cmd_serve(args, config: PipelineConfig) -> int:
    corpus = _load_input_corpus(args.corpus or config.corpus)
    from .service import serve_cleaning
    journal = args.journal or str(Path(config.run_dir) / "journal.jsonl")
    serve_cleaning(corpus, config, port=args.port, journal_path=journal)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phishbench",
        description="Corpus curation, leakage-safe splits, and base-rate benchmarks")
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int, help="master seed (required unless in config)")
    parser.add_argument("--run-dir", help="output directory for artifacts")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(fn=fn)
        return p

    p = add("synth", cmd_synth, help="generate a synthetic demo corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n-benign", type=int, default=140)
    p.add_argument("--n-phish", type=int, default=60)
    p.add_argument("--flip-fraction", type=float, default=0.1)

    p = add("ingest", cmd_ingest, help="load, validate, dedup, and auto-filter")
    p.add_argument("--corpus")

    p = add("clean", cmd_clean, help="budgeted triage cleaning")
    p.add_argument("--corpus")
    p.add_argument("--decisions", help="scripted verdicts JSONL")
    p.add_argument("--default-verdict", choices=["keep", "remove"])
    p.add_argument("--journal", help="decision journal path (append-only)")
    p.add_argument("--serve", action="store_true",
                   help="hand off to the annotation service instead of a script")
    p.add_argument("--port", type=int, default=8400)

    p = add("split", cmd_split, help="temporal split + leakage filter")
    p.add_argument("--corpus")

    p = add("train", cmd_train, help="train the linear baseline")
    p.add_argument("--corpus")
    p.add_argument("--split", required=True)

    p = add("score", cmd_score, help="score records with a trained model")
    p.add_argument("--corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--feature-spec", required=True)
    p.add_argument("--split")
    p.add_argument("--subset", choices=["test", "train"], default="test")
    p.add_argument("--out")

    p = add("bench", cmd_bench, help="build the benchmark suite")
    p.add_argument("--corpus")
    p.add_argument("--split", required=True)
    p.add_argument("--scores")
    p.add_argument("--extras", help="extra benign corpus for augmentation")

    p = add("eval", cmd_eval, help="evaluate scores on a suite or test split")
    p.add_argument("--scores", required=True)
    p.add_argument("--suite")
    p.add_argument("--corpus")
    p.add_argument("--split")

    p = add("audit", cmd_audit, help="two-stage rejection-rate audit")
    p.add_argument("--corpus")
    p.add_argument("--decisions")
    p.add_argument("--default-verdict", choices=["keep", "remove"])

    p = add("serve", cmd_serve, help="run the annotation service")
    p.add_argument("--corpus")
    p.add_argument("--journal")
    p.add_argument("--port", type=int, default=8400)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        overrides = {"run_dir": args.run_dir} if args.run_dir else {}
        config = load_config(args.config, overrides=overrides, seed=args.seed)
        if getattr(args, "corpus", None):
            config.corpus = args.corpus
    except (ValueError, FileNotFoundError) as exc:
        _emit_error("usage", str(exc))
        return 2
    try:
        return args.fn(args, config)
    except UsageError as exc:
        _emit_error("usage", str(exc))
        return 2
    except (ValueError, KeyError, FileNotFoundError, PhishbenchError) as exc:
        _emit_error("pipeline", f"{type(exc).__name__}: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())

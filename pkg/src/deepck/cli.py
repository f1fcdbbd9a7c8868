"""Command line front end.

Every subcommand reads settings from an optional ``key = value`` config file
plus ``--key value`` flag overrides, writes its outputs into a fresh numbered
run directory (under --run-dir, DEEPCK_RUN_DIR, or ./runs), and records the
effective configuration in a manifest there. CSV files are the contract;
plots are rendered next to them as a convenience. Exit codes: 0 success,
2 configuration error, 3 data error, 4 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

from . import depth as depth_mod
from .backends import BigramBackend, TrainableBigramBackend, WordVocab, uniform_backend
from .classifier import (
    ClassifierConfig,
    LinearHead,
    baseline_triple_classify,
    classify_triple,
    load_checkpoint,
    save_checkpoint,
    strategy_scores,
    train,
    train_baseline,
)
from .depth import (
    DEEP_RANK_THRESHOLD,
    UndefinedCorrelationError,
    bin_statistics,
    is_deep,
    pearson,
    read_annotation_file,
    read_scores_csv,
    relation_depth_profile,
    score_triples,
    write_scores_csv,
)
from .encoder import TorchEncoderBackend
from .evaluation import evaluate, performance_by_depth, sweep_k
from .propagation import (
    CandidateTriple,
    TaxonomyTree,
    build_deep_candidates,
    generate_candidates,
    horizontal_propagate,
    negative_sample,
    read_candidate_tsv,
    train_generator,
    vertical_propagate,
    write_candidate_tsv,
)
from .retrieval import (
    DEFAULT_STOPWORDS,
    ingest_corpus,
    load_corpus,
    load_stopword_file,
    save_corpus,
    select_evidence,
    write_evidence_records,
)
from .runconfig import ConfigError, RunConfig, prepare_run_dir, resolve_run_root, write_manifest
from .triples import TripleParseError, read_triple_file, triple_words, write_triple_file

STRATEGY_CHOICES = ("avg", "max", "vote")


# ---------------------------------------------------------------- helpers

def _parse_float_list(text: str, key: str) -> list[float]:
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise ConfigError(f"'{key}' must be comma-separated numbers, got {text!r}") from exc


def _parse_int_list(text: str, key: str) -> list[int]:
    try:
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise ConfigError(f"'{key}' must be comma-separated integers, got {text!r}") from exc


def _stopwords(cfg: RunConfig):
    path = cfg.get("stopword_file")
    return load_stopword_file(path) if path else DEFAULT_STOPWORDS


def _scoring_backend(cfg: RunConfig):
    """Build a next-token scoring backend from config keys."""
    kind = cfg.get_choice("backend", ("uniform", "bigram", "pretrained"), default="bigram")
    window = cfg.get_int("context_window", 512)
    if kind == "uniform":
        vocab = WordVocab.from_file(cfg.require("vocab_file"))
        return uniform_backend(vocab, context_window=window)
    if kind == "bigram":
        table = cfg.require("table_file")
        vocab_path = cfg.get("vocab_file")
        vocab = WordVocab.from_file(vocab_path) if vocab_path else None
        return BigramBackend.from_table_file(table, vocab=vocab, context_window=window)
    from .pretrained import load_pretrained_backend

    return load_pretrained_backend(cfg.require("model_name"), context_window=window)


def _labeled_dataset(path) -> list:
    triples = read_triple_file(path)
    missing = [t for t in triples if t.label is None]
    if missing:
        raise ValueError(f"{len(missing)} of {len(triples)} triples in {path} lack labels")
    return triples


def _vocab_for(corpus, triples) -> WordVocab:
    words: set[str] = set()
    for sentence in corpus.sentences:
        words.update(sentence.tokens)
    for t in triples:
        words.update(triple_words(t))
    return WordVocab(sorted(words))


def _classifier_config(cfg: RunConfig) -> ClassifierConfig:
    try:
        return ClassifierConfig(
            encoder_layers=cfg.get_int("encoder_layers", 2),
            encoder_heads=cfg.get_int("encoder_heads", 4),
            hidden_dim=cfg.get_int("hidden_dim", 64),
            pool_heads=cfg.get_int("pool_heads", 4),
            k=cfg.get_int("k", 3),
            learning_rate=cfg.get_float("learning_rate", 1e-3),
            train_steps=cfg.get_int("train_steps", 500),
            seed=cfg.get_int("seed", 0),
            batch_size=cfg.get_int("batch_size", 8),
            max_len=cfg.get_int("max_len", 128),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _write_csv(path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _plot_lines(path, series: dict[str, tuple[Sequence[float], Sequence[float]]],
                xlabel: str, ylabel: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for label, (xs, ys) in series.items():
        ax.plot(xs, ys, marker="o", label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if len(series) > 1:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _plot_bars(path, labels: Sequence[str], values: Sequence[float],
               ylabel: str, yerr: Optional[Sequence[float]] = None) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(max(6, 0.5 * len(labels)), 4))
    ax.bar(range(len(labels)), values, yerr=yerr, capsize=3)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=45, ha="right")
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _report_row(report) -> list:
    if report is None:
        return ["", "", "", "", "", ""]
    return [
        _fmt(report.precision), _fmt(report.recall), _fmt(report.f1), _fmt(report.accuracy),
        int(report.undefined_precision), int(report.undefined_recall),
    ]


REPORT_COLUMNS = ["precision", "recall", "f1", "accuracy", "undefined_precision", "undefined_recall"]


def _read_predictions_csv(path) -> list[dict]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["head", "relation", "tail", "p0", "p1", "label", "strategy"]
        if reader.fieldnames != expected:
            raise ValueError(f"unexpected prediction header {reader.fieldnames}, want {expected}")
        return list(reader)


def _gold_labels_for(predictions: list[dict], triples) -> list[int]:
    if len(predictions) != len(triples):
        raise ValueError(f"{len(predictions)} predictions vs {len(triples)} gold triples")
    gold = []
    for row, triple in zip(predictions, triples):
        row_key = (
            " ".join(row["head"].lower().split()),
            row["relation"].lower(),
            " ".join(row["tail"].lower().split()),
        )
        if row_key != triple.key():
            raise ValueError(f"prediction row {row_key} does not match gold triple {triple.key()}")
        if triple.label is None:
            raise ValueError(f"gold triple {triple.key()} lacks a label")
        gold.append(triple.label)
    return gold


# ---------------------------------------------------------------- commands

def cmd_score_depth(cfg: RunConfig, run_dir: Path) -> list[str]:
    triples = read_triple_file(cfg.require("triples"))
    if not triples:
        raise ValueError("no triples to score")
    backend = _scoring_backend(cfg)
    threshold = cfg.get_float("threshold", DEEP_RANK_THRESHOLD)
    scores = score_triples(triples, backend)
    out = run_dir / "scores.csv"
    write_scores_csv(out, scores)
    deep = sum(1 for s in scores if is_deep(s, threshold))
    _write_json(run_dir / "summary.json", {
        "triples": len(scores),
        "deep": deep,
        "threshold": threshold,
        "backend": backend.descriptor.name,
    })
    return [f"scored {len(scores)} triples ({deep} deep at threshold {threshold:g}) -> {out}"]


def cmd_analyze_depth(cfg: RunConfig, run_dir: Path) -> list[str]:
    scores = read_scores_csv(cfg.require("scores"))
    metric = cfg.get_choice("metric", ("depth_rank", "perplexity"), default="depth_rank")
    num_bins = cfg.get_int("num_bins", 4)
    edges = _parse_float_list(cfg.get("range_edges", "2000"), "range_edges")
    annotations = None
    if cfg.get("annotations"):
        annotations = read_annotation_file(cfg.get("annotations"))

    bins = bin_statistics(scores, annotations, metric=metric, num_bins=num_bins)
    _write_csv(run_dir / "bins.csv",
               ["bin_index", "low", "high", "member_count", "mean_metric", "mean_annotated_depth"],
               [[b.bin_index, _fmt(b.metric_range[0]), _fmt(b.metric_range[1]),
                 b.member_count, _fmt(b.mean_metric), _fmt(b.mean_annotated_depth)]
                for b in bins])

    proportions = depth_mod.depth_distribution(scores, edges)
    ranges = depth_mod.distribution_ranges(edges)
    _write_csv(run_dir / "distribution.csv",
               ["low", "high", "proportion"],
               [[_fmt(low), _fmt(high), _fmt(p)] for (low, high), p in zip(ranges, proportions)])

    summary: dict = {"triples": len(scores), "metric": metric, "num_bins": num_bins}
    lines = [f"binned {len(scores)} scores into {num_bins} groups -> {run_dir / 'bins.csv'}"]
    if annotations is not None:
        annotated = [(getattr(s, metric), annotations[s.triple.key()])
                     for s in scores if s.triple.key() in annotations]
        summary["annotated"] = len(annotated)
        if len(annotated) >= 2:
            try:
                r = pearson([a for a, _ in annotated], [b for _, b in annotated])
                summary["pearson"] = r
                lines.append(f"pearson({metric}, annotated depth) = {r:.4f} over {len(annotated)} triples")
            except UndefinedCorrelationError:
                summary["pearson"] = None
                lines.append("pearson undefined: zero variance in a coordinate")
    _write_json(run_dir / "summary.json", summary)

    binned = [b for b in bins if b.mean_annotated_depth is not None]
    if binned:
        _plot_lines(run_dir / "bins.png",
                    {"annotated depth": ([b.mean_metric for b in binned],
                                         [b.mean_annotated_depth for b in binned])},
                    metric, "mean annotated depth")
    _plot_bars(run_dir / "distribution.png",
               [f"[{low:g}, {high:g})" for low, high in ranges], proportions, "proportion")
    return lines


def cmd_relation_profile(cfg: RunConfig, run_dir: Path) -> list[str]:
    scores = read_scores_csv(cfg.require("scores"))
    profiles = relation_depth_profile(scores)
    _write_csv(run_dir / "profiles.csv",
               ["relation", "count", "mean_depth_rank", "stddev_depth_rank"],
               [[p.relation, p.count, _fmt(p.mean_depth_rank), _fmt(p.stddev_depth_rank)]
                for p in profiles])
    _plot_bars(run_dir / "profiles.png",
               [p.relation for p in profiles],
               [p.mean_depth_rank for p in profiles],
               "mean depth rank",
               yerr=[p.stddev_depth_rank for p in profiles])
    return [f"profiled {len(profiles)} relations -> {run_dir / 'profiles.csv'}"]


def cmd_ingest_corpus(cfg: RunConfig, run_dir: Path) -> list[str]:
    text = Path(cfg.require("corpus")).read_text(encoding="utf-8")
    corpus = ingest_corpus(text, line_mode=cfg.get_bool("line_mode", False))
    out = run_dir / "corpus.jsonl"
    save_corpus(out, corpus)
    _write_json(run_dir / "summary.json", {
        "sentences": len(corpus),
        "indexed_terms": len(corpus.term_index),
    })
    return [f"ingested {len(corpus)} sentences ({len(corpus.term_index)} indexed terms) -> {out}"]


def cmd_select_evidence(cfg: RunConfig, run_dir: Path) -> list[str]:
    triples = read_triple_file(cfg.require("triples"))
    corpus = load_corpus(cfg.require("corpus"))
    k = cfg.get_int("k", 3)
    stopwords = _stopwords(cfg)
    cap = cfg.get_int("per_term_cap", 1000)
    sets = [select_evidence(t, corpus, k, stopwords=stopwords, per_term_cap=cap) for t in triples]
    out = run_dir / "evidence.jsonl"
    write_evidence_records(out, sets)
    fallbacks = sum(1 for s in sets if s.fallback_used)
    _write_json(run_dir / "summary.json", {
        "triples": len(sets),
        "k": k,
        "fallback_triples": fallbacks,
        "pairs": sum(len(s.pairs) for s in sets),
    })
    return [f"selected evidence for {len(sets)} triples ({fallbacks} fallbacks) -> {out}"]


def _train_context(cfg: RunConfig, triples, corpus):
    config = _classifier_config(cfg)
    stopwords = _stopwords(cfg)
    cap = cfg.get_int("per_term_cap", 1000)
    vocab = _vocab_for(corpus, triples)
    backend = TorchEncoderBackend(
        vocab,
        hidden_dim=config.hidden_dim,
        layers=config.encoder_layers,
        heads=config.encoder_heads,
        max_len=config.max_len,
        seed=config.seed,
    )
    dataset = [
        (select_evidence(t, corpus, config.k, stopwords=stopwords, per_term_cap=cap), t.label)
        for t in triples
    ]
    return train(dataset, config, backend, corpus), config


def cmd_train(cfg: RunConfig, run_dir: Path) -> list[str]:
    mode = cfg.get_choice("mode", ("context", "baseline"), default="context")
    triples = _labeled_dataset(cfg.require("triples"))
    if mode == "context":
        corpus = load_corpus(cfg.require("corpus"))
        result, config = _train_context(cfg, triples, corpus)
    else:
        config = _classifier_config(cfg)
        vocab = _vocab_for(ingest_corpus(""), triples)
        backend = TorchEncoderBackend(
            vocab, hidden_dim=config.hidden_dim, layers=config.encoder_layers,
            heads=config.encoder_heads, max_len=config.max_len, seed=config.seed,
        )
        result = train_baseline(triples, config, backend)
    ckpt = run_dir / "checkpoint"
    save_checkpoint(ckpt, result, model_type=mode)
    _write_csv(run_dir / "loss_curve.csv", ["step", "loss"],
               [[step, _fmt(value)] for step, value in result.loss_curve])
    if result.loss_curve:
        _plot_lines(run_dir / "loss.png",
                    {"train": ([s for s, _ in result.loss_curve], [v for _, v in result.loss_curve])},
                    "step", "loss")
    final = result.loss_curve[-1][1] if result.loss_curve else float("nan")
    return [f"trained {mode} model on {len(triples)} triples "
            f"({config.train_steps} steps, final loss {final:.4f}) -> {ckpt}"]


def cmd_predict(cfg: RunConfig, run_dir: Path) -> list[str]:
    backend, head, config, model_type = load_checkpoint(cfg.require("checkpoint"))
    triples = read_triple_file(cfg.require("triples"))
    strategy = cfg.get_choice("strategy", STRATEGY_CHOICES, default="avg")
    rows = []
    if model_type == "baseline":
        if not isinstance(head, LinearHead):
            raise RuntimeError("baseline checkpoint holds an unexpected head module")
        for t in triples:
            p0, p1 = baseline_triple_classify(t, backend, head)
            rows.append([t.head, t.relation, t.tail, _fmt(p0), _fmt(p1),
                         1 if p1 >= p0 else 0, "baseline"])
    else:
        corpus = load_corpus(cfg.require("corpus"))
        k = cfg.get_int("k", config.k)
        stopwords = _stopwords(cfg)
        cap = cfg.get_int("per_term_cap", 1000)
        for t in triples:
            evidence = select_evidence(t, corpus, k, stopwords=stopwords, per_term_cap=cap)
            bundle = classify_triple(evidence, corpus, backend, head, strategy=strategy)
            p0, p1 = strategy_scores(bundle.per_pair, strategy)
            rows.append([t.head, t.relation, t.tail, _fmt(p0), _fmt(p1), bundle.label, strategy])
    out = run_dir / "predictions.csv"
    _write_csv(out, ["head", "relation", "tail", "p0", "p1", "label", "strategy"], rows)
    positive = sum(1 for r in rows if r[5] == 1)
    return [f"predicted {len(rows)} triples ({positive} positive) -> {out}"]


def cmd_evaluate(cfg: RunConfig, run_dir: Path) -> list[str]:
    predictions = _read_predictions_csv(cfg.require("predictions"))
    triples = read_triple_file(cfg.require("triples"))
    gold = _gold_labels_for(predictions, triples)
    pred_labels = [int(row["label"]) for row in predictions]
    report = evaluate(pred_labels, gold)
    payload = {
        "precision": report.precision, "recall": report.recall,
        "f1": report.f1, "accuracy": report.accuracy,
        "tp": report.tp, "fp": report.fp, "tn": report.tn, "fn": report.fn,
        "undefined_precision": report.undefined_precision,
        "undefined_recall": report.undefined_recall,
    }
    _write_json(run_dir / "report.json", payload)
    return [
        f"evaluated {report.support} examples -> {run_dir / 'report.json'}",
        f"precision={report.precision:.4f} recall={report.recall:.4f} "
        f"f1={report.f1:.4f} accuracy={report.accuracy:.4f}",
    ]


def cmd_perf_by_depth(cfg: RunConfig, run_dir: Path) -> list[str]:
    predictions = _read_predictions_csv(cfg.require("predictions"))
    triples = read_triple_file(cfg.require("triples"))
    gold = _gold_labels_for(predictions, triples)
    pred_labels = [int(row["label"]) for row in predictions]
    scores = read_scores_csv(cfg.require("scores"))
    by_key = {s.triple.key(): s for s in scores}
    missing = [t.key() for t in triples if t.key() not in by_key]
    if missing:
        raise ValueError(f"{len(missing)} triples lack depth scores, e.g. {missing[0]}")
    aligned = [by_key[t.key()] for t in triples]
    edges = _parse_float_list(cfg.get("range_edges", "2000"), "range_edges")
    bands = performance_by_depth(pred_labels, gold, aligned, edges)
    _write_csv(run_dir / "perf_by_depth.csv",
               ["low", "high", "count"] + REPORT_COLUMNS,
               [[_fmt(b.low), _fmt(b.high), b.count] + _report_row(b.report) for b in bands])
    populated = [b for b in bands if b.report is not None]
    if populated:
        xs = list(range(len(populated)))
        _plot_lines(run_dir / "perf_by_depth.png",
                    {"f1": (xs, [b.report.f1 for b in populated]),
                     "accuracy": (xs, [b.report.accuracy for b in populated])},
                    "depth band", "score")
    return [f"evaluated {len(bands)} depth bands -> {run_dir / 'perf_by_depth.csv'}"]


def cmd_propagate(cfg: RunConfig, run_dir: Path) -> list[str]:
    tree = TaxonomyTree.from_edge_file(cfg.require("taxonomy"))
    max_distance = cfg.get_int("max_distance", 1)
    threshold = cfg.get_float("threshold", DEEP_RANK_THRESHOLD)
    lines = []

    if cfg.get("s1_file"):
        s1 = read_candidate_tsv(cfg.get("s1_file"))
        if cfg.get("backend", "generator") == "generator":
            raise ConfigError("with s1_file, a scoring backend (backend/table_file or "
                              "backend=uniform with vocab_file) must be configured")
        scorer = _scoring_backend(cfg)
        lines.append(f"loaded {len(s1)} generated candidates from {cfg.get('s1_file')}")
    else:
        triples = read_triple_file(cfg.require("triples"))
        if not triples:
            raise ValueError("no triples to fine-tune the generator on")
        vocab = WordVocab(sorted({w for t in triples for w in triple_words(t)}))
        generator = TrainableBigramBackend(
            vocab,
            context_window=cfg.get_int("context_window", 512),
            seed=cfg.get_int("seed", 0),
        )
        train_generator(
            triples, generator,
            steps=cfg.get_int("gen_steps", 200),
            lr=cfg.get_float("gen_lr", 0.5),
            seed=cfg.get_int("seed", 0),
        )
        prompts = sorted({(t.head, t.relation) for t in triples})
        s1 = generate_candidates(
            prompts, generator,
            width=cfg.get_int("width", 3),
            max_len=cfg.get_int("max_len", 4),
        )
        scorer = generator if cfg.get("backend", "generator") == "generator" else _scoring_backend(cfg)
        lines.append(f"generated {len(s1)} candidates from {len(prompts)} prompts")

    horizontal = horizontal_propagate(tree, s1, max_distance)
    vertical = vertical_propagate(tree, s1, max_distance)
    s2: list[CandidateTriple] = []
    seen = set()
    for cand in list(s1) + horizontal + vertical:
        if cand.triple.key() not in seen:
            seen.add(cand.triple.key())
            s2.append(cand)
    deep = build_deep_candidates(s1, s2, scorer, threshold)

    write_candidate_tsv(run_dir / "s1.tsv", s1)
    write_candidate_tsv(run_dir / "s2.tsv", s2)
    write_candidate_tsv(run_dir / "candidates.tsv", deep)
    write_candidate_tsv(run_dir / "annotation_sheet.tsv", deep, annotation_sheet=True)
    _write_json(run_dir / "summary.json", {
        "s1": len(s1), "horizontal": len(horizontal), "vertical": len(vertical),
        "s2": len(s2), "deep": len(deep), "threshold": threshold,
        "max_distance": max_distance,
    })
    lines.append(f"propagated to {len(s2)} candidates "
                 f"({len(horizontal)} horizontal, {len(vertical)} vertical)")
    lines.append(f"kept {len(deep)} deep candidates -> {run_dir / 'candidates.tsv'}")
    return lines


def cmd_negative_sample(cfg: RunConfig, run_dir: Path) -> list[str]:
    positives = read_triple_file(cfg.require("triples"))
    count = cfg.get_int("count", len(positives))
    seed = cfg.get_int("seed", 0)
    negatives = negative_sample(positives, count, seed=seed)
    out = run_dir / "negatives.tsv"
    write_triple_file(out, negatives)
    _write_json(run_dir / "summary.json", {
        "positives": len(positives), "negatives": len(negatives), "seed": seed,
    })
    return [f"sampled {len(negatives)} negatives from {len(positives)} positives -> {out}"]


def _eval_rows(eval_triples, eval_evidence, corpus, backend, head, k):
    rows = []
    for triple, evidence in zip(eval_triples, eval_evidence):
        bundle = classify_triple(evidence, corpus, backend, head, strategy="avg", k=k)
        rows.append((bundle.per_pair, triple.label))
    return rows


def cmd_sweep_k(cfg: RunConfig, run_dir: Path) -> list[str]:
    k_values = _parse_int_list(cfg.get("k_values", "1,3,5"), "k_values")
    if not k_values or any(k < 1 for k in k_values):
        raise ConfigError("k_values must be a non-empty list of integers >= 1")
    strategies = [s.strip() for s in cfg.get("strategies", "avg,max,vote").split(",") if s.strip()]
    unknown = [s for s in strategies if s not in STRATEGY_CHOICES]
    if unknown:
        raise ConfigError(f"unknown strategies: {', '.join(unknown)}")
    mode = cfg.get_choice("sweep_mode", ("reuse", "retrain"), default="reuse")

    train_triples = _labeled_dataset(cfg.require("triples"))
    eval_triples = _labeled_dataset(cfg.require("eval_triples"))
    corpus = load_corpus(cfg.require("corpus"))
    stopwords = _stopwords(cfg)
    cap = cfg.get_int("per_term_cap", 1000)
    max_k = max(k_values)
    eval_evidence = [
        select_evidence(t, corpus, max_k, stopwords=stopwords, per_term_cap=cap)
        for t in eval_triples
    ]

    if mode == "reuse":
        cfg.values["k"] = str(max_k)
        result, _ = _train_context(cfg, train_triples, corpus)

        def run_for_k(k):
            return _eval_rows(eval_triples, eval_evidence, corpus, result.backend, result.head, k)
    else:
        def run_for_k(k):
            cfg.values["k"] = str(k)
            result, _ = _train_context(cfg, train_triples, corpus)
            return _eval_rows(eval_triples, eval_evidence, corpus, result.backend, result.head, k)

    sweep = sweep_k(k_values, strategies, run_for_k)
    rows = []
    for k in k_values:
        for strategy in strategies:
            report = sweep.by_k[k][strategy]
            rows.append([k, strategy] + _report_row(report))
    _write_csv(run_dir / "sweep.csv", ["k", "strategy"] + REPORT_COLUMNS, rows)
    _plot_lines(run_dir / "sweep.png",
                {s: (k_values, [sweep.by_k[k][s].f1 for k in k_values]) for s in strategies},
                "evidence count K", "F1")
    return [f"swept {len(k_values)} K values x {len(strategies)} strategies "
            f"({mode} mode) -> {run_dir / 'sweep.csv'}"]


def cmd_sweep_strategy(cfg: RunConfig, run_dir: Path) -> list[str]:
    strategies = [s.strip() for s in cfg.get("strategies", "avg,max,vote").split(",") if s.strip()]
    unknown = [s for s in strategies if s not in STRATEGY_CHOICES]
    if unknown:
        raise ConfigError(f"unknown strategies: {', '.join(unknown)}")
    eval_triples = _labeled_dataset(cfg.require("eval_triples"))
    corpus = load_corpus(cfg.require("corpus"))
    stopwords = _stopwords(cfg)
    cap = cfg.get_int("per_term_cap", 1000)

    if cfg.get("checkpoint"):
        backend, head, config, model_type = load_checkpoint(cfg.get("checkpoint"))
        if model_type != "context":
            raise ConfigError("strategy sweep needs a context-model checkpoint")
        k = cfg.get_int("k", config.k)
    else:
        train_triples = _labeled_dataset(cfg.require("triples"))
        result, config = _train_context(cfg, train_triples, corpus)
        backend, head = result.backend, result.head
        k = config.k

    eval_evidence = [
        select_evidence(t, corpus, k, stopwords=stopwords, per_term_cap=cap)
        for t in eval_triples
    ]
    rows_data = _eval_rows(eval_triples, eval_evidence, corpus, backend, head, k)
    sweep = sweep_k([k], strategies, lambda _k: rows_data)
    rows = []
    for strategy in strategies:
        rows.append([strategy] + _report_row(sweep.by_k[k][strategy]))
    _write_csv(run_dir / "strategies.csv", ["strategy"] + REPORT_COLUMNS, rows)
    _plot_bars(run_dir / "strategies.png", strategies,
               [sweep.by_k[k][s].f1 for s in strategies], "F1")
    return [f"compared {len(strategies)} strategies at K={k} -> {run_dir / 'strategies.csv'}"]


# ---------------------------------------------------------------- wiring

@dataclass(frozen=True)
class Command:
    handler: Callable[[RunConfig, Path], list[str]]
    keys: tuple[str, ...]
    help: str


BACKEND_KEYS = ("backend", "vocab_file", "table_file", "model_name", "context_window")
TRAIN_KEYS = ("encoder_layers", "encoder_heads", "hidden_dim", "pool_heads", "k",
              "learning_rate", "train_steps", "seed", "batch_size", "max_len",
              "stopword_file", "per_term_cap")

COMMANDS: dict[str, Command] = {
    "score-depth": Command(cmd_score_depth, ("triples", "threshold") + BACKEND_KEYS,
                           "score depth rank and perplexity for a triple file"),
    "analyze-depth": Command(cmd_analyze_depth,
                             ("scores", "annotations", "metric", "num_bins", "range_edges"),
                             "bin scores, correlate with annotations, plot the depth distribution"),
    "relation-profile": Command(cmd_relation_profile, ("scores",),
                                "per-relation depth rank mean and spread"),
    "ingest-corpus": Command(cmd_ingest_corpus, ("corpus", "line_mode"),
                             "split raw text into an indexed sentence corpus"),
    "select-evidence": Command(cmd_select_evidence,
                               ("triples", "corpus", "k", "stopword_file", "per_term_cap"),
                               "retrieve top-K evidence sentence pairs per triple"),
    "train": Command(cmd_train, ("triples", "corpus", "mode") + TRAIN_KEYS,
                     "train the evidence classifier (or the plain triple baseline)"),
    "predict": Command(cmd_predict,
                       ("checkpoint", "triples", "corpus", "strategy", "k",
                        "stopword_file", "per_term_cap"),
                       "classify triples with a trained checkpoint"),
    "evaluate": Command(cmd_evaluate, ("predictions", "triples"),
                        "score predictions against gold labels"),
    "perf-by-depth": Command(cmd_perf_by_depth,
                             ("predictions", "triples", "scores", "range_edges"),
                             "evaluate inside depth-rank bands"),
    "propagate": Command(cmd_propagate,
                         ("triples", "s1_file", "taxonomy", "max_distance", "threshold",
                          "width", "max_len", "gen_steps", "gen_lr", "seed") + BACKEND_KEYS,
                         "generate candidates, spread them over a taxonomy, keep the deep ones"),
    "negative-sample": Command(cmd_negative_sample, ("triples", "count", "seed"),
                               "corrupt positives into negative training triples"),
    "sweep-k": Command(cmd_sweep_k,
                       ("triples", "eval_triples", "corpus", "k_values", "strategies",
                        "sweep_mode") + TRAIN_KEYS,
                       "compare evidence counts K across ensembling strategies"),
    "sweep-strategy": Command(cmd_sweep_strategy,
                              ("triples", "eval_triples", "corpus", "checkpoint",
                               "strategies") + TRAIN_KEYS,
                              "compare ensembling strategies on one trained model"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deepck",
        description="Depth scoring, evidence mining, and candidate construction "
                    "for commonsense knowledge triples.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, command in COMMANDS.items():
        sp = sub.add_parser(name, help=command.help)
        sp.add_argument("--config", help="key = value settings file")
        sp.add_argument("--run-dir", help="output root (default $DEEPCK_RUN_DIR or ./runs)")
        for key in command.keys:
            sp.add_argument(f"--{key.replace('_', '-')}", dest=f"key_{key}", metavar="VALUE")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    command = COMMANDS[args.command]
    try:
        overrides = {key: getattr(args, f"key_{key}") for key in command.keys}
        cfg = RunConfig.load(args.command, command.keys, args.config, overrides)
        run_dir = prepare_run_dir(resolve_run_root(args.run_dir), args.command)
        write_manifest(run_dir, cfg)
        lines = command.handler(cfg, run_dir)
    except ConfigError as exc:
        print(f"deepck: config error: {exc}", file=sys.stderr)
        return 2
    except (TripleParseError, OSError, ValueError) as exc:
        print(f"deepck: data error: {exc}", file=sys.stderr)
        return 3
    except RuntimeError as exc:
        print(f"deepck: runtime error: {exc}", file=sys.stderr)
        return 4
    print(f"run directory: {run_dir}")
    for line in lines:
        print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())

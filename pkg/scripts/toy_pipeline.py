#!/usr/bin/env python3
"""Walk the whole pipeline on a handcrafted micro-domain.

Three stages, all through the command-line interface so the run directories
look exactly like a real experiment: score triple depth with a toy bigram
table, train the evidence classifier on a few separable triples, then
fine-tune the generator and propagate candidates over a small taxonomy.
"""

import argparse
import sys
from pathlib import Path

from deepck.cli import main as deepck
from deepck.triples import LabeledTriple, write_triple_file


def write_inputs(root: Path) -> None:
    write_triple_file(root / "depth_triples.tsv", [
        LabeledTriple("apple", "Is", "red"),
        LabeledTriple("whale", "AtLocation", "ocean"),
    ])
    (root / "table.txt").write_text(
        "* apple 0.6\n"
        "apple is 0.9\n"
        "is red 0.8\n"
    )
    (root / "corpus.txt").write_text(
        "the gizmo is certainly shiny today\n"
        "being shiny felt certainly fine here\n"
        "the widget is allegedly dull today\n"
        "being dull felt allegedly poor here\n"
    )
    write_triple_file(root / "train.tsv", [
        LabeledTriple("gizmo", "RelatedTo", "shiny", label=1),
        LabeledTriple("widget", "RelatedTo", "dull", label=0),
    ])
    write_triple_file(root / "seed_triples.tsv", [
        LabeledTriple("apple", "HasProperty", "sweet"),
        LabeledTriple("bread", "HasProperty", "soft"),
    ])
    (root / "taxonomy.tsv").write_text(
        "apple\tfruit\n"
        "orange\tfruit\n"
        "rye\tbread\n"
    )


def run(args: list[str]) -> None:
    print("$ deepck " + " ".join(args))
    code = deepck(args)
    if code != 0:
        sys.exit(f"command failed with exit code {code}")
    print()


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--workdir", default="toy_run", help="input and run directory")
    args = ap.parse_args()

    root = Path(args.workdir)
    root.mkdir(parents=True, exist_ok=True)
    write_inputs(root)
    runs = str(root / "runs")

    # stage 1: depth metrics from the toy table
    run(["score-depth", "--run-dir", runs,
         "--triples", str(root / "depth_triples.tsv"),
         "--backend", "bigram", "--table-file", str(root / "table.txt"),
         "--threshold", "2"])

    # stage 2: evidence mining and the attention-pooled classifier
    run(["ingest-corpus", "--run-dir", runs,
         "--corpus", str(root / "corpus.txt"), "--line-mode", "true"])
    corpus_jsonl = str(next((root / "runs" / "ingest-corpus").iterdir()) / "corpus.jsonl")
    run(["train", "--run-dir", runs,
         "--triples", str(root / "train.tsv"), "--corpus", corpus_jsonl,
         "--encoder-layers", "1", "--encoder-heads", "2", "--hidden-dim", "16",
         "--pool-heads", "2", "--k", "2", "--learning-rate", "0.05",
         "--train-steps", "60", "--batch-size", "2", "--max-len", "32"])
    checkpoint = str(next((root / "runs" / "train").iterdir()) / "checkpoint")
    run(["predict", "--run-dir", runs,
         "--checkpoint", checkpoint,
         "--triples", str(root / "train.tsv"), "--corpus", corpus_jsonl,
         "--strategy", "avg"])
    predictions = str(next((root / "runs" / "predict").iterdir()) / "predictions.csv")
    run(["evaluate", "--run-dir", runs,
         "--predictions", predictions, "--triples", str(root / "train.tsv")])

    # stage 3: generate candidates and propagate them over the taxonomy
    run(["propagate", "--run-dir", runs,
         "--triples", str(root / "seed_triples.tsv"),
         "--taxonomy", str(root / "taxonomy.tsv"),
         "--gen-steps", "150", "--width", "2", "--max-len", "3",
         "--threshold", "1.5"])

    print(f"all stages finished; outputs under {root / 'runs'}")


if __name__ == "__main__":
    main()

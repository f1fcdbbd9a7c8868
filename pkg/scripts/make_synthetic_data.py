#!/usr/bin/env python3
"""Generate the planted-signal triple dataset and write it to disk.

The output directory gets corpus.jsonl, vocab.txt, train.tsv, and test.tsv,
so the splits can go straight into `deepck train` / `deepck predict` with
the corpus file. Defaults mirror the learnability check in the test suite.
"""

import argparse

from deepck.synthetic import make_dataset, write_dataset


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="data/synthetic", help="output directory")
    ap.add_argument("--n-triples", type=int, default=2000)
    ap.add_argument("--train-count", type=int, default=1500)
    ap.add_argument("--k", type=int, default=3, help="evidence pairs per triple")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    ds = make_dataset(args.n_triples, args.train_count, args.k, args.seed)
    write_dataset(args.out, ds)
    print(f"{args.out}: {len(ds.corpus)} sentences, vocab size {len(ds.vocab)}, "
          f"{len(ds.train)} train / {len(ds.test)} held-out triples")


if __name__ == "__main__":
    main()

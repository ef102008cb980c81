#!/usr/bin/env python3
"""Materialize the digit corpus used by the experiment configs.

If real MNIST IDX files (train-images-idx3-ubyte etc.) already sit in the
target directory they are used as-is; otherwise a deterministic synthetic
corpus is written once in the same IDX format.
"""

import argparse

from nish_lab.data import ensure_dataset_files, load_corpus


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--data-dir", default="data")
    parser.add_argument("--n", type=int, default=14000,
                        help="synthetic corpus size (ignored for real IDX)")
    parser.add_argument("--seed", type=int, default=1234)
    args = parser.parse_args()

    img, lab = ensure_dataset_files(args.data_dir, args.n, args.seed)
    full = load_corpus(args.data_dir, args.n, args.seed)
    print(f"images: {img}")
    print(f"labels: {lab}")
    print(f"corpus: {len(full)} samples, shape {full.images.shape[1:]}")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Generate a desk-scale procedural texture dataset with split lists.

Run: python3 scripts/make_synthetic_dataset.py --out data/textures --train 64 --test 8
"""

import argparse

from inpaint_lab.data import write_synthetic_dataset


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", required=True)
    parser.add_argument("--train", type=int, default=64)
    parser.add_argument("--test", type=int, default=8)
    parser.add_argument("--size", type=int, default=32)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    spec = write_synthetic_dataset(args.out, n_train=args.train, n_test=args.test,
                                   size=args.size, seed=args.seed)
    print(f"wrote {len(spec.train_files)} train + {len(spec.test_files)} test images "
          f"({args.size}x{args.size}) under {args.out}")


if __name__ == "__main__":
    main()

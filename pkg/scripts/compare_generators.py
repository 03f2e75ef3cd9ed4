#!/usr/bin/env python3
"""Compare generator variants by their reconstruction-only training curves.

Trains each architecture variant (full model, no dilation, no skip fusion,
single level) for the same number of steps on the synthetic texture set and
writes one loss CSV per variant, ready for plotting.

Run: python3 scripts/compare_generators.py --steps 500 --out /tmp/gen_compare
"""

import argparse
import os

from inpaint_lab.data import ingest_dataset, write_synthetic_dataset
from inpaint_lab.imaging import MaskSpec
from inpaint_lab.networks import (
    DiscriminatorSpec,
    GeneratorSpec,
    compute_receptive_field,
)
from inpaint_lab.perceptual import PerceptualSpec
from inpaint_lab.trainer import StageSpec, TrainConfig, make_trainer

VARIANTS = {
    "full": GeneratorSpec(levels=2, encoder_channels=(24, 48), dilation_rates=(1, 2, 4)),
    "no_dilation": GeneratorSpec(levels=2, encoder_channels=(24, 48), dilation_rates=()),
    "no_fusion": GeneratorSpec(levels=2, encoder_channels=(24, 48),
                               dilation_rates=(1, 2, 4), fusion=False),
    "single_level": GeneratorSpec(levels=1, encoder_channels=(24,), dilation_rates=(1, 2, 4)),
}


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--steps", type=int, default=500)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="/tmp/gen_compare")
    args = parser.parse_args()

    data_dir = os.path.join(args.out, "dataset")
    spec = write_synthetic_dataset(data_dir, n_train=32, n_test=0, size=32, seed=21)
    spec.flip_prob, spec.max_shift = 0.0, 0
    dataset = ingest_dataset(spec).train

    for name, gen_spec in VARIANTS.items():
        config = TrainConfig(stages=(StageSpec(args.steps, ("reconstruction",)),),
                             batch_size=8, seed=args.seed, checkpoint_every=10**6)
        trainer = make_trainer(
            config, dataset, gen_spec,
            DiscriminatorSpec(channels=(8, 16), input_size=32),
            PerceptualSpec(layer_taps=("conv1_2",), layer_weights=(1.0,)),
            MaskSpec(8, 16),
        )
        run_dir = os.path.join(args.out, name)
        trainer.run(run_dir, log_name="losses.csv")
        last = trainer.history[-1]["loss_recon"]
        rf = compute_receptive_field(gen_spec).size
        print(f"{name:>14}: final recon loss {last:.5f}  rf={rf}  -> {run_dir}/losses.csv")


if __name__ == "__main__":
    main()

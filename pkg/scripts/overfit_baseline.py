#!/usr/bin/env python3
"""Independent reconstruction-only overfit baseline.

Minimal torch loop (deliberately NOT using the Trainer) over 8 procedural
textures: memorize them through random 8-16 px masks, polynomial LR decay,
then report a deterministic masked mean-L1 over 16 fixed mask draws. Used to
validate the overfit threshold the acceptance suite asserts via the Trainer.

Run: python3 scripts/overfit_baseline.py [--steps 2000]
"""

import argparse
import time

import numpy as np
import torch

from inpaint_lab.data import ingest_dataset, make_batch, write_synthetic_dataset
from inpaint_lab.imaging import MaskSpec
from inpaint_lab.networks import GeneratorSpec, build_generator, to_nchw


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--steps", type=int, default=2000)
    parser.add_argument("--batch-size", type=int, default=8)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--dir", default="/tmp/overfit_baseline")
    args = parser.parse_args()

    spec = write_synthetic_dataset(args.dir, n_train=8, n_test=0, size=32, seed=11)
    spec.flip_prob, spec.max_shift = 0.0, 0
    dataset = ingest_dataset(spec).train
    mask_spec = MaskSpec(8, 16)
    rng = np.random.default_rng(args.seed)

    gen_spec = GeneratorSpec(levels=2, encoder_channels=(24, 48), dilation_rates=(1, 2))
    model = build_generator(gen_spec, seed=args.seed)
    opt = torch.optim.Adam(model.parameters(), lr=1e-3, betas=(0.9, 0.999))

    t0 = time.time()
    model.train()
    for step in range(1, args.steps + 1):
        lr = 1e-6 + (1e-3 - 1e-6) * (1 - (step - 1) / args.steps)  # poly decay, power 1
        for group in opt.param_groups:
            group["lr"] = lr
        batch = make_batch(dataset, args.batch_size, mask_spec, rng)
        gt = to_nchw(batch.gt)
        input4 = to_nchw(batch.input4)
        mask = to_nchw(batch.mask)
        out = model(input4)
        residual = (out - gt) * mask
        n = mask.sum() * 3
        loss = torch.where(residual.abs() < 1, 0.5 * residual ** 2,
                           residual.abs() - 0.5).sum() / n
        opt.zero_grad()
        loss.backward()
        opt.step()
        if step % 200 == 0 or step == 1:
            with torch.no_grad():
                l1 = (residual.abs().sum() / n).item()
            print(f"step {step:5d}  smooth_l1 {loss.item():.5f}  masked_mean_l1 {l1:.5f}  "
                  f"elapsed {time.time() - t0:.1f}s")

    # deterministic evaluation: 16 fixed mask draws per image
    eval_rng = np.random.default_rng(555)
    model.eval()
    total = count = 0.0
    for _ in range(16):
        batch = make_batch(dataset, 8, mask_spec, eval_rng, indices=range(8))
        gt, input4, mask = to_nchw(batch.gt), to_nchw(batch.input4), to_nchw(batch.mask)
        with torch.no_grad():
            out = model(input4)
        total += float(((out - gt).abs() * mask).sum())
        count += float(mask.sum() * 3)
    print(f"final deterministic masked_mean_l1 {total / count:.5f}  "
          f"total {time.time() - t0:.1f}s")


if __name__ == "__main__":
    main()

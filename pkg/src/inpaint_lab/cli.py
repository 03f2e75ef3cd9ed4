"""Command-line entry points: train, complete, evaluate, serve."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from .data import dataset_spec_from_config, ingest_dataset
from .errors import ConfigurationError, InpaintLabError, ResolutionError
from .imaging import (
    ImageTensor,
    MaskSpec,
    load_image,
    load_mask,
    save_image,
    to_uint8,
)
from .metrics import emit_report, evaluate
from .networks import DiscriminatorSpec, GeneratorSpec, forward_generate
from .perceptual import PerceptualSpec
from .service import complete_arrays, create_app, load_bundle
from .trainer import TrainConfig, load_generator_from_checkpoint, run_training

HOME_ENV = "INPAINT_LAB_HOME"


def _build(cls, block: dict, field: str):
    try:
        return cls(**block)
    except TypeError as exc:
        raise ConfigurationError(str(exc), field=field)


@dataclass
class RunConfig:
    dataset_spec: object
    generator: GeneratorSpec
    discriminator: DiscriminatorSpec
    perceptual: PerceptualSpec
    mask: MaskSpec
    train: TrainConfig
    out_dir: str


def load_run_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}")
    base = os.path.dirname(os.path.abspath(path))
    if "dataset" not in doc:
        raise ConfigurationError("missing block", field="dataset")
    if "train" not in doc:
        raise ConfigurationError("missing block", field="train")
    cfg = RunConfig(
        dataset_spec=dataset_spec_from_config(doc["dataset"], base),
        generator=_build(GeneratorSpec, doc.get("generator", {}), "generator"),
        discriminator=_build(DiscriminatorSpec, doc.get("discriminator", {}), "discriminator"),
        perceptual=_build(PerceptualSpec, doc.get("perceptual", {}), "perceptual"),
        mask=_build(MaskSpec, doc.get("mask", {}), "mask"),
        train=_build(TrainConfig, doc["train"], "train"),
        out_dir=os.path.join(base, doc.get("out_dir", "runs/run")),
    )
    cfg.train.validate()
    cfg.generator.validate()
    cfg.discriminator.validate()
    cfg.perceptual.validate()
    return cfg


def resolve_checkpoint(name: str) -> str:
    """A bare name is looked up in $INPAINT_LAB_HOME."""
    if os.path.isfile(name):
        return name
    home = os.environ.get(HOME_ENV)
    if home:
        candidate = os.path.join(home, name)
        if os.path.isfile(candidate):
            return candidate
        candidate_pt = candidate + ".pt"
        if os.path.isfile(candidate_pt):
            return candidate_pt
    raise InpaintLabError(f"checkpoint file not found: {name}")


def cmd_train(args) -> int:
    cfg = load_run_config(args.config)
    data = ingest_dataset(cfg.dataset_spec)
    final = run_training(
        cfg.train, data.train, cfg.generator, cfg.discriminator, cfg.perceptual,
        cfg.mask, cfg.out_dir, resume_from=args.resume,
    )
    print(f"training complete; final checkpoint: {final}")
    return 0


def cmd_complete(args) -> int:
    generator = load_generator_from_checkpoint(resolve_checkpoint(args.checkpoint))
    image = load_image(args.image)
    mask = load_mask(args.mask)
    if (image.height, image.width) != (mask.height, mask.width):
        raise InpaintLabError(
            f"image is {image.width}x{image.height} but mask is {mask.width}x{mask.height}"
        )
    image_u8 = to_uint8(image)
    try:
        out = complete_arrays(generator, image_u8, mask.values.astype(bool))
    except ResolutionError as exc:
        raise InpaintLabError(f"{exc}")
    save_image(ImageTensor(out.astype(np.float32), "raw"), args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    generator = load_generator_from_checkpoint(resolve_checkpoint(args.checkpoint))
    cfg = load_run_config(args.config)
    data = ingest_dataset(cfg.dataset_spec)
    report = evaluate(
        lambda input4: forward_generate(generator, input4),
        data.test, regime=args.regime, mask_size=args.mask_size, seed=args.seed,
    )
    os.makedirs(args.out, exist_ok=True)
    for fmt, ext in (("text", "txt"), ("csv", "csv"), ("json", "json")):
        with open(os.path.join(args.out, f"report.{ext}"), "w") as fh:
            fh.write(emit_report(report, fmt))
    print(emit_report(report, "text"))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    bundle = load_bundle(resolve_checkpoint(args.checkpoint))
    app = create_app(bundle)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="inpaint-lab",
                                     description="Image completion: train, run, evaluate, serve.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run staged training from a JSON config")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--resume", default=None, help="checkpoint to continue from")
    p_train.set_defaults(func=cmd_train)

    p_complete = sub.add_parser("complete", help="fill the masked region of one image")
    p_complete.add_argument("--checkpoint", required=True)
    p_complete.add_argument("--image", required=True)
    p_complete.add_argument("--mask", required=True)
    p_complete.add_argument("--out", required=True)
    p_complete.set_defaults(func=cmd_complete)

    p_eval = sub.add_parser("evaluate", help="masked-region metrics on the test split")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--config", required=True)
    p_eval.add_argument("--regime", choices=("center", "random"), default="center")
    p_eval.add_argument("--mask-size", type=int, default=56)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--out", default="eval_out")
    p_eval.set_defaults(func=cmd_eval_dispatch)

    p_serve = sub.add_parser("serve", help="HTTP inference service for the mask studio")
    p_serve.add_argument("--checkpoint", required=True)
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.set_defaults(func=cmd_serve)
    return parser


def cmd_eval_dispatch(args):
    return cmd_evaluate(args)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except InpaintLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

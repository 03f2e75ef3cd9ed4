"""Staged training loop: reconstruction warm-up, gradient-balanced weights,
alternating D/G updates, polynomial LR decay, resumable checkpoints."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np
import torch

from . import losses
from .data import BatchSource, Dataset
from .errors import (
    BalancingError,
    CheckpointError,
    ConfigurationError,
    NumericError,
    TrainingDiverged,
)
from .imaging import CompletionBatch, MaskSpec
from .losses import LossWeights
from .networks import (
    DiscriminatorSpec,
    GeneratorSpec,
    build_discriminator,
    build_generator,
    generator_spec_from_json,
    spec_to_json,
    to_nchw,
)
from .perceptual import PerceptualSpec, load_backbone

CHECKPOINT_VERSION = 1
LOSS_NAMES = ("reconstruction", "adversarial", "perceptual")
LOG_COLUMNS = ("step", "stage", "loss_recon", "loss_adv_g", "loss_adv_d", "loss_perc", "lr")


@dataclass
class StageSpec:
    steps: int
    losses: tuple[str, ...]

    def __post_init__(self):
        self.losses = tuple(self.losses)


@dataclass
class TrainConfig:
    stages: tuple[StageSpec, ...]
    lr_start: float = 1e-3
    lr_end: float = 1e-6
    decay_power: float = 1.0
    adam_betas: tuple[float, float] = (0.9, 0.999)
    batch_size: int = 8
    seed: int = 0
    warmup_balance_steps: int = 50
    rho_a: float = 1.0
    rho_p: float = 1.0
    replace_context: bool = True
    checkpoint_every: int = 100
    lambda1: float | None = None  # None -> set by gradient balancing
    lambda2: float | None = None

    def __post_init__(self):
        self.stages = tuple(
            s if isinstance(s, StageSpec) else StageSpec(**s) for s in self.stages
        )
        self.adam_betas = tuple(self.adam_betas)

    def validate(self):
        if not self.stages:
            raise ConfigurationError("need at least one stage", field="train.stages")
        for i, stage in enumerate(self.stages):
            if stage.steps < 1:
                raise ConfigurationError("stage step count must be >= 1", field=f"train.stages[{i}].steps")
            unknown = set(stage.losses) - set(LOSS_NAMES)
            if unknown:
                raise ConfigurationError(f"unknown losses {sorted(unknown)}", field=f"train.stages[{i}].losses")
            if not stage.losses:
                raise ConfigurationError("stage must enable at least one loss", field=f"train.stages[{i}].losses")
        if not self.lr_start > self.lr_end > 0:
            raise ConfigurationError(
                f"need lr_start > lr_end > 0, got {self.lr_start} and {self.lr_end}",
                field="train.lr_end",
            )
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1", field="train.batch_size")
        if self.warmup_balance_steps < 1:
            raise ConfigurationError("warmup_balance_steps must be >= 1", field="train.warmup_balance_steps")

    @property
    def total_steps(self) -> int:
        return sum(s.steps for s in self.stages)


def default_stages(total_steps: int) -> tuple[StageSpec, StageSpec]:
    """Reconstruction warm-up for 30% of steps, then the full hybrid loss."""
    warm = max(1, round(0.3 * total_steps))
    return (
        StageSpec(steps=warm, losses=("reconstruction",)),
        StageSpec(steps=max(1, total_steps - warm), losses=LOSS_NAMES),
    )


@dataclass
class TrainState:
    global_step: int = 0
    stage_index: int = 0
    lambda1: float | None = None
    lambda2: float | None = None


def poly_lr(step: int, config: TrainConfig) -> float:
    """lr_end + (lr_start - lr_end) * (1 - step/total)^power, clamped at the ends."""
    total = config.total_steps
    step = min(max(step, 0), total)
    frac = 1.0 - step / total
    return config.lr_end + (config.lr_start - config.lr_end) * frac ** config.decay_power


def compute_balanced_lambdas(g_r, g_a, g_p, rho_a: float = 1.0, rho_p: float = 1.0):
    """lambda_i = rho_i * median(reference) / median(term), from recorded norms."""
    med_r = float(np.median(g_r))
    med_a = float(np.median(g_a)) if g_a is not None else None
    med_p = float(np.median(g_p)) if g_p is not None else None
    if med_r == 0.0:
        raise BalancingError("median reconstruction gradient is zero")
    lam1 = lam2 = None
    if med_a is not None:
        if med_a == 0.0:
            raise BalancingError("median adversarial gradient is zero (dead loss path)")
        lam1 = rho_a * med_r / med_a
    if med_p is not None:
        if med_p == 0.0:
            raise BalancingError("median perceptual gradient is zero (dead loss path)")
        lam2 = rho_p * med_r / med_p
    return lam1, lam2


class Trainer:
    """Owns the models, optimizers and state for one training run."""

    def __init__(self, config: TrainConfig, generator, discriminator, extractor,
                 batch_source: BatchSource, label_rng: np.random.Generator,
                 weights_template: LossWeights | None = None):
        config.validate()
        self.config = config
        self.generator = generator
        self.discriminator = discriminator
        self.extractor = extractor
        self.batch_source = batch_source
        self.label_rng = label_rng
        self.state = TrainState(lambda1=config.lambda1, lambda2=config.lambda2)
        template = weights_template or LossWeights(alpha=extractor.spec.layer_weights)
        self._real_range = template.real_label_range
        self._fake_range = template.fake_label_range
        self._alpha = template.alpha
        self.g_opt = torch.optim.Adam(generator.parameters(), lr=config.lr_start, betas=config.adam_betas)
        self.d_opt = torch.optim.Adam(discriminator.parameters(), lr=config.lr_start, betas=config.adam_betas)
        self.history: list[dict] = []
        self.last_checkpoint: str | None = None

    # -- loss plumbing -------------------------------------------------------

    def loss_weights(self) -> LossWeights:
        return LossWeights(
            lambda1=self.state.lambda1 or 0.0,
            lambda2=self.state.lambda2 or 0.0,
            alpha=self._alpha,
            real_label_range=self._real_range,
            fake_label_range=self._fake_range,
        )

    def current_stage(self) -> StageSpec:
        return self.config.stages[min(self.state.stage_index, len(self.config.stages) - 1)]

    def _tensors(self, batch: CompletionBatch):
        return to_nchw(batch.gt), to_nchw(batch.input4), to_nchw(batch.mask)

    def _fake_for_discriminator(self, generated, gt, mask):
        if self.config.replace_context:
            return losses.compose_completion(generated, gt, mask)
        return generated

    def _set_lr(self, optimizer, lr):
        for group in optimizer.param_groups:
            group["lr"] = lr

    def _diverged(self, label) -> TrainingDiverged:
        return TrainingDiverged(
            f"{label} became non-finite at step {self.state.global_step}"
            + (f"; last good checkpoint: {self.last_checkpoint}" if self.last_checkpoint else ""),
            last_checkpoint=self.last_checkpoint,
        )

    def _check_finite(self, value, label):
        if isinstance(value, torch.Tensor):
            value = value.detach()
        if not np.isfinite(float(value)):
            raise self._diverged(label)

    # -- single steps --------------------------------------------------------

    def train_step_d(self, batch: CompletionBatch) -> float:
        """One discriminator update; generator parameters stay untouched."""
        if "adversarial" not in self.current_stage().losses:
            raise ConfigurationError(
                "discriminator step requested but the current stage has no adversarial loss"
            )
        gt, input4, mask = self._tensors(batch)
        self.generator.eval()
        with torch.no_grad():
            generated = self.generator(input4)
        fake = self._fake_for_discriminator(generated, gt, mask)
        self.discriminator.train()
        try:
            p_real = torch.sigmoid(self.discriminator(gt))
            p_fake = torch.sigmoid(self.discriminator(fake))
            loss = losses.adversarial_d_loss(p_real, p_fake, self.loss_weights(), self.label_rng)
        except NumericError as exc:
            raise self._diverged(f"discriminator loss ({exc})") from exc
        self._check_finite(loss, "discriminator loss")
        self._set_lr(self.d_opt, poly_lr(self.state.global_step, self.config))
        self.d_opt.zero_grad()
        loss.backward()
        self.d_opt.step()
        return float(loss.detach())

    def train_step_g(self, batch: CompletionBatch, active: tuple[str, ...] | None = None) -> dict:
        """One generator update on the stage's active losses; D and backbone untouched."""
        active = tuple(active if active is not None else self.current_stage().losses)
        for name in active:
            if name in ("adversarial", "perceptual"):
                lam = self.state.lambda1 if name == "adversarial" else self.state.lambda2
                if lam is None:
                    raise ConfigurationError(
                        f"{name} loss active but its lambda is unset; run balancing first"
                    )
        gt, input4, mask = self._tensors(batch)
        self.generator.train()
        self.discriminator.eval()
        weights = self.loss_weights()
        try:
            generated = self.generator(input4)
            parts = {}
            if "reconstruction" in active:
                parts["reconstruction"] = losses.reconstruction_loss(generated, gt, mask)
            if "adversarial" in active:
                fake = self._fake_for_discriminator(generated, gt, mask)
                parts["adversarial"] = losses.adversarial_g_loss(
                    torch.sigmoid(self.discriminator(fake))
                )
            if "perceptual" in active:
                parts["perceptual"] = losses.perceptual_loss(
                    self.extractor, generated, gt, mask, weights
                )
            total = losses.hybrid_loss(parts, weights)
        except NumericError as exc:
            raise self._diverged(f"generator loss ({exc})") from exc
        self._check_finite(total, "generator loss")
        self._set_lr(self.g_opt, poly_lr(self.state.global_step, self.config))
        self.g_opt.zero_grad()
        self.d_opt.zero_grad()  # discard any D grads populated through the fake branch
        total.backward()
        self.g_opt.step()
        self.d_opt.zero_grad()
        return {name: float(value.detach()) for name, value in parts.items()}

    # -- gradient balancing ----------------------------------------------------

    def measure_gradient_norms(self, n_steps: int, terms=("adversarial", "perceptual")) -> dict:
        """Per-term generator gradient norms over n warm-up batches, no updates."""
        series = {"reconstruction": []}
        for term in terms:
            series[term] = []
        weights = LossWeights(alpha=self._alpha)
        for _ in range(n_steps):
            batch = self.batch_source.next_batch()
            gt, input4, mask = self._tensors(batch)
            for term in series:
                self.generator.train()
                self.discriminator.eval()
                generated = self.generator(input4)
                if term == "reconstruction":
                    loss = losses.reconstruction_loss(generated, gt, mask)
                elif term == "adversarial":
                    fake = self._fake_for_discriminator(generated, gt, mask)
                    loss = losses.adversarial_g_loss(torch.sigmoid(self.discriminator(fake)))
                else:
                    loss = losses.perceptual_loss(self.extractor, generated, gt, mask, weights)
                self.g_opt.zero_grad()
                loss.backward()
                norm_sq = 0.0
                for p in self.generator.parameters():
                    if p.grad is not None:
                        norm_sq += float(p.grad.pow(2).sum())
                series[term].append(norm_sq ** 0.5)
                self.g_opt.zero_grad()
        return series

    def balance_hyperparameters(self, terms=("adversarial", "perceptual")) -> tuple:
        """Set lambdas so each term's gradient matches the reconstruction gradient."""
        series = self.measure_gradient_norms(self.config.warmup_balance_steps, terms)
        lam1, lam2 = compute_balanced_lambdas(
            series["reconstruction"],
            series.get("adversarial"),
            series.get("perceptual"),
            rho_a=self.config.rho_a,
            rho_p=self.config.rho_p,
        )
        if lam1 is not None:
            self.state.lambda1 = lam1
        if lam2 is not None:
            self.state.lambda2 = lam2
        return self.state.lambda1, self.state.lambda2

    # -- full run --------------------------------------------------------------

    def run(self, out_dir, log_name="losses.csv") -> str:
        """Execute all stages; returns the final checkpoint path."""
        os.makedirs(out_dir, exist_ok=True)
        log_path = os.path.join(out_dir, log_name)
        fresh_log = self.state.global_step == 0 or not os.path.exists(log_path)
        with open(log_path, "w" if fresh_log else "a", newline="") as log_file:
            writer = csv.writer(log_file)
            if fresh_log:
                writer.writerow(LOG_COLUMNS)
            for stage_index in range(self.state.stage_index, len(self.config.stages)):
                self.state.stage_index = stage_index
                stage = self.config.stages[stage_index]
                self._maybe_balance(stage)
                adversarial = "adversarial" in stage.losses
                stage_end = sum(s.steps for s in self.config.stages[: stage_index + 1])
                while self.state.global_step < stage_end:
                    batch = self.batch_source.next_batch()
                    d_loss = self.train_step_d(batch) if adversarial else 0.0
                    parts = self.train_step_g(batch)
                    lr = poly_lr(self.state.global_step, self.config)
                    self.state.global_step += 1
                    record = {
                        "step": self.state.global_step,
                        "stage": stage_index,
                        "loss_recon": parts.get("reconstruction", 0.0),
                        "loss_adv_g": parts.get("adversarial", 0.0),
                        "loss_adv_d": d_loss,
                        "loss_perc": parts.get("perceptual", 0.0),
                        "lr": lr,
                    }
                    self.history.append(record)
                    writer.writerow([record[c] for c in LOG_COLUMNS])
                    if self.state.global_step % self.config.checkpoint_every == 0:
                        self.save_checkpoint(os.path.join(out_dir, f"ckpt_step{self.state.global_step}.pt"))
            log_file.flush()
        final = os.path.join(out_dir, "ckpt_final.pt")
        self.save_checkpoint(final)
        return final

    def _maybe_balance(self, stage: StageSpec):
        need = []
        if "adversarial" in stage.losses and self.state.lambda1 is None:
            need.append("adversarial")
        if "perceptual" in stage.losses and self.state.lambda2 is None:
            need.append("perceptual")
        if need:
            self.balance_hyperparameters(tuple(need))

    # -- checkpoints -------------------------------------------------------------

    def save_checkpoint(self, path) -> str:
        payload = {
            "version": CHECKPOINT_VERSION,
            "generator_spec": spec_to_json(self.generator.spec),
            "discriminator_spec": spec_to_json(self.discriminator.spec),
            "perceptual_spec": json.dumps(asdict(self.extractor.spec)),
            "generator": self.generator.state_dict(),
            "discriminator": self.discriminator.state_dict(),
            "g_opt": self.g_opt.state_dict(),
            "d_opt": self.d_opt.state_dict(),
            "train_state": asdict(self.state),
            "config": asdict(self.config),
            "data_rng": self.batch_source.state(),
            "label_rng": self.label_rng.bit_generator.state,
        }
        torch.save(payload, path)
        self.last_checkpoint = str(path)
        return str(path)

    def restore(self, payload: dict):
        self.generator.load_state_dict(payload["generator"])
        self.discriminator.load_state_dict(payload["discriminator"])
        self.g_opt.load_state_dict(payload["g_opt"])
        self.d_opt.load_state_dict(payload["d_opt"])
        self.state = TrainState(**payload["train_state"])
        self.batch_source.restore_state(payload["data_rng"])
        self.label_rng.bit_generator.state = payload["label_rng"]


def load_checkpoint(path) -> dict:
    """Raw checkpoint payload; raises CheckpointError on version mismatch."""
    if not os.path.isfile(path):
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    version = payload.get("version") if isinstance(payload, dict) else None
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"checkpoint {path} has version {version}, this build reads version {CHECKPOINT_VERSION}"
        )
    return payload


def load_generator_from_checkpoint(path):
    """Rebuild just the generator (spec comes from the embedded JSON)."""
    payload = load_checkpoint(path)
    spec = generator_spec_from_json(payload["generator_spec"])
    generator = build_generator(spec)
    generator.load_state_dict(payload["generator"])
    generator.eval()
    return generator


def make_trainer(config: TrainConfig, dataset: Dataset, generator_spec: GeneratorSpec,
                 discriminator_spec: DiscriminatorSpec, perceptual_spec: PerceptualSpec,
                 mask_spec: MaskSpec, prefetch: int = 0) -> Trainer:
    """Wire models, extractor and batch stream from specs with derived seeds."""
    config.validate()
    generator = build_generator(generator_spec, seed=config.seed)
    discriminator = build_discriminator(discriminator_spec, seed=config.seed + 1)
    extractor = load_backbone(perceptual_spec)
    source = BatchSource(
        dataset, mask_spec, config.batch_size,
        np.random.default_rng(config.seed + 2), prefetch=prefetch,
    )
    label_rng = np.random.default_rng(config.seed + 3)
    return Trainer(config, generator, discriminator, extractor, source, label_rng)


def run_training(config: TrainConfig, dataset: Dataset, generator_spec: GeneratorSpec,
                 discriminator_spec: DiscriminatorSpec, perceptual_spec: PerceptualSpec,
                 mask_spec: MaskSpec, out_dir, resume_from=None) -> str:
    """Build everything, optionally restore, run all stages; returns final checkpoint."""
    trainer = make_trainer(config, dataset, generator_spec, discriminator_spec,
                           perceptual_spec, mask_spec)
    if resume_from:
        trainer.restore(load_checkpoint(resume_from))
        trainer.last_checkpoint = str(resume_from)
    return trainer.run(out_dir)

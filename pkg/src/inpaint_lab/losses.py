"""Loss terms for completion training.

Masking convention matches the imaging module: mask value 1 marks a missing
pixel. Reconstruction and perceptual losses are computed on pixel-masked
images (img * mask), so unmasked pixels contribute neither value nor gradient.
All functions take NCHW tensors with masks shaped (B,1,H,W).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .errors import (
    ConfigurationError,
    DegenerateMaskError,
    NumericError,
    ValidationError,
)
from .perceptual import FeatureExtractor, extract_features

PROB_EPS = 1e-7  # probabilities are clamped to [eps, 1-eps] inside log terms


@dataclass
class LossWeights:
    lambda1: float = 0.0  # adversarial weight
    lambda2: float = 0.0  # perceptual weight
    alpha: tuple[float, ...] = (1.0, 1.0, 1.0)
    real_label_range: tuple[float, float] = (0.8, 1.0)
    fake_label_range: tuple[float, float] = (0.0, 0.2)

    def __post_init__(self):
        self.alpha = tuple(float(a) for a in self.alpha)
        self.real_label_range = tuple(float(v) for v in self.real_label_range)
        self.fake_label_range = tuple(float(v) for v in self.fake_label_range)
        for name, value in (("lambda1", self.lambda1), ("lambda2", self.lambda2)):
            if not np.isfinite(value) or value < 0:
                raise ConfigurationError(f"{name} must be finite and >= 0, got {value}")
        for name, (lo, hi) in (
            ("real_label_range", self.real_label_range),
            ("fake_label_range", self.fake_label_range),
        ):
            if not 0.0 <= lo <= hi <= 1.0:
                raise ConfigurationError(f"{name} must be ordered within [0,1], got [{lo}, {hi}]")


def smooth_l1(residual: torch.Tensor) -> torch.Tensor:
    """Elementwise 0.5*x^2 if |x| < 1 else |x| - 0.5."""
    if torch.isnan(residual).any():
        raise NumericError("smooth_l1 received NaN input")
    a = residual.abs()
    return torch.where(a < 1.0, 0.5 * residual * residual, a - 0.5)


def reconstruction_loss(generated: torch.Tensor, gt: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Mean smooth-L1 over masked pixels x channels only."""
    _check_pair(generated, gt, mask)
    n = mask.sum() * generated.shape[1]
    if n.item() == 0:
        raise DegenerateMaskError("reconstruction loss undefined for an all-zero mask")
    residual = (generated - gt) * mask
    return smooth_l1(residual).sum() / n


def smooth_labels(kind: str, n: int, rng: np.random.Generator,
                  weights: LossWeights | None = None) -> np.ndarray:
    """One-sided smoothing targets: uniform in [0.8,1] for real, [0,0.2] for fake."""
    weights = weights or LossWeights()
    if kind == "real":
        lo, hi = weights.real_label_range
    elif kind == "fake":
        lo, hi = weights.fake_label_range
    else:
        raise ConfigurationError(f"label kind must be 'real' or 'fake', got {kind!r}")
    return rng.uniform(lo, hi, size=n)


def _bce(prob: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    p = prob.clamp(PROB_EPS, 1.0 - PROB_EPS)
    return -(target * torch.log(p) + (1.0 - target) * torch.log(1.0 - p)).mean()


def adversarial_d_loss(d_real: torch.Tensor, d_fake: torch.Tensor,
                       weights: LossWeights, rng: np.random.Generator) -> torch.Tensor:
    """Discriminator cross-entropy against freshly drawn smoothed labels."""
    t_real = torch.as_tensor(
        smooth_labels("real", d_real.numel(), rng, weights),
        dtype=d_real.dtype,
    ).reshape(d_real.shape)
    t_fake = torch.as_tensor(
        smooth_labels("fake", d_fake.numel(), rng, weights),
        dtype=d_fake.dtype,
    ).reshape(d_fake.shape)
    return _bce(d_real, t_real) + _bce(d_fake, t_fake)


def adversarial_g_loss(d_fake: torch.Tensor) -> torch.Tensor:
    """-E[log D(completion)]; hard target 1, no smoothing on the generator side."""
    p = d_fake.clamp(PROB_EPS, 1.0 - PROB_EPS)
    return -torch.log(p).mean()


def perceptual_loss(extractor: FeatureExtractor, generated: torch.Tensor,
                    gt: torch.Tensor, mask: torch.Tensor,
                    weights: LossWeights) -> torch.Tensor:
    """Weighted smooth-L1 feature distance between pixel-masked gt and output."""
    _check_pair(generated, gt, mask)
    n_taps = len(extractor.tap_indices)
    if n_taps == 0:
        raise ConfigurationError("extractor exposes no layer taps")
    if len(weights.alpha) != n_taps:
        raise ConfigurationError(
            f"{len(weights.alpha)} alpha weights for {n_taps} taps", field="weights.alpha"
        )
    feats_gt = extract_features(extractor, gt * mask)
    feats_gen = extract_features(extractor, generated * mask)
    total = generated.new_zeros(())
    for a, f_gt, f_gen in zip(weights.alpha, feats_gt, feats_gen):
        total = total + a * smooth_l1(f_gt - f_gen).mean()
    return total


def hybrid_loss(parts: dict, weights: LossWeights) -> torch.Tensor:
    """L = L_r + lambda1 * L_a + lambda2 * L_p."""
    for name in ("reconstruction", "adversarial", "perceptual"):
        value = parts.get(name, 0.0)
        v = float(value.detach() if isinstance(value, torch.Tensor) else value)
        if not np.isfinite(v):
            raise NumericError(f"hybrid loss term {name!r} is not finite: {v}")
    zero = 0.0
    l_r = parts.get("reconstruction", zero)
    l_a = parts.get("adversarial", zero)
    l_p = parts.get("perceptual", zero)
    return l_r + weights.lambda1 * l_a + weights.lambda2 * l_p


def compose_completion(generated: torch.Tensor, gt: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Differentiable Eq.-style blend: mask*generated + (1-mask)*gt."""
    _check_pair(generated, gt, mask)
    return mask * generated + (1.0 - mask) * gt


def _check_pair(generated, gt, mask):
    if generated.shape != gt.shape:
        raise ValidationError(f"shape mismatch: {tuple(generated.shape)} vs {tuple(gt.shape)}")
    if mask.dim() != 4 or mask.shape[1] != 1 or mask.shape[0] != generated.shape[0] \
            or mask.shape[-2:] != generated.shape[-2:]:
        raise ValidationError(
            f"mask shape {tuple(mask.shape)} does not pair with images {tuple(generated.shape)}"
        )

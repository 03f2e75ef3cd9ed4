"""Frozen feature extractor backing the perceptual loss.

Two backbones share one tap layout: VGG16 loaded from a local weights file,
and a small seeded-random CNN with the same block/stride structure so that
every test in this repo runs without pretrained weights.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .errors import ConfigurationError, PerceptualLoadError, ResolutionError

# Convs per block in VGG16; the fallback mirrors this with small channel counts.
BLOCK_CONVS = (2, 2, 3, 3, 3)
FALLBACK_CHANNELS = (8, 16, 32, 32, 32)
VGG16_CHANNELS = (64, 128, 256, 512, 512)
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


@dataclass
class PerceptualSpec:
    layer_taps: tuple[str, ...] = ("conv3_2", "conv4_2", "conv5_2")
    layer_weights: tuple[float, ...] = (1.0, 1.0, 1.0)
    backbone: str = "fixed-random"  # or "vgg16"
    weights_file: str | None = None
    seed: int = 0

    def __post_init__(self):
        self.layer_taps = tuple(self.layer_taps)
        self.layer_weights = tuple(float(a) for a in self.layer_weights)

    def validate(self):
        if not self.layer_taps:
            raise ConfigurationError("need at least one layer tap", field="perceptual.layer_taps")
        if len(self.layer_weights) != len(self.layer_taps):
            raise ConfigurationError(
                f"{len(self.layer_weights)} weights for {len(self.layer_taps)} taps",
                field="perceptual.layer_weights",
            )
        if any(a < 0 for a in self.layer_weights):
            raise ConfigurationError("layer weights must be >= 0", field="perceptual.layer_weights")
        table = layer_table()
        for name in self.layer_taps:
            if name not in table:
                raise ConfigurationError(f"unknown layer name {name!r}", field="perceptual.layer_taps")
        if self.backbone not in ("vgg16", "fixed-random"):
            raise ConfigurationError(
                f"backbone must be 'vgg16' or 'fixed-random', got {self.backbone!r}",
                field="perceptual.backbone",
            )


def layer_table() -> dict[str, tuple[int, int, int]]:
    """conv{b}_{i} -> (module index of its ReLU output, input stride, block)."""
    table = {}
    idx, stride = 0, 1
    for block, n_convs in enumerate(BLOCK_CONVS, start=1):
        for i in range(1, n_convs + 1):
            table[f"conv{block}_{i}"] = (idx + 1, stride, block)
            idx += 2  # conv, relu
        idx += 1  # pool
        stride *= 2
    return table


def _backbone_layers(channels, in_channels=3):
    """VGG-layout Sequential: per block, convs+ReLUs then a 2x2 max pool."""
    layers = []
    prev = in_channels
    for block, n_convs in enumerate(BLOCK_CONVS):
        for _ in range(n_convs):
            layers.append(nn.Conv2d(prev, channels[block], 3, padding=1))
            layers.append(nn.ReLU(inplace=False))
            prev = channels[block]
        layers.append(nn.MaxPool2d(2, 2))
    return nn.Sequential(*layers)


class FeatureExtractor(nn.Module):
    """Frozen backbone exposing the tapped ReLU outputs, in spec order."""

    def __init__(self, spec: PerceptualSpec, layers: nn.Sequential, backbone_id: str,
                 adapt_scale, adapt_shift):
        super().__init__()
        table = layer_table()
        self.spec = spec
        self.backbone_id = backbone_id
        self.tap_indices = tuple(table[name][0] for name in spec.layer_taps)
        self.tap_strides = tuple(table[name][1] for name in spec.layer_taps)
        # Pools before the deepest tap set the resolution requirement.
        self.required_multiple = max(self.tap_strides)
        depth = max(self.tap_indices) + 1
        self.layers = layers[:depth]
        self.register_buffer("adapt_scale", torch.tensor(adapt_scale).view(1, 3, 1, 1))
        self.register_buffer("adapt_shift", torch.tensor(adapt_shift).view(1, 3, 1, 1))
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()

    def train(self, mode=True):  # the backbone never leaves eval mode
        return super().train(False)

    def forward(self, x):
        x = x * self.adapt_scale + self.adapt_shift
        wanted = dict.fromkeys(self.tap_indices)
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i in wanted:
                wanted[i] = x
        return [wanted[i] for i in self.tap_indices]


def load_backbone(spec: PerceptualSpec) -> FeatureExtractor:
    """Build the frozen extractor configured by the spec."""
    spec.validate()
    if spec.backbone == "vgg16":
        if not spec.weights_file or not os.path.isfile(spec.weights_file):
            raise PerceptualLoadError(
                f"VGG16 weights file not found: {spec.weights_file!r}"
            )
        from torchvision.models import vgg16

        model = vgg16(weights=None)
        try:
            state = torch.load(spec.weights_file, map_location="cpu", weights_only=True)
            model.load_state_dict(state)
        except Exception as exc:
            raise PerceptualLoadError(
                f"could not load VGG16 weights from {spec.weights_file}: {exc}"
            ) from exc
        # signed [-1,1] -> [0,1] -> ImageNet normalization, as one affine map
        scale = [0.5 / s for s in IMAGENET_STD]
        shift = [(0.5 - m) / s for m, s in zip(IMAGENET_MEAN, IMAGENET_STD)]
        return FeatureExtractor(spec, model.features, "vgg16", scale, shift)

    layers = _backbone_layers(FALLBACK_CHANNELS)
    gen = torch.Generator().manual_seed(spec.seed)
    for m in layers.modules():
        if isinstance(m, nn.Conv2d):
            nn.init.trunc_normal_(m.weight, std=0.2, a=-0.4, b=0.4, generator=gen)
            nn.init.zeros_(m.bias)
    return FeatureExtractor(spec, layers, f"fixed-random-{spec.seed}", [1.0] * 3, [0.0] * 3)


def extract_features(extractor: FeatureExtractor, images) -> list[torch.Tensor]:
    """Tapped activations for a signed image batch.

    Accepts a (B,3,H,W) tensor or a (B,H,W,3) array. Gradients flow to the
    input but never into the extractor's parameters.
    """
    if isinstance(images, np.ndarray):
        images = torch.from_numpy(np.ascontiguousarray(images.transpose(0, 3, 1, 2))).float()
    h, w = images.shape[-2], images.shape[-1]
    m = extractor.required_multiple
    if h % m or w % m or h < m or w < m:
        raise ResolutionError(
            f"input {h}x{w} incompatible with taps {extractor.spec.layer_taps}: "
            f"needs a multiple of {m}"
        )
    return extractor(images)

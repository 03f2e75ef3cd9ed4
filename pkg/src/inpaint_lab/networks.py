"""Generator/discriminator builders and the receptive-field calculator.

The generator is a multi-level fully convolutional encoder-decoder: each level
runs stride-1 3x3 convolutions and downsamples by 2 into the next level, the
deepest level stacks dilated convolutions to widen the receptive field, and
the decoder upsamples with stride-2 deconvolutions, optionally fusing a 3x3
projection of the matching encoder level by addition.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
import torch
from torch import nn

from .errors import ConfigurationError, ResolutionError, ValidationError

MAX_CHANNELS = 128  # lightweight budget: no layer may exceed this


@dataclass
class GeneratorSpec:
    levels: int = 3
    encoder_channels: tuple[int, ...] = (64, 128, 128)
    dilation_rates: tuple[int, ...] = (1, 2, 4, 8)
    conv_kernel: int = 3
    deconv_kernel: int = 4
    convs_per_level: int = 2
    fusion: bool = True
    in_channels: int = 4
    out_channels: int = 3

    def __post_init__(self):
        self.encoder_channels = tuple(int(c) for c in self.encoder_channels)
        self.dilation_rates = tuple(int(d) for d in self.dilation_rates)

    def validate(self):
        if self.levels < 1:
            raise ConfigurationError("levels must be >= 1", field="generator.levels")
        if len(self.encoder_channels) != self.levels:
            raise ConfigurationError(
                f"need one channel count per level, got {len(self.encoder_channels)} "
                f"for {self.levels} levels",
                field="generator.encoder_channels",
            )
        if any(c < 1 or c > MAX_CHANNELS for c in self.encoder_channels):
            raise ConfigurationError(
                f"channels must lie in [1, {MAX_CHANNELS}]",
                field="generator.encoder_channels",
            )
        if any(d < 1 for d in self.dilation_rates):
            raise ConfigurationError(
                "dilation rates must be positive integers",
                field="generator.dilation_rates",
            )
        if self.convs_per_level < 1:
            raise ConfigurationError(
                "convs_per_level must be >= 1", field="generator.convs_per_level"
            )

    @property
    def stride_multiple(self) -> int:
        """Input resolutions must be divisible by this."""
        return 2 ** (self.levels - 1)


@dataclass
class DiscriminatorSpec:
    channels: tuple[int, ...] = (64, 128, 256, 512, 512)
    kernel: int = 4
    stride: int = 2
    leaky_slope: float = 0.2
    input_size: int = 128
    in_channels: int = 3

    def __post_init__(self):
        self.channels = tuple(int(c) for c in self.channels)

    def validate(self):
        if not self.channels:
            raise ConfigurationError("need at least one conv layer", field="discriminator.channels")
        if self.input_size // 2 ** len(self.channels) < 1:
            raise ConfigurationError(
                f"input {self.input_size} smaller than the downsampling pyramid "
                f"of {len(self.channels)} stride-2 layers supports",
                field="discriminator.input_size",
            )


@dataclass
class ReceptiveField:
    size: int


def encoder_layer_plan(spec: GeneratorSpec) -> list[tuple[int, int, int]]:
    """(kernel, stride, dilation) for every conv on the encoder+bottleneck path."""
    plan = []
    for level in range(spec.levels):
        plan.extend((spec.conv_kernel, 1, 1) for _ in range(spec.convs_per_level))
        if level < spec.levels - 1:
            plan.append((spec.conv_kernel, 2, 1))
    plan.extend((spec.conv_kernel, 1, d) for d in spec.dilation_rates)
    return plan


def compute_receptive_field(spec: GeneratorSpec) -> ReceptiveField:
    """Analytic receptive field of one bottleneck unit in input pixels."""
    spec.validate()
    rf, jump = 1, 1
    for kernel, stride, dilation in encoder_layer_plan(spec):
        rf += (kernel - 1) * dilation * jump
        jump *= stride
    return ReceptiveField(size=rf)


def _conv_block(in_ch, out_ch, kernel, stride=1, dilation=1):
    pad = dilation * (kernel - 1) // 2
    return nn.Sequential(
        nn.Conv2d(in_ch, out_ch, kernel, stride=stride, padding=pad, dilation=dilation),
        nn.BatchNorm2d(out_ch),
        nn.ReLU(inplace=True),
    )


class Generator(nn.Module):
    """Dilated-FCN completion generator. Input (B,4,H,W) signed, output (B,3,H,W) signed."""

    def __init__(self, spec: GeneratorSpec):
        super().__init__()
        spec.validate()
        self.spec = spec
        ch = spec.encoder_channels

        # Encoder + bottleneck, laid out in encoder_layer_plan order.
        self.encoder_path = nn.ModuleList()
        self.skip_after = []  # indices into encoder_path whose output feeds a skip
        prev = spec.in_channels
        for level in range(spec.levels):
            for _ in range(spec.convs_per_level):
                self.encoder_path.append(_conv_block(prev, ch[level], spec.conv_kernel))
                prev = ch[level]
            if level < spec.levels - 1:
                self.skip_after.append(len(self.encoder_path) - 1)
                self.encoder_path.append(
                    _conv_block(prev, ch[level + 1], spec.conv_kernel, stride=2)
                )
                prev = ch[level + 1]
        for d in spec.dilation_rates:
            self.encoder_path.append(_conv_block(prev, prev, spec.conv_kernel, dilation=d))

        # Decoder: one deconv per downsample, mirrored.
        self.deconvs = nn.ModuleList()
        self.skip_projs = nn.ModuleList()
        for level in reversed(range(spec.levels - 1)):
            self.deconvs.append(
                nn.Sequential(
                    nn.ConvTranspose2d(
                        ch[level + 1], ch[level], spec.deconv_kernel, stride=2, padding=1
                    ),
                    nn.BatchNorm2d(ch[level]),
                    nn.ReLU(inplace=True),
                )
            )
            if spec.fusion:
                self.skip_projs.append(_conv_block(ch[level], ch[level], spec.conv_kernel))

        self.out_conv = nn.Conv2d(ch[0], spec.out_channels, spec.conv_kernel, padding=spec.conv_kernel // 2)

    def forward(self, x):
        _check_divisible(x, self.spec.stride_multiple, self.spec.levels)
        skips = []
        take = set(self.skip_after)
        for i, block in enumerate(self.encoder_path):
            x = block(x)
            if i in take:
                skips.append(x)
        for i, deconv in enumerate(self.deconvs):
            x = deconv(x)
            if self.spec.fusion:
                x = x + self.skip_projs[i](skips[len(skips) - 1 - i])
        return torch.tanh(self.out_conv(x))


class Discriminator(nn.Module):
    """DCGAN-style classifier: (B,3,H,W) signed image -> (B,) realness logit."""

    def __init__(self, spec: DiscriminatorSpec):
        super().__init__()
        spec.validate()
        self.spec = spec
        layers = []
        prev = spec.in_channels
        for i, c in enumerate(spec.channels):
            layers.append(nn.Conv2d(prev, c, spec.kernel, stride=spec.stride, padding=1))
            if i > 0:  # BN on all but the first layer
                layers.append(nn.BatchNorm2d(c))
            layers.append(nn.LeakyReLU(spec.leaky_slope, inplace=True))
            prev = c
        self.features = nn.Sequential(*layers)
        final = spec.input_size // 2 ** len(spec.channels)
        self.head = nn.Linear(prev * final * final, 1)

    def forward(self, x):
        b, _, h, w = x.shape
        if (h, w) != (self.spec.input_size, self.spec.input_size):
            raise ValidationError(
                f"discriminator built for {self.spec.input_size}px inputs, got {h}x{w}"
            )
        f = self.features(x)
        return self.head(f.flatten(1)).squeeze(1)


def _truncated_normal_init(model: nn.Module, seed: int | None):
    gen = torch.Generator()
    if seed is not None:
        gen.manual_seed(seed)
    for m in model.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
            nn.init.trunc_normal_(m.weight, std=0.02, a=-0.04, b=0.04, generator=gen)
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, nn.BatchNorm2d):
            nn.init.ones_(m.weight)
            nn.init.zeros_(m.bias)


def build_generator(spec: GeneratorSpec, seed: int | None = None) -> Generator:
    model = Generator(spec)
    _truncated_normal_init(model, seed)
    return model


def build_discriminator(spec: DiscriminatorSpec, seed: int | None = None) -> Discriminator:
    model = Discriminator(spec)
    _truncated_normal_init(model, seed)
    return model


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters() if p.requires_grad)


def _check_divisible(x, multiple, levels):
    h, w = x.shape[-2], x.shape[-1]
    if h % multiple or w % multiple:
        raise ResolutionError(
            f"input {h}x{w} not divisible by {multiple} "
            f"(required by {levels} levels); pad or crop to a multiple of {multiple}"
        )


def to_nchw(batch: np.ndarray) -> torch.Tensor:
    """(B,H,W,C) float array -> float32 NCHW tensor."""
    return torch.from_numpy(np.ascontiguousarray(batch.transpose(0, 3, 1, 2))).float()


def to_nhwc(t: torch.Tensor) -> np.ndarray:
    """NCHW tensor -> (B,H,W,C) float32 array."""
    return t.detach().cpu().numpy().transpose(0, 2, 3, 1)


def forward_generate(model: Generator, input4: np.ndarray) -> np.ndarray:
    """Run the generator on a (B,H,W,4) signed batch; returns (B,H,W,3) signed."""
    if input4.ndim != 4 or input4.shape[3] != 4:
        raise ValidationError(f"expected a (B,H,W,4) batch, got shape {input4.shape}")
    x = to_nchw(input4)
    _check_divisible(x, model.spec.stride_multiple, model.spec.levels)
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            out = model(x)
    finally:
        model.train(was_training)
    return to_nhwc(out)


def spec_to_json(spec) -> str:
    return json.dumps(asdict(spec), sort_keys=True)


def generator_spec_from_json(doc: str) -> GeneratorSpec:
    return GeneratorSpec(**json.loads(doc))


def discriminator_spec_from_json(doc: str) -> DiscriminatorSpec:
    return DiscriminatorSpec(**json.loads(doc))

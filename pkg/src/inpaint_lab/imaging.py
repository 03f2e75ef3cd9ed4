"""Image/mask primitives: value ranges, mask sampling, corruption, composition.

Convention used throughout the toolkit: images are H x W x C float arrays with
a declared value range; masks are H x W binary maps where 1 marks a pixel that
is missing and must be completed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import ConfigurationError, ValidationError

RANGE_BOUNDS = {
    "raw": (0.0, 255.0),
    "unit": (0.0, 1.0),
    "signed": (-1.0, 1.0),
}

VALID_CHANNELS = (1, 3, 4)


@dataclass
class ImageTensor:
    """H x W x C image with values guaranteed to lie in the declared range."""

    values: np.ndarray
    range_tag: str

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim == 2:
            v = v[:, :, None]
        if v.ndim != 3:
            raise ValidationError(f"expected an HxWxC array, got shape {v.shape}")
        if v.dtype != np.float32 and v.dtype != np.float64:
            v = v.astype(np.float32)
        h, w, c = v.shape
        if h < 1 or w < 1:
            raise ValidationError(f"degenerate image size {h}x{w}")
        if c not in VALID_CHANNELS:
            raise ValidationError(f"channels must be one of {VALID_CHANNELS}, got {c}")
        if self.range_tag not in RANGE_BOUNDS:
            raise ValidationError(f"unknown range_tag {self.range_tag!r}")
        lo, hi = RANGE_BOUNDS[self.range_tag]
        if not np.isfinite(v).all():
            raise ValidationError("image contains non-finite values")
        if v.min() < lo or v.max() > hi:
            raise ValidationError(
                f"values [{v.min():.4g}, {v.max():.4g}] outside {self.range_tag} "
                f"range [{lo}, {hi}]"
            )
        self.values = v

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def channels(self):
        return self.values.shape[2]


@dataclass
class Mask:
    """H x W binary map; value 1 marks a missing pixel."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim == 3 and v.shape[2] == 1:
            v = v[:, :, 0]
        if v.ndim != 2:
            raise ValidationError(f"expected an HxW array, got shape {v.shape}")
        v = v.astype(np.float32)
        if not np.isin(v, (0.0, 1.0)).all():
            raise ValidationError("mask values must be exactly 0 or 1")
        self.values = v

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]

    def count(self) -> int:
        """Number of missing pixels."""
        return int(self.values.sum())


@dataclass
class MaskSpec:
    """Square training masks with side drawn uniformly from [min_size, max_size]."""

    min_size: int = 48
    max_size: int = 80

    def validate_for(self, height: int, width: int):
        if not 0 < self.min_size <= self.max_size:
            raise ConfigurationError(
                f"need 0 < min_size <= max_size, got [{self.min_size}, {self.max_size}]",
                field="mask",
            )
        if self.max_size > min(height, width):
            raise ConfigurationError(
                f"max_size {self.max_size} exceeds image extent {height}x{width}",
                field="mask",
            )


@dataclass
class CompletionBatch:
    """Stacked training arrays: gt (B,H,W,3), corrupted (B,H,W,3),
    mask (B,H,W,1), input4 (B,H,W,4), optional generated (B,H,W,3)."""

    gt: np.ndarray
    corrupted: np.ndarray
    mask: np.ndarray
    input4: np.ndarray
    generated: np.ndarray | None = None
    source_ids: tuple[str, ...] = ()


def normalize(img: ImageTensor) -> ImageTensor:
    """Map raw [0, 255] values to signed [-1, 1] via v/127.5 - 1."""
    if img.range_tag != "raw":
        raise ValidationError(f"normalize expects raw input, got {img.range_tag}")
    return ImageTensor(img.values / 127.5 - 1.0, "signed")


def signed_to_raw(values: np.ndarray) -> np.ndarray:
    """(v + 1) * 127.5 clamped to [0, 255]; clamping absorbs numeric drift."""
    return np.clip((values + 1.0) * 127.5, 0.0, 255.0)


def denormalize(img: ImageTensor) -> ImageTensor:
    """Inverse of normalize, clamped to [0, 255]."""
    if img.range_tag != "signed":
        raise ValidationError(f"denormalize expects signed input, got {img.range_tag}")
    return ImageTensor(signed_to_raw(img.values), "raw")


def to_uint8(img: ImageTensor) -> np.ndarray:
    """Round to 8-bit pixel values, converting range first if needed."""
    if img.range_tag == "signed":
        img = denormalize(img)
    elif img.range_tag == "unit":
        img = ImageTensor(img.values * 255.0, "raw")
    return np.clip(np.rint(img.values), 0, 255).astype(np.uint8)


def sample_mask(spec: MaskSpec, height: int, width: int, rng: np.random.Generator) -> Mask:
    """Draw a square mask: side uniform in [min, max], placement uniform inside."""
    spec.validate_for(height, width)
    side = int(rng.integers(spec.min_size, spec.max_size + 1))
    top = int(rng.integers(0, height - side + 1))
    left = int(rng.integers(0, width - side + 1))
    values = np.zeros((height, width), dtype=np.float32)
    values[top : top + side, left : left + side] = 1.0
    return Mask(values)


def corrupt(gt: ImageTensor, mask: Mask) -> tuple[ImageTensor, ImageTensor]:
    """Zero the masked pixels and append the mask as a fourth channel.

    Returns (corrupted 3-channel, generator input 4-channel), both signed.
    """
    if gt.range_tag != "signed":
        raise ValidationError(f"corrupt expects a signed image, got {gt.range_tag}")
    if gt.channels != 3:
        raise ValidationError(f"corrupt expects 3 channels, got {gt.channels}")
    if (gt.height, gt.width) != (mask.height, mask.width):
        raise ValidationError(
            f"image {gt.height}x{gt.width} and mask {mask.height}x{mask.width} differ"
        )
    keep = (1.0 - mask.values)[:, :, None]
    corrupted = gt.values * keep
    input4 = np.concatenate([corrupted, mask.values[:, :, None]], axis=2)
    return ImageTensor(corrupted, "signed"), ImageTensor(input4, "signed")


def compose_completion(generated: ImageTensor, gt: ImageTensor, mask: Mask) -> ImageTensor:
    """Blend: generated content inside the mask, original pixels outside."""
    if generated.range_tag != gt.range_tag:
        raise ValidationError(
            f"range mismatch: generated {generated.range_tag} vs gt {gt.range_tag}"
        )
    if generated.values.shape != gt.values.shape:
        raise ValidationError(
            f"shape mismatch: {generated.values.shape} vs {gt.values.shape}"
        )
    if (gt.height, gt.width) != (mask.height, mask.width):
        raise ValidationError(
            f"image {gt.height}x{gt.width} and mask {mask.height}x{mask.width} differ"
        )
    m = mask.values[:, :, None]
    return ImageTensor(m * generated.values + (1.0 - m) * gt.values, gt.range_tag)


def load_image(path) -> ImageTensor:
    """Decode a PNG/JPEG file to a raw-range RGB ImageTensor."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32)
    return ImageTensor(arr, "raw")


def save_image(img: ImageTensor, path):
    """Encode to 8-bit RGB PNG (or format implied by the extension)."""
    arr = to_uint8(img)
    if arr.shape[2] == 1:
        arr = arr[:, :, 0]
    Image.fromarray(arr).save(path)


def load_mask(path) -> Mask:
    """Read a single-channel mask PNG; values >= 128 count as missing."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    return Mask((arr >= 128).astype(np.float32))


def save_mask(mask: Mask, path):
    """Persist as single-channel PNG with 0/255 values."""
    Image.fromarray((mask.values * 255).astype(np.uint8), mode="L").save(path)

"""Masked-region quality metrics and report emission.

All metrics are computed over the MASKED region on the [0,1] pixel scale;
every emitted report declares both choices explicitly.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateMaskError, ValidationError
from .imaging import ImageTensor, Mask, compose_completion, corrupt

REGIMES = ("center", "random")
PIXEL_SCALE = "unit"
REGION = "masked-only"
PSNR_CONSISTENCY_DB = 1e-6


@dataclass
class RegimeResult:
    regime: str
    mean_l1: float
    mean_l2: float
    psnr: float


@dataclass
class MetricsReport:
    rows: tuple[RegimeResult, ...]
    mask_size: int
    n_images: int
    pixel_scale: str = PIXEL_SCALE
    region: str = REGION

    def __post_init__(self):
        self.rows = tuple(
            r if isinstance(r, RegimeResult) else RegimeResult(**r) for r in self.rows
        )
        for row in self.rows:
            expected = psnr(row.mean_l2) if row.mean_l2 > 0 else math.inf
            if expected == math.inf:
                consistent = row.psnr == math.inf
            else:
                consistent = abs(expected - row.psnr) <= PSNR_CONSISTENCY_DB
            if not consistent:
                raise ValidationError(
                    f"psnr {row.psnr} inconsistent with mean_l2 {row.mean_l2} "
                    f"(expected {expected})"
                )


def _to_unit(img: ImageTensor) -> np.ndarray:
    if img.range_tag == "unit":
        return img.values
    if img.range_tag == "signed":
        return (img.values + 1.0) / 2.0
    return img.values / 255.0


def pixel_metrics(completion: ImageTensor, gt: ImageTensor, mask: Mask) -> tuple[float, float]:
    """(mean |diff|, mean diff^2) over masked pixels x channels, unit scale."""
    if completion.values.shape != gt.values.shape:
        raise ValidationError(
            f"shape mismatch: {completion.values.shape} vs {gt.values.shape}"
        )
    if (gt.height, gt.width) != (mask.height, mask.width):
        raise ValidationError("mask dimensions do not match the images")
    m = mask.values.astype(bool)
    if not m.any():
        raise DegenerateMaskError("metrics undefined for an empty mask")
    diff = _to_unit(completion)[m] - _to_unit(gt)[m]
    return float(np.abs(diff).mean()), float((diff ** 2).mean())


def psnr(mean_l2: float, peak: float = 1.0) -> float:
    """10 * log10(peak^2 / MSE); +inf sentinel when the MSE is zero."""
    if mean_l2 < 0:
        raise ValidationError(f"mean_l2 must be >= 0, got {mean_l2}")
    if mean_l2 == 0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mean_l2)


def _regime_mask(regime: str, height: int, width: int, size: int,
                 rng: np.random.Generator | None) -> Mask:
    if size > min(height, width):
        raise ConfigurationError(f"mask size {size} exceeds image {height}x{width}")
    values = np.zeros((height, width), dtype=np.float32)
    if regime == "center":
        top, left = (height - size) // 2, (width - size) // 2
    elif regime == "random":
        top = int(rng.integers(0, height - size + 1))
        left = int(rng.integers(0, width - size + 1))
    else:
        raise ConfigurationError(f"regime must be one of {REGIMES}, got {regime!r}")
    values[top : top + size, left : left + size] = 1.0
    return Mask(values)


def evaluate(model_fn, dataset, regime: str, mask_size: int = 56, seed: int = 0,
             chunk: int = 8) -> MetricsReport:
    """Corrupt -> generate -> compose -> accumulate masked metrics over a split.

    model_fn maps a signed (B,H,W,4) batch to a signed (B,H,W,3) batch.
    Deterministic given the seed; test images use center crops.
    """
    rng = np.random.default_rng(seed)
    abs_sum = sq_sum = 0.0
    count = 0
    pending: list[tuple[ImageTensor, Mask, np.ndarray]] = []

    def flush():
        nonlocal abs_sum, sq_sum, count
        if not pending:
            return
        input4 = np.stack([p[2] for p in pending])
        generated = model_fn(input4)
        for (gt, mask, _), gen in zip(pending, generated):
            completion = compose_completion(ImageTensor(gen, "signed"), gt, mask)
            m = mask.values.astype(bool)
            diff = _to_unit(completion)[m] - _to_unit(gt)[m]
            abs_sum += float(np.abs(diff).sum())
            sq_sum += float((diff ** 2).sum())
            count += diff.size
        pending.clear()

    for i in range(len(dataset)):
        gt = dataset.sample(i)  # deterministic center crop
        mask = _regime_mask(regime, gt.height, gt.width, mask_size, rng)
        _, input4 = corrupt(gt, mask)
        pending.append((gt, mask, input4.values))
        if len(pending) >= chunk:
            flush()
    flush()

    if count == 0:
        raise DegenerateMaskError("evaluation saw no masked pixels")
    mean_l1, mean_l2 = abs_sum / count, sq_sum / count
    row = RegimeResult(regime=regime, mean_l1=mean_l1, mean_l2=mean_l2, psnr=psnr(mean_l2))
    return MetricsReport(rows=(row,), mask_size=mask_size, n_images=len(dataset))


def emit_report(report: MetricsReport, format: str = "text") -> str:
    """Serialize deterministically; every format states scale and region."""
    if format in ("text", "text-table"):
        lines = [
            f"Masked-region metrics (scale={report.pixel_scale}, region={report.region}, "
            f"mask {report.mask_size}x{report.mask_size}, n={report.n_images})",
            f"{'Regime':<10}{'Mean L1':>12}{'Mean L2':>12}{'PSNR':>14}",
        ]
        for row in report.rows:
            lines.append(
                f"{row.regime:<10}{row.mean_l1:>12.6f}{row.mean_l2:>12.6f}{row.psnr:>12.4f}dB"
            )
        return "\n".join(lines) + "\n"
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["regime", "mean_l1", "mean_l2", "psnr",
                         "mask_size", "n_images", "pixel_scale", "region"])
        for row in report.rows:
            writer.writerow([row.regime, repr(row.mean_l1), repr(row.mean_l2), repr(row.psnr),
                             report.mask_size, report.n_images, report.pixel_scale, report.region])
        return buf.getvalue()
    if format == "json":
        return json.dumps(asdict(report), indent=2, sort_keys=True)
    raise ConfigurationError(f"unknown report format {format!r}")


def parse_report_csv(doc: str) -> MetricsReport:
    rows = list(csv.DictReader(io.StringIO(doc)))
    if not rows:
        raise ValidationError("empty report CSV")
    results = tuple(
        RegimeResult(
            regime=r["regime"], mean_l1=float(r["mean_l1"]),
            mean_l2=float(r["mean_l2"]), psnr=float(r["psnr"]),
        )
        for r in rows
    )
    first = rows[0]
    return MetricsReport(
        rows=results,
        mask_size=int(first["mask_size"]),
        n_images=int(first["n_images"]),
        pixel_scale=first["pixel_scale"],
        region=first["region"],
    )


def parse_report_json(doc: str) -> MetricsReport:
    data = json.loads(doc)
    return MetricsReport(
        rows=tuple(RegimeResult(**r) for r in data["rows"]),
        mask_size=data["mask_size"],
        n_images=data["n_images"],
        pixel_scale=data["pixel_scale"],
        region=data["region"],
    )

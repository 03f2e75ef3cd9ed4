"""Dataset ingestion, preprocessing recipes, augmentation and batching.

All randomness is drawn from explicit numpy Generators so that a fixed seed
reproduces the exact batch sequence (prefetch disabled).
"""

from __future__ import annotations

import os
import queue
import threading
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import (
    ConfigurationError,
    EndOfData,
    IngestionError,
    PreprocessingError,
    ValidationError,
)
from .imaging import (
    CompletionBatch,
    ImageTensor,
    Mask,
    MaskSpec,
    corrupt,
    normalize,
    sample_mask,
    to_uint8,
)

RECIPES = ("celeba", "streetview", "generic")
CELEBA_CROP = 160  # random crop size before the resize to target


@dataclass
class DatasetSpec:
    root: str
    recipe: str = "generic"
    train_files: tuple[str, ...] = ()
    test_files: tuple[str, ...] = ()
    target_size: int = 128
    flip_prob: float = 0.5
    max_shift: int = 8

    def __post_init__(self):
        self.train_files = tuple(self.train_files)
        self.test_files = tuple(self.test_files)

    def validate(self):
        if self.recipe not in RECIPES:
            raise ConfigurationError(
                f"recipe must be one of {RECIPES}, got {self.recipe!r}", field="dataset.recipe"
            )
        if self.target_size < 1:
            raise ConfigurationError("target_size must be >= 1", field="dataset.target_size")
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ConfigurationError("flip_prob must be in [0,1]", field="dataset.flip_prob")
        if self.max_shift < 0:
            raise ConfigurationError("max_shift must be >= 0", field="dataset.max_shift")
        overlap = set(self.train_files) & set(self.test_files)
        if overlap:
            raise ValidationError(
                f"train/test splits overlap on {len(overlap)} files, e.g. {sorted(overlap)[:3]}"
            )


class Dataset:
    """One split: an enumerable, seekable list of images under a common root."""

    def __init__(self, spec: DatasetSpec, files: tuple[str, ...]):
        self.spec = spec
        self.files = tuple(files)

    def __len__(self):
        return len(self.files)

    def source_id(self, i: int) -> str:
        return self.files[i]

    def load_raw(self, i: int) -> ImageTensor:
        path = os.path.join(self.spec.root, self.files[i])
        try:
            with Image.open(path) as im:
                arr = np.asarray(im.convert("RGB"), dtype=np.float32)
        except Exception as exc:
            raise IngestionError(f"cannot decode {path}: {exc}", paths=[path]) from exc
        return ImageTensor(arr, "raw")

    def sample(self, i: int, rng: np.random.Generator | None = None) -> ImageTensor:
        """Preprocessed signed image at target size; center crops when rng is None."""
        raw = self.load_raw(i)
        if self.spec.recipe == "celeba":
            return preprocess_celeba(raw, rng=rng, target_size=self.spec.target_size)
        if self.spec.recipe == "streetview":
            return preprocess_streetview(raw, rng=rng, target_size=self.spec.target_size)
        return preprocess_generic(raw, self.spec.target_size, rng=rng)

    def verify(self):
        """Decode-check every file; raises one IngestionError listing all offenders."""
        bad = []
        for i in range(len(self.files)):
            try:
                self.sample(i)
            except (IngestionError, PreprocessingError) as exc:
                bad.append(os.path.join(self.spec.root, self.files[i]) + f" ({exc})")
        if bad:
            raise IngestionError(
                f"{len(bad)} files failed verification:\n" + "\n".join(bad), paths=bad
            )


@dataclass
class IngestedData:
    train: Dataset
    test: Dataset


def ingest_dataset(spec: DatasetSpec, verify: bool = False) -> IngestedData:
    """Validate the spec and expose train/test views.

    File decodability is checked lazily on access (or eagerly with verify=True)
    so that large split lists stay cheap to ingest.
    """
    spec.validate()
    if not os.path.isdir(spec.root):
        raise IngestionError(f"dataset root is not a readable directory: {spec.root}")
    data = IngestedData(train=Dataset(spec, spec.train_files), test=Dataset(spec, spec.test_files))
    if verify:
        data.train.verify()
        data.test.verify()
    return data


def load_split_file(path) -> tuple[str, ...]:
    """Newline-delimited relative paths; blank lines ignored."""
    with open(path) as fh:
        return tuple(line.strip() for line in fh if line.strip())


def dataset_spec_from_config(block: dict, base_dir: str = ".") -> DatasetSpec:
    """Build a DatasetSpec from a JSON config block with split-list files."""
    root = block.get("root")
    if not root:
        raise ConfigurationError("missing dataset root", field="dataset.root")
    root = os.path.join(base_dir, root)

    def _split(key):
        path = block.get(key)
        return load_split_file(os.path.join(base_dir, path)) if path else ()

    return DatasetSpec(
        root=root,
        recipe=block.get("recipe", "generic"),
        train_files=_split("train_list"),
        test_files=_split("test_list"),
        target_size=int(block.get("target_size", 128)),
        flip_prob=float(block.get("flip_prob", 0.5)),
        max_shift=int(block.get("max_shift", 8)),
    )


def _resize(arr_u8: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    # size is (width, height) per PIL convention
    return np.asarray(Image.fromarray(arr_u8).resize(size, Image.BILINEAR), dtype=np.float32)


def _crop(values, crop_h, crop_w, rng):
    h, w = values.shape[:2]
    if rng is None:
        top, left = (h - crop_h) // 2, (w - crop_w) // 2
    else:
        top = int(rng.integers(0, h - crop_h + 1))
        left = int(rng.integers(0, w - crop_w + 1))
    return values[top : top + crop_h, left : left + crop_w]


def preprocess_celeba(img: ImageTensor, rng: np.random.Generator | None = None,
                      target_size: int = 128) -> ImageTensor:
    """Random 160x160 crop, resize to target, normalize to signed."""
    if img.height < CELEBA_CROP or img.width < CELEBA_CROP:
        raise PreprocessingError(
            f"celeba recipe needs >= {CELEBA_CROP}px per side, got {img.height}x{img.width}"
        )
    cropped = _crop(img.values, CELEBA_CROP, CELEBA_CROP, rng)
    resized = _resize(np.clip(np.rint(cropped), 0, 255).astype(np.uint8), (target_size, target_size))
    return normalize(ImageTensor(resized, "raw"))


def preprocess_streetview(img: ImageTensor, rng: np.random.Generator | None = None,
                          target_size: int = 128) -> ImageTensor:
    """Resize so the smaller dimension equals target, then crop a square."""
    return preprocess_generic(img, target_size, rng=rng)


def preprocess_generic(img: ImageTensor, target_size: int,
                       rng: np.random.Generator | None = None) -> ImageTensor:
    h, w = img.height, img.width
    if min(h, w) != target_size:
        scale = target_size / min(h, w)
        new_h = target_size if h <= w else max(target_size, round(h * scale))
        new_w = target_size if w <= h else max(target_size, round(w * scale))
        arr = _resize(to_uint8(img), (new_w, new_h))
    else:
        arr = img.values
    arr = _crop(arr, target_size, target_size, rng)
    return normalize(ImageTensor(arr, "raw"))


def augment(gt: ImageTensor, rng: np.random.Generator, flip_prob: float = 0.5,
            max_shift: int = 8) -> ImageTensor:
    """Horizontal flip plus a small random translation with reflected edges."""
    v = gt.values
    if rng.uniform() < flip_prob:
        v = v[:, ::-1, :]
    if max_shift > 0:
        dy = int(rng.integers(-max_shift, max_shift + 1))
        dx = int(rng.integers(-max_shift, max_shift + 1))
        if dy or dx:
            h, w = v.shape[:2]
            padded = np.pad(v, ((max_shift, max_shift), (max_shift, max_shift), (0, 0)), mode="reflect")
            v = padded[max_shift + dy : max_shift + dy + h, max_shift + dx : max_shift + dx + w]
    return ImageTensor(np.ascontiguousarray(v), gt.range_tag)


def make_batch(dataset: Dataset, batch_size: int, mask_spec: MaskSpec,
               rng: np.random.Generator, indices=None) -> CompletionBatch:
    """Assemble a training batch with per-sample augmentation and masks."""
    if batch_size < 1:
        raise ConfigurationError("batch_size must be >= 1", field="batch_size")
    if len(dataset) == 0:
        raise IngestionError("dataset split is empty")
    if indices is None:
        indices = rng.integers(0, len(dataset), size=batch_size)
    gts, corrupteds, masks, input4s, ids = [], [], [], [], []
    for i in indices:
        gt = dataset.sample(int(i), rng)
        gt = augment(gt, rng, dataset.spec.flip_prob, dataset.spec.max_shift)
        mask = sample_mask(mask_spec, gt.height, gt.width, rng)
        corrupted, input4 = corrupt(gt, mask)
        gts.append(gt.values)
        corrupteds.append(corrupted.values)
        masks.append(mask.values[:, :, None])
        input4s.append(input4.values)
        ids.append(dataset.source_id(int(i)))
    return CompletionBatch(
        gt=np.stack(gts),
        corrupted=np.stack(corrupteds),
        mask=np.stack(masks),
        input4=np.stack(input4s),
        source_ids=tuple(ids),
    )


class BatchSource:
    """Deterministic batch stream over a dataset split.

    repeat=True draws indices i.i.d. per batch; repeat=False walks the split
    in order and raises EndOfData once exhausted. state()/restore_state()
    round-trip the full sampling state for checkpoint resume.
    """

    def __init__(self, dataset: Dataset, mask_spec: MaskSpec, batch_size: int,
                 rng: np.random.Generator, repeat: bool = True, prefetch: int = 0):
        self.dataset = dataset
        self.mask_spec = mask_spec
        self.batch_size = batch_size
        self.rng = rng
        self.repeat = repeat
        self.cursor = 0
        self._queue = None
        if prefetch > 0:
            self._queue = queue.Queue(maxsize=prefetch)
            worker = threading.Thread(target=self._fill, daemon=True)
            worker.start()

    def _produce(self) -> CompletionBatch:
        if self.repeat:
            return make_batch(self.dataset, self.batch_size, self.mask_spec, self.rng)
        if self.cursor >= len(self.dataset):
            raise EndOfData("dataset exhausted")
        indices = range(self.cursor, min(self.cursor + self.batch_size, len(self.dataset)))
        self.cursor += len(indices)
        return make_batch(self.dataset, len(indices), self.mask_spec, self.rng, indices=indices)

    def _fill(self):
        while True:
            try:
                self._queue.put(self._produce())
            except EndOfData:
                self._queue.put(None)
                return

    def next_batch(self) -> CompletionBatch:
        if self._queue is not None:
            item = self._queue.get()
            if item is None:
                raise EndOfData("dataset exhausted")
            return item
        return self._produce()

    def state(self) -> dict:
        return {"rng": self.rng.bit_generator.state, "cursor": self.cursor}

    def restore_state(self, state: dict):
        self.rng.bit_generator.state = state["rng"]
        self.cursor = state["cursor"]


def synthesize_texture(rng: np.random.Generator, size: int = 32) -> ImageTensor:
    """Smooth procedural texture: a few random sinusoidal gradients per channel."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) / size
    img = np.zeros((size, size, 3))
    for c in range(3):
        for _ in range(3):
            fx, fy = rng.uniform(0.5, 3.0, size=2)
            phase = rng.uniform(0, 2 * np.pi)
            amp = rng.uniform(0.2, 0.6)
            img[:, :, c] += amp * np.sin(2 * np.pi * (fx * xx + fy * yy) + phase)
    img -= img.min()
    img *= 255.0 / max(img.max(), 1e-9)
    return ImageTensor(img.astype(np.float32), "raw")


def write_synthetic_dataset(root, n_train: int, n_test: int, size: int = 32,
                            seed: int = 0) -> DatasetSpec:
    """Write procedural-texture PNGs plus split lists; returns a matching spec."""
    from .imaging import save_image

    os.makedirs(root, exist_ok=True)
    rng = np.random.default_rng(seed)
    names = []
    for i in range(n_train + n_test):
        name = f"tex_{i:04d}.png"
        save_image(synthesize_texture(rng, size), os.path.join(root, name))
        names.append(name)
    train, test = names[:n_train], names[n_train:]
    for fname, split in (("train.txt", train), ("test.txt", test)):
        with open(os.path.join(root, fname), "w") as fh:
            fh.write("\n".join(split) + "\n")
    return DatasetSpec(
        root=str(root), recipe="generic", train_files=tuple(train), test_files=tuple(test),
        target_size=size,
    )

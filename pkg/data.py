#!/usr/bin/env python3
"""
Data - Fashion-MNIST IDX ingestion, augmentation, batching and synthetic sets

IDX files are big-endian: a 4-byte magic (0x00000803 for images, 0x00000801
for labels), one 4-byte size per dimension, then an unsigned-byte payload.
Gzipped files are read transparently.
"""

import gzip
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt
import requests

from autodiff import Tensor
from run_store import atomic_write

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
GZIP_MAGIC = b"\x1f\x8b"

FASHION_MNIST_URL = "http://fashion-mnist.s3-website.eu-central-1.amazonaws.com/"
FASHION_MNIST_FILES: Dict[str, Tuple[str, str]] = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}
DOWNLOAD_TIMEOUT = 60
DOWNLOAD_CHUNK = 1 << 16

PathLike = Union[str, Path]
Labels = npt.NDArray[np.int64]


class DataError(Exception):
    """Base exception for dataset handling"""


class IDXFormatError(DataError):
    """Wrong magic number or header layout"""


class IDXLengthError(DataError):
    """File is shorter or longer than its header declares"""


class DatasetConsistencyError(DataError):
    """Images and labels disagree, or values are out of range"""


class DownloadError(DataError):
    """Fetching a dataset archive failed"""


@dataclass
class Dataset:
    images: Tensor
    labels: Labels
    num_classes: int = 10

    def __post_init__(self) -> None:
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4:
            raise DatasetConsistencyError(
                f"Images must be (count, channels, height, width), got {self.images.shape}"
            )
        if self.labels.ndim != 1 or len(self.labels) != len(self.images):
            raise DatasetConsistencyError(
                f"{len(self.images)} images but labels have shape {self.labels.shape}"
            )
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise DatasetConsistencyError(
                f"Labels must lie in [0, {self.num_classes}), "
                f"got [{self.labels.min()}, {self.labels.max()}]"
            )
        if self.images.size and (self.images.min() < 0.0 or self.images.max() > 1.0):
            raise DatasetConsistencyError("Pixel values must lie in [0, 1]")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def image_shape(self) -> Tuple[int, int, int]:
        c, h, w = self.images.shape[1:]
        return (c, h, w)


# -- IDX format ------------------------------------------------------------


def _read_bytes(path: PathLike) -> bytes:
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:2] == GZIP_MAGIC:
        return gzip.decompress(raw)
    return raw


def _parse_idx(raw: bytes, magic: int, path: PathLike) -> npt.NDArray[np.uint8]:
    if len(raw) < 4:
        raise IDXLengthError(f"{path}: truncated header ({len(raw)} bytes)")
    found = int(np.frombuffer(raw[:4], dtype=">u4")[0])
    if found != magic:
        raise IDXFormatError(f"{path}: magic 0x{found:08x}, expected 0x{magic:08x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise IDXLengthError(f"{path}: truncated header ({len(raw)} of {header} bytes)")
    dims = tuple(int(d) for d in np.frombuffer(raw[4:header], dtype=">u4"))
    expected = int(np.prod(dims))
    payload = len(raw) - header
    if payload != expected:
        raise IDXLengthError(
            f"{path}: payload has {payload} bytes, header declares {dims} = {expected}"
        )
    return np.frombuffer(raw, dtype=np.uint8, offset=header).reshape(dims)


def load_idx(
    images_path: PathLike, labels_path: PathLike, num_classes: int = 10
) -> Dataset:
    """Parse an IDX image/label pair; pixels are divided by 255"""
    pixels = _parse_idx(_read_bytes(images_path), IMAGES_MAGIC, images_path)
    labels = _parse_idx(_read_bytes(labels_path), LABELS_MAGIC, labels_path)
    if len(pixels) != len(labels):
        raise DatasetConsistencyError(
            f"{images_path} holds {len(pixels)} images but {labels_path} "
            f"holds {len(labels)} labels"
        )
    images = pixels.astype(np.float64)[:, None, :, :] / 255.0
    return Dataset(images, labels.astype(np.int64), num_classes)


def _write_idx(path: PathLike, magic: int, payload: npt.NDArray[np.uint8]) -> None:
    header = np.array([magic, *payload.shape], dtype=">u4").tobytes()
    raw = header + np.ascontiguousarray(payload).tobytes()
    if str(path).endswith(".gz"):
        raw = gzip.compress(raw, mtime=0)
    with open(path, "wb") as f:
        f.write(raw)


def save_idx_images(path: PathLike, images: Tensor) -> None:
    """Write (count, 1, H, W) or (count, H, W) images in [0, 1] as IDX bytes"""
    array = np.asarray(images, dtype=np.float64)
    if array.ndim == 4:
        if array.shape[1] != 1:
            raise IDXFormatError(f"IDX images are single-channel, got {array.shape}")
        array = array[:, 0]
    if array.ndim != 3:
        raise IDXFormatError(f"Expected (count, H, W) images, got {array.shape}")
    pixels = np.clip(np.rint(array * 255.0), 0, 255).astype(np.uint8)
    _write_idx(path, IMAGES_MAGIC, pixels)


def save_idx_labels(path: PathLike, labels: Sequence[int]) -> None:
    array = np.asarray(labels)
    if array.ndim != 1 or (array.size and (array.min() < 0 or array.max() > 255)):
        raise IDXFormatError("IDX labels must be a 1-D sequence of values in [0, 255]")
    _write_idx(path, LABELS_MAGIC, array.astype(np.uint8))


# -- Fashion-MNIST ---------------------------------------------------------


def _locate(data_dir: Path, stem: str) -> Path:
    for candidate in (data_dir / stem, data_dir / f"{stem}.gz"):
        if candidate.exists():
            return candidate
    raise FileNotFoundError(f"Missing {stem}[.gz] in {data_dir}")


def load_fashion_mnist(data_dir: PathLike, split: str = "train") -> Dataset:
    if split not in FASHION_MNIST_FILES:
        raise ValueError(f"Unknown split '{split}' (use train or test)")
    images_stem, labels_stem = FASHION_MNIST_FILES[split]
    root = Path(data_dir)
    return load_idx(_locate(root, images_stem), _locate(root, labels_stem))


def download_fashion_mnist(
    data_dir: PathLike,
    base_url: str = FASHION_MNIST_URL,
    timeout: int = DOWNLOAD_TIMEOUT,
) -> List[Path]:
    """Fetch the four gzipped archives; files already present are skipped"""
    root = Path(data_dir)
    root.mkdir(parents=True, exist_ok=True)
    fetched = []
    for stems in FASHION_MNIST_FILES.values():
        for stem in stems:
            target = root / f"{stem}.gz"
            if target.exists() or (root / stem).exists():
                continue
            url = f"{base_url.rstrip('/')}/{stem}.gz"
            try:
                response = requests.get(url, timeout=timeout, stream=True)
                response.raise_for_status()
                with atomic_write(target) as temp_file:
                    with open(temp_file, "wb") as f:
                        for chunk in response.iter_content(chunk_size=DOWNLOAD_CHUNK):
                            f.write(chunk)
            except requests.RequestException as e:
                raise DownloadError(f"Failed to download {url}: {e}") from e
            fetched.append(target)
    return fetched


# -- augmentation ----------------------------------------------------------


@dataclass
class AugmentConfig:
    horizontal_flip: bool = True
    flip_probability: float = 0.5
    shift: float = 0.1

    def validate(self) -> None:
        if not 0.0 <= self.shift <= 0.5:
            raise ValueError(f"shift must be in [0, 0.5], got {self.shift}")
        if not 0.0 <= self.flip_probability <= 1.0:
            raise ValueError(
                f"flip_probability must be in [0, 1], got {self.flip_probability}"
            )


def _shift_image(image: Tensor, dy: int, dx: int) -> Tensor:
    """Translate (C, H, W) by whole pixels, zero-filling what moves in"""
    if dy == 0 and dx == 0:
        return image
    _, h, w = image.shape
    out = np.zeros_like(image)
    src_y = slice(max(0, -dy), min(h, h - dy))
    dst_y = slice(max(0, dy), min(h, h + dy))
    src_x = slice(max(0, -dx), min(w, w - dx))
    dst_x = slice(max(0, dx), min(w, w + dx))
    out[:, dst_y, dst_x] = image[:, src_y, src_x]
    return out


def augment(batch: Tensor, config: AugmentConfig, rng: np.random.Generator) -> Tensor:
    """Random horizontal flip and integer shift, independently per image"""
    images = np.asarray(batch, dtype=np.float64)
    if images.ndim != 4:
        raise ValueError(f"augment needs a 4-D batch, got {images.shape}")
    n, _, h, w = images.shape
    flips = rng.random(n) < config.flip_probability
    max_dy = int(round(config.shift * h))
    max_dx = int(round(config.shift * w))
    dys = rng.integers(-max_dy, max_dy + 1, size=n)
    dxs = rng.integers(-max_dx, max_dx + 1, size=n)

    out = np.empty_like(images)
    for i in range(n):
        image = images[i]
        if config.horizontal_flip and flips[i]:
            image = image[:, :, ::-1]
        out[i] = _shift_image(image, int(dys[i]), int(dxs[i]))
    return out


# -- batching and synthetic sets -------------------------------------------

Seed = Union[int, Sequence[int]]


def batches(
    ds: Dataset, batch_size: int, shuffle_seed: Optional[Seed] = None
) -> Iterator[Tuple[Tensor, Labels]]:
    """One epoch in a seed-fixed order; the last batch may be short"""
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    if shuffle_seed is None:
        order = np.arange(len(ds))
    else:
        order = np.random.default_rng(shuffle_seed).permutation(len(ds))
    for start in range(0, len(ds), batch_size):
        index = order[start : start + batch_size]
        yield ds.images[index], ds.labels[index]


def make_synthetic(
    count: int,
    num_classes: int = 10,
    image_shape: Tuple[int, int, int] = (1, 28, 28),
    seed: int = 0,
    noise: float = 0.1,
) -> Dataset:
    """Class-conditional Gaussian blobs placed on a circle, plus pixel noise"""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if num_classes < 2:
        raise ValueError(f"num_classes must be >= 2, got {num_classes}")
    rng = np.random.default_rng(seed)
    channels, h, w = image_shape
    labels = rng.permutation(np.arange(count) % num_classes)

    angles = 2.0 * np.pi * np.arange(num_classes) / num_classes
    radius = 0.3 * min(h, w)
    centers_y = (h - 1) / 2.0 + radius * np.sin(angles)
    centers_x = (w - 1) / 2.0 + radius * np.cos(angles)
    sigma = max(1.0, min(h, w) / 8.0)

    yy, xx = np.mgrid[0:h, 0:w]
    jitter = rng.normal(0.0, 0.5, size=(count, 2))
    cy = centers_y[labels] + jitter[:, 0]
    cx = centers_x[labels] + jitter[:, 1]
    blobs = np.exp(
        -((yy[None] - cy[:, None, None]) ** 2 + (xx[None] - cx[:, None, None]) ** 2)
        / (2.0 * sigma**2)
    )
    images = np.repeat(blobs[:, None], channels, axis=1)
    images = images + rng.normal(0.0, noise, size=images.shape)
    return Dataset(np.clip(images, 0.0, 1.0), labels.astype(np.int64), num_classes)


def subset(ds: Dataset, n: int, seed: int = 0) -> Dataset:
    """Random n-sample subset, kept in original order"""
    if not 1 <= n <= len(ds):
        raise ValueError(f"Subset size must be in [1, {len(ds)}], got {n}")
    index = np.sort(np.random.default_rng(seed).permutation(len(ds))[:n])
    return Dataset(ds.images[index], ds.labels[index], ds.num_classes)

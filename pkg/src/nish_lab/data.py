"""MNIST-style data handling: IDX binary I/O, deterministic splitting,
Gaussian-noise corruption, and batch iteration.

Also provides a deterministic synthetic digit corpus in the same IDX
format, for environments where the real MNIST files are unavailable.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import ConfigError, FormatError

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


@dataclass(frozen=True)
class Dataset:
    """Images in [0, 1] with shape [N, 1, H, W]; integer labels of shape [N]."""

    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise FormatError("images and labels disagree on sample count")

    def __len__(self):
        return self.images.shape[0]

    def take(self, n: int) -> "Dataset":
        return Dataset(self.images[:n], self.labels[:n])


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ConfigError("noise sigma must be >= 0")


def _open_maybe_gz(path):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_exact(f, n, path, offset):
    buf = f.read(n)
    if len(buf) != n:
        raise FormatError(
            f"{path}: truncated file, expected {n} bytes at offset {offset}"
        )
    return buf


def load_idx(images_path, labels_path) -> Dataset:
    """Parse the big-endian IDX pair into a Dataset with pixels in [0, 1]."""
    with _open_maybe_gz(images_path) as f:
        magic, n, rows, cols = struct.unpack(">4i", _read_exact(f, 16, images_path, 0))
        if magic != IMAGES_MAGIC:
            raise FormatError(
                f"{images_path}: bad images magic 0x{magic:08x} at offset 0 "
                f"(expected 0x{IMAGES_MAGIC:08x})"
            )
        raw = _read_exact(f, n * rows * cols, images_path, 16)
        images = np.frombuffer(raw, dtype=np.uint8).reshape(n, 1, rows, cols)
    with _open_maybe_gz(labels_path) as f:
        magic, n_labels = struct.unpack(">2i", _read_exact(f, 8, labels_path, 0))
        if magic != LABELS_MAGIC:
            raise FormatError(
                f"{labels_path}: bad labels magic 0x{magic:08x} at offset 0 "
                f"(expected 0x{LABELS_MAGIC:08x})"
            )
        labels = np.frombuffer(
            _read_exact(f, n_labels, labels_path, 8), dtype=np.uint8
        ).astype(np.int64)
    if n != n_labels:
        raise FormatError(
            f"sample count mismatch: {n} images vs {n_labels} labels"
        )
    return Dataset(images.astype(np.float32) / 255.0, labels)


def write_idx(images_u8: np.ndarray, labels: np.ndarray, images_path, labels_path):
    """Write a uint8 [N, H, W] image stack and its labels as an IDX pair."""
    n, rows, cols = images_u8.shape
    with open(images_path, "wb") as f:
        f.write(struct.pack(">4i", IMAGES_MAGIC, n, rows, cols))
        f.write(images_u8.astype(np.uint8).tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">2i", LABELS_MAGIC, n))
        f.write(labels.astype(np.uint8).tobytes())


def concat(a: Dataset, b: Dataset) -> Dataset:
    return Dataset(
        np.concatenate([a.images, b.images]), np.concatenate([a.labels, b.labels])
    )


def merge_and_split(full: Dataset, train_fraction: float, seed: int):
    """Seeded permutation of all samples; first floor(N*fraction) go to train."""
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError("train_fraction must be in (0, 1)")
    n = len(full)
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(n * train_fraction)
    tr, te = perm[:n_train], perm[n_train:]
    return (
        Dataset(full.images[tr], full.labels[tr]),
        Dataset(full.images[te], full.labels[te]),
    )


def add_gaussian_noise(images: np.ndarray, spec: NoiseSpec) -> np.ndarray:
    """i.i.d. additive N(0, sigma^2) per pixel, unclamped."""
    if spec.sigma == 0.0:
        return images
    rng = np.random.default_rng(spec.seed)
    noise = rng.normal(0.0, spec.sigma, size=images.shape).astype(images.dtype)
    return images + noise


def batches(dataset: Dataset, batch_size: int, shuffle_seed: int | None = None):
    """Yield (images, labels) batches; seeded shuffle, partial tail emitted."""
    if batch_size < 1:
        raise ConfigError("batch_size must be >= 1")
    n = len(dataset)
    order = (
        np.arange(n)
        if shuffle_seed is None
        else np.random.default_rng(shuffle_seed).permutation(n)
    )
    for start in range(0, n, batch_size):
        idx = order[start:start + batch_size]
        yield dataset.images[idx], dataset.labels[idx]


# ---------------------------------------------------------------------------
# Synthetic digit corpus (MNIST stand-in when the real files are absent)

_GLYPHS = {
    0: ("01110", "10001", "10011", "10101", "11001", "10001", "01110"),
    1: ("00100", "01100", "00100", "00100", "00100", "00100", "01110"),
    2: ("01110", "10001", "00001", "00110", "01000", "10000", "11111"),
    3: ("11110", "00001", "00001", "01110", "00001", "00001", "11110"),
    4: ("00010", "00110", "01010", "10010", "11111", "00010", "00010"),
    5: ("11111", "10000", "11110", "00001", "00001", "10001", "01110"),
    6: ("00110", "01000", "10000", "11110", "10001", "10001", "01110"),
    7: ("11111", "00001", "00010", "00100", "01000", "01000", "01000"),
    8: ("01110", "10001", "10001", "01110", "10001", "10001", "01110"),
    9: ("01110", "10001", "10001", "01111", "00001", "00010", "01100"),
}


def _glyph_array(digit: int) -> np.ndarray:
    rows = _GLYPHS[digit]
    return np.array([[c == "1" for c in row] for row in rows], dtype=np.float64)


def synthesize_digits(n: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic 28x28 digit images: bitmap glyphs with random affine
    jitter, blur and pixel noise. Returns (uint8 images [n,28,28], labels)."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 10, size=n)
    images = np.zeros((n, 28, 28), dtype=np.uint8)
    base = {d: np.kron(_glyph_array(d), np.ones((3, 3))) for d in range(10)}
    for i in range(n):
        canvas = np.zeros((28, 28))
        glyph = base[int(labels[i])]  # 21 x 15
        top = 3 + rng.integers(-2, 3)
        left = 6 + rng.integers(-3, 4)
        canvas[top:top + 21, left:left + 15] = glyph
        angle = rng.uniform(-20.0, 20.0)
        canvas = ndimage.rotate(canvas, angle, reshape=False, order=1)
        canvas = ndimage.gaussian_filter(canvas, sigma=rng.uniform(0.4, 0.9))
        canvas *= rng.uniform(0.7, 1.0) / max(canvas.max(), 1e-6)
        canvas += rng.normal(0.0, 0.02, canvas.shape)
        images[i] = (np.clip(canvas, 0.0, 1.0) * 255).astype(np.uint8)
    return images, labels.astype(np.int64)


def ensure_dataset_files(data_dir, n_synthetic: int = 14000, seed: int = 1234):
    """Return (images_path, labels_path) for the directory's digit corpus.

    Uses real MNIST IDX files when present (train pair, optionally with the
    test pair merged by the caller); otherwise materializes a synthetic
    corpus once and reuses it on later calls.
    """
    data_dir = Path(data_dir)
    for img_name, lab_name in (
        ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
        ("train-images-idx3-ubyte.gz", "train-labels-idx1-ubyte.gz"),
    ):
        img, lab = data_dir / img_name, data_dir / lab_name
        if img.exists() and lab.exists():
            return img, lab
    img = data_dir / "synthetic-images-idx3-ubyte"
    lab = data_dir / "synthetic-labels-idx1-ubyte"
    if not (img.exists() and lab.exists()):
        data_dir.mkdir(parents=True, exist_ok=True)
        images, labels = synthesize_digits(n_synthetic, seed)
        write_idx(images, labels, img, lab)
    return img, lab


def load_corpus(data_dir, n_synthetic: int = 14000, seed: int = 1234) -> Dataset:
    """Load the full (unsplit) corpus for ``data_dir``.

    Real MNIST: the train and test pairs are concatenated into the single
    70k-sample pool that the 85/15 split draws from. Synthetic corpus:
    loaded as-is.
    """
    img, lab = ensure_dataset_files(data_dir, n_synthetic, seed)
    full = load_idx(img, lab)
    test_img = Path(data_dir) / "t10k-images-idx3-ubyte"
    test_lab = Path(data_dir) / "t10k-labels-idx1-ubyte"
    for suffix in ("", ".gz"):
        ti, tl = Path(str(test_img) + suffix), Path(str(test_lab) + suffix)
        if ti.exists() and tl.exists():
            full = concat(full, load_idx(ti, tl))
            break
    return full

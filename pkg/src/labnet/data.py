"""Dataset loading, augmentation and batching.

Images are held as (N, C, H, W) arrays. Raw images are uint8 in [0, 255];
``normalize`` converts to float32 standardised by training-split statistics.
"""
import gzip
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, InvalidArgument

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


@dataclass
class Dataset:
    images: np.ndarray               # (N, C, H, W)
    labels: np.ndarray               # (N,) int64
    split: str = "train"
    n_classes: int = 10

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise InvalidArgument(f"{len(self.images)} images but {len(self.labels)} labels")

    def __len__(self):
        return len(self.labels)

    def subset(self, n):
        return Dataset(self.images[:n], self.labels[:n], self.split, self.n_classes)


@dataclass(frozen=True)
class Normalizer:
    """Per-channel standardisation with statistics from the training split."""

    mean: tuple = field(default=(0.0,))
    std: tuple = field(default=(1.0,))

    @classmethod
    def fit(cls, images):
        x = images.astype(np.float64) / 255.0
        return cls(tuple(x.mean(axis=(0, 2, 3)).tolist()), tuple(x.std(axis=(0, 2, 3)).tolist()))

    def __call__(self, images):
        x = images.astype(np.float32) / np.float32(255.0)
        m = np.asarray(self.mean, dtype=np.float32)[None, :, None, None]
        s = np.asarray(self.std, dtype=np.float32)[None, :, None, None]
        return (x - m) / s


# -------------------------------------------------------------------- IDX

def _read_bytes(path):
    with open(path, "rb") as fh:
        head = fh.read(2)
    opener = gzip.open if head == b"\x1f\x8b" else open
    with opener(path, "rb") as fh:
        return fh.read()


def _find(path):
    """Accept either the raw file or its ``.gz`` sibling."""
    if os.path.exists(path):
        return path
    if os.path.exists(path + ".gz"):
        return path + ".gz"
    raise FileNotFoundError(f"no such file: {path} (or {path}.gz)")


def parse_idx(buf, expect_magic, name="idx"):
    """Parse one IDX blob into a uint8 array; dimensions are big-endian uint32."""
    if len(buf) < 4:
        raise FormatError(f"{name}: file shorter than the 4-byte magic number", offset=len(buf))
    (magic,) = struct.unpack(">I", buf[:4])
    if magic != expect_magic:
        raise FormatError(f"{name}: bad magic 0x{magic:08x}, expected 0x{expect_magic:08x}", offset=0)
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(buf) < header:
        raise FormatError(f"{name}: header needs {header} bytes, file has {len(buf)}", offset=len(buf))
    dims = struct.unpack(f">{ndim}I", buf[4:header])
    expected = header + int(np.prod(dims))
    if len(buf) != expected:
        raise FormatError(f"{name}: expected {expected} bytes for dims {dims}, got {len(buf)}",
                          offset=min(len(buf), expected))
    return np.frombuffer(buf, dtype=np.uint8, offset=header).reshape(dims)


def load_idx(images_path, labels_path, split="train"):
    images = parse_idx(_read_bytes(_find(images_path)), IMAGE_MAGIC, os.path.basename(images_path))
    labels = parse_idx(_read_bytes(_find(labels_path)), LABEL_MAGIC, os.path.basename(labels_path))
    if len(images) != len(labels):
        raise FormatError(f"{len(images)} images but {len(labels)} labels")
    if labels.size and labels.max() > 9:
        bad = int(np.argmax(labels > 9))
        raise FormatError(f"label {labels[bad]} out of range [0, 9]", offset=8 + bad)
    return Dataset(images[:, None, :, :].copy(), labels.astype(np.int64), split, 10)


def write_idx(path, array):
    """Write a uint8 array as an IDX file (used for fixtures and exports)."""
    array = np.ascontiguousarray(array, dtype=np.uint8)
    magic = 0x00000800 | array.ndim
    with open(path, "wb") as fh:
        fh.write(struct.pack(f">I{array.ndim}I", magic, *array.shape))
        fh.write(array.tobytes())


def data_dir(explicit=None):
    return explicit or os.environ.get("LABNET_DATA_DIR") or "data"


def load_mnist(directory, split):
    directory = os.path.join(directory, "mnist") if os.path.isdir(os.path.join(directory, "mnist")) else directory
    img, lab = MNIST_FILES[split]
    return load_idx(os.path.join(directory, img), os.path.join(directory, lab), split)


# ------------------------------------------------------------------ CIFAR

def load_cifar_bin(paths, label_bytes=1, n_classes=10, split="train"):
    """CIFAR binary batches: per record ``label_bytes`` label bytes then 3072 pixels.

    CIFAR-100 records carry (coarse, fine); the last label byte is used.
    """
    rec = label_bytes + 3072
    imgs, labs = [], []
    for p in paths:
        buf = _read_bytes(p)
        if len(buf) % rec:
            raise FormatError(f"{p}: size {len(buf)} is not a multiple of the record size {rec}",
                              offset=len(buf) - len(buf) % rec)
        arr = np.frombuffer(buf, dtype=np.uint8).reshape(-1, rec)
        labs.append(arr[:, label_bytes - 1].astype(np.int64))
        imgs.append(arr[:, label_bytes:].reshape(-1, 3, 32, 32))
    return Dataset(np.concatenate(imgs), np.concatenate(labs), split, n_classes)


def load_cifar(directory, name, split):
    if name == "cifar10":
        base = os.path.join(directory, "cifar-10-batches-bin")
        files = [f"data_batch_{i}.bin" for i in range(1, 6)] if split == "train" else ["test_batch.bin"]
        return load_cifar_bin([os.path.join(base, f) for f in files], 1, 10, split)
    base = os.path.join(directory, "cifar-100-binary")
    return load_cifar_bin([os.path.join(base, f"{split}.bin")], 2, 100, split)


def load_dataset(name, directory, split):
    if name == "mnist":
        return load_mnist(directory, split)
    if name in ("cifar10", "cifar100"):
        return load_cifar(directory, name, split)
    raise InvalidArgument(f"unknown dataset {name!r}")


# ----------------------------------------------------------- augmentation

PAD = 4


def epoch_rng(seed, epoch, stream):
    """Independent generator for one (seed, epoch, purpose) triple."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(epoch), int(stream)]))


def augment_params(n, seed, epoch, flip=False, pad=PAD):
    """Per-sample crop offsets (n, 2) and flip flags, indexed by dataset position."""
    rng = epoch_rng(seed, epoch, 1)
    offsets = rng.integers(0, 2 * pad + 1, size=(n, 2))
    flips = rng.random(n) < 0.5 if flip else np.zeros(n, dtype=bool)
    return offsets, flips


def crop_flip(images, offsets, flips, pad=PAD):
    """Zero-pad by ``pad``, crop back to the input size at ``offsets``, mirror where ``flips``."""
    n, c, h, w = images.shape
    padded = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=images.dtype)
    padded[:, :, pad:pad + h, pad:pad + w] = images
    windows = np.lib.stride_tricks.sliding_window_view(padded, (h, w), axis=(2, 3))
    out = windows[np.arange(n), :, offsets[:, 0], offsets[:, 1]]
    out = np.ascontiguousarray(out)
    if flips.any():
        out[flips] = out[flips, :, :, ::-1]
    return out


def augment(images, rng, normalizer, flip=False, pad=PAD):
    """Random pad-crop (and optional left-right flip) followed by normalisation."""
    n = len(images)
    offsets = rng.integers(0, 2 * pad + 1, size=(n, 2))
    flips = rng.random(n) < 0.5 if flip else np.zeros(n, dtype=bool)
    return normalizer(crop_flip(images, offsets, flips, pad))


def batches(n, batch_size, seed, epoch, shuffle=True):
    """Index arrays covering range(n) once, in an order fixed by (seed, epoch)."""
    if batch_size < 1:
        raise InvalidArgument("batch size must be >= 1")
    order = epoch_rng(seed, epoch, 0).permutation(n) if shuffle else np.arange(n)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]

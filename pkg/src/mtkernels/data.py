"""Dataset ingestion, the synthetic benchmark generator, and label encoding.

Targets are stored point-major: the flattened target vector concatenates
one d-block per sample, matching the block layout of the Gram matrix. All
randomness is drawn from numpy's seeded PCG64 generator so identical seeds
reproduce datasets bit for bit across platforms.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


class DataFormatError(ValueError):
    """A data file does not parse; messages carry positions or byte counts."""


@dataclass(frozen=True)
class Dataset:
    """Feature vectors paired with target vectors, one row per sample."""

    features: np.ndarray
    targets: np.ndarray
    provenance: str = ""
    label_values: tuple[int, ...] | None = None

    def __post_init__(self):
        feats = np.atleast_2d(np.asarray(self.features, dtype=float))
        targs = np.atleast_2d(np.asarray(self.targets, dtype=float))
        if feats.shape[0] != targs.shape[0]:
            raise ValueError(
                f"feature rows ({feats.shape[0]}) and target rows "
                f"({targs.shape[0]}) differ"
            )
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "targets", targs)

    @property
    def m(self) -> int:
        return self.features.shape[0]

    @property
    def n(self) -> int:
        return self.features.shape[1]

    @property
    def d(self) -> int:
        return self.targets.shape[1]


@dataclass(frozen=True)
class NoiseSpec:
    """Additive noise: gaussian (scale = variance), uniform (scale = half-width), or none."""

    kind: str = "none"
    scale: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("gaussian", "uniform", "none"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind != "none" and not self.scale > 0:
            raise ValueError(f"noise scale must be positive, got {self.scale}")

    def sample(self, shape) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        if self.kind == "gaussian":
            return rng.normal(0.0, np.sqrt(self.scale), size=shape)
        if self.kind == "uniform":
            return rng.uniform(-self.scale, self.scale, size=shape)
        return np.zeros(shape)


# The synthetic benchmark target: a three-task coupling of five exponential
# bumps on the plane, so the clean signal is itself a sparse kernel expansion.
SYNTH_COUPLING = np.array(
    [
        [1.0, np.exp(-1.0), np.exp(-2.0)],
        [np.exp(-1.0), 1.0, np.exp(-1.0)],
        [np.exp(-2.0), np.exp(-1.0), 1.0],
    ]
)
SYNTH_CENTERS = np.array(
    [[1.0, 1.0], [0.5, 0.5], [0.0, 0.0], [-0.8, -0.8], [-1.0, -1.0]]
)
SYNTH_COEFFS = np.array(
    [
        [1.0, 1.0, 1.0, 1.0, 1.0],
        [1.0, 0.5, 1.0, 0.5, 1.0],
        [0.5, 1.0, 1.0, 1.0, 0.5],
    ]
)


def synthetic_signal(points: np.ndarray) -> np.ndarray:
    """Clean three-task signal at the given planar points; returns (m, 3)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    dists = np.abs(pts[:, None, :] - SYNTH_CENTERS[None, :, :]).sum(axis=2)
    return np.exp(-dists) @ SYNTH_COEFFS.T @ SYNTH_COUPLING.T


def generate_synthetic(
    grid_step: float = 0.1,
    lo: float = -1.0,
    hi: float = 1.0,
    noise: NoiseSpec = NoiseSpec(),
) -> Dataset:
    """Regular grid on [lo, hi]^2 with noisy three-task targets.

    The default step 0.1 yields the 441-point grid on [-1, 1]^2.
    """
    if not grid_step > 0:
        raise ValueError(f"grid step must be positive, got {grid_step}")
    if hi <= lo:
        raise ValueError(f"invalid range [{lo}, {hi}]")
    span = (hi - lo) / grid_step
    count = round(span)
    if abs(span - count) > 1e-9:
        raise ValueError(f"grid step {grid_step} does not divide [{lo}, {hi}]")
    axis = lo + grid_step * np.arange(count + 1)
    xx, yy = np.meshgrid(axis, axis, indexing="ij")
    features = np.stack([xx.ravel(), yy.ravel()], axis=1)
    targets = synthetic_signal(features) + noise.sample((features.shape[0], 3))
    provenance = (
        f"synth:h={grid_step},noise={noise.kind},scale={noise.scale},seed={noise.seed}"
    )
    return Dataset(features=features, targets=targets, provenance=provenance)


def parse_synth_spec(spec: str) -> Dataset:
    """Generate from a descriptor like ``synth:h=0.1,noise=gaussian,var=0.01,seed=42``.

    Keys: h (grid step), noise (gaussian|uniform|none), var (gaussian
    variance), hw (uniform half-width), seed, lo, hi.
    """
    head, _, body = spec.strip().partition(":")
    if head != "synth":
        raise ValueError(f"not a synthetic dataset spec: {spec!r}")
    fields = {}
    if body:
        for item in body.split(","):
            key, _, value = item.partition("=")
            if not value:
                raise ValueError(f"malformed spec entry {item!r} in {spec!r}")
            fields[key.strip()] = value.strip()
    kind = fields.get("noise", "none")
    seed = int(fields.get("seed", 0))
    if kind == "gaussian":
        noise = NoiseSpec("gaussian", float(fields.get("var", 0.01)), seed)
    elif kind == "uniform":
        noise = NoiseSpec("uniform", float(fields.get("hw", 0.1)), seed)
    elif kind == "none":
        noise = NoiseSpec()
    else:
        raise ValueError(f"unknown noise kind {kind!r}")
    return generate_synthetic(
        grid_step=float(fields.get("h", 0.1)),
        lo=float(fields.get("lo", -1.0)),
        hi=float(fields.get("hi", 1.0)),
        noise=noise,
    )


def _read_csv_matrix(path, header: bool = False) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if header:
        lines = lines[1:]
    lines = [line for line in lines if line.strip()]
    if not lines:
        raise DataFormatError(f"{path}: empty file")
    rows = []
    width = None
    for i, line in enumerate(lines, start=1):
        cells = line.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise DataFormatError(
                f"{path}: row {i} has {len(cells)} columns, expected {width}"
            )
        row = []
        for j, cell in enumerate(cells, start=1):
            try:
                row.append(float(cell))
            except ValueError:
                raise DataFormatError(
                    f"{path}: non-numeric value {cell.strip()!r} at row {i}, "
                    f"column {j}"
                ) from None
        rows.append(row)
    return np.array(rows)


def load_csv(features_path, targets_path, header: bool = False) -> Dataset:
    """Load a dataset from paired headerless CSV files (one row per sample)."""
    features = _read_csv_matrix(features_path, header=header)
    targets = _read_csv_matrix(targets_path, header=header)
    if features.shape[0] != targets.shape[0]:
        raise DataFormatError(
            f"row count mismatch: {features_path} has {features.shape[0]} rows, "
            f"{targets_path} has {targets.shape[0]}"
        )
    return Dataset(
        features=features,
        targets=targets,
        provenance=f"csv:{features_path},{targets_path}",
    )


def write_csv_matrix(matrix: np.ndarray, path) -> None:
    """Write a matrix as headerless CSV with round-trip float precision."""
    matrix = np.atleast_2d(np.asarray(matrix))
    with open(path, "w", encoding="utf-8") as fh:
        for row in matrix:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _read_exact(fh, nbytes: int, path, what: str) -> bytes:
    data = fh.read(nbytes)
    if len(data) != nbytes:
        raise DataFormatError(
            f"{path}: truncated {what}: expected {nbytes} bytes, got {len(data)}"
        )
    return data


def load_idx(images_path, labels_path, keep_labels=None) -> Dataset:
    """Load big-endian IDX image/label files with one-hot encoded targets.

    Pixels are scaled to [0, 1]. Rows are filtered to ``keep_labels`` (all
    labels present when omitted) and targets are one-hot over the kept
    labels in ascending order.
    """
    with open(images_path, "rb") as fh:
        magic, count, nrows, ncols = struct.unpack(
            ">IIII", _read_exact(fh, 16, images_path, "image header")
        )
        if magic != IDX_IMAGE_MAGIC:
            raise DataFormatError(
                f"{images_path}: bad image magic 0x{magic:08x}, "
                f"expected 0x{IDX_IMAGE_MAGIC:08x}"
            )
        payload = _read_exact(
            fh, count * nrows * ncols, images_path, "image payload"
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(count, nrows * ncols)

    with open(labels_path, "rb") as fh:
        magic, label_count = struct.unpack(
            ">II", _read_exact(fh, 8, labels_path, "label header")
        )
        if magic != IDX_LABEL_MAGIC:
            raise DataFormatError(
                f"{labels_path}: bad label magic 0x{magic:08x}, "
                f"expected 0x{IDX_LABEL_MAGIC:08x}"
            )
        label_payload = _read_exact(fh, label_count, labels_path, "label payload")
    labels = np.frombuffer(label_payload, dtype=np.uint8)

    if count != label_count:
        raise DataFormatError(
            f"count mismatch: {images_path} has {count} images, "
            f"{labels_path} has {label_count} labels"
        )

    kept = sorted(set(int(v) for v in labels) if keep_labels is None else set(keep_labels))
    if not kept:
        raise DataFormatError("no labels to keep")
    mask = np.isin(labels, kept)
    pixels = pixels[mask]
    labels = labels[mask]
    position = {value: i for i, value in enumerate(kept)}
    targets = np.zeros((pixels.shape[0], len(kept)))
    for row, value in enumerate(labels):
        targets[row, position[int(value)]] = 1.0
    return Dataset(
        features=pixels.astype(float) / 255.0,
        targets=targets,
        provenance=f"idx:{images_path},{labels_path},keep={kept}",
        label_values=tuple(kept),
    )


def write_idx(images: np.ndarray, labels: np.ndarray, images_path, labels_path) -> None:
    """Write uint8 images (count, rows, cols) and labels to IDX files."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    if images.ndim != 3:
        raise ValueError(f"images must be (count, rows, cols), got {images.shape}")
    if labels.shape != (images.shape[0],):
        raise ValueError("one label per image required")
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGE_MAGIC, *images.shape))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABEL_MAGIC, labels.shape[0]))
        fh.write(labels.tobytes())


def flatten_targets(ds: Dataset) -> np.ndarray:
    """Concatenate targets point-major into a vector of length m*d."""
    return ds.targets.reshape(-1).copy()


def unflatten_targets(y: np.ndarray, d: int) -> np.ndarray:
    """Inverse of flatten_targets: reshape a length-m*d vector to (m, d)."""
    y = np.asarray(y, dtype=float).ravel()
    if d < 1 or y.size % d != 0:
        raise ValueError(f"length {y.size} is not a multiple of d={d}")
    return y.reshape(-1, d)


def split(ds: Dataset, test_fraction: float, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Deterministic shuffled train/test split."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test fraction must be in (0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(ds.m)
    n_test = max(1, round(ds.m * test_fraction))
    test_idx, train_idx = order[:n_test], order[n_test:]
    make = lambda idx, tag: Dataset(
        features=ds.features[idx],
        targets=ds.targets[idx],
        provenance=f"{ds.provenance}|{tag}(frac={test_fraction},seed={seed})",
        label_values=ds.label_values,
    )
    return make(train_idx, "train"), make(test_idx, "test")

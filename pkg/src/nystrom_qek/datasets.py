"""Synthetic 2-D binary datasets and their CSV format.

All generators are pure functions of their arguments and return features in
``[-1, 1]^2`` with labels in ``{-1, +1}``.

The checkers and donuts constructions are reconstructions with the sizes of
the original benchmarks (30/30 and 60/60 points); spirals wraps
scikit-learn's two-moons generator; corners labels points inside any of four
quarter discs centred on the corners of the square as -1.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.datasets import make_moons

DATASETS = ("checkers", "donuts", "spirals", "corners")
CSV_HEADER = ["x1", "x2", "label", "split"]


class DatasetError(ValueError):
    pass


@dataclass
class Dataset:
    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    name: str = "custom"
    seed: int = 0

    def __post_init__(self):
        for split in ("train", "test"):
            x = np.asarray(getattr(self, f"{split}_x"), dtype=float).reshape(-1, 2)
            y = np.asarray(getattr(self, f"{split}_y")).astype(int).ravel()
            if x.shape[0] != y.size:
                raise DatasetError(f"{split}: {x.shape[0]} points but {y.size} labels")
            if not np.all(np.isfinite(x)):
                raise DatasetError(f"{split}: non-finite features")
            if not np.all(np.isin(y, (-1, 1))):
                raise DatasetError(f"{split}: labels must be -1 or +1")
            setattr(self, f"{split}_x", x)
            setattr(self, f"{split}_y", y)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, a), getattr(other, a))
            for a in ("train_x", "train_y", "test_x", "test_y")
        )


def _balanced_labels(n, rng):
    labels = np.where(np.arange(n) % 2 == 0, 1, -1)
    return rng.permutation(labels)


def make_corners(n_train: int = 100, n_test: int = 100, radius: float = 0.8, seed: int = 0,
                 max_retries: int = 20) -> Dataset:
    """Uniform points in the square; -1 within ``radius`` of any corner."""
    if n_train < 1 or n_test < 1:
        raise DatasetError("sizes must be at least 1")
    if not 0 < radius < 2:
        raise DatasetError(f"radius must lie in (0, 2), got {radius}")
    rng = np.random.default_rng(seed)
    for _ in range(max_retries):
        x = rng.uniform(-1, 1, size=(n_train + n_test, 2))
        y = corners_label(x, radius)
        if np.unique(y[:n_train]).size == 2:
            return Dataset(x[:n_train], y[:n_train], x[n_train:], y[n_train:], "corners", seed)
    raise DatasetError(
        f"corners: radius {radius} gave a single training class in {max_retries} draws"
    )


def corners_label(x, radius: float) -> np.ndarray:
    x = np.atleast_2d(x)
    corners = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float)
    d = np.linalg.norm(x[:, None, :] - corners[None, :, :], axis=2)
    return np.where((d <= radius).any(axis=1), -1, 1)


def make_checkers(seed: int = 0, n_train: int = 30, n_test: int = 30, grid: int = 4,
                  spread: float = 0.2) -> Dataset:
    """Checkerboard of ``grid x grid`` cells over the square.

    Points are spread over the cells as evenly as possible, jittered around
    each cell centre by a Gaussian with std ``spread`` times the cell width
    (clipped to the cell), and labelled by cell parity. Train and test sets
    are drawn independently from the same construction.
    """
    rng = np.random.default_rng(seed)
    width = 2.0 / grid

    def draw(n):
        cells = np.arange(grid * grid)
        # even coverage, with a random choice of which cells get an extra point
        order = np.concatenate([rng.permutation(cells) for _ in range(-(-n // cells.size))])[:n]
        row, col = np.divmod(order, grid)
        centre = np.stack([-1 + (col + 0.5) * width, -1 + (row + 0.5) * width], axis=1)
        jitter = np.clip(rng.normal(0, spread * width, size=(n, 2)), -width / 2, width / 2)
        y = np.where((row + col) % 2 == 0, 1, -1)
        return centre + jitter, y

    tx, ty = draw(n_train)
    vx, vy = draw(n_test)
    return Dataset(tx, ty, vx, vy, "checkers", seed)


def make_donuts(seed: int = 0, n_train: int = 60, n_test: int = 60, inner: float = 0.2,
                outer: float = 0.4, width: float = 0.1) -> Dataset:
    """Two donuts centred at (-0.5, 0) and (0.5, 0).

    In each donut, points on a ring of radius ``inner`` are labelled +1 and
    points on the ring of radius ``outer`` -1; radii are jittered uniformly
    by ``width / 2``.
    """
    rng = np.random.default_rng(seed)
    centres = np.array([[-0.5, 0.0], [0.5, 0.0]])

    def draw(n):
        y = _balanced_labels(n, rng)
        which = rng.integers(0, 2, size=n)
        r = np.where(y > 0, inner, outer) + rng.uniform(-width / 2, width / 2, size=n)
        phi = rng.uniform(0, 2 * np.pi, size=n)
        x = centres[which] + r[:, None] * np.stack([np.cos(phi), np.sin(phi)], axis=1)
        return x, y

    tx, ty = draw(n_train)
    vx, vy = draw(n_test)
    return Dataset(tx, ty, vx, vy, "donuts", seed)


def make_spirals(seed: int = 0, noise_level: float = 0.1, n_train: int = 100,
                 n_test: int = 100) -> Dataset:
    """Two interleaving half circles, min-max rescaled to the square.

    Points come from :func:`sklearn.datasets.make_moons` without shuffling;
    even positions go to the training set and odd ones to the test set, so
    both splits cover both arcs evenly.
    """
    if noise_level < 0:
        raise DatasetError("noise_level must be non-negative")
    x, y = make_moons(n_samples=n_train + n_test, shuffle=False,
                      noise=noise_level if noise_level > 0 else None, random_state=seed)
    x = rescale_to_square(x)
    y = np.where(y == 0, 1, -1)
    tr = np.arange(x.shape[0]) % 2 == 0
    return Dataset(x[tr], y[tr], x[~tr], y[~tr], "spirals", seed)


def rescale_to_square(x) -> np.ndarray:
    lo, hi = x.min(axis=0), x.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return 2.0 * (x - lo) / span - 1.0


def make_dataset(name: str, seed: int = 0, **kw) -> Dataset:
    makers = {
        "checkers": make_checkers,
        "donuts": make_donuts,
        "spirals": make_spirals,
        "corners": make_corners,
    }
    if name not in makers:
        raise DatasetError(f"unknown dataset {name!r}; choose from {DATASETS}")
    return makers[name](seed=seed, **kw)


def save_csv(dataset: Dataset, path) -> None:
    """Write ``x1,x2,label,split`` rows; floats use repr for exact round trips."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for split in ("train", "test"):
        xs, ys = getattr(dataset, f"{split}_x"), getattr(dataset, f"{split}_y")
        for (a, b), lab in zip(xs, ys):
            w.writerow([repr(float(a)), repr(float(b)), int(lab), split])
    Path(path).write_text(buf.getvalue())


def load_csv(path, name: str = None) -> Dataset:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    if [c.strip() for c in rows[0]] != CSV_HEADER:
        raise DatasetError(f"{path}: expected header {','.join(CSV_HEADER)}")
    data = {"train": ([], []), "test": ([], [])}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 4:
            raise DatasetError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
        try:
            x1, x2 = float(row[0]), float(row[1])
            label = int(row[2])
        except ValueError as exc:
            raise DatasetError(f"{path}:{lineno}: {exc}") from None
        if label not in (-1, 1):
            raise DatasetError(f"{path}:{lineno}: label {label} not in {{-1, +1}}")
        split = row[3].strip()
        if split not in data:
            raise DatasetError(f"{path}:{lineno}: split {split!r} not in {{train, test}}")
        data[split][0].append((x1, x2))
        data[split][1].append(label)
    if not data["train"][0] and not data["test"][0]:
        raise DatasetError(f"{path}: no data rows")
    arr = {k: (np.array(v[0], dtype=float).reshape(-1, 2), np.array(v[1], dtype=int))
           for k, v in data.items()}
    return Dataset(arr["train"][0], arr["train"][1], arr["test"][0], arr["test"][1],
                   name or path.stem)

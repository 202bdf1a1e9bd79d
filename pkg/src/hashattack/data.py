"""Procedurally rendered multi-label shapes dataset."""

from dataclasses import dataclass

import numpy as np

COLOR_NAMES = ["red", "green", "blue", "yellow", "magenta", "cyan", "orange", "purple"]
_COLORS = {
    "red": (0.9, 0.1, 0.1),
    "green": (0.1, 0.8, 0.2),
    "blue": (0.1, 0.2, 0.9),
    "yellow": (0.95, 0.9, 0.1),
    "magenta": (0.9, 0.1, 0.85),
    "cyan": (0.1, 0.85, 0.9),
    "orange": (1.0, 0.55, 0.05),
    "purple": (0.5, 0.1, 0.7),
}
SHAPE_NAMES = ["square", "plus", "cross", "ring", "tee", "corner", "column", "stripe"]
_SHAPES = {
    "square": [[1, 1, 1], [1, 1, 1], [1, 1, 1]],
    "plus": [[0, 1, 0], [1, 1, 1], [0, 1, 0]],
    "cross": [[1, 0, 1], [0, 1, 0], [1, 0, 1]],
    "ring": [[1, 1, 1], [1, 0, 1], [1, 1, 1]],
    "tee": [[1, 1, 1], [0, 1, 0], [0, 1, 0]],
    "corner": [[1, 0, 0], [1, 0, 0], [1, 1, 1]],
    "column": [[0, 1, 0], [0, 1, 0], [0, 1, 0]],
    "stripe": [[0, 0, 0], [1, 1, 1], [0, 0, 0]],
}


class ConfigError(ValueError):
    pass


@dataclass
class ImageSample:
    id: str
    pixels: np.ndarray  # (3, H, W) float64 in [0, 1]
    labels: np.ndarray  # (C,) int8 multi-hot

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int8)
        if self.pixels.ndim != 3:
            raise ValueError(f"pixels must be (channels, height, width), got {self.pixels.shape}")
        if self.pixels.min() < 0 or self.pixels.max() > 1:
            raise ValueError("pixel values must lie in [0, 1]")
        if self.labels.sum() < 1:
            raise ValueError(f"image {self.id} has no label")


@dataclass
class DatasetConfig:
    num_classes: int = 8
    images_per_class: int = 64
    queries_per_class: int = 4
    image_size: int = 32
    cell: int = 4
    multi_label_prob: float = 0.25
    seed: int = 0


def class_names(num_classes):
    """Human-readable "<color> <shape>" name per class."""
    names = []
    for c in range(num_classes):
        color = COLOR_NAMES[c % len(COLOR_NAMES)]
        shape = SHAPE_NAMES[(c + c // len(COLOR_NAMES)) % len(SHAPE_NAMES)]
        names.append(f"{color} {shape}")
    if len(set(names)) != len(names):
        raise ConfigError(f"cannot name {num_classes} distinct classes")
    return names


def _class_style(c):
    color = _COLORS[COLOR_NAMES[c % len(COLOR_NAMES)]]
    shape = np.array(_SHAPES[SHAPE_NAMES[(c + c // len(COLOR_NAMES)) % len(SHAPE_NAMES)]], dtype=bool)
    return np.array(color), shape


def render(classes, rng, cfg):
    """Render one image holding a primitive for each class in ``classes``.

    Drawing happens on a coarse cell grid that is then upsampled by ``cfg.cell``,
    so every cell-sized patch is a constant color.
    """
    g = cfg.image_size // cfg.cell
    grid = 0.5 + rng.uniform(-0.08, 0.08, size=(3, g, g))
    occupied = np.zeros((g, g), dtype=bool)
    for c in classes:
        color, shape = _class_style(c)
        h, w = shape.shape
        for _ in range(100):
            r0 = rng.integers(0, g - h + 1)
            c0 = rng.integers(0, g - w + 1)
            if not occupied[r0:r0 + h, c0:c0 + w].any():
                break
        else:
            raise ConfigError("could not place non-overlapping primitives; image too small")
        occupied[r0:r0 + h, c0:c0 + w] = True
        jitter = rng.uniform(-0.05, 0.05, size=3)
        col = np.clip(color + jitter, 0.0, 1.0)
        patch = grid[:, r0:r0 + h, c0:c0 + w]
        patch[:, shape] = col[:, None]
    img = np.repeat(np.repeat(grid, cfg.cell, axis=1), cfg.cell, axis=2)
    return np.clip(img, 0.0, 1.0)


def _sample_labels(primary, rng, cfg):
    classes = [primary]
    if cfg.num_classes > 1 and rng.random() < cfg.multi_label_prob:
        others = [c for c in range(cfg.num_classes) if c != primary]
        classes.append(int(rng.choice(others)))
    return classes


def _make(prefix, idx, classes, rng, cfg):
    labels = np.zeros(cfg.num_classes, dtype=np.int8)
    labels[classes] = 1
    return ImageSample(f"{prefix}{idx:05d}", render(classes, rng, cfg), labels)


def generate_dataset(cfg, pairing_seed=None):
    """Returns ``(database, queries, targets)``.

    ``targets[i]`` is ``(target_image, target_label)`` for ``queries[i]``; the
    target label is a single class drawn uniformly from those disjoint from
    the query's own labels. Target draws use ``pairing_seed`` (default: the
    dataset seed) so pairings can be resampled without touching the images.
    """
    if cfg.num_classes < 2:
        raise ConfigError("need at least two classes")
    if cfg.image_size % cfg.cell:
        raise ConfigError("image_size must be a multiple of cell")
    rng = np.random.default_rng(cfg.seed)
    pair_rng = np.random.default_rng([cfg.seed if pairing_seed is None else pairing_seed, 1])

    database = []
    for c in range(cfg.num_classes):
        for _ in range(cfg.images_per_class):
            database.append(_make("db", len(database), _sample_labels(c, rng, cfg), rng, cfg))

    queries, targets = [], []
    for c in range(cfg.num_classes):
        for _ in range(cfg.queries_per_class):
            queries.append(_make("q", len(queries), _sample_labels(c, rng, cfg), rng, cfg))
    for q in queries:
        free = np.flatnonzero(q.labels == 0)
        if free.size == 0:
            raise ConfigError(f"query {q.id} covers every class; no disjoint target exists")
        t = int(pair_rng.choice(free))
        target_label = np.zeros(cfg.num_classes, dtype=np.int8)
        target_label[t] = 1
        targets.append((_make("t", len(targets), [t], pair_rng, cfg), target_label))
    return database, queries, targets


def save_dataset(path, database, queries, targets):
    arrays = {}
    for name, items in (("db", database), ("q", queries), ("t", [t[0] for t in targets])):
        arrays[f"{name}_pixels"] = stack_pixels(items)
        arrays[f"{name}_labels"] = stack_labels(items)
        arrays[f"{name}_ids"] = np.array([s.id for s in items])
    arrays["target_labels"] = np.stack([t[1] for t in targets])
    np.savez(path, **arrays)


def load_dataset(path):
    with np.load(path, allow_pickle=False) as d:
        def samples(name):
            return [
                ImageSample(str(i), p, lab)
                for i, p, lab in zip(d[f"{name}_ids"], d[f"{name}_pixels"], d[f"{name}_labels"])
            ]

        database, queries, timgs = samples("db"), samples("q"), samples("t")
        targets = list(zip(timgs, list(d["target_labels"])))
    return database, queries, targets


def stack_pixels(samples):
    return np.stack([s.pixels for s in samples])


def stack_labels(samples):
    return np.stack([s.labels for s in samples])

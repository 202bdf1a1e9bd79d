"""Small convolutional deep hashing model trained toward per-class hash centers."""

import numpy as np
import scipy.linalg
import torch
import torch.nn as nn
import torch.nn.functional as F

from .data import ConfigError, ImageSample, stack_labels, stack_pixels
from .hash_space import DimensionError, sign_binarize

DTYPE = torch.float64


class HashNet(nn.Module):
    """Two conv blocks, global average pool, linear head, tanh."""

    def __init__(self, k, in_channels=3, image_size=32, width=16):
        super().__init__()
        if k < 2:
            raise ValueError("code length k must be at least 2")
        self.k = k
        self.in_channels = in_channels
        self.image_size = image_size
        self.conv1 = nn.Conv2d(in_channels, width, 3, padding=1)
        self.conv2 = nn.Conv2d(width, 2 * width, 3, padding=1)
        self.head = nn.Linear(2 * width, k)
        self.to(DTYPE)

    @property
    def feature_dim(self):
        return self.head.in_features

    def check_input(self, x):
        if x.shape[-3:] != (self.in_channels, self.image_size, self.image_size):
            raise DimensionError(
                f"expected images of shape {(self.in_channels, self.image_size, self.image_size)}, "
                f"got {tuple(x.shape[-3:])}"
            )

    def features(self, x):
        self.check_input(x)
        h = F.avg_pool2d(F.relu(self.conv1(x)), 2)
        h = F.avg_pool2d(F.relu(self.conv2(h)), 2)
        return h.mean(dim=(-2, -1))

    def forward(self, x):
        return torch.tanh(self.head(self.features(x)))


def _pixels(image):
    if isinstance(image, ImageSample):
        image = image.pixels
    return torch.as_tensor(np.asarray(image), dtype=DTYPE)


@torch.no_grad()
def hash_forward(model, image):
    """Continuous (pre-sign) code for one image, as a length-k numpy vector."""
    x = _pixels(image)
    model.check_input(x)
    return model(x[None])[0].numpy()


@torch.no_grad()
def encode_images(model, images, batch_size=256):
    """Continuous codes for a batch; accepts ImageSamples or an (N, 3, H, W) array."""
    if len(images) and isinstance(images[0], ImageSample):
        images = stack_pixels(images)
    x = torch.as_tensor(np.asarray(images), dtype=DTYPE)
    out = [model(x[i:i + batch_size]) for i in range(0, x.shape[0], batch_size)]
    return torch.cat(out).numpy()


def hash_codes(model, images):
    return sign_binarize(encode_images(model, images))


def hash_centers(num_classes, k, seed=0):
    """One +/-1 target code per class.

    Rows of a Hadamard matrix (and their negations) when k is a power of two
    and there are few enough classes; otherwise greedy max-min-distance picks
    from random candidates.
    """
    if k & (k - 1) == 0 and num_classes <= 2 * k:
        H = scipy.linalg.hadamard(k)
        return np.concatenate([H, -H])[:num_classes].astype(np.int8)
    rng = np.random.default_rng(seed)
    cand = rng.choice([-1, 1], size=(max(64, 16 * num_classes), k)).astype(np.int8)
    chosen = [0]
    mind = (k - cand.astype(np.int64) @ cand[0]) // 2
    for _ in range(1, num_classes):
        i = int(np.argmax(mind))
        chosen.append(i)
        mind = np.minimum(mind, (k - cand.astype(np.int64) @ cand[i]) // 2)
    return cand[chosen]


def label_targets(labels, centers):
    """Per-image target code: re-binarized mean of its classes' centers."""
    labels = np.asarray(labels, dtype=np.float64)
    mean = labels @ centers / labels.sum(axis=1, keepdims=True)
    return sign_binarize(mean.ravel()).reshape(mean.shape)


def augment(x, gen, min_contrast=0.3, noise=0.05, block=4, block_noise=0.0):
    """Random contrast reduction toward the mean color, per-block color jitter, pixel noise."""
    n, c, h, w = x.shape
    contrast = min_contrast + (1 - min_contrast) * torch.rand(n, 1, 1, 1, generator=gen, dtype=x.dtype)
    mean = x.mean(dim=(-2, -1), keepdim=True)
    x = mean + contrast * (x - mean)
    amp = block_noise * torch.rand(n, 1, 1, 1, generator=gen, dtype=x.dtype)
    jitter = amp * (2 * torch.rand(n, c, h // block, w // block, generator=gen, dtype=x.dtype) - 1)
    x = x + jitter.repeat_interleave(block, -2).repeat_interleave(block, -1)
    sigma = noise * torch.rand(n, 1, 1, 1, generator=gen, dtype=x.dtype)
    return (x + sigma * torch.randn(x.shape, generator=gen, dtype=x.dtype)).clamp(0, 1)


def train_hash_model(
    dataset, k, seed=0, epochs=20, lr=3e-3, batch_size=32, quant_weight=0.1, width=16, augment_data=True
):
    labels = stack_labels(dataset)
    if (labels.sum(axis=0) > 0).sum() < 2:
        raise ConfigError("hash model training needs at least two classes present")
    pixels = stack_pixels(dataset)
    _, c, h, w = pixels.shape
    if h != w:
        raise ConfigError("square images required")

    with torch.random.fork_rng():
        torch.manual_seed(seed)
        model = HashNet(k, in_channels=c, image_size=h, width=width)
    centers = hash_centers(labels.shape[1], k, seed)
    x = torch.as_tensor(pixels, dtype=DTYPE)
    y = torch.as_tensor(label_targets(labels, centers), dtype=DTYPE)

    gen = torch.Generator().manual_seed(seed)
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    for _ in range(epochs):
        perm = torch.randperm(x.shape[0], generator=gen)
        for i in range(0, x.shape[0], batch_size):
            idx = perm[i:i + batch_size]
            xb = augment(x[idx], gen) if augment_data else x[idx]
            out = model(xb)
            loss = F.mse_loss(out, y[idx]) + quant_weight * ((out.abs() - 1) ** 2).mean()
            opt.zero_grad()
            loss.backward()
            opt.step()
    model.eval()
    for p in model.parameters():
        p.requires_grad_(False)
    model.centers = centers
    return model


def load_hash_model(state, meta):
    model = HashNet(meta["k"], meta["in_channels"], meta["image_size"], meta["width"])
    model.load_state_dict(state)
    for p in model.parameters():
        p.requires_grad_(False)
    return model


def hash_model_meta(model):
    return {
        "kind": "hash_model",
        "k": model.k,
        "in_channels": model.in_channels,
        "image_size": model.image_size,
        "width": model.conv1.out_channels,
    }

"""Text-to-hash-space alignment network and its three alignment losses."""

import csv
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .data import stack_pixels
from .hash_model import DTYPE
from .hash_space import DimensionError
from .text import TEXT_DIM

FEATURE_DIM = 256


class HashAlignNet(nn.Module):
    """FC 1024 -> 512 -> 256 trunk (ReLU between) plus a tanh head to k bits.

    ``forward`` returns ``(text_feature, guide)``; the feature is the raw
    output of the third layer.
    """

    def __init__(self, k, in_dim=TEXT_DIM, widths=(1024, 512, FEATURE_DIM)):
        super().__init__()
        self.k = k
        self.in_dim = in_dim
        self.widths = tuple(widths)
        dims = (in_dim,) + self.widths
        self.layers = nn.ModuleList(nn.Linear(a, b) for a, b in zip(dims[:-1], dims[1:]))
        self.head = nn.Linear(self.widths[-1], k)
        self.to(DTYPE)

    def forward(self, z):
        if z.shape[-1] != self.in_dim:
            raise DimensionError(f"HAN expects inputs of width {self.in_dim}, got {z.shape[-1]}")
        h = z
        for i, layer in enumerate(self.layers):
            h = layer(h)
            if i < len(self.layers) - 1:
                h = F.relu(h)
        return h, torch.tanh(self.head(h))


class RandomHead(nn.Module):
    """Stand-in for an unaligned HAN: a fixed random linear map to k bits with tanh."""

    def __init__(self, k, in_dim=TEXT_DIM, seed=0):
        super().__init__()
        self.k = k
        self.in_dim = in_dim
        g = torch.Generator().manual_seed(seed)
        self.register_buffer("weight", torch.randn(k, in_dim, generator=g, dtype=DTYPE) / np.sqrt(in_dim))

    def forward(self, z):
        if z.shape[-1] != self.in_dim:
            raise DimensionError(f"head expects inputs of width {self.in_dim}, got {z.shape[-1]}")
        return z, torch.tanh(z @ self.weight.T)


def build_han(k, seed=0, in_dim=TEXT_DIM):
    with torch.random.fork_rng():
        torch.manual_seed(seed)
        return HashAlignNet(k, in_dim)


@torch.no_grad()
def han_forward(han, z):
    """Numpy convenience wrapper: ``(text_feature, guide)`` for one text latent."""
    t = torch.as_tensor(np.asarray(z), dtype=DTYPE)
    feat, guide = han(t)
    return feat.numpy(), guide.numpy()


class ImageFeatureProjector(nn.Module):
    """Frozen random map from the hash model's pooled features to the 256-d alignment space."""

    def __init__(self, in_dim, out_dim=FEATURE_DIM, seed=0):
        super().__init__()
        g = torch.Generator().manual_seed(seed + 7919)
        self.register_buffer("weight", torch.randn(out_dim, in_dim, generator=g, dtype=DTYPE) / np.sqrt(in_dim))

    def forward(self, f):
        return f @ self.weight.T


# ---- losses ----

def loss_direct(text_feat, image_feat):
    """One minus the mean cosine similarity over the batch."""
    text_feat, image_feat = torch.atleast_2d(text_feat), torch.atleast_2d(image_feat)
    if text_feat.shape != image_feat.shape:
        raise DimensionError(f"feature batches differ: {tuple(text_feat.shape)} vs {tuple(image_feat.shape)}")
    nt = text_feat.norm(dim=-1)
    ni = image_feat.norm(dim=-1)
    if (nt == 0).any() or (ni == 0).any():
        raise ValueError("zero-norm feature in cosine similarity")
    cos = (text_feat * image_feat).sum(-1) / (nt * ni)
    return 1 - cos.mean()


def loss_quan(guide):
    """Mean over the batch of || |b| - 1 ||_2."""
    guide = torch.atleast_2d(guide)
    if guide.shape[0] == 0:
        raise ValueError("empty batch")
    return (guide.abs() - 1).norm(dim=-1).mean()


def loss_ham(guide, image_codes):
    """Mean over the batch of the L1 gap between guide vectors and image hash codes."""
    guide, image_codes = torch.atleast_2d(guide), torch.atleast_2d(image_codes)
    if guide.shape != image_codes.shape:
        raise DimensionError(f"code batches differ: {tuple(guide.shape)} vs {tuple(image_codes.shape)}")
    return (guide - image_codes).abs().sum(-1).mean()


@dataclass
class AlignConfig:
    alpha: float = 1.0
    beta: float = 0.5
    gamma: float = 1.0
    lr: float = 1e-4
    epochs: int = 300
    seed: int = 0

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ValueError("alignment loss weights must be non-negative")
        if max(self.alpha, self.beta, self.gamma) <= 0:
            raise ValueError("at least one alignment loss weight must be positive")


def loss_align(cfg, direct, quan, ham):
    return cfg.alpha * direct + cfg.beta * quan + cfg.gamma * ham


@torch.no_grad()
def image_targets(hash_model, projector, images):
    """``(image_features, image_codes)`` from the frozen hash model; codes use sign(0)=+1."""
    x = torch.as_tensor(stack_pixels(images), dtype=DTYPE)
    feats = hash_model.features(x)
    codes = torch.tanh(hash_model.head(feats))
    return projector(feats), torch.where(codes >= 0, 1.0, -1.0).to(DTYPE)


def alignment_losses(han, text_latents, image_feat, image_codes):
    t_feat, guide = han(text_latents)
    return loss_direct(t_feat, image_feat), loss_quan(guide), loss_ham(guide, image_codes)


def train_alignment(han, pairs, hash_model, cfg, projector=None, log_path=None):
    """Full-batch Adam on the weighted alignment loss; only ``han`` is updated in place.

    ``pairs`` is a list of ``(text_latent, ImageSample)``. Returns ``(han, history)``
    with one ``(direct, quan, ham, total)`` row per epoch.
    """
    if not pairs:
        raise ValueError("train_alignment needs at least one (text, image) pair")
    if projector is None:
        projector = ImageFeatureProjector(hash_model.feature_dim, seed=cfg.seed)
    z = torch.as_tensor(np.stack([p[0] for p in pairs]), dtype=DTYPE)
    image_feat, image_codes = image_targets(hash_model, projector, [p[1] for p in pairs])

    opt = torch.optim.Adam(han.parameters(), lr=cfg.lr)
    history = []
    for _ in range(cfg.epochs):
        d, q, h = alignment_losses(han, z, image_feat, image_codes)
        total = loss_align(cfg, d, q, h)
        opt.zero_grad()
        total.backward()
        opt.step()
        history.append((d.item(), q.item(), h.item(), total.item()))

    if log_path is not None:
        write_alignment_log(history, log_path)
    return han, history


def write_alignment_log(history, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "loss_direct", "loss_quan", "loss_ham", "loss_align"])
        for epoch, row in enumerate(history):
            w.writerow([epoch, *(repr(v) for v in row)])


@torch.no_grad()
def mean_guide_distance(han, text_latents, image_codes):
    """Mean Hamming distance between sign(guide) and the images' hash codes."""
    z = torch.as_tensor(np.asarray(text_latents), dtype=DTYPE)
    _, guide = han(z)
    g = torch.where(guide >= 0, 1.0, -1.0)
    c = torch.as_tensor(np.asarray(image_codes), dtype=DTYPE)
    return float(((g - c).abs().sum(-1) / 2).mean())

"""Latent diffusion backends: encode/decode, DDIM inversion and denoising steps.

:class:`ToyBackend` is small enough to verify numerically:

* a per-patch linear autoencoder (non-overlapping ``cell x cell`` patches to
  ``latent_channels`` numbers each) fitted by PCA on the training images;
* a denoiser whose noise prediction is the closed-form optimum for a
  diagonal Gaussian fit of the training latents, plus a residual from one
  multi-head cross-attention block between latent positions and text tokens;
* deterministic DDIM sampling, and inversion refined by fixed-point
  iteration so that denoising exactly undoes it.
"""

from dataclasses import dataclass

import numpy as np
import torch

from .data import ImageSample
from .hash_model import DTYPE
from .hash_space import DimensionError
from .text import TEXT_DIM


class StateError(RuntimeError):
    pass


@dataclass
class LatentState:
    z: torch.Tensor  # (C, H, W)
    timestep: int

    def detach(self):
        return LatentState(self.z.detach().clone(), self.timestep)


@dataclass
class BackendConfig:
    latent_channels: int = 4
    latent_size: int = 8
    image_size: int = 32
    image_channels: int = 3
    timesteps: int = 30
    beta_start: float = 1e-3
    beta_end: float = 0.05
    latent_scale: float = 0.2
    heads: int = 4
    head_dim: int = 8
    text_tokens: int = 8
    attn_gain: float = 0.1
    query_scale: float = 0.3
    noise_std: float = None  # diffusion noise scale in latent units; None = RMS std of fitted latents
    var_floor: float = 0.05  # prior variance floor, relative to noise_std**2
    text_dim: int = TEXT_DIM
    seed: int = 0

    def __post_init__(self):
        if self.timesteps < 1:
            raise ValueError("timesteps must be >= 1")
        if self.image_size % self.latent_size:
            raise ValueError("image_size must be a multiple of latent_size")
        if self.text_dim % self.text_tokens:
            raise ValueError("text_dim must split evenly into text_tokens")

    @property
    def cell(self):
        return self.image_size // self.latent_size

    @property
    def latent_shape(self):
        return (self.latent_channels, self.latent_size, self.latent_size)


class LatentBackend:
    """Interface every backend implements (the toy one and real-model adapters)."""

    config: BackendConfig

    def encode_latent(self, image):
        raise NotImplementedError

    def decode(self, latent):
        raise NotImplementedError

    def attention(self, z, text, t):
        raise NotImplementedError

    def diffusion_step(self, latent, text, t):
        raise NotImplementedError

    def ddim_invert(self, latent, text, steps):
        raise NotImplementedError


class ToyBackend(LatentBackend):
    def __init__(self, config, enc_basis, patch_mean, latent_mean, latent_var, attn_params, noise_std=1.0):
        self.config = config
        self.noise_std = float(noise_std)
        self.enc_basis = enc_basis  # (P, C) orthonormal columns, P = channels*cell*cell
        self.patch_mean = patch_mean  # (P,)
        self.latent_mean = latent_mean  # (C, h, w)
        self.latent_var = latent_var  # (C, h, w)
        self.attn = attn_params  # dict of tensors
        betas = torch.linspace(config.beta_start, config.beta_end, config.timesteps, dtype=DTYPE)
        self.alpha_bar = torch.cat([torch.ones(1, dtype=DTYPE), torch.cumprod(1 - betas, 0)])

    # ---- construction ----

    @classmethod
    def fit(cls, images, config=None):
        """Fit the autoencoder and the Gaussian latent prior on ``images``."""
        config = config or BackendConfig()
        if isinstance(images[0], ImageSample):
            images = np.stack([im.pixels for im in images])
        x = torch.as_tensor(np.asarray(images), dtype=DTYPE)
        if x.shape[1:] != (config.image_channels, config.image_size, config.image_size):
            raise DimensionError(f"images of shape {tuple(x.shape[1:])} do not match backend config")
        P = cls._to_patches(x, config.cell).reshape(-1, config.image_channels * config.cell**2)
        mean = P.mean(0)
        _, s, vt = torch.linalg.svd(P - mean, full_matrices=False)
        rank = int((s > s[0] * 1e-8).sum())
        basis = vt[: min(rank, config.latent_channels)].T
        if basis.shape[1] < config.latent_channels:
            basis = cls._complete_basis(basis, config)
        g = torch.Generator().manual_seed(config.seed)
        d = config.heads * config.head_dim
        tok = config.text_dim // config.text_tokens
        attn = {
            "w_q": torch.randn(d, config.latent_channels, generator=g, dtype=DTYPE) * config.query_scale,
            "w_k": torch.randn(d, tok, generator=g, dtype=DTYPE) / np.sqrt(tok),
            "w_v": torch.randn(d, tok, generator=g, dtype=DTYPE) / np.sqrt(tok),
            "null_k": torch.randn(d, generator=g, dtype=DTYPE),
            "null_v": torch.zeros(d, dtype=DTYPE),
            "w_o": torch.randn(config.latent_channels, d, generator=g, dtype=DTYPE) / np.sqrt(d),
        }
        backend = cls(config, basis, mean, None, None, attn)
        z = backend._encode(x)
        backend.latent_mean = z.mean(0)
        var = z.var(0, unbiased=False)
        if config.noise_std is None:
            backend.noise_std = float(var.mean().sqrt())
        else:
            backend.noise_std = float(config.noise_std)
        # floor keeps every denoising step invertible in directions the data never uses
        backend.latent_var = var.clamp_min(config.var_floor * backend.noise_std**2)
        return backend

    @staticmethod
    def _complete_basis(basis, config):
        # deterministic fill-in directions: per-channel vertical then horizontal ramps
        c, cell = config.image_channels, config.cell
        ramp = torch.linspace(-1, 1, cell, dtype=DTYPE)
        extra = []
        for r in (ramp[:, None].expand(cell, cell), ramp[None, :].expand(cell, cell)):
            for ch in range(c):
                v = torch.zeros(c, cell, cell, dtype=DTYPE)
                v[ch] = r
                extra.append(v.reshape(-1))
        cols = [basis[:, i] for i in range(basis.shape[1])]
        for v in extra:
            if len(cols) == config.latent_channels:
                break
            for u in cols:
                v = v - (v @ u) * u
            if v.norm() > 1e-8:
                cols.append(v / v.norm())
        return torch.stack(cols, 1)

    @staticmethod
    def _to_patches(x, cell):
        # (N, c, H, W) -> (N, gh, gw, c*cell*cell)
        n, c, H, W = x.shape
        x = x.reshape(n, c, H // cell, cell, W // cell, cell)
        return x.permute(0, 2, 4, 1, 3, 5).reshape(n, H // cell, W // cell, c * cell * cell)

    @staticmethod
    def _from_patches(p, c, cell):
        n, gh, gw, _ = p.shape
        x = p.reshape(n, gh, gw, c, cell, cell).permute(0, 3, 1, 4, 2, 5)
        return x.reshape(n, c, gh * cell, gw * cell)

    def _encode(self, x):
        p = self._to_patches(x, self.config.cell)
        z = (p - self.patch_mean) @ self.enc_basis * self.config.latent_scale
        return z.permute(0, 3, 1, 2)

    def _decode(self, z):
        p = (z.permute(0, 2, 3, 1) / self.config.latent_scale) @ self.enc_basis.T + self.patch_mean
        return self._from_patches(p, self.config.image_channels, self.config.cell)

    # ---- interface ----

    def encode_latent(self, image):
        x = image.pixels if isinstance(image, ImageSample) else image
        x = torch.as_tensor(np.asarray(x), dtype=DTYPE)
        c = self.config
        if tuple(x.shape) != (c.image_channels, c.image_size, c.image_size):
            raise DimensionError(f"image of shape {tuple(x.shape)} does not match backend config")
        return LatentState(self._encode(x[None])[0], 0)

    def decode(self, latent):
        """Pixels in [0, 1] as a tensor; differentiable except where clamped."""
        z = latent.z if isinstance(latent, LatentState) else latent
        if tuple(z.shape) != self.config.latent_shape:
            raise DimensionError(f"latent of shape {tuple(z.shape)} does not match backend config")
        if not torch.isfinite(z).all():
            raise ValueError("non-finite latent")
        return self._decode(z[None])[0].clamp(0.0, 1.0)

    def _text_tokens(self, text):
        text = torch.as_tensor(text, dtype=DTYPE)
        if text.shape != (self.config.text_dim,):
            raise DimensionError(f"text latent must have shape ({self.config.text_dim},)")
        return text.reshape(self.config.text_tokens, -1)

    def _marginal_std(self, t):
        a = self.alpha_bar[t]
        return torch.sqrt(a * self.latent_var + (1 - a) * self.noise_std**2)

    def _cross_attention(self, z, text, t):
        c = self.config
        tokens = self._text_tokens(text)
        zs = (z - torch.sqrt(self.alpha_bar[t]) * self.latent_mean) / self._marginal_std(t)
        q = torch.einsum("dc,chw->hwd", self.attn["w_q"], zs).reshape(c.latent_size, c.latent_size, c.heads, c.head_dim)
        k = torch.cat([self.attn["null_k"][None], tokens @ self.attn["w_k"].T]).reshape(-1, c.heads, c.head_dim)
        v = torch.cat([self.attn["null_v"][None], tokens @ self.attn["w_v"].T]).reshape(-1, c.heads, c.head_dim)
        logits = torch.einsum("hwsd,lsd->shwl", q, k) / np.sqrt(c.head_dim)
        weights = torch.softmax(logits, dim=-1)  # (S, H, W, L+1)
        out = torch.einsum("shwl,lsd->hwsd", weights, v).reshape(c.latent_size, c.latent_size, -1)
        out = torch.einsum("od,hwd->ohw", self.attn["w_o"], out)
        return weights, out

    def attention(self, z, text, t):
        """Per-head spatial saliency: attention mass on the text (non-null) tokens."""
        z = z.z if isinstance(z, LatentState) else z
        weights, _ = self._cross_attention(z, text, t)
        return 1 - weights[..., 0]

    def predict_noise(self, z, text, t):
        a = self.alpha_bar[t]
        s = self.noise_std
        gauss = torch.sqrt(1 - a) * s * (z - torch.sqrt(a) * self.latent_mean) / (a * self.latent_var + (1 - a) * s**2)
        weights, out = self._cross_attention(z, text, t)
        return gauss + self.config.attn_gain * torch.sqrt(1 - a) * out, 1 - weights[..., 0]

    def _ddim(self, z, eps, t_from, t_to):
        a_from, a_to = self.alpha_bar[t_from], self.alpha_bar[t_to]
        s = self.noise_std
        x0 = (z - torch.sqrt(1 - a_from) * s * eps) / torch.sqrt(a_from)
        return torch.sqrt(a_to) * x0 + torch.sqrt(1 - a_to) * s * eps

    def _check(self, latent):
        if tuple(latent.z.shape) != self.config.latent_shape:
            raise DimensionError(f"latent of shape {tuple(latent.z.shape)} does not match backend config")

    def diffusion_step(self, latent, text, t):
        """Denoise from timestep ``t`` to ``t - 1``. Returns ``(latent, attention_map)``."""
        self._check(latent)
        if latent.timestep != t:
            raise StateError(f"latent is at timestep {latent.timestep}, step requested at {t}")
        if not 1 <= t <= self.config.timesteps:
            raise StateError(f"timestep {t} outside 1..{self.config.timesteps}")
        eps, attn = self.predict_noise(latent.z, text, t)
        return LatentState(self._ddim(latent.z, eps, t, t - 1), t - 1), attn

    def _step_gain(self, t):
        # d(step)/dz of the Gaussian part, elementwise
        a, a_prev = self.alpha_bar[t], self.alpha_bar[t - 1]
        k = (1 - a) * self.noise_std**2 / (a * self.latent_var + (1 - a) * self.noise_std**2)
        k = k / torch.sqrt(1 - a)
        return torch.sqrt(a_prev / a) * (1 - torch.sqrt(1 - a) * k) + torch.sqrt(1 - a_prev) * k

    @torch.no_grad()
    def invert_step(self, latent, text, max_iter=100, tol=1e-13):
        """One DDIM inversion step ``t -> t + 1``, refined until it is an exact preimage."""
        t = latent.timestep + 1
        eps, _ = self.predict_noise(latent.z, text, latent.timestep)
        z = self._ddim(latent.z, eps, latent.timestep, t)
        gain = self._step_gain(t)
        for _ in range(max_iter):
            resid = latent.z - self.diffusion_step(LatentState(z, t), text, t)[0].z
            z = z + resid / gain
            if resid.abs().max() < tol:
                break
        return LatentState(z, t)

    def ddim_invert(self, latent, text, steps):
        """Apply the inversion step ``steps`` times starting from a timestep-0 latent."""
        self._check(latent)
        if latent.timestep != 0:
            raise StateError("inversion starts from a timestep-0 latent")
        if steps < 0 or steps > self.config.timesteps:
            raise ValueError(f"steps={steps} outside 0..{self.config.timesteps}")
        out = latent.detach()
        for _ in range(steps):
            out = self.invert_step(out, text)
        return out

    def denoise(self, latent, text, steps):
        out = latent
        for _ in range(steps):
            out, _ = self.diffusion_step(out, text, out.timestep)
        return out

    # ---- persistence ----

    def state_arrays(self):
        arrays = {
            "enc_basis": self.enc_basis,
            "patch_mean": self.patch_mean,
            "latent_mean": self.latent_mean,
            "latent_var": self.latent_var,
            "noise_std": torch.tensor([self.noise_std], dtype=DTYPE),
        }
        arrays.update({f"attn.{k}": v for k, v in self.attn.items()})
        return {k: v.numpy() for k, v in arrays.items()}

    @classmethod
    def from_arrays(cls, arrays, config):
        t = {k: torch.from_numpy(v) for k, v in arrays.items()}
        attn = {k[5:]: v for k, v in t.items() if k.startswith("attn.")}
        return cls(
            config, t["enc_basis"], t["patch_mean"], t["latent_mean"], t["latent_var"], attn, float(t["noise_std"][0])
        )

"""Text-guided targeted attack in diffusion latent space.

The benign image is encoded and DDIM-inverted, then denoised step by step;
after every denoising step the current latent is nudged by one AdamW update
on a weighted sum of

* an attack term pulling the latent's hash-space reading toward the guide
  vector of the target text (per-bit cross-entropy, L1 gap and a margin
  hinge on the dot product),
* a reconstruction term tying the latent to the benign trajectory and
  penalizing spatial roughness,
* the spatial variance of the cross-attention saliency maps.
"""

import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
import torch

from . import checkpoint
from .backend import LatentState, StateError
from .hash_model import DTYPE
from .hash_space import DimensionError

CLAMP_EPS = 1e-6


class DivergenceError(RuntimeError):
    def __init__(self, step, value):
        super().__init__(f"non-finite objective {value} at step {step}")
        self.step = step


@dataclass
class AttackConfig:
    kappa1: float = 15.0
    kappa2: float = 1.0
    kappa3: float = 8.0
    margin: float = None  # defaults to 0.2 * k
    steps: int = 30
    lr: float = 1e-3
    weight_decay: float = 0.0
    betas: tuple = (0.9, 0.999)
    pixel_eps: float = None  # optional L-inf clamp around the benign image after decoding
    seed: int = 0

    def __post_init__(self):
        if min(self.kappa1, self.kappa2, self.kappa3) < 0:
            raise ValueError("loss weights must be non-negative")
        if max(self.kappa1, self.kappa2, self.kappa3) <= 0:
            raise ValueError("at least one loss weight must be positive")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.margin is not None and self.margin <= 0:
            raise ValueError("margin must be positive")
        self.betas = tuple(self.betas)

    def margin_for(self, k):
        return 0.2 * k if self.margin is None else self.margin


# ---- losses ----

def loss_distance(guide, code):
    """Per-bit binary cross-entropy between (1+guide)/2 and (1+code)/2, averaged over bits."""
    guide, code = torch.as_tensor(guide, dtype=DTYPE), torch.as_tensor(code, dtype=DTYPE)
    if guide.shape != code.shape:
        raise DimensionError(f"guide {tuple(guide.shape)} and code {tuple(code.shape)} differ")
    for name, v in (("guide", guide), ("code", code)):
        if (v.abs() > 1 + 1e-9).any():
            raise ValueError(f"{name} entries must lie in [-1, 1]")
    q = (1 + guide) / 2
    p = ((1 + code) / 2).clamp(CLAMP_EPS, 1 - CLAMP_EPS)
    return -(q * torch.log(p) + (1 - q) * torch.log(1 - p)).mean()


def loss_path(guide, code, margin):
    """L1 gap plus a hinge that fires when guide . code falls below ``margin``."""
    guide, code = torch.as_tensor(guide, dtype=DTYPE), torch.as_tensor(code, dtype=DTYPE)
    if guide.shape != code.shape:
        raise DimensionError(f"guide {tuple(guide.shape)} and code {tuple(code.shape)} differ")
    return (guide - code).abs().sum() + torch.clamp(margin - guide @ code, min=0)


def loss_attack(distance, path):
    return distance + path


def loss_attention(maps):
    """Mean squared deviation of each head's map from that head's spatial mean."""
    maps = torch.as_tensor(maps, dtype=DTYPE)
    if maps.ndim != 3 or 0 in maps.shape:
        raise DimensionError(f"attention maps must be (heads, H, W), got {tuple(maps.shape)}")
    mu = maps.mean(dim=(1, 2), keepdim=True)
    return ((maps - mu) ** 2).mean()


def loss_recon(z_ref, z):
    """Squared gap to the reference plus squared forward differences of ``z``.

    Neighbor terms falling off the grid are dropped; the sum over cells is
    divided by H*W and then averaged over channels.
    """
    z_ref = z_ref.z if isinstance(z_ref, LatentState) else torch.as_tensor(z_ref, dtype=DTYPE)
    z = z.z if isinstance(z, LatentState) else torch.as_tensor(z, dtype=DTYPE)
    if z_ref.shape != z.shape:
        raise DimensionError(f"latents differ in shape: {tuple(z_ref.shape)} vs {tuple(z.shape)}")
    if z.ndim == 2:
        z_ref, z = z_ref[None], z[None]
    H, W = z.shape[-2:]
    fid = ((z_ref - z) ** 2).sum(dim=(-2, -1))
    tv = ((z[..., 1:, :] - z[..., :-1, :]) ** 2).sum(dim=(-2, -1)) + ((z[..., :, 1:] - z[..., :, :-1]) ** 2).sum(
        dim=(-2, -1)
    )
    return ((fid + tv) / (H * W)).mean()


def total_objective(cfg, attack, recon, attention):
    return cfg.kappa1 * attack + cfg.kappa2 * recon + cfg.kappa3 * attention


# ---- latent reader ----

class LatentProjection(torch.nn.Module):
    """Frozen affine map from a flattened latent into the text-latent space.

    Fitted by ridge regression from clean image latents to their captions'
    text latents, so an image latent read through the alignment network lands
    near where its caption would.
    """

    def __init__(self, weight, z_mean, t_mean):
        super().__init__()
        self.register_buffer("weight", torch.as_tensor(weight, dtype=DTYPE))
        self.register_buffer("z_mean", torch.as_tensor(z_mean, dtype=DTYPE))
        self.register_buffer("t_mean", torch.as_tensor(t_mean, dtype=DTYPE))

    @classmethod
    def fit(cls, latents, text_latents, ridge=10.0):
        Z = torch.as_tensor(np.asarray(latents), dtype=DTYPE).reshape(len(latents), -1)
        T = torch.as_tensor(np.asarray(text_latents), dtype=DTYPE)
        zm, tm = Z.mean(0), T.mean(0)
        Zc, Tc = Z - zm, T - tm
        gram = Zc.T @ Zc
        lam = ridge * gram.diagonal().mean()
        W = torch.linalg.solve(gram + lam * torch.eye(gram.shape[0], dtype=DTYPE), Zc.T @ Tc).T
        return cls(W, zm, tm)

    def forward(self, z):
        return (z.reshape(-1) - self.z_mean) @ self.weight.T + self.t_mean


def latent_code(head, projection, z):
    """Differentiable hash-space reading of a latent: head(projection(z))."""
    _, code = head(projection(z))
    return code


# ---- attack loop ----

@dataclass
class AttackResult:
    pixels: np.ndarray
    latent: LatentState
    guide: np.ndarray
    trace: dict = field(default_factory=dict)
    code: np.ndarray = None  # sign(H(x')) when a hash model was supplied
    seconds: float = 0.0
    baseline_hamming: float = None  # latent-path distance of the unperturbed trajectory's end point

    def to_json(self):
        return {
            "guide": self.guide.tolist(),
            "code": None if self.code is None else self.code.tolist(),
            "seconds": self.seconds,
            "baseline_hamming": self.baseline_hamming,
            "trace": self.trace,
        }

    def save(self, out_dir, stem="attack"):
        """Writes ``<stem>.json`` (traces), ``<stem>.png`` (image) and ``<stem>_latent.npz``."""
        from pathlib import Path

        from PIL import Image

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / f"{stem}.json", "w") as f:
            json.dump(self.to_json(), f, indent=1)
        img = np.round(np.clip(self.pixels, 0, 1).transpose(1, 2, 0) * 255).astype(np.uint8)
        Image.fromarray(img).save(out / f"{stem}.png")
        checkpoint.save_arrays(out / f"{stem}_latent.npz", {"z": self.latent.z}, {"timestep": self.latent.timestep})
        return out


def load_attack_latent(path):
    arrays, meta = checkpoint.load_arrays(path)
    return LatentState(torch.from_numpy(arrays["z"]), meta["timestep"])


def _sign(v):
    return torch.where(v >= 0, 1.0, -1.0).to(DTYPE)


def run_attack(benign, benign_text, target_text, han, projection, backend, cfg, hash_model=None):
    """Generate an adversarial image whose hash-space reading moves toward the target text.

    ``han`` maps text latents to ``(feature, guide)``; ``projection`` maps
    latents into the text-latent space so the same head can read them.
    ``hash_model``, if given, is only used to report the decoded image's code.
    """
    t0 = time.perf_counter()
    benign_text = torch.as_tensor(np.asarray(benign_text), dtype=DTYPE)
    target_text = torch.as_tensor(np.asarray(target_text), dtype=DTYPE)
    T = cfg.steps
    if T > backend.config.timesteps:
        raise StateError(f"{T} attack steps exceed the backend's {backend.config.timesteps} timesteps")

    with torch.no_grad():
        z0 = backend.encode_latent(benign)
        _, guide = han(target_text)
        k = guide.shape[-1]
        margin = cfg.margin_for(k)
        zT = backend.ddim_invert(z0, benign_text, T)
        # unperturbed trajectory, reference for the reconstruction term
        ref = [zT.z]
        cur = zT
        for _ in range(T):
            cur, _ = backend.diffusion_step(cur, benign_text, cur.timestep)
            ref.append(cur.z)
        baseline = ((_sign(latent_code(han, projection, cur.z)) - _sign(guide)).abs().sum() / 2).item()

    trace = {key: [] for key in ("distance", "path", "attack", "recon", "attention", "total", "hamming")}
    param = zT.z.clone().requires_grad_(True)
    opt = torch.optim.AdamW([param], lr=cfg.lr, betas=cfg.betas, weight_decay=cfg.weight_decay)
    timestep = zT.timestep

    for i in range(1, T + 1):
        with torch.no_grad():
            stepped, _ = backend.diffusion_step(LatentState(param.detach(), timestep), benign_text, timestep)
            param.copy_(stepped.z)
        timestep = stepped.timestep

        code = latent_code(han, projection, param)
        dist = loss_distance(guide, code)
        path = loss_path(guide, code, margin)
        attack = loss_attack(dist, path)
        recon = loss_recon(ref[i], param)
        attn = loss_attention(backend.attention(param, benign_text, timestep))
        total = total_objective(cfg, attack, recon, attn)
        if not torch.isfinite(total):
            raise DivergenceError(i, total.item())

        opt.zero_grad()
        total.backward()
        opt.step()

        with torch.no_grad():
            ham = ((_sign(latent_code(han, projection, param)) - _sign(guide)).abs().sum() / 2).item()
        for key, v in zip(trace, (dist, path, attack, recon, attn, total)):
            trace[key].append(v.item())
        trace["hamming"].append(ham)

    with torch.no_grad():
        final = LatentState(param.detach().clone(), timestep)
        pixels = backend.decode(final).numpy()
        if cfg.pixel_eps is not None:
            x = benign.pixels
            pixels = np.clip(pixels, x - cfg.pixel_eps, x + cfg.pixel_eps)
        code = None
        if hash_model is not None:
            out = hash_model(torch.as_tensor(pixels, dtype=DTYPE)[None])[0]
            code = _sign(out).numpy().astype(np.int8)
            trace["decoded_hamming"] = float(np.abs(code - _sign(guide).numpy()).sum() / 2)
    return AttackResult(pixels, final, guide.numpy(), trace, code, time.perf_counter() - t0, baseline)


def attack_config_dict(cfg):
    d = asdict(cfg)
    d["betas"] = list(cfg.betas)
    return d


def moving_average(values, window):
    v = np.asarray(values, dtype=np.float64)
    if v.size < window:
        return v.copy()
    return np.convolve(v, np.ones(window) / window, mode="valid")


def is_finite(x):
    return math.isfinite(x)

import json
import math

import numpy as np
import oracles
import pytest
import torch

from hashattack.attack import (
    AttackConfig,
    DivergenceError,
    loss_attack,
    loss_attention,
    loss_distance,
    loss_path,
    loss_recon,
    load_attack_latent,
    run_attack,
    total_objective,
)
from hashattack.backend import StateError
from hashattack.checkpoint import params_checksum
from hashattack.hash_space import DimensionError

D = torch.float64


# ---- loss examples ----

def test_distance_examples():
    bt = torch.tensor([1.0, -1.0, 1.0, -1.0], dtype=D)
    assert loss_distance(bt, bt).item() <= 1e-5
    assert loss_distance(torch.ones(3, dtype=D), torch.zeros(3, dtype=D)).item() == pytest.approx(math.log(2))
    assert loss_distance(bt, -bt).item() == pytest.approx(-math.log(1e-6), rel=1e-6)


def test_distance_rejects_out_of_range():
    with pytest.raises(ValueError):
        loss_distance(torch.tensor([1.5], dtype=D), torch.tensor([0.0], dtype=D))
    with pytest.raises(DimensionError):
        loss_distance(torch.ones(3, dtype=D), torch.ones(4, dtype=D))


def test_path_examples():
    k = 16
    bt = torch.tensor(np.random.default_rng(0).choice([-1.0, 1.0], k), dtype=D)
    assert loss_path(bt, bt, 0.2 * k).item() == 0
    assert loss_path(bt, torch.zeros(k, dtype=D), 0.2 * k).item() == pytest.approx(1.2 * k)
    bz = 0.5 * bt  # dot = 8 >= M = 3.2: hinge inactive
    assert loss_path(bt, bz, 3.2).item() == pytest.approx(0.5 * k)


def test_attack_sum():
    assert loss_attack(0.0, 0.0) == 0
    assert loss_attack(1.5, 2.5) == 4.0


def test_attention_examples():
    assert loss_attention(torch.full((3, 4, 4), 0.7, dtype=D)).item() == 0
    assert loss_attention(torch.tensor([[[0.0, 2.0]]], dtype=D)).item() == pytest.approx(1.0)
    A = torch.rand(2, 3, 3, dtype=D)
    assert loss_attention(3 * A).item() == pytest.approx(9 * loss_attention(A).item())


def test_recon_examples():
    c = torch.full((2, 4, 4), 0.3, dtype=D)
    assert loss_recon(c, c).item() == 0
    z0 = torch.zeros(1, 3, 3, dtype=D)
    z = z0.clone()
    z[0, 1, 1] = 1.0
    # fidelity: 1 (centre); TV: 4 edges touch the bump, each contributes 1; /9 cells
    assert loss_recon(z0, z).item() == pytest.approx((1 + 4) / 9)
    assert loss_recon(c, c + 0.5).item() == pytest.approx(0.25)
    with pytest.raises(DimensionError):
        loss_recon(torch.zeros(1, 3, 3), torch.zeros(1, 3, 4))


def test_total_objective_examples():
    assert total_objective(AttackConfig(15, 1, 8), 1, 1, 1) == 24
    assert total_objective(AttackConfig(15, 0, 8), 1, 1e9, 1) == 23
    with pytest.raises(ValueError):
        AttackConfig(0, 0, 0)
    with pytest.raises(ValueError):
        AttackConfig(lr=0)


# ---- oracle agreement ----

@pytest.mark.parametrize("seed", range(3))
def test_losses_match_loop_oracles(seed):
    rng = np.random.default_rng(seed)
    for _ in range(30):
        k = int(rng.integers(2, 20))
        bt, bz = rng.uniform(-1, 1, k), rng.uniform(-1, 1, k)
        M = float(rng.uniform(0, k))
        assert abs(loss_distance(bt, bz).item() - oracles.loss_distance(bt, bz)) < 1e-10
        assert abs(loss_path(bt, bz, M).item() - oracles.loss_path(bt, bz, M)) < 1e-10
        S, H, W = rng.integers(1, 4, 3)
        A = rng.random((S, H, W))
        assert abs(loss_attention(A).item() - oracles.loss_attention(A.tolist())) < 1e-10
        C = int(rng.integers(1, 4))
        z0, z = rng.normal(size=(2, C, H, W))
        assert abs(loss_recon(z0, z).item() - oracles.loss_recon(z0.tolist(), z.tolist())) < 1e-10


# ---- gradients ----

def grad_rel_err(f, x, n_coords=12, seed=0):
    x = x.detach().clone().requires_grad_(True)
    g = torch.autograd.grad(f(x), x)[0].reshape(-1).numpy()
    coords = np.random.default_rng(seed).choice(x.numel(), size=min(n_coords, x.numel()), replace=False)
    fd = np.array(oracles.central_fd(f, x.detach(), coords))
    return np.max(np.abs(g[coords] - fd) / np.maximum(np.abs(fd), 1e-6))


def test_distance_and_path_gradients_away_from_kinks():
    rng = np.random.default_rng(1)
    bt = torch.tensor(rng.choice([-1.0, 1.0], 16), dtype=D)
    bz = torch.tensor(rng.uniform(-0.8, 0.8, 16), dtype=D)
    assert grad_rel_err(lambda v: loss_distance(bt, v), bz) < 1e-4
    # |bz| < 0.8 < |bt| keeps every |bt - bz| term off its kink
    assert grad_rel_err(lambda v: loss_path(bt, v, 0.2 * 16), bz) < 1e-4
    assert grad_rel_err(lambda v: loss_path(bt, v, 20.0), bz) < 1e-4  # hinge strictly active


def test_recon_and_attention_gradients():
    rng = np.random.default_rng(2)
    z0 = torch.tensor(rng.normal(size=(4, 5, 5)), dtype=D)
    z = torch.tensor(rng.normal(size=(4, 5, 5)), dtype=D)
    assert grad_rel_err(lambda v: loss_recon(z0, v), z) < 1e-4
    A = torch.tensor(rng.random((3, 4, 4)), dtype=D)
    assert grad_rel_err(loss_attention, A) < 1e-4


def test_total_objective_gradient_through_backend(backend, reader, text_latents):
    han, proj = reader
    zb, zq, zt = text_latents
    _, guide = han(torch.as_tensor(zt[0]))
    cfg = AttackConfig()
    ref = torch.as_tensor(np.random.default_rng(3).normal(size=(4, 8, 8)) * 0.1, dtype=D)
    text = torch.as_tensor(zq[0])

    def f(z):
        code = han(proj(z))[1]
        att = loss_attack(loss_distance(guide, code), loss_path(guide, code, cfg.margin_for(16)))
        return total_objective(cfg, att, loss_recon(ref, z), loss_attention(backend.attention(z, text, 5)))

    z = ref + 0.05 * torch.as_tensor(np.random.default_rng(4).normal(size=(4, 8, 8)), dtype=D)
    assert grad_rel_err(f, z, n_coords=16) < 1e-4


# ---- run_attack mechanics ----

def test_run_attack_traces_and_frozen_models(small_data, backend, reader, text_latents, small_hash_model):
    han, proj = reader
    _, queries, targets = small_data
    _, zq, zt = text_latents
    before = params_checksum(han), params_checksum(small_hash_model), params_checksum(proj)
    cfg = AttackConfig(steps=6)
    res = run_attack(queries[0], zq[0], zt[0], han, proj, backend, cfg, hash_model=small_hash_model)
    for key in ("distance", "path", "attack", "recon", "attention", "total", "hamming"):
        assert len(res.trace[key]) == 6
    assert 0 <= res.pixels.min() and res.pixels.max() <= 1
    assert res.latent.timestep == 0
    assert set(np.unique(res.code)) <= {-1, 1}
    assert (params_checksum(han), params_checksum(small_hash_model), params_checksum(proj)) == before


def test_run_attack_zero_steps_is_reconstruction(small_data, backend, reader, text_latents):
    han, proj = reader
    q = small_data[1][1]
    _, zq, zt = text_latents
    res = run_attack(q, zq[1], zt[1], han, proj, backend, AttackConfig(steps=0))
    np.testing.assert_allclose(res.pixels, q.pixels, atol=1e-10)
    assert all(len(v) == 0 for v in res.trace.values())


def test_run_attack_rejects_too_many_steps(small_data, backend, reader, text_latents):
    han, proj = reader
    _, zq, zt = text_latents
    with pytest.raises(StateError):
        run_attack(small_data[1][0], zq[0], zt[0], han, proj, backend, AttackConfig(steps=backend.config.timesteps + 1))


def test_run_attack_divergence_reports_step(small_data, backend, reader, text_latents):
    han, proj = reader
    _, zq, zt = text_latents

    class NanAttention:
        def __init__(self, inner):
            self.inner = inner
            self.config = inner.config

        def __getattr__(self, name):
            return getattr(self.inner, name)

        def attention(self, z, text, t):
            return self.inner.attention(z, text, t) * float("nan")

    with pytest.raises(DivergenceError) as e:
        run_attack(small_data[1][0], zq[0], zt[0], han, proj, NanAttention(backend), AttackConfig(steps=3))
    assert e.value.step == 1


def test_attack_result_serialization(tmp_path, small_data, backend, reader, text_latents, small_hash_model):
    han, proj = reader
    _, zq, zt = text_latents
    res = run_attack(small_data[1][0], zq[0], zt[0], han, proj, backend, AttackConfig(steps=2), small_hash_model)
    res.save(tmp_path, "q0")
    data = json.loads((tmp_path / "q0.json").read_text())
    assert data["trace"]["total"] == res.trace["total"]
    assert (tmp_path / "q0.png").exists()
    back = load_attack_latent(tmp_path / "q0_latent.npz")
    assert back.timestep == res.latent.timestep
    assert torch.equal(back.z, res.latent.z)

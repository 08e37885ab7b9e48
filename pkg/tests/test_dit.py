import pytest
import torch

from latentmusic.conditioning import TimingCondition
from latentmusic.dit import ConditioningBundle, DiffusionTransformer, DitBlock, DitConfig, rope_apply
from latentmusic.errors import ConfigurationError, DataError
from latentmusic.nn import save_checkpoint, load_checkpoint
from latentmusic.nn.checkpoint import module_tensors
from latentmusic.nn.gradcheck import grad_check_module

torch.manual_seed(0)


def tiny_config(**kw) -> DitConfig:
    base = dict(latent_channels=4, width=32, depth=2, heads=4, text_dim=8, timing_sin_dim=16, timestep_sin_dim=16)
    base.update(kw)
    return DitConfig(**base)


def bundle_for(batch: int, text_dim: int = 8, t_text: int = 3, total: float = 8.0, window: float = 10.0):
    return ConditioningBundle(
        text_tokens=torch.randn(batch, t_text, text_dim),
        text_mask=torch.ones(batch, t_text, dtype=torch.bool),
        timing=[TimingCondition(0.0, total, window)] * batch,
    )


class TestRope:
    def test_position_zero_identity(self):
        x = torch.randn(2, 4, 5, 8)
        pos = torch.zeros(5)
        assert torch.allclose(rope_apply(x, pos), x, atol=1e-7)

    def test_upper_half_unchanged(self):
        x = torch.randn(1, 2, 6, 8)
        out = rope_apply(x, torch.arange(6).float() * 3.0)
        assert torch.equal(out[..., 4:], x[..., 4:])

    def test_relative_position_property(self):
        torch.manual_seed(1)
        q = torch.randn(8, dtype=torch.float64)
        k = torch.randn(8, dtype=torch.float64)
        for shift in (1.0, 5.0, 13.5):
            m, n = 3.0, 7.0
            q1 = rope_apply(q[None, None, :], torch.tensor([m], dtype=torch.float64))
            k1 = rope_apply(k[None, None, :], torch.tensor([n], dtype=torch.float64))
            q2 = rope_apply(q[None, None, :], torch.tensor([m + shift], dtype=torch.float64))
            k2 = rope_apply(k[None, None, :], torch.tensor([n + shift], dtype=torch.float64))
            dot1 = (q1 * k1).sum()
            dot2 = (q2 * k2).sum()
            assert float((dot1 - dot2).abs()) < 1e-6

    def test_odd_rotated_half_rejected(self):
        x = torch.randn(1, 1, 2, 6)  # rotated half = 3, odd
        with pytest.raises(ConfigurationError):
            rope_apply(x, torch.zeros(2))


class TestDitBlock:
    def test_identity_with_zero_output_projections(self):
        cfg = tiny_config()
        block = DitBlock(cfg)
        with torch.no_grad():
            for lin in (block.self_out, block.cross_out, block.mlp_out):
                lin.weight.zero_()
                lin.bias.zero_()
        x = torch.randn(2, 5, cfg.width)
        ctx = torch.randn(2, 3, cfg.cond_width)
        mask = torch.ones(2, 3, dtype=torch.bool)
        out = block(x, torch.arange(5).float(), ctx, mask)
        assert torch.equal(out, x)

    def test_shape_preserved(self):
        cfg = tiny_config()
        block = DitBlock(cfg)
        for t in (1, 7, 33):
            x = torch.randn(1, t, cfg.width)
            out = block(x, torch.arange(t).float(), torch.randn(1, 2, cfg.cond_width), torch.ones(1, 2, dtype=torch.bool))
            assert out.shape == x.shape

    def test_width_mismatch_rejected(self):
        block = DitBlock(tiny_config())
        with pytest.raises(ConfigurationError):
            block(torch.randn(1, 4, 16), torch.arange(4).float(), torch.randn(1, 2, 32), torch.ones(1, 2, dtype=torch.bool))


class TestDitForward:
    def test_output_shape_matches_input(self):
        cfg = tiny_config(max_frames=512)
        model = DiffusionTransformer(cfg)
        for frames in (8, 64, 333):
            z = torch.randn(2, cfg.latent_channels, frames)
            v = model(z, 0.5, bundle_for(2))
            assert v.shape == z.shape

    def test_initial_prediction_is_zero(self):
        cfg = tiny_config()
        model = DiffusionTransformer(cfg)
        z = torch.randn(1, cfg.latent_channels, 16)
        assert torch.equal(model(z, 0.3, bundle_for(1)), torch.zeros_like(z))

    def test_finite_at_random_weights(self):
        cfg = tiny_config()
        model = DiffusionTransformer(cfg)
        with torch.no_grad():
            model.out_proj.weight.normal_()
        for t in (0.0, 0.25, 0.5, 1.0):
            v = model(torch.randn(1, cfg.latent_channels, 12), t, bundle_for(1))
            assert torch.isfinite(v).all()

    def test_text_condition_changes_output(self):
        cfg = tiny_config()
        model = DiffusionTransformer(cfg)
        with torch.no_grad():
            model.out_proj.weight.normal_()
        z = torch.randn(1, cfg.latent_channels, 10)
        b1 = bundle_for(1)
        b2 = ConditioningBundle(
            text_tokens=b1.text_tokens + 1.0, text_mask=b1.text_mask, timing=b1.timing
        )
        assert not torch.allclose(model(z, 0.5, b1), model(z, 0.5, b2))

    def test_longer_sequences_extrapolate(self):
        cfg = tiny_config(max_frames=2048)
        model = DiffusionTransformer(cfg)
        z_short = torch.randn(1, cfg.latent_channels, 32)
        z_long = torch.randn(1, cfg.latent_channels, 64)
        model(z_short, 0.5, bundle_for(1))
        v = model(z_long, 0.5, bundle_for(1))  # no weight change needed
        assert v.shape == z_long.shape

    def test_frame_capacity_enforced(self):
        cfg = tiny_config(max_frames=16)
        model = DiffusionTransformer(cfg)
        with pytest.raises(DataError):
            model(torch.randn(1, cfg.latent_channels, 17), 0.5, bundle_for(1))

    def test_masked_context_token_has_no_effect(self):
        cfg = tiny_config()
        model = DiffusionTransformer(cfg)
        with torch.no_grad():
            model.out_proj.weight.normal_()
        tokens = torch.randn(1, 4, cfg.text_dim)
        mask = torch.tensor([[True, True, False, True]])
        timing = [TimingCondition(0.0, 6.0, 8.0)]
        z = torch.randn(1, cfg.latent_channels, 9)
        out1 = model(z, 0.4, ConditioningBundle(tokens, mask, timing))
        tokens2 = tokens.clone()
        tokens2[0, 2] = 123.0
        out2 = model(z, 0.4, ConditioningBundle(tokens2, mask, timing))
        assert torch.allclose(out1, out2, atol=1e-7)

    def test_null_text_rows_use_learned_embedding(self):
        cfg = tiny_config()
        model = DiffusionTransformer(cfg)
        with torch.no_grad():
            model.out_proj.weight.normal_()
            model.null_text.normal_()
        z = torch.randn(1, cfg.latent_channels, 8)
        timing = [TimingCondition(0.0, 6.0, 8.0)]
        real = ConditioningBundle(torch.randn(1, 3, cfg.text_dim), torch.ones(1, 3, dtype=torch.bool), timing)
        nulled = ConditioningBundle(real.text_tokens, real.text_mask, timing, null_text=torch.tensor([True]))
        uncond = ConditioningBundle.unconditional(1, cfg.text_dim, timing)
        assert torch.allclose(model(z, 0.5, nulled), model(z, 0.5, uncond), atol=1e-6)
        assert not torch.allclose(model(z, 0.5, nulled), model(z, 0.5, real))

    def test_grad_checkpoint_toggle_matches(self):
        cfg = tiny_config()
        model = DiffusionTransformer(cfg)
        with torch.no_grad():
            model.out_proj.weight.normal_()
        z = torch.randn(1, cfg.latent_channels, 12)
        cond = bundle_for(1)

        model.cfg.grad_checkpoint = False
        out_plain = model(z, 0.5, cond)
        loss_plain = out_plain.square().sum()
        grads_plain = torch.autograd.grad(loss_plain, list(model.parameters()), allow_unused=True)

        model.cfg.grad_checkpoint = True
        out_ckpt = model(z, 0.5, cond)
        loss_ckpt = out_ckpt.square().sum()
        grads_ckpt = torch.autograd.grad(loss_ckpt, list(model.parameters()), allow_unused=True)

        assert torch.allclose(out_plain, out_ckpt, atol=1e-6)
        for g1, g2 in zip(grads_plain, grads_ckpt):
            if g1 is None:
                assert g2 is None or not g2.abs().any()
            else:
                assert torch.allclose(g1, g2, atol=1e-6)


class TestDitGradients:
    def test_tiny_dit_gradcheck(self):
        torch.manual_seed(4)
        cfg = tiny_config(depth=2, width=16, heads=2, text_dim=4, timing_sin_dim=8, timestep_sin_dim=8)
        model = DiffusionTransformer(cfg).double()
        with torch.no_grad():
            model.out_proj.weight.normal_(std=0.2)
        z = torch.randn(1, cfg.latent_channels, 4, dtype=torch.float64)
        cond = ConditioningBundle(
            text_tokens=torch.randn(1, 2, cfg.text_dim, dtype=torch.float64),
            text_mask=torch.ones(1, 2, dtype=torch.bool),
            timing=[TimingCondition(0.0, 3.0, 4.0)],
        )

        report = grad_check_module(
            model,
            lambda m: (m(z, 0.37, cond) ** 2).sum(),
            max_coords_per_tensor=4,
        )
        assert report.max_rel_error < 1e-4, report.per_tensor


class TestDitCheckpointing:
    def test_config_validation_on_load(self, tmp_path):
        cfg = tiny_config()
        model = DiffusionTransformer(cfg)
        path = tmp_path / "dit.ckpt"
        save_checkpoint(path, module_tensors(model), cfg)
        load_checkpoint(path, expected_config=cfg)  # ok
        from latentmusic.errors import CheckpointError

        with pytest.raises(CheckpointError):
            load_checkpoint(path, expected_config=tiny_config(depth=3))

    def test_config_invariants(self):
        with pytest.raises(ConfigurationError):
            DitConfig(width=30, heads=4)  # not divisible
        with pytest.raises(ConfigurationError):
            DitConfig(width=12, heads=4)  # head dim 3 is odd

import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from latentmusic.audio import Waveform
from latentmusic.diffusion import (
    CosineSchedule,
    audio_to_audio_init,
    cfg_combine,
    dpm_solver_pp_sample,
    noise_to,
    predict_eps,
    predict_x0,
    trim_trailing_silence,
    v_target,
)
from latentmusic.errors import SamplerError

torch.manual_seed(0)
SCHED = CosineSchedule()


def gaussian_x0_fn(mu: float, sd: float):
    """Exact posterior-mean denoiser for data ~ N(mu, sd^2)."""

    def x0_fn(z, t):
        tt = torch.tensor(t, dtype=torch.float64)
        a = float(SCHED.alpha(tt))
        s = float(SCHED.sigma(tt))
        return (a * sd**2 * z + s**2 * mu) / (a**2 * sd**2 + s**2)

    return x0_fn


def affine_map_of_sampler(x0_fn, steps):
    """The solver is affine in its input here; recover (A, b) exactly."""
    b = dpm_solver_pp_sample(
        x0_fn, (1,), steps, SCHED, init_latent=torch.zeros(1, dtype=torch.float64), t_start=SCHED.t_max
    )
    ab = dpm_solver_pp_sample(
        x0_fn, (1,), steps, SCHED, init_latent=torch.ones(1, dtype=torch.float64), t_start=SCHED.t_max
    )
    return float(ab - b), float(b)


class TestSchedule:
    def test_endpoints(self):
        t = torch.tensor([0.0, 1.0], dtype=torch.float64)
        assert float(SCHED.alpha(t)[0]) == 1.0
        assert float(SCHED.sigma(t)[0]) == 0.0
        assert abs(float(SCHED.alpha(t)[1])) < 1e-15
        assert float(SCHED.sigma(t)[1]) == pytest.approx(1.0, abs=1e-15)

    def test_variance_preserving_on_grid(self):
        t = SCHED.sampling_grid(200)
        vp = SCHED.alpha(t) ** 2 + SCHED.sigma(t) ** 2
        assert torch.allclose(vp, torch.ones_like(vp), atol=1e-14)

    def test_alpha_strictly_decreasing(self):
        t = torch.linspace(0, 1, 500, dtype=torch.float64)
        a = SCHED.alpha(t)
        assert (a[1:] < a[:-1]).all()

    def test_grid_is_decreasing_and_clamped(self):
        g = SCHED.sampling_grid(50)
        assert float(g[0]) == pytest.approx(SCHED.t_max)
        assert float(g[-1]) == pytest.approx(SCHED.t_min)
        assert (g[1:] < g[:-1]).all()


class TestNoiseTo:
    def test_t0_returns_data(self):
        z0 = torch.randn(2, 3, 4)
        eps = torch.randn(2, 3, 4)
        assert torch.allclose(noise_to(z0, eps, 0.0), z0, atol=1e-7)

    def test_t1_returns_noise(self):
        z0 = torch.randn(2, 3, 4)
        eps = torch.randn(2, 3, 4)
        assert torch.allclose(noise_to(z0, eps, 1.0), eps, atol=1e-6)

    def test_second_moment_monte_carlo(self):
        torch.manual_seed(1)
        z0 = torch.randn(8, dtype=torch.float64)
        t = 0.37
        n = 200_000
        gen = torch.Generator().manual_seed(2)
        eps = torch.randn(n, 8, generator=gen, dtype=torch.float64)
        zt = noise_to(z0.expand(n, 8), eps, t)
        a = float(SCHED.alpha(torch.tensor(t, dtype=torch.float64)))
        s = float(SCHED.sigma(torch.tensor(t, dtype=torch.float64)))
        expected = a**2 * float(z0.pow(2).sum()) + s**2 * 8
        got = float(zt.pow(2).sum(dim=1).mean())
        assert got == pytest.approx(expected, rel=0.01)


class TestVParameterization:
    def test_v_at_t0_is_eps(self):
        z0, eps = torch.randn(2, 4), torch.randn(2, 4)
        assert torch.allclose(v_target(z0, eps, 0.0), eps, atol=1e-7)

    def test_v_at_t1_is_minus_data(self):
        z0, eps = torch.randn(2, 4), torch.randn(2, 4)
        assert torch.allclose(v_target(z0, eps, 1.0), -z0, atol=1e-6)

    def test_x0_recovery_identity(self):
        torch.manual_seed(2)
        for _ in range(20):
            z0, eps = torch.randn(3, 5), torch.randn(3, 5)
            t = float(torch.rand(()))
            zt = noise_to(z0, eps, t)
            v = v_target(z0, eps, t)
            assert torch.allclose(predict_x0(zt, v, t), z0, atol=1e-6)
            assert torch.allclose(predict_eps(zt, v, t), eps, atol=1e-6)

    def test_reconstruction_identity_any_v(self):
        torch.manual_seed(3)
        for _ in range(20):
            zt = torch.randn(2, 6)
            v = torch.randn(2, 6)
            t = float(torch.rand(()))
            a = SCHED.alpha(torch.tensor(t))
            s = SCHED.sigma(torch.tensor(t))
            lhs = a * predict_x0(zt, v, t) + s * predict_eps(zt, v, t)
            assert torch.allclose(lhs, zt, atol=1e-6)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(min_value=0.0, max_value=1.0))
    def test_conversions_mutually_inverse(self, t):
        torch.manual_seed(4)
        z0 = torch.randn(4, dtype=torch.float64)
        eps = torch.randn(4, dtype=torch.float64)
        zt = noise_to(z0, eps, t)
        v = v_target(z0, eps, t)
        x0_hat = predict_x0(zt, v, t)
        eps_hat = predict_eps(zt, v, t)
        assert torch.allclose(x0_hat, z0, atol=1e-6)
        assert torch.allclose(eps_hat, eps, atol=1e-6)
        assert torch.allclose(v_target(x0_hat, eps_hat, t), v, atol=1e-6)


class TestCfg:
    def test_scale_one_is_conditional(self):
        vc, vu = torch.randn(2, 3), torch.randn(2, 3)
        assert torch.equal(cfg_combine(vc, vu, 1.0), vu + (vc - vu))
        assert torch.allclose(cfg_combine(vc, vu, 1.0), vc, atol=1e-7)

    def test_scale_zero_is_unconditional(self):
        vc, vu = torch.randn(2, 3), torch.randn(2, 3)
        assert torch.allclose(cfg_combine(vc, vu, 0.0), vu, atol=1e-7)

    def test_equal_branches_fixed_point(self):
        v = torch.randn(2, 3)
        for s in (0.0, 1.0, 7.0, 13.5):
            assert torch.allclose(cfg_combine(v, v.clone(), s), v, atol=1e-7)

    def test_affine_in_scale(self):
        vc, vu = torch.randn(4), torch.randn(4)
        s1, s2 = 2.0, 5.0
        mid = cfg_combine(vc, vu, (s1 + s2) / 2)
        avg = 0.5 * (cfg_combine(vc, vu, s1) + cfg_combine(vc, vu, s2))
        assert torch.allclose(mid, avg, atol=1e-6)


class TestSampler:
    def test_constant_denoiser_exact(self):
        c = 1.234
        fn = lambda z, t: torch.full_like(z, c)
        for steps in (1, 3, 10, 40):
            out = dpm_solver_pp_sample(fn, (5,), steps, SCHED, seed=0, dtype=torch.float64)
            assert torch.allclose(out, torch.full((5,), c, dtype=torch.float64), atol=1e-12)

    def test_point_mass_ten_steps(self):
        x_star = torch.tensor([0.3, -0.8, 1.1], dtype=torch.float64)
        fn = lambda z, t: x_star.expand_as(z)
        out = dpm_solver_pp_sample(fn, (4, 3), 10, SCHED, seed=1, dtype=torch.float64)
        assert float((out - x_star).abs().max()) < 1e-4

    def test_deterministic_under_seed(self):
        fn = gaussian_x0_fn(0.5, 0.7)
        a = dpm_solver_pp_sample(fn, (6,), 20, SCHED, seed=9, dtype=torch.float64)
        b = dpm_solver_pp_sample(fn, (6,), 20, SCHED, seed=9, dtype=torch.float64)
        c = dpm_solver_pp_sample(fn, (6,), 20, SCHED, seed=10, dtype=torch.float64)
        assert torch.equal(a, b)
        assert not torch.equal(a, c)

    def test_gaussian_moments_at_50_steps(self):
        mu, sd = 0.7, 0.5
        fn = gaussian_x0_fn(mu, sd)
        n = 10_000
        out = dpm_solver_pp_sample(fn, (n, 1), 50, SCHED, seed=123, dtype=torch.float64)
        mean = float(out.mean())
        var = float(out.var(unbiased=True))
        se_mean = sd / math.sqrt(n)
        se_var = sd**2 * math.sqrt(2.0 / (n - 1))
        assert abs(mean - mu) < 3 * se_mean
        assert abs(var - sd**2) < 3 * se_var

    def test_gaussian_error_monotone_in_steps(self):
        # exact affine propagation: no Monte Carlo noise in this check
        mu, sd = 0.7, 0.5
        fn = gaussian_x0_fn(mu, sd)
        errs = []
        for steps in (5, 10, 20, 50):
            a, b = affine_map_of_sampler(fn, steps)
            errs.append(math.hypot(b - mu, abs(a) - sd))
        for e1, e2 in zip(errs, errs[1:]):
            assert e2 <= e1 + 1e-12, errs

    def test_gaussian_error_decreases_5_to_50(self):
        for mu, sd in ((0.0, 1.0), (-1.2, 0.25), (2.0, 1.5)):
            fn = gaussian_x0_fn(mu, sd)
            a5, b5 = affine_map_of_sampler(fn, 5)
            a50, b50 = affine_map_of_sampler(fn, 50)
            e5 = math.hypot(b5 - mu, abs(a5) - sd)
            e50 = math.hypot(b50 - mu, abs(a50) - sd)
            assert e50 < e5

    def test_nonfinite_prediction_aborts_with_step(self):
        def fn(z, t):
            return torch.full_like(z, float("nan"))

        with pytest.raises(SamplerError, match="step 0"):
            dpm_solver_pp_sample(fn, (2,), 5, SCHED, seed=0)


class TestAudioToAudioInit:
    def test_strength_zero_keeps_reference(self):
        ref = torch.randn(1, 4, 8)
        state = audio_to_audio_init(ref, 0.0, seed=0)
        assert torch.allclose(state.latent, ref, atol=1e-7)
        assert state.t == 0.0

    def test_strength_one_ignores_reference(self):
        ref = torch.randn(1, 4, 8, dtype=torch.float64)
        s1 = audio_to_audio_init(ref, 1.0, seed=5)
        s2 = audio_to_audio_init(torch.zeros_like(ref), 1.0, seed=5)
        assert torch.allclose(s1.latent, s2.latent, atol=1e-10)

    def test_deterministic(self):
        ref = torch.randn(1, 4, 8)
        a = audio_to_audio_init(ref, 0.5, seed=7)
        b = audio_to_audio_init(ref, 0.5, seed=7)
        assert torch.equal(a.latent, b.latent)

    def test_sampling_resumes_from_strength(self):
        fn = lambda z, t: torch.zeros_like(z)
        ref = torch.randn(1, 2, 4, dtype=torch.float64)
        state = audio_to_audio_init(ref, 0.5, seed=3)
        out = dpm_solver_pp_sample(
            fn, ref.shape, 10, SCHED, init_latent=state.latent.double(), t_start=state.t
        )
        assert out.shape == ref.shape


class TestTrimTrailingSilence:
    def _wave(self, arr, sr=8000):
        return Waveform(np.asarray(arr, dtype=np.float32), sr)

    def test_exact_zeros_removed(self):
        sr = 8000
        content = 0.5 * np.sin(2 * np.pi * 440 * np.arange(sr) / sr)
        padded = np.concatenate([content, np.zeros(2 * sr)])
        out = trim_trailing_silence(self._wave(padded[None, :]), threshold_db=-60, hold_ms=100)
        win = int(sr * 0.1)
        assert abs(out.samples - sr) <= win

    def test_no_trailing_silence_unchanged(self):
        sr = 8000
        content = 0.5 * np.sin(2 * np.pi * 220 * np.arange(sr) / sr)
        out = trim_trailing_silence(self._wave(content[None, :]))
        assert out.samples == sr

    def test_noise_floor_below_threshold_removed(self):
        sr = 8000
        rng = np.random.default_rng(0)
        sine = 0.5 * np.sin(2 * np.pi * 440 * np.arange(sr) / sr)
        floor = 10 ** (-80 / 20) * rng.standard_normal(sr)  # about -80 dBFS RMS
        sig = np.concatenate([sine, floor])
        out = trim_trailing_silence(self._wave(sig[None, :]), threshold_db=-60, hold_ms=100)
        win = int(sr * 0.1)
        assert abs(out.samples - sr) <= win

    def test_all_silent_keeps_one_window(self):
        sr = 8000
        out = trim_trailing_silence(self._wave(np.zeros((1, sr))), threshold_db=-60, hold_ms=50)
        assert out.samples == int(sr * 0.05)

    def test_interior_silence_preserved(self):
        sr = 8000
        sine = 0.5 * np.sin(2 * np.pi * 440 * np.arange(sr) / sr)
        sig = np.concatenate([sine, np.zeros(sr), sine, np.zeros(sr)])
        out = trim_trailing_silence(self._wave(sig[None, :]), threshold_db=-60, hold_ms=100)
        assert out.samples >= 3 * sr - int(sr * 0.1)

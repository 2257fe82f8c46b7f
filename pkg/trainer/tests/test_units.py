import numpy as np
import pytest
import torch

torch.set_num_threads(1)

from gcfsnet_trainer import container, stft
from gcfsnet_trainer.clipping import AutoClip, autoclip_threshold
from gcfsnet_trainer.config import LossConfig, ModelConfig, SceneRatios, TrainConfig
from gcfsnet_trainer.loss import cmse_loss
from gcfsnet_trainer.model import GcfsNet, enhance, fake_quantize
from gcfsnet_trainer.scenes import sample_training_scene
from gcfsnet_trainer.schedule import PlateauTracker, lr_at


class TestAutoclip:
    def test_single_element(self):
        assert autoclip_threshold([5.0], 10.0) == 5.0

    def test_linear_interpolation_percentile(self):
        history = [float(k) for k in range(1, 11)]
        assert autoclip_threshold(history, 10.0) == pytest.approx(1.9)

    def test_equal_norms_no_clipping_effect(self):
        clipper = AutoClip(10.0)
        p = torch.nn.Parameter(torch.ones(4, dtype=torch.float64))
        for _ in range(5):
            p.grad = torch.full((4,), 0.5, dtype=torch.float64)
            norm, threshold = clipper.clip([p])
            assert threshold == pytest.approx(norm)
            np.testing.assert_allclose(p.grad.numpy(), 0.5)

    def test_large_norm_gets_scaled(self):
        clipper = AutoClip(10.0)
        p = torch.nn.Parameter(torch.ones(4, dtype=torch.float64))
        p.grad = torch.ones(4, dtype=torch.float64)
        clipper.clip([p])
        p.grad = torch.full((4,), 100.0, dtype=torch.float64)
        _, threshold = clipper.clip([p])
        assert float(torch.linalg.vector_norm(p.grad)) == pytest.approx(threshold)

    def test_empty_history_rejected(self):
        with pytest.raises(ValueError):
            autoclip_threshold([], 10.0)


class TestSchedule:
    def test_initial_rate(self):
        assert lr_at(0, 0) == pytest.approx(2e-3)

    def test_one_epoch_decay(self):
        assert lr_at(1, 0) == pytest.approx(1.96e-3)

    def test_plateau_halving(self):
        assert lr_at(10, 1) == pytest.approx(2e-3 * 0.98**10 * 0.5)
        assert lr_at(10, 1) == pytest.approx(8.17e-4, abs=5e-6)

    def test_plateau_tracker_fires_after_patience(self):
        tracker = PlateauTracker(patience=5)
        assert not tracker.update(1.0)
        fires = [tracker.update(2.0) for _ in range(5)]
        assert fires == [False, False, False, False, True]
        assert tracker.events == 1
        assert not tracker.update(0.5)  # improvement resets

    def test_negative_epoch_rejected(self):
        with pytest.raises(ValueError):
            lr_at(-1, 0)


def direct_complex_mse(est: np.ndarray, ref: np.ndarray, cfg: LossConfig) -> float:
    """Independent plain-spectral-MSE oracle: explicit frame loop + np.fft."""
    window = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(cfg.stft_win) / cfg.stft_win)
    total = 0.0
    n_frames = 0
    for ch in range(est.shape[0]):
        for start in range(0, est.shape[1] - cfg.stft_win + 1, cfg.stft_hop):
            fe = np.fft.rfft(est[ch, start : start + cfg.stft_win] * window, cfg.stft_nfft)
            fr = np.fft.rfft(ref[ch, start : start + cfg.stft_win] * window, cfg.stft_nfft)
            total += float(np.sum(np.abs(fr - fe) ** 2))
            n_frames += 1
    return total / (n_frames // est.shape[0])


class TestCmseLoss:
    def test_perfect_estimate_zero(self):
        x = torch.randn(2, 3200, dtype=torch.float64)
        assert float(cmse_loss(x, x)) == pytest.approx(0.0, abs=1e-20)

    def test_silent_estimate_positive(self):
        ref = torch.randn(2, 3200, dtype=torch.float64)
        assert float(cmse_loss(torch.zeros_like(ref), ref)) > 0.0

    def test_c1_alpha1_matches_direct_complex_mse(self):
        rng = np.random.default_rng(0)
        est = rng.standard_normal((2, 1600))
        ref = rng.standard_normal((2, 1600))
        cfg = LossConfig(compression=1.0, alpha=1.0)
        ours = float(cmse_loss(torch.as_tensor(est), torch.as_tensor(ref), cfg))
        oracle = direct_complex_mse(est, ref, cfg)
        assert ours == pytest.approx(oracle, rel=1e-9)

    def test_bad_config_rejected(self):
        with pytest.raises(ValueError):
            LossConfig(compression=0.0)
        with pytest.raises(ValueError):
            LossConfig(alpha=1.5)


class TestSceneSampling:
    def test_class_frequencies(self):
        rng = np.random.default_rng(1)
        ratios = SceneRatios()
        draws = [sample_training_scene(rng, ratios)["class"] for _ in range(10_000)]
        for name, target in (("speech_only", 0.30), ("noise_only", 0.30), ("both", 0.40)):
            freq = draws.count(name) / len(draws)
            assert abs(freq - target) < 0.02, (name, freq)

    def test_interferer_azimuth_constraints(self):
        rng = np.random.default_rng(2)
        for _ in range(500):
            spec = sample_training_scene(rng)
            speakers = [i["azimuth"] for i in spec["interferers"]
                        if i["signal"]["kind"] == "speech_noise"]
            assert all(abs(a) >= 20.0 for a in speakers)
            if len(speakers) == 2:
                assert abs(speakers[0] - speakers[1]) >= 10.0

    def test_target_azimuth_uniform(self):
        from scipy.stats import kstest

        rng = np.random.default_rng(3)
        azimuths = [sample_training_scene(rng)["target"]["azimuth"]
                    for _ in range(10_000)]
        assert all(-10.0 <= a <= 10.0 for a in azimuths)
        result = kstest(azimuths, "uniform", args=(-10.0, 20.0))
        assert result.pvalue > 0.01

    def test_snr_and_level_ranges(self):
        rng = np.random.default_rng(4)
        specs = [sample_training_scene(rng) for _ in range(2000)]
        snrs = [s["better_ear_snr"] for s in specs]
        assert min(snrs) >= -8.0 and max(snrs) <= 8.0
        levels = np.array([s["level_dbfs"] for s in specs])
        assert abs(np.mean(levels) + 28.0) < 1.0
        assert abs(np.std(levels) - 10.0) < 1.0

    def test_rejection_sampling_failure(self):
        class RiggedRng:
            def random(self):
                return 0.1  # speech_only class

            def uniform(self, lo, hi):
                return 0.0  # every azimuth lands in the exclusion cone

            def integers(self, lo, hi):
                return 0

            def normal(self, mu, sigma):
                return mu

        with pytest.raises(RuntimeError, match="rejection"):
            sample_training_scene(RiggedRng())


class TestStft:
    def test_roundtrip_delay_is_window_len(self):
        rng = np.random.default_rng(5)
        x = torch.as_tensor(rng.standard_normal((2, 16000)))
        out = stft.synthesize(stft.analyze(x)).numpy()
        err = out[:, 64:] - x.numpy()[:, :-64]
        assert 10 * np.log10(np.sum(err**2) / np.sum(x.numpy() ** 2)) < -250

    def test_mini_params_roundtrip(self):
        # without padding the round-trip delay is window_len - hop
        params = stft.StftParams(window_len=4, hop=2, nfft=4)
        assert params.delay == 2
        assert stft.DEPLOY.delay == 64
        rng = np.random.default_rng(6)
        x = torch.as_tensor(rng.standard_normal((1, 256)))
        out = stft.synthesize(stft.analyze(x, params), params).numpy()
        d = params.delay
        np.testing.assert_allclose(out[:, d:], x.numpy()[:, :-d], atol=1e-12)

    def test_bad_params_rejected(self):
        with pytest.raises(ValueError):
            stft.StftParams(window_len=64, hop=16, nfft=128)


class TestFakeQuantize:
    def test_values_land_on_grid(self):
        x = torch.tensor([0.5, -0.25, 0.7531, 1.4], dtype=torch.float64)
        q = fake_quantize(x, 127)
        np.testing.assert_allclose(q.numpy() * 127, np.round(q.numpy() * 127), atol=1e-12)
        assert q[0].item() == pytest.approx(64 / 127)
        assert q[3].item() == pytest.approx(1.0)  # clamped

    def test_straight_through_gradient(self):
        x = torch.tensor([0.3], dtype=torch.float64, requires_grad=True)
        fake_quantize(x, 127).backward()
        assert x.grad.item() == pytest.approx(1.0)

    def test_quantized_forward_close_to_float(self):
        cfg = ModelConfig(variant="monaural", n_bins=3, latent=4, groups=1, hidden=4)
        model = GcfsNet(cfg, seed=7)
        params = stft.StftParams(window_len=4, hop=2, nfft=4)
        rng = np.random.default_rng(8)
        mix = torch.as_tensor(rng.standard_normal((4, 96)))
        with torch.no_grad():
            out_q = enhance(model, mix, quantized=True, stft_params=params)
            out_f = enhance(model, mix, quantized=False, stft_params=params)
        assert float(torch.max(torch.abs(out_q - out_f))) < 1e-2


class TestContainer:
    def make(self, seed=0):
        cfg = ModelConfig(variant="monaural", n_bins=5, latent=8, groups=2, hidden=4)
        model = GcfsNet(cfg, seed=seed)
        return cfg, container.pack(cfg, model.param_arrays(),
                                   float(model.input_scale.detach()),
                                   float(model.r.detach()))

    def test_quantize_rule(self):
        q, clipped = container.quantize_values(np.array([0.5, 1.0, -1.2]), "int8")
        np.testing.assert_array_equal(q, [64, 127, -127])
        assert clipped == 1

    def test_roundtrip(self, tmp_path):
        cfg, packed = self.make()
        path = tmp_path / "t.gcfs"
        container.write(path, packed)
        loaded = container.read(path)
        assert loaded.config == cfg
        for name in packed.tensors:
            np.testing.assert_array_equal(loaded.tensors[name], packed.tensors[name])

    def test_write_read_write_bit_identical(self, tmp_path):
        _, packed = self.make(seed=1)
        p1, p2 = tmp_path / "a.gcfs", tmp_path / "b.gcfs"
        container.write(p1, packed)
        container.write(p2, container.read(p1))
        assert p1.read_bytes() == p2.read_bytes()

    def test_corruption_detected(self, tmp_path):
        _, packed = self.make(seed=2)
        path = tmp_path / "t.gcfs"
        container.write(path, packed)
        blob = bytearray(path.read_bytes())
        blob[40] ^= 0x10
        path.write_bytes(bytes(blob))
        with pytest.raises(ValueError, match="corrupted"):
            container.read(path)

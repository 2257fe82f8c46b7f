import numpy as np
import pytest

from gcfsnet.gcfs import GcfsConfig, GcfsModel, param_shapes
from gcfsnet.weights_io import (
    ContainerFormatError,
    QuantTensor,
    WeightContainer,
    container_from_params,
    dequantize,
    load_container,
    quantize,
    save_container,
    total_clipped,
    validate_container,
)


class TestQuantize:
    def test_zero(self):
        t = quantize(np.array([0.0]), "int8")
        assert t.data[0] == 0

    def test_range_endpoints(self):
        assert quantize(np.array([1.0]), "int8").data[0] == 127
        assert quantize(np.array([-1.0]), "int8").data[0] == -127
        assert quantize(np.array([1.0]), "int16").data[0] == 32767

    def test_half_rounds_away_from_zero(self):
        # 0.5 * 127 = 63.5 -> 64
        t = quantize(np.array([0.5, -0.5]), "int8")
        np.testing.assert_array_equal(t.data, [64, -64])
        assert dequantize(t)[0] == pytest.approx(64 / 127)
        assert dequantize(t)[0] == pytest.approx(0.503937, abs=1e-6)

    def test_clipping_reported_not_fatal(self):
        t = quantize(np.array([1.5, -2.0, 0.3]), "int8")
        assert t.n_clipped == 2
        np.testing.assert_array_equal(t.data, [127, -127, 38])

    def test_int16_value(self):
        t = QuantTensor("x", "int16", np.array([16384], dtype=np.int16))
        assert dequantize(t)[0] == pytest.approx(16384 / 32767)
        assert dequantize(t)[0] == pytest.approx(0.50001526, abs=1e-8)

    def test_roundtrip_error_bound_dense_grid(self):
        # exhaustive 1e6-point grid over the representable range
        v = np.linspace(-1.0, 1.0, 1_000_001)
        err = np.abs(dequantize(quantize(v, "int8")) - v)
        assert err.max() <= 1.0 / 254 + 1e-15

    def test_idempotence(self):
        rng = np.random.default_rng(0)
        v = rng.uniform(-1, 1, 10000)
        q1 = quantize(v, "int8")
        q2 = quantize(dequantize(q1), "int8")
        np.testing.assert_array_equal(q1.data, q2.data)

    def test_out_of_range_integers_rejected(self):
        with pytest.raises(ValueError):
            QuantTensor("x", "int8", np.array([-128], dtype=np.int16))


def small_container(seed=0, variant="monaural"):
    cfg = GcfsConfig(variant=variant, n_bins=5, latent=8, groups=2, hidden=4)
    model = GcfsModel.random(cfg, seed=seed, scale=0.4)
    return container_from_params(cfg, model.params, model.input_scale,
                                 model.filter_range)


class TestContainerIO:
    def test_roundtrip_bit_identical(self, tmp_path):
        wc = small_container()
        path = tmp_path / "m.gcfs"
        save_container(path, wc)
        loaded = load_container(path)
        assert loaded.config == wc.config
        assert loaded.input_scale == np.float32(wc.input_scale)
        assert loaded.r == np.float32(wc.r)
        assert list(loaded.tensors) == list(wc.tensors)
        for name in wc.tensors:
            t0, t1 = wc.tensors[name], loaded.tensors[name]
            assert t0.dtype == t1.dtype
            np.testing.assert_array_equal(t0.data, t1.data)

    def test_save_is_byte_reproducible(self, tmp_path):
        wc = small_container(seed=3)
        p1, p2 = tmp_path / "a.gcfs", tmp_path / "b.gcfs"
        save_container(p1, wc)
        save_container(p2, wc)
        assert p1.read_bytes() == p2.read_bytes()

    def test_resave_after_load_identical(self, tmp_path):
        wc = small_container(seed=4)
        p1, p2 = tmp_path / "a.gcfs", tmp_path / "b.gcfs"
        save_container(p1, wc)
        save_container(p2, load_container(p1))
        assert p1.read_bytes() == p2.read_bytes()

    def test_header_layout_little_endian(self, tmp_path):
        path = tmp_path / "m.gcfs"
        save_container(path, small_container())
        blob = path.read_bytes()
        assert blob[:4] == b"GCFS"
        assert int.from_bytes(blob[4:8], "little") == 1

    def test_corrupt_byte_checksum_error(self, tmp_path):
        path = tmp_path / "m.gcfs"
        save_container(path, small_container())
        blob = bytearray(path.read_bytes())
        blob[100] ^= 0xFF
        path.write_bytes(bytes(blob))
        with pytest.raises(ContainerFormatError, match="checksum"):
            load_container(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "m.gcfs"
        save_container(path, small_container())
        blob = bytearray(path.read_bytes())
        blob[:4] = b"NOPE"
        path.write_bytes(bytes(blob))
        with pytest.raises(ContainerFormatError, match="magic"):
            load_container(path)

    def test_truncated_file(self, tmp_path):
        path = tmp_path / "m.gcfs"
        save_container(path, small_container())
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) - 7])
        with pytest.raises(ContainerFormatError, match="truncated"):
            load_container(path)

    def test_unknown_version_rejected(self, tmp_path):
        path = tmp_path / "m.gcfs"
        save_container(path, small_container())
        blob = bytearray(path.read_bytes())
        blob[4] = 99
        path.write_bytes(bytes(blob))
        with pytest.raises(ContainerFormatError, match="version"):
            load_container(path)

    def test_tensor_set_mismatch_vs_config(self):
        wc = small_container(variant="monaural")
        binaural_cfg = GcfsConfig(variant="binaural", n_bins=5, latent=8,
                                  groups=2, hidden=4)
        broken = WeightContainer(binaural_cfg, wc.input_scale, wc.r, wc.tensors)
        with pytest.raises(ContainerFormatError, match="mismatch"):
            validate_container(broken)

    def test_clip_counting_on_export(self):
        cfg = GcfsConfig(variant="monaural", n_bins=5, latent=8, groups=2, hidden=4)
        model = GcfsModel.random(cfg, seed=1, scale=0.4)
        params = dict(model.params)
        params["conv.skip.w"] = params["conv.skip.w"] + 3.0  # force clamping
        wc = container_from_params(cfg, params, 1.0, 2.0)
        assert total_clipped(wc) == params["conv.skip.w"].size


class TestModelFromContainer:
    def test_forward_parity_after_roundtrip(self, tmp_path):
        from gcfsnet.gcfs import GcfsState, forward_frame

        cfg = GcfsConfig(variant="binaural", n_bins=5, latent=8, groups=2, hidden=4)
        model = GcfsModel.random(cfg, seed=2, scale=0.4)
        wc = container_from_params(cfg, model.params, model.input_scale,
                                   model.filter_range)
        path = tmp_path / "m.gcfs"
        save_container(path, wc)
        loaded_model = GcfsModel.from_container(load_container(path))

        rng = np.random.default_rng(3)
        feats = rng.standard_normal((1, cfg.feature_size))
        w_q, c_q = forward_frame(loaded_model, GcfsState(cfg), feats)
        # quantize the original params the same way: outputs must be identical
        requantized = GcfsModel.from_container(wc)
        w_r, c_r = forward_frame(requantized, GcfsState(cfg), feats)
        np.testing.assert_array_equal(w_q, w_r)
        np.testing.assert_array_equal(c_q, c_r)
        # and close to the float model within accumulated quantization error
        w_f, c_f = forward_frame(model, GcfsState(cfg), feats)
        assert np.max(np.abs(w_f - w_q)) < 0.15

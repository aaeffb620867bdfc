"""Network blocks, parameter layout, configuration and attention probing."""

import numpy as np
import pytest

from ddan.autograd import Tensor, ops, precision
from ddan.autograd.checkpoint import CheckpointError
from ddan.data.resample import upsample
from ddan.model import (
    PRESETS,
    ModelConfig,
    ModelWeights,
    branch_forward,
    channel_attention,
    count_params,
    ddan_forward,
    format_config,
    fuse,
    init_weights,
    load_config,
    param_shapes,
    parse_config,
    probe_attention,
    rcab_forward,
    residual_block,
    rvab_forward,
    shallow_extract,
    super_resolve,
    upscale,
    view_attention,
    zero_weights,
)

TINY = PRESETS["tiny"]


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def t(arr):
    return Tensor(np.asarray(arr, dtype=np.float64))


def conv_params(prefix, cout, cin, k, rng=None, zero=False):
    shape = (cout, cin, k, k)
    w = np.zeros(shape) if zero or rng is None else rng.standard_normal(shape) * 0.3
    return {f"{prefix}.w": t(w), f"{prefix}.b": t(np.zeros((1, cout, 1, 1)))}


def random_weights(cfg, seed=0, dtype=np.float64, bias=0.1):
    """Random weights with nonzero biases, so no path is silently inactive."""
    wts = init_weights(cfg, seed, dtype, residual_scale=1.0, head_scale=1.0)
    rng = np.random.default_rng(seed + 100)
    for p in wts:
        if p.name.endswith(".b"):
            p.value.data[...] = rng.standard_normal(p.value.shape) * bias
    return wts


class TestResidualBlock:
    def test_zero_weights_identity(self, f64, rng):
        x = t(rng.standard_normal((2, 3, 5, 4)))
        w = {**conv_params("rb.conv1", 3, 3, 3, zero=True), **conv_params("rb.conv2", 3, 3, 3, zero=True)}
        np.testing.assert_array_equal(residual_block(x, w, "rb").data, x.data)

    def test_formula(self, f64, rng):
        x = t(rng.standard_normal((1, 2, 6, 7)))
        w = {**conv_params("rb.conv1", 2, 2, 3, rng), **conv_params("rb.conv2", 2, 2, 3, rng)}
        inner = ops.conv2d(x, w["rb.conv1.w"], w["rb.conv1.b"]).data
        outer = ops.conv2d(t(np.maximum(inner, 0)), w["rb.conv2.w"], w["rb.conv2.b"]).data
        np.testing.assert_allclose(residual_block(x, w, "rb").data, x.data + outer, atol=1e-12)

    def test_channel_mismatch(self, rng):
        w = {**conv_params("rb.conv1", 3, 3, 3, rng), **conv_params("rb.conv2", 3, 3, 3, rng)}
        with pytest.raises(ValueError):
            residual_block(t(rng.standard_normal((1, 2, 4, 4))), w, "rb")


class TestShallowExtract:
    def test_dims(self):
        wts = init_weights(TINY, 0)
        out = shallow_extract(Tensor(np.zeros((9, 1, 7, 5))), wts)
        assert out.shape == (9, TINY.channels, 7, 5)

    def test_view_permutation_equivariance(self, f64, rng):
        wts = random_weights(TINY)
        views = rng.random((9, 1, 8, 8))
        perm = rng.permutation(9)
        a = shallow_extract(t(views), wts).data[perm]
        b = shallow_extract(t(views[perm]), wts).data
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_aspp_averaging_merge(self, f64):
        cfg = ModelConfig(2, 2, 2, 2, n_blocks=1)
        wts = zero_weights(cfg, np.float64)
        const = np.array([0.3, 0.7])
        wts["shallow.conv0.b"].data[0, :, 0, 0] = const
        for d in (1, 2, 4):
            wts[f"shallow.aspp.d{d}.b"].data[0, :, 0, 0] = const
        merge = wts["shallow.aspp.merge.w"].data
        for branch in range(3):
            for c in range(2):
                merge[c, branch * 2 + c] = 1.0 / 3.0
        out = shallow_extract(t(np.random.default_rng(0).random((4, 1, 6, 6))), wts).data
        np.testing.assert_allclose(out, np.broadcast_to(const[None, :, None, None], out.shape), atol=1e-15)

    def test_without_aspp_uses_residual_block(self):
        cfg = TINY.ablation("w/o_aspp")
        names = [n for n, _ in param_shapes(cfg)]
        assert "shallow.aspp_rb.conv1.w" in names
        assert not any("aspp.merge" in n for n in names)


class TestViewAttention:
    def test_zero_gating_halves(self, f64, rng):
        x = t(rng.standard_normal((3, 4, 5, 5)))
        w = {**conv_params("va.gate1", 2, 4, 1, zero=True), **conv_params("va.gate2", 4, 2, 1, zero=True)}
        np.testing.assert_array_equal(view_attention(x, w, "va").data, 0.5 * x.data)

    def test_hand_evaluation(self, f64):
        # C=1 slice with N=2 views of 2x2
        x = np.array([[[[1.0, 2.0], [3.0, 4.0]], [[-1.0, 0.0], [0.5, 0.5]]]])
        W1 = np.array([[0.5, -1.0], [1.0, 2.0]])
        b1 = np.array([0.1, -0.2])
        W2 = np.array([[1.0, -0.5], [0.25, 0.75]])
        b2 = np.array([0.0, 0.3])
        w = {
            "va.gate1.w": t(W1[:, :, None, None]), "va.gate1.b": t(b1.reshape(1, 2, 1, 1)),
            "va.gate2.w": t(W2[:, :, None, None]), "va.gate2.b": t(b2.reshape(1, 2, 1, 1)),
        }
        z = np.array([2.5, 0.0])  # view means
        att = sigmoid(W2 @ np.maximum(W1 @ z + b1, 0) + b2)
        expected = x * att[None, :, None, None]
        rec = []
        np.testing.assert_allclose(view_attention(t(x), w, "va", rec).data, expected, atol=1e-15)
        np.testing.assert_allclose(rec[0].ravel(), att, atol=1e-15)

    def test_view_mismatch(self, rng):
        w = {**conv_params("va.gate1", 2, 4, 1, rng), **conv_params("va.gate2", 4, 2, 1, rng)}
        with pytest.raises(ValueError, match="views"):
            view_attention(t(rng.standard_normal((1, 3, 2, 2))), w, "va")

    def test_bounded_by_input(self, f64, rng):
        x = t(rng.standard_normal((2, 4, 3, 3)) * 10)
        w = {**conv_params("va.gate1", 2, 4, 1, rng), **conv_params("va.gate2", 4, 2, 1, rng)}
        out = view_attention(x, w, "va").data
        assert np.all(np.abs(out) <= np.abs(x.data))
        assert np.abs(out).max() < np.abs(x.data).max()


class TestChannelAttention:
    def test_zero_gating_halves(self, f64, rng):
        y = t(rng.standard_normal((4, 2, 3, 3)))
        w = {**conv_params("ca.gate1", 1, 2, 1, zero=True), **conv_params("ca.gate2", 2, 1, 1, zero=True)}
        np.testing.assert_array_equal(channel_attention(y, w, "ca").data, 0.5 * y.data)

    def test_hand_evaluation(self, f64):
        y = np.array([[[[1.0, 3.0]], [[2.0, -4.0]]]])  # N=1, C=2, 1x2
        M1 = np.array([[0.7, -0.2]])
        M2 = np.array([[1.5], [-2.0]])
        b2 = np.array([0.1, 0.2])
        w = {
            "ca.gate1.w": t(M1[:, :, None, None]), "ca.gate1.b": t(np.zeros((1, 1, 1, 1))),
            "ca.gate2.w": t(M2[:, :, None, None]), "ca.gate2.b": t(b2.reshape(1, 2, 1, 1)),
        }
        s = np.array([2.0, -1.0])
        m = sigmoid(M2 @ np.maximum(M1 @ s, 0) + b2)
        np.testing.assert_allclose(channel_attention(t(y), w, "ca").data, y * m[None, :, None, None], atol=1e-15)

    def test_depends_only_on_channel_means(self, f64, rng):
        w = {**conv_params("ca.gate1", 1, 2, 1, rng), **conv_params("ca.gate2", 2, 1, 1, rng)}
        a = rng.standard_normal((1, 2, 4, 4))
        b = a[:, :, ::-1, ::-1].copy()  # same per-channel means, different layout
        rec_a, rec_b = [], []
        channel_attention(t(a), w, "ca", rec_a)
        channel_attention(t(b), w, "ca", rec_b)
        np.testing.assert_allclose(rec_a[0], rec_b[0], atol=1e-14)


class TestAttentionBlocks:
    @pytest.mark.parametrize("block,flag", [(rvab_forward, "use_va"), (rcab_forward, "use_ca")])
    def test_zero_weights_scale(self, f64, rng, block, flag):
        cfg = TINY
        wts = zero_weights(cfg, np.float64)
        width = cfg.n_views if block is rvab_forward else cfg.channels
        name = "va.1" if block is rvab_forward else "ca.1"
        x = t(rng.standard_normal((2, width, 4, 4)))
        np.testing.assert_allclose(block(x, wts, name).data, 1.5 * x.data, atol=1e-15)
        off = zero_weights(cfg.with_(**{flag: False}), np.float64)
        np.testing.assert_array_equal(block(x, off, name).data, 2.0 * x.data)

    def test_branch_single_block_zero(self, f64, rng):
        wts = zero_weights(TINY, np.float64)
        f0 = t(rng.standard_normal((9, 4, 3, 3)))
        out = branch_forward(f0, [lambda x: rcab_forward(x, wts, "ca.1")])
        np.testing.assert_allclose(out.data, 2.5 * f0.data, atol=1e-15)

    def test_branch_without_blocks(self, rng):
        f0 = t(rng.standard_normal((1, 2, 2, 2)))
        assert branch_forward(f0, []) is f0

    def test_branch_matches_unrolled(self, f64, rng):
        cfg = TINY.with_(n_blocks=3)
        wts = random_weights(cfg)
        f0 = t(rng.standard_normal((9, 4, 4, 4)))
        blocks = [lambda x, k=k: rcab_forward(x, wts, f"ca.{k}") for k in (1, 2, 3)]
        f1 = rcab_forward(f0, wts, "ca.1").data
        f2 = rcab_forward(t(f0.data + f1), wts, "ca.2").data
        f3 = rcab_forward(t(f0.data + f1 + f2), wts, "ca.3").data
        np.testing.assert_allclose(branch_forward(f0, blocks).data, f0.data + f1 + f2 + f3, atol=1e-10)

    def test_attention_disabled_towers_independent(self, f64, rng):
        """Dual-branch outputs equal two residual towers run separately."""
        cfg = TINY.ablation("w/o_da").with_(n_blocks=2)
        wts = random_weights(cfg)
        f_s = t(rng.standard_normal((9, 4, 4, 4)))

        def tower(x, prefix, k):
            return residual_block(residual_block(x, wts, f"{prefix}.{k}.rb1"), wts, f"{prefix}.{k}.rb2")

        for prefix, f0 in (("ca", f_s), ("va", ops.swap_leading(f_s, 1))):
            g1 = f0.data + tower(f0, prefix, 1).data
            g2 = f0.data + g1 + tower(t(f0.data + g1), prefix, 2).data
            out = branch_forward(f0, [lambda x, k=k: (rcab_forward if prefix == "ca" else rvab_forward)(x, wts, f"{prefix}.{k}") for k in (1, 2)])
            np.testing.assert_allclose(out.data, f0.data + g1 + g2, atol=1e-10)

    def test_cascaded_block_math(self, f64, rng):
        cfg = TINY.ablation("cascaded")
        wts = random_weights(cfg)
        lr = rng.random((3, 3, 6, 6))
        rec = {}
        out = ddan_forward(lr, cfg, wts, rec).data
        f_s = shallow_extract(t(lr.reshape(9, 1, 6, 6)), wts)
        h = ops.swap_leading(rvab_forward(ops.swap_leading(f_s, 1), wts, "cascade.1.va"), 1)
        f_ca = ops.add(f_s, rcab_forward(h, wts, "cascade.1.ca"))
        manual = upscale(fuse(ops.swap_leading(f_ca, 1), f_ca, wts), lr.reshape(9, 1, 6, 6), wts).data
        np.testing.assert_allclose(out, manual, atol=1e-10)
        assert len(rec["va"]) == len(rec["ca"]) == 1


class TestFuse:
    def test_dims(self, rng):
        wts = init_weights(TINY, 0)
        f_ca = t(rng.standard_normal((9, 4, 3, 3)))
        assert fuse(ops.swap_leading(f_ca, 1), f_ca, wts).shape == (9, 4, 3, 3)

    def test_zero_input_conv_gives_zero(self, f64, rng):
        wts = random_weights(TINY, bias=0.0)
        wts["fusion.in.w"].data[...] = 0
        f_ca = t(rng.standard_normal((9, 4, 3, 3)))
        np.testing.assert_array_equal(fuse(ops.swap_leading(f_ca, 1), f_ca, wts).data, 0.0)

    def test_transpose_hand_oracle(self, f64):
        cfg = ModelConfig(1, 2, 2, 2, n_blocks=1)  # N=2, C=2
        wts = zero_weights(cfg, np.float64)
        wts["fusion.in.w"].data[:, :, 0, 0] = np.eye(4)
        # output channel 0 <- VA channel 0, output channel 1 <- CA channel 1
        wts["fusion.out.w"].data[0, 0, 0, 0] = 1.0
        wts["fusion.out.w"].data[1, 3, 0, 0] = 1.0
        f_va = np.arange(16.0).reshape(2, 2, 2, 2)  # (C, N, H, W)
        f_ca = -np.arange(16.0).reshape(2, 2, 2, 2)  # (N, C, H, W)
        out = fuse(t(f_va), t(f_ca), wts).data
        for n in range(2):
            np.testing.assert_array_equal(out[n, 0], f_va[0, n])
            np.testing.assert_array_equal(out[n, 1], f_ca[n, 1])

    def test_incompatible(self, rng):
        wts = init_weights(TINY, 0)
        with pytest.raises(ValueError, match="incompatible"):
            fuse(t(rng.standard_normal((4, 9, 3, 3))), t(rng.standard_normal((9, 4, 3, 4))), wts)


class TestUpscaleAndForward:
    def test_zero_network_is_bicubic_bit_exact(self, f64, rng):
        for cfg in (TINY, TINY.with_(scale=4), TINY.ablation("cascaded")):
            lr = rng.random((3, 3, 8, 8))
            out = super_resolve(lr, cfg, zero_weights(cfg, np.float64))
            assert out.shape == (3, 3, 8 * cfg.scale, 8 * cfg.scale)
            assert np.array_equal(out, upsample(lr, cfg.scale))

    def test_upscale_zero_head(self, f64, rng):
        wts = zero_weights(TINY, np.float64)
        lr = rng.random((9, 1, 5, 5))
        out = upscale(t(rng.standard_normal((9, 4, 5, 5))), lr, wts).data
        assert np.array_equal(out, upsample(lr, 2))

    def test_output_dims(self, rng):
        wts = init_weights(TINY, 1)
        out = ddan_forward(rng.random((2, 3, 3, 6, 7)), TINY, wts)
        assert out.shape == (18, 1, 12, 14)

    def test_batch_matches_single(self, f64, rng):
        wts = random_weights(TINY)
        lr = rng.random((2, 3, 3, 6, 6))
        both = super_resolve(lr, TINY, wts)
        np.testing.assert_allclose(both[1], super_resolve(lr[1], TINY, wts), atol=1e-10)

    def test_config_mismatch(self, rng):
        with pytest.raises(ValueError, match="different config"):
            ddan_forward(rng.random((3, 3, 4, 4)), TINY, init_weights(TINY.with_(channels=5)))

    def test_wrong_angular_grid(self, rng):
        with pytest.raises(ValueError, match="LR input"):
            ddan_forward(rng.random((2, 3, 4, 4)), TINY, init_weights(TINY))

    def test_initial_prediction_near_bicubic(self, rng):
        lr = rng.random((3, 3, 8, 8)).astype(np.float32)
        out = super_resolve(lr, TINY, init_weights(TINY, 0))
        assert np.abs(out - upsample(lr, 2)).max() < 0.1


class TestParamLayout:
    @pytest.mark.parametrize("name,reported", [
        ("canonical_5x5_x2", 0.48e6), ("canonical_9x9_x2", 1.36e6),
        ("canonical_5x5_x4", 0.51e6), ("canonical_9x9_x4", 1.39e6),
    ])
    def test_published_sizes(self, name, reported):
        assert abs(count_params(PRESETS[name]) / reported - 1) <= 0.10

    def test_micro_hand_count(self):
        cfg = ModelConfig(2, 2, 2, 2, n_blocks=1)
        conv0 = 1 * 2 * 9 + 2
        aspp = 3 * (2 * 2 * 9 + 2) + (2 * 6 + 2)
        rb2 = 2 * (2 * 2 * 9 + 2)
        rb4 = 2 * (4 * 4 * 9 + 4)
        rvab = 2 * rb4 + (2 * 4 + 2) + (4 * 2 + 4)
        rcab = 2 * rb2 + (1 * 2 + 1) + (2 * 1 + 2)
        fusion = (4 * 4 + 4) + 2 * rb4 + (2 * 4 + 2)
        head = (8 * 2 + 8) + (1 * 2 * 9 + 1)
        assert conv0 + aspp + 2 * rb2 + rvab + rcab + fusion + head == 1738
        assert count_params(cfg) == 1738

    def test_monotone_in_blocks(self):
        counts = [count_params(TINY.with_(n_blocks=n)) for n in range(1, 6)]
        assert all(a < b for a, b in zip(counts, counts[1:]))

    def test_scale_changes_only_head(self):
        two = dict(param_shapes(PRESETS["canonical_5x5_x2"]))
        four = dict(param_shapes(PRESETS["canonical_5x5_x4"]))
        assert two.keys() == four.keys()
        assert {k for k in two if two[k] != four[k]} == {"upscale.expand.w", "upscale.expand.b"}

    def test_names_unique(self):
        names = [n for n, _ in param_shapes(PRESETS["canonical_9x9_x4"])]
        assert len(names) == len(set(names))

    def test_ablation_gating_removed(self):
        names = [n for n, _ in param_shapes(TINY.ablation("w/o_va"))]
        assert not any(n.startswith("va.") and "gate" in n for n in names)
        assert any(n.startswith("ca.") and "gate" in n for n in names)

    def test_unknown_ablation(self):
        with pytest.raises(ValueError, match="unknown ablation"):
            TINY.ablation("w/o_everything")


class TestWeights:
    def test_init_seeded(self):
        a, b = init_weights(TINY, 3), init_weights(TINY, 3)
        for p, q in zip(a, b):
            assert np.array_equal(p.value.data, q.value.data)

    def test_save_load_round_trip(self, tmp_path):
        wts = init_weights(TINY, 0)
        wts.save(tmp_path / "w.ckpt")
        back = ModelWeights.load(TINY, tmp_path / "w.ckpt")
        for p, q in zip(wts, back):
            assert p.value.data.tobytes() == q.value.data.tobytes()

    def test_load_wrong_config(self, tmp_path):
        init_weights(TINY, 0).save(tmp_path / "w.ckpt")
        with pytest.raises(CheckpointError, match="mismatch"):
            ModelWeights.load(TINY.with_(channels=5), tmp_path / "w.ckpt")

    def test_scalar_count(self):
        assert init_weights(TINY).n_scalars() == count_params(TINY)


class TestConfig:
    def test_format_parse_round_trip(self):
        for cfg in list(PRESETS.values()) + [TINY.ablation("cascaded"), TINY.ablation("w/o_da")]:
            assert parse_config(format_config(cfg)) == cfg

    def test_comments_and_blanks(self):
        assert parse_config("# comment\n\nchannels = 8  # width\nuse_va=no\n") == ModelConfig(channels=8, use_va=False)

    def test_unknown_key(self):
        with pytest.raises(ValueError, match="unknown config key"):
            parse_config("depth=3\n")

    def test_invalid_values(self):
        with pytest.raises(ValueError):
            ModelConfig(scale=3)
        with pytest.raises(ValueError):
            ModelConfig(n_blocks=0)

    def test_reduced_widths_floor_at_one(self):
        cfg = ModelConfig(1, 1, 1, 2, ratio_view=4, ratio_channel=4)
        assert cfg.view_hidden == 1 and cfg.channel_hidden == 1

    def test_load_preset_or_file(self, tmp_path):
        assert load_config("desk") is PRESETS["desk"]
        (tmp_path / "c.txt").write_text("channels=6\n")
        assert load_config(str(tmp_path / "c.txt")).channels == 6
        with pytest.raises(FileNotFoundError):
            load_config(str(tmp_path / "none.txt"))


class TestProbeAttention:
    def test_zero_gating_half(self, rng):
        wts = zero_weights(TINY)
        att = probe_attention(rng.random((3, 3, 6, 6)), TINY, wts)
        assert att.shape == (TINY.n_blocks, 9)
        np.testing.assert_array_equal(att, 0.5)

    def test_open_interval(self, rng):
        wts = random_weights(TINY.with_(n_blocks=2), bias=3.0)
        att = probe_attention(rng.random((3, 3, 6, 6)) * 5, TINY.with_(n_blocks=2), wts)
        assert np.all((att > 0) & (att < 1))

    def test_content_aware(self):
        with precision(np.float64):
            wts = random_weights(TINY)
        rng = np.random.default_rng(5)
        a = probe_attention(rng.random((3, 3, 6, 6)), TINY, wts)
        b = probe_attention(rng.random((3, 3, 6, 6)), TINY, wts)
        assert not np.allclose(a, b)

    def test_disabled(self, rng):
        cfg = TINY.ablation("w/o_va")
        with pytest.raises(ValueError, match="disabled"):
            probe_attention(rng.random((3, 3, 6, 6)), cfg, zero_weights(cfg))

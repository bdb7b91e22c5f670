import numpy as np
import pytest

from oracles import conv2d_direct

from dgfd import tensor as T
from dgfd.pcgb import GuidanceState, PriorGuidance
from dgfd.tensor import ConfigError, DimensionError, Tensor

F64 = np.float64
C = 8


def rand(rng, shape):
    return Tensor(rng.normal(size=shape), dtype=F64)


def dark(rng, h=16, w=16):
    return Tensor(rng.uniform(0, 1, (2, 1, h, w)), dtype=F64)


class TestEncodePrior:
    def test_stage_shape_ladder(self, rng):
        pg = PriorGuidance(C, rng, dtype=F64)
        state = pg.encode_prior(dark(rng, 16, 16))
        assert state.initial[1].shape == (2, C, 16, 16)
        assert state.initial[2].shape == (2, 2 * C, 8, 8)
        assert state.initial[3].shape == (2, 4 * C, 4, 4)

    def test_zero_parameters_give_zero_features(self, rng):
        pg = PriorGuidance(C, rng, dtype=F64)
        for _, p in pg.named_params():
            p.data[...] = 0.0
        state = pg.encode_prior(dark(rng))
        np.testing.assert_array_equal(state.initial[1].data, 0.0)

    def test_downsample_matches_strided_oracle(self, rng):
        pg = PriorGuidance(4, rng, dtype=F64)
        x = rng.normal(size=(1, 4, 8, 8))
        got = pg.down_1to2(Tensor(x, dtype=F64))
        ref = conv2d_direct(x, pg.down_1to2.weight.data, pg.down_1to2.bias.data,
                            stride=2, padding=1)
        np.testing.assert_allclose(got.data, ref, atol=1e-9)

    def test_indivisible_extent_rejected(self, rng):
        pg = PriorGuidance(C, rng, dtype=F64)
        with pytest.raises(ConfigError):
            pg.encode_prior(Tensor(np.zeros((1, 1, 18, 16)), dtype=F64))


class TestEncoderSchedule:
    def test_first_block_uses_initial_feature(self, rng):
        pg = PriorGuidance(C, rng, dtype=F64)
        state = pg.encode_prior(dark(rng))
        g = pg.next_guidance_encoder(state, 1, 1, None)
        np.testing.assert_array_equal(g.data, state.initial[1].data)

    def test_equal_feedback_passes_through(self, rng):
        # SKFusion of equal inputs is exact, so feedback == initial -> initial
        pg = PriorGuidance(C, rng, dtype=F64)
        state = pg.encode_prior(dark(rng))
        pg.next_guidance_encoder(state, 1, 1, None)
        fb = Tensor(state.initial[1].data.copy())
        g = pg.next_guidance_encoder(state, 1, 2, fb)
        np.testing.assert_array_equal(g.data, state.initial[1].data)

    def test_stage_entry_downsamples_feedback(self, rng):
        pg = PriorGuidance(C, rng, dtype=F64)
        state = pg.encode_prior(dark(rng, 16, 16))
        fb = rand(rng, (2, C, 16, 16))
        g = pg.next_guidance_encoder(state, 2, 1, fb)
        assert g.shape == (2, 2 * C, 8, 8)

    def test_missing_feedback_raises(self, rng):
        pg = PriorGuidance(C, rng, dtype=F64)
        state = pg.encode_prior(dark(rng))
        with pytest.raises(DimensionError):
            pg.next_guidance_encoder(state, 1, 2, None)

    def test_downsample_shared_with_initial_encoding(self, rng):
        # the stage-entry transform is the very conv that built X_d^2
        pg = PriorGuidance(C, rng, dtype=F64)
        state = pg.encode_prior(dark(rng))
        g = pg.next_guidance_encoder(state, 2, 1, Tensor(state.initial[1].data.copy()))
        np.testing.assert_array_equal(g.data, state.initial[2].data)


class TestDecoderSchedule:
    def test_within_stage_equal_feedback_identity(self, rng):
        pg = PriorGuidance(C, rng, dtype=F64)
        state = pg.encode_prior(dark(rng))
        g = pg.next_guidance_decoder(state, 2, 2, Tensor(state.initial[2].data.copy()))
        np.testing.assert_array_equal(g.data, state.initial[2].data)

    def test_stage_entry_upsamples_feedback(self, rng):
        pg = PriorGuidance(C, rng, dtype=F64)
        state = pg.encode_prior(dark(rng, 16, 16))
        fb = rand(rng, (2, 4 * C, 4, 4))
        g = pg.next_guidance_decoder(state, 2, 1, fb)
        assert g.shape == (2, 2 * C, 8, 8)

    def test_constant_propagation_through_upsample(self, rng):
        # constant input, zero bias: each sub-pixel phase of the shuffled output
        # is constant, and fusing the equal upsampled branches changes nothing
        pg = PriorGuidance(C, rng, dtype=F64)
        up = pg.up_3to2
        up.conv.bias.data[...] = 0.0
        const = Tensor(np.full((1, 4 * C, 4, 4), 0.7, dtype=F64))
        out = up(const)
        assert out.shape == (1, 2 * C, 8, 8)
        for pi in range(2):
            for pj in range(2):
                phase = out.data[:, :, pi::2, pj::2]
                spread = phase.max(axis=(2, 3)) - phase.min(axis=(2, 3))
                assert spread.max() < 1e-9
        fused = pg.dec_fuse_2(out, Tensor(out.data.copy()))
        np.testing.assert_array_equal(fused.data, out.data)


class TestVariants:
    def test_nofr_ignores_feedback(self, rng):
        pg = PriorGuidance(C, rng, variant="nofr", dtype=F64)
        assert not hasattr(pg, "up_3to2")
        state = pg.encode_prior(dark(rng))
        g = pg.next_guidance_encoder(state, 2, 1, rand(rng, (2, C, 16, 16)))
        np.testing.assert_array_equal(g.data, state.initial[2].data)

    def test_daf_adds_instead_of_fusing(self, rng):
        pg = PriorGuidance(C, rng, variant="daf", dtype=F64)
        assert not hasattr(pg, "enc_fuse_1")
        state = pg.encode_prior(dark(rng))
        pg.next_guidance_encoder(state, 1, 1, None)
        fb = rand(rng, (2, C, 16, 16))
        g = pg.next_guidance_encoder(state, 1, 2, fb)
        np.testing.assert_allclose(g.data, fb.data + state.initial[1].data, rtol=1e-12)

    def test_pff_fuses_previous_guidance(self, rng):
        pg = PriorGuidance(C, rng, variant="pff", dtype=F64)
        state = pg.encode_prior(dark(rng))
        assert 2 not in state.initial  # initial features beyond stage 1 unused
        g1 = pg.next_guidance_encoder(state, 1, 1, None)
        fb = Tensor(g1.data.copy())
        g2 = pg.next_guidance_encoder(state, 1, 2, fb)
        # feedback == previous guidance -> fusion of equal inputs -> unchanged
        np.testing.assert_array_equal(g2.data, g1.data)


def test_gradients_reach_encoder_parameters(rng):
    pg = PriorGuidance(4, rng, dtype=F64)
    x_d = Tensor(np.random.default_rng(0).uniform(0, 1, (1, 1, 8, 8)), dtype=F64)
    state = pg.encode_prior(x_d)
    g = pg.next_guidance_encoder(state, 1, 1, None)
    g2 = pg.next_guidance_encoder(state, 1, 2, g)
    loss = T.mean_all(T.mul(g2, g2))
    loss.backward()
    assert pg.embed_spatial.weight.grad is not None
    assert np.abs(pg.embed_spatial.weight.grad).max() > 0

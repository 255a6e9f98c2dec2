import numpy as np
import pytest

from splicegan import nets as N
from splicegan import tensor as T
from splicegan.errors import DimensionError, DomainError
from splicegan.genome import GenomeLayout


class TestImageBatch:
    def test_rejects_out_of_range(self):
        with pytest.raises(DomainError):
            N.ImageBatch(np.full((1, 1, 4, 4), 1.5))

    def test_rejects_non_finite(self):
        with pytest.raises(DomainError):
            N.ImageBatch(np.full((1, 1, 4, 4), np.nan))

    def test_rejects_wrong_rank(self):
        with pytest.raises(DimensionError):
            N.ImageBatch(np.zeros((4, 4)))


class TestEncodeDecode:
    def test_zero_image_through_zero_final_layer(self, tiny_models):
        final = tiny_models.enc.n_layers - 1
        tiny_models.enc.weights[f"w{final}"][...] = 0.0
        tiny_models.enc.weights[f"b{final}"][...] = 0.0
        codes = N.encode(N.ImageBatch(np.zeros((2, 1, 16, 16))), tiny_models)
        for c in codes:
            np.testing.assert_array_equal(c.values, 0.0)

    def test_batch_of_k_codes(self, tiny_models, image_batch):
        codes = N.encode(image_batch, tiny_models)
        assert len(codes) == len(image_batch)
        assert all(len(c.values) == tiny_models.layout.total_len for c in codes)

    def test_duplicate_image_eval_determinism(self, tiny_models, rng):
        img = rng.random((1, 1, 16, 16), dtype=np.float32)
        codes = N.encode(N.ImageBatch(np.repeat(img, 2, axis=0)), tiny_models)
        np.testing.assert_array_equal(codes[0].values, codes[1].values)

    def test_decode_output_range(self, tiny_models, rng):
        rows = rng.normal(size=(4, tiny_models.layout.total_len)).astype(np.float32)
        out = N.decode(rows, tiny_models)
        assert out.data.min() >= 0.0 and out.data.max() <= 1.0

    def test_identical_codes_identical_images(self, tiny_models, rng):
        row = rng.normal(size=(1, tiny_models.layout.total_len)).astype(np.float32)
        out = N.decode(np.repeat(row, 2, axis=0), tiny_models)
        np.testing.assert_array_equal(out.data[0], out.data[1])

    def test_encoder_shape_mismatch(self, tiny_models):
        with pytest.raises(DimensionError):
            N.encode(np.zeros((2, 100), dtype=np.float32), tiny_models)

    def test_decoder_length_mismatch(self, tiny_models):
        with pytest.raises(DimensionError):
            N.decode(np.zeros((2, 7), dtype=np.float32), tiny_models)


class TestDiscriminate:
    def test_probability_mode_open_interval(self, tiny_models, image_batch):
        for bit in (0, 1):
            out = N.discriminate(image_batch, bit, tiny_models, attribute=1)
            assert ((out > 0.0) & (out < 1.0)).all()

    def test_zero_head_gives_half(self, tiny_models, image_batch):
        disc = tiny_models.disc_for(1)
        final = disc.n_layers - 1
        disc.weights[f"w{final}"][...] = 0.0
        disc.weights[f"b{final}"][...] = 0.0
        out = N.discriminate(image_batch, 1, tiny_models, attribute=1)
        np.testing.assert_allclose(out, 0.5, atol=1e-7)

    def test_critic_mode_unbounded(self, tiny_models, image_batch):
        out = N.discriminate(image_batch, 0, tiny_models, attribute=2,
                             gan_mode="critic")
        assert out.shape == (len(image_batch),)

    def test_bad_bit_rejected(self, tiny_models, image_batch):
        with pytest.raises(DomainError):
            N.discriminate(image_batch, 2, tiny_models)

    def test_one_discriminator_per_attribute(self, tiny_models, image_batch):
        o1 = N.discriminate(image_batch, 1, tiny_models, attribute=1)
        o2 = N.discriminate(image_batch, 1, tiny_models, attribute=2)
        assert not np.allclose(o1, o2)


class TestForwardChildren:
    def test_quads_match_graph_latents(self, tiny_models, rng):
        a = N.ImageBatch(rng.random((3, 1, 16, 16), dtype=np.float32))
        b = N.ImageBatch(rng.random((3, 1, 16, 16), dtype=np.float32))
        fc = N.forward_children(a, b, 2, tiny_models, mode="train")
        assert len(fc.quads) == 3
        sl = tiny_models.layout.piece_slice(2)
        for k, q in enumerate(fc.quads):
            np.testing.assert_array_equal(q.latent_A1.values, fc.enc_a.data[k])
            np.testing.assert_array_equal(q.latent_B1.values[sl], 0.0)
            np.testing.assert_array_equal(q.latent_A2.values[sl], 0.0)
            np.testing.assert_array_equal(q.latent_B2.values[sl], fc.enc_a.data[k][sl])

    def test_each_image_encoded_once_each_child_decoded_once(self, tiny_models, rng,
                                                             monkeypatch):
        encoded_rows, decoded_rows = [], []
        orig_enc, orig_dec = N.encode_graph, N.decode_graph

        def counting_enc(x, models, mode, tensors=None):
            encoded_rows.append(x.data.shape[0])
            return orig_enc(x, models, mode, tensors)

        def counting_dec(c, models, mode, tensors=None):
            decoded_rows.append(c.data.shape[0])
            return orig_dec(c, models, mode, tensors)

        monkeypatch.setattr(N, "encode_graph", counting_enc)
        monkeypatch.setattr(N, "decode_graph", counting_dec)
        batch = 4
        a = N.ImageBatch(rng.random((batch, 1, 16, 16), dtype=np.float32))
        b = N.ImageBatch(rng.random((batch, 1, 16, 16), dtype=np.float32))
        N.forward_children(a, b, 1, tiny_models, mode="eval")
        # two encoder applications per pair (each image once), four decoder
        # applications per pair (each child once)
        assert sum(encoded_rows) == 2 * batch
        assert sum(decoded_rows) == 4 * batch

    def test_a1_matches_independent_composition(self, tiny_models, rng):
        a = N.ImageBatch(rng.random((2, 1, 16, 16), dtype=np.float32))
        b = N.ImageBatch(rng.random((2, 1, 16, 16), dtype=np.float32))
        fc = N.forward_children(a, b, 1, tiny_models, mode="eval")
        recon = N.decode(N.encode(a, tiny_models), tiny_models)
        np.testing.assert_allclose(fc.a1.data, recon.data.reshape(2, -1), atol=1e-6)

    def test_annihilated_slot_gets_zero_gradient(self, tiny_models, rng):
        a = N.ImageBatch(rng.random((2, 1, 16, 16), dtype=np.float32))
        b = N.ImageBatch(rng.random((2, 1, 16, 16), dtype=np.float32))
        ts = tiny_models.make_tensors(("enc", "dec"))
        fc = N.forward_children(a, b, 1, tiny_models, mode="train", tensors=ts)
        loss = T.mean(fc.a2) + T.mean(fc.b1) + T.mean(fc.b2)
        loss.backward()
        sl = tiny_models.layout.piece_slice(1)
        assert np.all(fc.enc_b.grad[:, sl] == 0.0)
        assert np.abs(fc.enc_b.grad).max() > 0.0

    def test_no_annihilate_swaps_pieces(self, tiny_models, rng):
        a = N.ImageBatch(rng.random((2, 1, 16, 16), dtype=np.float32))
        b = N.ImageBatch(rng.random((2, 1, 16, 16), dtype=np.float32))
        fc = N.forward_children(a, b, 1, tiny_models, mode="eval", annihilate=False)
        sl = tiny_models.layout.piece_slice(1)
        for k, q in enumerate(fc.quads):
            np.testing.assert_array_equal(q.latent_A2.values[sl], fc.enc_b.data[k][sl])
            np.testing.assert_array_equal(q.latent_B1.values, fc.enc_b.data[k])

    def test_gradients_reach_every_generator_parameter(self, tiny_models, rng):
        a = N.ImageBatch(rng.random((3, 1, 16, 16), dtype=np.float32))
        b = N.ImageBatch(rng.random((3, 1, 16, 16), dtype=np.float32))
        ts = tiny_models.make_tensors(("enc", "dec"))
        fc = N.forward_children(a, b, 1, tiny_models, mode="train", tensors=ts)
        (T.mean(fc.a1) + T.mean(fc.b1) + T.mean(fc.a2) + T.mean(fc.b2)).backward()
        for name, t in ts.items():
            assert t.grad is not None, name

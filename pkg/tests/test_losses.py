import math

import numpy as np
import pytest

from splicegan import losses as L
from splicegan import tensor as T
from splicegan.errors import DimensionError, DomainError

LOG2 = math.log(2.0)


class TestReconstructionLoss:
    def test_identity_is_exactly_zero(self, rng):
        a = rng.random((3, 8))
        b = rng.random((3, 8))
        assert L.reconstruction_loss(a, a, b, b).item() == 0.0

    def test_single_pixel_hand_value(self):
        loss = L.reconstruction_loss(np.array([[0.2]]), np.array([[0.7]]),
                                     np.array([[0.4]]), np.array([[0.4]]))
        assert loss.item() == pytest.approx(0.5, abs=1e-7)

    def test_symmetric_in_the_pair(self, rng):
        a, a1 = rng.random((2, 6)), rng.random((2, 6))
        b, b1 = rng.random((2, 6)), rng.random((2, 6))
        assert L.reconstruction_loss(a, a1, b, b1).item() == pytest.approx(
            L.reconstruction_loss(b, b1, a, a1).item(), rel=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            L.reconstruction_loss(np.zeros((2, 3)), np.zeros((2, 4)),
                                  np.zeros((2, 3)), np.zeros((2, 3)))


class TestGeneratorLoss:
    def test_half_half(self):
        loss = L.generator_gan_loss(np.array([0.5]), np.array([0.5]))
        assert loss.item() == pytest.approx(2 * LOG2, abs=1e-6)

    def test_perfect_fooling(self):
        assert L.generator_gan_loss(np.array([1.0]), np.array([1.0])).item() == \
            pytest.approx(0.0, abs=1e-7)

    def test_one_sided(self):
        loss = L.generator_gan_loss(np.array([1.0]), np.array([0.5]))
        assert loss.item() == pytest.approx(LOG2, abs=1e-6)

    def test_strict_mode_rejects_non_positive(self):
        with pytest.raises(DomainError):
            L.generator_gan_loss(np.array([0.0]), np.array([0.5]), strict=True)

    def test_production_mode_clamps(self):
        loss = L.generator_gan_loss(np.array([0.0]), np.array([1.0]))
        assert loss.item() == pytest.approx(-math.log(L.PROB_FLOOR), rel=1e-5)

    def test_critic_mode(self):
        loss = L.generator_gan_loss(np.array([1.5, 0.5]), np.array([-2.0]),
                                    mode="critic")
        assert loss.item() == pytest.approx(-1.0 + 2.0, abs=1e-6)

    def test_monotone_decreasing_in_each_output(self, rng):
        d = rng.uniform(0.05, 0.9, size=4)
        base = L.generator_gan_loss(d, d).item()
        bumped = L.generator_gan_loss(d + 0.05, d).item()
        assert bumped < base


class TestDiscriminatorLoss:
    def test_all_half(self):
        l_d1, l_d0, l_d = L.discriminator_loss(*(np.array([0.5]) for _ in range(4)))
        assert l_d.item() == pytest.approx(4 * LOG2, abs=1e-6)
        assert l_d1.item() == pytest.approx(l_d0.item(), abs=1e-9)

    def test_perfect_discriminator(self):
        l_d1, l_d0, l_d = L.discriminator_loss(
            np.array([1.0]), np.array([0.0]), np.array([1.0]), np.array([0.0]))
        assert l_d.item() == pytest.approx(0.0, abs=1e-6)

    def test_decomposition(self, rng):
        vals = [rng.uniform(0.1, 0.9, size=3) for _ in range(4)]
        l_d1, l_d0, l_d = L.discriminator_loss(*vals)
        assert l_d.item() == pytest.approx(l_d1.item() + l_d0.item(), rel=1e-6)

    def test_non_negative_in_probability_mode(self, rng):
        for _ in range(20):
            vals = [rng.uniform(0.01, 0.99, size=5) for _ in range(4)]
            _, _, l_d = L.discriminator_loss(*vals)
            assert l_d.item() >= 0.0
            d = rng.uniform(0.01, 0.99, size=5)
            assert L.generator_gan_loss(d, d).item() >= 0.0

    def test_critic_mode(self):
        l_d1, l_d0, l_d = L.discriminator_loss(
            np.array([2.0]), np.array([1.0]), np.array([0.5]), np.array([-0.5]),
            mode="critic")
        assert l_d1.item() == pytest.approx(-1.0)
        assert l_d0.item() == pytest.approx(-1.0)
        assert l_d.item() == pytest.approx(-2.0)


class TestLossReport:
    def test_build_keeps_decomposition_exact(self):
        rep = L.LossReport.build(l_reconstruct=0.25, l_gan=1.5, lambda_gan=0.4,
                                 l_d1=0.7, l_d0=0.9)
        assert rep.l_g == rep.l_reconstruct + 0.4 * rep.l_gan
        assert rep.l_d == rep.l_d1 + rep.l_d0

    def test_gradients_flow_through_losses(self, rng):
        d = T.Tensor(rng.uniform(0.2, 0.8, size=4), requires_grad=True)
        L.generator_gan_loss(d, d).backward()
        assert d.grad is not None and (d.grad < 0).all()

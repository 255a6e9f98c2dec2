"""Loss functions for the encoder/decoder side and the discriminator.

All losses are graph ops: they accept tensors (or arrays, wrapped as
constants) and return scalar tensors, so they can sit at the root of a
backward pass. In probability mode the discriminator outputs live in
(0, 1) and logs are clamped at ``PROB_FLOOR`` unless ``strict`` is set, in
which case out-of-domain inputs raise instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import DimensionError, DomainError

PROB_FLOOR = 1e-7


@dataclass
class LossReport:
    """Per-step scalar losses. ``l_g`` and ``l_d`` are exact sums of their
    parts so the decomposition can be checked after the fact."""

    l_reconstruct: float
    l_gan: float
    l_g: float
    l_d1: float
    l_d0: float
    l_d: float

    @classmethod
    def build(cls, l_reconstruct: float, l_gan: float, lambda_gan: float,
              l_d1: float, l_d0: float) -> "LossReport":
        return cls(
            l_reconstruct=l_reconstruct,
            l_gan=l_gan,
            l_g=l_reconstruct + lambda_gan * l_gan,
            l_d1=l_d1,
            l_d0=l_d0,
            l_d=l_d1 + l_d0,
        )


def _pair(name_a: str, a, name_b: str, b) -> tuple[T.Tensor, T.Tensor]:
    ta, tb = T.as_tensor(a), T.as_tensor(b)
    if ta.data.shape != tb.data.shape:
        raise DimensionError(
            f"{name_a} shape {ta.data.shape} does not match {name_b} shape {tb.data.shape}")
    return ta, tb


def reconstruction_loss(a, a1, b, b1) -> T.Tensor:
    """Mean per-pixel L1 distance of both reconstructions: mean|A-A1| + mean|B-B1|."""
    ta, ta1 = _pair("A", a, "A1", a1)
    tb, tb1 = _pair("B", b, "B1", b1)
    return T.mean(T.absolute(T.sub(ta, ta1))) + T.mean(T.absolute(T.sub(tb, tb1)))


def _checked_prob(t: T.Tensor, what: str, strict: bool) -> T.Tensor:
    if strict:
        if (t.data <= 0).any() or (t.data >= 1).any():
            raise DomainError(f"{what} outside (0, 1) in strict probability mode")
        return t
    return T.clamp_min(t, PROB_FLOOR)


def generator_gan_loss(d_a2, d_b2, mode: str = "probability",
                       strict: bool = False) -> T.Tensor:
    """How badly the hybrids fool the discriminator.

    Probability mode: mean of -log d over both hybrid batches. Critic mode:
    negated mean critic scores.
    """
    ta2, tb2 = T.as_tensor(d_a2), T.as_tensor(d_b2)
    if mode == "critic":
        return -T.mean(ta2) - T.mean(tb2)
    ta2 = _checked_prob(ta2, "generator loss input d_a2", strict)
    tb2 = _checked_prob(tb2, "generator loss input d_b2", strict)
    return -T.mean(T.log(ta2)) - T.mean(T.log(tb2))


def discriminator_loss(d_real_a, d_fake_b2, d_real_b, d_fake_a2,
                       mode: str = "probability", strict: bool = False,
                       ) -> tuple[T.Tensor, T.Tensor, T.Tensor]:
    """Two-sided discriminator loss.

    The bit-1 side scores the attribute carrier against the hybrid imitating
    it; the bit-0 side scores the non-carrier against the other hybrid.
    Returns (l_d1, l_d0, l_d) with l_d the exact sum.
    """
    tra, tfb2 = T.as_tensor(d_real_a), T.as_tensor(d_fake_b2)
    trb, tfa2 = T.as_tensor(d_real_b), T.as_tensor(d_fake_a2)
    if mode == "critic":
        l_d1 = T.mean(tfb2) - T.mean(tra)
        l_d0 = T.mean(tfa2) - T.mean(trb)
    else:
        tra = _checked_prob(tra, "d_real_a", strict)
        trb = _checked_prob(trb, "d_real_b", strict)
        one_m_fb2 = _checked_prob(1.0 - tfb2, "1 - d_fake_b2", strict)
        one_m_fa2 = _checked_prob(1.0 - tfa2, "1 - d_fake_a2", strict)
        l_d1 = -T.mean(T.log(tra)) - T.mean(T.log(one_m_fb2))
        l_d0 = -T.mean(T.log(trb)) - T.mean(T.log(one_m_fa2))
    return l_d1, l_d0, l_d1 + l_d0

"""Encoder, decoder and label-conditioned discriminator.

All three are dense stacks; at 16x16 synthetic resolution an MLP is enough.
Hidden layers get batch normalization (configurable off for the
discriminator) and leaky ReLU. The decoder ends in a sigmoid so pixels stay
in [0, 1]; the discriminator ends linear and is squashed only in
probability mode. Parameters live in plain float32 buffers owned by
:class:`Mlp`; a forward pass wraps them in graph tensors on demand, so
evaluation never builds gradient state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import genome
from . import tensor as T
from .errors import DimensionError, DomainError
from .genome import ChildQuad, GenomeLayout, LatentCode


@dataclass(frozen=True)
class NetConfig:
    image_shape: tuple[int, int, int] = (1, 16, 16)
    enc_hidden: tuple[int, ...] = (256, 128)
    dec_hidden: tuple[int, ...] = (128, 256)
    disc_hidden: tuple[int, ...] = (128,)
    leaky_slope: float = 0.2
    disc_batch_norm: bool = False
    bn_eps: float = 1e-5
    bn_momentum: float = 0.9

    @property
    def pixels(self) -> int:
        c, h, w = self.image_shape
        return c * h * w


class ImageBatch:
    """A (batch, channels, height, width) stack of images in [0, 1]."""

    def __init__(self, data):
        arr = np.asarray(data, dtype=np.float32)
        if arr.ndim != 4:
            raise DimensionError(f"image batch must be 4-D, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise DomainError("image batch contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise DomainError("image batch values must lie in [0, 1]")
        self.data = arr

    def __len__(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def flat(self) -> np.ndarray:
        return self.data.reshape(self.data.shape[0], -1)


class Mlp:
    """Dense stack with optional batch norm plus leaky ReLU on hidden layers."""

    def __init__(self, prefix: str, sizes: list[int], rng: np.random.Generator, *,
                 bn_hidden: bool, slope: float, out_activation: str,
                 bn_eps: float, bn_momentum: float):
        self.prefix = prefix
        self.sizes = list(sizes)
        self.bn_hidden = bn_hidden
        self.slope = slope
        self.out_activation = out_activation
        self.bn_eps = bn_eps
        self.bn_momentum = bn_momentum
        self.weights: dict[str, np.ndarray] = {}
        self.bn_states: list[T.BatchNormState] = []
        n_layers = len(sizes) - 1
        for j in range(n_layers):
            fan_in, fan_out = sizes[j], sizes[j + 1]
            hidden = j < n_layers - 1
            std = np.sqrt(2.0 / fan_in) if hidden else np.sqrt(1.0 / fan_in)
            self.weights[f"w{j}"] = (rng.standard_normal((fan_in, fan_out)) * std
                                     ).astype(np.float32)
            self.weights[f"b{j}"] = np.zeros(fan_out, dtype=np.float32)
            if hidden and bn_hidden:
                self.weights[f"g{j}"] = np.ones(fan_out, dtype=np.float32)
                self.weights[f"beta{j}"] = np.zeros(fan_out, dtype=np.float32)
                self.bn_states.append(T.BatchNormState(fan_out))

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    def named_weights(self) -> dict[str, np.ndarray]:
        return {f"{self.prefix}.{k}": v for k, v in self.weights.items()}

    def named_stats(self) -> dict[str, np.ndarray]:
        out = {}
        for j, st in enumerate(self.bn_states):
            out[f"{self.prefix}.bn{j}.mean"] = st.mean
            out[f"{self.prefix}.bn{j}.var"] = st.var
        return out

    def load_stats(self, arrays: dict[str, np.ndarray]) -> None:
        for j, st in enumerate(self.bn_states):
            st.mean = arrays[f"{self.prefix}.bn{j}.mean"].astype(np.float32)
            st.var = arrays[f"{self.prefix}.bn{j}.var"].astype(np.float32)

    def make_tensors(self) -> dict[str, T.Tensor]:
        return {f"{self.prefix}.{k}": T.Tensor(v, requires_grad=True, name=f"{self.prefix}.{k}")
                for k, v in self.weights.items()}

    def _param(self, key: str, tensors: dict[str, T.Tensor] | None) -> T.Tensor:
        full = f"{self.prefix}.{key}"
        if tensors is not None and full in tensors:
            return tensors[full]
        return T.Tensor(self.weights[key], name=full)

    def forward(self, x: T.Tensor, mode: str,
                tensors: dict[str, T.Tensor] | None = None) -> T.Tensor:
        h = x
        bn_idx = 0
        for j in range(self.n_layers):
            h = T.dense(h, self._param(f"w{j}", tensors), self._param(f"b{j}", tensors))
            if j < self.n_layers - 1:
                if self.bn_hidden:
                    h = T.batch_norm(h, self._param(f"g{j}", tensors),
                                     self._param(f"beta{j}", tensors), mode,
                                     self.bn_states[bn_idx], eps=self.bn_eps,
                                     momentum=self.bn_momentum)
                    bn_idx += 1
                h = T.leaky_relu(h, self.slope)
        if self.out_activation == "sigmoid":
            h = T.sigmoid(h)
        return h


@dataclass
class Models:
    """Encoder, decoder, and one discriminator per attribute.

    The cycling schedule asks "is this image real, given this bit?" with a
    different attribute meaning per step; a shared network cannot tell
    which attribute a bit refers to, which opens an entangled equilibrium
    where hybrids satisfy the wrong attribute. Each attribute therefore
    owns a discriminator with the single-bit interface.
    """

    enc: Mlp
    dec: Mlp
    discs: list[Mlp]
    layout: GenomeLayout
    cfg: NetConfig

    def disc_for(self, attribute: int) -> Mlp:
        if not 1 <= attribute <= len(self.discs):
            raise IndexError(
                f"attribute index {attribute} out of range 1..{len(self.discs)}")
        return self.discs[attribute - 1]

    def _parts(self, parts) -> list[Mlp]:
        nets_list: list[Mlp] = []
        for part in parts:
            if part == "enc":
                nets_list.append(self.enc)
            elif part == "dec":
                nets_list.append(self.dec)
            elif part == "disc":
                nets_list.extend(self.discs)
            elif part.startswith("disc"):
                nets_list.append(self.disc_for(int(part[4:])))
            else:
                raise ValueError(f"unknown model part {part!r}")
        return nets_list

    def trainable(self, parts=("enc", "dec", "disc")) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for net in self._parts(parts):
            out.update(net.named_weights())
        return out

    def make_tensors(self, parts=("enc", "dec", "disc")) -> dict[str, T.Tensor]:
        out: dict[str, T.Tensor] = {}
        for net in self._parts(parts):
            out.update(net.make_tensors())
        return out


def init_models(cfg: NetConfig, layout: GenomeLayout, rng: np.random.Generator) -> Models:
    total = layout.total_len
    enc = Mlp("enc", [cfg.pixels, *cfg.enc_hidden, total], rng, bn_hidden=True,
              slope=cfg.leaky_slope, out_activation="linear",
              bn_eps=cfg.bn_eps, bn_momentum=cfg.bn_momentum)
    dec = Mlp("dec", [total, *cfg.dec_hidden, cfg.pixels], rng, bn_hidden=True,
              slope=cfg.leaky_slope, out_activation="sigmoid",
              bn_eps=cfg.bn_eps, bn_momentum=cfg.bn_momentum)
    discs = [Mlp(f"disc{s}", [cfg.pixels + 1, *cfg.disc_hidden, 1], rng,
                 bn_hidden=cfg.disc_batch_norm, slope=cfg.leaky_slope,
                 out_activation="linear", bn_eps=cfg.bn_eps,
                 bn_momentum=cfg.bn_momentum)
             for s in range(1, layout.n + 1)]
    return Models(enc=enc, dec=dec, discs=discs, layout=layout, cfg=cfg)


# -- graph-level passes ------------------------------------------------------


def encode_graph(x: T.Tensor, models: Models, mode: str,
                 tensors: dict[str, T.Tensor] | None = None) -> T.Tensor:
    if x.data.ndim != 2 or x.data.shape[1] != models.cfg.pixels:
        raise DimensionError(
            f"encoder input shape {x.data.shape} does not match {models.cfg.pixels} pixels")
    return models.enc.forward(x, mode, tensors)


def decode_graph(codes: T.Tensor, models: Models, mode: str,
                 tensors: dict[str, T.Tensor] | None = None) -> T.Tensor:
    if codes.data.ndim != 2 or codes.data.shape[1] != models.layout.total_len:
        raise DimensionError(
            f"decoder input shape {codes.data.shape} does not match layout "
            f"total_len {models.layout.total_len}")
    return models.dec.forward(codes, mode, tensors)


def discriminate_graph(images: T.Tensor, label_bit: int, models: Models,
                       attribute: int = 1, gan_mode: str = "probability",
                       mode: str = "eval",
                       tensors: dict[str, T.Tensor] | None = None) -> T.Tensor:
    if label_bit not in (0, 1):
        raise DomainError(f"label bit must be 0 or 1, got {label_bit}")
    bit_col = T.Tensor(np.full((images.data.shape[0], 1), label_bit, dtype=images.data.dtype))
    h = models.disc_for(attribute).forward(T.concat_cols([images, bit_col]), mode, tensors)
    if gan_mode == "probability":
        h = T.sigmoid(h)
    return h


@dataclass
class ForwardChildren:
    """Result of one paired pass: four decoded child batches, the two raw
    encodings, and the per-pair latent quads (values, detached)."""

    a1: T.Tensor
    b1: T.Tensor
    a2: T.Tensor
    b2: T.Tensor
    enc_a: T.Tensor
    enc_b: T.Tensor
    quads: list[ChildQuad] = field(default_factory=list)


def forward_children(a, b, i: int, models: Models, mode: str = "train",
                     annihilate: bool = True,
                     tensors: dict[str, T.Tensor] | None = None) -> ForwardChildren:
    """Encode a pair batch and decode the four splice children.

    ``a`` must be the batch carrying attribute ``i`` and ``b`` the batch
    lacking it; the caller owns that orientation. Exactly two encoder calls
    and four decoder calls happen per invocation. With ``annihilate`` off
    the hybrids swap the piece instead of zeroing it (the ablation mode).
    """
    layout = models.layout
    xa = a.flat() if isinstance(a, ImageBatch) else np.asarray(a, dtype=np.float32)
    xb = b.flat() if isinstance(b, ImageBatch) else np.asarray(b, dtype=np.float32)
    if xa.shape != xb.shape:
        raise DimensionError(f"pair batches differ in shape: {xa.shape} vs {xb.shape}")
    batch = xa.shape[0]

    # Both sides ride through one stacked pass (likewise the four children
    # below), so train-mode normalization sees the class mixture and the
    # running statistics remain valid for single images at evaluation time.
    # Each image is still encoded exactly once, each child decoded once.
    stacked = encode_graph(T.Tensor(np.concatenate([xa, xb], axis=0)), models,
                           mode, tensors)
    ea = T.slice_rows(stacked, 0, batch)
    eb = T.slice_rows(stacked, batch, 2 * batch)

    keep = T.Tensor(layout.keep_mask(i, dtype=ea.data.dtype))
    drop = T.Tensor(1.0 - keep.data)
    if annihilate:
        lat_a1 = ea
        lat_b1 = T.mul(eb, keep)
        lat_a2 = T.mul(ea, keep)
        lat_b2 = T.add(T.mul(eb, keep), T.mul(ea, drop))
    else:
        lat_a1 = ea
        lat_b1 = eb
        lat_a2 = T.add(T.mul(ea, keep), T.mul(eb, drop))
        lat_b2 = T.add(T.mul(eb, keep), T.mul(ea, drop))

    children = decode_graph(T.concat_rows([lat_a1, lat_b1, lat_a2, lat_b2]),
                            models, mode, tensors)
    out = ForwardChildren(
        a1=T.slice_rows(children, 0, batch),
        b1=T.slice_rows(children, batch, 2 * batch),
        a2=T.slice_rows(children, 2 * batch, 3 * batch),
        b2=T.slice_rows(children, 3 * batch, 4 * batch),
        enc_a=ea,
        enc_b=eb,
        quads=_build_quads(ea.data, eb.data, i, layout, annihilate),
    )
    if __debug__ and annihilate:
        _check_quads(out.quads, (lat_a1, lat_b1, lat_a2, lat_b2))
    return out


def _build_quads(ea: np.ndarray, eb: np.ndarray, i: int, layout: GenomeLayout,
                 annihilate: bool) -> list[ChildQuad]:
    quads = []
    for k in range(ea.shape[0]):
        ca = LatentCode(ea[k].copy(), layout)
        cb = LatentCode(eb[k].copy(), layout)
        if annihilate:
            quads.append(genome.crossbreed(ca, cb, i))
        else:
            sa, sb = genome.swap_piece(ca, cb, i)
            quads.append(ChildQuad(latent_A1=ca, latent_B1=cb,
                                   latent_A2=sa, latent_B2=sb))
    return quads


def _check_quads(quads: list[ChildQuad], lats) -> None:
    lat_a1, lat_b1, lat_a2, lat_b2 = (t.data for t in lats)
    for k, q in enumerate(quads):
        ok = (np.array_equal(q.latent_A1.values, lat_a1[k])
              and np.array_equal(q.latent_B1.values, lat_b1[k])
              and np.array_equal(q.latent_A2.values, lat_a2[k])
              and np.array_equal(q.latent_B2.values, lat_b2[k]))
        if not ok:
            raise AssertionError(f"child quad {k} disagrees with graph latents")


# -- value-level passes ------------------------------------------------------


def encode(x, models: Models, mode: str = "eval") -> list[LatentCode]:
    """One latent code per image, layout attached."""
    xa = x.flat() if isinstance(x, ImageBatch) else np.asarray(x, dtype=np.float32)
    codes = encode_graph(T.Tensor(xa), models, mode)
    return [LatentCode(codes.data[k].copy(), models.layout)
            for k in range(codes.data.shape[0])]


def decode(codes, models: Models, mode: str = "eval") -> ImageBatch:
    """Decode codes (a LatentCode list or a 2-D array) back to images."""
    if isinstance(codes, (list, tuple)):
        rows = np.stack([c.values for c in codes]).astype(np.float32)
    else:
        rows = np.asarray(codes, dtype=np.float32)
    imgs = decode_graph(T.Tensor(rows), models, mode)
    return ImageBatch(imgs.data.reshape(rows.shape[0], *models.cfg.image_shape))


def discriminate(x, label_bit: int, models: Models, attribute: int = 1,
                 gan_mode: str = "probability", mode: str = "eval") -> np.ndarray:
    """Realness score per image from one attribute's discriminator,
    conditioned on one label bit.

    Probability mode squashes to (0, 1); critic mode returns the raw score.
    """
    xa = x.flat() if isinstance(x, ImageBatch) else np.asarray(x, dtype=np.float32)
    out = discriminate_graph(T.Tensor(xa), label_bit, models, attribute, gan_mode, mode)
    return out.data.reshape(-1).copy()

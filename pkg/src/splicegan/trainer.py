"""Alternating adversarial training loop.

Each step draws a batch of oriented pairs at one scheduled attribute,
updates the discriminator ``d_steps_per_g_step`` times on its two-sided
loss, then updates encoder and decoder once on reconstruction plus the
adversarial term. In critic mode the discriminator weights are clipped to
``[-clip_bound, clip_bound]`` after every discriminator update and its
outputs are used unsquashed.

Everything that moves is owned by one training thread; a fixed seed and
single-threaded kernels make runs bit-reproducible, and checkpoints carry
the optimizer accumulators, normalization statistics, step counter and the
pair-stream state so a resumed run continues the exact same trajectory.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import checkpoint as ckpt_io
from . import data as data_mod
from . import nets, optim, sampler
from . import tensor as T
from .errors import SchedulerExhaustedError, TrainingAbortedError
from .genome import GenomeLayout
from .losses import LossReport, discriminator_loss, generator_gan_loss, reconstruction_loss
from .nets import ImageBatch, Models, NetConfig

log = logging.getLogger(__name__)

METRIC_COLUMNS = ("step", "attribute", "l_reconstruct", "l_gan", "l_g",
                  "l_d1", "l_d0", "l_d")


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 2000
    batch_pairs: int = 16
    lr: float = 5e-5
    lambda_gan: float = 1.0
    d_steps_per_g_step: int | None = None  # defaults to 1 (probability) / 5 (critic)
    gan_mode: str = "probability"
    clip_bound: float = 0.01
    gan_conditioning: str = "imitate"  # or "literal": score hybrids under their source bits
    annihilate: bool = True
    pair_strategy: str = "iterative"  # or "random"
    seed: int = 0
    rms_decay: float = 0.9
    rms_epsilon: float = 1e-8
    checkpoint_every: int = 0  # 0: final checkpoint only

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be at least 1")
        if self.batch_pairs < 1:
            raise ValueError("batch_pairs must be at least 1")
        if self.gan_mode not in ("probability", "critic"):
            raise ValueError(f"unknown gan_mode {self.gan_mode!r}")
        if self.gan_mode == "critic" and self.clip_bound <= 0:
            raise ValueError("clip_bound must be positive in critic mode")
        if self.gan_conditioning not in ("imitate", "literal"):
            raise ValueError(f"unknown gan_conditioning {self.gan_conditioning!r}")
        if self.pair_strategy not in ("iterative", "random"):
            raise ValueError(f"unknown pair_strategy {self.pair_strategy!r}")

    @property
    def d_steps(self) -> int:
        if self.d_steps_per_g_step is not None:
            return self.d_steps_per_g_step
        return 5 if self.gan_mode == "critic" else 1


@dataclass
class StepRecord:
    step: int
    attribute: int
    report: LossReport
    wall_time: float


@dataclass
class TrainMetrics:
    """Append-only per-step records; the CSV view drops wall time so a
    fixed-seed rerun reproduces it byte for byte."""

    records: list[StepRecord] = field(default_factory=list)

    def append(self, record: StepRecord) -> None:
        self.records.append(record)

    def to_csv(self) -> str:
        lines = [",".join(METRIC_COLUMNS)]
        for r in self.records:
            rep = r.report
            vals = (r.step, r.attribute, rep.l_reconstruct, rep.l_gan, rep.l_g,
                    rep.l_d1, rep.l_d0, rep.l_d)
            lines.append(",".join(repr(v) if isinstance(v, float) else str(v)
                                  for v in vals))
        return "\n".join(lines) + "\n"

    def attribute_counts(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for r in self.records:
            out[r.attribute] = out.get(r.attribute, 0) + 1
        return out


def _finite_or_abort(value: float, what: str, step: int) -> float:
    if not np.isfinite(value):
        raise TrainingAbortedError(f"non-finite {what} at step {step}")
    return value


def _clip_weights(mlp: nets.Mlp, bound: float) -> None:
    for arr in mlp.weights.values():
        np.clip(arr, -bound, bound, out=arr)


def train_step(models: Models, opt: optim.OptimizerState, cfg: TrainConfig,
               batch_a: ImageBatch, batch_b: ImageBatch, attribute: int,
               step: int = 0) -> LossReport:
    """One update on a batch of oriented pairs: discriminator first, then
    encoder and decoder together."""
    if len(batch_a) != len(batch_b):
        raise ValueError("pair batches must have equal size")
    flat_a = T.Tensor(batch_a.flat())
    flat_b = T.Tensor(batch_b.flat())
    if cfg.gan_conditioning == "imitate":
        bit_a2, bit_b2 = 0, 1
    else:
        bit_a2, bit_b2 = 1, 0

    disc_part = f"disc{attribute}"
    l_d1_v = l_d0_v = 0.0
    for _ in range(cfg.d_steps):
        fakes = nets.forward_children(batch_a, batch_b, attribute, models,
                                      mode="train", annihilate=cfg.annihilate)
        dt = models.make_tensors((disc_part,))
        d_real_a = nets.discriminate_graph(flat_a, 1, models, attribute,
                                           cfg.gan_mode, "train", dt)
        d_fake_b2 = nets.discriminate_graph(T.Tensor(fakes.b2.data), 1, models,
                                            attribute, cfg.gan_mode, "train", dt)
        d_real_b = nets.discriminate_graph(flat_b, 0, models, attribute,
                                           cfg.gan_mode, "train", dt)
        d_fake_a2 = nets.discriminate_graph(T.Tensor(fakes.a2.data), 0, models,
                                            attribute, cfg.gan_mode, "train", dt)
        l_d1, l_d0, l_d = discriminator_loss(d_real_a, d_fake_b2, d_real_b,
                                             d_fake_a2, mode=cfg.gan_mode)
        l_d1_v, l_d0_v = l_d1.item(), l_d0.item()
        _finite_or_abort(l_d.item(), "discriminator loss", step)
        l_d.backward()
        disc_params = models.trainable((disc_part,))
        optim.rmsprop_step(disc_params, {k: t.grad for k, t in dt.items()}, opt)
        if cfg.gan_mode == "critic":
            _clip_weights(models.disc_for(attribute), cfg.clip_bound)

    gt = models.make_tensors(("enc", "dec"))
    children = nets.forward_children(batch_a, batch_b, attribute, models,
                                     mode="train", annihilate=cfg.annihilate,
                                     tensors=gt)
    d_a2 = nets.discriminate_graph(children.a2, bit_a2, models, attribute,
                                   cfg.gan_mode, "train")
    d_b2 = nets.discriminate_graph(children.b2, bit_b2, models, attribute,
                                   cfg.gan_mode, "train")
    l_gan = generator_gan_loss(d_a2, d_b2, mode=cfg.gan_mode)
    l_rec = reconstruction_loss(flat_a, children.a1, flat_b, children.b1)
    l_g = l_rec + cfg.lambda_gan * l_gan
    _finite_or_abort(l_g.item(), "generator loss", step)
    l_g.backward()
    gen_params = models.trainable(("enc", "dec"))
    optim.rmsprop_step(gen_params, {k: t.grad for k, t in gt.items()}, opt)

    return LossReport.build(l_reconstruct=l_rec.item(), l_gan=l_gan.item(),
                            lambda_gan=cfg.lambda_gan, l_d1=l_d1_v, l_d0=l_d0_v)


# -- pair batching -----------------------------------------------------------


def assemble_batches(ds: data_mod.AttrDataset,
                     pairs: list[sampler.UsefulPair]) -> tuple[ImageBatch, ImageBatch]:
    a = ImageBatch(ds.image_array([p.index_a for p in pairs]))
    b = ImageBatch(ds.image_array([p.index_b for p in pairs]))
    return a, b


def _draw_random_strategy(labels: np.ndarray, rng: np.random.Generator,
                          max_tries: int = 100000) -> sampler.UsefulPair:
    for _ in range(max_tries):
        (a, b), useful = sampler.random_pair(labels, rng)
        if useful:
            return sampler.orient_random_pair(labels, a, b, rng)
    raise SchedulerExhaustedError("random pairing found no useful pair")


# -- checkpoint assembly -----------------------------------------------------


def _rng_state_to_json(gen: np.random.Generator) -> str:
    def clean(obj):
        if isinstance(obj, dict):
            return {k: clean(v) for k, v in obj.items()}
        if isinstance(obj, np.ndarray):
            return {"__array__": [int(v) for v in obj.ravel()], "dtype": str(obj.dtype)}
        if isinstance(obj, (np.integer,)):
            return int(obj)
        return obj

    return json.dumps(clean(gen.bit_generator.state), separators=(",", ":"), sort_keys=True)


def _rng_state_from_json(blob: str) -> np.random.Generator:
    def restore(obj):
        if isinstance(obj, dict):
            if "__array__" in obj:
                return np.array(obj["__array__"], dtype=obj["dtype"])
            return {k: restore(v) for k, v in obj.items()}
        return obj

    state = restore(json.loads(blob))
    gen = np.random.Generator(np.random.Philox())
    gen.bit_generator.state = state
    return gen


def build_checkpoint(models: Models, opt: optim.OptimizerState, cfg: TrainConfig,
                     step: int, pair_rng: np.random.Generator | None) -> ckpt_io.Checkpoint:
    meta = {
        "step": str(step),
        "gan_mode": cfg.gan_mode,
        "train_config": json.dumps(_train_cfg_dict(cfg), separators=(",", ":"),
                                   sort_keys=True),
        "net_config": json.dumps(_net_cfg_dict(models.cfg), separators=(",", ":"),
                                 sort_keys=True),
    }
    if pair_rng is not None:
        meta["pair_rng"] = _rng_state_to_json(pair_rng)
    arrays: dict[str, np.ndarray] = {}
    arrays.update(models.trainable())
    for net in (models.enc, models.dec, *models.discs):
        arrays.update(net.named_stats())
    for name, acc in opt.acc.items():
        arrays[f"opt.acc.{name}"] = acc
    return ckpt_io.Checkpoint(layout=models.layout, meta=meta, arrays=arrays)


def _train_cfg_dict(cfg: TrainConfig) -> dict:
    return {
        "steps": cfg.steps, "batch_pairs": cfg.batch_pairs, "lr": cfg.lr,
        "lambda_gan": cfg.lambda_gan, "d_steps_per_g_step": cfg.d_steps_per_g_step,
        "gan_mode": cfg.gan_mode, "clip_bound": cfg.clip_bound,
        "gan_conditioning": cfg.gan_conditioning, "annihilate": cfg.annihilate,
        "pair_strategy": cfg.pair_strategy, "seed": cfg.seed,
        "rms_decay": cfg.rms_decay, "rms_epsilon": cfg.rms_epsilon,
        "checkpoint_every": cfg.checkpoint_every,
    }


def _net_cfg_dict(cfg: NetConfig) -> dict:
    return {
        "image_shape": list(cfg.image_shape), "enc_hidden": list(cfg.enc_hidden),
        "dec_hidden": list(cfg.dec_hidden), "disc_hidden": list(cfg.disc_hidden),
        "leaky_slope": cfg.leaky_slope, "disc_batch_norm": cfg.disc_batch_norm,
        "bn_eps": cfg.bn_eps, "bn_momentum": cfg.bn_momentum,
    }


def restore_models(ck: ckpt_io.Checkpoint) -> tuple[Models, optim.OptimizerState,
                                                    TrainConfig, int]:
    nc = json.loads(ck.meta["net_config"])
    net_cfg = NetConfig(
        image_shape=tuple(nc["image_shape"]), enc_hidden=tuple(nc["enc_hidden"]),
        dec_hidden=tuple(nc["dec_hidden"]), disc_hidden=tuple(nc["disc_hidden"]),
        leaky_slope=nc["leaky_slope"], disc_batch_norm=nc["disc_batch_norm"],
        bn_eps=nc["bn_eps"], bn_momentum=nc["bn_momentum"])
    tc = json.loads(ck.meta["train_config"])
    cfg = TrainConfig(**tc)
    models = nets.init_models(net_cfg, ck.layout, np.random.Generator(np.random.Philox(key=0)))
    for name, buf in models.trainable().items():
        buf[...] = ck.require(name)
    for net in (models.enc, models.dec, *models.discs):
        net.load_stats(ck.arrays)
    opt = optim.OptimizerState(learning_rate=cfg.lr, decay=cfg.rms_decay,
                               epsilon=cfg.rms_epsilon)
    prefix = "opt.acc."
    for name, arr in ck.arrays.items():
        if name.startswith(prefix):
            opt.acc[name[len(prefix):]] = arr.copy()
    return models, opt, cfg, int(ck.meta["step"])


def restore_pair_rng(ck: ckpt_io.Checkpoint) -> np.random.Generator | None:
    blob = ck.meta.get("pair_rng")
    return _rng_state_from_json(blob) if blob else None


# -- the loop ----------------------------------------------------------------


def train(ds: data_mod.AttrDataset, layout: GenomeLayout, net_cfg: NetConfig,
          cfg: TrainConfig, out_dir, resume=None) -> tuple[str, TrainMetrics]:
    """Run the configured schedule over the dataset; returns the final
    checkpoint path and the collected metrics.

    With ``resume`` pointing at a checkpoint, the step counter, parameters,
    optimizer accumulators and pair stream continue exactly where that
    checkpoint left off.
    """
    os.makedirs(out_dir, exist_ok=True)
    labels = ds.labels()
    if labels.shape[0] == 0:
        raise ValueError("cannot train on an empty dataset")

    if resume is not None:
        ck = ckpt_io.load(resume)
        models, opt, saved_cfg, start_step = restore_models(ck)
        cfg = replace(saved_cfg, steps=cfg.steps)
        pair_rng = restore_pair_rng(ck)
        if pair_rng is None:
            pair_rng = np.random.Generator(np.random.Philox(key=(cfg.seed << 64) + 2))
    else:
        weight_rng = np.random.Generator(np.random.Philox(key=(cfg.seed << 64) + 1))
        models = nets.init_models(net_cfg, layout, weight_rng)
        if cfg.gan_mode == "critic":
            for disc in models.discs:
                _clip_weights(disc, cfg.clip_bound)
        opt = optim.OptimizerState(learning_rate=cfg.lr, decay=cfg.rms_decay,
                                   epsilon=cfg.rms_epsilon)
        pair_rng = np.random.Generator(np.random.Philox(key=(cfg.seed << 64) + 2))
        start_step = 0

    state = sampler.SamplerState.from_labels(labels, pair_rng)
    metrics = TrainMetrics()

    for step in range(start_step + 1, cfg.steps + 1):
        if cfg.pair_strategy == "iterative":
            attribute, pairs = sampler.next_pairs(state, cfg.batch_pairs)
        else:
            pairs = [_draw_random_strategy(labels, pair_rng)]
            attribute = pairs[0].attribute
        if __debug__:
            for p in pairs:
                assert labels[p.index_a][p.attribute - 1] == 1
                assert labels[p.index_b][p.attribute - 1] == 0
        batch_a, batch_b = assemble_batches(ds, pairs)
        t0 = time.perf_counter()
        try:
            report = train_step(models, opt, cfg, batch_a, batch_b, attribute,
                                step=step)
        except TrainingAbortedError as exc:
            diag = os.path.join(out_dir, f"model_diagnostic_{step:06d}.ckpt")
            ckpt_io.save(diag, build_checkpoint(models, opt, cfg, step, pair_rng))
            raise TrainingAbortedError(f"{exc}; diagnostic checkpoint written",
                                       checkpoint_path=diag) from exc
        metrics.append(StepRecord(step=step, attribute=attribute, report=report,
                                  wall_time=time.perf_counter() - t0))
        if cfg.checkpoint_every and step % cfg.checkpoint_every == 0 and step < cfg.steps:
            path = os.path.join(out_dir, f"model_{step:06d}.ckpt")
            ckpt_io.save(path, build_checkpoint(models, opt, cfg, step, pair_rng))

    final_path = os.path.join(out_dir, "model_final.ckpt")
    ckpt_io.save(final_path, build_checkpoint(models, opt, cfg, cfg.steps, pair_rng))
    with open(os.path.join(out_dir, "metrics.csv"), "w", encoding="ascii") as fh:
        fh.write(metrics.to_csv())
    return final_path, metrics


# -- evaluation --------------------------------------------------------------


def sample_eval_pairs(ds: data_mod.AttrDataset, attribute: int, count: int,
                      rng: np.random.Generator) -> list[sampler.UsefulPair]:
    labels = ds.labels()
    pos = np.flatnonzero(labels[:, attribute - 1] == 1)
    neg = np.flatnonzero(labels[:, attribute - 1] == 0)
    if len(pos) == 0 or len(neg) == 0:
        raise SchedulerExhaustedError(
            f"attribute {attribute} has an empty side in the evaluation set")
    ia = rng.integers(0, len(pos), size=count)
    ib = rng.integers(0, len(neg), size=count)
    return [sampler.UsefulPair(int(pos[a]), int(neg[b]), attribute)
            for a, b in zip(ia, ib)]


def evaluate_swap_success(models: Models, ds: data_mod.AttrDataset, attribute: int,
                          count: int = 32, seed: int = 0) -> float:
    """Fraction of held-out pairs where both hybrids carry the right bit:
    the detector sees the attribute gone from A2 and present in B2."""
    rng = np.random.Generator(np.random.Philox(key=(seed << 64) + 3))
    pairs = sample_eval_pairs(ds, attribute, count, rng)
    batch_a, batch_b = assemble_batches(ds, pairs)
    fc = nets.forward_children(batch_a, batch_b, attribute, models, mode="eval")
    shape = models.cfg.image_shape
    hits = 0
    for k in range(len(pairs)):
        a2 = fc.a2.data[k].reshape(shape)
        b2 = fc.b2.data[k].reshape(shape)
        if data_mod.oracle_attr(a2, attribute) == 0 and \
                data_mod.oracle_attr(b2, attribute) == 1:
            hits += 1
    return hits / len(pairs)


def evaluate_reconstruction(models: Models, ds: data_mod.AttrDataset,
                            limit: int | None = None) -> float:
    """Mean per-pixel L1 between images and their direct reconstructions."""
    count = len(ds) if limit is None else min(limit, len(ds))
    batch = ImageBatch(ds.image_array(range(count)))
    codes = nets.encode(batch, models)
    recon = nets.decode(codes, models)
    return float(np.abs(batch.data - recon.data).mean())


def identity_transfer_fraction(models: Models, ds: data_mod.AttrDataset,
                               attribute: int, count: int = 32,
                               seed: int = 0) -> float:
    """Fraction of pairs whose hybrid A2 sits closer to B than to A in
    nuisance features, i.e. identity leaked across the swap."""
    rng = np.random.Generator(np.random.Philox(key=(seed << 64) + 4))
    pairs = sample_eval_pairs(ds, attribute, count, rng)
    batch_a, batch_b = assemble_batches(ds, pairs)
    fc = nets.forward_children(batch_a, batch_b, attribute, models, mode="eval")
    shape = models.cfg.image_shape
    leaked = 0
    for k in range(len(pairs)):
        a2 = fc.a2.data[k].reshape(shape)
        fa = data_mod.nuisance_features(batch_a.data[k])
        fb = data_mod.nuisance_features(batch_b.data[k])
        f2 = data_mod.nuisance_features(a2)
        if np.linalg.norm(f2 - fa) > np.linalg.norm(f2 - fb):
            leaked += 1
    return leaked / len(pairs)

"""Command-line surface.

Subcommands: ``generate`` (synthetic dataset to disk), ``train``,
``swap`` (six-image strip: originals, hybrids, reconstructions),
``interpolate`` (piece-blend strip or grid), ``analyze`` (balancedness and
expected-draw report) and ``simulate`` (Monte Carlo collection runs).
Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import checkpoint as ckpt_io
from . import config as config_mod
from . import data as data_mod
from . import genome, nets, sampler, trainer
from .errors import ConfigError, SpliceError, UsefulnessError

log = logging.getLogger(__name__)

GUTTER = 1          # pixels between strip cells
GUTTER_VALUE = 0.5


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="configuration file (key = value lines)")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--out", help="output path or directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splicegan",
        description="attribute disentangling with spliceable latent codes")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="render a synthetic dataset to disk")
    _add_common(p)

    p = sub.add_parser("train", help="train on a dataset directory or fresh synthetic data")
    _add_common(p)
    p.add_argument("--data", help="dataset directory (attributes.txt plus graymaps); "
                                  "omitted: synthesize from the config")
    p.add_argument("--resume", help="checkpoint to continue from")
    p.add_argument("--no-annihilate", action="store_true",
                   help="ablation: swap pieces instead of zeroing the recessive one")
    p.add_argument("--strategy", choices=("iterative", "random"),
                   help="override the configured pair strategy")

    p = sub.add_parser("swap", help="emit the A,B,A2,B2,A1,B1 strip for one pair")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image-a", required=True)
    p.add_argument("--image-b", required=True)
    p.add_argument("--attribute", type=int, required=True)
    p.add_argument("--a-dominant", action="store_true",
                   help="trust the given order instead of the attribute detector")
    p.add_argument("--force", action="store_true",
                   help="proceed even if the pair does not differ at the attribute")

    p = sub.add_parser("interpolate", help="piece-blend strip (one attribute) or grid (two)")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image-a", required=True)
    p.add_argument("--image-b", required=True)
    p.add_argument("--attributes", required=True,
                   help="one or two comma-separated attribute indices")
    p.add_argument("--grid", type=int, default=5, help="samples per axis (>= 2)")

    p = sub.add_parser("analyze", help="balancedness, criterion and expected draw counts")
    _add_common(p)
    p.add_argument("--attr-file", help="attribute list file to take the census from")
    p.add_argument("--census", help="comma-separated counts in binary pattern order")

    p = sub.add_parser("simulate", help="Monte Carlo pair-collection runs")
    _add_common(p)
    p.add_argument("--census", required=True,
                   help="comma-separated counts in binary pattern order")
    p.add_argument("--strategy", choices=("random", "iterative"), default="random")
    p.add_argument("--runs", type=int, default=10000)

    return parser


def _load_config(args) -> config_mod.Config:
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = str(args.seed)
    return config_mod.load_config(getattr(args, "config", None), overrides)


def _require_out(args, what: str) -> str:
    if not args.out:
        raise ConfigError(f"--out is required for {what}")
    return args.out


# -- commands ----------------------------------------------------------------


def cmd_generate(args) -> int:
    cfg = _load_config(args)
    out_dir = _require_out(args, "generate")
    spec = data_mod.SynthSpec(census=cfg.census(), resolution=cfg.resolution,
                              noise_level=cfg.noise_level, seed=cfg.seed)
    ds = data_mod.synth_dataset(spec)
    attr_path = data_mod.save_dataset(ds, out_dir)
    print(f"wrote {len(ds)} images and {attr_path}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args)
    out_dir = _require_out(args, "train")
    overrides = {}
    if args.no_annihilate:
        overrides["annihilate"] = "false"
    if args.strategy:
        overrides["pair_strategy"] = args.strategy
    if overrides:
        cfg = config_mod.load_config(getattr(args, "config", None), {
            **({"seed": str(args.seed)} if args.seed is not None else {}),
            **overrides})
    if args.data:
        ds = data_mod.load_attr_list(
            args.data, f"{args.data}/attributes.txt", resolution=cfg.resolution,
            attributes=list(cfg.attributes) or None)
    else:
        spec = data_mod.SynthSpec(census=cfg.census(), resolution=cfg.resolution,
                                  noise_level=cfg.noise_level, seed=cfg.seed)
        ds = data_mod.synth_dataset(spec)
    train_ds, _ = data_mod.split_train_test(ds, cfg.train_ratio, seed=cfg.seed)
    path, metrics = trainer.train(train_ds, cfg.layout(), cfg.net_config(),
                                  cfg.train_config(), out_dir, resume=args.resume)
    last = metrics.records[-1].report if metrics.records else None
    if last:
        print(f"finished {len(metrics.records)} steps: l_reconstruct={last.l_reconstruct:.4f} "
              f"l_d={last.l_d:.4f}")
    print(f"checkpoint: {path}")
    return 0


def _load_model(path):
    ck = ckpt_io.load(path)
    models, _, _, _ = trainer.restore_models(ck)
    return models


def _load_image(path, models) -> np.ndarray:
    plane = data_mod.read_pgm(path)
    res = models.cfg.image_shape[1]
    if plane.shape != (res, res):
        raise SpliceError(
            f"image {path} has shape {plane.shape}, model expects {(res, res)}")
    return plane[None, :, :]


def _compose_strip(cells: list[np.ndarray]) -> np.ndarray:
    h = cells[0].shape[0]
    gut = np.full((h, GUTTER), GUTTER_VALUE, dtype=np.float32)
    parts = []
    for k, cell in enumerate(cells):
        if k:
            parts.append(gut)
        parts.append(cell.astype(np.float32))
    return np.concatenate(parts, axis=1)


def _compose_grid(rows: list[list[np.ndarray]]) -> np.ndarray:
    strips = [_compose_strip(cells) for cells in rows]
    w = strips[0].shape[1]
    gut = np.full((GUTTER, w), GUTTER_VALUE, dtype=np.float32)
    parts = []
    for k, strip in enumerate(strips):
        if k:
            parts.append(gut)
        parts.append(strip)
    return np.concatenate(parts, axis=0)


def cmd_swap(args) -> int:
    out = _require_out(args, "swap")
    models = _load_model(args.checkpoint)
    img_a = _load_image(args.image_a, models)
    img_b = _load_image(args.image_b, models)
    i = args.attribute

    if not args.a_dominant:
        bit_a = data_mod.oracle_attr(img_a, i)
        bit_b = data_mod.oracle_attr(img_b, i)
        if bit_a == bit_b and not args.force:
            raise UsefulnessError(
                f"images do not differ at attribute {i} (both read {bit_a}); "
                "pass --force to proceed or --a-dominant to assert the order")
        if bit_a == 0 and bit_b == 1:
            img_a, img_b = img_b, img_a
    batch_a = nets.ImageBatch(img_a[None])
    batch_b = nets.ImageBatch(img_b[None])
    fc = nets.forward_children(batch_a, batch_b, i, models, mode="eval")
    res = models.cfg.image_shape[1]
    cells = [img_a[0], img_b[0]] + [t.data[0].reshape(res, res)
                                    for t in (fc.a2, fc.b2, fc.a1, fc.b1)]
    data_mod.write_pgm(out, _compose_strip(cells))
    print(f"wrote {out}")
    return 0


def cmd_interpolate(args) -> int:
    out = _require_out(args, "interpolate")
    try:
        attrs = [int(t) for t in args.attributes.split(",") if t]
    except ValueError:
        raise ConfigError(f"bad --attributes value {args.attributes!r}")
    if len(attrs) not in (1, 2):
        raise ConfigError("--attributes takes one or two comma-separated indices")
    if args.grid < 2:
        raise ConfigError("--grid must be at least 2")
    models = _load_model(args.checkpoint)
    img_a = _load_image(args.image_a, models)
    img_b = _load_image(args.image_b, models)
    code_a = nets.encode(nets.ImageBatch(img_a[None]), models)[0]
    code_b = nets.encode(nets.ImageBatch(img_b[None]), models)[0]
    res = models.cfg.image_shape[1]
    alphas = [k / (args.grid - 1) for k in range(args.grid)]

    def decode_one(code) -> np.ndarray:
        return nets.decode([code], models).data[0, 0]

    if len(attrs) == 1:
        direction = np.array(code_b.piece(attrs[0]))
        cells = [decode_one(genome.interpolate_piece(code_a, attrs[0], direction, a))
                 for a in alphas]
        image = _compose_strip(cells)
    else:
        d1 = np.array(code_b.piece(attrs[0]))
        d2 = np.array(code_b.piece(attrs[1]))
        rows = []
        for a_row in alphas:
            row = []
            for a_col in alphas:
                code = genome.interpolate_piece(code_a, attrs[0], d1, a_row)
                code = genome.interpolate_piece(code, attrs[1], d2, a_col)
                row.append(decode_one(code))
            rows.append(row)
        image = _compose_grid(rows)
    data_mod.write_pgm(out, image)
    print(f"wrote {out}")
    return 0


def _census_from_args(args, cfg) -> sampler.LabelCensus:
    if getattr(args, "census", None):
        return sampler.LabelCensus.from_counts(
            [int(t) for t in args.census.replace(",", " ").split()])
    if getattr(args, "attr_file", None):
        import os
        ds = data_mod.load_attr_list(os.path.dirname(args.attr_file) or ".",
                                     args.attr_file, resolution=None,
                                     attributes=list(cfg.attributes) or None)
        return ds.census
    return cfg.census()


def cmd_analyze(args) -> int:
    cfg = _load_config(args)
    census = _census_from_args(args, cfg)
    rows = []
    for s in range(1, census.n + 1):
        try:
            rho = sampler.balancedness(census, s)
            crit = sampler.criterion_value(rho) if rho > 0 else float("nan")
            rows.append((s, rho, crit))
        except SpliceError as exc:
            print(f"attribute {s}: degenerate ({exc})")
            rows.append((s, float("nan"), float("nan")))

    print(f"census: m={census.m}, counts={census.counts}")
    print("attribute  rho        criterion")
    for s, rho, crit in rows:
        print(f"{s:<10d} {rho:<10.6g} {crit:.6g}")
    try:
        value, holds = sampler.criterion_margin(census)
        verdict = "holds" if holds else "fails"
        print(f"criterion value: {value:.6g}; n={census.n} {verdict}")
    except SpliceError as exc:
        value, holds = float("nan"), False
        print(f"criterion: degenerate ({exc})")
    try:
        e1 = sampler.expected_random_pairs(census)
        print(f"E1 (random pairing): {e1:.6g}")
    except SpliceError as exc:
        e1 = float("nan")
        print(f"E1: undefined ({exc})")
    try:
        e2 = sampler.expected_iterative_bound(census)
        print(f"E2 bound (iterative): {e2:.6g}")
    except SpliceError as exc:
        e2 = float("nan")
        print(f"E2 bound: undefined ({exc})")

    out = args.out or "analysis.csv"
    with open(out, "w", encoding="ascii") as fh:
        fh.write("attribute,rho,criterion\n")
        for s, rho, crit in rows:
            fh.write(f"{s},{rho!r},{crit!r}\n")
        fh.write(f"summary,criterion_value,{value!r}\n")
        fh.write(f"summary,criterion_holds,{holds}\n")
        fh.write(f"summary,E1,{e1!r}\n")
        fh.write(f"summary,E2_bound,{e2!r}\n")
    print(f"wrote {out}")
    return 0


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    census = _census_from_args(args, cfg)
    mean, stderr = sampler.simulate_collection(census, args.strategy, args.runs,
                                               seed=cfg.seed)
    print(f"census: m={census.m}, counts={census.counts}")
    print(f"strategy={args.strategy} runs={args.runs} seed={cfg.seed}")
    print(f"mean iterations: {mean:.6g} stderr: {stderr:.6g}")
    if args.strategy == "random":
        try:
            print(f"closed form E1: {sampler.expected_random_pairs(census):.6g}")
        except SpliceError:
            pass
    else:
        try:
            print(f"closed-form bound E2: {sampler.expected_iterative_bound(census):.6g}")
        except SpliceError as exc:
            print(f"closed-form bound E2: unavailable ({exc})")
    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            fh.write("strategy,runs,seed,mean,stderr\n")
            fh.write(f"{args.strategy},{args.runs},{cfg.seed},{mean!r},{stderr!r}\n")
        print(f"wrote {args.out}")
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "swap": cmd_swap,
    "interpolate": cmd_interpolate,
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except SpliceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

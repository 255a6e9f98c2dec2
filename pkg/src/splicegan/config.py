"""Flat key=value configuration shared by every command.

Files are UTF-8 text, one ``key = value`` per line, ``#`` comments. Every
key has a documented default; unknown keys are rejected by name.
Environment variables override file values: ``SPLICEGAN_<KEY>`` (key
upper-cased) carries the same textual form as the file would.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Any, Callable

from .errors import ConfigError
from .genome import GenomeLayout
from .nets import NetConfig
from .sampler import LabelCensus
from .trainer import TrainConfig

ENV_PREFIX = "SPLICEGAN_"


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_int_list(text: str) -> tuple[int, ...]:
    items = [t for t in text.replace(",", " ").split() if t]
    return tuple(int(t) for t in items)


def _parse_choice(*choices: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in choices:
            raise ValueError(f"expected one of {choices}, got {text!r}")
        return text

    return parse


def _parse_names(text: str) -> tuple[str, ...]:
    return tuple(t for t in text.replace(",", " ").split() if t)


def _parse_optional_int(text: str) -> int | None:
    return None if text.strip().lower() in ("", "auto") else int(text)


@dataclass(frozen=True)
class _Item:
    default: Any
    parse: Callable[[str], Any]
    help: str


SCHEMA: dict[str, _Item] = {
    # genome layout
    "n": _Item(2, int, "number of labeled attributes"),
    "piece_sizes": _Item((8, 8), _parse_int_list,
                         "latent piece length per attribute (single value broadcasts)"),
    "z_size": _Item(32, int, "length of the attribute-neutral latent part"),
    # synthetic data
    "resolution": _Item(16, int, "square image resolution (multiple of 16)"),
    "census": _Item((64,), _parse_int_list,
                    "images per label pattern in binary order (single value broadcasts)"),
    "noise_level": _Item(0.02, float, "bounded uniform pixel noise amplitude"),
    "train_ratio": _Item(0.9, float, "train share of the train/test split"),
    # training
    "steps": _Item(2000, int, "training steps"),
    "batch_pairs": _Item(16, int, "oriented pairs per training step"),
    "lr": _Item(5e-5, float, "optimizer learning rate"),
    "lambda_gan": _Item(1.0, float, "weight of the adversarial term in the generator loss"),
    "d_steps_per_g_step": _Item(None, _parse_optional_int,
                                "discriminator updates per generator update "
                                "(auto: 1 probability / 5 critic)"),
    "gan_mode": _Item("probability", _parse_choice("probability", "critic"),
                      "probability: sigmoid discriminator and log losses; "
                      "critic: unsquashed scores with weight clipping"),
    "clip_bound": _Item(0.01, float, "critic-mode weight clip bound"),
    "gan_conditioning": _Item("imitate", _parse_choice("imitate", "literal"),
                              "bits used to score hybrids in the generator loss"),
    "annihilate": _Item(True, _parse_bool,
                        "zero the recessive piece (off reproduces the ablation)"),
    "pair_strategy": _Item("iterative", _parse_choice("iterative", "random"),
                           "attribute-cycling pairs or unconstrained random pairs"),
    "seed": _Item(0, int, "master seed for all random streams"),
    "rms_decay": _Item(0.9, float, "optimizer mean-square decay"),
    "rms_epsilon": _Item(1e-8, float, "optimizer denominator floor"),
    "checkpoint_every": _Item(0, int, "periodic checkpoint interval (0: final only)"),
    # architecture
    "enc_hidden": _Item((256, 128), _parse_int_list, "encoder hidden layer widths"),
    "dec_hidden": _Item((128, 256), _parse_int_list, "decoder hidden layer widths"),
    "disc_hidden": _Item((128,), _parse_int_list, "discriminator hidden layer widths"),
    "leaky_slope": _Item(0.2, float, "leaky ReLU negative slope"),
    "disc_batch_norm": _Item(False, _parse_bool, "batch norm in the discriminator"),
    "bn_eps": _Item(1e-5, float, "batch norm variance floor"),
    "bn_momentum": _Item(0.9, float, "batch norm running-statistics momentum"),
    # external data
    "attributes": _Item((), _parse_names,
                        "attribute-name subset to keep when loading attribute files"),
}


@dataclass
class Config:
    """Typed view over the flat key space."""

    values: dict[str, Any] = field(default_factory=dict)

    def __getattr__(self, key: str):
        try:
            return self.values[key]
        except KeyError:
            raise AttributeError(key)

    def layout(self) -> GenomeLayout:
        sizes = self.values["piece_sizes"]
        n = self.values["n"]
        if len(sizes) == 1:
            sizes = sizes * n
        if len(sizes) != n:
            raise ConfigError(
                f"piece_sizes lists {len(sizes)} pieces for n={n}", key="piece_sizes")
        return GenomeLayout(piece_sizes=sizes, z_size=self.values["z_size"])

    def census(self) -> LabelCensus:
        counts = self.values["census"]
        n = self.values["n"]
        if len(counts) == 1:
            counts = counts * (2 ** n)
        if len(counts) != 2 ** n:
            raise ConfigError(
                f"census lists {len(counts)} counts for n={n} "
                f"(needs {2 ** n} or 1)", key="census")
        return LabelCensus(n=n, counts=counts)

    def net_config(self) -> NetConfig:
        v = self.values
        return NetConfig(
            image_shape=(1, v["resolution"], v["resolution"]),
            enc_hidden=v["enc_hidden"], dec_hidden=v["dec_hidden"],
            disc_hidden=v["disc_hidden"], leaky_slope=v["leaky_slope"],
            disc_batch_norm=v["disc_batch_norm"], bn_eps=v["bn_eps"],
            bn_momentum=v["bn_momentum"])

    def train_config(self) -> TrainConfig:
        v = self.values
        return TrainConfig(
            steps=v["steps"], batch_pairs=v["batch_pairs"], lr=v["lr"],
            lambda_gan=v["lambda_gan"], d_steps_per_g_step=v["d_steps_per_g_step"],
            gan_mode=v["gan_mode"], clip_bound=v["clip_bound"],
            gan_conditioning=v["gan_conditioning"], annihilate=v["annihilate"],
            pair_strategy=v["pair_strategy"], seed=v["seed"],
            rms_decay=v["rms_decay"], rms_epsilon=v["rms_epsilon"],
            checkpoint_every=v["checkpoint_every"])


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown configuration key '{key}'",
                              key=key)
        out[key] = value
    return out


def load_config(path=None, overrides: dict[str, str] | None = None,
                env: dict[str, str] | None = None) -> Config:
    """Defaults, then file, then environment, then explicit overrides."""
    values = {key: item.default for key, item in SCHEMA.items()}
    raw: dict[str, str] = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            raw.update(parse_config_text(fh.read(), source=str(path)))
    env = os.environ if env is None else env
    for key in SCHEMA:
        env_key = ENV_PREFIX + key.upper()
        if env_key in env:
            raw[key] = env[env_key]
    for key, value in (overrides or {}).items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown configuration key '{key}'", key=key)
        raw[key] = value

    for key, text in raw.items():
        try:
            values[key] = SCHEMA[key].parse(text)
        except ValueError as exc:
            raise ConfigError(f"bad value for '{key}': {exc}", key=key) from exc
    return Config(values=values)


def dump_defaults() -> str:
    """The documented default configuration, parseable back by load_config."""
    lines = ["# splicegan configuration (defaults)"]
    for key, item in SCHEMA.items():
        value = item.default
        if isinstance(value, tuple):
            text = ",".join(str(v) for v in value) if value else ""
        elif isinstance(value, bool):
            text = "true" if value else "false"
        elif value is None:
            text = "auto"
        elif isinstance(value, str):
            text = value
        else:
            text = repr(value)
        lines.append(f"{key} = {text}  # {item.help}")
    return "\n".join(lines) + "\n"

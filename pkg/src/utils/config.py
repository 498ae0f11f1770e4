"""Experiment configuration: a flat YAML mapping validated into a frozen dataclass.

Every field is also exposed as a ``--field-name`` command-line flag; flags given
on the command line override values from the file.
"""

import argparse
import dataclasses
import logging
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import yaml

from src.utils.errors import ConfigError

logger = logging.getLogger(__name__)

MODES = ("synthetic", "real")


@dataclass(frozen=True)
class ExperimentConfig:
    # data
    mode: str = "synthetic"
    k: int = 2
    seq_len: int = 8
    vocab_size: int = 8
    corpus_files: List[str] = field(default_factory=list)
    test_files: List[str] = field(default_factory=list)
    samples_per_category: int = 2000
    test_samples_per_category: int = 500
    oracle_hidden: int = 32
    oracle_init_std: float = 1.0

    # adversarial schedule
    tau_tar: float = 1.0
    adv_rounds: int = 200
    lambda_div: float = 0.001
    gen_steps: int = 1
    d_steps: int = 5
    d_pretrain_steps: int = 0
    eval_n: int = 64
    batch_size: int = 64
    pretrain_epochs: int = 50
    pretrain_lr: float = 1e-2
    gen_lr: float = 1e-2
    disc_lr: float = 1e-2

    # seeds
    seed: int = 0
    data_seed: int = 1
    oracle_seed: int = 2

    # ablations and variants
    no_h: bool = False
    no_t: bool = False
    no_o: bool = False
    persistent_tms: bool = False
    soft_feedback: bool = False
    temp_offsets: List[int] = field(default_factory=lambda: [-1, 0, 1])

    # generator sizes
    mem_slots: int = 1
    mem_dim: int = 64
    num_heads: int = 2
    emb_dim: int = 32
    cat_dim: int = 16

    # discriminator sizes
    disc_emb_dim: int = 32
    disc_filter_widths: List[int] = field(default_factory=lambda: [2, 3, 4])
    disc_num_filters: int = 16
    disc_hidden: int = 64
    disc_dropout: float = 0.0

    # logging, evaluation, output
    log_every: int = 1
    pretrain_log_every: int = 5
    checkpoint_every: Optional[int] = None
    metric_samples: int = 500
    bleu_orders: List[int] = field(default_factory=lambda: [2, 3, 4, 5])
    output_dir: str = "runs"
    run_dir: Optional[str] = None

    def __post_init__(self):
        validate(self)

    @property
    def checkpoint_cadence(self):
        if self.checkpoint_every is not None:
            return self.checkpoint_every
        return 1 if self.adv_rounds <= 50 else 50

    @property
    def synthetic(self):
        return self.mode == "synthetic"

    def to_dict(self):
        return dataclasses.asdict(self)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def validate(cfg):
    problems = []

    def need(cond, msg):
        if not cond:
            problems.append(msg)

    need(cfg.mode in MODES, f"mode must be one of {MODES}, got {cfg.mode!r}")
    need(cfg.k >= 1, f"k must be >= 1, got {cfg.k}")
    need(cfg.seq_len >= 1, f"seq_len must be >= 1, got {cfg.seq_len}")
    need(cfg.tau_tar >= 1, f"tau_tar must be >= 1, got {cfg.tau_tar}")
    need(cfg.adv_rounds >= 1, f"adv_rounds must be >= 1, got {cfg.adv_rounds}")
    need(cfg.lambda_div >= 0, f"lambda_div must be >= 0, got {cfg.lambda_div}")
    for name in ("batch_size", "eval_n", "log_every", "pretrain_log_every", "metric_samples"):
        need(getattr(cfg, name) >= 1, f"{name} must be >= 1, got {getattr(cfg, name)}")
    for name in ("gen_steps", "d_steps", "d_pretrain_steps", "pretrain_epochs"):
        need(getattr(cfg, name) >= 0, f"{name} must be >= 0, got {getattr(cfg, name)}")
    for name in ("pretrain_lr", "gen_lr", "disc_lr", "oracle_init_std"):
        need(getattr(cfg, name) > 0, f"{name} must be > 0, got {getattr(cfg, name)}")
    need(0 <= cfg.disc_dropout < 1, f"disc_dropout must be in [0, 1), got {cfg.disc_dropout}")
    need(cfg.checkpoint_every is None or cfg.checkpoint_every >= 1, "checkpoint_every must be >= 1")

    need(len(cfg.temp_offsets) >= 1, "temp_offsets must not be empty")
    need(len(set(cfg.temp_offsets)) == len(cfg.temp_offsets), "temp_offsets must be unique")
    need(0 in cfg.temp_offsets, "temp_offsets must contain 0")
    need(all(2 <= n <= 5 for n in cfg.bleu_orders), "bleu_orders must lie in 2..5")

    need(cfg.num_heads >= 1 and cfg.mem_dim % cfg.num_heads == 0,
         f"mem_dim ({cfg.mem_dim}) must be divisible by num_heads ({cfg.num_heads})")
    for name in ("mem_slots", "mem_dim", "emb_dim", "cat_dim", "disc_emb_dim",
                 "disc_num_filters", "disc_hidden", "oracle_hidden"):
        need(getattr(cfg, name) >= 1, f"{name} must be >= 1")
    need(len(cfg.disc_filter_widths) >= 1, "disc_filter_widths must not be empty")
    need(all(1 <= w <= cfg.seq_len for w in cfg.disc_filter_widths),
         f"disc_filter_widths {cfg.disc_filter_widths} must lie in 1..seq_len ({cfg.seq_len})")

    if cfg.mode == "synthetic":
        need(cfg.vocab_size >= 2, f"vocab_size must be >= 2, got {cfg.vocab_size}")
        need(cfg.samples_per_category >= cfg.batch_size,
             "samples_per_category must be >= batch_size")
        need(cfg.test_samples_per_category >= 1, "test_samples_per_category must be >= 1")
    else:
        need(len(cfg.corpus_files) == cfg.k,
             f"real mode needs one corpus file per category: k={cfg.k}, got {len(cfg.corpus_files)}")
        need(not cfg.test_files or len(cfg.test_files) == cfg.k,
             f"test_files must list one file per category (k={cfg.k})")

    if problems:
        raise ConfigError("Invalid configuration:\n  " + "\n  ".join(problems))


def _field_types():
    hints = typing.get_type_hints(ExperimentConfig)
    return {f.name: hints[f.name] for f in dataclasses.fields(ExperimentConfig)}


def _coerce(name, value, hint):
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if value is None:
        if origin is typing.Union and type(None) in args:
            return None
        raise ConfigError(f"{name} may not be null")
    if origin is typing.Union:
        inner = next(a for a in args if a is not type(None))
        return _coerce(name, value, inner)
    if origin in (list, List):
        if not isinstance(value, (list, tuple)):
            value = [value]
        return [_coerce(name, v, args[0]) for v in value]
    if hint is bool:
        if isinstance(value, bool):
            return value
        raise ConfigError(f"{name} must be true/false, got {value!r}")
    try:
        if hint is int and isinstance(value, float) and not value.is_integer():
            raise ValueError(value)
        return hint(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{name}: cannot interpret {value!r} as {hint.__name__}") from e


def build_config(values):
    """Validate a raw mapping (from YAML and/or flags) into an ExperimentConfig."""
    types = _field_types()
    unknown = sorted(set(values) - set(types))
    if unknown:
        raise ConfigError(f"Unknown config keys: {', '.join(unknown)}")
    coerced = {name: _coerce(name, v, types[name]) for name, v in values.items()}
    return ExperimentConfig(**coerced)


def load_config(path=None, overrides=None):
    values = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"Config file not found: {path}")
        try:
            loaded = yaml.safe_load(path.read_text(encoding="utf-8"))
        except yaml.YAMLError as e:
            raise ConfigError(f"Cannot parse {path}: {e}") from e
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path} must contain a mapping of config keys")
        values.update({str(k).replace("-", "_"): v for k, v in loaded.items()})
    values.update(overrides or {})
    cfg = build_config(values)
    logger.debug("Resolved config: %s", cfg)
    return cfg


def save_config(cfg, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=True), encoding="utf-8")
    return path


def add_config_arguments(parser):
    """Expose every config key as an optional ``--key-name`` flag (default: unset)."""
    group = parser.add_argument_group("config overrides")
    for name, hint in _field_types().items():
        flag = "--" + name.replace("_", "-")
        origin = typing.get_origin(hint)
        args = typing.get_args(hint)
        if origin is typing.Union:
            hint = next(a for a in args if a is not type(None))
            origin = typing.get_origin(hint)
            args = typing.get_args(hint)
        if hint is bool and name.startswith("no_"):
            # ablation switches: --no-t turns the ablation on, --with-t turns it off
            group.add_argument(flag, dest=f"cfg_{name}", action="store_const", const=True, default=None)
            group.add_argument("--with-" + name[3:].replace("_", "-"), dest=f"cfg_{name}",
                               action="store_const", const=False)
        elif hint is bool:
            group.add_argument(flag, dest=f"cfg_{name}", action=argparse.BooleanOptionalAction,
                               default=None)
        elif origin in (list, List):
            group.add_argument(flag, dest=f"cfg_{name}", nargs="+", type=args[0], default=None)
        else:
            group.add_argument(flag, dest=f"cfg_{name}", type=hint, default=None)


def overrides_from_args(args):
    return {
        key[len("cfg_"):]: value
        for key, value in vars(args).items()
        if key.startswith("cfg_") and value is not None
    }

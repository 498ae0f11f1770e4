"""Save and restore oracle, generator and discriminator checkpoints.

Each checkpoint stores the module's parameters under ``model/``, optionally the
Adam state under ``optim/``, and enough metadata to rebuild the module with no
config at hand.
"""

import logging
from dataclasses import dataclass

import torch

from src.models.discriminator import CNNDiscriminator
from src.models.generator import RelationalMemoryGenerator
from src.models.oracle import OracleModel
from src.utils.checkpoint import (
    load_arrays,
    load_module_arrays,
    load_optimizer_arrays,
    module_arrays,
    optimizer_arrays,
    save_arrays,
)
from src.utils.errors import CheckpointError

logger = logging.getLogger(__name__)

MODEL_PREFIX = "model/"
OPTIM_PREFIX = "optim/"

BUILDERS = {
    "generator": RelationalMemoryGenerator,
    "discriminator": CNNDiscriminator,
    "oracle": OracleModel,
}


@dataclass
class LoadedModel:
    model: torch.nn.Module
    metadata: dict
    arrays: dict

    @property
    def has_optimizer(self):
        return any(name.startswith(OPTIM_PREFIX) for name in self.arrays)

    def restore_optimizer(self, optimizer):
        load_optimizer_arrays(optimizer, self.arrays, OPTIM_PREFIX)
        return optimizer


def save_model(path, model, optimizer=None, **extra):
    arrays = module_arrays(model, MODEL_PREFIX)
    if optimizer is not None:
        arrays.update(optimizer_arrays(optimizer, OPTIM_PREFIX))
    metadata = dict(extra, model=model.metadata())
    return save_arrays(path, arrays, metadata)


def build_model(spec):
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in BUILDERS:
        raise CheckpointError(f"Unknown model kind {kind!r} in checkpoint metadata")
    try:
        return BUILDERS[kind](**spec)
    except TypeError as e:
        raise CheckpointError(f"Checkpoint metadata does not describe a {kind}: {e}") from e


def load_model(path, kind=None):
    arrays, metadata = load_arrays(path)
    spec = metadata.get("model")
    if not spec:
        raise CheckpointError(f"{path} carries no model description")
    if kind is not None and spec.get("kind") != kind:
        raise CheckpointError(f"{path} holds a {spec.get('kind')}, expected a {kind}")
    model = build_model(spec)
    load_module_arrays(model, arrays, MODEL_PREFIX)
    logger.debug("Loaded %s from %s", spec["kind"], path)
    return LoadedModel(model, metadata, arrays)


def save_generator(path, gen, optimizer=None, **extra):
    return save_model(path, gen, optimizer, **extra)


def load_generator(path):
    return load_model(path, "generator")


def save_discriminator(path, disc, optimizer=None, **extra):
    return save_model(path, disc, optimizer, **extra)


def load_discriminator(path):
    return load_model(path, "discriminator")


def save_oracle(path, oracle, **extra):
    return save_model(path, oracle, **extra)


def load_oracle(path):
    loaded = load_model(path, "oracle")
    loaded.model.freeze()
    return loaded

"""Versioned named-array container shared by oracle, generator and
discriminator checkpoints.

Layout (all integers little-endian)::

    8 bytes   magic  b"CATGANCK"
    4 bytes   uint32 format version
    8 bytes   uint64 manifest length in bytes
    N bytes   UTF-8 JSON manifest:
              {"version": 1, "metadata": {...},
               "arrays": [{"name", "shape", "offset", "count"}, ...]}
    rest      concatenated array payloads as little-endian float32,
              offsets counted in elements from the start of the payload
"""

import json
import logging
import struct
from pathlib import Path

import numpy as np
import torch

from src.utils.errors import CheckpointError

logger = logging.getLogger(__name__)

MAGIC = b"CATGANCK"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sIQ")
_DTYPE = np.dtype("<f4")


def _as_array(value):
    if isinstance(value, torch.Tensor):
        value = value.detach().cpu().numpy()
    return np.ascontiguousarray(np.asarray(value), dtype=_DTYPE)


def save_arrays(path, arrays, metadata=None):
    """Write ``arrays`` (name -> tensor/array) and JSON ``metadata`` to ``path``."""
    path = Path(path)
    entries = []
    payloads = []
    offset = 0
    for name, value in arrays.items():
        data = _as_array(value)
        entries.append(
            {"name": name, "shape": list(data.shape), "offset": offset, "count": int(data.size)}
        )
        payloads.append(data.reshape(-1).tobytes())
        offset += data.size

    manifest = json.dumps(
        {"version": FORMAT_VERSION, "metadata": metadata or {}, "arrays": entries},
        sort_keys=True,
    ).encode("utf-8")

    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, len(manifest)))
        fh.write(manifest)
        for chunk in payloads:
            fh.write(chunk)
    tmp.replace(path)
    logger.debug("Wrote checkpoint %s (%d arrays)", path, len(entries))
    return path


def load_arrays(path):
    """Read a container; returns (name -> float32 numpy array, metadata)."""
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"Checkpoint not found: {path}")

    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise CheckpointError(f"Truncated checkpoint header in {path}")
    magic, version, manifest_len = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint (bad magic {magic!r})")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"{path} has format version {version}, expected {FORMAT_VERSION}"
        )

    start = _HEADER.size
    try:
        manifest = json.loads(raw[start : start + manifest_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"Corrupt manifest in {path}: {e}") from e

    payload = np.frombuffer(raw, dtype=_DTYPE, offset=start + manifest_len)
    arrays = {}
    for entry in manifest["arrays"]:
        lo, count = entry["offset"], entry["count"]
        if lo + count > payload.size:
            raise CheckpointError(f"Array {entry['name']!r} overruns payload in {path}")
        arrays[entry["name"]] = payload[lo : lo + count].reshape(entry["shape"]).copy()
    return arrays, manifest.get("metadata", {})


def module_arrays(module, prefix=""):
    return {f"{prefix}{name}": t for name, t in module.state_dict().items()}


def load_module_arrays(module, arrays, prefix=""):
    """Copy arrays named ``prefix + key`` into ``module`` (dtype follows the module)."""
    state = module.state_dict()
    missing = [k for k in state if f"{prefix}{k}" not in arrays]
    if missing:
        raise CheckpointError(f"Checkpoint lacks parameters: {', '.join(missing)}")
    new_state = {}
    for key, current in state.items():
        value = torch.from_numpy(arrays[f"{prefix}{key}"])
        if tuple(value.shape) != tuple(current.shape):
            raise CheckpointError(
                f"Shape mismatch for {key}: checkpoint {tuple(value.shape)} vs model {tuple(current.shape)}"
            )
        new_state[key] = value.to(current.dtype)
    module.load_state_dict(new_state)


def optimizer_arrays(optimizer, prefix="optim/"):
    """Flatten Adam-style per-parameter state into named arrays."""
    arrays = {}
    state = optimizer.state_dict()["state"]
    for idx, slots in state.items():
        for slot, value in slots.items():
            arrays[f"{prefix}{idx}/{slot}"] = value if torch.is_tensor(value) else np.array(value)
    return arrays


def load_optimizer_arrays(optimizer, arrays, prefix="optim/"):
    current = optimizer.state_dict()
    params = [p for group in optimizer.param_groups for p in group["params"]]
    state = {}
    for name, value in arrays.items():
        if not name.startswith(prefix):
            continue
        idx, slot = name[len(prefix) :].split("/", 1)
        idx = int(idx)
        if slot == "step":
            tensor = torch.tensor(float(value), dtype=torch.float32)
        else:
            tensor = torch.from_numpy(value).to(params[idx].dtype)
        state.setdefault(idx, {})[slot] = tensor
    current["state"] = state
    optimizer.load_state_dict(current)

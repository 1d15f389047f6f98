"""Binary model checkpoints.

Layout, all little-endian:

    u32   header length in bytes
    bytes JSON header: format tag, actor/critic layer dims, activation,
          free-form ``meta`` dict
    u64   number of float64 values that follow
    f64[] flattened parameters (actor weights/biases, then critic)

The format is self-describing, so ``load_model`` needs no template.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .networks import ModelParams, count_params, flatten_params, init_model, unflatten_params

_FORMAT = "hfrl-model"
_VERSION = 1


def save_model(path: str | Path, params: ModelParams, meta: dict | None = None) -> None:
    header = {
        "format": _FORMAT,
        "version": _VERSION,
        "actor_dims": params.actor.dims(),
        "critic_dims": params.critic.dims(),
        "activation": params.actor.activation,
        "meta": meta or {},
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    flat = flatten_params(params)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<Q", flat.size))
        fh.write(flat.astype("<f8").tobytes())


def load_model(path: str | Path) -> tuple[ModelParams, dict]:
    """Read a checkpoint back; returns the parameters and the meta dict."""
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise ValueError(f"{path}: truncated checkpoint")
    (hlen,) = struct.unpack_from("<I", raw, 0)
    if len(raw) < 4 + hlen + 8:
        raise ValueError(f"{path}: truncated checkpoint")
    header = json.loads(raw[4 : 4 + hlen].decode("utf-8"))
    if header.get("format") != _FORMAT:
        raise ValueError(f"{path}: not a model checkpoint")
    if header.get("version") != _VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {header.get('version')}")
    (count,) = struct.unpack_from("<Q", raw, 4 + hlen)
    body = raw[4 + hlen + 8 :]
    if len(body) != count * 8:
        raise ValueError(f"{path}: expected {count} floats, found {len(body) // 8}")
    flat = np.frombuffer(body, dtype="<f8").astype(np.float64)

    actor_dims = header["actor_dims"]
    critic_dims = header["critic_dims"]
    template = init_model(
        obs_dim=actor_dims[0],
        hidden=tuple(actor_dims[1:-1]),
        n_actions=actor_dims[-1],
        activation=header["activation"],
        seed=0,
    )
    if tuple(critic_dims) != template.critic.dims():
        raise ValueError(f"{path}: critic dims {critic_dims} do not match actor input/hidden layout")
    if flat.size != count_params(template):
        raise ValueError(f"{path}: parameter count {flat.size} does not match dims")
    return unflatten_params(template, flat), header["meta"]

"""Checkpoint files.

A checkpoint is a numpy ``.npz`` archive (a zip of ``.npy`` members). Every
array is stored little-endian with its dtype and shape in the ``.npy`` header.
Members:

    meta                 uint8 bytes of a UTF-8 JSON object:
                         {"format": "labnet-checkpoint", "version": 1,
                          "config": {...resolved run config...},
                          "epoch": <completed epochs>, "adam_t": <step count>,
                          "model": <model name>, "param_names": [...],
                          "extra": {...}}   input normaliser, RBF input scale

    param/<name>         parameter tensor
    buffer/<name>        non-learned state (batch-norm running mean / var)
    adam_m/<name>        Adam first moment (absent before the first step)
    adam_v/<name>        Adam second moment
"""
import json
import zipfile

import numpy as np

from ..errors import LabnetError

FORMAT = "labnet-checkpoint"
VERSION = 1


class CheckpointError(LabnetError):
    pass


def _le(a):
    a = np.asarray(a)
    return a.astype(a.dtype.newbyteorder("<"), copy=False)


def save_arrays(path, meta, groups):
    """Write ``meta`` plus {group: {name: array}} members."""
    meta = dict(meta, format=FORMAT, version=VERSION)
    arrays = {"meta": np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)}
    for g, members in groups.items():
        for n, a in members.items():
            arrays[f"{g}/{n}"] = _le(a)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def save(path, model, config, epoch, adam=None, extra=None):
    meta = {
        "format": FORMAT,
        "version": VERSION,
        "config": config,
        "epoch": int(epoch),
        "adam_t": int(adam.t) if adam is not None else 0,
        "model": model.name,
        "param_names": list(model.params),
        "extra": extra or {},
    }
    groups = {"param": model.params, "buffer": model.buffers}
    if adam is not None:
        groups["adam_m"], groups["adam_v"] = adam.m, adam.v
    save_arrays(path, meta, groups)


def read(path):
    """Return (meta, params, buffers, adam_m, adam_v) as plain dicts."""
    try:
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(bytes(z["meta"]).decode())
            groups = {"param": {}, "buffer": {}, "adam_m": {}, "adam_v": {}}
            for key in z.files:
                if "/" in key:
                    g, name = key.split("/", 1)
                    groups[g][name] = z[key]
    except (OSError, KeyError, ValueError, EOFError, zipfile.BadZipFile) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    if meta.get("format") != FORMAT:
        raise CheckpointError(f"{path} is not a labnet checkpoint")
    return meta, groups["param"], groups["buffer"], groups["adam_m"], groups["adam_v"]


def load_into(path, model, adam=None):
    """Copy checkpoint tensors into ``model`` (and ``adam``); returns the metadata."""
    meta, params, buffers, m, v = read(path)
    if set(params) != set(model.specs):
        missing = sorted(set(model.specs) - set(params))
        extra = sorted(set(params) - set(model.specs))
        raise CheckpointError(f"checkpoint/model mismatch: missing {missing[:5]}, unexpected {extra[:5]}")
    for n, spec in model.specs.items():
        if params[n].shape != spec.shape:
            raise CheckpointError(f"{n}: checkpoint shape {params[n].shape} != model shape {spec.shape}")
    model.params = {n: params[n].astype(model.dtype) for n in model.specs}
    model.buffers = {n: b.astype(np.float64) for n, b in buffers.items()}
    if adam is not None:
        adam.t = meta["adam_t"]
        adam.m = {n: a.astype(model.dtype) for n, a in m.items()}
        adam.v = {n: a.astype(model.dtype) for n, a in v.items()}
    return meta

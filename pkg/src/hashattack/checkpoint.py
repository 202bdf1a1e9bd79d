"""Versioned array checkpoints shared by every trained component.

Stored as an uncompressed ``.npz`` archive: each array keeps its dtype and
shape, plus a ``__format__`` entry holding the format version and a JSON
``__meta__`` entry for small scalar settings.
"""

import json

import numpy as np
import torch

FORMAT_VERSION = 1


def save_arrays(path, arrays, meta=None):
    payload = {}
    for name, arr in arrays.items():
        if name.startswith("__"):
            raise ValueError(f"array name {name!r} is reserved")
        if isinstance(arr, torch.Tensor):
            arr = arr.detach().cpu().numpy()
        payload[name] = np.asarray(arr)
    payload["__format__"] = np.array([FORMAT_VERSION], dtype=np.int64)
    payload["__meta__"] = np.frombuffer(json.dumps(meta or {}, sort_keys=True).encode(), dtype=np.uint8)
    with open(path, "wb") as f:
        np.savez(f, **payload)


def load_arrays(path):
    """Returns ``(arrays, meta)``."""
    with np.load(path, allow_pickle=False) as data:
        version = int(data["__format__"][0])
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint format version {version}")
        meta = json.loads(bytes(data["__meta__"]).decode())
        arrays = {k: data[k].copy() for k in data.files if not k.startswith("__")}
    return arrays, meta


def save_module(path, module, meta=None):
    save_arrays(path, module.state_dict(), meta)


def load_state_dict(path):
    arrays, meta = load_arrays(path)
    return {k: torch.from_numpy(v) for k, v in arrays.items()}, meta


def params_checksum(module):
    """Order-stable digest of every parameter and buffer, bitwise sensitive."""
    import hashlib

    h = hashlib.sha256()
    for name, t in sorted(module.state_dict().items()):
        h.update(name.encode())
        h.update(t.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()

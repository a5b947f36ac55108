"""Checkpoint to canonical JSON weight format.

Weights are emitted as shortest round-trip decimal strings, so the engine
reloads bit-identical floats.  Conv kernels keep torch's (out, in, kh, kw)
layout, which is also the canonical one; vectors are channel-first flattened
on both sides.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch

from .models import Net


def _strings(a: np.ndarray):
    if a.ndim == 0:
        return repr(float(a))
    return [_strings(v) for v in a]


def checkpoint_to_canonical(ckpt: dict) -> dict:
    net = Net(ckpt["arch"])
    net.load_state_dict(ckpt["state"])
    layers = []
    i = 0
    input_dim = None
    for node in ckpt["arch"]:
        kind = node["type"]
        if kind == "relu":
            i += 1  # ReLU occupies a module slot
            layers.append({"type": "relu"})
            continue
        if kind == "dense":
            mod = net.mods[i]
            i += 1
            layers.append({"type": "dense",
                           "W": _strings(mod.weight.detach().numpy()),
                           "b": _strings(mod.bias.detach().numpy())})
            if input_dim is None:
                input_dim = node["in"]
        elif kind == "conv2d":
            mod = net.mods[i]
            i += 1
            h, w, c = node["in_shape"]
            layers.append({"type": "conv2d",
                           "kernel": _strings(mod.weight.detach().numpy()),
                           "bias": _strings(mod.bias.detach().numpy()),
                           "stride": node["stride"],
                           "padding": node["padding"],
                           "in_shape": [h, w, c]})
            if input_dim is None:
                input_dim = h * w * c
        elif kind == "softmax":
            layers.append({"type": "softmax"})
        else:
            raise ValueError(f"unsupported layer {kind!r} in checkpoint")
    if input_dim is None:
        raise ValueError("checkpoint has no weight-bearing layers")
    return {"input_dim": int(input_dim), "layers": layers}


def export(ckpt_path, out_path) -> dict:
    ckpt = torch.load(ckpt_path, weights_only=False)
    doc = checkpoint_to_canonical(ckpt)
    Path(out_path).write_text(json.dumps(doc) + "\n")
    return doc


def save_checkpoint(ckpt: dict, path) -> None:
    torch.save(ckpt, path)

"""Reference architectures and their layer descriptions.

A checkpoint is a dict {"arch": [...], "state": state_dict, "meta": {...}}
where arch mirrors the canonical JSON layer types, so export is a direct
translation.  Supported layers: dense, conv2d, relu, softmax.
"""

from __future__ import annotations

import torch
from torch import nn


def mlp_arch(in_dim: int, hidden: tuple, classes: int) -> list:
    arch = []
    prev = in_dim
    for h in hidden:
        arch.append({"type": "dense", "in": prev, "out": h})
        arch.append({"type": "relu"})
        prev = h
    arch.append({"type": "dense", "in": prev, "out": classes})
    arch.append({"type": "softmax"})
    return arch


def cnn_arch(in_shape: tuple, channels: tuple, classes: int) -> list:
    """Stride-2 3x3 conv stack with padding 1, then a dense head."""
    h, w, c = in_shape
    arch = []
    prev_c = c
    for ch in channels:
        arch.append({"type": "conv2d", "in_shape": [h, w, prev_c],
                     "out_channels": ch, "kernel": 3, "stride": 2, "padding": 1})
        arch.append({"type": "relu"})
        h = (h + 2 - 3) // 2 + 1
        w = (w + 2 - 3) // 2 + 1
        prev_c = ch
    arch.append({"type": "dense", "in": h * w * prev_c, "out": classes})
    arch.append({"type": "softmax"})
    return arch


class Net(nn.Module):
    """Module built from an arch description; forward returns logits."""

    def __init__(self, arch: list):
        super().__init__()
        self.arch = arch
        mods = []
        for node in arch:
            if node["type"] == "dense":
                mods.append(nn.Linear(node["in"], node["out"]))
            elif node["type"] == "conv2d":
                mods.append(nn.Conv2d(node["in_shape"][2], node["out_channels"],
                                      node["kernel"], node["stride"],
                                      node["padding"]))
            elif node["type"] == "relu":
                mods.append(nn.ReLU())
            elif node["type"] == "softmax":
                continue  # applied by the loss; exported as a layer
            else:
                raise ValueError(f"unsupported layer {node['type']!r}")
        self.mods = nn.ModuleList(mods)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        i = 0
        for node in self.arch:
            if node["type"] == "softmax":
                continue
            mod = self.mods[i]
            i += 1
            if node["type"] == "conv2d":
                h, w, c = node["in_shape"]
                x = mod(x.reshape(-1, c, h, w))
            elif node["type"] == "dense":
                x = mod(x.reshape(x.shape[0], -1))
            else:
                x = mod(x)
        return x.reshape(x.shape[0], -1)

    def interval_forward(self, lo: torch.Tensor, hi: torch.Tensor):
        """IBP bounds on the logits (used by the certified training loss)."""
        i = 0
        for node in self.arch:
            if node["type"] == "softmax":
                continue
            mod = self.mods[i]
            i += 1
            if node["type"] == "dense":
                lo = lo.reshape(lo.shape[0], -1)
                hi = hi.reshape(hi.shape[0], -1)
                mid, rad = 0.5 * (lo + hi), 0.5 * (hi - lo)
                c = torch.nn.functional.linear(mid, mod.weight, mod.bias)
                r = torch.nn.functional.linear(rad, mod.weight.abs())
                lo, hi = c - r, c + r
            elif node["type"] == "conv2d":
                h, w, ch = node["in_shape"]
                lo = lo.reshape(-1, ch, h, w)
                hi = hi.reshape(-1, ch, h, w)
                mid, rad = 0.5 * (lo + hi), 0.5 * (hi - lo)
                c = torch.nn.functional.conv2d(mid, mod.weight, mod.bias,
                                               mod.stride, mod.padding)
                r = torch.nn.functional.conv2d(rad, mod.weight.abs(), None,
                                               mod.stride, mod.padding)
                lo, hi = c - r, c + r
            else:
                lo, hi = torch.relu(lo), torch.relu(hi)
        return lo.reshape(lo.shape[0], -1), hi.reshape(hi.shape[0], -1)

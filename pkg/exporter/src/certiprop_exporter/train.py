"""Training of the toy reference models, with optional certified (IBP) loss.

The certified loss follows the usual interval-bound formulation: the
cross-entropy of the worst-case logits (upper bounds everywhere except the
true class, which takes its lower bound), mixed with the plain loss by a
factor kappa_i = max(1 - 0.00005 * i, 0.5) over training iterations, while
the training perturbation grows linearly from 0 to eps_train at the midpoint
of training.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from .models import Net, cnn_arch, mlp_arch

KAPPA_DECAY = 5e-5
KAPPA_MAX = 0.5


def load_dataset(name: str, seed: int = 0):
    if name == "digits":
        from sklearn.datasets import load_digits
        d = load_digits()
        return (d.data / 16.0).astype(np.float32), d.target.astype(np.int64), (8, 8, 1)
    if name == "synthetic2d":
        rng = np.random.default_rng(seed)
        n = 600
        centers = np.array([[-1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
        y = rng.integers(0, 3, size=n)
        x = centers[y] + rng.normal(size=(n, 2)) * 0.35
        return x.astype(np.float32), y.astype(np.int64), (1, 2, 1)
    raise ValueError(f"unknown dataset {name!r}")


def default_arch(dataset: str, kind: str, in_shape: tuple, classes: int) -> list:
    flat = in_shape[0] * in_shape[1] * in_shape[2]
    if kind == "mlp":
        hidden = (64, 64) if dataset == "digits" else (16, 16)
        return mlp_arch(flat, hidden, classes)
    if kind == "cnn":
        return cnn_arch(in_shape, (4, 8), classes)
    raise ValueError(f"unknown architecture {kind!r}")


def _worst_case_logits(lo: torch.Tensor, hi: torch.Tensor,
                       y: torch.Tensor) -> torch.Tensor:
    onehot = torch.nn.functional.one_hot(y, lo.shape[1]).bool()
    return torch.where(onehot, lo, hi)


def train_toy(dataset: str = "digits", arch_kind: str = "mlp",
              ibp_eps_train: float | None = None, seed: int = 0,
              epochs: int = 60, batch_size: int = 32, lr: float = 1e-3):
    """Returns a checkpoint dict with arch, weights and recorded accuracy."""
    torch.manual_seed(seed)
    x, y, in_shape = load_dataset(dataset, seed)
    classes = int(y.max()) + 1
    arch = default_arch(dataset, arch_kind, in_shape, classes)
    net = Net(arch)
    opt = torch.optim.Adam(net.parameters(), lr=lr, betas=(0.9, 0.999))
    ce = nn.CrossEntropyLoss()
    xt = torch.from_numpy(x)
    yt = torch.from_numpy(y)
    n = xt.shape[0]
    total_iters = epochs * ((n + batch_size - 1) // batch_size)
    it = 0
    order_rng = np.random.default_rng(seed)
    for _ in range(epochs):
        perm = order_rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = perm[start:start + batch_size]
            xb, yb = xt[idx], yt[idx]
            logits = net(xb)
            loss = ce(logits, yb)
            if ibp_eps_train is not None and ibp_eps_train > 0:
                kappa = max(1.0 - KAPPA_DECAY * it, KAPPA_MAX)
                eps = ibp_eps_train * min(1.0, it / max(total_iters / 2.0, 1.0))
                lo, hi = net.interval_forward(xb - eps, xb + eps)
                loss = kappa * loss + (1.0 - kappa) * ce(
                    _worst_case_logits(lo, hi, yb), yb)
            opt.zero_grad()
            loss.backward()
            opt.step()
            it += 1
    with torch.no_grad():
        acc = float((net(xt).argmax(dim=1) == yt).float().mean())
    return {
        "arch": arch,
        "state": {k: v.detach().clone() for k, v in net.state_dict().items()},
        "meta": {"dataset": dataset, "arch_kind": arch_kind, "seed": seed,
                 "epochs": epochs, "train_accuracy": acc,
                 "ibp_eps_train": ibp_eps_train},
    }

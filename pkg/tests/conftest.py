import json
from pathlib import Path

import numpy as np
import pytest

from certiprop.network import Dense, NetworkSpec, ReLU, Softmax

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def digits_mlp():
    from certiprop.network import load_network
    return load_network(FIXTURES / "digits_mlp.json")


@pytest.fixture(scope="session")
def digits_points():
    doc = json.loads((FIXTURES / "digits_points.json").read_text())
    return [np.array([float(v) for v in p]) for p in doc["points"]]


def random_relu_net(rng, dims, scale=0.7, softmax=False) -> NetworkSpec:
    """Dense/ReLU stack with Gaussian weights, optional trailing softmax."""
    layers = []
    for i in range(len(dims) - 1):
        w = rng.normal(size=(dims[i + 1], dims[i])) * scale / np.sqrt(dims[i])
        b = rng.normal(size=dims[i + 1]) * 0.2
        layers.append(Dense(w, b))
        if i < len(dims) - 2:
            layers.append(ReLU())
    if softmax:
        layers.append(Softmax())
    return NetworkSpec(tuple(layers), dims[0])


def random_linear_net(rng, dims, orthogonal=False) -> NetworkSpec:
    from certiprop.experiments import haar_orthogonal
    layers = []
    for i in range(len(dims) - 1):
        if orthogonal:
            assert dims[i + 1] == dims[i]
            w = haar_orthogonal(dims[i], seed=int(rng.integers(2 ** 31)))
            b = np.zeros(dims[i])
        else:
            w = rng.normal(size=(dims[i + 1], dims[i])) / np.sqrt(dims[i])
            b = rng.normal(size=dims[i + 1]) * 0.1
        layers.append(Dense(w, b))
    return NetworkSpec(tuple(layers), dims[0])

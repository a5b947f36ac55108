"""Canonical feedforward network representation, loading and lowering.

The canonical weight format is JSON::

    {"input_dim": n,
     "layers": [
        {"type": "dense", "W": [[...]], "b": [...]},
        {"type": "conv2d", "kernel": [...], "bias": [...], "stride": s,
         "padding": p, "in_shape": [h, w, c]},
        {"type": "relu"},
        {"type": "softmax"}
     ]}

Weight entries may be JSON numbers or decimal strings; strings are parsed to
the nearest float and the writer emits shortest round-trip decimal strings.

A conv layer's input vector of length c*h*w is interpreted as an array of
shape (c, h, w) in C order; its output is the flattened (c_out, oh, ow).
Only ReLU and softmax activations are supported, and softmax may appear only
as the final layer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import ValidationError

__all__ = [
    "Dense", "Conv2D", "ReLU", "Softmax", "NetworkSpec", "InputRegion",
    "load_network", "save_network", "network_from_dict", "network_to_dict",
    "lower_conv", "eval_point", "eval_batch", "eval_rational",
    "load_region", "region_from_dict",
]


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise ValidationError("non-finite weight")
    a = a.copy()
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Dense:
    W: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "W", _freeze(self.W))
        object.__setattr__(self, "b", _freeze(self.b))
        if self.W.ndim != 2 or self.b.ndim != 1:
            raise ValidationError("dense layer needs a matrix W and vector b")
        if self.W.shape[0] != self.b.shape[0]:
            raise ValidationError(
                f"dense W has {self.W.shape[0]} rows but b has length {self.b.shape[0]}")

    def out_dim(self, in_dim: int) -> int:
        if in_dim != self.W.shape[1]:
            raise ValidationError(
                f"dense layer expects input dim {self.W.shape[1]}, got {in_dim}")
        return self.W.shape[0]


@dataclass(frozen=True)
class Conv2D:
    kernel: np.ndarray          # (out_c, in_c, kh, kw)
    bias: np.ndarray            # (out_c,)
    stride: int
    padding: int
    in_shape: tuple             # (h, w, c)

    def __post_init__(self):
        object.__setattr__(self, "kernel", _freeze(self.kernel))
        object.__setattr__(self, "bias", _freeze(self.bias))
        object.__setattr__(self, "in_shape", tuple(int(v) for v in self.in_shape))
        if self.kernel.ndim != 4:
            raise ValidationError("conv kernel must have shape (out_c, in_c, kh, kw)")
        if len(self.in_shape) != 3:
            raise ValidationError("conv in_shape must be [h, w, c]")
        h, w, c = self.in_shape
        oc, ic, kh, kw = self.kernel.shape
        if ic != c:
            raise ValidationError(f"conv kernel expects {ic} input channels, input has {c}")
        if self.bias.shape != (oc,):
            raise ValidationError("conv bias length must equal the number of kernels")
        if self.stride < 1 or self.padding < 0:
            raise ValidationError("unsupported conv stride/padding")
        if kh > h + 2 * self.padding or kw > w + 2 * self.padding:
            raise ValidationError("conv kernel larger than padded input")

    @property
    def out_hw(self) -> tuple:
        h, w, _ = self.in_shape
        _, _, kh, kw = self.kernel.shape
        oh = (h + 2 * self.padding - kh) // self.stride + 1
        ow = (w + 2 * self.padding - kw) // self.stride + 1
        return oh, ow

    def out_dim(self, in_dim: int) -> int:
        h, w, c = self.in_shape
        if in_dim != h * w * c:
            raise ValidationError(
                f"conv layer expects input dim {h * w * c}, got {in_dim}")
        oh, ow = self.out_hw
        return self.kernel.shape[0] * oh * ow


@dataclass(frozen=True)
class ReLU:
    def out_dim(self, in_dim: int) -> int:
        return in_dim


@dataclass(frozen=True)
class Softmax:
    def out_dim(self, in_dim: int) -> int:
        return in_dim


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple
    input_dim: int
    output_dim: int = 0

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        dim = self.input_dim
        for i, layer in enumerate(self.layers):
            if isinstance(layer, Softmax) and i != len(self.layers) - 1:
                raise ValidationError("softmax must be the final layer")
            dim = layer.out_dim(dim)
        object.__setattr__(self, "output_dim", dim)

    @property
    def has_softmax(self) -> bool:
        return bool(self.layers) and isinstance(self.layers[-1], Softmax)

    @property
    def is_linear_only(self) -> bool:
        return all(isinstance(l, (Dense, Conv2D)) for l in self.layers)

    @property
    def has_conv(self) -> bool:
        return any(isinstance(l, Conv2D) for l in self.layers)

    def propagation_layers(self, with_softmax: bool = True) -> tuple:
        """Layers to propagate; trailing softmax is dropped when disabled."""
        if not with_softmax and self.has_softmax:
            return self.layers[:-1]
        return self.layers


@dataclass(frozen=True)
class InputRegion:
    center: np.ndarray
    radius: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", _freeze(self.center))
        object.__setattr__(self, "radius", _freeze(self.radius))
        if self.center.shape != self.radius.shape or self.center.ndim != 1:
            raise ValidationError("region center and radius must be matching vectors")
        if np.any(self.radius < 0):
            raise ValidationError("region radius must be nonnegative")

    @classmethod
    def from_eps(cls, center, eps: float) -> "InputRegion":
        center = np.asarray(center, dtype=np.float64)
        if eps < 0:
            raise ValidationError("eps must be nonnegative")
        return cls(center, np.full(center.shape, float(eps)))

    @property
    def dim(self) -> int:
        return self.center.shape[0]


# ---------------------------------------------------------------------------
# JSON round trip
# ---------------------------------------------------------------------------

def _parse_array(node, what: str) -> np.ndarray:
    def conv(x):
        if isinstance(x, list):
            return [conv(v) for v in x]
        if isinstance(x, (int, float)):
            return float(x)
        if isinstance(x, str):
            try:
                return float(x)
            except ValueError:
                raise ValidationError(f"bad numeric literal {x!r} in {what}") from None
        raise ValidationError(f"bad entry of type {type(x).__name__} in {what}")

    try:
        return np.asarray(conv(node), dtype=np.float64)
    except (ValueError, ValidationError) as exc:
        raise ValidationError(f"cannot parse {what}: {exc}") from None


def _emit_array(a: np.ndarray):
    if a.ndim == 0:
        return repr(float(a))
    return [_emit_array(row) for row in a]


def network_from_dict(doc: dict) -> NetworkSpec:
    if not isinstance(doc, dict) or "input_dim" not in doc or "layers" not in doc:
        raise ValidationError("weight file must carry input_dim and layers")
    input_dim = int(doc["input_dim"])
    layers = []
    for i, node in enumerate(doc["layers"]):
        kind = node.get("type")
        if kind == "dense":
            layers.append(Dense(_parse_array(node["W"], f"layer {i} W"),
                                _parse_array(node["b"], f"layer {i} b")))
        elif kind == "conv2d":
            layers.append(Conv2D(_parse_array(node["kernel"], f"layer {i} kernel"),
                                 _parse_array(node["bias"], f"layer {i} bias"),
                                 int(node.get("stride", 1)),
                                 int(node.get("padding", 0)),
                                 tuple(node["in_shape"])))
        elif kind == "relu":
            layers.append(ReLU())
        elif kind == "softmax":
            layers.append(Softmax())
        else:
            raise ValidationError(f"unsupported layer type {kind!r}")
    return NetworkSpec(tuple(layers), input_dim)


def network_to_dict(spec: NetworkSpec) -> dict:
    out = {"input_dim": spec.input_dim, "layers": []}
    for layer in spec.layers:
        if isinstance(layer, Dense):
            out["layers"].append({"type": "dense",
                                  "W": _emit_array(layer.W),
                                  "b": _emit_array(layer.b)})
        elif isinstance(layer, Conv2D):
            out["layers"].append({"type": "conv2d",
                                  "kernel": _emit_array(layer.kernel),
                                  "bias": _emit_array(layer.bias),
                                  "stride": layer.stride,
                                  "padding": layer.padding,
                                  "in_shape": list(layer.in_shape)})
        elif isinstance(layer, ReLU):
            out["layers"].append({"type": "relu"})
        elif isinstance(layer, Softmax):
            out["layers"].append({"type": "softmax"})
    return out


def load_network(path) -> NetworkSpec:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"weight file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"cannot parse {path}: {exc}") from None
    return network_from_dict(doc)


def save_network(spec: NetworkSpec, path) -> None:
    Path(path).write_text(json.dumps(network_to_dict(spec), indent=1) + "\n")


def region_from_dict(doc: dict) -> InputRegion:
    if "center" not in doc:
        raise ValidationError("region file must carry a center")
    center = _parse_array(doc["center"], "region center")
    if "radius" in doc:
        return InputRegion(center, _parse_array(doc["radius"], "region radius"))
    if "eps" in doc:
        return InputRegion.from_eps(center, float(doc["eps"]))
    raise ValidationError("region file must carry eps or radius")


def load_region(path) -> InputRegion:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"region file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"cannot parse {path}: {exc}") from None
    return region_from_dict(doc)


# ---------------------------------------------------------------------------
# conv lowering
# ---------------------------------------------------------------------------

def _conv_to_dense(layer: Conv2D) -> Dense:
    h, w, c = layer.in_shape
    oc, ic, kh, kw = layer.kernel.shape
    oh, ow = layer.out_hw
    s, p = layer.stride, layer.padding
    D = np.zeros((oc * oh * ow, c * h * w))
    for o in range(oc):
        for oi in range(oh):
            for oj in range(ow):
                row = (o * oh + oi) * ow + oj
                for i_c in range(ic):
                    for di in range(kh):
                        ii = oi * s + di - p
                        if ii < 0 or ii >= h:
                            continue
                        for dj in range(kw):
                            jj = oj * s + dj - p
                            if jj < 0 or jj >= w:
                                continue
                            col = (i_c * h + ii) * w + jj
                            D[row, col] = layer.kernel[o, i_c, di, dj]
    b = np.repeat(layer.bias, oh * ow)
    return Dense(D, b)


def lower_conv(spec: NetworkSpec) -> NetworkSpec:
    """Replace every Conv2D by the equivalent explicit Dense layer.

    Entries of the dense matrix are exact copies of kernel weights, so point
    evaluation agrees exactly in exact arithmetic.
    """
    layers = tuple(_conv_to_dense(l) if isinstance(l, Conv2D) else l
                   for l in spec.layers)
    return NetworkSpec(layers, spec.input_dim)


# ---------------------------------------------------------------------------
# reference evaluation (plain floats, NOT certified)
# ---------------------------------------------------------------------------

def _softmax(z: np.ndarray, axis=-1) -> np.ndarray:
    e = np.exp(z - np.max(z, axis=axis, keepdims=True))
    return e / np.sum(e, axis=axis, keepdims=True)


def _conv_forward(layer: Conv2D, X: np.ndarray) -> np.ndarray:
    """Direct batched convolution; X has shape (N, c*h*w)."""
    h, w, c = layer.in_shape
    oc, ic, kh, kw = layer.kernel.shape
    oh, ow = layer.out_hw
    s, p = layer.stride, layer.padding
    n = X.shape[0]
    Xp = np.zeros((n, c, h + 2 * p, w + 2 * p))
    Xp[:, :, p:p + h, p:p + w] = X.reshape(n, c, h, w)
    out = np.zeros((n, oc, oh, ow))
    for di in range(kh):
        for dj in range(kw):
            patch = Xp[:, :, di:di + s * oh:s, dj:dj + s * ow:s]
            out += np.einsum("ncij,oc->noij", patch, layer.kernel[:, :, di, dj])
    out += layer.bias[None, :, None, None]
    return out.reshape(n, oc * oh * ow)


def eval_batch(spec: NetworkSpec, X, with_softmax: bool = True) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != spec.input_dim:
        raise ValidationError(
            f"input dim {X.shape[1]} does not match network input {spec.input_dim}")
    for layer in spec.propagation_layers(with_softmax):
        if isinstance(layer, Dense):
            X = X @ layer.W.T + layer.b
        elif isinstance(layer, Conv2D):
            X = _conv_forward(layer, X)
        elif isinstance(layer, ReLU):
            X = np.maximum(X, 0.0)
        elif isinstance(layer, Softmax):
            X = _softmax(X, axis=1)
    return X


def eval_point(spec: NetworkSpec, x, with_softmax: bool = True) -> np.ndarray:
    """Plain forward pass in ordinary floating point (reference, NOT certified)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValidationError("eval_point expects a vector")
    return eval_batch(spec, x[None, :], with_softmax)[0]


def eval_rational(spec: NetworkSpec, x, with_softmax: bool = False) -> list:
    """Exact forward pass over Fractions (dense/conv/relu only)."""
    vec = [Fraction(v) for v in x]
    for layer in spec.propagation_layers(with_softmax):
        if isinstance(layer, Dense):
            W = layer.W
            vec = [sum((Fraction(W[i, j]) * vec[j] for j in range(W.shape[1])),
                       Fraction(layer.b[i])) for i in range(W.shape[0])]
        elif isinstance(layer, Conv2D):
            h, w, c = layer.in_shape
            oc, ic, kh, kw = layer.kernel.shape
            oh, ow = layer.out_hw
            s, p = layer.stride, layer.padding
            out = []
            for o in range(oc):
                for oi in range(oh):
                    for oj in range(ow):
                        acc = Fraction(layer.bias[o])
                        for i_c in range(ic):
                            for di in range(kh):
                                ii = oi * s + di - p
                                if ii < 0 or ii >= h:
                                    continue
                                for dj in range(kw):
                                    jj = oj * s + dj - p
                                    if jj < 0 or jj >= w:
                                        continue
                                    acc += Fraction(layer.kernel[o, i_c, di, dj]) \
                                        * vec[(i_c * h + ii) * w + jj]
                        out.append(acc)
            vec = out
        elif isinstance(layer, ReLU):
            vec = [v if v > 0 else Fraction(0) for v in vec]
        elif isinstance(layer, Softmax):
            raise ValidationError("softmax has no exact rational evaluation")
    return vec

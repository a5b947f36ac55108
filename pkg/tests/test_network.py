"""Network loading, validation, conv lowering, reference evaluation."""

import json
from fractions import Fraction

import numpy as np
import pytest

from certiprop.errors import ValidationError
from certiprop.network import (Conv2D, Dense, NetworkSpec, ReLU, Softmax,
                               eval_batch, eval_point, eval_rational,
                               load_network, load_region, lower_conv,
                               network_from_dict, network_to_dict,
                               region_from_dict, save_network)


def mlp_doc():
    return {
        "input_dim": 4,
        "layers": [
            {"type": "dense",
             "W": [["1", "0", "0", "0"], ["0", "1", "0", "0"], ["0.5", "0.5", "-0.5", "-0.5"]],
             "b": ["0.1", "-0.2", "0.3"]},
            {"type": "relu"},
            {"type": "dense", "W": [[1, 1, 1], [1, -1, 0]], "b": [0, 0]},
        ],
    }


class TestLoad:
    def test_two_layer_mlp(self, tmp_path):
        path = tmp_path / "net.json"
        path.write_text(json.dumps(mlp_doc()))
        spec = load_network(path)
        assert len(spec.layers) == 3
        assert spec.input_dim == 4 and spec.output_dim == 2

    def test_mismatched_bias_length(self):
        doc = mlp_doc()
        doc["layers"][0]["b"] = ["0.1"]
        with pytest.raises(ValidationError):
            network_from_dict(doc)

    def test_softmax_mid_network_rejected(self):
        doc = mlp_doc()
        doc["layers"].insert(1, {"type": "softmax"})
        with pytest.raises(ValidationError):
            network_from_dict(doc)

    def test_unsupported_layer_rejected(self):
        doc = mlp_doc()
        doc["layers"].append({"type": "maxpool"})
        with pytest.raises(ValidationError):
            network_from_dict(doc)

    def test_dim_chain_violation(self):
        doc = mlp_doc()
        doc["layers"][2]["W"] = [[1, 1]]
        with pytest.raises(ValidationError):
            network_from_dict(doc)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ValidationError):
            load_network(tmp_path / "nope.json")

    def test_round_trip_identity(self, tmp_path):
        spec = network_from_dict(mlp_doc())
        p1 = tmp_path / "a.json"
        p2 = tmp_path / "b.json"
        save_network(spec, p1)
        again = load_network(p1)
        save_network(again, p2)
        assert p1.read_text() == p2.read_text()
        assert network_to_dict(spec) == network_to_dict(again)


class TestRegion:
    def test_eps_form(self):
        r = region_from_dict({"center": [0.5, "0.25"], "eps": 0.1})
        assert np.allclose(r.radius, 0.1)

    def test_radius_form(self):
        r = region_from_dict({"center": [0.0, 0.0], "radius": [0.1, 0.2]})
        assert r.radius[1] == 0.2

    def test_negative_radius_rejected(self):
        with pytest.raises(ValidationError):
            region_from_dict({"center": [0.0], "radius": [-0.1]})

    def test_load(self, tmp_path):
        p = tmp_path / "r.json"
        p.write_text(json.dumps({"center": [0, 0], "eps": 0.5}))
        assert load_region(p).dim == 2


def conv_net(kernel, in_shape, stride=1, padding=0):
    oc = len(kernel)
    layer = Conv2D(np.asarray(kernel, dtype=float), np.zeros(oc),
                   stride, padding, in_shape)
    h, w, c = in_shape
    return NetworkSpec((layer,), h * w * c)


class TestLowerConv:
    def test_one_by_one_conv_is_blockwise(self):
        spec = conv_net([[[[2.0]]]], (3, 3, 1))
        low = lower_conv(spec)
        assert np.array_equal(low.layers[0].W, 2.0 * np.eye(9))

    def test_identity_kernel(self):
        k = np.zeros((1, 1, 3, 3))
        k[0, 0, 1, 1] = 1.0
        spec = NetworkSpec((Conv2D(k, np.zeros(1), 1, 1, (4, 4, 1)),), 16)
        low = lower_conv(spec)
        assert np.array_equal(low.layers[0].W, np.eye(16))

    def test_random_conv_matches_direct_convolution_exactly(self):
        rng = np.random.default_rng(5)
        k = rng.normal(size=(2, 1, 3, 3))
        spec = NetworkSpec((Conv2D(k, rng.normal(size=2), 1, 0, (8, 8, 1)),), 64)
        low = lower_conv(spec)
        for _ in range(100):
            x = rng.normal(size=64)
            direct = eval_rational(spec, x)
            lowered = eval_rational(low, x)
            assert direct == lowered  # exact rational equality

    def test_stride_and_padding(self):
        rng = np.random.default_rng(6)
        k = rng.normal(size=(3, 2, 3, 3))
        spec = NetworkSpec((Conv2D(k, rng.normal(size=3), 2, 1, (6, 6, 2)),), 72)
        low = lower_conv(spec)
        x = rng.normal(size=72)
        assert eval_rational(spec, x) == eval_rational(low, x)
        # float paths agree to rounding
        assert np.allclose(eval_point(spec, x), eval_point(low, x), atol=1e-12)

    def test_kernel_larger_than_input_rejected(self):
        with pytest.raises(ValidationError):
            conv_net([[[[1.0] * 5] * 5]], (3, 3, 1))


class TestEval:
    def test_identity_dense(self):
        spec = NetworkSpec((Dense(np.eye(3), np.zeros(3)),), 3)
        x = np.array([1.0, -2.0, 3.0])
        assert np.array_equal(eval_point(spec, x), x)

    def test_dead_relu(self):
        spec = NetworkSpec((Dense(-np.eye(2), np.array([-1.0, -2.0])), ReLU()), 2)
        assert np.array_equal(eval_point(spec, np.array([1.0, 1.0])), np.zeros(2))

    def test_softmax_normalizes(self):
        spec = NetworkSpec((Dense(np.eye(3), np.zeros(3)), Softmax()), 3)
        y = eval_point(spec, np.array([1.0, 2.0, 3.0]))
        assert abs(y.sum() - 1.0) < 1e-12 and np.all(y > 0)

    def test_batch_matches_single(self):
        rng = np.random.default_rng(8)
        from conftest import random_relu_net
        spec = random_relu_net(rng, [5, 7, 3], softmax=True)
        X = rng.normal(size=(11, 5))
        batch = eval_batch(spec, X)
        for i in range(11):
            assert np.allclose(batch[i], eval_point(spec, X[i]), atol=1e-12)

    def test_dim_mismatch(self):
        spec = NetworkSpec((Dense(np.eye(3), np.zeros(3)),), 3)
        with pytest.raises(ValidationError):
            eval_point(spec, np.zeros(4))

    def test_rational_rejects_softmax(self):
        spec = NetworkSpec((Dense(np.eye(2), np.zeros(2)), Softmax()), 2)
        with pytest.raises(ValidationError):
            eval_rational(spec, [Fraction(1), Fraction(2)], with_softmax=True)

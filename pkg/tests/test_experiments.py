"""Experiment harness: Haar sampling, moments, wrapping, sweeps, masking."""

import math

import numpy as np
import pytest

from conftest import random_relu_net
from certiprop.errors import ValidationError
from certiprop.experiments import (LemmaStats, boundary_points, haar_orthogonal,
                                   lemma_e_closed, lemma_stats, lemma_v_closed,
                                   mask_inputs, run_sweep, run_wrapping)
from certiprop.network import Dense, NetworkSpec, eval_point


class TestHaar:
    def test_orthogonality(self):
        for n in (2, 8, 64):
            u = haar_orthogonal(n, seed=n)
            assert np.max(np.abs(u.T @ u - np.eye(n))) < 1e-12
            assert np.max(np.abs(np.linalg.norm(u, axis=1) - 1.0)) < 1e-12

    def test_n_one_gives_sign(self):
        vals = {float(haar_orthogonal(1, seed=s)[0, 0]) for s in range(20)}
        assert vals <= {-1.0, 1.0} and len(vals) == 2

    def test_deterministic(self):
        assert np.array_equal(haar_orthogonal(5, seed=3), haar_orthogonal(5, seed=3))

    def test_row_sum_statistics_match_lemma(self):
        # Monte-Carlo row sums of |entries| vs E(R) closed form, n=3
        n, trials = 3, 4000
        sums = np.array([np.abs(haar_orthogonal(n, seed=s)).sum(axis=1).mean()
                         for s in range(trials)])
        se = sums.std(ddof=1) / math.sqrt(trials)
        assert abs(sums.mean() - 1.5) < 3 * se + 1e-3


class TestLemmaClosedForms:
    def test_small_dims(self):
        assert lemma_e_closed(2) == pytest.approx(4 / math.pi, abs=1e-15)
        assert lemma_e_closed(3) == 1.5  # exact
        assert lemma_e_closed(10) == pytest.approx(2.5868993924777915, abs=1e-12)

    def test_exact_path_matches_lgamma_path(self):
        for n in (17, 300, 4000):
            log_e = (math.log(2.0 * n / (n - 1.0)) + math.lgamma(n / 2.0)
                     - 0.5 * math.log(math.pi) - math.lgamma((n - 1) / 2.0))
            assert lemma_e_closed(n) == pytest.approx(math.exp(log_e), rel=1e-12)

    def test_e_asymptotic_bound(self):
        # |E_closed - sqrt(2n/pi)| < 1/sqrt(n) for n >= 10
        for n in (10, 50, 100, 1000):
            assert abs(lemma_e_closed(n) - math.sqrt(2 * n / math.pi)) < 1 / math.sqrt(n)

    def test_v_needs_three_dims(self):
        with pytest.raises(ValidationError):
            lemma_v_closed(2)

    def test_v_closed_small_case(self):
        # n=3: E(R^2) = 1 + 4/pi exactly (sphere integral), V = ER2 - 2.25
        assert lemma_v_closed(3) == pytest.approx(1 + 4 / math.pi - 2.25, abs=1e-14)

    def test_v_true_asymptote(self):
        # the exact formulas converge to 1 - 3/pi, not the commonly quoted 1 + 1/pi
        for n in (200, 1000, 5000):
            assert abs(lemma_v_closed(n) - (1 - 3 / math.pi)) < 5.0 / n


class TestLemmaStats:
    def test_monte_carlo_matches_closed(self):
        for n in (3, 10):
            s = lemma_stats(n, 40000, seed=0)
            assert abs(s.E_hat - s.E_closed) < 3 * s.se_E
            assert abs(s.V_hat - s.V_closed) < 3 * s.se_V

    def test_no_variance_below_three(self):
        s = lemma_stats(2, 1000, seed=0)
        assert s.V_closed is None
        assert s.E_closed == pytest.approx(4 / math.pi)


class TestWrapping:
    def test_smoke_minimal(self):
        st = run_wrapping(2, 1, 1, seed=0, methods=("ibp",))
        assert st.plain_ratio["ibp"].shape == (1,)
        assert st.rows

    def test_growth_and_exactness(self):
        st = run_wrapping(16, 4, 30, seed=0)
        pred = st.predicted_ratio
        # IBP consecutive width ratios track sqrt(2n/pi) at every layer
        assert np.all(np.abs(st.plain_ratio["ibp"] - pred) < 0.1 * pred)
        # AA and DA have no excess growth over the exact hull
        assert np.all(np.abs(st.per_layer_ratio["aa"] - 1.0) < 1e-6)
        assert np.all(np.abs(st.per_layer_ratio["da"] - 1.0) < 1e-6)

    def test_thread_count_does_not_change_results(self):
        a = run_wrapping(8, 3, 6, seed=1, threads=1)
        b = run_wrapping(8, 3, 6, seed=1, threads=4)
        for m in a.plain_ratio:
            assert np.array_equal(a.plain_ratio[m], b.plain_ratio[m])

    def test_geometric_growth_fit(self):
        # log mean widths vs layer index are a straight line with R^2 > 0.999
        st = run_wrapping(32, 5, 20, seed=2, methods=("ibp",))
        logw = np.cumsum(np.log([2.0] + list(st.plain_ratio["ibp"])))
        xs = np.arange(logw.size)
        r = np.corrcoef(xs, logw)[0, 1]
        assert r * r > 0.999

    def test_validation(self):
        with pytest.raises(ValidationError):
            run_wrapping(1, 1, 1)
        with pytest.raises(ValidationError):
            run_wrapping(4, 1, 1, methods=("nope",))


def two_class_line():
    # logits (w x, -w x): boundary at x = 0.25 for w x - b with w=2, b=0.5
    W = np.array([[2.0], [-2.0]])
    b = np.array([-0.5, 0.5])
    return NetworkSpec((Dense(W, b),), 1)


class TestBoundaryPoints:
    def test_analytic_crossing_1d(self):
        spec = two_class_line()
        pts, skipped = boundary_points(spec, [np.array([-1.0]), np.array([1.0])],
                                       seed=0, tol=1e-9)
        assert not skipped and len(pts) == 1
        assert abs(pts[0][0] - 0.25) < 1e-6

    def test_same_class_segment_skipped(self):
        spec = two_class_line()
        pts, skipped = boundary_points(
            spec, [np.array([0.5]), np.array([0.6]), np.array([-1.0])], seed=0)
        assert len(skipped) == 1

    def test_top2_gap_small_on_mlp(self, digits_mlp, digits_points):
        pts, _ = boundary_points(digits_mlp, digits_points, seed=0)
        assert pts
        for p in pts:
            logits = np.sort(eval_point(digits_mlp, p, with_softmax=False))
            assert logits[-1] - logits[-2] < 1e-3


class TestSweep:
    def test_zero_eps_gives_tiny_widths(self):
        rng = np.random.default_rng(4)
        spec = random_relu_net(rng, [3, 6, 2])
        pts = [rng.normal(size=3)]
        res = run_sweep(spec, pts, [0.0], ["ibp", "aa", "lb"], 50, seed=0)
        for m in res.methods:
            assert res.means[m][0] < 1e-12

    def test_nondecreasing_in_eps(self):
        rng = np.random.default_rng(5)
        spec = random_relu_net(rng, [3, 6, 2])
        pts = [rng.normal(size=3), rng.normal(size=3)]
        res = run_sweep(spec, pts, [1e-4, 1e-3, 1e-2, 1e-1],
                        ["ibp", "aa", "da", "lb"], 100, seed=0)
        for m in res.methods:
            assert np.all(np.diff(res.means[m]) >= -1e-12)

    def test_thread_invariance(self):
        rng = np.random.default_rng(6)
        spec = random_relu_net(rng, [3, 5, 2])
        pts = [rng.normal(size=3)]
        a = run_sweep(spec, pts, [1e-3, 1e-2], ["ibp", "lb"], 200, 0, threads=1)
        b = run_sweep(spec, pts, [1e-3, 1e-2], ["ibp", "lb"], 200, 0, threads=3)
        for m in a.methods:
            assert np.array_equal(a.means[m], b.means[m])

    def test_empty_grid_rejected(self):
        spec = two_class_line()
        with pytest.raises(ValidationError):
            run_sweep(spec, [np.zeros(1)], [], ["ibp"])


class TestMask:
    def test_zero_fraction_identity(self):
        pts = [np.arange(5.0)]
        out = mask_inputs(pts, 0.0, seed=0)
        assert np.array_equal(out[0], pts[0])

    def test_full_fraction_zeros(self):
        out = mask_inputs([np.arange(1.0, 6.0)], 1.0, seed=0)
        assert np.array_equal(out[0], np.zeros(5))

    def test_half_fraction_dim64_exact_count(self):
        out = mask_inputs([np.ones(64)], 0.5, seed=0)
        assert int((out[0] == 0).sum()) == 32

    def test_deterministic_per_seed(self):
        pts = [np.ones(16), np.ones(16)]
        a = mask_inputs(pts, 0.25, seed=3)
        b = mask_inputs(pts, 0.25, seed=3)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))
        assert not np.array_equal(a[0], a[1])  # per-point masks differ

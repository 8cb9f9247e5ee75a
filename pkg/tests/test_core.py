import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trbf.core import (
    HiddenBlock,
    NetConfig,
    Stats,
    TrbfEnsemble,
    TrbfNetwork,
    block_size,
    classify,
    fit_stats,
    gaussian_kernel,
    network_response,
    standardize,
    token_subwindow,
)
from trbf.errors import DimensionError


def oracle_response(token, centers, weights, nde, sigma):
    """Double loop over blocks and shifts, plain Python arithmetic."""
    nfe = len(token)
    nnc = nfe - nde + 1
    total = 0.0
    for b, block in enumerate(centers):
        for j in range(nnc):
            sub = [v for frame in token[j : j + nde] for v in frame]
            r2 = sum((a - c) ** 2 for a, c in zip(sub, block[j]))
            total += weights[b * nnc + j] * math.exp(-r2 / (2 * sigma * sigma))
    return total


def random_net(rng, cfg, n_blocks=3):
    blocks = [HiddenBlock(rng.standard_normal((cfg.nnc, cfg.center_dim)) * 0.5, f"b{i}") for i in range(n_blocks)]
    return TrbfNetwork(cfg, blocks, rng.standard_normal(n_blocks * cfg.nnc))


class TestBlockSize:
    @pytest.mark.parametrize("nfe,nde,expected", [(5, 5, 1), (6, 4, 3), (5, 2, 4), (5, 1, 5)])
    def test_values(self, nfe, nde, expected):
        assert block_size(nfe, nde) == expected

    @pytest.mark.parametrize("nfe,nde", [(5, 6), (5, 0), (3, -1)])
    def test_invalid(self, nfe, nde):
        with pytest.raises(ValueError):
            block_size(nfe, nde)

    def test_netconfig_rejects_bad_delay(self):
        with pytest.raises(ValueError):
            NetConfig(nfe=5, nde=7)
        with pytest.raises(ValueError):
            NetConfig(sigma=0.0)


class TestSubwindow:
    token = np.arange(15, dtype=float).reshape(5, 3)

    def test_full_window(self):
        np.testing.assert_array_equal(token_subwindow(self.token, 0, 5), self.token.ravel())

    def test_single_frame(self):
        for j in range(5):
            np.testing.assert_array_equal(token_subwindow(self.token, j, 1), self.token[j])

    def test_overlap(self):
        a, b = token_subwindow(self.token, 1, 3), token_subwindow(self.token, 2, 3)
        np.testing.assert_array_equal(a[3:], b[:6])

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            token_subwindow(self.token, 3, 3)
        with pytest.raises(ValueError):
            token_subwindow(self.token, -1, 2)


class TestKernel:
    def test_values(self):
        assert gaussian_kernel(0.0, 1.0) == 1.0
        assert gaussian_kernel(2.0, 2.0) == pytest.approx(0.6065306597126334, abs=1e-12)

    @settings(max_examples=50)
    @given(st.floats(0, 50), st.floats(0, 50), st.floats(0.05, 10))
    def test_monotone_and_bounded(self, r1, r2, sigma):
        lo, hi = sorted([r1, r2])
        assert gaussian_kernel(lo, sigma) >= gaussian_kernel(hi, sigma)
        v = gaussian_kernel(lo, sigma)
        assert 0.0 <= v <= 1.0
        if lo < 5 * sigma:
            assert v > 0.0


class TestResponse:
    def test_zero_weights(self, rng):
        cfg = NetConfig(n=3, nfe=5, nde=3)
        net = random_net(rng, cfg)
        net.weights[:] = 0
        assert network_response(net, rng.standard_normal((5, 3))) == 0.0

    def test_token_equal_to_centre(self, rng):
        cfg = NetConfig(n=4, nfe=5, nde=5)
        tok = rng.standard_normal((5, 4))
        net = TrbfNetwork(cfg, [HiddenBlock.from_token(tok, cfg)], [1.0])
        assert network_response(net, tok) == 1.0

    @pytest.mark.parametrize("nde", [1, 2, 4, 5])
    def test_matches_double_loop_oracle(self, rng, nde):
        cfg = NetConfig(n=3, nfe=5, nde=nde, sigma=1.3)
        net = random_net(rng, cfg, n_blocks=4)
        for _ in range(5):
            tok = rng.standard_normal((5, 3)) * 0.5
            expected = oracle_response(tok.tolist(), [b.centers.tolist() for b in net.blocks], net.weights.tolist(), nde, 1.3)
            assert network_response(net, tok) == pytest.approx(expected, abs=1e-12)

    def test_block_permutation_invariance(self, rng):
        cfg = NetConfig(n=3, nfe=5, nde=3)
        net = random_net(rng, cfg, n_blocks=5)
        order = [3, 0, 4, 1, 2]
        w = net.weights.reshape(5, cfg.nnc)[order].ravel()
        perm = TrbfNetwork(cfg, [net.blocks[i] for i in order], w)
        X = rng.standard_normal((10, 5, 3)) * 0.5
        np.testing.assert_allclose(perm.response(X), net.response(X), atol=1e-12, rtol=0)

    def test_continuity(self, rng):
        cfg = NetConfig(n=3, nfe=5, nde=3, sigma=0.8)
        net = random_net(rng, cfg)
        tok = rng.standard_normal((5, 3)) * 0.5
        bound = np.abs(net.weights).sum() / cfg.sigma * math.exp(-0.5)
        base = network_response(net, tok)
        for eps in [1e-2, 1e-4, 1e-6]:
            d = rng.standard_normal((5, 3))
            d *= eps / np.linalg.norm(d)
            change = abs(network_response(net, tok + d) - base)
            assert change <= bound * eps * (1 + 1e-9)

    def test_dimension_mismatch(self, rng):
        cfg = NetConfig(n=3, nfe=5, nde=3)
        net = random_net(rng, cfg)
        with pytest.raises(DimensionError):
            network_response(net, np.zeros((4, 3)))
        with pytest.raises(DimensionError):
            TrbfNetwork(cfg, net.blocks, np.zeros(2))

    def test_flattened_tokens_accepted(self, rng):
        cfg = NetConfig(n=3, nfe=5, nde=3)
        net = random_net(rng, cfg)
        X = rng.standard_normal((4, 5, 3))
        np.testing.assert_array_equal(net.response(X.reshape(4, 15)), net.response(X))


def _ensemble(rng, weights_per_class, cfg=NetConfig(n=2, nfe=3, nde=2)):
    nets = []
    for i, w in enumerate(weights_per_class):
        blocks = [HiddenBlock(np.zeros((cfg.nnc, cfg.center_dim)), "z")]
        nets.append(TrbfNetwork(cfg, blocks, np.full(cfg.nnc, w), str(i)))
    stats = Stats(np.zeros(cfg.n), np.ones(cfg.n))
    return TrbfEnsemble(cfg, nets, stats, [f"c{i}" for i in range(len(nets))])


class TestClassify:
    def test_single_active_class(self, rng):
        ens = _ensemble(rng, [0.0, 0.0, 2.0, 0.0])
        cls, scores = classify(ens, np.zeros((3, 2)))
        assert cls == "c2" and scores.argmax() == 2

    def test_tie_goes_to_lowest_index(self, rng):
        ens = _ensemble(rng, [0.1, 1.0, 0.0, 0.5, 1.0])
        assert classify(ens, np.zeros((3, 2)))[0] == "c1"

    def test_positive_scaling_preserves_decision(self, rng):
        cfg = NetConfig(n=2, nfe=3, nde=2)
        nets = [random_net(rng, cfg, 3) for _ in range(4)]
        stats = Stats(np.zeros(2), np.ones(2))
        ens = TrbfEnsemble(cfg, nets, stats, list("abcd"))
        X = rng.standard_normal((50, 3, 2)) * 0.5
        before = ens.predict(X)
        for net in nets:
            net.weights *= 7.5
        np.testing.assert_array_equal(ens.predict(X), before)

    def test_classify_standardizes(self, rng):
        ens = _ensemble(rng, [1.0, 0.0])
        ens.stats = Stats(np.full(2, 10.0), np.full(2, 2.0))
        _, raw = classify(ens, np.full((3, 2), 10.0))
        _, std = classify(ens, np.zeros((3, 2)), standardized=True)
        np.testing.assert_array_equal(raw, std)


class TestStats:
    def test_refit_after_standardizing(self, rng):
        X = rng.normal(3.0, 2.5, (40, 5, 4))
        Z = standardize(fit_stats(X), X)
        s = fit_stats(Z)
        np.testing.assert_allclose(s.mean, 0.0, atol=1e-9)
        np.testing.assert_allclose(s.std, 1.0, atol=1e-9)

    def test_constant_dimension(self, rng):
        X = rng.standard_normal((10, 5, 3))
        X[..., 1] = 4.0
        Z = standardize(fit_stats(X), X)
        assert np.isfinite(Z).all()
        np.testing.assert_array_equal(Z[..., 1], 0.0)

    def test_two_pass_oracle(self, rng):
        X = rng.normal(-1.0, 3.0, (25, 5, 3))
        frames = X.reshape(-1, 3).tolist()
        n = len(frames)
        mean = [sum(f[d] for f in frames) / n for d in range(3)]
        var = [sum((f[d] - mean[d]) ** 2 for f in frames) / n for d in range(3)]
        s = fit_stats(X)
        np.testing.assert_allclose(s.mean, mean, atol=1e-10, rtol=0)
        np.testing.assert_allclose(s.std, np.sqrt(var), atol=1e-10, rtol=0)

    def test_empty(self):
        with pytest.raises(ValueError):
            fit_stats(np.zeros((0, 5, 3)))

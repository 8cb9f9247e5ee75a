import numpy as np
import pytest
from sklearn.base import clone

from trbf.errors import EmptyInputError
from trbf.quantizer import (
    SomConfig,
    SomGrid,
    SomQuantizer,
    best_matching_unit,
    codebook,
    quantization_error,
    train_som,
)


def linear_scan_bmu(units, x):
    best, best_d = 0, None
    for i, u in enumerate(units):
        d = sum((a - b) ** 2 for a, b in zip(u, x))
        if best_d is None or d < best_d:
            best, best_d = i, d
    return best


def clustered(rng, n_clusters=10, per=20, dim=6):
    centres = rng.normal(0, 10, (n_clusters, dim))
    return np.concatenate([c + 0.1 * rng.standard_normal((per, dim)) for c in centres])


def test_single_unit_tracks_mean(rng):
    X = rng.normal(2.0, 1.0, (100, 4))
    grid = train_som(X, SomConfig(rows=1, cols=1, epochs=1000, seed=5))
    assert np.linalg.norm(grid.units[0] - X.mean(axis=0)) < 0.05


def test_identical_inputs_are_a_fixed_point():
    X = np.tile([1.5, -2.0, 0.25], (30, 1))
    grid = train_som(X, SomConfig(rows=4, cols=4, epochs=5))
    winners = grid.hits > 0
    np.testing.assert_allclose(grid.units[winners], np.tile(X[0], (winners.sum(), 1)), atol=1e-6)


def test_deterministic(rng):
    X = rng.standard_normal((60, 5))
    a = train_som(X, SomConfig(rows=4, cols=5, epochs=8, seed=9))
    b = train_som(X, SomConfig(rows=4, cols=5, epochs=8, seed=9))
    assert a.units.tobytes() == b.units.tobytes()
    np.testing.assert_array_equal(a.hits, b.hits)


def test_hits_account_for_every_vector(rng):
    X = rng.standard_normal((77, 3))
    grid = train_som(X, SomConfig(rows=3, cols=3, epochs=4))
    assert grid.hits.sum() == 77 and (grid.hits >= 0).all()
    assert np.isfinite(grid.units).all() and grid.units.shape == (9, 3)


def test_input_errors():
    with pytest.raises(EmptyInputError):
        train_som(np.zeros((0, 3)))
    with pytest.raises(ValueError):
        train_som([[1.0, 2.0], [1.0, 2.0, 3.0]])
    with pytest.raises(ValueError):
        train_som(np.ones((3, 2)), SomConfig(alpha0=0.0))
    with pytest.raises(ValueError):
        train_som(np.ones((3, 2)), SomConfig(rows=0))


class TestBestMatchingUnit:
    def grid(self, units):
        units = np.asarray(units, dtype=float)
        return SomGrid(units, np.zeros(len(units), dtype=int), 1, len(units))

    def test_exact_unit(self, rng):
        g = self.grid(rng.standard_normal((12, 4)))
        assert best_matching_unit(g, g.units[7]) == 7

    def test_tie_goes_to_lowest_index(self):
        units = np.zeros((12, 2))
        units[:] = 100.0
        units[3] = [1.0, 0.0]
        units[9] = [-1.0, 0.0]
        assert best_matching_unit(self.grid(units), [0.0, 0.0]) == 3

    def test_matches_linear_scan(self, rng):
        g = self.grid(rng.standard_normal((30, 5)))
        for x in rng.standard_normal((50, 5)):
            assert best_matching_unit(g, x) == linear_scan_bmu(g.units, x)

    def test_dimension_mismatch(self, rng):
        with pytest.raises(ValueError):
            best_matching_unit(self.grid(rng.standard_normal((3, 4))), np.zeros(5))


class TestCodebook:
    def test_full_grid(self, rng):
        grid = train_som(rng.standard_normal((40, 3)), SomConfig(epochs=2))
        book = codebook(grid, 0)
        assert book.shape == (256, 3)
        np.testing.assert_array_equal(book, grid.units)

    def test_threshold_above_max(self, rng):
        grid = train_som(rng.standard_normal((40, 3)), SomConfig(rows=3, cols=3, epochs=2))
        assert len(codebook(grid, int(grid.hits.max()) + 1)) == 0

    def test_clusters_prune_dead_units(self, rng):
        X = clustered(rng)
        grid = train_som(X, SomConfig(epochs=20, seed=2))
        book = codebook(grid, 1)
        assert 0 < len(book) < 256
        # row-major order preserved
        kept = np.flatnonzero(grid.hits >= 1)
        np.testing.assert_array_equal(book, grid.units[kept])

    def test_negative_threshold(self, rng):
        grid = train_som(rng.standard_normal((5, 2)), SomConfig(rows=2, cols=2, epochs=1))
        with pytest.raises(ValueError):
            codebook(grid, -1)


@pytest.fixture(scope="module")
def token_traces():
    """Epoch-boundary quantization errors of the default map on synthetic vowel tokens."""
    from trbf.dataset import SynthConfig, synth_tokens

    X, y, _, _ = synth_tokens(SynthConfig(n_train=250, n_test=0, seed=0))
    traces = []
    for cls in np.unique(y)[:3]:
        trace = []
        train_som(X[y == cls].reshape(-1, X.shape[1] * X.shape[2]), SomConfig(seed=0), trace=trace)
        traces.append(trace)
    return traces


def test_quantization_error_decreases_over_default_schedule(token_traces):
    for trace in token_traces:
        assert len(trace) == 50
        assert trace[-1] < 0.6 * trace[0]
        # convergence phase (last 20% of the schedule, rate below 0.1)
        tail = trace[-11:]
        for before, after in zip(tail, tail[1:]):
            assert after <= before * 1.05


@pytest.mark.xfail(
    strict=True,
    reason="online updates at rates near 0.5 make epoch snapshots jitter by up to ~15% early in the schedule",
)
def test_quantization_error_within_band_every_epoch(token_traces):
    for trace in token_traces:
        for before, after in zip(trace, trace[1:]):
            assert after <= before * 1.05


def test_quantization_error_trace_matches_final_grid(rng):
    X = clustered(rng, n_clusters=12, per=20, dim=8)
    trace = []
    grid = train_som(X, SomConfig(seed=4), trace=trace)
    assert quantization_error(grid.units, X) == pytest.approx(trace[-1])


class TestSomQuantizer:
    def test_per_class_codebooks(self, rng):
        X = np.concatenate([rng.normal(0, 1, (40, 3, 2)), rng.normal(5, 1, (40, 3, 2))])
        y = np.array(["a"] * 40 + ["b"] * 40)
        q = SomQuantizer(rows=4, cols=4, epochs=5, random_state=1).fit(X, y)
        assert q.prototypes_.shape[1:] == (3, 2)
        assert set(q.prototype_labels_) == {"a", "b"}
        assert len(q.prototypes_) <= 32
        out = q.transform(X[:5])
        assert out.shape == (5, 3, 2)

    def test_sklearn_params(self):
        q = SomQuantizer(rows=3, min_hits=0)
        c = clone(q)
        assert c.get_params()["rows"] == 3 and c.get_params()["min_hits"] == 0

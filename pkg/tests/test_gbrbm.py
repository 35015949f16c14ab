import itertools
import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.stats import norm

from crimeseries import gbrbm
from crimeseries.errors import (DimensionMismatchError, FormatError, InvalidConfigError,
                                TrainingDivergedError, VersionMismatchError)
from crimeseries.features import TermDocMatrix
from crimeseries.gbrbm import (GbrbmModel, TrainConfig, cd_k_gradient, embed, energy,
                               exact_gradient, exact_log_likelihood, gibbs_step, hidden_conditional,
                               init_model, load_model, save_model, train, visible_conditional)


def random_model(rng, m, n, scale=1.0):
    return GbrbmModel(rng.normal(0, scale, (m, n)), rng.normal(0, 1, m), rng.normal(0, 1, n),
                      rng.uniform(0.5, 2.0, m))


def zero_model(m, n, sigma=1.0):
    return GbrbmModel(np.zeros((m, n)), np.zeros(m), np.zeros(n), np.full(m, sigma))


def brute_force_hidden_marginals(model, v):
    """p(h_j=1|v) as a ratio of summed Boltzmann weights over every hidden configuration."""
    H = np.array(list(itertools.product((0.0, 1.0), repeat=model.n)))
    weights = np.array([math.exp(-energy(model, v, h)) for h in H])
    return (weights @ H) / weights.sum()


def finite_difference_gradient(model, v, step=1e-5):
    out = {}
    for name in ("W", "b", "c"):
        arr = getattr(model, name)
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            plus, minus = model.copy(), model.copy()
            getattr(plus, name)[idx] += step
            getattr(minus, name)[idx] -= step
            g[idx] = (exact_log_likelihood(plus, v) - exact_log_likelihood(minus, v)) / (2 * step)
        out[name] = g
    return np.concatenate([out["W"].ravel(), out["b"], out["c"]])


class TestModel:
    def test_init_shapes(self):
        m = init_model(2, 3, TrainConfig(seed=1))
        assert m.W.shape == (2, 3) and np.all(np.isfinite(m.W))
        assert m.c.tolist() == [0, 0, 0] and m.b.tolist() == [0, 0]
        assert m.sigma.tolist() == [1, 1]

    def test_init_deterministic(self):
        a = init_model(4, 5, TrainConfig(seed=7))
        b = init_model(4, 5, TrainConfig(seed=7))
        np.testing.assert_array_equal(a.W, b.W)

    def test_init_data_mean(self):
        m = init_model(2, 1, TrainConfig(), data_mean=[0.1, 0.2])
        assert m.b.tolist() == [0.1, 0.2]

    def test_rejects_bad_params(self):
        with pytest.raises(DimensionMismatchError):
            GbrbmModel(np.zeros((2, 2)), np.zeros(3), np.zeros(2), np.ones(2))
        with pytest.raises(ValueError):
            GbrbmModel(np.zeros((1, 1)), [0], [0], [0.0])
        with pytest.raises(ValueError):
            GbrbmModel(np.full((1, 1), np.nan), [0], [0], [1.0])

    @pytest.mark.parametrize("field, value", [
        ("learning_rate", -1.0), ("batch_size", 0), ("epochs", 0), ("cd_k", 0),
        ("sigma", 0.0), ("visible_bias_init", "random"),
    ])
    def test_config_validation(self, field, value):
        with pytest.raises(InvalidConfigError):
            TrainConfig(**{field: value}).validate()


class TestEnergyAndConditionals:
    def test_energy_quadratic_only(self):
        assert energy(zero_model(2, 1), [1, 1], [0]) == pytest.approx(1.0)

    def test_energy_zero(self):
        assert energy(zero_model(3, 2), np.zeros(3), np.zeros(2)) == 0

    def test_energy_hand_value(self):
        m = GbrbmModel([[2.0]], [0.0], [0.0], [1.0])
        assert energy(m, [1.0], [1.0]) == pytest.approx(-1.5, abs=1e-15)

    def test_energy_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            energy(zero_model(2, 1), [1, 1, 1], [0])
        with pytest.raises(DimensionMismatchError):
            hidden_conditional(zero_model(2, 1), [1])
        with pytest.raises(DimensionMismatchError):
            visible_conditional(zero_model(2, 1), [1, 0])

    def test_hidden_half_at_zero_weights(self):
        np.testing.assert_array_equal(hidden_conditional(zero_model(3, 4), [1, 2, 3]), 0.5)

    def test_hidden_saturation(self):
        m = GbrbmModel(np.zeros((1, 2)), [0], [30.0, 30.0], [1])
        assert np.all(hidden_conditional(m, [0.3]) >= 1 - 1e-9)

    def test_hidden_hand_value(self):
        m = GbrbmModel([[1.0]], [0.0], [0.0], [2.0])
        assert hidden_conditional(m, [2.0])[0] == pytest.approx(0.7310585786300049, abs=1e-12)

    def test_visible_mean_zero_hidden(self):
        rng = np.random.default_rng(0)
        m = random_model(rng, 3, 2)
        mean, std = visible_conditional(m, [0, 0])
        np.testing.assert_array_equal(mean, m.b)
        np.testing.assert_array_equal(std, m.sigma)

    def test_visible_hand_value(self):
        m = GbrbmModel([[1.0, -1.0]], [0.5], [0, 0], [1.0])
        assert visible_conditional(m, [1, 1])[0][0] == pytest.approx(0.5)

    def test_visible_std_copy(self):
        m = GbrbmModel([[0.0]], [0.0], [0.0], [2.0])
        assert visible_conditional(m, [1])[1].tolist() == [2.0]

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**32 - 1))
    def test_conditional_matches_energy_ratio(self, m, n, seed):
        rng = np.random.default_rng(seed)
        model = random_model(rng, m, n)
        v = rng.normal(0, 1.5, m)
        np.testing.assert_allclose(hidden_conditional(model, v), brute_force_hidden_marginals(model, v),
                                   rtol=0, atol=1e-10)


class TestSampling:
    def test_saturated_hidden_all_ones(self):
        m = GbrbmModel(np.zeros((2, 3)), [0, 0], [30.0] * 3, [1, 1])
        h, _ = gibbs_step(m, [0.1, 0.2], np.random.default_rng(0))
        assert h.tolist() == [1, 1, 1]

    def test_gibbs_deterministic(self):
        m = random_model(np.random.default_rng(2), 3, 2)
        a = gibbs_step(m, [1, 2, 3], np.random.default_rng(5))
        b = gibbs_step(m, [1, 2, 3], np.random.default_rng(5))
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_hidden_sample_frequency(self):
        m = GbrbmModel([[1.0]], [0.0], [0.0], [2.0])
        p = hidden_conditional(m, [2.0])[0]
        n = 100_000
        hs, _ = gibbs_step(m, np.full((n, 1), 2.0), np.random.default_rng(11))
        assert abs(hs.mean() - p) < 3 * math.sqrt(p * (1 - p) / n)


class TestCD:
    def test_phases_cancel_when_chain_cannot_move(self):
        # W = 0 and b = v0: the chain stays centred on v0, so every term is zero-mean noise
        v0 = np.array([0.3, -0.7, 1.1])
        sigma = 0.1
        m = GbrbmModel(np.zeros((3, 2)), v0, [0, 0], np.full(3, sigma))
        batch = np.tile(v0, (10_000, 1))
        g = cd_k_gradient(m, batch, 1, np.random.default_rng(0))
        np.testing.assert_array_equal(g.dc, 0.0)
        se = 1 / math.sqrt(batch.shape[0])
        assert np.all(np.abs(g.dW) < 4 * 0.5 * se)
        assert np.all(np.abs(g.db) < 4 * se / sigma)

    def test_empty_batch(self):
        with pytest.raises(ValueError):
            cd_k_gradient(zero_model(2, 2), np.zeros((0, 2)), 1, np.random.default_rng(0))
        with pytest.raises(ValueError):
            cd_k_gradient(zero_model(2, 2), np.zeros((1, 2)), 0, np.random.default_rng(0))

    def test_deterministic(self):
        m = random_model(np.random.default_rng(3), 4, 3)
        batch = np.random.default_rng(4).normal(size=(6, 4))
        a = cd_k_gradient(m, batch, 3, np.random.default_rng(9))
        b = cd_k_gradient(m, batch, 3, np.random.default_rng(9))
        assert a.flat().tobytes() == b.flat().tobytes()

    def test_long_chain_matches_oracle(self):
        m = GbrbmModel([[2.0, -1.5], [1.0, 2.0]], [0.5, -0.5], [-1.0, 0.5], [1.0, 1.0])
        v0 = np.array([1.5, -1.0])
        rng = np.random.default_rng(100)
        est = np.array([cd_k_gradient(m, np.tile(v0, (100, 1)), 100, rng).flat() for _ in range(100)])
        se = est.std(axis=0, ddof=1) / math.sqrt(len(est))
        diff = est.mean(axis=0) - exact_gradient(m, v0).flat()
        assert np.all(np.abs(diff) < 4 * se + 1e-12)


class TestExactOracle:
    def test_factorized_case_is_gaussian(self):
        rng = np.random.default_rng(0)
        b, sigma = rng.normal(size=3), rng.uniform(0.5, 2, 3)
        m = GbrbmModel(np.zeros((3, 2)), b, np.zeros(2), sigma)
        v = rng.normal(size=3)
        expected = norm.logpdf(v, loc=b, scale=sigma).sum()
        assert exact_log_likelihood(m, v) == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize("w, b, c, s", [(0.7, 0.3, -0.2, 1.3), (-1.5, -0.4, 0.8, 0.6), (2.0, 0.0, 0.0, 1.0)])
    def test_one_by_one_against_quadrature(self, w, b, c, s):
        m = GbrbmModel([[w]], [b], [c], [s])

        def unnorm(x):
            return sum(math.exp(-energy(m, [x], [h])) for h in (0.0, 1.0))

        Z = integrate.quad(unnorm, -np.inf, np.inf, epsabs=0, epsrel=1e-12)[0]
        for v in (-2.0, 0.1, 1.7):
            assert exact_log_likelihood(m, [v]) == pytest.approx(math.log(unnorm(v) / Z), abs=1e-6)

    def test_density_integrates_to_one(self):
        m = GbrbmModel([[1.2]], [0.4], [-0.3], [0.8])
        grid = np.linspace(-15, 15, 30001)
        dens = np.exp([exact_log_likelihood(m, [x]) for x in grid])
        assert abs(integrate.trapezoid(dens, grid) - 1) < 1e-4

    def test_n_too_large(self):
        with pytest.raises(ValueError, match="n <= 20"):
            exact_log_likelihood(zero_model(1, 21), [0.0])
        with pytest.raises(ValueError):
            exact_gradient(zero_model(1, 21), [0.0])

    @pytest.mark.parametrize("seed", range(5))
    def test_gradient_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        m = random_model(rng, 3, 2)
        v = rng.normal(size=3)
        fd = finite_difference_gradient(m, v)
        exact = exact_gradient(m, v).flat()
        assert np.linalg.norm(fd - exact) / np.linalg.norm(exact) < 1e-5

    def test_db_zero_at_bias(self):
        m = GbrbmModel(np.zeros((3, 2)), [0.2, -1, 3], [0, 0], [1, 2, 0.5])
        g = exact_gradient(m, m.b)
        np.testing.assert_allclose(g.db, 0, atol=1e-15)

    def test_identical_hidden_units_get_identical_gradients(self):
        rng = np.random.default_rng(8)
        col = rng.normal(size=3)
        m = GbrbmModel(np.column_stack([col, col, rng.normal(size=3)]), rng.normal(size=3),
                       [0.3, 0.3, -0.2], [1, 1.5, 0.7])
        g = exact_gradient(m, rng.normal(size=3))
        np.testing.assert_allclose(g.dW[:, 0], g.dW[:, 1], rtol=1e-12, atol=1e-14)
        assert g.dc[0] == pytest.approx(g.dc[1], rel=1e-12)


class TestTraining:
    def data(self, n_docs=30, m=12, seed=0):
        rng = np.random.default_rng(seed)
        return rng.random((n_docs, m)) * (rng.random((n_docs, m)) < 0.3)

    def test_single_document_error_decreases(self):
        v = np.array([[3.0, -2.0, 1.0, 4.0]])
        for seed in range(3):
            cfg = TrainConfig(weight_init_std=0.0, visible_bias_init="zero", epochs=40, batch_size=1, seed=seed)
            _, trace = train(v, 3, cfg)
            assert np.all(np.diff(trace[:5]) < 0)
            assert trace[-1] < trace[0] / 10

    def test_deterministic(self):
        X = self.data()
        cfg = TrainConfig(epochs=3, seed=4, learning_rate=0.01)
        m1, t1 = train(X, 5, cfg)
        m2, t2 = train(X, 5, cfg)
        assert t1 == t2
        np.testing.assert_array_equal(m1.W, m2.W)
        np.testing.assert_array_equal(m1.c, m2.c)

    def test_zero_learning_rate_is_noop(self):
        X = self.data()
        cfg = TrainConfig(epochs=3, seed=1, learning_rate=0.0)
        model, _ = train(X, 4, cfg)
        start = gbrbm.initial_model(X, 4, cfg)
        for name in ("W", "b", "c", "sigma"):
            np.testing.assert_array_equal(getattr(model, name), getattr(start, name))

    def test_accepts_sparse_and_termdoc(self):
        X = self.data()
        cfg = TrainConfig(epochs=2, seed=0, learning_rate=0.01)
        dense, _ = train(X, 3, cfg)
        tdm = TermDocMatrix(sp.csr_matrix(X), tuple(str(i) for i in range(len(X))))
        fromsparse, _ = train(tdm, 3, cfg)
        np.testing.assert_array_equal(dense.W, fromsparse.W)

    def test_invalid_config(self):
        with pytest.raises(InvalidConfigError):
            train(self.data(), 3, TrainConfig(batch_size=0))
        with pytest.raises(InvalidConfigError):
            train(self.data(), 0, TrainConfig())
        with pytest.raises(InvalidConfigError):
            train(np.zeros((0, 3)), 2, TrainConfig())

    def test_divergence_is_reported(self):
        X = self.data(n_docs=40, m=50)
        with pytest.raises(TrainingDivergedError):
            train(X, 400, TrainConfig(learning_rate=5.0, epochs=30))


class TestEmbed:
    def test_zero_model_gives_half(self):
        E = embed(zero_model(4, 3), np.random.default_rng(0).normal(size=(5, 4)))
        np.testing.assert_array_equal(E.values, 0.5)

    def test_identical_rows(self):
        m = random_model(np.random.default_rng(1), 3, 4)
        E = embed(m, np.array([[1.0, 2, 3], [1.0, 2, 3]]))
        np.testing.assert_array_equal(E.values[0], E.values[1])

    def test_row_matches_conditional(self):
        m = random_model(np.random.default_rng(1), 3, 4)
        X = np.random.default_rng(2).normal(size=(4, 3))
        E = embed(m, X)
        np.testing.assert_array_equal(E.values[2], hidden_conditional(m, X[2]))

    def test_bounds_and_row_ids(self):
        m = random_model(np.random.default_rng(1), 3, 4)
        tdm = TermDocMatrix(sp.csr_matrix(np.eye(3)), ("a", "b", "c"))
        E = embed(m, tdm)
        assert E.row_ids == ("a", "b", "c")
        assert np.all((E.values > 0) & (E.values < 1))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            embed(zero_model(3, 2), np.zeros((2, 4)))

    def test_embedding_file_roundtrip(self, tmp_path):
        E = embed(random_model(np.random.default_rng(1), 3, 2), np.eye(3), row_ids=("x", "y", "z"))
        E.save(tmp_path / "e.npz")
        back = gbrbm.EmbeddingMatrix.load(tmp_path / "e.npz")
        np.testing.assert_array_equal(back.values, E.values)
        assert back.row_ids == E.row_ids
        E.save(tmp_path / "f.npz")
        assert (tmp_path / "e.npz").read_bytes() == (tmp_path / "f.npz").read_bytes()


class TestModelFile:
    def test_roundtrip(self, tmp_path):
        m = random_model(np.random.default_rng(5), 4, 3)
        m.seed = 123
        save_model(m, tmp_path / "m.gbrbm")
        back = load_model(tmp_path / "m.gbrbm")
        for name in ("W", "b", "c", "sigma"):
            np.testing.assert_array_equal(getattr(back, name), getattr(m, name))
        assert back.seed == 123

    def test_truncated(self, tmp_path):
        p = tmp_path / "m.gbrbm"
        save_model(random_model(np.random.default_rng(5), 4, 3), p)
        p.write_bytes(p.read_bytes()[:-9])
        with pytest.raises(FormatError):
            load_model(p)
        p.write_bytes(b"GBRBM")
        with pytest.raises(FormatError):
            load_model(p)

    def test_version_mismatch(self, tmp_path):
        p = tmp_path / "m.gbrbm"
        save_model(zero_model(2, 2), p)
        raw = bytearray(p.read_bytes())
        raw[8:12] = (99).to_bytes(4, "little")
        p.write_bytes(bytes(raw))
        with pytest.raises(VersionMismatchError):
            load_model(p)

    def test_corrupted_payload(self, tmp_path):
        p = tmp_path / "m.gbrbm"
        save_model(zero_model(2, 2), p)
        raw = bytearray(p.read_bytes())
        raw[40] ^= 0xFF
        p.write_bytes(bytes(raw))
        with pytest.raises(FormatError, match="checksum"):
            load_model(p)

    def test_wrong_magic(self, tmp_path):
        p = tmp_path / "m.gbrbm"
        p.write_bytes(b"\x00" * 64)
        with pytest.raises(FormatError):
            load_model(p)

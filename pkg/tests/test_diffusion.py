import math

import numpy as np
import pytest

from diffdesign import diffusion as df
from diffdesign.designs import ConditionVector
from diffdesign.errors import ConfigError, DataError, ShapeError


def tiny_model(design_dim=3, T=12, width=12, seed=0, identity_stats=True):
    sched = df.build_schedule(T, 1e-3, 0.15)
    model = df.build_model(design_dim, ("target",), schedule=sched, width=width,
                           blocks=1, embed_dim=8, seed=seed)
    if identity_stats:
        model.x_stats = (np.zeros(design_dim), np.ones(design_dim))
        model.c_stats = (np.zeros(1), np.ones(1))
    return model


class TestSchedule:
    def test_hand_multiplied_products(self):
        s = df.build_schedule(4, 0.1, 0.4)
        np.testing.assert_allclose(s.beta[1:], [0.1, 0.2, 0.3, 0.4], atol=1e-15)
        np.testing.assert_allclose(s.alpha[1:], [0.9, 0.8, 0.7, 0.6], atol=1e-15)
        np.testing.assert_allclose(s.alpha_bar[1:], [0.9, 0.72, 0.504, 0.3024], atol=1e-12)

    def test_single_step(self):
        s = df.build_schedule(1, 0.5, 0.5)
        assert s.alpha_bar[1] == pytest.approx(0.5)

    def test_partition_identity(self):
        s = df.default_schedule()
        for t in range(1, s.T):
            assert s.alpha_bar[t + 1] / s.alpha_bar[t] == pytest.approx(s.alpha[t + 1], abs=1e-12)

    def test_default_reaches_prior(self):
        s = df.default_schedule()
        assert s.T == 200
        assert s.alpha_bar[s.T] < 1e-3

    def test_alpha_bar_strictly_decreasing(self):
        s = df.default_schedule()
        assert np.all(np.diff(s.alpha_bar[1:]) < 0)

    def test_bounds_validated(self):
        with pytest.raises(ConfigError):
            df.build_schedule(10, 0.0, 0.5)
        with pytest.raises(ConfigError):
            df.build_schedule(10, 0.5, 0.2)
        with pytest.raises(ConfigError):
            df.build_schedule(0, 0.1, 0.2)


class TestQSample:
    def test_identity_limit(self):
        # abar = 1 at the t=0 sentinel: x0 passes through unchanged
        s = df.build_schedule(3, 1e-8, 1e-8)
        x0 = np.array([1.0, -2.0])
        out = df.q_sample(x0, 1, np.array([5.0, 5.0]), s)
        np.testing.assert_allclose(out, x0, atol=1e-3)

    def test_hand_roots(self):
        s = df.build_schedule(1, 0.75, 0.75)  # abar_1 = 0.25
        out = df.q_sample(np.array([1.0, 0.0]), 1, np.array([0.0, 1.0]), s)
        np.testing.assert_allclose(out, [0.5, math.sqrt(0.75)], atol=1e-15)

    def test_zero_noise(self):
        s = df.build_schedule(5, 0.1, 0.3)
        x0 = np.array([2.0, 3.0])
        out = df.q_sample(x0, 4, np.zeros(2), s)
        np.testing.assert_allclose(out, np.sqrt(s.alpha_bar[4]) * x0, atol=1e-15)

    def test_dim_mismatch(self):
        s = df.build_schedule(5, 0.1, 0.3)
        with pytest.raises(ShapeError):
            df.q_sample(np.zeros(2), 1, np.zeros(3), s)

    def test_moments(self):
        """Empirical mean/variance of the forward marginal at several t."""
        s = df.default_schedule()
        rng = np.random.default_rng(0)
        x0 = np.array([1.5, -0.5])
        n = 100_000
        for t in (1, 100, 200):
            eps = rng.standard_normal((n, 2))
            draws = df.q_sample(np.tile(x0, (n, 1)), t, eps, s)
            ab = s.alpha_bar[t]
            se_mean = math.sqrt(1.0 - ab) / math.sqrt(n)
            assert np.all(np.abs(draws.mean(axis=0) - math.sqrt(ab) * x0) < 5 * se_mean)
            var = draws.var(axis=0)
            se_var = (1.0 - ab) * math.sqrt(2.0 / n)
            assert np.all(np.abs(var - (1.0 - ab)) < 5 * se_var)


def plain_ddpm_step(model, x_t, t, c, z):
    """Independently coded unguided DDPM update, straight from the update rule."""
    s = model.schedule
    a = s.alpha[t]
    ab = s.alpha_bar[t]
    eps_hat = model.predict_eps(x_t, t, c)
    return (x_t - (1.0 - a) / np.sqrt(1.0 - ab) * eps_hat) / np.sqrt(a) + s.sigma[t] * z


class TestGuidedStep:
    def test_reduces_to_plain_update(self):
        """gamma = lambda = 0 equals the separately coded plain update bit-exactly."""
        model = tiny_model()
        rng = np.random.default_rng(3)
        c = np.array([0.2])
        x = rng.standard_normal(3)
        for t in (1, 5, 12):
            z = rng.standard_normal(3) if t > 1 else np.zeros(3)
            got = df.guided_step(model, x, t, c, guidance=None, z=z)
            want = plain_ddpm_step(model, x, t, c, z)
            assert np.array_equal(got, want), f"t={t}"

    def test_zero_predictor_reduction(self):
        """With eps == 0 nets, gamma = lambda = 0, t=1: x/sqrt(alpha_1)."""
        model = tiny_model()
        for lp in model.trunk_params.layers:
            for W, b in lp:
                W[:] = 0
                b[:] = 0
        x = np.array([1.0, 2.0, -3.0])
        out = df.guided_step(model, x, 1, np.array([0.0]), z=np.zeros(3))
        np.testing.assert_allclose(out, x / math.sqrt(model.schedule.alpha[1]), atol=1e-15)

    def test_performance_term_hand_value(self):
        """1-d linear predictor P(x) = 2x, target 1, x=0, lambda=0.5 adds +2."""
        from diffdesign import netcore as nc
        from diffdesign.guidance import GuidanceConfig, PerformancePredictor

        model = tiny_model(design_dim=1)
        for lp in model.trunk_params.layers:
            for W, b in lp:
                W[:] = 0
                b[:] = 0
        pspec = nc.mlp_spec([1, 1], out_activation="identity")
        pred = PerformancePredictor(pspec, nc.ParameterSet([[(np.array([[2.0]]), np.zeros(1))]]), 1)
        g = GuidanceConfig(lambda_=0.5, target=1.0, predictor=pred)
        t = 1
        base = df.guided_step(model, np.zeros(1), t, np.array([0.0]), z=np.zeros(1))
        guided = df.guided_step(model, np.zeros(1), t, np.array([0.0]), guidance=g, z=np.zeros(1))
        assert guided - base == pytest.approx(2.0)

    def test_guidance_zero_at_target(self):
        from diffdesign import netcore as nc
        from diffdesign.guidance import GuidanceConfig, PerformancePredictor

        model = tiny_model(design_dim=1)
        pspec = nc.mlp_spec([1, 1], out_activation="identity")
        pred = PerformancePredictor(pspec, nc.ParameterSet([[(np.array([[2.0]]), np.zeros(1))]]), 1)
        x = np.array([0.5])  # P(x) = 1.0
        g_on = GuidanceConfig(lambda_=0.9, target=1.0, predictor=pred)
        a = df.guided_step(model, x, 1, np.array([0.0]), guidance=g_on, z=np.zeros(1))
        b = df.guided_step(model, x, 1, np.array([0.0]), guidance=None, z=np.zeros(1))
        np.testing.assert_allclose(a, b, atol=1e-15)

    def test_missing_nets_config_error(self):
        from diffdesign.guidance import GuidanceConfig

        model = tiny_model()
        with pytest.raises(ConfigError):
            df.guided_step(model, np.zeros(3), 2, np.array([0.0]),
                           guidance=GuidanceConfig(gamma=0.5), rng=np.random.default_rng(0))

    def test_noise_coupling_flag(self):
        """paper form scales Z by (1-gamma); conventional form does not."""
        from diffdesign import netcore as nc
        from diffdesign.guidance import FeasibilityClassifier, GuidanceConfig

        model = tiny_model(design_dim=1)
        cspec = nc.mlp_spec([1, 1], out_activation="sigmoid")
        clf = FeasibilityClassifier(cspec, nc.ParameterSet([[(np.zeros((1, 1)), np.zeros(1))]]), 1)
        z = np.array([1.0])
        t = 5
        kw = dict(gamma=0.5, classifier=clf)
        paper = df.guided_step(model, np.zeros(1), t, np.array([0.0]),
                               guidance=GuidanceConfig(noise_coupling="paper", **kw), z=z)
        conv = df.guided_step(model, np.zeros(1), t, np.array([0.0]),
                              guidance=GuidanceConfig(noise_coupling="conventional", **kw), z=z)
        assert conv - paper == pytest.approx(model.schedule.sigma[t] * 0.5)


class TestSample:
    def test_empty(self):
        model = tiny_model()
        out = df.sample(model, ConditionVector(0.0), 0, seed=1)
        assert out.shape == (0, 3)

    def test_seed_determinism(self):
        model = tiny_model()
        a = df.sample(model, ConditionVector(0.1), 4, seed=9)
        b = df.sample(model, ConditionVector(0.1), 4, seed=9)
        assert np.array_equal(a, b)

    def test_different_seeds_differ(self):
        model = tiny_model()
        a = df.sample(model, ConditionVector(0.1), 2, seed=1)
        b = df.sample(model, ConditionVector(0.1), 2, seed=2)
        assert not np.array_equal(a, b)

    def test_chain_prefix_independent_of_n(self):
        model = tiny_model()
        a = df.sample(model, ConditionVector(0.1), 2, seed=5)
        b = df.sample(model, ConditionVector(0.1), 6, seed=5)
        assert np.array_equal(b[:2], a)


class TestTrain:
    def test_zero_epochs_no_op(self):
        model = tiny_model(identity_stats=False)
        before = model.trunk_params.copy()
        records = df.train(model, np.zeros((4, 3)), np.zeros((4, 1)),
                           df.TrainConfig(epochs=0))
        assert records == []
        for a, b in zip(model.trunk_params.arrays(), before.arrays()):
            assert np.array_equal(a, b)

    def test_empty_dataset_rejected(self):
        model = tiny_model()
        with pytest.raises(DataError):
            df.train(model, np.zeros((0, 3)), np.zeros((0, 1)), df.TrainConfig(epochs=1))

    def test_single_point_descent(self):
        """Loss on a one-point dataset falls well below its starting value."""
        model = tiny_model(T=12, width=16, identity_stats=True)
        x0 = np.array([[0.3, -0.2, 0.8]])
        c = np.array([[0.5]])
        records = df.train(model, x0, c, df.TrainConfig(epochs=500, batch_size=1, lr=3e-3))
        head = np.mean([r.mean_loss for r in records[:20]])
        tail = np.mean([r.mean_loss for r in records[-20:]])
        assert tail < head

    def test_trivial_dataset_converges(self):
        """x0 = 0 dataset: loss under 5% of its initial value within 2000 steps."""
        model = df.build_model(2, ("target",), schedule=df.default_schedule(),
                               width=32, blocks=1, embed_dim=16, seed=0)
        x0 = np.zeros((8, 2))
        c = np.zeros((8, 1))
        records = df.train(model, x0, c, df.TrainConfig(epochs=2000, batch_size=8, lr=2e-3))
        assert records[-1].mean_loss < 0.05 * records[0].mean_loss


class TestModelCheckpoint:
    def test_roundtrip_bit_exact(self, tmp_path):
        model = tiny_model(seed=7, identity_stats=False)
        model.x_stats = (np.array([1.0, 2.0, 3.0]), np.array([0.1, 0.2, 0.3]))
        model.c_stats = (np.array([0.5]), np.array([2.0]))
        path = tmp_path / "model.json"
        model.save(path)
        loaded = df.DiffusionModel.load(path)
        assert loaded.design_dim == model.design_dim
        assert loaded.cond_names == model.cond_names
        assert np.array_equal(loaded.schedule.beta, model.schedule.beta)
        assert np.array_equal(loaded.schedule.alpha_bar, model.schedule.alpha_bar)
        for a, b in zip(model.trunk_params.arrays(), loaded.trunk_params.arrays()):
            assert np.array_equal(a, b)
        x = np.random.default_rng(0).standard_normal(3)
        np.testing.assert_array_equal(
            model.predict_eps(x, 3, np.array([0.0])), loaded.predict_eps(x, 3, np.array([0.0]))
        )

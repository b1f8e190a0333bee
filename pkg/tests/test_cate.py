import numpy as np
import pytest

from cate_ebm import (
    BaseSpec,
    Dataset,
    KernelRidge,
    Ridge,
    ae_fit,
    dr_learner,
    dr_pseudo_outcome,
    fit_learner,
    make_rng,
    median_gamma,
    pca_fit,
    propensity_fit,
    r_learner,
    t_learner,
    x_learner,
)
from cate_ebm.errors import DimensionError, TooFewSamplesError


def _linear_effect_data(n=400, d=3, seed=0, noise=0.0):
    """Linear potential outcomes with a known effect surface."""
    rng = make_rng(seed)
    x = rng.standard_normal((n, d))
    w0 = np.array([1.0, -2.0, 0.5])[:d]
    w1 = np.array([2.0, -1.0, 1.5])[:d]
    mu0 = x @ w0 + 0.3
    mu1 = x @ w1 - 0.2
    a = (rng.random(n) < 0.5).astype(int)
    y = a * mu1 + (1 - a) * mu0 + noise * rng.standard_normal(n)
    tau = mu1 - mu0
    return Dataset(x=x, a=a, y=y), tau


class TestRidge:
    def test_matches_normal_equations(self):
        rng = make_rng(1)
        x = rng.standard_normal((30, 4))
        y = rng.standard_normal(30)
        lam = 0.3
        model = Ridge(lam).fit(x, y)
        xa = np.hstack([x, np.ones((30, 1))])
        w_ref = np.linalg.solve(xa.T @ xa + lam * np.eye(5), xa.T @ y)
        assert np.abs(model.w - w_ref).max() < 1e-10

    def test_recovers_linear_function(self):
        rng = make_rng(2)
        x = rng.standard_normal((200, 3))
        y = x @ np.array([1.0, 2.0, -1.0]) + 4.0
        pred = Ridge(1e-8).fit(x, y).predict(x)
        assert np.abs(pred - y).max() < 1e-5

    def test_bad_lam(self):
        with pytest.raises(ValueError):
            Ridge(0.0)


class TestKernelRidge:
    def test_interpolates_with_tiny_lam(self):
        rng = make_rng(3)
        x = rng.standard_normal((40, 2))
        y = np.sin(x[:, 0]) + x[:, 1] ** 2
        model = KernelRidge(1e-10, gamma=1.0).fit(x, y)
        assert np.abs(model.predict(x) - y).max() < 1e-5

    def test_matches_direct_solve(self):
        rng = make_rng(4)
        x = rng.standard_normal((25, 2))
        y = rng.standard_normal(25)
        gamma, lam = 0.7, 0.1
        model = KernelRidge(lam, gamma).fit(x, y)
        d2 = ((x[:, None, :] - x[None, :, :]) ** 2).sum(axis=2)
        k = np.exp(-gamma * d2)
        alpha_ref = np.linalg.solve(k + lam * np.eye(25), y)
        assert np.abs(model.alpha - alpha_ref).max() < 1e-8


def test_median_gamma_hand_computed():
    x = np.array([[0.0], [1.0], [3.0]])
    # pairwise squared distances: 1, 9, 4 -> median 4
    assert abs(median_gamma(x) - 0.25) < 1e-12


class TestPropensity:
    def test_tracks_true_probabilities(self):
        rng = make_rng(5)
        n = 4000
        x = rng.standard_normal((n, 2))
        z = 1.5 * x[:, 0] - 0.5
        p_true = 1.0 / (1.0 + np.exp(-z))
        a = (rng.random(n) < p_true).astype(int)
        p_hat = propensity_fit(x, a).predict_proba(x)
        mask = (p_true > 0.05) & (p_true < 0.95)
        assert np.abs(p_hat[mask] - p_true[mask]).mean() < 0.03

    def test_predictions_clipped(self):
        rng = make_rng(6)
        x = rng.standard_normal((100, 1)) * 10
        a = (x[:, 0] > 0).astype(int)
        p = propensity_fit(x, a).predict_proba(x)
        assert p.min() >= 0.01 and p.max() <= 0.99

    def test_single_class_rejected(self):
        with pytest.raises(TooFewSamplesError):
            propensity_fit(np.zeros((10, 1)), np.ones(10))


class TestMetaLearners:
    SPEC = BaseSpec(kind="ridge", lam=1e-6, cv=False)

    def test_t_learner_exact_on_linear_noiseless(self):
        ds, tau = _linear_effect_data()
        model = t_learner(ds, self.SPEC)
        assert np.abs(model.predict(ds.x) - tau).max() < 1e-3

    def test_x_learner_exact_on_linear_noiseless(self):
        ds, tau = _linear_effect_data(seed=1)
        model = x_learner(ds, self.SPEC)
        assert np.abs(model.predict(ds.x) - tau).max() < 1e-3

    def test_dr_learner_close_on_linear(self):
        ds, tau = _linear_effect_data(n=1200, seed=2, noise=0.1)
        model = dr_learner(ds, self.SPEC, split_seed=0)
        err = np.sqrt(np.mean((model.predict(ds.x) - tau) ** 2))
        assert err < 0.25

    def test_r_learner_recovers_constant_effect(self):
        rng = make_rng(7)
        n = 800
        x = rng.standard_normal((n, 2))
        e = 1.0 / (1.0 + np.exp(-x[:, 0]))
        a = (rng.random(n) < e).astype(int)
        c = 2.0
        m = np.sin(x[:, 1])
        y = m + (a - e) * c + 0.05 * rng.standard_normal(n)
        ds = Dataset(x=x, a=a, y=y)
        model = r_learner(ds, BaseSpec(kind="kernel", lam=1e-2, cv=False))
        assert abs(model.predict(x).mean() - c) < 0.3

    def test_dr_pseudo_outcome_hand_formula(self):
        ds, _ = _linear_effect_data(n=10, seed=3)
        mu0 = np.full(10, 0.5)
        mu1 = np.full(10, 1.5)
        pi = np.full(10, 0.4)
        phi = dr_pseudo_outcome(ds, mu0, mu1, pi)
        a = ds.a.astype(float)
        expected = (a / 0.4 * (ds.y - 1.5) + 1.5
                    - (1 - a) / 0.6 * (ds.y - 0.5) - 0.5)
        assert np.abs(phi - expected).max() < 1e-12

    def test_dr_pseudo_outcome_unbiased_with_oracle_nuisances(self):
        from cate_ebm import gen_dgp, sample
        dgp = gen_dgp(2, d=6)
        ds = sample(dgp, 50_000, 3)
        phi = dr_pseudo_outcome(ds, ds.mu0, ds.mu1, ds.pi)
        # with true nuisances, phi is centered at the true effect
        se = (phi - ds.tau).std() / np.sqrt(ds.n)
        assert abs((phi - ds.tau).mean()) < 4 * se + 0.01

    def test_dr_small_n_rejected(self):
        ds, _ = _linear_effect_data(n=20)
        with pytest.raises(TooFewSamplesError):
            dr_learner(ds, self.SPEC)

    def test_fit_learner_dispatch_and_unknown(self):
        ds, _ = _linear_effect_data(seed=4)
        assert fit_learner("t", ds, self.SPEC).kind == "t"
        with pytest.raises(ValueError):
            fit_learner("s", ds, self.SPEC)

    def test_predict_dimension_guard(self):
        ds, _ = _linear_effect_data(seed=5)
        model = t_learner(ds, self.SPEC)
        with pytest.raises(DimensionError):
            model.predict(np.zeros((4, ds.d + 1)))

    def test_single_arm_rejected(self):
        ds, _ = _linear_effect_data(seed=6)
        ds.a[:] = 1
        with pytest.raises(TooFewSamplesError):
            t_learner(ds, self.SPEC)


class TestCvSelection:
    def test_cv_picks_reasonable_lam_under_noise(self):
        from cate_ebm.cate import fit_base
        rng = make_rng(8)
        x = rng.standard_normal((150, 2))
        y = x @ np.array([1.0, -1.0]) + rng.standard_normal(150)
        spec = BaseSpec(kind="ridge", cv=True, lam_grid=(1e-8, 1e-2, 1.0))
        model = fit_base(x, y, spec)
        assert model.lam > 1e-8  # the interpolating choice loses under noise

    def test_cv_deterministic(self):
        from cate_ebm.cate import fit_base
        rng = make_rng(9)
        x = rng.standard_normal((80, 2))
        y = np.sin(x[:, 0]) + 0.3 * rng.standard_normal(80)
        spec = BaseSpec(kind="kernel", cv=True)
        m1 = fit_base(x, y, spec)
        m2 = fit_base(x, y, spec)
        assert m1.lam == m2.lam and m1.gamma == m2.gamma
        assert np.array_equal(m1.alpha, m2.alpha)


class TestReductionBaselines:
    def test_pca_recovers_dominant_axis(self):
        rng = make_rng(10)
        t = rng.standard_normal(500)
        direction = np.array([3.0, 4.0]) / 5.0
        x = t[:, None] * direction * 10.0 + 0.01 * rng.standard_normal((500, 2))
        proj = pca_fit(x, 1)
        axis = proj.components[:, 0]
        assert abs(abs(axis @ direction) - 1.0) < 1e-3

    def test_pca_transform_centered(self):
        x = make_rng(11).standard_normal((100, 4))
        z = pca_fit(x, 2).transform(x)
        assert z.shape == (100, 2)
        assert np.abs(z.mean(axis=0)).max() < 1e-10

    def test_pca_k_too_large(self):
        with pytest.raises(DimensionError):
            pca_fit(np.zeros((10, 2)), 3)

    def test_ae_reduces_reconstruction_error(self):
        rng = make_rng(12)
        t = rng.standard_normal((300, 2))
        mix = rng.standard_normal((2, 6))
        x = t @ mix + 0.1 * rng.standard_normal((300, 6))
        enc = ae_fit(x, 2, hidden=(16,), epochs=60, seed=12)
        z = enc.transform(x, use_train_stats=False)
        # encoder output must carry signal: correlate with the latent factors
        corr = np.corrcoef(np.hstack([z, t]).T)[:2, 2:]
        assert np.abs(corr).max() > 0.5

    def test_ae_standardized_output(self):
        x = make_rng(13).standard_normal((200, 5))
        enc = ae_fit(x, 2, hidden=(8,), epochs=20, seed=13)
        z = enc.transform(x)
        assert np.abs(z.mean(axis=0)).max() < 1e-8
        assert np.abs(z.std(axis=0) - 1.0).max() < 1e-8

    def test_ae_deterministic(self):
        x = make_rng(14).standard_normal((100, 4))
        z1 = ae_fit(x, 2, epochs=5, seed=7).transform(x)
        z2 = ae_fit(x, 2, epochs=5, seed=7).transform(x)
        assert np.array_equal(z1, z2)

import numpy as np
import pytest

from bandverify.gmm import (GaussianMixture, asymmetric_cost_estimate,
                            conditional_mmse, conditional_scalar_mixture,
                            em_fit)


def random_spd(dim, rng, scale=1.0):
    A = rng.standard_normal((dim, dim))
    return scale * (A @ A.T + dim * np.eye(dim))


def mixture_density(gmm, grid_y, x):
    """Numerical conditional density p(y | x) on a grid, for D_y = 1."""
    h, m, v = conditional_scalar_mixture(gmm, x, 0)
    dens = np.zeros_like(grid_y)
    for hk, mk, vk in zip(h, m, v):
        dens += hk * np.exp(-0.5 * (grid_y - mk) ** 2 / vk) / np.sqrt(
            2 * np.pi * vk)
    return dens


def sample_joint_mixture(rng, K, D, n):
    weights = rng.dirichlet(np.ones(K) * 5)
    means = rng.uniform(-3, 3, size=(K, D))
    covs = np.stack([random_spd(D, rng, 0.5) for _ in range(K)])
    comps = rng.choice(K, p=weights, size=n)
    X = np.empty((n, D))
    for k in range(K):
        idx = comps == k
        X[idx] = rng.multivariate_normal(means[k], covs[k], size=idx.sum())
    return GaussianMixture(weights, means, covs), X


class TestEmFit:
    def test_k1_closed_form(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((200, 3)) @ np.diag([1.0, 2.0, 0.5]) + [1, -2, 0]
        model = em_fit(X, 1, seed=0)
        assert np.allclose(model.means[0], X.mean(axis=0), atol=1e-10)
        assert np.allclose(model.covariances[0],
                           np.cov(X, rowvar=False, bias=True), atol=1e-10)

    def test_loglik_non_decreasing(self):
        rng = np.random.default_rng(1)
        _, X = sample_joint_mixture(rng, 3, 2, 500)
        model = em_fit(X, 3, seed=7)
        trace = np.array(model.train_log_likelihoods)
        assert np.all(np.diff(trace) >= -1e-9)

    def test_recovers_separated_means(self):
        rng = np.random.default_rng(2)
        n = 1000
        X = np.concatenate([
            rng.multivariate_normal([-5, 0], 0.2 * np.eye(2), n // 2),
            rng.multivariate_normal([5, 2], 0.2 * np.eye(2), n // 2)])
        model = em_fit(X, 2, seed=3)
        got = model.means[np.argsort(model.means[:, 0])]
        assert np.allclose(got, [[-5, 0], [5, 2]], atol=0.1)

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(3)
        _, X = sample_joint_mixture(rng, 2, 3, 300)
        m1 = em_fit(X, 2, seed=11)
        m2 = em_fit(X, 2, seed=11)
        assert np.array_equal(m1.weights, m2.weights)
        assert np.array_equal(m1.means, m2.means)
        assert np.array_equal(m1.covariances, m2.covariances)

    def test_rejects_too_few_points(self):
        with pytest.raises(ValueError):
            em_fit(np.zeros((15, 2)), 2, seed=0)

    def test_weights_normalized(self):
        rng = np.random.default_rng(4)
        _, X = sample_joint_mixture(rng, 3, 2, 400)
        model = em_fit(X, 3, seed=5)
        assert abs(model.weights.sum() - 1.0) < 1e-12


class TestLogLikelihood:
    def test_standard_normal_at_mean(self):
        D = 4
        gmm = GaussianMixture([1.0], np.zeros((1, D)), np.eye(D)[None])
        assert np.isclose(gmm.log_likelihood(np.zeros(D)),
                          -D / 2 * np.log(2 * np.pi))

    def test_matches_naive_summation(self):
        rng = np.random.default_rng(5)
        gmm, _ = sample_joint_mixture(rng, 3, 2, 50)
        for _ in range(20):
            x = rng.uniform(-4, 4, size=2)
            naive = 0.0
            for k in range(3):
                diff = x - gmm.means[k]
                cov = gmm.covariances[k]
                dens = np.exp(-0.5 * diff @ np.linalg.inv(cov) @ diff) / (
                    2 * np.pi * np.sqrt(np.linalg.det(cov)))
                naive += gmm.weights[k] * dens
            assert np.isclose(gmm.log_likelihood(x), np.log(naive), atol=1e-10)

    def test_monotone_decay_from_mean(self):
        gmm = GaussianMixture([1.0], np.zeros((1, 2)), np.eye(2)[None])
        vals = [gmm.log_likelihood(np.array([t, 0.0])) for t in [0, 1, 2, 3]]
        assert all(b < a for a, b in zip(vals, vals[1:]))


class TestConditionalMmse:
    def test_k1_at_mean_returns_y_mean(self):
        rng = np.random.default_rng(6)
        cov = random_spd(4, rng)
        mu = np.array([1.0, -1.0, 2.0, 0.5])
        gmm = GaussianMixture([1.0], mu[None], cov[None], split_dim=2)
        assert np.allclose(conditional_mmse(gmm, mu[:2]), mu[2:], atol=1e-12)

    def test_k1_matches_joint_gaussian_regression(self):
        rng = np.random.default_rng(7)
        cov = random_spd(5, rng)
        mu = rng.uniform(-2, 2, size=5)
        gmm = GaussianMixture([1.0], mu[None], cov[None], split_dim=3)
        for _ in range(10):
            x = rng.uniform(-3, 3, size=3)
            expected = mu[3:] + cov[3:, :3] @ np.linalg.solve(
                cov[:3, :3], x - mu[:3])
            assert np.allclose(conditional_mmse(gmm, x), expected, atol=1e-10)

    def test_k2_matches_quadrature(self):
        rng = np.random.default_rng(8)
        gmm, _ = sample_joint_mixture(rng, 2, 2, 50)
        gmm.split_dim = 1
        for x in [np.array([-1.0]), np.array([0.5]), np.array([2.0])]:
            grid = np.linspace(-40, 40, 400001)
            dens = mixture_density(gmm, grid, x)
            expected = np.trapezoid(grid * dens, grid) / np.trapezoid(dens, grid)
            assert np.isclose(conditional_mmse(gmm, x)[0], expected, atol=1e-4)

    def test_posteriors_sum_to_one(self):
        rng = np.random.default_rng(9)
        gmm, _ = sample_joint_mixture(rng, 4, 3, 50)
        gmm.split_dim = 2
        from bandverify.gmm import _posteriors, _regression_parts
        parts = _regression_parts(gmm)
        for _ in range(20):
            h = _posteriors(gmm, rng.uniform(-5, 5, size=2), parts)
            assert np.isclose(h.sum(), 1.0, atol=1e-12)

    def test_affine_equivariance_k1(self):
        rng = np.random.default_rng(10)
        cov = random_spd(4, rng)
        mu = rng.uniform(-1, 1, size=4)
        X = rng.multivariate_normal(mu, cov, size=2000)
        T = rng.standard_normal((2, 2)) + 2 * np.eye(2)
        b = rng.uniform(-1, 1, size=2)
        Xt = X.copy()
        Xt[:, :2] = X[:, :2] @ T.T + b
        m1 = em_fit(X, 1, seed=0, split_dim=2)
        m2 = em_fit(Xt, 1, seed=0, split_dim=2)
        x = rng.uniform(-1, 1, size=2)
        p1 = conditional_mmse(m1, x)
        p2 = conditional_mmse(m2, x @ T.T + b)
        assert np.allclose(p1, p2, atol=1e-8)


class TestAsymmetricCost:
    def _joint_1d(self, rng, K=2):
        gmm, _ = sample_joint_mixture(rng, K, 2, 50)
        gmm.split_dim = 1
        return gmm

    def test_lambda_one_recovers_mean(self):
        rng = np.random.default_rng(11)
        gmm = self._joint_1d(rng)
        for x in [np.array([-0.5]), np.array([1.0])]:
            mmse = conditional_mmse(gmm, x)[0]
            est = asymmetric_cost_estimate(gmm, x, 0, 1.0)
            assert np.isclose(est, mmse, atol=1e-5)

    def test_penalty_pushes_estimate_down(self):
        # single Gaussian conditional: numeric minimization oracle
        rng = np.random.default_rng(12)
        cov = random_spd(2, rng)
        mu = np.array([0.0, 1.0])
        gmm = GaussianMixture([1.0], mu[None], cov[None], split_dim=1)
        x = np.array([0.3])
        est = asymmetric_cost_estimate(gmm, x, 0, 4.0)
        mean = conditional_mmse(gmm, x)[0]
        assert est < mean
        # oracle: minimize the sampled expected cost on a grid
        h, m, v = conditional_scalar_mixture(gmm, x, 0)
        ys = rng.normal(m[0], np.sqrt(v[0]), size=400000)
        grid = np.linspace(mean - 3 * np.sqrt(v[0]), mean, 600)
        costs = [np.mean(np.where(g - ys > 0, 16.0, 1.0) * (g - ys) ** 2)
                 for g in grid]
        oracle = grid[int(np.argmin(costs))]
        assert abs(est - oracle) < 0.05

    def test_monotone_in_lambda(self):
        rng = np.random.default_rng(13)
        gmm = self._joint_1d(rng, K=3)
        for x in [np.array([-1.0]), np.array([0.7])]:
            ests = [asymmetric_cost_estimate(gmm, x, 0, lam)
                    for lam in [1.0, 2.0, 4.0, 8.0]]
            assert all(b <= a + 1e-5 for a, b in zip(ests, ests[1:]))

    def test_rejects_lambda_below_one(self):
        rng = np.random.default_rng(14)
        with pytest.raises(ValueError):
            asymmetric_cost_estimate(self._joint_1d(rng), np.array([0.0]),
                                     0, 0.5)


class TestSerialization:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(15)
        gmm, _ = sample_joint_mixture(rng, 2, 3, 50)
        gmm.split_dim = 2
        path = tmp_path / "m.json"
        gmm.save(path)
        back = GaussianMixture.load(path)
        assert np.array_equal(back.weights, gmm.weights)
        assert np.array_equal(back.means, gmm.means)
        assert np.array_equal(back.covariances, gmm.covariances)
        assert back.split_dim == 2

    def test_rejects_bad_version(self, tmp_path):
        with pytest.raises(ValueError):
            GaussianMixture.from_dict({"format_version": 99})

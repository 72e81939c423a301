"""Full-covariance Gaussian mixture modeling.

EM training is deterministic given the seed (k-means++ style init from an
explicit RNG), with a covariance eigenvalue floor and collapse recovery.
The joint model supports conditional MMSE regression of the trailing block
of dimensions given the leading block, and a scalar estimate under an
asymmetric quadratic cost that penalizes over-estimates.
"""

import json
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import logsumexp, ndtr

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
_WEIGHT_COLLAPSE = 1e-8


@dataclass
class GaussianMixture:
    weights: np.ndarray  # (K,)
    means: np.ndarray  # (K, D)
    covariances: np.ndarray  # (K, D, D)
    split_dim: Optional[int] = None  # first split_dim dims are the regressors
    train_log_likelihoods: list = field(default_factory=list)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        self.covariances = np.asarray(self.covariances, dtype=np.float64)
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must sum to 1")
        for k in range(self.n_components):
            np.linalg.cholesky(self.covariances[k])

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def component_log_densities(self, X: np.ndarray) -> np.ndarray:
        """(N, K) matrix of log N(x_n; mu_k, Sigma_k)."""
        X = np.atleast_2d(X)
        N, D = X.shape
        out = np.empty((N, self.n_components))
        for k in range(self.n_components):
            chol = np.linalg.cholesky(self.covariances[k])
            diff = X - self.means[k]
            sol = np.linalg.solve(chol, diff.T)
            quad = np.sum(sol * sol, axis=0)
            logdet = 2.0 * np.sum(np.log(np.diag(chol)))
            out[:, k] = -0.5 * (D * np.log(2.0 * np.pi) + logdet + quad)
        return out

    def log_likelihood(self, x: np.ndarray) -> float:
        """log sum_k w_k N(x; mu_k, Sigma_k) via log-sum-exp."""
        lp = self.component_log_densities(np.atleast_2d(x))
        return float(logsumexp(lp + np.log(self.weights), axis=1)[0])

    def log_likelihoods(self, X: np.ndarray) -> np.ndarray:
        lp = self.component_log_densities(X)
        return logsumexp(lp + np.log(self.weights), axis=1)

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "covariances": [c.tolist() for c in self.covariances],
            "split_dim": self.split_dim,
            "train_log_likelihoods": list(self.train_log_likelihoods),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GaussianMixture":
        if d.get("format_version") != FORMAT_VERSION:
            raise ValueError("unsupported mixture format version")
        return cls(np.array(d["weights"]), np.array(d["means"]),
                   np.array(d["covariances"]), d.get("split_dim"),
                   list(d.get("train_log_likelihoods", [])))

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, sort_keys=True)

    @classmethod
    def load(cls, path) -> "GaussianMixture":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def _floor_covariance(cov: np.ndarray, floor: float) -> np.ndarray:
    """Clamp eigenvalues at the floor; a no-op for healthy covariances."""
    cov = 0.5 * (cov + cov.T)
    try:
        chol = np.linalg.cholesky(cov)
        if np.min(np.diag(chol)) ** 2 > floor:
            return cov
    except np.linalg.LinAlgError:
        pass
    vals, vecs = np.linalg.eigh(cov)
    vals = np.maximum(vals, floor)
    return (vecs * vals) @ vecs.T


def _kmeanspp_centers(X: np.ndarray, K: int, rng: np.random.Generator):
    N = X.shape[0]
    centers = [X[rng.integers(N)]]
    for _ in range(1, K):
        d2 = np.min(
            [np.sum((X - c) ** 2, axis=1) for c in centers], axis=0)
        total = d2.sum()
        if total <= 0:
            centers.append(X[rng.integers(N)])
            continue
        centers.append(X[rng.choice(N, p=d2 / total)])
    return np.array(centers)


def em_fit(data: np.ndarray, K: int, seed: int, max_iter: int = 200,
           rel_tol: float = 1e-6, split_dim: Optional[int] = None
           ) -> GaussianMixture:
    """Fit a K-component full-covariance mixture by EM.

    Deterministic given the seed. The per-iteration average log-likelihood
    is recorded on the returned model and is non-decreasing.
    """
    X = np.atleast_2d(np.asarray(data, dtype=np.float64))
    N, D = X.shape
    if N < 10 * K:
        raise ValueError(f"need at least {10 * K} points for K={K}, got {N}")
    rng = np.random.default_rng(seed)
    floor = 1e-6 * float(np.mean(np.var(X, axis=0))) + 1e-12

    centers = _kmeanspp_centers(X, K, rng)
    d2 = np.stack([np.sum((X - c) ** 2, axis=1) for c in centers])
    assign = np.argmin(d2, axis=0)
    weights = np.empty(K)
    means = np.empty((K, D))
    covs = np.empty((K, D, D))
    global_cov = np.cov(X, rowvar=False, bias=True).reshape(D, D)
    for k in range(K):
        members = X[assign == k]
        weights[k] = max(len(members), 1) / N
        means[k] = members.mean(axis=0) if len(members) else centers[k]
        ck = (np.cov(members, rowvar=False, bias=True).reshape(D, D)
              if len(members) > D else global_cov)
        covs[k] = _floor_covariance(ck, floor)
    weights /= weights.sum()

    model = GaussianMixture(weights, means, covs, split_dim)
    trace = []
    prev = -np.inf
    for _ in range(max_iter):
        lp = model.component_log_densities(X) + np.log(model.weights)
        norm = logsumexp(lp, axis=1)
        ll = float(np.mean(norm))
        trace.append(ll)
        resp = np.exp(lp - norm[:, None])

        nk = resp.sum(axis=0)
        for k in np.nonzero(nk / N < _WEIGHT_COLLAPSE)[0]:
            log.warning("component %d collapsed; re-seeding", k)
            outlier = int(np.argmax(np.sum((X - X.mean(axis=0)) ** 2, axis=1)))
            resp[:, k] = 0.0
            resp[outlier, k] = 1.0
            nk = resp.sum(axis=0)
        weights = nk / nk.sum()
        means = (resp.T @ X) / nk[:, None]
        covs = np.empty((K, D, D))
        for k in range(K):
            diff = X - means[k]
            ck = (resp[:, k][:, None] * diff).T @ diff / nk[k]
            covs[k] = _floor_covariance(ck, floor)
        model = GaussianMixture(weights, means, covs, split_dim)

        if ll - prev < rel_tol * max(abs(prev), 1.0) and np.isfinite(prev):
            break
        prev = ll
    model.train_log_likelihoods = trace
    return model


def _regression_parts(gmm: GaussianMixture):
    """Per-component marginal-on-x and regression quantities."""
    dx = gmm.split_dim
    if dx is None:
        raise ValueError("mixture has no dimension split marker")
    parts = []
    for k in range(gmm.n_components):
        mu = gmm.means[k]
        cov = gmm.covariances[k]
        sxx = cov[:dx, :dx]
        syx = cov[dx:, :dx]
        syy = cov[dx:, dx:]
        try:
            chol = np.linalg.cholesky(sxx)
        except np.linalg.LinAlgError:
            log.warning("ill-conditioned regressor covariance; regularizing")
            sxx = sxx + 1e-9 * np.trace(sxx) * np.eye(dx)
            chol = np.linalg.cholesky(sxx)
        gain = np.linalg.solve(chol.T, np.linalg.solve(chol, syx.T)).T
        cond_cov = syy - gain @ syx.T
        parts.append((mu[:dx], mu[dx:], sxx, chol, gain, cond_cov))
    return parts


def _posteriors(gmm: GaussianMixture, x: np.ndarray, parts) -> np.ndarray:
    dx = gmm.split_dim
    logs = np.empty(gmm.n_components)
    for k, (mx, _, _, chol, _, _) in enumerate(parts):
        diff = x - mx
        sol = np.linalg.solve(chol, diff)
        logdet = 2.0 * np.sum(np.log(np.diag(chol)))
        logs[k] = (np.log(gmm.weights[k])
                   - 0.5 * (dx * np.log(2.0 * np.pi) + logdet + sol @ sol))
    return np.exp(logs - logsumexp(logs))


def conditional_mmse(gmm: GaussianMixture, x: np.ndarray) -> np.ndarray:
    """E[y | x]: posterior-weighted per-component linear regressions."""
    x = np.asarray(x, dtype=np.float64)
    parts = _regression_parts(gmm)
    h = _posteriors(gmm, x, parts)
    out = np.zeros(gmm.dim - gmm.split_dim)
    for k, (mx, my, _, _, gain, _) in enumerate(parts):
        out += h[k] * (my + gain @ (x - mx))
    return out


def conditional_scalar_mixture(gmm: GaussianMixture, x: np.ndarray,
                               target_dim: int):
    """The 1-D mixture of y[target_dim] given x: (posteriors, means, vars)."""
    x = np.asarray(x, dtype=np.float64)
    parts = _regression_parts(gmm)
    h = _posteriors(gmm, x, parts)
    m = np.empty(gmm.n_components)
    v = np.empty(gmm.n_components)
    for k, (mx, my, _, _, gain, cond_cov) in enumerate(parts):
        m[k] = (my + gain @ (x - mx))[target_dim]
        v[k] = max(cond_cov[target_dim, target_dim], 0.0)
    return h, m, v


def _asymmetric_objective(yhat, h, m, v, lam2):
    """E[C(yhat - y)] for the scalar mixture; C(e) = e^2 for e <= 0 and
    lam2 * e^2 for e > 0 (over-estimates)."""
    total = 0.0
    for hk, mk, vk in zip(h, m, v):
        if hk <= 0.0:
            continue
        if vk < 1e-18:
            e = yhat - mk
            total += hk * (lam2 if e > 0 else 1.0) * e * e
            continue
        s = np.sqrt(vk)
        z = (yhat - mk) / s
        phi = np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)
        cdf = ndtr(z)
        over = (1.0 + z * z) * cdf + z * phi
        under = (1.0 + z * z) * (1.0 - cdf) - z * phi
        total += hk * vk * (lam2 * over + under)
    return total


def _golden_section(f, lo, hi, tol):
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def asymmetric_cost_estimate(gmm: GaussianMixture, x: np.ndarray,
                             target_dim: int, lam: float) -> float:
    """Minimizer of the asymmetric expected cost for one y dimension.

    lam >= 1 scales the quadratic penalty on over-estimates; lam = 1
    recovers the conditional mean.
    """
    if lam < 1.0:
        raise ValueError("lambda must be >= 1")
    h, m, v = conditional_scalar_mixture(gmm, x, target_dim)
    mean = float(h @ m)
    var = float(h @ (v + m * m) - mean * mean)
    if var < 1e-18:
        return mean
    sd = np.sqrt(var)
    lam2 = lam * lam
    return float(_golden_section(
        lambda y: _asymmetric_objective(y, h, m, v, lam2),
        mean - 6.0 * sd, mean + 6.0 * sd, 1e-6))

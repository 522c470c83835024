"""Multivariate Gaussian mixtures with constrained covariance families.

Provides the model container, log-space E-step, weighted M-step, the EM
driver, BIC scoring and BIC-based model selection over a grid of component
counts and covariance families. All fitting here is deterministic: random
initialization never appears, starts come from agglomerative hierarchical
clustering or from caller-supplied responsibility matrices.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.linalg import solve_triangular
from scipy.optimize import linear_sum_assignment

from .exceptions import DegenerateCovariance, EmptyCluster, NoModelFits
from .families import CovarianceFamily, n_free_parameters

LOG_2PI = np.log(2.0 * np.pi)


# ---------------------------------------------------------------------------
# Input validation helpers
# ---------------------------------------------------------------------------

def as_data_matrix(values) -> np.ndarray:
    """Coerce input to an (n, p) float matrix of observations.

    1-D input is treated as a single column. Raises ValueError for empty
    or non-finite data.
    """
    X = np.asarray(values, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError(f"data must be 2-dimensional, got shape {X.shape}")
    n, p = X.shape
    if n < 1 or p < 1:
        raise ValueError(f"data must have at least one row and column, got {X.shape}")
    if not np.isfinite(X).all():
        raise ValueError("data contains non-finite values")
    return X


def validate_weights(w, n: int) -> np.ndarray:
    """Check an observation-weight vector: nonnegative, summing to n."""
    w = np.asarray(w, dtype=float)
    if w.shape != (n,):
        raise ValueError(f"weights must have shape ({n},), got {w.shape}")
    if (w < 0).any():
        raise ValueError("weights must be nonnegative")
    if abs(w.sum() - n) > 1e-9:
        raise ValueError(f"weights must sum to n={n}, got {w.sum()!r}")
    return w


def validate_responsibilities(z, n: int, G: int, atol: float = 1e-8) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape != (n, G):
        raise ValueError(f"responsibilities must have shape ({n}, {G}), got {z.shape}")
    if (z < -atol).any() or (z > 1 + atol).any():
        raise ValueError("responsibilities must lie in [0, 1]")
    rows = z.sum(axis=1)
    if np.abs(rows - 1.0).max() > atol:
        raise ValueError("responsibility rows must sum to 1")
    return z


# ---------------------------------------------------------------------------
# Model container
# ---------------------------------------------------------------------------

@dataclass
class MixtureModel:
    """A finite Gaussian mixture: weights tau_g, means mu_g, covariances Sigma_g.

    ``covariances`` always has shape (G, p, p); for the equal families every
    slice is the same matrix.
    """

    weights: np.ndarray      # (G,)
    means: np.ndarray        # (G, p)
    covariances: np.ndarray  # (G, p, p)
    family: CovarianceFamily

    @property
    def G(self) -> int:
        return len(self.weights)

    @property
    def p(self) -> int:
        return self.means.shape[1]

    def validate(self) -> "MixtureModel":
        """Check the structural invariants; raises ValueError/DegenerateCovariance."""
        if self.means.shape != (self.G, self.p):
            raise ValueError("means shape inconsistent with weights")
        if self.covariances.shape != (self.G, self.p, self.p):
            raise ValueError("covariances shape inconsistent with model")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("mixing proportions must sum to 1")
        if (self.weights <= 0).any() or (self.weights >= 1).any():
            if self.G > 1 or not np.allclose(self.weights, 1.0):
                raise ValueError("mixing proportions must lie in (0, 1)")
        for g in range(self.G):
            cov = self.covariances[g]
            if np.abs(cov - cov.T).max() > 1e-10:
                raise ValueError(f"covariance {g} is not symmetric")
            _cholesky(cov)
        if self.family.is_equal and self.G > 1:
            if not (self.covariances == self.covariances[0]).all():
                raise ValueError("equal-covariance family with unequal matrices")
        return self

    def permuted(self, perm: Sequence[int]) -> "MixtureModel":
        """Component relabelling: component g of the result is component perm[g]."""
        perm = np.asarray(perm, dtype=int)
        return MixtureModel(
            weights=self.weights[perm].copy(),
            means=self.means[perm].copy(),
            covariances=self.covariances[perm].copy(),
            family=self.family,
        )


def best_mean_permutation(means: np.ndarray, ref_means: np.ndarray) -> np.ndarray:
    """Permutation perm minimizing total distance of means[perm[g]] to ref_means[g].

    Solved as a linear assignment on the pairwise Euclidean distance matrix.
    """
    cost = np.linalg.norm(ref_means[:, None, :] - means[None, :, :], axis=2)
    _, cols = linear_sum_assignment(cost)
    return cols


# ---------------------------------------------------------------------------
# Densities and E-step
# ---------------------------------------------------------------------------

def _cholesky(cov: np.ndarray) -> np.ndarray:
    if not np.isfinite(cov).all():
        raise DegenerateCovariance("covariance contains non-finite entries")
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as err:
        raise DegenerateCovariance(f"covariance is not positive definite: {err}") from err


def _logpdf_rows(X: np.ndarray, mean: np.ndarray, chol: np.ndarray) -> np.ndarray:
    """Gaussian log-density of each row of X, given a lower Cholesky factor."""
    p = X.shape[1]
    sol = solve_triangular(chol, (X - mean).T, lower=True, check_finite=False)
    quad = np.einsum("ij,ij->j", sol, sol)
    log_det = 2.0 * np.log(np.diag(chol)).sum()
    return -0.5 * (p * LOG_2PI + log_det + quad)


def log_density(x, mean, cov) -> float:
    """Log multivariate-Gaussian density at a single point.

    Evaluated through a triangular factorization of ``cov``; raises
    DegenerateCovariance when the matrix is not positive definite.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    L = _cholesky(cov)
    return float(_logpdf_rows(x[None, :], mean, L)[0])


def _component_log_densities(X: np.ndarray, model: MixtureModel) -> np.ndarray:
    """(n, G) matrix of per-component Gaussian log-densities."""
    n = X.shape[0]
    out = np.empty((n, model.G))
    shared = _cholesky(model.covariances[0]) if model.family.is_equal else None
    for g in range(model.G):
        L = shared if shared is not None else _cholesky(model.covariances[g])
        out[:, g] = _logpdf_rows(X, model.means[g], L)
    return out


def _estep(X: np.ndarray, model: MixtureModel):
    """Responsibilities and per-observation log-likelihoods.

    Log-space with a per-row max shift, so widely separated components do
    not underflow.
    """
    lp = _component_log_densities(X, model) + np.log(model.weights)
    shift = lp.max(axis=1, keepdims=True)
    expd = np.exp(lp - shift)
    norm = expd.sum(axis=1, keepdims=True)
    z = expd / norm
    row_loglik = shift[:, 0] + np.log(norm[:, 0])
    return z, row_loglik


def e_step(data, model: MixtureModel):
    """One expectation step: posterior membership probabilities and log-likelihood.

    Returns (z, loglik) where z is (n, G) with rows summing to 1 and loglik
    is the observed-data log-likelihood of ``model`` on ``data``.
    """
    X = as_data_matrix(data)
    z, row_loglik = _estep(X, model)
    return z, float(row_loglik.sum())


# ---------------------------------------------------------------------------
# M-step
# ---------------------------------------------------------------------------

def weighted_m_step(data, resp, weights, family: CovarianceFamily,
                    min_mass: float = 1.0) -> MixtureModel:
    """Maximize the expected weighted complete-data log-likelihood.

    With unit weights this is exactly the classical M-step (same arithmetic
    path). ``min_mass`` is the effective-mass floor below which a component
    is declared empty rather than estimated.

    Raises EmptyCluster when a component's weighted responsibility mass falls
    below ``min_mass``, and DegenerateCovariance when an estimated covariance
    fails its Cholesky factorization.
    """
    X = as_data_matrix(data)
    n, p = X.shape
    z = np.asarray(resp, dtype=float)
    G = z.shape[1]
    z = validate_responsibilities(z, n, G)
    w = validate_weights(weights, n)
    if n < G:
        raise ValueError(f"need at least as many observations ({n}) as components ({G})")

    sw = w[:, None] * z                     # (n, G) combined weights
    mass = sw.sum(axis=0)                   # (G,)
    total = w.sum()
    if (mass < min_mass).any():
        g_bad = int(np.argmin(mass))
        raise EmptyCluster(
            f"component {g_bad} has effective mass {mass[g_bad]:.6g} < {min_mass:.6g}")

    tau = mass / total
    tau = tau / tau.sum()
    mu = (sw.T @ X) / mass[:, None]

    scatters = np.empty((G, p, p))
    for g in range(G):
        diff = X - mu[g]
        C = (sw[:, g, None] * diff).T @ diff
        scatters[g] = 0.5 * (C + C.T)       # exact symmetry

    if family is CovarianceFamily.FULL_VARYING:
        covs = scatters / mass[:, None, None]
    elif family is CovarianceFamily.FULL_EQUAL:
        pooled = scatters.sum(axis=0) / total
        covs = np.broadcast_to(pooled, (G, p, p)).copy()
    elif family is CovarianceFamily.SPHERICAL_VARYING:
        var = np.trace(scatters, axis1=1, axis2=2) / (p * mass)
        covs = var[:, None, None] * np.eye(p)
    else:  # SPHERICAL_EQUAL
        var = np.trace(scatters, axis1=1, axis2=2).sum() / (p * total)
        covs = np.broadcast_to(var * np.eye(p), (G, p, p)).copy()

    model = MixtureModel(weights=tau, means=mu, covariances=covs, family=family)
    for g in range(G):
        _cholesky(model.covariances[g])
        if family.is_equal:
            break
    return model


# ---------------------------------------------------------------------------
# EM driver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EmConfig:
    """EM control parameters.

    tol is a relative tolerance on successive values of the optimized
    log-likelihood; min_cluster_mass is the M-step's empty-component floor.
    """

    tol: float = 1e-8
    max_iter: int = 1000
    min_cluster_mass: float = 1.0


class FitStatus(Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    DEGENERATE = "degenerate"


@dataclass
class FitResult:
    """Outcome of one EM run.

    ``loglik`` is the optimized objective: the observed-data log-likelihood
    for unit weights, and the weighted observed-data log-likelihood
    sum_i w_i log sum_g tau_g f_g(x_i) otherwise. ``responsibilities`` is
    the E-step evaluated at the returned model. On DEGENERATE status the
    model and responsibilities are None and numeric fields are NaN.
    """

    model: Optional[MixtureModel]
    responsibilities: Optional[np.ndarray]
    loglik: float
    bic: float
    iterations: int
    status: FitStatus


def em_fit(data, init_resp, family: CovarianceFamily, G: int,
           weights=None, config: EmConfig = EmConfig()) -> FitResult:
    """Fit a G-component mixture by EM, starting with an M-step from ``init_resp``.

    Degeneracies (empty components, non-PD covariances, non-finite
    log-likelihood) end the run with status DEGENERATE rather than raising,
    so callers can count unfittable inputs.
    """
    X = as_data_matrix(data)
    n = X.shape[0]
    w = np.ones(n) if weights is None else validate_weights(weights, n)
    z = validate_responsibilities(init_resp, n, G)

    ll_prev = None
    iterations = 0
    try:
        for iterations in range(1, config.max_iter + 1):
            model = weighted_m_step(X, z, w, family, config.min_cluster_mass)
            z, row_loglik = _estep(X, model)
            ll = float(w @ row_loglik)
            if not np.isfinite(ll):
                raise DegenerateCovariance("log-likelihood is not finite")
            if ll_prev is not None and abs(ll - ll_prev) <= config.tol * (1.0 + abs(ll)):
                status = FitStatus.CONVERGED
                break
            ll_prev = ll
        else:
            status = FitStatus.MAX_ITER
    except (EmptyCluster, DegenerateCovariance):
        return FitResult(model=None, responsibilities=None, loglik=float("nan"),
                         bic=float("nan"), iterations=iterations,
                         status=FitStatus.DEGENERATE)

    result = FitResult(model=model, responsibilities=z, loglik=ll,
                       bic=float("nan"), iterations=iterations, status=status)
    result.bic = bic(result, n)
    return result


def bic(fit: FitResult, n) -> float:
    """BIC on the larger-is-better convention: 2*loglik - k*log(n)."""
    if fit.status is FitStatus.DEGENERATE or fit.model is None:
        raise ValueError("BIC is undefined for a degenerate fit")
    model = fit.model
    k = n_free_parameters(model.G, model.p, model.family)
    return 2.0 * fit.loglik - k * np.log(n)


# ---------------------------------------------------------------------------
# Initialization and model selection
# ---------------------------------------------------------------------------

def hierarchical_responsibilities(data, G: int,
                                  link: Optional[np.ndarray] = None) -> np.ndarray:
    """Hard 0/1 responsibilities from a Ward-linkage tree cut at G groups.

    ``link`` lets callers reuse one linkage across several values of G.
    """
    X = as_data_matrix(data)
    n = X.shape[0]
    if G == 1:
        return np.ones((n, 1))
    if link is None:
        link = linkage(X, method="ward")
    labels = fcluster(link, t=G, criterion="maxclust")
    resp = np.zeros((n, G))
    resp[np.arange(n), labels - 1] = 1.0
    return resp


def select_model(data, G_range: Iterable[int],
                 families: Iterable[CovarianceFamily],
                 config: EmConfig = EmConfig()) -> FitResult:
    """Fit every (G, family) candidate and return the highest-BIC fit.

    Every candidate starts from the same Ward hierarchical clustering of the
    data, cut at the candidate's G. Degenerate candidates are skipped;
    NoModelFits is raised when nothing fits.
    """
    X = as_data_matrix(data)
    n = X.shape[0]
    G_values = sorted(set(int(G) for G in G_range))
    if not G_values or G_values[0] < 1:
        raise ValueError("G_range must contain positive integers")
    family_order = [f for f in CovarianceFamily if f in set(families)]
    if not family_order:
        raise ValueError("families must be non-empty")

    link = linkage(X, method="ward") if n > 1 else None
    best: Optional[FitResult] = None
    for G in G_values:
        if G > n:
            continue
        init = hierarchical_responsibilities(X, G, link=link)
        for family in family_order:
            fit = em_fit(X, init, family, G, config=config)
            if fit.status is FitStatus.DEGENERATE:
                continue
            if best is None or fit.bic > best.bic:
                best = fit
    if best is None:
        raise NoModelFits("no (G, family) candidate produced a non-degenerate fit")
    return best

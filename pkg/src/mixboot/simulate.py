"""Coverage experiments on data simulated from known mixture models.

Eight built-in two-dimensional settings (M1-M8) pair small/equal cluster
sizes with overlapping/separated locations, at two or three components. For
each simulated dataset the true structure (component count, full varying
covariances) is refitted, a resampling method produces standard errors, and
the harness counts how often the estimate +/- 2 SE interval contains each
true parameter, alongside how many datasets could be fitted at all.
"""

from __future__ import annotations

import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, Iterable, Optional

import numpy as np

from .exceptions import AllReplicatesFailed
from .families import CovarianceFamily
from .mixture import (EmConfig, FitResult, FitStatus, MixtureModel,
                      best_mean_permutation, em_fit,
                      hierarchical_responsibilities, select_model)
from .params import ParamLayout, flatten
from .resampling import ResamplingMethod, SeedLike, _seed_tuple, run_resampling
from .variance import se_report


@dataclass(frozen=True)
class SimulationModelSpec:
    """Ground truth for one simulation setting."""

    name: str
    tau: np.ndarray     # (G,)
    means: np.ndarray   # (G, p)
    covs: np.ndarray    # (G, p, p)
    n: int = 150

    @property
    def G(self) -> int:
        return len(self.tau)

    @property
    def p(self) -> int:
        return self.means.shape[1]

    def true_model(self) -> MixtureModel:
        return MixtureModel(weights=self.tau.copy(), means=self.means.copy(),
                            covariances=self.covs.copy(),
                            family=CovarianceFamily.FULL_VARYING)


# True covariance matrices for the two simulation settings.
_SIGMA_A = np.array([[0.12, 0.09], [0.09, 0.12]])
_SIGMA_B2 = np.array([[0.47, 0.13], [0.13, 0.11]])
_SIGMA_B3 = np.array([[0.39, 0.15], [0.15, 0.10]])
_SIGMA_C3 = np.array([[0.53, 0.20], [0.20, 0.09]])

# Cluster locations: separated vs overlapping variants for G = 2 and G = 3.
_MEANS_G2_FAR = np.array([[0.0, 0.0], [3.0, 3.0]])
_MEANS_G2_NEAR = np.array([[0.0, 0.0], [1.5, 1.5]])
_MEANS_G3_FAR = np.array([[0.0, 0.0], [3.0, 3.0], [-3.0, 3.0]])
_MEANS_G3_NEAR = np.array([[0.0, 0.0], [1.5, 1.5], [-1.5, 1.5]])


def _spec(name, tau, means, sigmas) -> SimulationModelSpec:
    return SimulationModelSpec(name=name, tau=np.asarray(tau, dtype=float),
                               means=np.asarray(means, dtype=float),
                               covs=np.asarray(sigmas, dtype=float))


def builtin_specs() -> Dict[str, SimulationModelSpec]:
    """The eight built-in settings, keyed M1..M8."""
    g2 = [_SIGMA_A, _SIGMA_B2]
    g3 = [_SIGMA_A, _SIGMA_B3, _SIGMA_C3]
    return {
        "M1": _spec("M1", [0.05, 0.95], _MEANS_G2_FAR, g2),
        "M2": _spec("M2", [0.05, 0.95], _MEANS_G2_NEAR, g2),
        "M3": _spec("M3", [0.4, 0.6], _MEANS_G2_FAR, g2),
        "M4": _spec("M4", [0.4, 0.6], _MEANS_G2_NEAR, g2),
        "M5": _spec("M5", [0.05, 0.05, 0.9], _MEANS_G3_FAR, g3),
        "M6": _spec("M6", [0.05, 0.05, 0.9], _MEANS_G3_NEAR, g3),
        "M7": _spec("M7", [0.3, 0.3, 0.4], _MEANS_G3_FAR, g3),
        "M8": _spec("M8", [0.3, 0.3, 0.4], _MEANS_G3_NEAR, g3),
    }


def sample_dataset(spec: SimulationModelSpec, seed: SeedLike) -> np.ndarray:
    """Draw n observations: a component per multinomial(tau), then its Gaussian."""
    rng = np.random.Generator(np.random.Philox(
        np.random.SeedSequence(_seed_tuple(seed))))
    labels = rng.choice(spec.G, size=spec.n, p=spec.tau)
    X = np.empty((spec.n, spec.p))
    for g in range(spec.G):
        mask = labels == g
        count = int(mask.sum())
        if count:
            X[mask] = rng.multivariate_normal(spec.means[g], spec.covs[g],
                                              size=count, method="cholesky")
    return X


def align_fit(fit: FitResult, ref_means: np.ndarray) -> FitResult:
    """Relabel a fit's components to best match reference means."""
    perm = best_mean_permutation(fit.model.means, ref_means)
    if (perm == np.arange(fit.model.G)).all():
        return fit
    return FitResult(model=fit.model.permuted(perm),
                     responsibilities=fit.responsibilities[:, perm],
                     loglik=fit.loglik, bic=fit.bic,
                     iterations=fit.iterations, status=fit.status)


@dataclass
class CoverageResult:
    """Interval-coverage counts for one (setting, method) cell."""

    model_name: str
    method: ResamplingMethod
    datasets_total: int
    datasets_fitted: int
    covered: np.ndarray  # per-slot counts of intervals containing the truth
    layout: ParamLayout

    def coverage_of(self, slot_name: str) -> int:
        return int(self.covered[self.layout.index_of(slot_name)])


def _coverage_one(spec: SimulationModelSpec, method: ResamplingMethod, K: int,
                  seed: SeedLike, index: int, config: EmConfig,
                  truth: np.ndarray, select_structure: bool):
    """One simulated dataset: fit, resample, and score interval coverage.

    Returns (fitted, covered-bool-vector-or-None). A dataset counts as fitted
    only when the full-data fit converges and every replicate can be fitted;
    partially fittable datasets are how resampling failure shows up in the
    fitted counts.
    """
    base = _seed_tuple(seed) + (int(index),)
    X = sample_dataset(spec, base + (0,))

    if select_structure:
        try:
            fit = select_model(X, range(1, spec.G + 2),
                               [CovarianceFamily.FULL_VARYING], config=config)
        except Exception:
            return False, None
        if fit.model.G != spec.G:
            return False, None
    else:
        init = hierarchical_responsibilities(X, spec.G)
        fit = em_fit(X, init, CovarianceFamily.FULL_VARYING, spec.G, config=config)
    if fit.status is not FitStatus.CONVERGED:
        return False, None

    fit = align_fit(fit, spec.means)
    try:
        reps = run_resampling(X, fit, method, K=K, seed=base + (1,), config=config)
    except AllReplicatesFailed:
        return False, None
    if reps.K < 2 or reps.K_fitted != reps.K:
        return False, None

    report = se_report(flatten(fit.model), reps)
    covered = (report.ci_lower <= truth) & (truth <= report.ci_upper)
    return True, covered


def _coverage_worker(args):
    return _coverage_one(*args)


def run_coverage(spec: SimulationModelSpec, method: ResamplingMethod,
                 datasets: int, K: int = 200, seed: SeedLike = 0,
                 config: EmConfig = EmConfig(), workers: int = 1,
                 select_structure: bool = False) -> CoverageResult:
    """Simulate ``datasets`` datasets and tally per-parameter interval coverage.

    Deterministic for a given (spec, method, datasets, K, seed, config):
    dataset i derives all its randomness from (seed, i). Datasets are
    independent, so ``workers`` > 1 distributes them across processes without
    changing any count.
    """
    true_model = spec.true_model()
    truth = flatten(true_model)
    tasks = [(spec, method, K, seed, i, config, truth.values, select_structure)
             for i in range(datasets)]

    if workers > 1 and datasets > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_coverage_worker, tasks, chunksize=4))
    else:
        results = [_coverage_worker(t) for t in tasks]

    covered = np.zeros(truth.layout.size, dtype=int)
    fitted = 0
    for ok, cov in results:
        if ok:
            fitted += 1
            covered += cov
    return CoverageResult(model_name=spec.name, method=method,
                          datasets_total=datasets, datasets_fitted=fitted,
                          covered=covered, layout=truth.layout)


def coverage_table_csv(results: Iterable[CoverageResult],
                       slot_name: str = "tau[1]") -> str:
    """Pivot results into the models-by-methods table.

    One row per setting; column groups are coverage counts then fitted counts,
    each ordered jackknife, bootstrap, WLBS. Cells for methods that were not
    run stay empty.
    """
    order = [ResamplingMethod.JACKKNIFE, ResamplingMethod.BOOTSTRAP,
             ResamplingMethod.WLBS]
    by_model: Dict[str, Dict[ResamplingMethod, CoverageResult]] = {}
    for res in results:
        by_model.setdefault(res.model_name, {})[res.method] = res

    buf = io.StringIO()
    buf.write("model," + ",".join(f"coverage_{m.value}" for m in order)
              + "," + ",".join(f"fitted_{m.value}" for m in order) + "\n")
    for name, cells in by_model.items():
        cov = [str(cells[m].coverage_of(slot_name)) if m in cells else ""
               for m in order]
        fit = [str(cells[m].datasets_fitted) if m in cells else "" for m in order]
        buf.write(name + "," + ",".join(cov) + "," + ",".join(fit) + "\n")
    return buf.getvalue()

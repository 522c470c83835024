"""Jackknife, bootstrap and weighted likelihood bootstrap replicates.

Each replicate refits the fixed full-data model structure, warm-started from
the full-data responsibility matrix so component labels carry over. Replicate
randomness comes from a counter-based generator keyed by (seed, replicate
index), which makes results independent of execution order and worker count.
"""

from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import AllReplicatesFailed
from .mixture import (EmConfig, FitResult, FitStatus, as_data_matrix,
                      best_mean_permutation, em_fit)
from .params import ParamLayout, flatten, layout_for

SeedLike = Union[int, Tuple[int, ...]]


class ResamplingMethod(Enum):
    JACKKNIFE = "jk"
    BOOTSTRAP = "bs"
    WLBS = "wlbs"

    @classmethod
    def parse(cls, name: str) -> "ResamplingMethod":
        key = name.strip().lower()
        for m in cls:
            if key in (m.value, m.name.lower()):
                return m
        raise ValueError(f"unknown resampling method {name!r}; "
                         f"expected one of {[m.value for m in cls]}")


def _seed_tuple(seed: SeedLike) -> Tuple[int, ...]:
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    return tuple(int(s) for s in seed)


def replicate_rng(seed: SeedLike, index: int) -> np.random.Generator:
    """Independent stream for replicate ``index``: Philox keyed by (seed, index)."""
    entropy = _seed_tuple(seed) + (int(index),)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


@dataclass(frozen=True)
class ReplicateSpec:
    """One resampling draw.

    ``row_selection`` is the omitted row index for the jackknife, the n
    sampled row indices for the bootstrap, and None for the WLBS (every row
    stays present; the weights carry the resampling).
    """

    method: ResamplingMethod
    index: int
    row_selection: Optional[object]
    weights: np.ndarray


def jackknife_replicates(n: int) -> List[ReplicateSpec]:
    """The n leave-one-out replicates; deterministic, no randomness involved."""
    if n < 2:
        raise ValueError("jackknife requires n >= 2")
    ones = np.ones(n - 1)
    return [ReplicateSpec(ResamplingMethod.JACKKNIFE, j, j, ones) for j in range(n)]


def bootstrap_replicates(n: int, K: int, rng_seed: SeedLike) -> List[ReplicateSpec]:
    """K with-replacement resamples of n rows, keyed by (rng_seed, replicate)."""
    if n < 1 or K < 1:
        raise ValueError("bootstrap requires n >= 1 and K >= 1")
    ones = np.ones(n)
    specs = []
    for k in range(K):
        idx = replicate_rng(rng_seed, k).integers(0, n, size=n)
        specs.append(ReplicateSpec(ResamplingMethod.BOOTSTRAP, k, idx, ones))
    return specs


def wlbs_replicates(n: int, K: int, rng_seed: SeedLike) -> List[ReplicateSpec]:
    """K weight vectors: uniform-Dirichlet scaled to sum to n.

    Drawn as standard exponentials divided by their mean, so each weight has
    unit mean and the vector's total mass matches the sample size.
    """
    if n < 1 or K < 1:
        raise ValueError("WLBS requires n >= 1 and K >= 1")
    specs = []
    for k in range(K):
        e = replicate_rng(rng_seed, k).standard_exponential(n)
        w = e / e.mean()
        specs.append(ReplicateSpec(ResamplingMethod.WLBS, k, None, w))
    return specs


def replicate_init(full_resp: np.ndarray, spec: ReplicateSpec) -> np.ndarray:
    """Initialization matrix for a replicate, carried over from the full fit.

    Row j is dropped for the jackknife, rows are gathered (with repeats) for
    the bootstrap, and the matrix passes through unchanged for the WLBS.
    """
    if spec.method is ResamplingMethod.JACKKNIFE:
        return np.delete(full_resp, spec.row_selection, axis=0)
    if spec.method is ResamplingMethod.BOOTSTRAP:
        return full_resp[spec.row_selection]
    return full_resp


def _replicate_rows(X: np.ndarray, spec: ReplicateSpec) -> np.ndarray:
    if spec.method is ResamplingMethod.JACKKNIFE:
        return np.delete(X, spec.row_selection, axis=0)
    if spec.method is ResamplingMethod.BOOTSTRAP:
        return X[spec.row_selection]
    return X


def _fit_replicate(X: np.ndarray, full_fit: FitResult, spec: ReplicateSpec,
                   config: EmConfig) -> Tuple[Optional[np.ndarray], bool]:
    """Refit the full model's structure on one replicate.

    Returns (flattened parameters, relabeled flag), or (None, False) when the
    replicate cannot be fitted. Labels normally carry over through the warm
    start; as a safety net the component permutation closest to the full-data
    means is applied if the fit comes back relabeled.
    """
    model = full_fit.model
    init = replicate_init(full_fit.responsibilities, spec)
    fit = em_fit(_replicate_rows(X, spec), init, model.family, model.G,
                 weights=spec.weights, config=config)
    if fit.status is FitStatus.DEGENERATE or not np.isfinite(fit.loglik):
        return None, False
    perm = best_mean_permutation(fit.model.means, model.means)
    relabeled = bool((perm != np.arange(model.G)).any())
    fitted_model = fit.model.permuted(perm) if relabeled else fit.model
    return flatten(fitted_model).values, relabeled


def fit_replicate(data, full_fit: FitResult, spec: ReplicateSpec,
                  config: EmConfig = EmConfig()) -> Optional[np.ndarray]:
    """Parameters of one refitted replicate, or None when it cannot be fitted."""
    values, _ = _fit_replicate(as_data_matrix(data), full_fit, spec, config)
    return values


@dataclass
class ReplicateSet:
    """All replicate refits for one (data, model, method) combination.

    ``params`` is (K, d) with NaN rows where the replicate could not be
    fitted; ``fitted`` marks the rows that were.
    """

    method: ResamplingMethod
    n: int
    layout: ParamLayout
    params: np.ndarray
    fitted: np.ndarray
    n_relabeled: int = 0

    @property
    def K(self) -> int:
        return self.params.shape[0]

    @property
    def K_fitted(self) -> int:
        return int(self.fitted.sum())

    @property
    def fitted_params(self) -> np.ndarray:
        return self.params[self.fitted]

    def statuses(self) -> List[str]:
        return ["fitted" if f else "not_fitted" for f in self.fitted]

    def to_csv(self, float_format: str = "%.17g") -> str:
        """CSV with one row per replicate: index, status, then parameter slots."""
        buf = io.StringIO()
        buf.write("replicate,status," + ",".join(self.layout.names) + "\n")
        for k in range(self.K):
            cells = [str(k), "fitted" if self.fitted[k] else "not_fitted"]
            if self.fitted[k]:
                cells += [float_format % v for v in self.params[k]]
            else:
                cells += [""] * self.layout.size
            buf.write(",".join(cells) + "\n")
        return buf.getvalue()


def make_replicates(method: ResamplingMethod, n: int, K: int,
                    seed: SeedLike) -> List[ReplicateSpec]:
    """Replicate specs for a method; the jackknife always produces n of them."""
    if method is ResamplingMethod.JACKKNIFE:
        return jackknife_replicates(n)
    if method is ResamplingMethod.BOOTSTRAP:
        return bootstrap_replicates(n, K, seed)
    return wlbs_replicates(n, K, seed)


def run_resampling(data, full_fit: FitResult, method: ResamplingMethod,
                   K: int = 200, seed: SeedLike = 0,
                   config: EmConfig = EmConfig(), workers: int = 1) -> ReplicateSet:
    """Generate, refit and collect all replicates for one method.

    The result is a deterministic function of (data, full_fit, method, K,
    seed, config): each replicate's randomness is keyed by its index, and
    results are stored by index, so any ``workers`` value produces identical
    output. Raises AllReplicatesFailed when no replicate can be fitted.
    """
    X = as_data_matrix(data)
    if full_fit.model is None:
        raise ValueError("full_fit must be a non-degenerate fit")
    specs = make_replicates(method, X.shape[0], K, seed)
    layout = layout_for(full_fit.model)
    params = np.full((len(specs), layout.size), np.nan)
    fitted = np.zeros(len(specs), dtype=bool)

    def run_one(k: int):
        return _fit_replicate(X, full_fit, specs[k], config)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_one, range(len(specs))))
    else:
        results = [run_one(k) for k in range(len(specs))]

    n_relabeled = 0
    for k, (values, relabeled) in enumerate(results):
        if values is not None:
            params[k] = values
            fitted[k] = True
            n_relabeled += relabeled
    if not fitted.any():
        raise AllReplicatesFailed(f"none of the {len(specs)} {method.value} "
                                  f"replicates could be fitted")
    return ReplicateSet(method=method, n=X.shape[0], layout=layout,
                        params=params, fitted=fitted, n_relabeled=n_relabeled)

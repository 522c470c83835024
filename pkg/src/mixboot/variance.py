"""Standard errors, confidence intervals and density curves from replicates.

The jackknife variance uses the (n-1)/n·sum-of-squares form with n the
original sample size; the bootstrap and weighted likelihood bootstrap use the
plain sample variance over fitted replicates. Intervals are the full-data
estimate plus/minus two standard errors.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .exceptions import InsufficientReplicates
from .params import ParamLayout, ParamVector, nest_values
from .resampling import ReplicateSet, ResamplingMethod


def _fitted_params(replicates: ReplicateSet) -> np.ndarray:
    vals = replicates.fitted_params
    if vals.shape[0] < 2:
        raise InsufficientReplicates(
            f"need at least 2 fitted replicates, have {vals.shape[0]}")
    return vals


def jk_variance(replicates: ReplicateSet) -> np.ndarray:
    """Per-parameter jackknife variance: ((n-1)/n) * sum of squared deviations.

    The sum and mean run over fitted replicates only; the constant keeps the
    original sample size n.
    """
    if replicates.method is not ResamplingMethod.JACKKNIFE:
        raise ValueError("jk_variance requires jackknife replicates")
    vals = _fitted_params(replicates)
    n = replicates.n
    dev = vals - vals.mean(axis=0)
    return (n - 1) / n * (dev * dev).sum(axis=0)


def bs_variance(replicates: ReplicateSet) -> np.ndarray:
    """Per-parameter sample variance over fitted replicates (K_fitted - 1 denominator).

    Serves both the bootstrap and the WLBS.
    """
    if replicates.method is ResamplingMethod.JACKKNIFE:
        raise ValueError("bs_variance requires bootstrap or WLBS replicates")
    vals = _fitted_params(replicates)
    return vals.var(axis=0, ddof=1)


def replicate_variances(replicates: ReplicateSet) -> np.ndarray:
    """The method's own variance estimate for every parameter slot."""
    if replicates.method is ResamplingMethod.JACKKNIFE:
        return jk_variance(replicates)
    return bs_variance(replicates)


def param_covariance(replicates: ReplicateSet, slot_a: int, slot_b: int) -> float:
    """Covariance between two parameter slots, by the method's formula.

    The diagonal (slot_a == slot_b) equals the corresponding variance entry.
    """
    vals = _fitted_params(replicates)
    a = vals[:, slot_a] - vals[:, slot_a].mean()
    b = vals[:, slot_b] - vals[:, slot_b].mean()
    cross = (a * b).sum()
    if replicates.method is ResamplingMethod.JACKKNIFE:
        n = replicates.n
        return float((n - 1) / n * cross)
    return float(cross / (vals.shape[0] - 1))


def confidence_intervals(estimates: np.ndarray,
                         std_errors: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Approximate 95% limits: estimate plus/minus two standard errors."""
    estimates = np.asarray(estimates, dtype=float)
    std_errors = np.asarray(std_errors, dtype=float)
    return estimates - 2.0 * std_errors, estimates + 2.0 * std_errors


@dataclass
class SeReport:
    """Standard errors and intervals for one resampling method."""

    method: ResamplingMethod
    layout: ParamLayout
    estimates: np.ndarray       # full-data MLEs
    std_errors: np.ndarray
    replicate_mean: np.ndarray
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    K_fitted: int
    K_total: int

    def to_dict(self) -> dict:
        """JSON-friendly form, nested by parameter kind."""
        lay = self.layout
        return {
            "method": self.method.value,
            "G": lay.G,
            "p": lay.p,
            "family": lay.family.code,
            "estimates": nest_values(lay, self.estimates),
            "std_errors": nest_values(lay, self.std_errors),
            "replicate_mean": nest_values(lay, self.replicate_mean),
            "ci": {
                "lower": nest_values(lay, self.ci_lower),
                "upper": nest_values(lay, self.ci_upper),
            },
            "k_fitted": self.K_fitted,
            "k_total": self.K_total,
        }

    def csv_rows(self, float_format: str = "%.6g"):
        """Flat rows: (method, slot, estimate, std_error, ci bounds, replicate mean)."""
        for i, name in enumerate(self.layout.names):
            yield [self.method.value, name,
                   float_format % self.estimates[i],
                   float_format % self.std_errors[i],
                   float_format % self.ci_lower[i],
                   float_format % self.ci_upper[i],
                   float_format % self.replicate_mean[i]]


def se_report(estimates: ParamVector, replicates: ReplicateSet) -> SeReport:
    """Assemble the full report for one method from its replicate set."""
    if estimates.layout != replicates.layout:
        raise ValueError("estimate layout does not match replicate layout")
    se = np.sqrt(replicate_variances(replicates))
    lower, upper = confidence_intervals(estimates.values, se)
    return SeReport(
        method=replicates.method,
        layout=replicates.layout,
        estimates=np.asarray(estimates.values, dtype=float).copy(),
        std_errors=se,
        replicate_mean=replicates.fitted_params.mean(axis=0),
        ci_lower=lower,
        ci_upper=upper,
        K_fitted=replicates.K_fitted,
        K_total=replicates.K,
    )


def silverman_bandwidth(values: np.ndarray) -> float:
    """Rule-of-thumb bandwidth 0.9 * min(sd, IQR/1.34) * K^(-1/5).

    Falls back to a small positive width when the sample is degenerate
    (all values equal), so a point mass still yields a proper curve.
    """
    values = np.asarray(values, dtype=float)
    K = len(values)
    sd = values.std(ddof=1) if K > 1 else 0.0
    q75, q25 = np.percentile(values, [75, 25])
    candidates = [c for c in (sd, (q75 - q25) / 1.34) if c > 0]
    spread = min(candidates) if candidates else 1e-3 * max(1.0, abs(values[0]))
    return 0.9 * spread * K ** (-0.2)


def kde_curves(replicates: ReplicateSet, slot: int,
               grid: int = 512) -> Tuple[np.ndarray, np.ndarray]:
    """Gaussian-kernel density of a slot's fitted replicate values.

    Evaluated on a uniform grid spanning [min - 3h, max + 3h] with Silverman
    bandwidth h. The trapezoid integral of the curve is 1 up to the mass of
    the kernel tails beyond the grid.
    """
    vals = _fitted_params(replicates)[:, slot]
    h = silverman_bandwidth(vals)
    x = np.linspace(vals.min() - 3 * h, vals.max() + 3 * h, grid)
    z = (x[:, None] - vals[None, :]) / h
    density = np.exp(-0.5 * z * z).sum(axis=1) / (len(vals) * h * np.sqrt(2 * np.pi))
    return x, density


def kde_csv(curves: dict, float_format: str = "%.6g") -> str:
    """Serialize named KDE curves: columns (slot_name, x, density)."""
    buf = io.StringIO()
    buf.write("slot_name,x,density\n")
    for name, (x, density) in curves.items():
        for xi, di in zip(x, density):
            buf.write(f"{name},{float_format % xi},{float_format % di}\n")
    return buf.getvalue()

"""Constrained covariance families for Gaussian mixtures.

The four families are the spherical/full x equal/varying combinations,
labelled with their conventional three-letter codes (EII, VII, EEE, VVV).
"""

from __future__ import annotations

from enum import Enum


class CovarianceFamily(Enum):
    """Constraint pattern on the component covariance matrices."""

    SPHERICAL_EQUAL = "EII"    # sigma^2 * I, shared across components
    SPHERICAL_VARYING = "VII"  # sigma_g^2 * I per component
    FULL_EQUAL = "EEE"         # one full covariance shared across components
    FULL_VARYING = "VVV"       # full covariance per component

    @property
    def code(self) -> str:
        return self.value

    @property
    def is_equal(self) -> bool:
        """True when all components share one covariance matrix."""
        return self in (CovarianceFamily.SPHERICAL_EQUAL, CovarianceFamily.FULL_EQUAL)

    @property
    def is_spherical(self) -> bool:
        return self in (CovarianceFamily.SPHERICAL_EQUAL, CovarianceFamily.SPHERICAL_VARYING)

    def cov_param_count(self, G: int, p: int) -> int:
        """Number of free covariance parameters for G components in p dimensions."""
        tri = p * (p + 1) // 2
        if self is CovarianceFamily.FULL_VARYING:
            return G * tri
        if self is CovarianceFamily.FULL_EQUAL:
            return tri
        if self is CovarianceFamily.SPHERICAL_VARYING:
            return G
        return 1

    @classmethod
    def parse(cls, name: str) -> "CovarianceFamily":
        """Accept either the enum member name or the three-letter code."""
        key = name.strip().upper()
        for fam in cls:
            if key in (fam.value, fam.name):
                return fam
        raise ValueError(f"unknown covariance family {name!r}; expected one of "
                         f"{[f.value for f in cls]}")


def n_free_parameters(G: int, p: int, family: CovarianceFamily) -> int:
    """Total free parameters: mixing proportions + means + covariance terms."""
    return (G - 1) + G * p + family.cov_param_count(G, p)

"""Flattening mixture models to parameter vectors and back.

The layout orders slots as: mixing proportions (G), means (G blocks of p),
then the family's free covariance parameters (upper triangle row-major per
component for the varying-full family, one shared triangle for equal-full,
per-component variances for varying-spherical, a single variance for
equal-spherical). Slot names follow the ``tau[g]`` / ``mu[g][j]`` /
``sigma[g][i,j]`` convention with 1-based indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .exceptions import UnknownSlot
from .families import CovarianceFamily
from .mixture import MixtureModel

Slot = Tuple[str, object, tuple]  # (kind, component index or None, coordinates)


def _build_slots(G: int, p: int, family: CovarianceFamily) -> List[Slot]:
    slots: List[Slot] = [("tau", g, ()) for g in range(G)]
    slots += [("mu", g, (j,)) for g in range(G) for j in range(p)]
    tri = [(i, j) for i in range(p) for j in range(i, p)]
    if family is CovarianceFamily.FULL_VARYING:
        slots += [("sigma", g, ij) for g in range(G) for ij in tri]
    elif family is CovarianceFamily.FULL_EQUAL:
        slots += [("sigma", None, ij) for ij in tri]
    elif family is CovarianceFamily.SPHERICAL_VARYING:
        slots += [("sigma", g, ()) for g in range(G)]
    else:
        slots += [("sigma", None, ())]
    return slots


def _slot_name(slot: Slot) -> str:
    kind, g, coords = slot
    name = kind
    if g is not None:
        name += f"[{g + 1}]"
    if coords:
        name += "[" + ",".join(str(c + 1) for c in coords) + "]"
    return name


@dataclass(frozen=True)
class ParamLayout:
    """Bijection between free model parameters and vector slots."""

    G: int
    p: int
    family: CovarianceFamily
    slots: Tuple[Slot, ...] = field(init=False)
    names: Tuple[str, ...] = field(init=False)

    def __post_init__(self):
        slots = tuple(_build_slots(self.G, self.p, self.family))
        object.__setattr__(self, "slots", slots)
        object.__setattr__(self, "names", tuple(_slot_name(s) for s in slots))

    @property
    def size(self) -> int:
        return len(self.slots)

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name.strip())
        except ValueError:
            raise UnknownSlot(f"no parameter slot named {name!r}; "
                              f"known slots: {', '.join(self.names)}") from None

    def expand(self, spec: str) -> List[int]:
        """Slot indices for an exact slot name or a kind prefix (tau/mu/sigma)."""
        spec = spec.strip()
        if spec in ("tau", "mu", "sigma"):
            return [i for i, s in enumerate(self.slots) if s[0] == spec]
        return [self.index_of(spec)]


@dataclass
class ParamVector:
    """A flattened parameter vector together with its layout."""

    values: np.ndarray
    layout: ParamLayout


def layout_for(model: MixtureModel) -> ParamLayout:
    return ParamLayout(G=model.G, p=model.p, family=model.family)


def flatten(model: MixtureModel) -> ParamVector:
    """Deterministic flattening of a mixture model's free parameters."""
    layout = layout_for(model)
    values = np.empty(layout.size)
    for i, (kind, g, coords) in enumerate(layout.slots):
        if kind == "tau":
            values[i] = model.weights[g]
        elif kind == "mu":
            values[i] = model.means[g, coords[0]]
        else:
            comp = 0 if g is None else g
            if coords:
                values[i] = model.covariances[comp, coords[0], coords[1]]
            else:
                values[i] = model.covariances[comp, 0, 0]
    return ParamVector(values=values, layout=layout)


def unflatten(layout: ParamLayout, values: Sequence[float]) -> MixtureModel:
    """Rebuild a MixtureModel from a flattened vector (inverse of flatten)."""
    values = np.asarray(values, dtype=float)
    if values.shape != (layout.size,):
        raise ValueError(f"expected {layout.size} values, got shape {values.shape}")
    G, p, family = layout.G, layout.p, layout.family
    weights = np.empty(G)
    means = np.empty((G, p))
    covs = np.zeros((G, p, p))
    for i, (kind, g, coords) in enumerate(layout.slots):
        v = values[i]
        if kind == "tau":
            weights[g] = v
        elif kind == "mu":
            means[g, coords[0]] = v
        elif coords:
            comps = range(G) if g is None else (g,)
            for c in comps:
                covs[c, coords[0], coords[1]] = v
                covs[c, coords[1], coords[0]] = v
        else:
            comps = range(G) if g is None else (g,)
            for c in comps:
                covs[c] = v * np.eye(p)
    return MixtureModel(weights=weights, means=means, covariances=covs, family=family)


def nest_values(layout: ParamLayout, values: Sequence[float]) -> dict:
    """Group a flat vector by parameter kind, mirroring the model structure.

    tau -> list of G floats; mu -> list of G lists of p floats; sigma -> the
    family's natural shape (list of matrices, one matrix, list of variances,
    or one variance).
    """
    values = np.asarray(values, dtype=float)
    model = unflatten(layout, values)
    out = {"tau": model.weights.tolist(), "mu": model.means.tolist()}
    fam = layout.family
    if fam is CovarianceFamily.FULL_VARYING:
        out["sigma"] = model.covariances.tolist()
    elif fam is CovarianceFamily.FULL_EQUAL:
        out["sigma"] = model.covariances[0].tolist()
    elif fam is CovarianceFamily.SPHERICAL_VARYING:
        out["sigma"] = model.covariances[:, 0, 0].tolist()
    else:
        out["sigma"] = float(model.covariances[0, 0, 0])
    return out


def values_from_nested(layout: ParamLayout, nested: dict) -> np.ndarray:
    """Inverse of nest_values: rebuild the flat vector from grouped values."""
    G, p, fam = layout.G, layout.p, layout.family
    weights = np.asarray(nested["tau"], dtype=float)
    means = np.asarray(nested["mu"], dtype=float)
    sigma = nested["sigma"]
    covs = np.zeros((G, p, p))
    if fam is CovarianceFamily.FULL_VARYING:
        covs[:] = np.asarray(sigma, dtype=float)
    elif fam is CovarianceFamily.FULL_EQUAL:
        covs[:] = np.asarray(sigma, dtype=float)
    elif fam is CovarianceFamily.SPHERICAL_VARYING:
        for g, v in enumerate(np.asarray(sigma, dtype=float)):
            covs[g] = v * np.eye(p)
    else:
        covs[:] = float(sigma) * np.eye(p)
    model = MixtureModel(weights=weights, means=means, covariances=covs, family=fam)
    return flatten(model).values

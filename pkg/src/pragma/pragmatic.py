"""Pragmatic hypotheses: epsilon-neighbourhoods of precise hypotheses.

A singleton {theta0} is enlarged to {theta*: d(theta0, theta*) <= eps}; a
composite hypothesis is enlarged to the union of the enlargements of its
points, realized on grids as a minimum over hypothesis knots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize
from scipy.special import ndtri

from . import dissimilarity as dis
from .dissimilarity import DissimilaritySpec
from .errors import ConfigError, DomainError, NumericError, UnsupportedKindError
from .family import (
    BivariateGaussianIso,
    Gaussian1DUnknownVar,
    GaussianKnownVar,
    ParametricFamily,
    replicate,
)
from .grid import GridRegion, ParameterGrid, from_points

# d <= eps is tested as d <= eps * (1 + BOUNDARY_RTOL) so that points lying
# exactly on the boundary in exact arithmetic are kept despite rounding.
BOUNDARY_RTOL = 1e-10
CD_MAX = 0.5


def within(d, epsilon: float) -> np.ndarray:
    return np.asarray(d) <= epsilon * (1.0 + BOUNDARY_RTOL)


@dataclass(frozen=True)
class PragmaticSpec:
    family: ParametricFamily
    dissimilarity: DissimilaritySpec
    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if self.dissimilarity.kind == "CD" and not self.epsilon < CD_MAX:
            raise ConfigError(f"epsilon must be below {CD_MAX} for CD, got {self.epsilon}")

    def with_epsilon(self, epsilon: float) -> "PragmaticSpec":
        return PragmaticSpec(self.family, self.dissimilarity, epsilon)

    def with_family(self, family: ParametricFamily) -> "PragmaticSpec":
        return PragmaticSpec(family, self.dissimilarity, self.epsilon)

    def to_config(self) -> dict:
        return {
            "family": self.family.to_config(),
            "dissimilarity": self.dissimilarity.to_config(),
            "epsilon": self.epsilon,
        }


def dissimilarities_to(spec: PragmaticSpec, theta0, grid: ParameterGrid, threads: int | None = None) -> np.ndarray:
    """d(theta0, p) for every grid point p."""
    try:
        return dis.pairwise(spec.family, theta0, grid.points, spec.dissimilarity, threads)[0]
    except NumericError as exc:
        if exc.point is None:
            exc.point = np.asarray(theta0)
        raise


def min_dissimilarity(
    spec: PragmaticSpec, hypothesis_grid: ParameterGrid, eval_grid: ParameterGrid, threads: int | None = None
) -> np.ndarray:
    """For each eval point, the smallest dissimilarity from any hypothesis knot."""
    knots = hypothesis_grid.points
    out = np.full(len(eval_grid), np.inf)
    step = max(1, 2_000_000 // max(1, len(eval_grid)))
    for i in range(0, len(knots), step):
        block = dis.pairwise(spec.family, knots[i : i + step], eval_grid.points, spec.dissimilarity, threads)
        np.minimum(out, block.min(axis=0), out=out)
    return out


def singleton_region(spec: PragmaticSpec, theta0, grid: ParameterGrid, threads: int | None = None) -> GridRegion:
    """Grid points within epsilon of theta0."""
    return GridRegion(grid, within(dissimilarities_to(spec, theta0, grid, threads), spec.epsilon))


def composite_region(
    spec: PragmaticSpec, hypothesis_grid: ParameterGrid, eval_grid: ParameterGrid, threads: int | None = None
) -> GridRegion:
    """Grid points within epsilon of at least one hypothesis knot."""
    return GridRegion(eval_grid, within(min_dissimilarity(spec, hypothesis_grid, eval_grid, threads), spec.epsilon))


# ---------------------------------------------------------------------------
# closed-form constructions


def gaussian_interval(theta0: float, sigma0: float, kind: str, epsilon: float) -> tuple[float, float]:
    """Closed interval Pg({theta0}) for N(theta, sigma0^2) with g = sqrt for BP."""
    if not sigma0 > 0:
        raise DomainError(f"sigma0 must be positive, got {sigma0}")
    if epsilon < 0:
        raise DomainError(f"epsilon must be nonnegative, got {epsilon}")
    kind = kind.upper()
    if kind == "BP":
        half = epsilon * sigma0
    elif kind == "KL":
        half = math.sqrt(2.0 * epsilon) * sigma0
    elif kind == "CD":
        if epsilon >= CD_MAX:
            raise DomainError(f"CD is bounded by {CD_MAX}; epsilon={epsilon} gives the whole line")
        half = 2.0 * float(ndtri(0.5 + epsilon)) * sigma0
    else:
        raise ConfigError(f"unknown dissimilarity kind {kind!r}")
    return (theta0 - half, theta0 + half)


@dataclass(frozen=True)
class Circle:
    center: tuple[float, float]
    radius: float

    def contains(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        d2 = (p[..., 0] - self.center[0]) ** 2 + (p[..., 1] - self.center[1]) ** 2
        return d2 <= self.radius**2 * (1.0 + BOUNDARY_RTOL)


@dataclass(frozen=True)
class Strip:
    """{(mu1, mu2): |mu2 - mu1| <= half_width} around the diagonal."""

    half_width: float

    def contains(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return np.abs(p[..., 1] - p[..., 0]) <= self.half_width * (1.0 + BOUNDARY_RTOL)


def cd_strip_factor(epsilon: float, xtol: float = 1e-8) -> float:
    """h(eps): the CD strip is |mu2 - mu1| <= h(eps) * sigma.

    Found by bisection on w -> CD of the difference experiment Y - X, whose
    distribution is N(mu2 - mu1, 2 sigma^2); CD is increasing in w.
    """
    if not 0 < epsilon < CD_MAX:
        raise DomainError(f"CD strip needs 0 < epsilon < {CD_MAX}, got {epsilon}")
    diff = GaussianKnownVar(cov=((2.0,),))
    f = lambda w: dis.cd(diff, [0.0], [w]) - epsilon
    hi = 1.0
    while f(hi) < 0:
        hi *= 2.0
    return optimize.bisect(f, 0.0, hi, xtol=xtol, maxiter=200)


def bioequiv_region(sigma: float, epsilon: float, kind: str, composite: bool = True, mu0: float = 0.0):
    """Pragmatic region for (X, Y) ~ N((mu1, mu2), sigma^2 I).

    ``composite=False`` gives Pg({(mu0, mu0)}), a circle; ``composite=True``
    gives Pg({mu1 = mu2}), the union of those circles, a strip.
    """
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    kind = kind.upper()
    if kind == "BP":
        radius = math.sqrt(2.0) * epsilon * sigma
    elif kind == "KL":
        radius = math.sqrt(2.0 * epsilon) * sigma
    elif kind == "CD":
        if not 0 < epsilon < CD_MAX:
            raise DomainError(f"CD needs 0 < epsilon < {CD_MAX}")
        radius = 2.0 * float(ndtri(0.5 + epsilon)) * sigma
    else:
        raise ConfigError(f"unknown dissimilarity kind {kind!r}")
    if not composite:
        return Circle((mu0, mu0), radius)
    if kind == "CD":
        return Strip(cd_strip_factor(epsilon) * sigma)
    # a point at gap |mu2 - mu1| is at distance gap / sqrt(2) from the diagonal
    return Strip(math.sqrt(2.0) * radius)


# ---------------------------------------------------------------------------
# reparametrization


@dataclass
class InvarianceReport:
    n_points: int
    count_original: int
    count_mapped: int
    symmetric_difference: int
    mismatches: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "n_points": self.n_points,
            "count_original": self.count_original,
            "count_mapped": self.count_mapped,
            "symmetric_difference": self.symmetric_difference,
            "mismatches": self.mismatches,
        }


def affine_reparametrization(family: ParametricFamily, scale: float, shift: float = 0.0):
    """(family*, f, f_inv) for theta -> scale * theta + shift, data mapped alike.

    Returns the family in the new coordinates: the mean parameters and the
    outcome are transformed together, so P_theta = P*_{f(theta)}.
    """
    a, b = float(scale), float(shift)
    if a == 0:
        raise ConfigError("affine reparametrization needs a nonzero scale")
    if isinstance(family, GaussianKnownVar):
        star = GaussianKnownVar(cov=family.cov_matrix * a * a)
        return star, (lambda t: a * np.asarray(t) + b), (lambda t: (np.asarray(t) - b) / a)
    if isinstance(family, BivariateGaussianIso):
        star = BivariateGaussianIso(sigma=abs(a) * family.sigma)
        return star, (lambda t: a * np.asarray(t) + b), (lambda t: (np.asarray(t) - b) / a)
    if isinstance(family, Gaussian1DUnknownVar):
        star = Gaussian1DUnknownVar(M2=family.M2 * a * a, sigma2_min=family.sigma2_min * a * a)

        def f(t):
            t = np.asarray(t, dtype=float)
            return np.stack([a * t[..., 0] + b, a * a * t[..., 1]], axis=-1)

        def f_inv(t):
            t = np.asarray(t, dtype=float)
            return np.stack([(t[..., 0] - b) / a, t[..., 1] / (a * a)], axis=-1)

        return star, f, f_inv
    raise ConfigError(f"no affine reparametrization for {family.name}")


def _map_grid(grid: ParameterGrid, f: Callable, f_inv: Callable) -> ParameterGrid:
    mapped = np.asarray(f(grid.points), dtype=float)
    if mapped.shape != grid.points.shape:
        raise ConfigError("reparametrization must map points to points of the same dimension")
    if len(np.unique(mapped, axis=0)) != len(mapped):
        raise ConfigError("reparametrization is not injective on the grid (mapped points collide)")
    scale = max(1.0, float(np.abs(grid.points).max()))
    if not np.allclose(f_inv(mapped), grid.points, rtol=0, atol=1e-9 * scale):
        raise ConfigError("supplied inverse does not undo the reparametrization")
    return from_points(mapped, grid.axis_names)


def check_invariance(
    spec: PragmaticSpec,
    spec_star: PragmaticSpec,
    hypothesis_grid: ParameterGrid,
    f: Callable,
    f_inv: Callable,
    eval_grid: ParameterGrid,
    max_mismatches: int = 50,
) -> InvarianceReport:
    """Compare f[Pg(H)] with Pg(f[H]) computed in the new coordinates."""
    original = composite_region(spec, hypothesis_grid, eval_grid)
    h_star = _map_grid(hypothesis_grid, f, f_inv)
    e_star = _map_grid(eval_grid, f, f_inv)
    mapped = composite_region(spec_star, h_star, e_star)
    diff = np.nonzero(original.mask != mapped.mask)[0]
    mismatches = [
        {
            "index": int(i),
            "point": eval_grid.points[i].tolist(),
            "mapped_point": e_star.points[i].tolist(),
            "in_original": bool(original.mask[i]),
            "in_mapped": bool(mapped.mask[i]),
        }
        for i in diff[:max_mismatches]
    ]
    return InvarianceReport(len(eval_grid), original.count, mapped.count, int(diff.size), mismatches)


# ---------------------------------------------------------------------------
# replication


def shrinkage_sequence(
    spec: PragmaticSpec,
    hypothesis_grid: ParameterGrid,
    eval_grid: ParameterGrid,
    m_list: Sequence[int],
    threads: int | None = None,
) -> list[GridRegion]:
    """Pg(H, d_m, eps) for each replication count m; non-increasing for KL and CD."""
    if spec.dissimilarity.kind not in ("KL", "CD"):
        raise UnsupportedKindError(
            f"shrinkage under replication is only guaranteed for KL and CD, not {spec.dissimilarity.kind}"
        )
    m_list = [int(m) for m in m_list]
    if not m_list or m_list[0] < 1 or any(b <= a for a, b in zip(m_list, m_list[1:])):
        raise ConfigError(f"m_list must be strictly increasing positive integers, got {m_list}")
    return [
        composite_region(spec.with_family(replicate(spec.family, m)), hypothesis_grid, eval_grid, threads)
        for m in m_list
    ]


def pragmatic_from_config(cfg: dict) -> PragmaticSpec:
    from .dissimilarity import dissimilarity_from_config
    from .family import family_from_config

    for key in ("family", "dissimilarity", "epsilon"):
        if key not in cfg:
            raise ConfigError(f"missing field {key!r}")
    return PragmaticSpec(
        family_from_config(cfg["family"]),
        dissimilarity_from_config(cfg["dissimilarity"]),
        float(cfg["epsilon"]),
    )

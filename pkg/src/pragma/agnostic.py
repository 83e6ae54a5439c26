"""Three-valued tests based on a region estimator.

The region estimator is a highest-posterior-density set computed on a grid.
A hypothesis is accepted when the region lies inside it, rejected when the
region misses it entirely, and left undecided otherwise.
"""

from __future__ import annotations

import enum
import itertools
import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp, xlogy

from .dissimilarity import DissimilaritySpec, dissimilarity_from_config
from .errors import ConfigError, DegeneratePosteriorError
from .family import ParametricFamily, TrinomialCounts
from .grid import GridRegion, ParameterGrid, curve, simplex, subset, disjoint, union
from .pragmatic import PragmaticSpec, composite_region

log = logging.getLogger(__name__)


class AgnosticDecision(enum.Enum):
    ACCEPT = 0.0
    AGNOSTIC = 0.5
    REJECT = 1.0

    @property
    def label(self) -> str:
        return self.name.capitalize()

    @classmethod
    def from_label(cls, label: str) -> "AgnosticDecision":
        return cls[label.upper()]


@dataclass(frozen=True)
class PriorSpec:
    """``uniform`` (on the grid), ``dirichlet`` (simplex), or ``flat`` (improper, location)."""

    kind: str = "uniform"
    alpha: tuple = ()

    def __post_init__(self):
        if self.kind not in ("uniform", "dirichlet", "flat"):
            raise ConfigError(f"prior.kind: unknown prior {self.kind!r}")
        if self.kind == "dirichlet":
            alpha = tuple(float(a) for a in self.alpha)
            if len(alpha) != 3 or any(a <= 0 for a in alpha):
                raise ConfigError("prior.alpha: Dirichlet needs three positive concentrations")
            object.__setattr__(self, "alpha", alpha)

    def log_density(self, points: np.ndarray) -> np.ndarray:
        if self.kind != "dirichlet":
            return np.zeros(len(points))
        a = np.asarray(self.alpha)
        norm = gammaln(a.sum()) - gammaln(a).sum()
        return norm + sum(xlogy(a[k] - 1.0, points[:, k]) for k in range(3))

    def to_config(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "dirichlet":
            out["alpha"] = list(self.alpha)
        return out


def prior_from_config(cfg: dict) -> PriorSpec:
    return PriorSpec(kind=cfg.get("kind", "uniform"), alpha=tuple(cfg.get("alpha", ())))


@dataclass
class RegionEstimate:
    region: GridRegion
    level: float
    posterior_mass_captured: float


def posterior_grid(family: ParametricFamily, prior: PriorSpec, data, grid: ParameterGrid) -> np.ndarray:
    """Normalized posterior weights over grid points.

    ``data`` is a sequence of outcomes of ``family``; a single trinomial count
    vector may be passed bare.
    """
    obs = np.asarray(data, dtype=float)
    if obs.ndim == 1:
        obs = obs[None, :] if family.outcome_dim > 1 else obs[:, None]
    pts = grid.points
    loglik = np.zeros(len(pts))
    for z in obs:
        with np.errstate(divide="ignore"):
            loglik = loglik + family.log_density(pts, z)
    with np.errstate(divide="ignore", invalid="ignore"):
        logw = prior.log_density(pts) + loglik
    # zero likelihood wins over an infinite prior density at the same point
    logw[np.isneginf(loglik)] = -np.inf
    if np.any(np.isposinf(logw)):
        raise DegeneratePosteriorError("prior density is infinite on the grid; drop boundary points")
    if not np.any(np.isfinite(logw)):
        raise DegeneratePosteriorError("likelihood times prior is zero at every grid point")
    return np.exp(logw - logsumexp(logw))


def dirichlet_posterior_log_density(alpha, counts, points) -> np.ndarray:
    """Closed-form Dirichlet(alpha + counts) log density at simplex points."""
    a = np.asarray(alpha, dtype=float) + np.asarray(counts, dtype=float)
    norm = gammaln(a.sum()) - gammaln(a).sum()
    return norm + sum(xlogy(a[k] - 1.0, points[:, k]) for k in range(3))


def hpd_region(weights, grid: ParameterGrid, level: float) -> RegionEstimate:
    """Smallest set of highest-weight points whose mass reaches ``level``.

    Every point tied with the last weight needed is included, so the result is
    a function of the weights alone.
    """
    if not 0 < level < 1:
        raise ConfigError(f"HPD level must lie in (0, 1), got {level}")
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(grid),):
        raise ConfigError("weights must have one entry per grid point")
    order = np.argsort(-w, kind="stable")
    cum = np.cumsum(w[order])
    k = min(int(np.searchsorted(cum, level * cum[-1], side="left")), len(w) - 1)
    mask = w >= w[order[k]]
    return RegionEstimate(GridRegion(grid, mask), level, float(w[mask].sum()))


def agnostic_test(estimate: RegionEstimate | GridRegion, hypothesis: GridRegion) -> AgnosticDecision:
    region = estimate.region if isinstance(estimate, RegionEstimate) else estimate
    if subset(region, hypothesis):
        return AgnosticDecision.ACCEPT
    if disjoint(region, hypothesis):
        return AgnosticDecision.REJECT
    return AgnosticDecision.AGNOSTIC


@dataclass
class CoherenceReport:
    monotonicity: list = field(default_factory=list)
    union_consonance: list = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not self.monotonicity and not self.union_consonance

    def to_dict(self) -> dict:
        return {"monotonicity": self.monotonicity, "union_consonance": self.union_consonance, "clean": self.clean}


def coherence_audit(decisions: Sequence[tuple[GridRegion, AgnosticDecision]]) -> CoherenceReport:
    """Flag monotonicity and union-consonance violations.

    (a) B subset of A, B accepted, A not accepted.
    (b) A covered by rejected hypotheses, A not rejected. Any sub-cover is
        contained in the union of all rejected hypotheses, so that union is
        the only cover that needs checking.
    """
    report = CoherenceReport()
    n = len(decisions)
    for (i, (b, db)), (j, (a, da)) in itertools.product(enumerate(decisions), repeat=2):
        if i != j and db is AgnosticDecision.ACCEPT and da is not AgnosticDecision.ACCEPT and subset(b, a):
            report.monotonicity.append({"subset": i, "superset": j})
    rejected = [idx for idx, (_, d) in enumerate(decisions) if d is AgnosticDecision.REJECT]
    if rejected:
        cover = union(decisions[idx][0] for idx in rejected)
        for j in range(n):
            a, da = decisions[j]
            if da is not AgnosticDecision.REJECT and subset(a, cover):
                report.union_consonance.append({"covered": j, "cover": rejected})
    return report


# ---------------------------------------------------------------------------
# Hardy-Weinberg genotype study

# (AA, AD, DD) counts; rows 9 and 10 are simulated
HW_GROUPS: tuple[tuple[int, int, int], ...] = (
    (4, 18, 94),
    (6, 53, 74),
    (57, 118, 100),
    (58, 97, 48),
    (120, 361, 194),
    (206, 309, 142),
    (110, 148, 44),
    (34, 22, 12),
    (198, 282, 520),
    (641, 314, 45),
)
HW_PUBLISHED = ("Agnostic", "Accept", "Agnostic", "Agnostic", "Agnostic", "Accept", "Accept", "Agnostic", "Reject", "Accept")
HW_DEFAULT_EPSILON = {"KL": 0.01, "BP": 0.1, "CD": 0.1}


@dataclass
class HWStudyConfig:
    prior: PriorSpec = field(default_factory=lambda: PriorSpec("dirichlet", (1.0, 1.0, 1.0)))
    hpd_level: float = 0.95
    dissimilarities: tuple = field(
        default_factory=lambda: (
            DissimilaritySpec("KL"),
            DissimilaritySpec("BP", S="identity", g="sqrt"),
            DissimilaritySpec("CD"),
        )
    )
    epsilons: dict = field(default_factory=lambda: dict(HW_DEFAULT_EPSILON))
    replication_m: int = 20
    simplex_resolution: int = 200
    curve_knots: int = 500
    groups: tuple = HW_GROUPS
    published: tuple = HW_PUBLISHED

    def __post_init__(self):
        kinds = [d.kind for d in self.dissimilarities]
        if len(set(kinds)) != len(kinds):
            raise ConfigError("dissimilarities: one entry per kind")
        for k in kinds:
            if k not in self.epsilons:
                raise ConfigError(f"epsilons: no epsilon for {k}")
        if len(self.published) not in (0, len(self.groups)):
            raise ConfigError("published decisions must match the number of groups")

    @classmethod
    def from_config(cls, cfg: dict) -> "HWStudyConfig":
        cfg = dict(cfg)
        kw = {}
        if "prior" in cfg:
            kw["prior"] = prior_from_config(cfg.pop("prior"))
        if "dissimilarity" in cfg:
            d = dissimilarity_from_config(cfg.pop("dissimilarity"))
            kw["dissimilarities"] = (d,)
            kw["epsilons"] = {d.kind: float(cfg.pop("epsilon", HW_DEFAULT_EPSILON[d.kind]))}
        elif "dissimilarities" in cfg:
            kw["dissimilarities"] = tuple(dissimilarity_from_config(d) for d in cfg.pop("dissimilarities"))
        if "epsilons" in cfg:
            kw["epsilons"] = {**HW_DEFAULT_EPSILON, **{k.upper(): float(v) for k, v in cfg.pop("epsilons").items()}}
        if "epsilon" in cfg:
            raise ConfigError("epsilon: use together with a single 'dissimilarity', or give 'epsilons'")
        for key in ("hpd_level",):
            if key in cfg:
                kw[key] = float(cfg.pop(key))
        for key in ("replication_m", "simplex_resolution", "curve_knots"):
            if key in cfg:
                kw[key] = int(cfg.pop(key))
        if "groups" in cfg:
            kw["groups"] = tuple(tuple(int(c) for c in g) for g in cfg.pop("groups"))
            kw["published"] = tuple(cfg.pop("published", ()))
        elif "published" in cfg:
            kw["published"] = tuple(cfg.pop("published"))
        if cfg:
            raise ConfigError(f"study config: unexpected fields {sorted(cfg)}")
        return cls(**kw)

    def to_config(self) -> dict:
        return {
            "prior": self.prior.to_config(),
            "hpd_level": self.hpd_level,
            "dissimilarities": [d.to_config() for d in self.dissimilarities],
            "epsilons": {d.kind: self.epsilons[d.kind] for d in self.dissimilarities},
            "replication_m": self.replication_m,
            "simplex_resolution": self.simplex_resolution,
            "curve_knots": self.curve_knots,
            "groups": [list(g) for g in self.groups],
            "published": list(self.published),
        }


@dataclass
class HWStudyRow:
    group: int
    counts: tuple
    published: str | None
    decisions: dict
    hpd_points: int
    hpd_mass: float
    inside: dict
    outside: dict

    @property
    def consistent(self) -> bool:
        return len(set(self.decisions.values())) == 1

    def matches(self, kind: str) -> bool | None:
        if self.published is None:
            return None
        return self.decisions[kind].label == self.published


def hw_pragmatic_regions(cfg: HWStudyConfig, grid: ParameterGrid | None = None) -> dict[str, GridRegion]:
    grid = grid or simplex(cfg.simplex_resolution)
    knots = curve("hardy-weinberg", cfg.curve_knots)
    fam = TrinomialCounts(cfg.replication_m)
    regions = {}
    for d in cfg.dissimilarities:
        spec = PragmaticSpec(fam, d, cfg.epsilons[d.kind])
        regions[d.kind] = composite_region(spec, knots, grid)
        log.info("HW pragmatic region %s: %d of %d points", d.kind, regions[d.kind].count, len(grid))
    return regions


def run_hw_study(cfg: HWStudyConfig | None = None) -> list[HWStudyRow]:
    """Decide the pragmatic HW hypothesis for every genotype group."""
    cfg = cfg or HWStudyConfig()
    grid = simplex(cfg.simplex_resolution)
    regions = hw_pragmatic_regions(cfg, grid)
    rows = []
    for idx, counts in enumerate(cfg.groups, start=1):
        weights = posterior_grid(TrinomialCounts(sum(counts)), cfg.prior, counts, grid)
        est = hpd_region(weights, grid, cfg.hpd_level)
        decisions = {k: agnostic_test(est, reg) for k, reg in regions.items()}
        rows.append(
            HWStudyRow(
                group=idx,
                counts=tuple(counts),
                published=cfg.published[idx - 1] if cfg.published else None,
                decisions=decisions,
                hpd_points=est.region.count,
                hpd_mass=est.posterior_mass_captured,
                inside={k: (est.region & reg).count for k, reg in regions.items()},
                outside={k: (est.region & reg.complement()).count for k, reg in regions.items()},
            )
        )
    return rows


def hw_reproduction_summary(rows: Iterable[HWStudyRow]) -> dict:
    """Acceptance bookkeeping: per-kind match counts and cross-kind agreement."""
    rows = list(rows)
    kinds = list(rows[0].decisions) if rows else []
    matches = {k: sum(bool(r.matches(k)) for r in rows) for k in kinds}
    by_group = {r.group: r for r in rows}
    pinned = all(
        g in by_group and all(by_group[g].matches(k) for k in kinds) for g in (9, 10)
    )
    consistent = all(r.consistent for r in rows)
    ok = bool(rows) and min(matches.values()) >= 8 and pinned and consistent
    return {"matches": matches, "rows": len(rows), "pinned_rows_ok": pinned, "kinds_agree": consistent, "ok": ok}

"""Pragmatic hypotheses and agnostic tests on discretized parameter spaces."""

from .agnostic import (
    AgnosticDecision,
    PriorSpec,
    RegionEstimate,
    agnostic_test,
    coherence_audit,
    hpd_region,
    posterior_grid,
    run_hw_study,
)
from .dissimilarity import Backend, DissimilaritySpec, bp, cd, evaluate, kl, pairwise
from .errors import (
    ConfigError,
    DegeneratePosteriorError,
    DomainError,
    GridMismatchError,
    NumericError,
    PragmaError,
    UnsupportedKindError,
)
from .family import (
    BivariateGaussianIso,
    Gaussian1DUnknownVar,
    GaussianKnownVar,
    ReplicatedFamily,
    TrinomialCounts,
    family_from_config,
    replicate,
)
from .grid import GridRegion, ParameterGrid, curve, make_grid, rectangular, simplex
from .pragmatic import PragmaticSpec, bioequiv_region, composite_region, gaussian_interval, singleton_region

__all__ = [name for name in dir() if not name.startswith("_")]

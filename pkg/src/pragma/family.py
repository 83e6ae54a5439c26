"""Parametric families for the future experiment Z and their iid replication.

Every family exposes vectorized methods: parameters are arrays whose last axis
holds the parameter components (shape ``(..., param_dim)``) and outcomes are
arrays whose last axis holds the outcome components (``(..., outcome_dim)``).
Leading axes broadcast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

import numpy as np
from scipy.special import gammaln, xlogy

from .errors import ConfigError, DomainError

SIMPLEX_RENORM_TOL = 1e-9
SIMPLEX_NEG_TOL = 1e-12
LOG_2PI = math.log(2.0 * math.pi)


def _as_float_array(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


class ParametricFamily:
    """Base class for the predictive models P_theta."""

    name: str = ""
    param_dim: int = 0
    outcome_dim: int = 0
    discrete: bool = False

    def check_theta(self, theta) -> np.ndarray:
        """Return ``theta`` as a float array, raising DomainError outside the space."""
        theta = _as_float_array(theta)
        if theta.shape[-1:] != (self.param_dim,):
            raise DomainError(
                f"{self.name}: parameter must have last axis of length {self.param_dim}, "
                f"got shape {theta.shape}"
            )
        if not np.all(np.isfinite(theta)):
            raise DomainError(f"{self.name}: non-finite parameter {theta!r}")
        return theta

    def log_density(self, theta, z) -> np.ndarray:
        raise NotImplementedError

    def predictive_mean(self, theta) -> np.ndarray:
        raise NotImplementedError

    def predictive_cov(self, theta) -> np.ndarray:
        raise NotImplementedError

    def sample(self, theta, n: int, seed: int) -> np.ndarray:
        raise NotImplementedError

    def reduced(self) -> "ParametricFamily":
        """Family that is equivalent to ``self`` for every dissimilarity."""
        return self

    def to_config(self) -> dict:
        raise NotImplementedError

    def _rng(self, n: int, seed: int) -> np.random.Generator:
        if n < 1:
            raise ConfigError(f"sample size must be >= 1, got {n}")
        return np.random.default_rng(seed)


def _check_spd(mat: np.ndarray, what: str) -> None:
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ConfigError(f"{what} must be a square matrix, got shape {mat.shape}")
    if not np.allclose(mat, mat.T, rtol=0, atol=1e-12 * max(1.0, np.abs(mat).max())):
        raise ConfigError(f"{what} must be symmetric")
    try:
        np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        raise ConfigError(f"{what} must be positive definite") from None


@dataclass(frozen=True)
class GaussianKnownVar(ParametricFamily):
    """Z ~ N(theta, cov) with a known covariance; theta in R^d."""

    cov: tuple = ((1.0,),)

    name = "gaussian-known-var"
    discrete = False

    def __post_init__(self):
        mat = np.atleast_2d(_as_float_array(self.cov))
        _check_spd(mat, "covariance")
        object.__setattr__(self, "cov", tuple(tuple(float(v) for v in row) for row in mat))

    @classmethod
    def univariate(cls, sigma0: float) -> "GaussianKnownVar":
        if not sigma0 > 0:
            raise ConfigError(f"sigma0 must be positive, got {sigma0}")
        return cls(cov=((float(sigma0) ** 2,),))

    @property
    def param_dim(self) -> int:
        return len(self.cov)

    @property
    def outcome_dim(self) -> int:
        return len(self.cov)

    @cached_property
    def cov_matrix(self) -> np.ndarray:
        return np.array(self.cov, dtype=float)

    @cached_property
    def precision(self) -> np.ndarray:
        return np.linalg.inv(self.cov_matrix)

    @cached_property
    def _chol(self) -> np.ndarray:
        return np.linalg.cholesky(self.cov_matrix)

    def mahalanobis_sq(self, delta) -> np.ndarray:
        """delta^T cov^{-1} delta along the last axis."""
        delta = _as_float_array(delta)
        if self.param_dim == 1:
            return delta[..., 0] ** 2 / self.cov[0][0]
        w = np.linalg.solve(self._chol, delta[..., None])[..., 0]
        return np.sum(w * w, axis=-1)

    def log_density(self, theta, z) -> np.ndarray:
        theta = self.check_theta(theta)
        z = _as_float_array(z)
        d = self.param_dim
        _, logdet = np.linalg.slogdet(self.cov_matrix)
        return -0.5 * (d * LOG_2PI + logdet + self.mahalanobis_sq(z - theta))

    def predictive_mean(self, theta) -> np.ndarray:
        return self.check_theta(theta).copy()

    def predictive_cov(self, theta) -> np.ndarray:
        theta = self.check_theta(theta)
        return np.broadcast_to(self.cov_matrix, theta.shape[:-1] + self.cov_matrix.shape).copy()

    def sample(self, theta, n: int, seed: int) -> np.ndarray:
        rng = self._rng(n, seed)
        theta = self.check_theta(theta)
        return rng.multivariate_normal(theta, self.cov_matrix, size=n, method="cholesky")

    def to_config(self) -> dict:
        return {"kind": self.name, "params": {"cov": [list(r) for r in self.cov]}}


@dataclass(frozen=True)
class Gaussian1DUnknownVar(ParametricFamily):
    """Z ~ N(mu, sigma2) with theta = (mu, sigma2), sigma2 in (sigma2_min, M2].

    The lower bound truncates the open interval (0, M2] so that densities stay
    finite on grids; ``sigma2_min`` defaults to ``1e-6 * M2``.
    """

    M2: float = 1.0
    sigma2_min: float | None = None

    name = "gaussian-unknown-var"
    param_dim = 2
    outcome_dim = 1
    discrete = False

    def __post_init__(self):
        if not self.M2 > 0:
            raise ConfigError(f"M2 must be positive, got {self.M2}")
        lo = 1e-6 * self.M2 if self.sigma2_min is None else float(self.sigma2_min)
        if not 0 <= lo < self.M2:
            raise ConfigError(f"sigma2_min must lie in [0, M2), got {lo}")
        object.__setattr__(self, "M2", float(self.M2))
        object.__setattr__(self, "sigma2_min", lo)

    def check_theta(self, theta) -> np.ndarray:
        theta = super().check_theta(theta)
        s2 = theta[..., 1]
        if np.any(s2 <= self.sigma2_min) or np.any(s2 > self.M2 * (1 + 1e-12)):
            raise DomainError(
                f"{self.name}: variance must lie in ({self.sigma2_min}, {self.M2}]"
            )
        return theta

    def log_density(self, theta, z) -> np.ndarray:
        theta = self.check_theta(theta)
        z = _as_float_array(z)[..., 0]
        mu, s2 = theta[..., 0], theta[..., 1]
        return -0.5 * (LOG_2PI + np.log(s2) + (z - mu) ** 2 / s2)

    def predictive_mean(self, theta) -> np.ndarray:
        return self.check_theta(theta)[..., :1].copy()

    def predictive_cov(self, theta) -> np.ndarray:
        return self.check_theta(theta)[..., 1:2, None].copy()

    def sample(self, theta, n: int, seed: int) -> np.ndarray:
        rng = self._rng(n, seed)
        mu, s2 = self.check_theta(theta)
        return rng.normal(mu, math.sqrt(s2), size=(n, 1))

    def to_config(self) -> dict:
        return {"kind": self.name, "params": {"M2": self.M2, "sigma2_min": self.sigma2_min}}


@dataclass(frozen=True)
class TrinomialCounts(ParametricFamily):
    """Z ~ Multinomial(m, theta) with theta on the 2-simplex (full 3-vectors)."""

    m: int = 1

    name = "trinomial"
    param_dim = 3
    outcome_dim = 3
    discrete = True

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ConfigError(f"number of trials m must be an integer >= 1, got {self.m}")
        object.__setattr__(self, "m", int(self.m))

    def check_theta(self, theta) -> np.ndarray:
        """Validate simplex points, renormalizing sums within 1e-9 of one."""
        theta = super().check_theta(theta)
        if np.any(theta < -SIMPLEX_NEG_TOL):
            raise DomainError(f"{self.name}: negative probability in {theta!r}")
        total = theta.sum(axis=-1, keepdims=True)
        if np.any(np.abs(total - 1.0) > SIMPLEX_RENORM_TOL):
            raise DomainError(f"{self.name}: probabilities must sum to 1, got {total.ravel()}")
        theta = np.clip(theta, 0.0, None)
        if np.any(total != 1.0):
            theta = theta / theta.sum(axis=-1, keepdims=True)
        return theta

    def check_outcome(self, z) -> np.ndarray:
        z = np.asarray(z)
        if z.shape[-1:] != (3,):
            raise DomainError(f"{self.name}: outcome must be a count 3-vector")
        if np.any(z < 0) or np.any(z != np.round(z)) or np.any(z.sum(axis=-1) != self.m):
            raise DomainError(f"{self.name}: outcome must be nonnegative counts summing to {self.m}")
        return z.astype(float)

    @cached_property
    def outcomes(self) -> np.ndarray:
        """All C(m+2, 2) count vectors in lexicographic order."""
        m = self.m
        out = [(i, j, m - i - j) for i in range(m + 1) for j in range(m + 1 - i)]
        arr = np.array(out, dtype=float)
        arr.setflags(write=False)
        return arr

    @cached_property
    def log_coefficients(self) -> np.ndarray:
        z = self.outcomes
        arr = gammaln(self.m + 1.0) - (gammaln(z[:, 0] + 1) + gammaln(z[:, 1] + 1) + gammaln(z[:, 2] + 1))
        arr.setflags(write=False)
        return arr

    def log_density(self, theta, z) -> np.ndarray:
        theta = self.check_theta(theta)
        z = self.check_outcome(z)
        coef = gammaln(self.m + 1.0) - gammaln(z + 1).sum(axis=-1)
        return coef + xlogy(z[..., 0], theta[..., 0]) + xlogy(z[..., 1], theta[..., 1]) + xlogy(
            z[..., 2], theta[..., 2]
        )

    def pmf_table(self, thetas) -> np.ndarray:
        """Probabilities of every outcome: shape ``(n_thetas, n_outcomes)``."""
        thetas = self.check_theta(np.atleast_2d(thetas))
        z = self.outcomes
        logp = (
            self.log_coefficients[None, :]
            + xlogy(z[None, :, 0], thetas[:, None, 0])
            + xlogy(z[None, :, 1], thetas[:, None, 1])
            + xlogy(z[None, :, 2], thetas[:, None, 2])
        )
        return np.exp(logp)

    def predictive_mean(self, theta) -> np.ndarray:
        return self.m * self.check_theta(theta)

    def predictive_cov(self, theta) -> np.ndarray:
        theta = self.check_theta(theta)
        diag = theta[..., :, None] * np.eye(3)
        return self.m * (diag - theta[..., :, None] * theta[..., None, :])

    def sample(self, theta, n: int, seed: int) -> np.ndarray:
        rng = self._rng(n, seed)
        theta = self.check_theta(theta)
        return rng.multinomial(self.m, theta, size=n)

    def to_config(self) -> dict:
        return {"kind": self.name, "params": {"m": self.m}}


@dataclass(frozen=True)
class BivariateGaussianIso(ParametricFamily):
    """Z = (X, Y) ~ N((mu1, mu2), sigma^2 I_2) with sigma known."""

    sigma: float = 1.0

    name = "bivariate-gaussian-iso"
    param_dim = 2
    outcome_dim = 2
    discrete = False

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigError(f"sigma must be positive, got {self.sigma}")
        object.__setattr__(self, "sigma", float(self.sigma))

    def log_density(self, theta, z) -> np.ndarray:
        theta = self.check_theta(theta)
        z = _as_float_array(z)
        s2 = self.sigma**2
        dz = z - theta
        return -(LOG_2PI + math.log(s2)) - 0.5 * (dz[..., 0] ** 2 + dz[..., 1] ** 2) / s2

    def predictive_mean(self, theta) -> np.ndarray:
        return self.check_theta(theta).copy()

    def predictive_cov(self, theta) -> np.ndarray:
        theta = self.check_theta(theta)
        return np.broadcast_to(self.sigma**2 * np.eye(2), theta.shape[:-1] + (2, 2)).copy()

    def sample(self, theta, n: int, seed: int) -> np.ndarray:
        rng = self._rng(n, seed)
        theta = self.check_theta(theta)
        return theta + self.sigma * rng.standard_normal((n, 2))

    def to_config(self) -> dict:
        return {"kind": self.name, "params": {"sigma": self.sigma}}


@dataclass(frozen=True)
class ReplicatedFamily(ParametricFamily):
    """The experiment Z_m = (Z_1, ..., Z_m) of m iid copies of ``base``.

    Outcomes carry an extra replication axis: ``(..., m, base.outcome_dim)``.
    Predictive moments refer to the sufficient statistic used for prediction:
    the count total for trinomials, the sample average for Gaussians.
    """

    base: ParametricFamily = field(default_factory=GaussianKnownVar)
    m: int = 1

    discrete = False

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ConfigError(f"replication must be an integer >= 1, got {self.m}")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "discrete", self.base.discrete)

    @property
    def name(self) -> str:
        return f"{self.base.name}^{self.m}"

    @property
    def param_dim(self) -> int:
        return self.base.param_dim

    @property
    def outcome_dim(self) -> int:
        return self.base.outcome_dim

    def check_theta(self, theta) -> np.ndarray:
        return self.base.check_theta(theta)

    def log_density(self, theta, z) -> np.ndarray:
        theta = self.check_theta(theta)
        z = np.asarray(z)
        if z.shape[-2:-1] != (self.m,):
            raise DomainError(f"{self.name}: outcome needs a replication axis of length {self.m}")
        return np.sum(self.base.log_density(theta[..., None, :], z), axis=-1)

    def reduced(self) -> ParametricFamily:
        if isinstance(self.base, GaussianKnownVar):
            return GaussianKnownVar(cov=self.base.cov_matrix / self.m)
        if isinstance(self.base, BivariateGaussianIso):
            return BivariateGaussianIso(sigma=self.base.sigma / math.sqrt(self.m))
        if isinstance(self.base, TrinomialCounts):
            return TrinomialCounts(m=self.base.m * self.m)
        return self

    def predictive_mean(self, theta) -> np.ndarray:
        red = self.reduced()
        if red is not self:
            return red.predictive_mean(theta)
        return self.base.predictive_mean(theta)

    def predictive_cov(self, theta) -> np.ndarray:
        red = self.reduced()
        if red is not self:
            return red.predictive_cov(theta)
        return self.base.predictive_cov(theta) / self.m

    def sample(self, theta, n: int, seed: int) -> np.ndarray:
        flat = self.base.sample(theta, n * self.m, seed)
        return flat.reshape((n, self.m) + flat.shape[1:])

    def to_config(self) -> dict:
        cfg = self.base.to_config()
        cfg["replicate"] = self.m
        return cfg


def replicate(family: ParametricFamily, m: int) -> ParametricFamily:
    """Wrap ``family`` as the m-fold iid experiment; ``m == 1`` returns it unchanged."""
    if int(m) != m or m < 1:
        raise ConfigError(f"replication must be an integer >= 1, got {m}")
    if isinstance(family, ReplicatedFamily):
        return replicate(family.base, family.m * int(m))
    if m == 1:
        return family
    return ReplicatedFamily(base=family, m=int(m))


def base_and_replication(family: ParametricFamily) -> tuple[ParametricFamily, int]:
    if isinstance(family, ReplicatedFamily):
        return family.base, family.m
    return family, 1


_ALIASES = {
    "gaussian-known-var": "gaussian-known-var",
    "gauss": "gaussian-known-var",
    "gauss1d": "gaussian-known-var",
    "gaussian-unknown-var": "gaussian-unknown-var",
    "gauss-unknown-var": "gaussian-unknown-var",
    "trinomial": "trinomial",
    "bivariate-gaussian-iso": "bivariate-gaussian-iso",
    "bivariate": "bivariate-gaussian-iso",
}


def family_from_config(cfg: dict[str, Any]) -> ParametricFamily:
    """Build a family from ``{"kind": ..., "params": {...}, "replicate": m}``."""
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError("family: expected an object with a 'kind' field")
    kind = _ALIASES.get(str(cfg["kind"]).lower())
    params = dict(cfg.get("params", {}))
    try:
        if kind == "gaussian-known-var":
            if "cov" in params:
                fam = GaussianKnownVar(cov=params.pop("cov"))
            else:
                fam = GaussianKnownVar.univariate(float(params.pop("sigma0", 1.0)))
        elif kind == "gaussian-unknown-var":
            fam = Gaussian1DUnknownVar(M2=float(params.pop("M2")), sigma2_min=params.pop("sigma2_min", None))
        elif kind == "trinomial":
            fam = TrinomialCounts(m=params.pop("m"))
        elif kind == "bivariate-gaussian-iso":
            fam = BivariateGaussianIso(sigma=float(params.pop("sigma", 1.0)))
        else:
            raise ConfigError(f"family.kind: unknown family {cfg['kind']!r}")
    except KeyError as exc:
        raise ConfigError(f"family.params: missing field {exc.args[0]!r}") from None
    if params:
        raise ConfigError(f"family.params: unexpected fields {sorted(params)}")
    return replicate(fam, cfg.get("replicate", 1))

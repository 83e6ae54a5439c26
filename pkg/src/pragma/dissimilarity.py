"""Predictive dissimilarities d_Z(theta0, theta*): KL, best prediction (BP), and
classification distance (CD).

Argument order matters: ``theta0`` is the reference value. KL integrates
log(dP_{theta*}/dP_{theta0}) under P_{theta*}; BP measures the excess quadratic
loss, under theta0, of predicting with the theta*-optimal prediction.

Scalar pairs return floats; arrays of shape ``(..., param_dim)`` broadcast.
Monte Carlo results are :class:`Estimate` floats carrying a standard error.
"""

from __future__ import annotations

import hashlib
import math
import os
import threading
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy import integrate, optimize
from scipy.spatial.distance import cdist
from scipy.special import erf, ndtr, xlogy

from .errors import ConfigError, NumericError
from .family import (
    BivariateGaussianIso,
    Gaussian1DUnknownVar,
    GaussianKnownVar,
    ParametricFamily,
    ReplicatedFamily,
    TrinomialCounts,
)

KINDS = ("KL", "BP", "CD")
BACKENDS = ("auto", "closed_form", "quadrature", "exact", "monte_carlo")
QUAD_HALF_WIDTH_SD = 12.0
MIN_MC_SAMPLES = 10_000


class Estimate(float):
    """A Monte Carlo estimate: behaves as its value, with ``stderr`` attached."""

    stderr: float

    def __new__(cls, value: float, stderr: float):
        obj = super().__new__(cls, value)
        obj.stderr = float(stderr)
        return obj

    def __repr__(self) -> str:
        return f"Estimate({float(self)!r}, stderr={self.stderr!r})"


def _phi_half_sqrt(x):
    return 0.5 * erf(0.5 * np.sqrt(x) / math.sqrt(2.0))


# Monotone increasing maps only.
TRANSFORMS: dict[str, Callable] = {
    "sqrt": np.sqrt,
    "identity": lambda x: x,
    "phi-half-sqrt": _phi_half_sqrt,
}


@dataclass(frozen=True)
class Backend:
    type: str = "auto"
    abs_tol: float = 1e-8
    n: int = 200_000
    seed: int = 0

    def __post_init__(self):
        if self.type not in BACKENDS:
            raise ConfigError(f"backend.type: expected one of {BACKENDS}, got {self.type!r}")
        if self.type == "monte_carlo" and self.n < MIN_MC_SAMPLES:
            raise ConfigError(f"backend.n: Monte Carlo needs at least {MIN_MC_SAMPLES} draws")
        if not self.abs_tol > 0:
            raise ConfigError("backend.abs_tol must be positive")


@dataclass(frozen=True)
class DissimilaritySpec:
    """Which dissimilarity to evaluate and how.

    ``S`` and ``g`` only matter for BP. ``S`` is ``"identity"``,
    ``"inverse-cov"`` (inverse predictive covariance at theta0) or an explicit
    symmetric positive definite matrix; ``g`` names an increasing transform.
    """

    kind: str = "KL"
    S: Any = "identity"
    g: str = "sqrt"
    backend: Backend = field(default_factory=Backend)

    def __post_init__(self):
        kind = str(self.kind).upper()
        if kind not in KINDS:
            raise ConfigError(f"dissimilarity.kind: expected one of {KINDS}, got {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if self.g not in TRANSFORMS:
            raise ConfigError(f"dissimilarity.g: expected one of {sorted(TRANSFORMS)}, got {self.g!r}")
        if isinstance(self.S, str):
            if self.S not in ("identity", "inverse-cov"):
                raise ConfigError(f"dissimilarity.S: unknown matrix role {self.S!r}")
        else:
            mat = np.atleast_2d(np.asarray(self.S, dtype=float))
            if mat.shape[0] != mat.shape[1] or not np.allclose(mat, mat.T):
                raise ConfigError("dissimilarity.S: explicit matrix must be square and symmetric")
            if np.any(np.linalg.eigvalsh(mat) <= 0):
                raise ConfigError("dissimilarity.S: explicit matrix must be positive definite")
            object.__setattr__(self, "S", tuple(tuple(float(v) for v in r) for r in mat))

    def to_config(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "BP":
            out["S"] = self.S if isinstance(self.S, str) else [list(r) for r in self.S]
            out["g"] = self.g
        out["backend"] = {"type": self.backend.type}
        if self.backend.type == "quadrature":
            out["backend"]["abs_tol"] = self.backend.abs_tol
        if self.backend.type == "monte_carlo":
            out["backend"].update(n=self.backend.n, seed=self.backend.seed)
        return out


def dissimilarity_from_config(cfg: dict) -> DissimilaritySpec:
    """Build a spec from ``{"kind": "BP", "S": "identity", "g": "sqrt", "backend": {...}}``."""
    if isinstance(cfg, str):
        cfg = {"kind": cfg}
    cfg = dict(cfg)
    b = dict(cfg.pop("backend", {}) or {})
    btype = b.pop("type", "auto")
    btype = {"exact_enumeration": "exact", "closed-form": "closed_form", "mc": "monte_carlo"}.get(btype, btype)
    try:
        backend = Backend(type=btype, **b)
    except TypeError as exc:
        raise ConfigError(f"dissimilarity.backend: {exc}") from None
    unknown = set(cfg) - {"kind", "S", "g"}
    if unknown:
        raise ConfigError(f"dissimilarity: unexpected fields {sorted(unknown)}")
    return DissimilaritySpec(kind=cfg.get("kind", "KL"), S=cfg.get("S", "identity"), g=cfg.get("g", "sqrt"), backend=backend)


# ---------------------------------------------------------------------------
# helpers


def _lastsum(a: np.ndarray) -> np.ndarray:
    # fixed left-to-right order so results do not depend on batch layout
    out = a[..., 0]
    for k in range(1, a.shape[-1]):
        out = out + a[..., k]
    return out


def _scalarize(value, *inputs):
    if all(np.ndim(x) <= 1 for x in inputs) and np.ndim(value) == 0:
        return float(value)
    return value


def _prepare(family: ParametricFamily, theta0, theta_star):
    t0 = family.check_theta(theta0)
    ts = family.check_theta(theta_star)
    return t0, ts


def _resolve_backend(family: ParametricFamily, kind: str, backend: Backend) -> str:
    if backend.type != "auto":
        return backend.type
    red = family.reduced()
    if isinstance(red, TrinomialCounts):
        return "exact" if kind == "CD" else "closed_form"
    if kind == "KL" or kind == "BP":
        return "closed_form"
    if isinstance(red, ReplicatedFamily):
        return "monte_carlo"
    return "closed_form"


def _substream_seed(seed: int, theta0: np.ndarray, theta_star: np.ndarray) -> np.random.SeedSequence:
    digest = hashlib.sha256(
        np.ascontiguousarray(theta0, dtype=float).tobytes() + b"|" + np.ascontiguousarray(theta_star, dtype=float).tobytes()
    ).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    return np.random.SeedSequence([int(seed)] + words)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("PRAGMA_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# closed forms


def _kl_closed(family, t0, ts):
    if isinstance(family, ReplicatedFamily):
        base = family.base
        return family.m * _kl_closed(base, t0, ts)
    if isinstance(family, GaussianKnownVar):
        return 0.5 * family.mahalanobis_sq(t0 - ts)
    if isinstance(family, BivariateGaussianIso):
        d = t0 - ts
        return 0.5 * (d[..., 0] ** 2 + d[..., 1] ** 2) / family.sigma**2
    if isinstance(family, Gaussian1DUnknownVar):
        mu0, s0 = t0[..., 0], t0[..., 1]
        mus, ss = ts[..., 0], ts[..., 1]
        return 0.5 * np.log(s0 / ss) + (ss + (mus - mu0) ** 2) / (2.0 * s0) - 0.5
    if isinstance(family, TrinomialCounts):
        terms = xlogy(ts, ts) - xlogy(ts, t0)
        return family.m * _lastsum(terms)
    raise ConfigError(f"KL: no closed form for family {family.name}")


def _cd_closed(family, t0, ts):
    fam = family.reduced()
    if isinstance(fam, GaussianKnownVar):
        return 0.5 * erf(0.5 * np.sqrt(fam.mahalanobis_sq(t0 - ts)) / math.sqrt(2.0))
    if isinstance(fam, BivariateGaussianIso):
        d = t0 - ts
        dist = np.sqrt(d[..., 0] ** 2 + d[..., 1] ** 2) / fam.sigma
        return 0.5 * erf(0.5 * dist / math.sqrt(2.0))
    if isinstance(fam, Gaussian1DUnknownVar):
        return _cd_normal_unequal(t0[..., 0], t0[..., 1], ts[..., 0], ts[..., 1])
    raise ConfigError(f"CD: no closed form for family {family.name}")


def _cd_normal_unequal(mu0, s0, mu1, s1):
    """Half the total variation between N(mu0, s0) and N(mu1, s1) (variances s0, s1)."""
    mu0, s0, mu1, s1 = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (mu0, s0, mu1, s1)))
    sd0, sd1 = np.sqrt(s0), np.sqrt(s1)
    out = np.empty(mu0.shape)
    equal = np.abs(s0 - s1) <= 1e-12 * np.maximum(s0, s1)
    out[equal] = 0.5 * erf(np.abs(mu0 - mu1)[equal] / (2.0 * sd0[equal]) / math.sqrt(2.0))
    ne = ~equal
    if np.any(ne):
        a0, a1, b0, b1, v0, v1 = mu0[ne], mu1[ne], sd0[ne], sd1[ne], s0[ne], s1[ne]
        # densities cross where A z^2 + B z + C = 0
        A = 1.0 / v1 - 1.0 / v0
        B = 2.0 * (a0 / v0 - a1 / v1)
        C = a1**2 / v1 - a0**2 / v0 + 2.0 * np.log(b1 / b0)
        disc = np.sqrt(np.maximum(B * B - 4.0 * A * C, 0.0))
        q = -0.5 * (B + np.where(B >= 0, disc, -disc))
        r1 = q / A
        with np.errstate(divide="ignore", invalid="ignore"):
            r2 = np.where(q != 0, C / q, -r1)
        lo, hi = np.minimum(r1, r2), np.maximum(r1, r2)
        mass0 = ndtr((hi - a0) / b0) - ndtr((lo - a0) / b0)
        mass1 = ndtr((hi - a1) / b1) - ndtr((lo - a1) / b1)
        out[ne] = 0.5 * np.abs(mass0 - mass1)
    return out


def _ratio(num, den):
    # zero predictive spread (simplex vertices): only theta* with the same prediction is close
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / den
    return np.where(den > 0, out, np.where(num > 0, np.inf, 0.0))


def _bp_closed(family, spec: DissimilaritySpec, t0, ts):
    mu0 = family.predictive_mean(t0)
    mus = family.predictive_mean(ts)
    cov0 = family.predictive_cov(t0)
    delta = mu0 - mus
    g = TRANSFORMS[spec.g]
    if spec.S == "identity":
        num = _lastsum(delta * delta)
        den = _lastsum(np.diagonal(cov0, axis1=-2, axis2=-1))
        return g(_ratio(num, den))
    if spec.S == "inverse-cov":
        d = delta.shape[-1]
        eig = np.linalg.eigvalsh(cov0)
        if np.any(eig[..., 0] <= 1e-12 * np.maximum(eig[..., -1], 1e-300)):
            bad = np.asarray(t0)
            if bad.ndim > 1:
                idx = np.unravel_index(np.argmin(eig[..., 0]), eig.shape[:-1])
                bad = np.broadcast_to(bad, eig.shape[:-1] + bad.shape[-1:])[idx]
            raise NumericError(f"BP: singular predictive covariance at theta0={bad}", point=bad)
        chol = np.linalg.cholesky(cov0)
        rhs = np.broadcast_to(delta, np.broadcast_shapes(delta.shape, cov0.shape[:-1]))[..., None]
        w = np.linalg.solve(np.broadcast_to(chol, rhs.shape[:-2] + chol.shape[-2:]), rhs)[..., 0]
        return g(_lastsum(w * w) / d)
    S = np.array(spec.S)
    if S.shape[0] != delta.shape[-1]:
        raise ConfigError(f"BP: explicit S has size {S.shape[0]}, predictions have size {delta.shape[-1]}")
    num = np.einsum("...i,ij,...j->...", delta, S, delta)
    den = np.einsum("ij,...ji->...", S, cov0)
    return g(_ratio(num, den))


# ---------------------------------------------------------------------------
# quadrature (one-dimensional outcomes)


def _moments_1d(family, theta):
    mean = float(np.asarray(family.predictive_mean(theta)).ravel()[0])
    sd = math.sqrt(float(np.asarray(family.predictive_cov(theta)).ravel()[0]))
    return mean, sd


def _quad_range(family, t0, ts):
    m0, s0 = _moments_1d(family, t0)
    m1, s1 = _moments_1d(family, ts)
    w = QUAD_HALF_WIDTH_SD
    return min(m0 - w * s0, m1 - w * s1), max(m0 + w * s0, m1 + w * s1)


def _check_quad_family(family):
    fam = family.reduced()
    if fam.discrete or fam.outcome_dim != 1 or isinstance(fam, ReplicatedFamily):
        raise ConfigError(f"quadrature backend needs a one-dimensional continuous outcome, not {family.name}")
    return fam


def _quad(f, lo, hi, points, abs_tol):
    # subdivide at breakpoints so quad never straddles a kink
    edges = [lo] + sorted(p for p in points if lo < p < hi) + [hi]
    total, err = 0.0, 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, e = integrate.quad(f, a, b, epsabs=abs_tol / len(edges), epsrel=1e-12, limit=500)
        total += val
        err += e
    if err > abs_tol:
        raise NumericError(f"quadrature did not converge: error estimate {err:.3g} > {abs_tol:.3g}", achieved_tol=err)
    return total


def _kl_quad(family, t0, ts, abs_tol):
    fam = _check_quad_family(family)
    lo, hi = _quad_range(fam, t0, ts)

    def f(z):
        zz = np.array([z])
        ls = fam.log_density(ts, zz)
        return math.exp(ls) * (ls - fam.log_density(t0, zz))

    ms, _ = _moments_1d(fam, ts)
    return _quad(f, lo, hi, [ms], abs_tol)


def _crossings(fam, t0, ts, lo, hi, n=2001):
    zs = np.linspace(lo, hi, n)[:, None]
    diff = fam.log_density(t0, zs) - fam.log_density(ts, zs)
    roots = []
    for i in np.nonzero(np.sign(diff[:-1]) * np.sign(diff[1:]) < 0)[0]:
        g = lambda z: float(fam.log_density(t0, np.array([z])) - fam.log_density(ts, np.array([z])))
        roots.append(optimize.brentq(g, zs[i, 0], zs[i + 1, 0], xtol=1e-14))
    return roots


def _cd_quad(family, t0, ts, abs_tol):
    fam = _check_quad_family(family)
    lo, hi = _quad_range(fam, t0, ts)

    def f(z):
        zz = np.array([z])
        return abs(math.exp(fam.log_density(t0, zz)) - math.exp(fam.log_density(ts, zz)))

    return 0.25 * _quad(f, lo, hi, _crossings(fam, t0, ts, lo, hi), 4 * abs_tol)


# ---------------------------------------------------------------------------
# exact enumeration (trinomial counts)

_PMF_CACHE: "OrderedDict[tuple, np.ndarray]" = OrderedDict()
_PMF_LOCK = threading.Lock()
_PMF_CACHE_SIZE = 6


def _pmf_table_cached(fam: TrinomialCounts, thetas: np.ndarray) -> np.ndarray:
    thetas = np.ascontiguousarray(thetas, dtype=float)
    key = (fam, thetas.shape, hashlib.sha1(thetas.tobytes()).hexdigest())
    with _PMF_LOCK:
        hit = _PMF_CACHE.get(key)
        if hit is not None:
            _PMF_CACHE.move_to_end(key)
            return hit
    table = fam.pmf_table(thetas)
    table.setflags(write=False)
    with _PMF_LOCK:
        _PMF_CACHE[key] = table
        while len(_PMF_CACHE) > _PMF_CACHE_SIZE:
            _PMF_CACHE.popitem(last=False)
    return table


def _enum_family(family) -> TrinomialCounts:
    fam = family.reduced()
    if not isinstance(fam, TrinomialCounts):
        raise ConfigError(f"exact enumeration needs a finite outcome space, not {family.name}")
    return fam


def _cd_exact(family, t0, ts):
    fam = _enum_family(family)
    shape = np.broadcast_shapes(t0.shape, ts.shape)
    a = np.broadcast_to(t0, shape).reshape(-1, 3)
    b = np.broadcast_to(ts, shape).reshape(-1, 3)
    p0, p1 = fam.pmf_table(a), fam.pmf_table(b)
    return (0.25 * np.abs(p0 - p1).sum(axis=-1)).reshape(shape[:-1])


def _kl_exact(family, t0, ts):
    fam = _enum_family(family)
    shape = np.broadcast_shapes(t0.shape, ts.shape)
    a = np.broadcast_to(t0, shape).reshape(-1, 3)
    b = np.broadcast_to(ts, shape).reshape(-1, 3)
    p0, p1 = fam.pmf_table(a), fam.pmf_table(b)
    with np.errstate(divide="ignore"):
        val = (xlogy(p1, p1) - xlogy(p1, p0)).sum(axis=-1)
    return val.reshape(shape[:-1])


# ---------------------------------------------------------------------------
# Monte Carlo


def _mc_pair(family, kind, t0, ts, backend: Backend) -> Estimate:
    ss = _substream_seed(backend.seed, t0, ts)
    s_a, s_b, s_c = (int(s.generate_state(1)[0]) for s in ss.spawn(3))
    n = backend.n
    if kind == "KL":
        z = family.sample(ts, n, s_a)
        with np.errstate(invalid="ignore"):
            vals = family.log_density(np.broadcast_to(ts, (n, len(ts))), z) - family.log_density(
                np.broadcast_to(t0, (n, len(t0))), z
            )
        if np.any(np.isinf(vals)):
            return Estimate(math.inf, 0.0)
        return Estimate(vals.mean(), vals.std(ddof=1) / math.sqrt(n))
    # mixture draws: CD = 0.5 * E_mix |p0 - p*| / (p0 + p*)
    picks = np.random.default_rng(s_c).random(n) < 0.5
    k = int(picks.sum())
    parts = []
    if n - k:
        parts.append(family.sample(t0, n - k, s_a))
    if k:
        parts.append(family.sample(ts, k, s_b))
    z = np.concatenate(parts, axis=0)
    l0 = family.log_density(np.broadcast_to(t0, (n, len(t0))), z)
    l1 = family.log_density(np.broadcast_to(ts, (n, len(ts))), z)
    with np.errstate(invalid="ignore"):
        h = np.abs(np.tanh(0.5 * (l0 - l1)))
    h = np.where(np.isnan(h), 1.0, h)
    return Estimate(0.5 * h.mean(), 0.5 * h.std(ddof=1) / math.sqrt(n))


def _loop_pairs(fn, t0, ts):
    shape = np.broadcast_shapes(t0.shape, ts.shape)
    a = np.broadcast_to(t0, shape).reshape(-1, shape[-1])
    b = np.broadcast_to(ts, shape).reshape(-1, shape[-1])
    vals = [fn(x, y) for x, y in zip(a, b)]
    if len(vals) == 1 and len(shape) == 1:
        return vals[0]
    return np.array(vals, dtype=float).reshape(shape[:-1])


# ---------------------------------------------------------------------------
# public API


def kl(family: ParametricFamily, theta0, theta_star, spec: DissimilaritySpec | None = None):
    """KL(P_{theta*} || P_{theta0}); may be ``inf`` on the simplex boundary."""
    spec = spec or DissimilaritySpec(kind="KL")
    t0, ts = _prepare(family, theta0, theta_star)
    backend = _resolve_backend(family, "KL", spec.backend)
    if backend == "closed_form":
        with np.errstate(divide="ignore"):
            val = _kl_closed(family, t0, ts)
    elif backend == "exact":
        val = _kl_exact(family, t0, ts)
    elif backend == "quadrature":
        val = _loop_pairs(lambda a, b: _kl_quad(family, a, b, spec.backend.abs_tol), t0, ts)
    else:
        val = _loop_pairs(lambda a, b: _mc_pair(family, "KL", a, b, spec.backend), t0, ts)
    return val if isinstance(val, Estimate) else _scalarize(val, t0, ts)


def bp(family: ParametricFamily, theta0, theta_star, spec: DissimilaritySpec | None = None):
    """g(||mu0 - mu*||_S^2 / E||Z - mu0||_S^2) with moments taken at theta0.

    Predictive moments are exact for every family, so the backend is ignored.
    """
    spec = spec or DissimilaritySpec(kind="BP")
    t0, ts = _prepare(family, theta0, theta_star)
    return _scalarize(_bp_closed(family, spec, t0, ts), t0, ts)


def cd(family: ParametricFamily, theta0, theta_star, spec: DissimilaritySpec | None = None):
    """0.25 * L1 distance between P_{theta0} and P_{theta*}, in [0, 0.5]."""
    spec = spec or DissimilaritySpec(kind="CD")
    t0, ts = _prepare(family, theta0, theta_star)
    backend = _resolve_backend(family, "CD", spec.backend)
    if backend == "closed_form":
        val = _cd_closed(family, t0, ts)
    elif backend == "exact":
        val = _cd_exact(family, t0, ts)
    elif backend == "quadrature":
        val = _loop_pairs(lambda a, b: _cd_quad(family, a, b, spec.backend.abs_tol), t0, ts)
    else:
        val = _loop_pairs(lambda a, b: _mc_pair(family, "CD", a, b, spec.backend), t0, ts)
    return val if isinstance(val, Estimate) else _scalarize(val, t0, ts)


_DISPATCH = {"KL": kl, "BP": bp, "CD": cd}


def evaluate(family: ParametricFamily, theta0, theta_star, spec: DissimilaritySpec):
    return _DISPATCH[spec.kind](family, theta0, theta_star, spec)


def classify(family: ParametricFamily, theta0, theta_star, z) -> np.ndarray:
    """The more likely of theta0 and theta* given outcome z; ties go to theta0."""
    t0, ts = _prepare(family, theta0, theta_star)
    if np.asarray(family.log_density(ts, z)) > np.asarray(family.log_density(t0, z)):
        return ts
    return t0


def pairwise(
    family: ParametricFamily,
    thetas0,
    thetas,
    spec: DissimilaritySpec,
    threads: int | None = None,
) -> np.ndarray:
    """Matrix ``D[i, j] = d(thetas0[i], thetas[j])`` of shape ``(H, N)``.

    Every entry is computed by the same per-pair arithmetic regardless of how
    many rows are requested, so row subsets of the matrix are bit-identical to
    smaller calls.
    """
    t0 = family.check_theta(np.atleast_2d(thetas0))
    ts = family.check_theta(np.atleast_2d(thetas))
    threads = threads or _threads()
    backend = _resolve_backend(family, spec.kind, spec.backend) if spec.kind != "BP" else "closed_form"
    H, N = len(t0), len(ts)

    if spec.kind == "CD" and backend == "exact":
        fam = _enum_family(family)
        star = _pmf_table_cached(fam, ts)
        rows = max(1, min(H, 4_000_000 // max(1, star.shape[1] * 8)))
        chunks = [slice(i, min(i + rows, H)) for i in range(0, H, rows)]

        def block(sl):
            return 0.25 * cdist(fam.pmf_table(t0[sl]), star, "cityblock")

        return _run_blocks(block, chunks, H, N, threads)

    if backend in ("closed_form", "exact"):
        fn = _DISPATCH[spec.kind]
        rows = max(1, 2_000_000 // max(1, N))
        chunks = [slice(i, min(i + rows, H)) for i in range(0, H, rows)]

        def block(sl):
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.asarray(fn(family, t0[sl, None, :], ts[None, :, :], spec), dtype=float)

        return _run_blocks(block, chunks, H, N, threads)

    fn = _DISPATCH[spec.kind]
    out = np.empty((H, N))
    for i in range(H):
        for j in range(N):
            out[i, j] = fn(family, t0[i], ts[j], spec)
    return out


def _run_blocks(block, chunks, H, N, threads) -> np.ndarray:
    out = np.empty((H, N))
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for sl, res in zip(chunks, pool.map(block, chunks)):
                out[sl] = res
    else:
        for sl in chunks:
            out[sl] = block(sl)
    return out

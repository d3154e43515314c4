"""Signal and noise laws, with or without atoms.

A :class:`MixedDistribution` carries a finite list of atoms plus an optional
absolutely continuous part (a normalised :class:`DensityFamily` weighted by
``density_mass``).  Atoms live on counting measure and the density on
Lebesgue measure, so the general entropy is

    h(X) = -sum_i p_i ln p_i - int f ln f,    f = density_mass * density.

All entropies are in nats.  Points in ``R^d`` are passed as ``(n, d)``
arrays; for ``d == 1`` plain 1-D arrays are accepted and returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import special, stats

from .quadrature import QuadratureConfig, QuadratureError, integrate

LOG_2PI = math.log(2.0 * math.pi)
MASS_TOL = 1e-9


class DistributionError(ValueError):
    pass


def _points(x, d):
    """Return ``(n, d)`` view of ``x`` and whether the caller passed 1-D data."""
    x = np.asarray(x, dtype=float)
    if d == 1 and x.ndim <= 1:
        return x.reshape(-1, 1), True
    if x.ndim == 1:
        if x.size != d:
            raise DistributionError(f"point of dimension {x.size} given to a {d}-dimensional law")
        return x.reshape(1, d), False
    if x.shape[-1] != d:
        raise DistributionError(f"points of dimension {x.shape[-1]} given to a {d}-dimensional law")
    return x.reshape(-1, d), False


def _vec(v, name):
    a = np.atleast_1d(np.asarray(v, dtype=float)).ravel()
    if not np.all(np.isfinite(a)):
        raise DistributionError(f"{name} must be finite")
    return a


class DensityFamily:
    """Base class for normalised densities on ``R^d``.

    Subclasses provide ``_logpdf`` on ``(n, d)`` arrays, ``support``,
    ``breakpoints``, ``_sample``, moments and (when known) ``entropy``.
    """

    dim: int
    #: True when the density is smooth everywhere (no jumps or kinks).
    smooth = False

    def logpdf(self, x):
        pts, flat = _points(x, self.dim)
        out = self._logpdf(pts)
        return out if (flat or np.ndim(x) > 1) else out[0]

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def sample(self, rng, n):
        s = self._sample(rng, int(n))
        return s[:, 0] if self.dim == 1 else s

    def entropy(self):
        """Closed-form differential entropy, or None."""
        return None

    def mean(self):
        raise NotImplementedError

    def cov(self):
        raise NotImplementedError

    def breakpoints(self):
        """Per-axis coordinates where the density has a jump or a kink."""
        return [[] for _ in range(self.dim)]

    def scale_length(self):
        """Per-axis width of the narrowest feature of the density."""
        return np.sqrt(np.diag(np.atleast_2d(self.cov())))

    def marginals(self):
        """One-dimensional factors if the density is a product over axes."""
        return None

    def scaled(self, c):
        return Affine(self, c, 0.0)

    def shifted(self, t):
        return Affine(self, 1.0, t)

    def to_spec(self):
        raise NotImplementedError(f"{type(self).__name__} has no JSON form")


@dataclass(frozen=True, eq=False)
class Gaussian(DensityFamily):
    mean_: np.ndarray
    cov_: np.ndarray

    smooth = True

    def __init__(self, mean, cov):
        m = _vec(mean, "mean")
        c = np.atleast_2d(np.asarray(cov, dtype=float))
        if c.shape != (m.size, m.size):
            if c.size == 1:
                c = c.reshape(1, 1) * np.eye(m.size)
            else:
                raise DistributionError("covariance shape does not match mean")
        if not np.allclose(c, c.T):
            raise DistributionError("covariance must be symmetric")
        try:
            chol = np.linalg.cholesky(c)
        except np.linalg.LinAlgError:
            raise DistributionError("covariance must be strictly positive definite") from None
        object.__setattr__(self, "mean_", m)
        object.__setattr__(self, "cov_", c)
        object.__setattr__(self, "_chol", chol)
        object.__setattr__(self, "dim", m.size)

    @classmethod
    def scalar(cls, mu=0.0, var=1.0):
        return cls([mu], [[var]])

    @cached_property
    def _logdet(self):
        return 2.0 * np.sum(np.log(np.diag(self._chol)))

    def _logpdf(self, x):
        z = np.linalg.solve(self._chol, (x - self.mean_).T)
        return -0.5 * np.sum(z * z, axis=0) - 0.5 * self.dim * LOG_2PI - 0.5 * self._logdet

    def _sample(self, rng, n):
        return self.mean_ + rng.standard_normal((n, self.dim)) @ self._chol.T

    def entropy(self):
        return 0.5 * self.dim * (1.0 + LOG_2PI) + 0.5 * self._logdet

    def mean(self):
        return self.mean_.copy()

    def cov(self):
        return self.cov_.copy()

    def support(self, radius=8.0, mass_tol=None):
        if mass_tol is not None:
            radius = stats.norm.isf(mass_tol / (2 * self.dim))
        sd = np.sqrt(np.diag(self.cov_))
        return np.stack([self.mean_ - radius * sd, self.mean_ + radius * sd], axis=1)

    def breakpoints(self):
        return [[m] for m in self.mean_]

    def marginals(self):
        if np.count_nonzero(self.cov_ - np.diag(np.diag(self.cov_))):
            return None
        return [Gaussian.scalar(m, v) for m, v in zip(self.mean_, np.diag(self.cov_))]

    def scaled(self, c):
        return Gaussian(c * self.mean_, c * c * self.cov_)

    def shifted(self, t):
        return Gaussian(self.mean_ + t, self.cov_)

    def to_spec(self):
        return {"type": "gaussian", "mean": self.mean_.tolist(), "cov": self.cov_.tolist()}


@dataclass(frozen=True, eq=False)
class UniformBox(DensityFamily):
    low: np.ndarray
    high: np.ndarray

    def __init__(self, low, high):
        lo, hi = _vec(low, "low"), _vec(high, "high")
        if lo.shape != hi.shape:
            raise DistributionError("low and high must have the same dimension")
        if np.any(lo >= hi):
            raise DistributionError("UniformBox needs low < high on every axis")
        object.__setattr__(self, "low", lo)
        object.__setattr__(self, "high", hi)
        object.__setattr__(self, "dim", lo.size)

    def _logpdf(self, x):
        inside = np.all((x >= self.low) & (x <= self.high), axis=1)
        return np.where(inside, -np.sum(np.log(self.high - self.low)), -np.inf)

    def _sample(self, rng, n):
        return rng.uniform(self.low, self.high, size=(n, self.dim))

    def entropy(self):
        return float(np.sum(np.log(self.high - self.low)))

    def mean(self):
        return 0.5 * (self.low + self.high)

    def cov(self):
        return np.diag((self.high - self.low) ** 2 / 12.0)

    def support(self, radius=None, mass_tol=None):
        return np.stack([self.low, self.high], axis=1)

    def breakpoints(self):
        return [[lo, hi] for lo, hi in zip(self.low, self.high)]

    def scale_length(self):
        return self.high - self.low

    def marginals(self):
        return [UniformBox([lo], [hi]) for lo, hi in zip(self.low, self.high)]

    def scaled(self, c):
        a, b = c * self.low, c * self.high
        return UniformBox(np.minimum(a, b), np.maximum(a, b))

    def shifted(self, t):
        return UniformBox(self.low + t, self.high + t)

    def to_spec(self):
        return {"type": "uniform_box", "low": self.low.tolist(), "high": self.high.tolist()}


@dataclass(frozen=True, eq=False)
class Pyramid(DensityFamily):
    """Product of triangular kernels ``(1/a_i)(1 - |x_i - b_i|/a_i)_+``."""

    scale: np.ndarray
    center: np.ndarray

    def __init__(self, scale=1.0, center=0.0, dim=None):
        a, b = _vec(scale, "scale"), _vec(center, "center")
        d = dim or max(a.size, b.size)
        a = np.broadcast_to(a, (d,)).copy()
        b = np.broadcast_to(b, (d,)).copy()
        if np.any(a <= 0):
            raise DistributionError("Pyramid scale must be positive")
        object.__setattr__(self, "scale", a)
        object.__setattr__(self, "center", b)
        object.__setattr__(self, "dim", d)

    def _logpdf(self, x):
        t = 1.0 - np.abs(x - self.center) / self.scale
        with np.errstate(divide="ignore"):
            return np.sum(np.log(np.maximum(t, 0.0) / self.scale), axis=1)

    def _sample(self, rng, n):
        u = rng.random((n, self.dim)) - rng.random((n, self.dim))
        return self.center + self.scale * u

    def entropy(self):
        return float(np.sum(0.5 + np.log(self.scale)))

    def mean(self):
        return self.center.copy()

    def cov(self):
        return np.diag(self.scale ** 2 / 6.0)

    def support(self, radius=None, mass_tol=None):
        return np.stack([self.center - self.scale, self.center + self.scale], axis=1)

    def breakpoints(self):
        return [[b - a, b, b + a] for a, b in zip(self.scale, self.center)]

    def scale_length(self):
        return self.scale.copy()

    def marginals(self):
        return [Pyramid(a, b) for a, b in zip(self.scale, self.center)]

    def scaled(self, c):
        return Pyramid(abs(c) * self.scale, c * self.center)

    def shifted(self, t):
        return Pyramid(self.scale, self.center + t)

    def to_spec(self):
        return {"type": "pyramid", "scale": self.scale.tolist(), "center": self.center.tolist()}


@dataclass(frozen=True, eq=False)
class FiniteMixture(DensityFamily):
    weights: np.ndarray
    components: tuple

    def __init__(self, weights, components):
        w = _vec(weights, "weights")
        comps = tuple(components)
        if len(comps) != w.size or w.size == 0:
            raise DistributionError("one weight per component required")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > MASS_TOL:
            raise DistributionError("mixture weights must be positive and sum to 1")
        dims = {c.dim for c in comps}
        if len(dims) != 1:
            raise DistributionError("mixture components must share a dimension")
        object.__setattr__(self, "weights", w / w.sum())
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "dim", dims.pop())

    @property
    def smooth(self):
        return all(c.smooth for c in self.components)

    def _logpdf(self, x):
        parts = np.stack([np.log(w) + c._logpdf(x) for w, c in zip(self.weights, self.components)])
        return special.logsumexp(parts, axis=0)

    def _sample(self, rng, n):
        which = rng.choice(len(self.components), size=n, p=self.weights)
        out = np.empty((n, self.dim))
        for k, comp in enumerate(self.components):
            sel = which == k
            out[sel] = comp._sample(rng, int(sel.sum()))
        return out

    def mean(self):
        return sum(w * c.mean() for w, c in zip(self.weights, self.components))

    def cov(self):
        mu = self.mean()
        second = sum(w * (np.atleast_2d(c.cov()) + np.outer(c.mean(), c.mean()))
                     for w, c in zip(self.weights, self.components))
        return second - np.outer(mu, mu)

    def support(self, radius=8.0, mass_tol=None):
        boxes = np.stack([c.support(radius=radius, mass_tol=mass_tol) for c in self.components])
        return np.stack([boxes[:, :, 0].min(axis=0), boxes[:, :, 1].max(axis=0)], axis=1)

    def breakpoints(self):
        out = [[] for _ in range(self.dim)]
        for c in self.components:
            for i, bp in enumerate(c.breakpoints()):
                out[i].extend(bp)
        return [sorted(set(b)) for b in out]

    def scale_length(self):
        return np.min(np.stack([c.scale_length() for c in self.components]), axis=0)

    def scaled(self, c):
        return FiniteMixture(self.weights, [k.scaled(c) for k in self.components])

    def shifted(self, t):
        return FiniteMixture(self.weights, [k.shifted(t) for k in self.components])

    def to_spec(self):
        return {"type": "mixture", "weights": self.weights.tolist(),
                "components": [c.to_spec() for c in self.components]}


@dataclass(frozen=True, eq=False)
class PiecewiseConstant(DensityFamily):
    """Step density on the real line: ``heights[k]`` on ``[edges[k], edges[k+1])``."""

    edges: np.ndarray
    heights: np.ndarray

    def __init__(self, edges, heights):
        e, h = _vec(edges, "edges"), _vec(heights, "heights")
        if e.size != h.size + 1 or np.any(np.diff(e) <= 0):
            raise DistributionError("edges must be increasing with one more entry than heights")
        if np.any(h < 0):
            raise DistributionError("heights must be nonnegative")
        mass = float(np.sum(h * np.diff(e)))
        if abs(mass - 1.0) > MASS_TOL:
            raise DistributionError(f"piecewise-constant density has mass {mass}, not 1")
        object.__setattr__(self, "edges", e)
        object.__setattr__(self, "heights", h)
        object.__setattr__(self, "dim", 1)

    def _logpdf(self, x):
        x = x[:, 0]
        k = np.searchsorted(self.edges, x, side="right") - 1
        inside = (k >= 0) & (k < self.heights.size)
        h = self.heights[np.clip(k, 0, self.heights.size - 1)]
        with np.errstate(divide="ignore"):
            return np.where(inside, np.log(h), -np.inf)

    def _sample(self, rng, n):
        w = self.heights * np.diff(self.edges)
        k = rng.choice(w.size, size=n, p=w / w.sum())
        return (self.edges[k] + rng.random(n) * np.diff(self.edges)[k])[:, None]

    def entropy(self):
        h = self.heights[self.heights > 0]
        w = np.diff(self.edges)[self.heights > 0]
        return float(-np.sum(w * h * np.log(h)))

    def mean(self):
        e = self.edges
        return np.array([np.sum(self.heights * (e[1:] ** 2 - e[:-1] ** 2) / 2.0)])

    def cov(self):
        e = self.edges
        m2 = np.sum(self.heights * (e[1:] ** 3 - e[:-1] ** 3) / 3.0)
        return np.array([[m2 - self.mean()[0] ** 2]])

    def support(self, radius=None, mass_tol=None):
        return np.array([[self.edges[0], self.edges[-1]]])

    def breakpoints(self):
        return [list(self.edges)]

    def scale_length(self):
        return np.array([np.min(np.diff(self.edges))])

    def marginals(self):
        return [self]

    def scaled(self, c):
        e = c * self.edges
        h = self.heights / abs(c)
        if c < 0:
            e, h = e[::-1], h[::-1]
        return PiecewiseConstant(e, h)

    def shifted(self, t):
        return PiecewiseConstant(self.edges + t, self.heights)

    def to_spec(self):
        return {"type": "piecewise_constant", "edges": self.edges.tolist(),
                "heights": self.heights.tolist()}


@dataclass(frozen=True, eq=False)
class Affine(DensityFamily):
    """Law of ``c * Z + t`` for a density ``Z``."""

    base: DensityFamily
    c: float
    t: np.ndarray

    def __init__(self, base, c, t):
        if c == 0:
            raise DistributionError("scale factor must be nonzero")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "c", float(c))
        object.__setattr__(self, "t", np.broadcast_to(np.asarray(t, float), (base.dim,)).copy())
        object.__setattr__(self, "dim", base.dim)

    @property
    def smooth(self):
        return self.base.smooth

    def _logpdf(self, x):
        return self.base._logpdf((x - self.t) / self.c) - self.dim * math.log(abs(self.c))

    def _sample(self, rng, n):
        return self.c * self.base._sample(rng, n) + self.t

    def entropy(self):
        h = self.base.entropy()
        return None if h is None else h + self.dim * math.log(abs(self.c))

    def mean(self):
        return self.c * self.base.mean() + self.t

    def cov(self):
        return self.c ** 2 * np.atleast_2d(self.base.cov())

    def support(self, radius=8.0, mass_tol=None):
        box = self.c * self.base.support(radius=radius, mass_tol=mass_tol) + self.t[:, None]
        return np.sort(box, axis=1)

    def breakpoints(self):
        return [sorted(self.c * np.asarray(bp) + t) for bp, t in zip(self.base.breakpoints(), self.t)]

    def scale_length(self):
        return abs(self.c) * self.base.scale_length()

    def scaled(self, c):
        return Affine(self.base, self.c * c, self.t * c)

    def shifted(self, t):
        return Affine(self.base, self.c, self.t + t)


class TabulatedDensity(DensityFamily):
    """One-dimensional density stored as piecewise Chebyshev interpolants.

    Built numerically (e.g. for sums of independent variables).  ``moments``
    are the exact mean/variance of the underlying law when known, and
    ``sampler`` an exact sampler if one exists; otherwise inverse-CDF
    sampling on the interpolant is used.
    """

    def __init__(self, pieces, moments=None, sampler=None, smooth=False, scale=None):
        # pieces: list of numpy Chebyshev objects with .domain
        self.pieces = sorted(pieces, key=lambda p: p.domain[0])
        self.edges = np.array([p.domain[0] for p in self.pieces] + [self.pieces[-1].domain[1]])
        self.dim = 1
        self.smooth = smooth
        self._moments = moments
        self._sampler = sampler
        self._scale = scale

    def _logpdf(self, x):
        x = x[:, 0]
        out = np.zeros_like(x)
        k = np.clip(np.searchsorted(self.edges, x, side="right") - 1, 0, len(self.pieces) - 1)
        inside = (x >= self.edges[0]) & (x <= self.edges[-1])
        for j in np.unique(k[inside]):
            sel = inside & (k == j)
            out[sel] = self.pieces[j](x[sel])
        with np.errstate(divide="ignore"):
            return np.log(np.maximum(out, 0.0))

    def _sample(self, rng, n):
        if self._sampler is not None:
            return np.asarray(self._sampler(rng, n)).reshape(n, 1)
        grid = np.concatenate([np.linspace(p.domain[0], p.domain[1], 513)[:-1] for p in self.pieces]
                              + [self.edges[-1:]])
        dens = np.exp(self._logpdf(grid[:, None]))
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
        cdf /= cdf[-1]
        return np.interp(rng.random(n), cdf, grid)[:, None]

    def mean(self):
        if self._moments is not None:
            return np.atleast_1d(self._moments[0])
        return np.array([self._moment(1)])

    def cov(self):
        if self._moments is not None:
            return np.atleast_2d(self._moments[1])
        m = self._moment(1)
        return np.array([[self._moment(2) - m * m]])

    def _moment(self, k):
        total = 0.0
        for p in self.pieces:
            poly = p * np.polynomial.Chebyshev([0, 1], domain=p.domain, window=p.window) ** k
            anti = poly.integ()
            total += anti(p.domain[1]) - anti(p.domain[0])
        return float(total)

    def support(self, radius=None, mass_tol=None):
        return np.array([[self.edges[0], self.edges[-1]]])

    def breakpoints(self):
        return [list(self.edges)]

    def scale_length(self):
        if self._scale is not None:
            return np.atleast_1d(self._scale)
        return np.sqrt(np.diag(self.cov()))


# ---------------------------------------------------------------------------
# mixed laws
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Atom:
    location: tuple
    mass: float

    def __post_init__(self):
        if not self.mass > 0 or self.mass > 1 + MASS_TOL:
            raise DistributionError("atom mass must lie in (0, 1]")


@dataclass(frozen=True, eq=False)
class MixedDistribution:
    atoms: tuple = ()
    density: DensityFamily | None = None
    density_mass: float = 0.0
    dim: int = 1

    def __post_init__(self):
        atoms = tuple(a if isinstance(a, Atom) else Atom(tuple(np.atleast_1d(a[0]).tolist()), a[1])
                      for a in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        locs = [a.location for a in atoms]
        if len(set(locs)) != len(locs):
            raise DistributionError("atom locations must be pairwise distinct")
        if any(len(loc) != self.dim for loc in locs):
            raise DistributionError("atom dimension does not match distribution")
        if self.density is None and self.density_mass != 0:
            raise DistributionError("density_mass given without a density")
        if self.density is not None:
            if self.density.dim != self.dim:
                raise DistributionError("density dimension does not match distribution")
            if not 0 < self.density_mass <= 1 + MASS_TOL:
                raise DistributionError("density_mass must lie in (0, 1]")
        total = sum(a.mass for a in atoms) + self.density_mass
        if abs(total - 1.0) > MASS_TOL:
            raise DistributionError(f"total probability is {total}, not 1")

    # constructors -----------------------------------------------------------
    @classmethod
    def from_density(cls, density):
        return cls((), density, 1.0, density.dim)

    @classmethod
    def from_atoms(cls, locations, masses):
        locs = np.asarray(locations, dtype=float)
        if locs.ndim == 1:
            locs = locs[:, None]
        atoms = tuple(Atom(tuple(loc.tolist()), float(m)) for loc, m in zip(locs, masses))
        return cls(atoms, None, 0.0, locs.shape[1])

    @classmethod
    def mixed(cls, locations, masses, density):
        locs = np.asarray(locations, dtype=float)
        if locs.ndim == 1:
            locs = locs[:, None]
        atoms = tuple(Atom(tuple(loc.tolist()), float(m)) for loc, m in zip(locs, masses))
        return cls(atoms, density, 1.0 - float(np.sum(masses)), density.dim)

    # bookkeeping -----------------------------------------------------------
    @property
    def eta(self):
        """Total mass carried by atoms."""
        return float(sum(a.mass for a in self.atoms))

    @property
    def locations(self):
        return np.array([a.location for a in self.atoms], dtype=float).reshape(-1, self.dim)

    @property
    def masses(self):
        return np.array([a.mass for a in self.atoms], dtype=float)

    @property
    def is_discrete(self):
        return self.density is None

    @property
    def is_continuous(self):
        return not self.atoms

    def mean(self):
        m = self.masses @ self.locations if self.atoms else np.zeros(self.dim)
        if self.density is not None:
            m = m + self.density_mass * self.density.mean()
        return m

    def cov(self):
        mu = self.mean()
        second = np.zeros((self.dim, self.dim))
        for a in self.atoms:
            loc = np.asarray(a.location)
            second += a.mass * np.outer(loc, loc)
        if self.density is not None:
            dm = self.density.mean()
            second += self.density_mass * (np.atleast_2d(self.density.cov()) + np.outer(dm, dm))
        return second - np.outer(mu, mu)

    def to_spec(self):
        if not self.atoms and self.density is not None:
            return self.density.to_spec()
        return {"type": "atoms+density",
                "atoms": [{"location": list(a.location), "mass": a.mass} for a in self.atoms],
                "density": None if self.density is None else self.density.to_spec()}


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def density_at(dist: MixedDistribution, x):
    """Absolutely continuous part of the law at ``x`` (scaled by its mass)."""
    if dist.density is None:
        pts, flat = _points(x, dist.dim)
        out = np.zeros(pts.shape[0])
        return out if (flat or np.ndim(x) > 1) else 0.0
    return dist.density_mass * dist.density.pdf(x)


def _shannon(masses):
    p = np.asarray(masses, dtype=float)
    return float(-np.sum(p * np.log(p)))


def closed_form_entropy(dist: MixedDistribution):
    """Exact general entropy in nats, or None when no closed form is known."""
    h = _shannon(dist.masses) if dist.atoms else 0.0
    if dist.density is None:
        return h
    hd = dist.density.entropy()
    if hd is None:
        return None
    w = dist.density_mass
    return h + w * hd - w * math.log(w)


def density_entropy(density: DensityFamily, cfg: QuadratureConfig | None = None):
    """Differential entropy of a density by quadrature; returns (value, error)."""
    cfg = cfg or QuadratureConfig()
    box = density.support(radius=cfg.truncationRadius)

    def integrand(x):
        lp = density.logpdf(x)
        fin = np.isfinite(lp)
        return np.where(fin, -np.exp(np.where(fin, lp, 0.0)) * np.where(fin, lp, 0.0), 0.0)

    if density.dim == 1:
        res = integrate(integrand, box[0], cfg, points=density.breakpoints()[0])
    elif density.dim <= 3:
        res = integrate(integrand, box, cfg, points=density.breakpoints())
    else:
        raise QuadratureError("deterministic entropy limited to d <= 3")
    return float(res.value), float(res.errorEstimate)


def entropy(dist: MixedDistribution, cfg: QuadratureConfig | None = None):
    """General entropy with quadrature fallback; returns (value, error)."""
    exact = closed_form_entropy(dist)
    if exact is not None:
        return exact, 0.0
    h = _shannon(dist.masses) if dist.atoms else 0.0
    hd, err = density_entropy(dist.density, cfg)
    w = dist.density_mass
    return h + w * hd - w * math.log(w), w * err


def sample(dist: MixedDistribution, rng_seed: int, n: int):
    """``n`` i.i.d. draws, deterministic for a given seed."""
    if n < 1:
        raise DistributionError("n must be >= 1")
    rng = np.random.default_rng(rng_seed)
    return draw(dist, rng, n)


def draw(dist: MixedDistribution, rng, n):
    p = list(dist.masses) + ([dist.density_mass] if dist.density is not None else [])
    which = rng.choice(len(p), size=n, p=np.asarray(p) / np.sum(p))
    out = np.empty((n, dist.dim))
    locs = dist.locations
    for i in range(len(dist.atoms)):
        out[which == i] = locs[i]
    if dist.density is not None:
        sel = which == len(dist.atoms)
        out[sel] = dist.density._sample(rng, int(sel.sum()))
    return out[:, 0] if dist.dim == 1 else out


class _Sampler:
    """Adapter giving a MixedDistribution the ``sample(rng, n)`` protocol."""

    def __init__(self, dist):
        self.dist = dist

    def sample(self, rng, n):
        return draw(self.dist, rng, n)


def sampler(dist: MixedDistribution):
    return _Sampler(dist)


def scale(dist: MixedDistribution, c: float) -> MixedDistribution:
    """Law of ``c * X``; entropy of the density part shifts by ``d ln|c|``."""
    if c == 0:
        raise DistributionError("scale factor must be nonzero")
    atoms = tuple(Atom(tuple((c * np.asarray(a.location)).tolist()), a.mass) for a in dist.atoms)
    dens = None if dist.density is None else dist.density.scaled(c)
    return MixedDistribution(atoms, dens, dist.density_mass, dist.dim)


def shift(dist: MixedDistribution, t) -> MixedDistribution:
    t = np.broadcast_to(np.asarray(t, float), (dist.dim,))
    atoms = tuple(Atom(tuple((np.asarray(a.location) + t).tolist()), a.mass) for a in dist.atoms)
    dens = None if dist.density is None else dist.density.shifted(t)
    return MixedDistribution(atoms, dens, dist.density_mass, dist.dim)


# ---------------------------------------------------------------------------
# JSON specs
# ---------------------------------------------------------------------------

SPEC_FIELDS = {
    "gaussian": {"mean", "cov", "var", "std"},
    "uniform_box": {"low", "high"},
    "pyramid": {"scale", "center", "dim"},
    "mixture": {"weights", "components"},
    "piecewise_constant": {"edges", "heights"},
    "atoms": {"atoms", "density"},
    "atoms+density": {"atoms", "density"},
}


def _check_fields(spec):
    if not isinstance(spec, dict):
        raise DistributionError("distribution spec must be an object")
    extra = sorted(set(spec) - {"type"} - SPEC_FIELDS.get(spec.get("type"), set(spec)))
    if extra:
        raise DistributionError(f"{spec['type']} spec has unknown field {extra[0]!r}")


def density_from_spec(spec: dict) -> DensityFamily:
    _check_fields(spec)
    kind = spec.get("type")
    try:
        if kind == "gaussian":
            mean = spec.get("mean", 0.0)
            if "cov" in spec:
                cov = spec["cov"]
            elif "var" in spec:
                cov = spec["var"]
            else:
                cov = float(spec.get("std", 1.0)) ** 2
            m = _vec(mean, "mean")
            c = np.asarray(cov, float)
            if c.ndim < 2:
                c = np.diag(np.broadcast_to(c, m.shape).astype(float))
            return Gaussian(m, c)
        if kind == "uniform_box":
            return UniformBox(spec["low"], spec["high"])
        if kind == "pyramid":
            return Pyramid(spec.get("scale", 1.0), spec.get("center", 0.0), spec.get("dim"))
        if kind == "mixture":
            return FiniteMixture(spec["weights"], [density_from_spec(c) for c in spec["components"]])
        if kind == "piecewise_constant":
            return PiecewiseConstant(spec["edges"], spec["heights"])
    except KeyError as exc:
        raise DistributionError(f"{kind} spec is missing field {exc.args[0]!r}") from None
    raise DistributionError(f"unknown density type {kind!r}")


def from_spec(spec: dict) -> MixedDistribution:
    """Parse a JSON distribution spec (see README for the schema)."""
    if not isinstance(spec, dict) or "type" not in spec:
        raise DistributionError("distribution spec must be an object with a 'type' field")
    _check_fields(spec)
    if spec["type"] in ("atoms+density", "atoms"):
        atoms = spec.get("atoms", [])
        locs = [np.atleast_1d(a["location"]).astype(float) for a in atoms]
        masses = [float(a["mass"]) for a in atoms]
        dens = spec.get("density")
        if dens is None:
            if not atoms:
                raise DistributionError("atoms+density spec with neither atoms nor density")
            return MixedDistribution.from_atoms(np.array(locs), masses)
        d = density_from_spec(dens)
        if not atoms:
            return MixedDistribution.from_density(d)
        return MixedDistribution.mixed(np.array(locs).reshape(len(locs), d.dim), masses, d)
    return MixedDistribution.from_density(density_from_spec(spec))

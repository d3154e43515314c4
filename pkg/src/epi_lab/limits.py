"""High- and low-SNR limits of the additive channel, rate fits, and the
pointwise objects used in the uniform-integrability arguments (the
normalised convolution ``J``, its log-ratio ``H`` and a Gaussian dominating
function).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import distributions as D
from .channel import ChannelError, ChannelModel, mutual_information, scaled_noise_entropy
from .quadrature import QuadratureConfig, QuadratureError, integrate, integrate_batch

HIGH_GRID = tuple(10.0 ** np.arange(1.0, 4.01, 0.5))
LOW_GRID = tuple(10.0 ** -np.arange(1.0, 4.01, 0.5))


class RateFitError(RuntimeError):
    pass


@dataclass
class LimitVerdict:
    target: float
    sweep: list                     # (gamma, value, errorEstimate)
    finalResidual: float = field(init=False)
    fittedExponent: float | None = None
    fittedConstant: float | None = None
    exponentStderr: float | None = None
    kind: str = ""

    def __post_init__(self):
        g = [s[0] for s in self.sweep]
        d = np.diff(g)
        if len(g) > 1 and not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError("sweep gammas must be strictly monotone")
        self.finalResidual = abs(self.sweep[-1][1] - self.target) if self.sweep else math.nan

    @property
    def gammas(self):
        return np.array([s[0] for s in self.sweep])

    @property
    def residuals(self):
        return np.array([abs(s[1] - self.target) for s in self.sweep])

    @property
    def errors(self):
        return np.array([s[2] for s in self.sweep])

    def monotone(self, slack: float = 2.0) -> bool:
        """Residuals nonincreasing along the sweep, within ``slack`` error bars."""
        r, e = self.residuals, self.errors
        return bool(np.all(r[1:] <= r[:-1] + slack * (e[1:] + e[:-1])))


def _sweep(ch, grid, cfg, correction):
    rows = []
    for g in grid:
        try:
            b = mutual_information(ch, g, cfg, direct=False)
        except QuadratureError as exc:
            raise QuadratureError(f"gamma={g:g}: {exc}") from exc
        c, ec = correction(g)
        rows.append((float(g), b.I + c, b.errorEstimate + ec))
    return rows


def _entropy_target(dist, cfg):
    return D.entropy(dist, cfg)[0]


def verify_highsnr_continuous(ch: ChannelModel, gammaGrid=HIGH_GRID,
                              cfg: QuadratureConfig | None = None) -> LimitVerdict:
    """``I + h(U/sqrt(gamma))`` against ``h(X)`` as gamma grows."""
    cfg = cfg or QuadratureConfig()
    if not ch.signal.is_continuous:
        raise ChannelError("signal must be a pure density")
    rows = _sweep(ch, gammaGrid, cfg, lambda g: scaled_noise_entropy(ch.noise, g, cfg))
    return LimitVerdict(_entropy_target(ch.signal, cfg), rows, kind="high_continuous")


def verify_highsnr_discrete(ch: ChannelModel, gammaGrid=HIGH_GRID,
                            cfg: QuadratureConfig | None = None) -> LimitVerdict:
    """``I`` against the Shannon entropy of the atoms as gamma grows."""
    cfg = cfg or QuadratureConfig()
    if not ch.signal.is_discrete:
        raise ChannelError("signal must be purely atomic")
    rows = _sweep(ch, gammaGrid, cfg, lambda g: (0.0, 0.0))
    return LimitVerdict(_entropy_target(ch.signal, cfg), rows, kind="high_discrete")


def verify_highsnr_mixed(ch: ChannelModel, gammaGrid=HIGH_GRID,
                         cfg: QuadratureConfig | None = None) -> LimitVerdict:
    """``I + (1 - eta) h(U/sqrt(gamma))`` against the general entropy."""
    cfg = cfg or QuadratureConfig()
    if ch.signal.is_continuous:
        return verify_highsnr_continuous(ch, gammaGrid, cfg)
    if ch.signal.is_discrete:
        return verify_highsnr_discrete(ch, gammaGrid, cfg)
    w = 1.0 - ch.signal.eta

    def corr(g):
        h, e = scaled_noise_entropy(ch.noise, g, cfg)
        return w * h, w * e

    rows = _sweep(ch, gammaGrid, cfg, corr)
    return LimitVerdict(_entropy_target(ch.signal, cfg), rows, kind="high_mixed")


def verify_lowsnr(ch: ChannelModel, gammaGrid=LOW_GRID,
                  cfg: QuadratureConfig | None = None) -> LimitVerdict:
    """``I`` against 0 as gamma shrinks (grid given in decreasing order)."""
    cfg = cfg or QuadratureConfig()
    rows = _sweep(ch, gammaGrid, cfg, lambda g: (0.0, 0.0))
    return LimitVerdict(0.0, rows, kind="low")


def fit_rate(verdict: LimitVerdict, min_points: int = 4):
    """Least-squares slope of ``ln residual`` on ``ln gamma``.

    Points whose residual is below ten times their error estimate are
    dropped.  Returns ``(exponent, constant)`` and stores both, with the
    slope's standard error, on ``verdict``.
    """
    g, r, e = verdict.gammas, verdict.residuals, verdict.errors
    keep = (r > 10.0 * e) & (r > 0)
    if keep.sum() < min_points:
        raise RateFitError(
            f"only {int(keep.sum())} sweep points have residuals above 10x their error "
            f"estimates (need {min_points}); tighten the quadrature config")
    fit = stats.linregress(np.log(g[keep]), np.log(r[keep]))
    verdict.fittedExponent = float(fit.slope)
    verdict.fittedConstant = float(math.exp(fit.intercept))
    verdict.exponentStderr = float(fit.stderr)
    return verdict.fittedExponent, verdict.fittedConstant


# ---------------------------------------------------------------------------
# the normalised convolution J and a Gaussian dominating function
# ---------------------------------------------------------------------------

def convolution_J(fx: D.DensityFamily, fu: D.DensityFamily, x, y, gamma,
                  cfg: QuadratureConfig | None = None):
    """``J(x, y) = int f_U(v) f_X(x + (y - v)/sqrt(gamma)) dv`` for d = 1,
    vectorised over matching arrays ``x``, ``y``."""
    cfg = cfg or QuadratureConfig()
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    shape = x.shape
    x, y = x.ravel(), y.ravel()
    s = math.sqrt(gamma)
    (ulo, uhi), = fu.support(radius=cfg.truncationRadius)
    (xlo, xhi), = fx.support(radius=cfg.truncationRadius)
    # restrict v so that the signal argument stays inside its support
    lo = np.maximum(ulo, y + s * (x - xhi))
    hi = np.maximum(np.minimum(uhi, y + s * (x - xlo)), lo)
    pts = [np.broadcast_to(np.asarray(fu.breakpoints()[0], float), (x.size, len(fu.breakpoints()[0])))]
    bx = np.asarray(fx.breakpoints()[0], dtype=float)
    if bx.size:
        pts.append(y[:, None] + s * (x[:, None] - bx[None, :]))

    def f(v, idx):
        return fu.pdf(v) * fx.pdf(x[idx] + (y[idx] - v) / s)

    res = integrate_batch(f, lo, hi, cfg, points=np.concatenate(pts, axis=1))
    if not np.all(res.converged):
        k = int(np.flatnonzero(~res.converged)[0])
        raise QuadratureError(f"J did not converge at (x, y) = ({x[k]:g}, {y[k]:g})")
    return res.value.reshape(shape), res.error.reshape(shape)


def domination_bound_gaussian(x, y, alpha: float, Sigma, noise: D.DensityFamily,
                              cfg: QuadratureConfig | None = None) -> float:
    """Dominating function for the negative log-ratio when ``f_X >= alpha phi_Sigma``:

    ``Psi = <x,S^-1 x> + <y,S^-1 y> + |ln int exp(-2<v,S^-1 v>) f_U(v) dv| + rho``,
    ``rho = |ln(alpha / ((2 pi)^{d/2} det S^{1/2}))|``.
    """
    cfg = cfg or QuadratureConfig()
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    S = np.atleast_2d(np.asarray(Sigma, dtype=float))
    d = S.shape[0]
    if noise.dim != d:
        raise ValueError("noise dimension does not match Sigma")
    P = np.linalg.inv(S)
    x = np.asarray(x, dtype=float).reshape(d)
    y = np.asarray(y, dtype=float).reshape(d)

    def g(v):
        v = v.reshape(-1, d)
        return np.exp(-2.0 * np.einsum("ni,ij,nj->n", v, P, v)) * noise.pdf(v if d > 1 else v[:, 0])

    res = integrate(g, noise.support(radius=cfg.truncationRadius), cfg,
                    points=noise.breakpoints())
    rho = abs(math.log(alpha) - 0.5 * d * math.log(2 * math.pi) - 0.5 * math.log(np.linalg.det(S)))
    return float(x @ P @ x + y @ P @ y + abs(math.log(res.value)) + rho)


@dataclass
class DominationCheck:
    gamma: float
    x: np.ndarray
    y: np.ndarray
    negative_part: np.ndarray
    bound: np.ndarray

    @property
    def holds(self) -> bool:
        return bool(np.all(self.negative_part <= self.bound))


def domination_check(fx: D.DensityFamily, noise: D.DensityFamily, alpha: float, Sigma,
                     xs, ys, gamma: float, cfg: QuadratureConfig | None = None) -> DominationCheck:
    """Compare ``max(0, ln f_X(x) - ln J(x, y))`` with ``Psi(x, y) + |ln f_X(x)|`` (d = 1)."""
    cfg = cfg or QuadratureConfig()
    if gamma < 1:
        raise ValueError("the domination argument is for gamma >= 1")
    X, Y = np.meshgrid(np.asarray(xs, float), np.asarray(ys, float), indexing="ij")
    J, _ = convolution_J(fx, noise, X, Y, gamma, cfg)
    lfx = fx.logpdf(X.ravel()).reshape(X.shape)
    with np.errstate(divide="ignore"):
        neg = np.maximum(0.0, lfx - np.log(J))
    psi0 = domination_bound_gaussian(0.0, 0.0, alpha, Sigma, noise, cfg)
    P = 1.0 / float(np.atleast_2d(Sigma)[0, 0])
    bound = psi0 + P * (X ** 2 + Y ** 2) + np.abs(lfx)
    return DominationCheck(gamma, X, Y, neg, bound)


# ---------------------------------------------------------------------------
# pyramidal laws
# ---------------------------------------------------------------------------

def _pyramid_regions(x, y, s, a, b):
    inside = (np.abs(x) < 1) & (np.abs(y - b) < a)
    lo_arg = x + (y - b - a) / s            # smallest signal argument
    hi_arg = x + (y - b + a) / s            # largest signal argument
    plus = inside & (lo_arg > 0) & (hi_arg < 1)
    minus = inside & (hi_arg < 0) & (lo_arg > -1)
    return plus, minus


def pyramid_J_closed_form(x, y, gamma: float, a: float = 1.0, b: float = 0.0):
    """Closed-form ``J`` for ``X ~ Pyramid(1, 0)``, ``U ~ Pyramid(a, b)`` on the
    parallelograms where the whole noise window maps into one linear piece
    of ``f_X``: ``J = 1 - |x| - (y - b) sgn(x)/sqrt(gamma)``.

    Returns None (scalar input) or NaN entries (array input) outside them.
    Points in R^d, given as length-d sequences with matching ``a``/``b``,
    give the product of the per-axis values.
    """
    s = math.sqrt(gamma)
    if np.ndim(x) == 1 and np.ndim(y) == 1 and np.size(x) == np.size(y) and np.ndim(a) == 1:
        vals = [pyramid_J_closed_form(xi, yi, gamma, ai, bi)
                for xi, yi, ai, bi in zip(x, y, a, np.broadcast_to(b, np.shape(a)))]
        return None if any(v is None for v in vals) else float(np.prod(vals))
    if not s > np.max(a):
        raise ValueError("need sqrt(gamma) > a")
    xa, ya = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    plus, minus = _pyramid_regions(xa, ya, s, a, b)
    J = np.where(plus | minus, 1.0 - np.abs(xa) - (ya - b) * np.sign(xa) / s, np.nan)
    if J.ndim == 0:
        return None if np.isnan(J) else float(J)
    return J


def pyramid_J_quadrature(x, y, gamma: float, a: float = 1.0, b: float = 0.0,
                         cfg: QuadratureConfig | None = None):
    """``J`` for the same pyramid pair by direct quadrature of the convolution."""
    cfg = cfg or QuadratureConfig()
    J, _ = convolution_J(D.Pyramid(1.0, 0.0), D.Pyramid(a, b), x, y, gamma, cfg)
    return float(J) if J.ndim == 0 else J


def pyramid_H(x, y, gamma: float, a: float = 1.0, b: float = 0.0):
    """``H = ln(J / f_X)`` on the parallelograms and 0 elsewhere."""
    J = np.asarray(pyramid_J_closed_form(np.asarray(x, float), np.asarray(y, float), gamma, a, b),
                   dtype=float)
    fx = np.maximum(1.0 - np.abs(np.asarray(x, float)), 0.0)
    ok = np.isfinite(J) & (fx > 0)
    return np.where(ok, np.log(np.where(ok, J, 1.0) / np.where(ok, fx, 1.0)), 0.0)


def sample_parallelograms(rng, n, gamma, a=1.0, b=0.0):
    """Uniform points from ``P+ u P-`` by rejection from the box (-1,1) x (b-a, b+a)."""
    s = math.sqrt(gamma)
    out = []
    while sum(len(o) for o in out) < n:
        x = rng.uniform(-1, 1, 4 * n)
        y = rng.uniform(b - a, b + a, 4 * n)
        p, m = _pyramid_regions(x, y, s, a, b)
        keep = p | m
        out.append(np.stack([x[keep], y[keep]], axis=1))
    return np.concatenate(out)[:n]

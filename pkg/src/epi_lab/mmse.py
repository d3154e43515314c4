"""MMSE under Gaussian noise, the de Bruijn-type identity and MMSE entropy formulas.

With noise ``N ~ N(0, Sigma)`` the error is measured in the norm
``|x|^2 = <x, Sigma^{-1} x>``.  In ``d`` dimensions the identity reads

    d/dgamma [I + h(N/sqrt(gamma))] = M/2 - d/(2 gamma)

and the entropy representation subtracts ``d 1(gamma > 1)/gamma``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate as sint
from scipy import special

from . import distributions as D
from .channel import ChannelError, ChannelModel, _Conv1D, output_entropy
from .quadrature import QuadratureConfig, QuadratureError, integrate, integrate_mc


class MmseTailWarning(UserWarning):
    """gamma * M(gamma) has not settled near d at the top of the grid."""


@dataclass
class MmseCurve:
    gammaGrid: np.ndarray
    M: np.ndarray
    Sigma: np.ndarray
    errors: np.ndarray = field(default=None)

    def __post_init__(self):
        self.gammaGrid = np.asarray(self.gammaGrid, dtype=float)
        self.M = np.asarray(self.M, dtype=float)
        if np.any(np.diff(self.gammaGrid) <= 0):
            raise ValueError("gammaGrid must be strictly ascending")


def _gaussian_noise(ch: ChannelModel) -> D.Gaussian:
    if not isinstance(ch.noise, D.Gaussian):
        raise ChannelError("MMSE routines need Gaussian noise")
    if np.any(ch.noise.mean() != 0):
        raise ChannelError("MMSE routines need zero-mean noise")
    return ch.noise


def _axis_channels(ch):
    """Independent 1-D problems whose weighted MMSEs add up, or None."""
    if ch.dim == 1:
        return [ch]
    return ch.factors()


def log_grid(gmin=1e-4, gmax=1e4, per_decade=40):
    """Log-spaced grid containing both ends and, when inside, gamma = 1."""
    lo, hi = math.log10(gmin), math.log10(gmax)
    n = int(round((hi - lo) * per_decade))
    g = np.logspace(lo, hi, n + 1)
    if gmin < 1 < gmax:
        g[np.argmin(np.abs(np.log(g)))] = 1.0
    return g


# ---------------------------------------------------------------------------
# posterior mean
# ---------------------------------------------------------------------------

def _atom_posterior(ch, gamma, y):
    """Posterior weights over atoms for a purely atomic signal (any d)."""
    s = math.sqrt(gamma)
    locs = ch.signal.locations
    logw = np.log(ch.signal.masses)[None, :] + np.stack(
        [ch.noise.logpdf(y - s * x) for x in locs], axis=1)
    norm = special.logsumexp(logw, axis=1, keepdims=True)
    if np.any(~np.isfinite(norm)):
        raise QuadratureError("posterior normaliser underflows: y is outside the effective support")
    return np.exp(logw - norm)


def conditional_mean(ch: ChannelModel, gamma: float, y, cfg: QuadratureConfig | None = None):
    """``E(X | sqrt(gamma) X + N = y)`` as a ratio of quadratures."""
    cfg = cfg or QuadratureConfig()
    _gaussian_noise(ch)
    if not gamma > 0:
        raise ChannelError("gamma must be positive")
    d = ch.dim
    pts = np.asarray(y, dtype=float).reshape(-1, d)
    if ch.signal.is_discrete:
        post = _atom_posterior(ch, gamma, pts)
        out = post @ ch.signal.locations
    else:
        axes = _axis_channels(ch)
        if axes is None:
            raise ChannelError("conditional mean in d > 1 needs a product signal law")
        out = np.empty(pts.shape)
        for k, ax in enumerate(axes):
            m0, m1, _ = _Conv1D(ax, gamma, cfg).moments(pts[:, k])
            if np.any(m0 < 1e-300):
                bad = pts[np.argmax(m0 < 1e-300)]
                raise QuadratureError(f"posterior normaliser underflows at y = {bad}; "
                                      "y is outside the effective support")
            out[:, k] = m1 / m0
    if np.ndim(y) == 0 or (d > 1 and np.ndim(y) == 1):
        return float(out[0, 0]) if d == 1 else out[0]
    return out[:, 0] if d == 1 else out


# ---------------------------------------------------------------------------
# MMSE
# ---------------------------------------------------------------------------

def _mmse_1d(ch, gamma, cfg):
    """Unweighted MMSE of a 1-D channel and its error estimate."""
    conv = _Conv1D(ch, gamma, cfg)
    (lo, hi), splits = conv.y_domain()
    res = integrate(lambda y: conv.moments(y)[2], (lo, hi), cfg, points=splits,
                    min_width=conv.feature_width())
    if not res.converged:
        raise QuadratureError(f"MMSE outer integral did not converge at gamma={gamma:g}")
    val = float(res.value)
    return val, float(res.errorEstimate) + conv.inner.relTol * abs(val)


def _mmse_atoms_mc(ch, gamma, cfg):
    s = math.sqrt(gamma)
    sig = ch.signal
    prec = np.linalg.inv(ch.noise.cov())

    def draw(rng, n):
        idx = rng.choice(len(sig.masses), size=n, p=sig.masses)
        x = sig.locations[idx]
        return np.concatenate([x, s * x + ch.noise._sample(rng, n)], axis=1)

    def g(z):
        x, y = z[:, :ch.dim], z[:, ch.dim:]
        e = x - _atom_posterior(ch, gamma, y) @ sig.locations
        return np.einsum("ni,ij,nj->n", e, prec, e)

    return integrate_mc(g, draw, cfg)


def mmse(ch: ChannelModel, gamma: float, cfg: QuadratureConfig | None = None,
         return_error: bool = False):
    """``M(X; gamma)`` in the ``Sigma^{-1}`` norm.

    Product laws (and every law when d == 1) use nested quadrature over the
    output density; purely atomic signals in d > 1 use Monte Carlo over
    ``(X, N)`` with exact posterior weights.
    """
    cfg = cfg or QuadratureConfig()
    noise = _gaussian_noise(ch)
    if not gamma > 0:
        raise ChannelError("gamma must be positive")
    if ch.signal.is_discrete and len(ch.signal.masses) == 1:
        val, err = 0.0, 0.0
    elif ch.dim == 1:
        val, err = _mmse_1d(ch, gamma, cfg)
        var = float(noise.cov()[0, 0])
        val, err = val / var, err / var
    else:
        axes = _axis_channels(ch)
        if axes is not None:
            parts = [_mmse_1d(ax, gamma, cfg) for ax in axes]
            var = np.diag(noise.cov())
            val = sum(p[0] / v for p, v in zip(parts, var))
            err = sum(p[1] / v for p, v in zip(parts, var))
        elif ch.signal.is_discrete:
            res = _mmse_atoms_mc(ch, gamma, cfg)
            val, err = res.value, 3.0 * res.errorEstimate
        else:
            raise ChannelError("MMSE in d > 1 needs a product law or a purely atomic signal")
    return (val, err) if return_error else val


def mmse_at_zero(ch: ChannelModel) -> float:
    """``M(X; 0) = E|X - EX|^2`` in the ``Sigma^{-1}`` norm."""
    prec = np.linalg.inv(_gaussian_noise(ch).cov())
    return float(np.trace(prec @ np.atleast_2d(ch.signal.cov())))


def mmse_curve(ch: ChannelModel, gammaGrid, cfg: QuadratureConfig | None = None) -> MmseCurve:
    cfg = cfg or QuadratureConfig()
    grid = np.asarray(gammaGrid, dtype=float)
    vals = [mmse(ch, g, cfg, return_error=True) for g in grid]
    return MmseCurve(grid, [v for v, _ in vals], _gaussian_noise(ch).cov(),
                     np.array([e for _, e in vals]))


# ---------------------------------------------------------------------------
# de Bruijn-type identity
# ---------------------------------------------------------------------------

@dataclass
class DebruijnCheck:
    gamma: float
    lhs: float
    rhs: float
    residual: float
    errorEstimate: float


def debruijn_check(ch: ChannelModel, gamma: float, fdStep: float = 1e-3,
                   cfg: QuadratureConfig | None = None) -> DebruijnCheck:
    """Compare a centred log-gamma difference of ``F = I + h(N/sqrt(gamma))``
    with ``M/2 - d/(2 gamma)``.

    ``F = h(Y) - (d/2) ln gamma`` since ``h(N/sqrt(gamma)) = h(N) - (d/2) ln gamma``
    and ``I = h(Y) - h(N)``.
    """
    cfg = cfg or QuadratureConfig()
    _gaussian_noise(ch)
    if not gamma > fdStep > 0:
        raise ChannelError("need gamma > fdStep > 0")
    d = ch.dim
    gp, gm = gamma * math.exp(fdStep), gamma * math.exp(-fdStep)
    hp, ep = output_entropy(ch, gp, cfg)
    hm, em = output_entropy(ch, gm, cfg)
    Fp, Fm = hp - 0.5 * d * math.log(gp), hm - 0.5 * d * math.log(gm)
    lhs = (Fp - Fm) / (2.0 * fdStep * gamma)
    M, eM = mmse(ch, gamma, cfg, return_error=True)
    rhs = 0.5 * M - 0.5 * d / gamma
    err = (ep + em) / (2.0 * fdStep * gamma) + 0.5 * eM
    return DebruijnCheck(gamma, lhs, rhs, abs(lhs - rhs), err)


def debruijn_residual(ch: ChannelModel, gamma: float, fdStep: float = 1e-3,
                      cfg: QuadratureConfig | None = None) -> float:
    return debruijn_check(ch, gamma, fdStep, cfg).residual


# ---------------------------------------------------------------------------
# entropy from the MMSE curve
# ---------------------------------------------------------------------------

def _simpson_log(grid, vals, right=None):
    """``int vals dgamma`` by Simpson's rule in ``ln gamma``, split at gamma = 1.

    ``right`` optionally gives the integrand used on gamma >= 1, so a jump at
    gamma = 1 is taken with the correct one-sided value on each side.
    """
    u = np.log(grid)
    right = vals if right is None else right
    total = 0.0
    for sel, v in ((grid <= 1.0, vals), (grid >= 1.0, right)):
        if sel.sum() >= 2:
            total += sint.simpson(v[sel] * grid[sel], x=u[sel])
    return total


def _tail(curve: MmseCurve, d: int, decades: float = 1.0):
    """Estimate ``int_{gmax}^inf (M - d/gamma) dgamma``.

    ``r = gamma M - d`` is fitted as a power law over the last decade, giving
    ``r(gmax)/q`` for ``r ~ gamma^{-q}``.  Returns ``(tail, settled)``.
    """
    g, M = curve.gammaGrid, curve.M
    r = g * M - d
    sel = g >= g[-1] / 10 ** decades
    settled = abs(r[-1]) < 0.1 * d
    if sel.sum() < 3 or np.any(r[sel] == 0) or np.any(np.sign(r[sel]) != np.sign(r[-1])):
        return 0.0, settled and abs(r[-1]) < 1e-6
    slope = np.polyfit(np.log(g[sel]), np.log(np.abs(r[sel])), 1)[0]
    q = -slope
    if q <= 0.05:
        return 0.0, False
    return r[-1] / q, settled


def _prepare_curve(ch, cfg, gammaMax, curve, per_decade):
    noise = _gaussian_noise(ch)
    if not ch.signal.is_continuous:
        raise ChannelError("the MMSE entropy representation is defined for densities only")
    if curve is None:
        curve = mmse_curve(ch, log_grid(1e-4, gammaMax, per_decade), cfg)
    return noise, curve


def entropy_via_mmse(ch: ChannelModel, cfg: QuadratureConfig | None = None,
                     gammaMax: float = 1e4, curve: MmseCurve | None = None,
                     per_decade: int = 40) -> float:
    """``h(X) = h(N) + 1/2 int_0^inf [M(gamma) - d 1(gamma > 1)/gamma] dgamma``."""
    cfg = cfg or QuadratureConfig()
    noise, curve = _prepare_curve(ch, cfg, gammaMax, curve, per_decade)
    d = ch.dim
    g, M = curve.gammaGrid, curve.M
    head = g[0] * 0.5 * (mmse_at_zero(ch) + M[0])
    body = _simpson_log(g, M, right=M - d / g)
    tail, settled = _tail(curve, d)
    if not settled:
        warnings.warn(f"gamma*M = {g[-1] * M[-1]:.4g} has not settled near {d} "
                      f"at gamma = {g[-1]:g}", MmseTailWarning, stacklevel=2)
    return noise.entropy() + 0.5 * (head + body + tail)


def entropy_via_mmse_centered(ch: ChannelModel, cfg: QuadratureConfig | None = None,
                              gammaMax: float = 1e4, curve: MmseCurve | None = None,
                              per_decade: int = 40) -> float:
    """``h(X) = 1/2 ln(2 pi e s2) - 1/2 int_0^inf [s2/(1 + gamma s2) - M] dgamma``,
    ``s2 = Var X`` in noise units (scalar channels only)."""
    cfg = cfg or QuadratureConfig()
    if ch.dim != 1:
        raise ChannelError("the centred representation is stated for d = 1 only")
    noise, curve = _prepare_curve(ch, cfg, gammaMax, curve, per_decade)
    s2 = mmse_at_zero(ch)
    g, M = curve.gammaGrid, curve.M
    gap = s2 / (1.0 + g * s2) - M
    head = g[0] * 0.5 * gap[0]              # the gap vanishes at gamma = 0
    body = _simpson_log(g, gap)
    tail_m, settled = _tail(curve, 1)
    if not settled:
        warnings.warn(f"gamma*M = {g[-1] * M[-1]:.4g} has not settled near 1 "
                      f"at gamma = {g[-1]:g}", MmseTailWarning, stacklevel=2)
    # int_{gmax}^inf [s2/(1+g s2) - 1/g] dg = -ln(1 + 1/(gmax s2))
    tail = -math.log1p(1.0 / (g[-1] * s2)) - tail_m
    var = float(noise.cov()[0, 0])
    return 0.5 * math.log(2 * math.pi * math.e * s2 * var) - 0.5 * (head + body + tail)

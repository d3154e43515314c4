"""The additive channel ``Y = sqrt(gamma) X + U``.

Entropies of the output and the conditional entropy of the input are
computed by nested adaptive quadrature.  For ``d == 1`` the inner integral
over the signal is done for many output points at once by
:func:`~epi_lab.quadrature.integrate_batch`; each inner integral gets its own
limits (the signal support intersected with the back-projected noise
support) and break points, so jumps and kinks of either law are never
straddled by a panel.

Higher-dimensional laws are handled by factorisation when both signal and
noise are products over axes; otherwise output entropies fall back to Monte
Carlo with deterministically evaluated inner integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import distributions as D
from .quadrature import (
    QuadratureConfig,
    QuadratureError,
    integrate,
    integrate_batch,
    integrate_mc,
)

#: relative tolerance handed to inner integrals, as a multiple of the outer one
INNER_FACTOR = 10.0


class ChannelError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ChannelModel:
    signal: D.MixedDistribution
    noise: D.DensityFamily

    def __post_init__(self):
        if not isinstance(self.noise, D.DensityFamily):
            raise ChannelError("noise must be a pure density")
        if self.signal.dim != self.noise.dim:
            raise ChannelError("signal and noise dimensions differ")

    @property
    def dim(self):
        return self.signal.dim

    def factors(self):
        """Per-axis 1-D channels when signal and noise are both products."""
        if self.dim == 1 or self.signal.atoms:
            return None
        sm = self.signal.density.marginals()
        nm = self.noise.marginals()
        if sm is None or nm is None:
            return None
        return [ChannelModel(D.MixedDistribution.from_density(s), n) for s, n in zip(sm, nm)]


@dataclass
class EntropyBreakdown:
    hX: float
    hY: float
    hXY: float
    hXgivenY: float
    I: float
    gamma: float
    method: str
    errorEstimate: float
    #: I from the direct conditional-entropy route (h(X) - h(X|Y))
    I_direct: float | None = None

    def as_dict(self):
        return dict(self.__dict__)


# ---------------------------------------------------------------------------
# one-dimensional convolution machinery
# ---------------------------------------------------------------------------

class _Conv1D:
    """Integrals over the signal law for a fixed 1-D channel and SNR."""

    def __init__(self, ch: ChannelModel, gamma: float, cfg: QuadratureConfig):
        if gamma < 0:
            raise ChannelError("gamma must be nonnegative")
        self.ch = ch
        self.s = math.sqrt(gamma)
        self.cfg = cfg
        self.inner = cfg.tighter(INNER_FACTOR)
        sig = ch.signal
        self.noise = ch.noise
        self.nbox = ch.noise.support(radius=cfg.truncationRadius)[0]
        self.nbreaks = np.asarray(ch.noise.breakpoints()[0], dtype=float)
        self.locs = sig.locations[:, 0] if sig.atoms else np.zeros(0)
        self.masses = sig.masses if sig.atoms else np.zeros(0)
        self.dens = sig.density
        self.w = sig.density_mass
        if self.dens is not None:
            self.xbox = self.dens.support(radius=cfg.truncationRadius)[0]
            self.xbreaks = np.asarray(self.dens.breakpoints()[0], dtype=float)

    # -- signal-side inner integrals -----------------------------------------
    def _limits(self, y):
        s = self.s
        lo = np.full(y.shape, self.xbox[0])
        hi = np.full(y.shape, self.xbox[1])
        if s > 0:
            lo = np.maximum(lo, (y - self.nbox[1]) / s)
            hi = np.minimum(hi, (y - self.nbox[0]) / s)
        hi = np.maximum(hi, lo)
        pts = [np.broadcast_to(self.xbreaks, (y.size, self.xbreaks.size))]
        if s > 0 and self.nbreaks.size:
            pts.append((y[:, None] - self.nbreaks[None, :]) / s)
        return lo, hi, np.concatenate(pts, axis=1)

    def _noise_pdf(self, u):
        return self.noise.pdf(u)

    def density(self, y, return_error=False):
        """Output density ``f_Y`` at the points ``y``."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        out = np.zeros(y.shape)
        err = np.zeros(y.shape)
        s = self.s
        for x0, p in zip(self.locs, self.masses):
            out += p * self._noise_pdf(y - s * x0)
        if self.dens is not None:
            lo, hi, pts = self._limits(y)

            def f(x, idx):
                return self.dens.pdf(x) * self._noise_pdf(y[idx] - s * x)

            res = integrate_batch(f, lo, hi, self.inner, points=pts)
            _require(res, "y", y)
            out += self.w * res.value
            err += self.w * res.error
        return (out, err) if return_error else out

    def moments(self, y):
        """Return ``(f_Y, E[X|y] f_Y, Var(X|y) f_Y)`` at ``y`` (vectorised)."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        s = self.s
        n = y.size
        # centre near the posterior mean to limit cancellation
        if self.dens is not None:
            lo_c, hi_c = self.xbox
        else:
            lo_c, hi_c = self.locs.min(), self.locs.max()
        c = np.clip(y / s, lo_c, hi_c) if s > 0 else np.full(n, 0.5 * (lo_c + hi_c))
        m = np.zeros((n, 3))
        for x0, p in zip(self.locs, self.masses):
            k = p * self._noise_pdf(y - s * x0)
            dx = x0 - c
            m += np.stack([k, k * dx, k * dx * dx], axis=1)
        if self.dens is not None:
            lo, hi, pts = self._limits(y)

            def f(x, idx):
                k = self.dens.pdf(x) * self._noise_pdf(y[idx] - s * x)
                dx = x - c[idx]
                return np.stack([k, k * dx, k * dx * dx], axis=1)

            res = integrate_batch(f, lo, hi, self.inner, points=pts)
            _require(res, "y", y)
            m += self.w * res.value
        m0, m1, m2 = m.T
        safe = m0 > 0
        mean_f = np.where(safe, m1 / np.where(safe, m0, 1.0), 0.0)
        var_f = np.where(safe, np.maximum(m2 - m1 * mean_f, 0.0), 0.0)
        return m0, c * m0 + m1, var_f

    # -- output-side domain ----------------------------------------------------
    def y_domain(self):
        s = self.s
        nlo, nhi = self.nbox
        ends = []
        splits = []
        if self.dens is not None:
            ends += [s * self.xbox[0] + nlo, s * self.xbox[1] + nhi]
            for bx in self.xbreaks:
                splits.extend(s * bx + self.nbreaks)
                splits.extend([s * bx + nlo, s * bx + nhi])
        for x0 in self.locs:
            ends += [s * x0 + nlo, s * x0 + nhi]
            splits.extend(s * x0 + self.nbreaks)
        lo, hi = min(ends), max(ends)
        splits = sorted({p for p in splits + ends if lo < p < hi})
        return (lo, hi), splits

    def feature_width(self):
        return float(self.noise.scale_length()[0])


def _require(res, where, at):
    """Raise if any inner integral of a batch failed, naming the first point."""
    bad = ~np.asarray(res.converged)
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise QuadratureError(f"inner integral did not converge ({where} = {at[k]:.6g})")


def _check_gamma(gamma):
    if not gamma > 0:
        raise ChannelError("gamma must be positive")


def output_density(ch: ChannelModel, gamma: float, y, cfg: QuadratureConfig | None = None):
    """Marginal density of ``Y = sqrt(gamma) X + U`` at ``y``.

    ``gamma = 0`` is accepted and gives the noise density.
    """
    cfg = cfg or QuadratureConfig()
    if gamma < 0:
        raise ChannelError("gamma must be nonnegative")
    if ch.dim == 1:
        y = np.asarray(y, dtype=float)
        out = _Conv1D(ch, gamma, cfg).density(y.ravel())
        return out.reshape(y.shape) if y.ndim else float(out[0])
    pts = np.atleast_2d(np.asarray(y, dtype=float))
    facs = ch.factors()
    if facs is not None:
        out = np.ones(pts.shape[0])
        for i, fc in enumerate(facs):
            out *= _Conv1D(fc, gamma, cfg).density(pts[:, i])
    else:
        out = _density_nd(ch, gamma, pts, cfg)
    return out if np.ndim(y) > 1 else float(out[0])


def _density_nd(ch, gamma, pts, cfg, chunk=256):
    """Output density in d > 1 by tensor quadrature over the signal density."""
    s = math.sqrt(gamma)
    sig = ch.signal
    out = np.zeros(pts.shape[0])
    for loc, p in zip(sig.locations, sig.masses):
        out += p * ch.noise.pdf(pts - s * loc)
    if sig.density is None:
        return out
    box = sig.density.support(radius=cfg.truncationRadius)
    inner = cfg.tighter(INNER_FACTOR)
    for start in range(0, pts.shape[0], chunk):
        ys = pts[start:start + chunk]

        def f(x):
            fx = sig.density.pdf(x)
            return fx[:, None] * ch.noise.pdf((ys[None, :, :] - s * x[:, None, :]).reshape(-1, ch.dim)
                                             ).reshape(x.shape[0], ys.shape[0])

        res = integrate(f, box, inner, points=sig.density.breakpoints())
        out[start:start + chunk] += sig.density_mass * np.atleast_1d(res.value)
    return out


# ---------------------------------------------------------------------------
# entropies
# ---------------------------------------------------------------------------

def _neg_f_log_f(f):
    pos = f > 0
    return np.where(pos, -f * np.log(np.where(pos, f, 1.0)), 0.0)


def output_entropy(ch: ChannelModel, gamma: float, cfg: QuadratureConfig | None = None):
    """``h(Y)`` and an error estimate."""
    cfg = cfg or QuadratureConfig()
    _check_gamma(gamma)
    if ch.dim == 1:
        conv = _Conv1D(ch, gamma, cfg)
        (lo, hi), splits = conv.y_domain()
        res = integrate(lambda y: _neg_f_log_f(conv.density(y)), (lo, hi), cfg, points=splits,
                        min_width=conv.feature_width())
        if not res.converged:
            raise QuadratureError(f"output entropy did not converge at gamma={gamma:g}")
        val = float(res.value)
        err = float(res.errorEstimate) + conv.inner.relTol * (1.0 + abs(val))
        return val, err
    facs = ch.factors()
    if facs is not None:
        parts = [output_entropy(fc, gamma, cfg) for fc in facs]
        return sum(p[0] for p in parts), sum(p[1] for p in parts)
    return _output_entropy_mc(ch, gamma, cfg)


def _output_entropy_mc(ch, gamma, cfg):
    s = math.sqrt(gamma)
    sig = D.sampler(ch.signal)

    def draw(rng, n):
        return s * np.atleast_2d(sig.sample(rng, n).reshape(n, -1)) + ch.noise._sample(rng, n)

    res = integrate_mc(lambda yy: -np.log(_density_nd(ch, gamma, yy, cfg)), draw, cfg)
    return res.value, 3.0 * res.errorEstimate


def noise_entropy(noise: D.DensityFamily, cfg: QuadratureConfig | None = None):
    h = noise.entropy()
    if h is not None:
        return h, 0.0
    return D.density_entropy(noise, cfg)


def scaled_noise_entropy(noise, gamma, cfg=None):
    """``h(U / sqrt(gamma)) = h(U) - (d/2) ln gamma``."""
    h, err = noise_entropy(noise, cfg)
    return h - 0.5 * noise.dim * math.log(gamma), err


# ---------------------------------------------------------------------------
# conditional entropy of the input given the output
# ---------------------------------------------------------------------------

def _expected_log_output(conv: _Conv1D, cfg, density_part: bool):
    """``E ln f_Y(sqrt(gamma) X + U)`` over the density part of X (weighted by
    ``f_X``) minus ``E ln f_X(X)`` and ``E ln f_U(U)``: the double integral
    ``int f_X(x) int f_U(u) ln[f_Y(u + s x) / (f_X(x) f_U(u))] du dx``.
    """
    s = conv.s
    noise = conv.noise
    (ylo, yhi), ysplits = conv.y_domain()
    ysplits = np.asarray(ysplits + [ylo, yhi], dtype=float)
    nlo, nhi = conv.nbox
    inner = conv.inner

    def inner_integral(xs, log_gx):
        lo = np.full(xs.shape, nlo)
        hi = np.full(xs.shape, nhi)
        pts = np.concatenate([np.broadcast_to(conv.nbreaks, (xs.size, conv.nbreaks.size)),
                              ysplits[None, :] - s * xs[:, None]], axis=1)

        def f(u, idx):
            lu = noise.logpdf(u)
            fin = np.isfinite(lu)
            fy = conv.density(u + s * xs[idx])
            with np.errstate(divide="ignore"):
                ratio = np.log(fy) - log_gx[idx] - np.where(fin, lu, 0.0)
            return np.where(fin & (fy > 0), np.exp(np.where(fin, lu, -np.inf)) * ratio, 0.0)

        res = integrate_batch(f, lo, hi, inner, points=pts)
        _require(res, "x", xs)
        return res

    total, err = 0.0, 0.0
    for x0, p in zip(conv.locs, conv.masses):
        r = inner_integral(np.array([x0]), np.array([math.log(p)]))
        total += p * r.value[0]
        err += p * r.error[0]
    if density_part and conv.dens is not None:
        dens, w = conv.dens, conv.w

        def outer(xs):
            lfx = dens.logpdf(xs)
            fin = np.isfinite(lfx)
            vals = np.zeros(xs.shape)
            if fin.any():
                r = inner_integral(xs[fin], lfx[fin] + math.log(w))
                vals[fin] = w * np.exp(lfx[fin]) * r.value
            return vals

        res = integrate(outer, conv.xbox, cfg, points=conv.xbreaks)
        total += float(res.value)
        err += float(res.errorEstimate)
    return total, err + inner.relTol * (1.0 + abs(total))


def conditional_entropy_continuous(ch: ChannelModel, gamma: float,
                                   cfg: QuadratureConfig | None = None, return_error=False):
    """``h(X|Y)`` for a signal with a density, via the normalised-ratio
    integral ``I(gamma) = E ln[J(X, U) / f_X(X)]`` plus ``h(U/sqrt(gamma))``,
    where ``J(x, y) = int f_X(x + (y - v)/sqrt(gamma)) f_U(v) dv``.
    """
    cfg = cfg or QuadratureConfig()
    _check_gamma(gamma)
    if not ch.signal.is_continuous:
        raise ChannelError("conditional_entropy_continuous needs a signal without atoms")
    if ch.dim != 1:
        return _conditional_entropy_nd(ch, gamma, cfg, return_error)
    conv = _Conv1D(ch, gamma, cfg)
    # E ln[f_Y(sX+U) / (f_X f_U)] = I(gamma) + h(U/sqrt(gamma)), I(gamma) = E ln[J/f_X]
    val, err = _expected_log_output(conv, cfg, density_part=True)
    return (val, err) if return_error else val


def conditional_entropy_discrete(ch: ChannelModel, gamma: float,
                                 cfg: QuadratureConfig | None = None, return_error=False):
    """``h(X|Y)`` for a finitely supported signal, atom by atom:

    ``sum_i p_i int f_U(y) ln[1 + sum_{j != i} (p_j/p_i) f_U(y - (x_j - x_i) sqrt(gamma)) / f_U(y)] dy``.
    """
    cfg = cfg or QuadratureConfig()
    _check_gamma(gamma)
    sig = ch.signal
    if not sig.is_discrete:
        raise ChannelError("conditional_entropy_discrete needs a purely atomic signal")
    locs, p = sig.locations, sig.masses
    if len(p) == 1:
        return (0.0, 0.0) if return_error else 0.0
    s = math.sqrt(gamma)
    noise = ch.noise
    box = noise.support(radius=cfg.truncationRadius)
    logp = np.log(p)
    total, err = 0.0, 0.0
    for i in range(len(p)):
        others = [j for j in range(len(p)) if j != i]
        shifts = (locs[others] - locs[i]) * s

        def f(y, i=i, others=others, shifts=shifts):
            pts = y.reshape(-1, ch.dim)
            lu = noise.logpdf(pts)
            fin = np.isfinite(lu)
            terms = np.stack([logp[j] - logp[i] + noise.logpdf(pts - sh)
                              for j, sh in zip(others, shifts)])
            lsum = special.logsumexp(terms, axis=0) - np.where(fin, lu, 0.0)
            val = np.logaddexp(0.0, lsum)
            return np.where(fin, np.exp(np.where(fin, lu, -np.inf)) * val, 0.0)

        if ch.dim == 1:
            splits = sorted(set(noise.breakpoints()[0]) | {b + sh for b in noise.breakpoints()[0]
                                                          for sh in shifts[:, 0]})
            res = integrate(f, box[0], cfg, points=splits, min_width=float(noise.scale_length()[0]))
        elif ch.dim <= 3:
            bps = noise.breakpoints()
            pts_ax = [sorted(set(bps[k]) | {b + sh[k] for b in bps[k] for sh in shifts})
                      for k in range(ch.dim)]
            res = integrate(f, box, cfg, points=pts_ax)
        else:
            res = integrate_mc(f, noise, cfg)
        total += p[i] * float(res.value)
        err += p[i] * float(res.errorEstimate)
    return (total, err) if return_error else total


def conditional_entropy_mixed(ch: ChannelModel, gamma: float,
                              cfg: QuadratureConfig | None = None, return_error=False):
    """``h(X|Y)`` for a general signal via the PMF/reference-measure form

    ``int g_X(x) int f_U(y) ln[f_Y(y + x sqrt(gamma)) / (g_X(x) f_U(y))] dy m_X(dx)``.

    Purely continuous and purely atomic signals are delegated to the
    specialised routines.
    """
    cfg = cfg or QuadratureConfig()
    _check_gamma(gamma)
    if ch.signal.is_continuous:
        return conditional_entropy_continuous(ch, gamma, cfg, return_error)
    if ch.signal.is_discrete:
        return conditional_entropy_discrete(ch, gamma, cfg, return_error)
    if ch.dim != 1:
        raise ChannelError("mixed signals are supported for d = 1 only")
    conv = _Conv1D(ch, gamma, cfg)
    elog, err = _expected_log_output(conv, cfg, density_part=True)
    return (elog, err) if return_error else elog


def _conditional_entropy_nd(ch, gamma, cfg, return_error):
    facs = ch.factors()
    if facs is None:
        raise ChannelError("d > 1 continuous signals must factor over axes")
    parts = [conditional_entropy_continuous(fc, gamma, cfg, return_error=True) for fc in facs]
    val, err = sum(p[0] for p in parts), sum(p[1] for p in parts)
    return (val, err) if return_error else val


def conditional_entropy(ch, gamma, cfg=None, return_error=False):
    """Dispatch on the signal type."""
    return conditional_entropy_mixed(ch, gamma, cfg, return_error)


# ---------------------------------------------------------------------------
# mutual information
# ---------------------------------------------------------------------------

def signal_entropy(ch: ChannelModel, cfg=None):
    return D.entropy(ch.signal, cfg)


def mutual_information(ch: ChannelModel, gamma: float, cfg: QuadratureConfig | None = None,
                       direct: bool = True) -> EntropyBreakdown:
    """Entropy breakdown of the channel at SNR ``gamma``.

    ``h(Y|X) = h(U)`` by translation invariance, so ``h(X, Y) = h(X) + h(U)``
    and ``I = h(Y) - h(U)``.  With ``direct=True`` the conditional entropy is
    also integrated directly and ``I_direct = h(X) - h(X|Y)`` is reported;
    otherwise ``hXgivenY`` is derived from ``I``.
    """
    cfg = cfg or QuadratureConfig()
    _check_gamma(gamma)
    hX, eX = signal_entropy(ch, cfg)
    hU, eU = noise_entropy(ch.noise, cfg)
    hY, eY = output_entropy(ch, gamma, cfg)
    hXY = hX + hU
    I = hY - hU
    err = eY + eU
    method = "quadrature" if (ch.dim == 1 or ch.factors() is not None) else "monte_carlo"
    if direct:
        hXgY, eC = conditional_entropy(ch, gamma, cfg, return_error=True)
        I_direct = hX - hXgY
        err = max(err, eC + eX)
    else:
        hXgY = hX - I
        I_direct = None
    return EntropyBreakdown(hX=hX, hY=hY, hXY=hXY, hXgivenY=hXgY, I=I, gamma=gamma,
                            method=method, errorEstimate=err + eX, I_direct=I_direct)


# ---------------------------------------------------------------------------
# sums of independent densities
# ---------------------------------------------------------------------------

def _cheb_fit(values, deg):
    """Chebyshev coefficients from values at first-kind Chebyshev points."""
    x = np.polynomial.chebyshev.chebpts1(deg + 1)
    v = np.polynomial.chebyshev.chebvander(x, deg)
    c = v.T @ values
    c[0] /= deg + 1
    c[1:] /= 0.5 * (deg + 1)
    return c


def sum_density(X1: D.DensityFamily, c1: float, X2: D.DensityFamily, c2: float,
                cfg: QuadratureConfig | None = None, deg: int = 40, tol: float = 1e-13):
    """Density of ``c1 X1 + c2 X2`` (independent, d = 1) as a tabulated law.

    Evaluated by convolution quadrature at Chebyshev nodes on each smooth
    piece (between sums of break points); pieces are bisected until the
    trailing Chebyshev coefficients fall below ``tol`` times the peak.
    """
    cfg = cfg or QuadratureConfig()
    if X1.dim != 1 or X2.dim != 1:
        raise ChannelError("sum_density supports d = 1")
    A, B = X1.scaled(c1), X2.scaled(c2)
    ch = ChannelModel(D.MixedDistribution.from_density(A), B)
    conv = _Conv1D(ch, 1.0, cfg)
    (lo, hi), splits = conv.y_domain()
    edges = [lo] + list(splits) + [hi]
    todo = [(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]
    cheb_x = np.polynomial.chebyshev.chebpts1(deg + 1)
    pieces = []
    peak = None
    while todo:
        nodes = np.concatenate([0.5 * (a + b) + 0.5 * (b - a) * cheb_x for a, b in todo])
        vals = conv.density(nodes).reshape(len(todo), deg + 1)
        if peak is None:
            peak = max(vals.max(), 1e-300)
        nxt = []
        for (a, b), v in zip(todo, vals):
            coef = _cheb_fit(v, deg)
            tail = np.max(np.abs(coef[-4:]))
            if tail <= tol * peak or (b - a) < 1e-9 * (hi - lo):
                pieces.append(np.polynomial.Chebyshev(coef, domain=[a, b]))
            else:
                m = 0.5 * (a + b)
                nxt += [(a, m), (m, b)]
        todo = nxt
    mean = c1 * X1.mean() + c2 * X2.mean()
    var = c1 ** 2 * np.atleast_2d(X1.cov()) + c2 ** 2 * np.atleast_2d(X2.cov())

    def sampler(rng, n):
        return c1 * X1._sample(rng, n)[:, 0] + c2 * X2._sample(rng, n)[:, 0]

    scale = max(abs(c1) * X1.scale_length()[0], abs(c2) * X2.scale_length()[0])
    return D.TabulatedDensity(pieces, moments=(mean, var), sampler=sampler,
                              smooth=X1.smooth or X2.smooth, scale=scale)

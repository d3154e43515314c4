"""Adaptive Gauss-Kronrod quadrature on boxes, batched 1-D integration and a
Monte Carlo fallback.

All deterministic rules use the 7-point Gauss / 15-point Kronrod pair.  Panels
are refined globally: every sweep splits the panels carrying the largest share
of the error, evaluating all new nodes in one vectorised call.  Integrands may
be vector valued; convergence is then required component-wise.

Integrand conventions:

* ``d == 1``: ``f(x)`` receives a 1-D array of nodes.
* ``d > 1``: ``f(x)`` receives an ``(n, d)`` array.

In both cases ``f`` returns ``(n,)`` or ``(n, m)`` values.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

log = logging.getLogger(__name__)

# Kronrod abscissae on [0, 1) (descending), QUADPACK qk15.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS = np.zeros(15)
GAUSS[1:7:2] = _WG[:3]
GAUSS[7] = _WG[3]
GAUSS[9:15:2] = _WG[2::-1]

_EPS = np.finfo(float).eps
SINGULARITY_POLICIES = ("none", "corner_log", "user_supplied_split_points")


class QuadratureError(RuntimeError):
    """Raised when an integrand cannot be integrated as requested."""


@dataclass(frozen=True)
class QuadratureConfig:
    absTol: float = 1e-12
    relTol: float = 1e-10
    maxSubdivisions: int = 2000
    truncationRadius: float = 8.0
    singularityPolicy: str = "none"
    mcSamples: int = 100_000
    mcSeed: int = 0

    def __post_init__(self):
        if not self.absTol > 0 or not self.relTol > 0:
            raise ValueError("absTol and relTol must be positive")
        if self.maxSubdivisions < 1:
            raise ValueError("maxSubdivisions must be >= 1")
        if self.mcSamples < 1000:
            raise ValueError("mcSamples must be >= 1000")
        if self.truncationRadius <= 0:
            raise ValueError("truncationRadius must be positive")
        if self.singularityPolicy not in SINGULARITY_POLICIES:
            raise ValueError(f"unknown singularityPolicy {self.singularityPolicy!r}")

    def tighter(self, factor: float = 10.0) -> "QuadratureConfig":
        """Config with both tolerances divided by ``factor`` (for inner integrals)."""
        return replace(self, absTol=self.absTol / factor, relTol=self.relTol / factor)

    @classmethod
    def from_dict(cls, data: dict) -> "QuadratureConfig":
        known = {k: data[k] for k in cls.__dataclass_fields__ if k in data}
        unknown = set(data) - set(known)
        if unknown:
            raise ValueError(f"unknown quadrature fields: {sorted(unknown)}")
        return cls(**known)


@dataclass
class QuadratureResult:
    value: float | np.ndarray
    errorEstimate: float | np.ndarray
    subdivisionsUsed: int = 0
    converged: bool = True
    method: str = field(default="quadrature")


class BatchResult(NamedTuple):
    value: np.ndarray
    error: np.ndarray
    converged: np.ndarray
    subdivisions: np.ndarray


def _check_finite(values, points):
    bad = ~np.isfinite(values)
    if bad.any():
        idx = np.argwhere(bad)[0][0]
        raise QuadratureError(f"non-finite integrand value at point {np.asarray(points)[idx]!r}")


def _roundoff_floor(abs_integral):
    return 50.0 * _EPS * abs_integral


# ---------------------------------------------------------------------------
# batched one-dimensional integration
# ---------------------------------------------------------------------------

def integrate_batch(f, a, b, cfg: QuadratureConfig | None = None, points=None,
                    min_width=None):
    """Integrate many 1-D integrals at once.

    Integral ``i`` runs over ``[a[i], b[i]]`` and may carry its own break
    points (row ``i`` of ``points``; NaN entries are ignored).  ``f(x, idx)``
    gets the flat node array and the id of the integral each node belongs to.

    ``min_width`` optionally pre-splits each integral into panels no wider
    than the given value (scalar or per-integral), so narrow features of the
    integrand cannot fall between the nodes of the first sweep.

    Returns a :class:`BatchResult`; values have shape ``(B,)`` or ``(B, m)``.
    """
    cfg = cfg or QuadratureConfig()
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    nb = a.size
    if points is None:
        edges = np.stack([a, b], axis=1)
    else:
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = np.broadcast_to(pts, (nb, pts.size))
        inside = (pts > a[:, None]) & (pts < b[:, None])
        pts = np.where(inside, pts, np.nan)
        edges = np.concatenate([a[:, None], pts, b[:, None]], axis=1)
        edges = np.sort(edges, axis=1)  # NaNs sort last
    lo = edges[:, :-1]
    hi = edges[:, 1:]
    ok = np.isfinite(lo) & np.isfinite(hi) & (hi > lo)
    pid = np.broadcast_to(np.arange(nb)[:, None], lo.shape)[ok]
    plo, phi = lo[ok], hi[ok]
    if min_width is not None:
        mw = np.broadcast_to(np.asarray(min_width, dtype=float), (nb,))[pid]
        nsplit = np.maximum(1, np.ceil((phi - plo) / mw).astype(int))
        nsplit = np.minimum(nsplit, max(1, cfg.maxSubdivisions // 4))
        rep = np.repeat(np.arange(plo.size), nsplit)
        k = np.arange(rep.size) - np.repeat(np.cumsum(nsplit) - nsplit, nsplit)
        w = (phi - plo)[rep] / nsplit[rep]
        plo, phi, pid = plo[rep] + k * w, plo[rep] + (k + 1) * w, pid[rep]

    def evaluate(lo_, hi_, id_):
        half = 0.5 * (hi_ - lo_)
        mid = 0.5 * (hi_ + lo_)
        x = mid[:, None] + half[:, None] * NODES[None, :]
        ids = np.repeat(id_, 15)
        vals = np.asarray(f(x.ravel(), ids), dtype=float)
        _check_finite(vals, x.ravel())
        vals = vals.reshape(lo_.size, 15, -1)
        k = np.einsum("j,pjm->pm", KRONROD, vals) * half[:, None]
        g = np.einsum("j,pjm->pm", GAUSS, vals) * half[:, None]
        absk = np.einsum("j,pjm->pm", KRONROD, np.abs(vals)) * np.abs(half)[:, None]
        err = np.maximum(np.abs(k - g), _roundoff_floor(absk))
        return k, err

    if plo.size == 0:
        return BatchResult(np.zeros(nb), np.zeros(nb), np.ones(nb, dtype=bool),
                           np.zeros(nb, dtype=int))
    pval, perr = evaluate(plo, phi, pid)
    m = pval.shape[1]
    nsub = np.zeros(nb, dtype=int)
    while True:
        tot = np.zeros((nb, m))
        terr = np.zeros((nb, m))
        np.add.at(tot, pid, pval)
        np.add.at(terr, pid, perr)
        tol = np.maximum(cfg.absTol, cfg.relTol * np.abs(tot))
        done = np.all(terr <= tol, axis=1)
        capped = nsub >= cfg.maxSubdivisions
        active = ~(done | capped)
        if not active.any():
            break
        score = np.max(perr / tol[pid], axis=1)
        score[~active[pid]] = -1.0
        best = np.full(nb, -1.0)
        np.maximum.at(best, pid, score)
        pick = (score >= 0.25 * best[pid]) & (score > 0)
        # keep each integral within its subdivision budget
        room = cfg.maxSubdivisions - nsub
        order = np.argsort(-score[pick], kind="stable")
        cand = np.flatnonzero(pick)[order]
        rank = np.zeros(cand.size, dtype=int)
        if cand.size:
            cid = pid[cand]
            srt = np.argsort(cid, kind="stable")
            cs = cid[srt]
            first = np.searchsorted(cs, cs)
            rank[srt] = np.arange(cs.size) - first
            cand = cand[rank < room[cid]]
        if cand.size == 0:
            break
        np.add.at(nsub, pid[cand], 1)
        keep = np.ones(plo.size, dtype=bool)
        keep[cand] = False
        mid = 0.5 * (plo[cand] + phi[cand])
        nlo = np.concatenate([plo[cand], mid])
        nhi = np.concatenate([mid, phi[cand]])
        nid = np.concatenate([pid[cand], pid[cand]])
        nval, nerr = evaluate(nlo, nhi, nid)
        plo = np.concatenate([plo[keep], nlo])
        phi = np.concatenate([phi[keep], nhi])
        pid = np.concatenate([pid[keep], nid])
        pval = np.concatenate([pval[keep], nval])
        perr = np.concatenate([perr[keep], nerr])
    if m == 1:
        tot, terr = tot[:, 0], terr[:, 0]
    return BatchResult(tot, terr, done, nsub)


# ---------------------------------------------------------------------------
# tensor-product integration on boxes, d <= 3
# ---------------------------------------------------------------------------

def _as_box(domain):
    box = np.asarray(domain, dtype=float)
    if box.ndim == 1:
        box = box.reshape(1, 2)
    if box.shape[1] != 2 or np.any(box[:, 1] < box[:, 0]):
        raise ValueError(f"invalid integration box {domain!r}")
    return box


def _axis_points(points, d):
    if points is None:
        return [[] for _ in range(d)]
    if d == 1:
        flat = np.atleast_1d(np.asarray(points, dtype=float)).ravel()
        return [list(flat)]
    if len(points) != d:
        raise ValueError("points must give one list of split points per axis")
    return [list(np.atleast_1d(np.asarray(p, dtype=float))) for p in points]


def _graded_points(box, corners, ratio=0.2, levels=8):
    """Geometric split points accumulating at each declared corner."""
    out = [[] for _ in range(box.shape[0])]
    for c in corners:
        c = np.atleast_1d(np.asarray(c, dtype=float))
        for i, (lo, hi) in enumerate(box):
            span = hi - lo
            for k in range(1, levels + 1):
                out[i].append(c[i] + span * ratio ** k)
                out[i].append(c[i] - span * ratio ** k)
    return out


def integrate(f, domain, cfg: QuadratureConfig | None = None, points=None,
              corners=None, min_width=None) -> QuadratureResult:
    """Adaptive integral of ``f`` over a box with at most 3 axes.

    ``points`` are per-axis break points (a flat list when d == 1);
    ``corners`` are points where the integrand may blow up logarithmically.
    With the ``corner_log`` policy the initial mesh is graded toward them
    (the lower corner of the box if none is given).  ``min_width`` (d == 1)
    pre-splits the interval into panels no wider than that.
    """
    cfg = cfg or QuadratureConfig()
    box = _as_box(domain)
    d = box.shape[0]
    if d > 3:
        raise QuadratureError("deterministic quadrature is limited to d <= 3; use integrate_mc")
    axis_pts = _axis_points(points, d)
    if cfg.singularityPolicy == "corner_log":
        cs = corners if corners is not None else [box[:, 0]]
        for i, extra in enumerate(_graded_points(box, cs)):
            axis_pts[i] = axis_pts[i] + extra

    if d == 1:
        p = np.asarray(axis_pts[0], dtype=float) if axis_pts[0] else None
        res = integrate_batch(lambda x, _i: f(x), box[:1, 0], box[:1, 1], cfg,
                              points=None if p is None else p[None, :], min_width=min_width)
        return QuadratureResult(res.value[0], res.error[0], int(res.subdivisions[0]),
                                bool(res.converged[0]))
    return _integrate_tensor(f, box, cfg, axis_pts)


def _integrate_tensor(f, box, cfg, axis_pts):
    d = box.shape[0]
    grids = []
    for i in range(d):
        lo, hi = box[i]
        e = sorted({lo, hi, *[p for p in axis_pts[i] if lo < p < hi]})
        grids.append(np.asarray(e))
    mesh = np.meshgrid(*[np.arange(len(g) - 1) for g in grids], indexing="ij")
    idx = np.stack([m.ravel() for m in mesh], axis=1)
    plo = np.stack([grids[i][idx[:, i]] for i in range(d)], axis=1)
    phi = np.stack([grids[i][idx[:, i] + 1] for i in range(d)], axis=1)

    # weight tensors: full Kronrod, full Gauss, and Gauss along one axis only
    def outer(ws):
        t = ws[0]
        for w in ws[1:]:
            t = np.multiply.outer(t, w)
        return t.ravel()

    wk = outer([KRONROD] * d)
    wg = outer([GAUSS] * d)
    wax = [outer([GAUSS if j == i else KRONROD for j in range(d)]) for i in range(d)]
    grid_nodes = np.stack(np.meshgrid(*([NODES] * d), indexing="ij"), axis=-1).reshape(-1, d)

    def evaluate(lo_, hi_):
        half = 0.5 * (hi_ - lo_)
        mid = 0.5 * (hi_ + lo_)
        x = mid[:, None, :] + half[:, None, :] * grid_nodes[None, :, :]
        vals = np.asarray(f(x.reshape(-1, d)), dtype=float)
        _check_finite(vals, x.reshape(-1, d))
        vals = vals.reshape(lo_.shape[0], grid_nodes.shape[0], -1)
        jac = np.prod(half, axis=1)[:, None]
        k = np.einsum("j,pjm->pm", wk, vals) * jac
        g = np.einsum("j,pjm->pm", wg, vals) * jac
        absk = np.einsum("j,pjm->pm", wk, np.abs(vals)) * np.abs(jac)
        err = np.maximum(np.abs(k - g), _roundoff_floor(absk))
        axis_err = np.stack([np.max(np.abs(k - np.einsum("j,pjm->pm", w, vals) * jac), axis=1)
                             for w in wax], axis=1)
        return k, err, axis_err

    pval, perr, paxe = evaluate(plo, phi)
    nsub = 0
    converged = False
    while True:
        tot = pval.sum(axis=0)
        terr = perr.sum(axis=0)
        tol = np.maximum(cfg.absTol, cfg.relTol * np.abs(tot))
        if np.all(terr <= tol):
            converged = True
            break
        if nsub >= cfg.maxSubdivisions:
            break
        score = np.max(perr / tol, axis=1)
        cand = np.flatnonzero(score >= 0.25 * score.max())
        cand = cand[np.argsort(-score[cand], kind="stable")][: cfg.maxSubdivisions - nsub]
        nsub += cand.size
        ax = np.argmax(paxe[cand], axis=1)
        mid = 0.5 * (plo[cand, ax] + phi[cand, ax])
        lo1, hi1 = plo[cand].copy(), phi[cand].copy()
        lo2, hi2 = plo[cand].copy(), phi[cand].copy()
        hi1[np.arange(cand.size), ax] = mid
        lo2[np.arange(cand.size), ax] = mid
        nlo = np.concatenate([lo1, lo2])
        nhi = np.concatenate([hi1, hi2])
        nval, nerr, naxe = evaluate(nlo, nhi)
        keep = np.ones(plo.shape[0], dtype=bool)
        keep[cand] = False
        plo = np.concatenate([plo[keep], nlo])
        phi = np.concatenate([phi[keep], nhi])
        pval = np.concatenate([pval[keep], nval])
        perr = np.concatenate([perr[keep], nerr])
        paxe = np.concatenate([paxe[keep], naxe])
    if tot.size == 1:
        return QuadratureResult(float(tot[0]), float(terr[0]), nsub, converged)
    return QuadratureResult(tot, terr, nsub, converged)


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

def integrate_mc(g, sampler, cfg: QuadratureConfig | None = None) -> QuadratureResult:
    """Estimate ``E[g(Z)]`` from ``cfg.mcSamples`` draws of ``sampler``.

    ``sampler`` is either an object with ``sample(rng, n)`` or a callable
    ``(rng, n) -> samples``.  Non-finite values of ``g`` are dropped (with a
    warning); if none survive a :class:`QuadratureError` is raised.
    """
    cfg = cfg or QuadratureConfig()
    rng = np.random.default_rng(cfg.mcSeed)
    draw = sampler.sample if hasattr(sampler, "sample") else sampler
    z = draw(rng, cfg.mcSamples)
    vals = np.asarray(g(z), dtype=float)
    finite = np.isfinite(vals)
    if not finite.any():
        raise QuadratureError("all Monte Carlo samples produced non-finite integrand values")
    if not finite.all():
        log.warning("dropping %d non-finite Monte Carlo values", int((~finite).sum()))
        vals = vals[finite]
    n = vals.size
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return QuadratureResult(mean, se, 0, True, method="monte_carlo")


def truncate_support(dist, massTol: float = 1e-12):
    """Box holding at least ``1 - massTol`` of the density component's mass.

    ``dist`` is a MixedDistribution (or a bare density family).  Compact
    families return their exact support.
    """
    dens = getattr(dist, "density", dist)
    if dens is None:
        raise ValueError("distribution has no density component")
    return dens.support(mass_tol=massTol)

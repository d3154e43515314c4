"""The acceptance battery: thirteen numerical checks with fixed tolerances.

Each check returns a :class:`CriterionResult`; ``run_battery`` evaluates
them all (optionally in parallel) in a fixed order.  Nothing here depends on
wall-clock time, so the rendered table is reproducible byte for byte.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import distributions as D
from . import epi as E
from . import limits as L
from . import mmse as M
from .channel import ChannelModel, mutual_information
from .pool import pmap
from .quadrature import QuadratureConfig


@dataclass
class CriterionResult:
    id: int
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""


MD = D.MixedDistribution
N01 = D.Gaussian.scalar()


def _ch(x, noise=N01):
    return ChannelModel(x if isinstance(x, MD) else MD.from_density(x), noise)


def _fmt(x):
    return f"{x:.6g}"


def signals():
    """Signals used for the low-SNR check."""
    return {
        "gaussian": MD.from_density(N01),
        "uniform": MD.from_density(D.UniformBox(0.0, 1.0)),
        "pyramid": MD.from_density(D.Pyramid(1.0)),
        "bernoulli": MD.from_atoms([[0.0], [1.0]], [0.5, 0.5]),
        "mixed": MD.mixed([[0.0]], [0.5], D.UniformBox(2.0, 3.0)),
    }


def c1_gaussian_closed_forms(seed=0):
    worst = 0.0
    parts = []
    for var in (1.0, 2.0):
        ch = _ch(D.Gaussian.scalar(0.0, var))
        for g in (0.1, 1.0, 10.0):
            dI = abs(mutual_information(ch, g, direct=False).I - 0.5 * math.log1p(g * var))
            dM = abs(M.mmse(ch, g) - var / (1 + g * var))
            worst = max(worst, dI, dM)
    parts.append(f"max |dI|,|dM| over var in {{1,2}}, gamma in {{0.1,1,10}}")
    return CriterionResult(1, "Gaussian I and MMSE closed forms", worst < 1e-6, worst, 1e-6,
                           "; ".join(parts))


def c2_debruijn(seed=0):
    worst = 0.0
    for x in (N01, D.UniformBox(0.0, 1.0), D.Pyramid(1.0)):
        for g in (0.1, 0.5, 1.0, 5.0, 10.0):
            worst = max(worst, M.debruijn_residual(_ch(x), g, 1e-3))
    return CriterionResult(2, "de Bruijn identity residual", worst < 1e-3, worst, 1e-3,
                           "N(0,1), U[0,1], Pyramid(1,0) at 5 SNRs")


def c3_entropy_representation(seed=0):
    cfg = QuadratureConfig(absTol=1e-11, relTol=1e-8)
    worst_abs, worst_gap = 0.0, 0.0
    detail = []
    for name, x in (("N(0,1)", N01), ("N(0,4)", D.Gaussian.scalar(0.0, 4.0)),
                    ("U[0,1]", D.UniformBox(0.0, 1.0))):
        ch = _ch(x)
        curve = M.mmse_curve(ch, M.log_grid(), cfg)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", M.MmseTailWarning)
            h1 = M.entropy_via_mmse(ch, cfg, curve=curve)
            h2 = M.entropy_via_mmse_centered(ch, cfg, curve=curve)
        worst_abs = max(worst_abs, abs(h1 - x.entropy()))
        worst_gap = max(worst_gap, abs(h1 - h2))
        detail.append(f"{name}: {_fmt(h1)} vs {_fmt(x.entropy())}")
    ok = worst_abs < 1e-2 and worst_gap < 2e-2
    detail.append(f"max route gap {_fmt(worst_gap)}")
    return CriterionResult(3, "entropy from the MMSE curve", ok, worst_abs, 1e-2, "; ".join(detail))


def c4_high_continuous(seed=0):
    v = L.verify_highsnr_continuous(_ch(D.UniformBox(0.0, 1.0)))
    mono = bool(np.all(np.diff(v.residuals) < 0))
    ok = v.finalResidual < 1e-2 and mono
    return CriterionResult(4, "high-SNR limit, continuous signal", ok, v.finalResidual, 1e-2,
                           f"U[0,1] + N(0,1): residual {_fmt(v.finalResidual)} at gamma=1e4; "
                           f"strictly decreasing: {mono}")


def c5_high_discrete(seed=0):
    v = L.verify_highsnr_discrete(_ch(MD.from_atoms([[0.0], [1.0]], [0.5, 0.5])))
    return CriterionResult(5, "high-SNR limit, discrete signal", v.finalResidual < 1e-3,
                           v.finalResidual, 1e-3, "Bernoulli(1/2) + N(0,1) at gamma=1e4")


def c6_high_mixed(seed=0):
    v = L.verify_highsnr_mixed(_ch(signals()["mixed"]))
    ok = bool(np.all(np.diff(v.residuals) < 0))
    return CriterionResult(6, "high-SNR limit, mixed signal", ok, v.finalResidual, math.nan,
                           f"strictly decreasing: {ok}; final residual {_fmt(v.finalResidual)} "
                           "reported without tolerance")


def c7_low_snr(seed=0):
    worst = 0.0
    for sig in signals().values():
        worst = max(worst, L.verify_lowsnr(_ch(sig)).sweep[-1][1])
    return CriterionResult(7, "low-SNR limit", worst < 1e-3, worst, 1e-3,
                           "max I at gamma=1e-4 over five signals")


def rate_fits():
    U1, P1 = D.UniformBox(0.0, 1.0), D.Pyramid(1.0)
    U2 = D.UniformBox([0.0, 0.0], [1.0, 1.0])
    out = {}
    for key, (x, n, want, tol) in {
        "uniform_d1": (U1, U1, -0.5, 0.1),
        "pyramid_d1": (P1, P1, -0.5, 0.1),
        "uniform_d2": (U2, U2, -1.0, 0.15),
    }.items():
        v = L.verify_highsnr_continuous(_ch(x, n))
        e, _ = L.fit_rate(v)
        out[key] = (e, want, tol)
    return out


def c8_rates(seed=0):
    fits = rate_fits()
    ok = all(abs(e - w) <= t for e, w, t in fits.values())
    worst = max(abs(e - w) for e, w, _ in fits.values())
    detail = "; ".join(f"{k}: {_fmt(e)} (want {w} +/- {t})" for k, (e, w, t) in fits.items())
    return CriterionResult(8, "convergence-rate fits", ok, worst, 0.1, detail)


def c9_pyramid_J(seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for g, a in ((100.0, 0.5), (400.0, 1.0)):
        pts = L.sample_parallelograms(rng, 100, g, a)
        jc = L.pyramid_J_closed_form(pts[:, 0], pts[:, 1], g, a)
        jq = L.pyramid_J_quadrature(pts[:, 0], pts[:, 1], g, a)
        worst = max(worst, float(np.max(np.abs(jc - jq))))
    return CriterionResult(9, "pyramid J closed form vs quadrature", worst < 1e-8, worst, 1e-8,
                           "100 random points of P+ u P- at (100, 0.5) and (400, 1)")


def c10_domination(seed=0):
    grid = np.linspace(-3.0, 3.0, 21)
    worst = -math.inf
    ok = True
    for g in (1.0, 10.0, 100.0):
        c = L.domination_check(N01, N01, 1.0, 1.0, grid, grid, g)
        ok &= c.holds
        worst = max(worst, float(np.max(c.negative_part - c.bound)))
    return CriterionResult(10, "Gaussian domination bound", ok, worst, 0.0,
                           "max(negative part - bound) on 21x21 grid, gamma in {1,10,100}")


def c11_epi(seed=0):
    all_hold = True
    gauss_worst = 0.0
    uu = math.nan
    for name, (a, b) in E.battery().items():
        vs = E.check_all_forms(a, b)
        all_hold &= all(v.holds for v in vs)
        if name == "NxN":
            gauss_worst = max(abs(v.slack) for v in vs)
        if name == "UxU":
            uu = vs[0].slack
    uu_err = abs(uu - (math.e - 2.0))
    ok = all_hold and gauss_worst <= 1e-6 and uu_err < 1e-3
    return CriterionResult(11, "EPI battery, four forms", ok, gauss_worst, 1e-6,
                           f"all hold: {all_hold}; Gaussian |slack| {_fmt(gauss_worst)}; "
                           f"U+U power slack {_fmt(uu)} (e-2 = {_fmt(math.e - 2)})")


def c12_discrete_demo(seed=0):
    v = E.discrete_violation_demo()
    return CriterionResult(12, "discrete violation demo", not v.holds, v.slack, 0.0,
                           f"Bernoulli(0.1) pair: lhs {_fmt(v.lhs)} < rhs {_fmt(v.rhs)}")


def c13_determinism(seed=0):
    from .reports import ExperimentConfig, render_csv, run
    cfg = ExperimentConfig.from_dict({
        "experiment": "mi_sweep", "signal": {"type": "uniform_box", "low": 0, "high": 1},
        "noise": {"type": "gaussian", "var": 1.0}, "gammaGrid": [0.1, 1.0, 10.0], "seed": seed})
    a, b = render_csv(run(cfg)), render_csv(run(cfg))
    return CriterionResult(13, "deterministic CSV", a == b, float(a != b), 0.0,
                           "mi_sweep rendered twice with one seed")


CRITERIA = (c1_gaussian_closed_forms, c2_debruijn, c3_entropy_representation, c4_high_continuous,
            c5_high_discrete, c6_high_mixed, c7_low_snr, c8_rates, c9_pyramid_J, c10_domination,
            c11_epi, c12_discrete_demo, c13_determinism)


def _run_one(args):
    fn, seed = args
    return fn(seed)


def run_battery(seed: int = 0):
    return pmap(_run_one, [(fn, seed) for fn in CRITERIA])

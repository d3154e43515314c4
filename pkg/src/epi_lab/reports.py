"""Experiment configs, the dispatcher, and CSV / JSON / SVG reports."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field, is_dataclass

import numpy as np

from . import distributions as D
from . import epi as E
from . import limits as L
from . import mmse as M
from .channel import ChannelError, ChannelModel, mutual_information, scaled_noise_entropy
from .pool import pmap
from .quadrature import QuadratureConfig, QuadratureError

EXPERIMENTS = ("entropy", "mi_sweep", "mmse_sweep", "debruijn", "limit_high", "limit_low",
               "rate_fit", "epi", "pyramid_J")
CSV_COLUMNS = ("gamma", "I", "h_x_given_y", "mmse", "residual", "error_estimate")

DEFAULT_GRIDS = {
    "mi_sweep": [0.1, 1.0, 10.0],
    "mmse_sweep": [0.1, 1.0, 10.0],
    "debruijn": [0.1, 0.5, 1.0, 5.0, 10.0],
    "limit_high": list(L.HIGH_GRID),
    "rate_fit": list(L.HIGH_GRID),
    "limit_low": list(L.LOW_GRID),
    "epi": [0.1, 1.0, 10.0],
    "pyramid_J": [100.0, 400.0],
}


class ConfigError(ValueError):
    """Invalid experiment config; ``field`` names the offending entry."""

    def __init__(self, field_name, message):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class NumericalFailure(RuntimeError):
    def __init__(self, gamma, message):
        where = f" at gamma={gamma:g}" if gamma is not None else ""
        super().__init__(f"numerical failure{where}: {message}")
        self.gamma = gamma


class UnwritablePathError(OSError):
    pass


NUMERICAL = (QuadratureError, L.RateFitError, ArithmeticError, np.linalg.LinAlgError)


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------

def _grid(spec, fld="gammaGrid"):
    if isinstance(spec, dict):
        try:
            lo, hi = float(spec["min"]), float(spec["max"])
            per = int(spec.get("pointsPerDecade", 10))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(fld, f"needs numeric min and max (pointsPerDecade optional) ({exc})") from None
        if not (0 < lo < hi) or per < 1:
            raise ConfigError(fld, "need 0 < min < max and pointsPerDecade >= 1")
        n = int(round(math.log10(hi / lo) * per))
        return [float(g) for g in np.logspace(math.log10(lo), math.log10(hi), n + 1)]
    if not isinstance(spec, (list, tuple)) or not spec:
        raise ConfigError(fld, "must be a non-empty list or {min, max, pointsPerDecade}")
    try:
        g = [float(x) for x in spec]
    except (TypeError, ValueError):
        raise ConfigError(fld, "entries must be numbers") from None
    if not all(math.isfinite(x) and x > 0 for x in g):
        raise ConfigError(fld, "entries must be positive and finite")
    if len(set(g)) != len(g):
        raise ConfigError(fld, "entries must be distinct")
    return g


@dataclass
class ExperimentConfig:
    experiment: str
    signal: dict | None = None
    noise: dict | None = None
    gammaGrid: list = field(default_factory=list)
    quadrature: dict = field(default_factory=dict)
    seed: int = 0
    output: str | None = None
    params: dict = field(default_factory=dict)
    #: the parsed document, echoed into reports
    raw: dict = field(default_factory=dict, repr=False)

    KNOWN = ("experiment", "signal", "noise", "gammaGrid", "quadrature", "seed", "output", "params")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config", "must be a JSON object")
        unknown = sorted(set(doc) - set(cls.KNOWN))
        if unknown:
            raise ConfigError(unknown[0], "unknown field")
        exp = doc.get("experiment")
        if exp not in EXPERIMENTS:
            raise ConfigError("experiment", f"must be one of {', '.join(EXPERIMENTS)}")
        seed = doc.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ConfigError("seed", "must be a nonnegative integer")
        params = doc.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError("params", "must be an object")
        grid = doc.get("gammaGrid")
        grid = _grid(grid) if grid is not None else list(DEFAULT_GRIDS.get(exp, []))
        out = doc.get("output")
        if out is not None and not isinstance(out, str):
            raise ConfigError("output", "must be a path prefix string")
        cfg = cls(exp, doc.get("signal"), doc.get("noise"), grid, doc.get("quadrature", {}) or {},
                  seed, out, params, raw=json.loads(json.dumps(doc)))
        cfg.quadrature_config()
        for name in ("signal", "noise"):
            if getattr(cfg, name) is not None:
                cfg._dist(name)
        if exp not in ("pyramid_J",) and cfg.signal is None:
            raise ConfigError("signal", "is required for this experiment")
        return cfg

    def quadrature_config(self) -> QuadratureConfig:
        if not isinstance(self.quadrature, dict):
            raise ConfigError("quadrature", "must be an object")
        try:
            return QuadratureConfig.from_dict(dict(self.quadrature, mcSeed=self.seed))
        except (TypeError, ValueError) as exc:
            raise ConfigError("quadrature", str(exc)) from None

    def _dist(self, name):
        spec = getattr(self, name) if name in ("signal", "noise") else self.params.get(name)
        try:
            return D.from_spec(spec)
        except (D.DistributionError, TypeError, ValueError, KeyError) as exc:
            raise ConfigError(name if name in ("signal", "noise") else f"params.{name}",
                              str(exc)) from None

    def signal_dist(self) -> D.MixedDistribution:
        return self._dist("signal")

    def noise_dist(self) -> D.DensityFamily:
        if self.noise is None:
            d = self.signal_dist().dim if self.signal is not None else 1
            return D.Gaussian(np.zeros(d), np.eye(d))
        n = self._dist("noise")
        if n.atoms:
            raise ConfigError("noise", "must be a pure density")
        return n.density

    def channel(self) -> ChannelModel:
        try:
            return ChannelModel(self.signal_dist(), self.noise_dist())
        except ChannelError as exc:
            raise ConfigError("noise", str(exc)) from None

    def param(self, name, default, kind=float):
        v = self.params.get(name, default)
        try:
            return kind(v)
        except (TypeError, ValueError):
            raise ConfigError(f"params.{name}", f"must be {kind.__name__}") from None


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError("config", f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"not valid JSON ({exc})") from None
    return ExperimentConfig.from_dict(doc)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class SweepReport:
    config: dict
    rows: list
    verdicts: list
    summary: dict
    wallTime: float = 0.0

    def __post_init__(self):
        self.rows = sorted(self.rows, key=lambda r: r["gamma"])
        for r in self.rows:
            if not math.isfinite(r["error_estimate"]):
                raise NumericalFailure(r["gamma"], "non-finite error estimate")

    def to_dict(self):
        return {"config": self.config, "rows": self.rows, "verdicts": self.verdicts,
                "summary": self.summary, "wallTime": self.wallTime}

    @classmethod
    def from_dict(cls, doc):
        return cls(doc["config"], doc["rows"], doc["verdicts"], doc["summary"], doc["wallTime"])


def _row(gamma, I=None, hxy=None, mm=None, residual=None, err=0.0):
    f = lambda v: None if v is None else float(v)  # noqa: E731
    return {"gamma": float(gamma), "I": f(I), "h_x_given_y": f(hxy), "mmse": f(mm),
            "residual": f(residual), "error_estimate": float(err)}


def _plain(obj):
    if is_dataclass(obj):
        obj = asdict(obj)
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def _guard(fn, gamma):
    try:
        return fn()
    except NUMERICAL as exc:
        raise NumericalFailure(gamma, str(exc)) from exc


# per-gamma workers (module level so worker processes can import them)

def _mi_row(args):
    ch, g, cfg = args

    def go():
        try:
            b = mutual_information(ch, g, cfg, direct=True)
        except ChannelError:
            b = mutual_information(ch, g, cfg, direct=False)
        try:
            mm = M.mmse(ch, g, cfg)
        except ChannelError:
            mm = None
        res = abs(b.I - b.I_direct) if b.I_direct is not None else None
        return _row(g, b.I, b.hXgivenY, mm, res, b.errorEstimate)

    return _guard(go, g)


def _mmse_row(args):
    ch, g, cfg = args
    return _guard(lambda: _row(g, mm=(r := M.mmse(ch, g, cfg, return_error=True))[0],
                               err=r[1]), g)


def _debruijn_row(args):
    ch, g, step, cfg = args

    def go():
        c = M.debruijn_check(ch, g, step, cfg)
        return _row(g, mm=2.0 * (c.rhs + 0.5 * ch.dim / g), residual=c.residual,
                    err=c.errorEstimate)

    return _guard(go, g)


def _limit(cfg_, high):
    ch, qc = cfg_.channel(), cfg_.quadrature_config()
    grid = sorted(cfg_.gammaGrid, reverse=not high)
    try:
        if high:
            v = L.verify_highsnr_mixed(ch, grid, qc)
        else:
            v = L.verify_lowsnr(ch, grid, qc)
    except ChannelError as exc:
        raise ConfigError("signal", str(exc)) from None
    except NumericalFailure:
        raise
    except NUMERICAL as exc:
        raise NumericalFailure(None, str(exc)) from exc
    hX = D.entropy(ch.signal, qc)[0]
    w = 1.0 - ch.signal.eta
    rows = []
    for g, val, err in v.sweep:
        corr = w * scaled_noise_entropy(ch.noise, g, qc)[0] if high else 0.0
        I = val - corr
        rows.append(_row(g, I, hX - I, None, abs(val - v.target), err))
    return v, rows


def _fit_summary(v, required):
    try:
        L.fit_rate(v)
    except L.RateFitError as exc:
        if required:
            raise NumericalFailure(v.sweep[-1][0], str(exc)) from exc
        return {"fitNote": str(exc)}
    return {"fittedExponent": v.fittedExponent, "fittedConstant": v.fittedConstant,
            "exponentStderr": v.exponentStderr}


def run(config: ExperimentConfig) -> SweepReport:
    """Dispatch a config to the matching computation."""
    t0 = time.perf_counter()
    exp = config.experiment
    qc = config.quadrature_config()
    rows, verdicts, summary = [], [], {}
    grid = config.gammaGrid
    if exp == "entropy":
        sig = config.signal_dist()
        h, err = _guard(lambda: D.entropy(sig, qc), None)
        summary = {"h": h, "errorEstimate": err, "eta": sig.eta}
    elif exp == "mi_sweep":
        ch = config.channel()
        rows = pmap(_mi_row, [(ch, g, qc) for g in grid])
    elif exp == "mmse_sweep":
        ch = config.channel()
        _require_gaussian(ch)
        rows = pmap(_mmse_row, [(ch, g, qc) for g in grid])
        m = [r["mmse"] for r in sorted(rows, key=lambda r: r["gamma"])]
        summary = {"M0": M.mmse_at_zero(ch), "nonincreasing": bool(np.all(np.diff(m) <= 1e-9))}
    elif exp == "debruijn":
        ch = config.channel()
        _require_gaussian(ch)
        step = config.param("fdStep", 1e-3)
        if not all(g > step > 0 for g in grid):
            raise ConfigError("params.fdStep", "need gamma > fdStep > 0 for every grid point")
        rows = pmap(_debruijn_row, [(ch, g, step, qc) for g in grid])
        summary = {"maxResidual": max(r["residual"] for r in rows)}
    elif exp in ("limit_high", "rate_fit", "limit_low"):
        v, rows = _limit(config, exp != "limit_low")
        summary = {"target": v.target, "finalResidual": v.finalResidual,
                   "monotone": v.monotone()}
        if exp != "limit_low":
            summary.update(_fit_summary(v, required=exp == "rate_fit"))
        verdicts = [_plain(v)]
    elif exp == "epi":
        a = _epi_input(config, "signal")
        b = _epi_input(config, "signal2") if "signal2" in config.params else a
        theta = config.param("theta", math.pi / 4)
        try:
            vs = E.check_all_forms(a, b, theta, grid, qc)
        except NUMERICAL as exc:
            raise NumericalFailure(None, str(exc)) from exc
        verdicts = [_plain(v) for v in vs]
        rows = [_row(v.gamma, mm=v.lhs, residual=v.slack, err=v.errorBudget)
                for v in vs if v.form == "mmse"]
        summary = {"allHold": all(v.holds for v in vs), "theta": theta}
    elif exp == "pyramid_J":
        a, b = config.param("a", 0.5), config.param("b", 0.0)
        n = config.param("points", 100, int)
        rng = np.random.default_rng(config.seed)
        for g in grid:
            if not math.sqrt(g) > a:
                raise ConfigError("gammaGrid", f"need sqrt(gamma) > a, fails at {g:g}")
            pts = L.sample_parallelograms(rng, n, g, a, b)
            jc = L.pyramid_J_closed_form(pts[:, 0], pts[:, 1], g, a, b)
            jq, je = _guard(lambda: L.convolution_J(D.Pyramid(1.0), D.Pyramid(a, b),
                                                    pts[:, 0], pts[:, 1], g, qc), g)
            rows.append(_row(g, residual=float(np.max(np.abs(jc - jq))), err=float(np.max(je))))
        summary = {"a": a, "b": b, "points": n}
    report = SweepReport(config.raw, rows, verdicts, _plain(summary))
    report.wallTime = time.perf_counter() - t0
    return report


def _require_gaussian(ch):
    if not isinstance(ch.noise, D.Gaussian):
        raise ConfigError("noise", "this experiment needs Gaussian noise")


def _epi_input(config, name):
    d = config._dist(name)
    if d.atoms:
        raise ConfigError(name if name == "signal" else f"params.{name}",
                          "EPI inputs must be densities; atomic laws violate the power form")
    return d.density


# ---------------------------------------------------------------------------
# emitters
# ---------------------------------------------------------------------------

def _cell(v):
    return "" if v is None else repr(float(v))


def render_csv(report: SweepReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in report.rows:
        w.writerow([_cell(r[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def _write(path, text, mode="w"):
    try:
        with open(path, mode) as fh:
            fh.write(text)
    except OSError as exc:
        raise UnwritablePathError(f"cannot write {path}: {exc.strerror}") from None
    return path


def check_writable(prefix):
    """Fail early (before any computation) when ``prefix`` cannot be written."""
    parent = os.path.dirname(os.path.abspath(prefix))
    try:
        os.makedirs(parent, exist_ok=True)
    except OSError as exc:
        raise UnwritablePathError(f"cannot create {parent}: {exc.strerror}") from None
    if not os.access(parent, os.W_OK):
        raise UnwritablePathError(f"directory {parent} is not writable")


def emit_csv(report: SweepReport, path):
    return _write(path, render_csv(report))


def emit_json(report: SweepReport, path):
    return _write(path, json.dumps(report.to_dict(), indent=2, allow_nan=True) + "\n")


def load_json(path) -> SweepReport:
    with open(path) as fh:
        return SweepReport.from_dict(json.load(fh))


def emit_svg(report: SweepReport, path):
    """Log-log plot of |residual| against gamma, with the fitted rate if any."""
    from matplotlib.figure import Figure

    fig = Figure(figsize=(5.0, 3.6))
    ax = fig.add_subplot()
    g = np.array([r["gamma"] for r in report.rows if r["residual"] is not None], dtype=float)
    res = np.abs([r["residual"] for r in report.rows if r["residual"] is not None])
    ok = res > 0
    if ok.any():
        ax.loglog(g[ok], res[ok], "o-", color="C0", label="residual", gid="data")
    e, c = report.summary.get("fittedExponent"), report.summary.get("fittedConstant")
    if e is not None and c is not None and ok.any():
        gg = np.geomspace(g[ok].min(), g[ok].max(), 50)
        ax.loglog(gg, c * gg ** e, "--", color="C3", label=f"fit: {c:.3g} gamma^{e:.3f}", gid="fit")
    if not ok.any():
        ax.text(0.5, 0.5, "no residuals to plot", ha="center", va="center", transform=ax.transAxes)
    ax.set_xlabel("gamma")
    ax.set_ylabel("|residual|")
    ax.set_title(str(report.config.get("experiment", "")))
    if ok.any():
        ax.legend(frameon=False)
    fig.tight_layout()
    import matplotlib
    with matplotlib.rc_context({"svg.hashsalt": "epi-lab"}):
        try:
            fig.savefig(path, format="svg", metadata={"Date": None})
        except OSError as exc:
            raise UnwritablePathError(f"cannot write {path}: {exc.strerror}") from None
    return path


def emit_all(report: SweepReport, prefix):
    return [emit_csv(report, prefix + ".csv"), emit_json(report, prefix + ".json"),
            emit_svg(report, prefix + ".svg")]

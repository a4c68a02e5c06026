"""Seeded Monte Carlo drivers.

Replication ``r`` draws one sample of the largest scheduled size from stream
``(seed, r)`` and evaluates every smaller size on its prefix, so each
replication is a single trajectory along the schedule. Replications are
independent jobs; the thread count only changes scheduling, never output.
"""

from __future__ import annotations

import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from pavecop._rng import derive_rng
from pavecop.bench.config import Experiment, ExperimentConfig, schedule_sizes
from pavecop.bench.constants import BoundCase, FactKind, fact_constant, theorem_bound
from pavecop.empirical import (
    ProcessKind,
    bahadur_kiefer,
    build_sample,
    lattice_values,
    oscillation_modulus,
    rate_normalizer,
    sup_norm_combination,
    sup_norm_window,
)
from pavecop.gaussian import CovKind, _bridge_values, _tied_values, covariance, simulate_sheets
from pavecop.models import CopulaModel, TailContext, draw_pairs, log1, log2
from pavecop.smoothing import smoothed_tail_copula_grid
from pavecop.tailtest import Method, null_distribution, omega_statistic, p_value

CSV_COLUMNS = ("experiment", "n", "kn", "rep", "observed", "normalizer", "bound", "ratio")
SUMMARY_COLUMNS = ("experiment", "n", "kn", "reps", "median_normalized", "mean_running_max",
                   "max_running_max", "exceed_fraction", "h_n", "h_n_log")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return "%.17g" % float(x)


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


@dataclass(frozen=True)
class Row:
    experiment: str
    n: int
    kn: float
    rep: int
    observed: float
    normalizer: float
    bound: float

    @property
    def normalized(self) -> float:
        return self.observed * self.normalizer

    @property
    def ratio(self) -> float:
        return self.normalized / self.bound

    def cells(self):
        return (self.experiment, self.n, self.kn, self.rep, self.observed, self.normalizer, self.bound, self.ratio)


@dataclass
class ExperimentReport:
    """Rows in canonical order (experiment, n, rep), per-n summaries, free-form
    details and the outcome of configured assertions."""

    config: ExperimentConfig
    rows: list
    summary: list = field(default_factory=list)
    details: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(CSV_COLUMNS) + "\n")
        for row in self.rows:
            buf.write(",".join(_fmt(c) for c in row.cells()) + "\n")
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(SUMMARY_COLUMNS) + "\n")
        for s in self.summary:
            buf.write(",".join("" if s.get(c) is None else _fmt(s[c]) for c in SUMMARY_COLUMNS) + "\n")
        return buf.getvalue()

    def write(self, out_dir: str | Path | None = None) -> Path:
        path = Path(self.config.output_path)
        if out_dir is not None:
            path = Path(out_dir) / path.name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv())
        stem = path.with_suffix("")
        if self.summary:
            Path(f"{stem}_summary.csv").write_text(self.summary_csv())
        info = dict(self.details)
        info["checks"] = [{"name": n, "passed": bool(ok), "detail": d} for n, ok, d in self.checks]
        text = json.dumps(info, indent=2, sort_keys=True, default=_json_default)
        Path(f"{stem}_details.json").write_text(text + "\n")
        return path

    def by_n(self) -> dict:
        out: dict = {}
        for row in self.rows:
            out.setdefault(row.n, []).append(row)
        return out


# ---------------------------------------------------------------------------
# observables

_RATE_WEIGHTS = {ProcessKind.G_STAR: 1.0, ProcessKind.ALPHA_ZERO_STAR: -1.0}
_RATE_GENERAL_WEIGHTS = {ProcessKind.G_STAR_STAR: 1.0, ProcessKind.ALPHA_ZERO_STAR_STAR: -1.0}


def _gamma(cfg: ExperimentConfig) -> float:
    return cfg.kn_spec.limit_ratio


def _rate_bound(gamma: float) -> float:
    # no finite theorem constant at gamma = 0; log the Bahadur-Kiefer one
    if gamma == 0.0:
        return fact_constant(FactKind.BAHADUR_KIEFER, 0.0)
    return theorem_bound(gamma, BoundCase.THM21)


def oscillation_h(n: int, exponent: float) -> float:
    return float(n) ** -exponent


def _observe(cfg: ExperimentConfig, sample, ctx: TailContext):
    """(observed, normalizer, bound) for one sample."""
    exp = cfg.experiment
    n = ctx.n
    gamma = _gamma(cfg)
    if exp is Experiment.RATE:
        obs = sup_norm_combination(sample, _RATE_WEIGHTS, ctx=ctx, grid_m=cfg.grid_m, method=cfg.sup_method)
        return obs, rate_normalizer(n, ctx.kn), _rate_bound(gamma)
    if exp is Experiment.RATE_GENERAL:
        obs = sup_norm_combination(sample, _RATE_GENERAL_WEIGHTS, ctx=ctx, model=cfg.model,
                                   grid_m=cfg.grid_m, method=cfg.sup_method)
        return obs, rate_normalizer(n, ctx.kn), _rate_bound(gamma)
    if exp is Experiment.RATE_SMOOTHED:
        smooth = smoothed_tail_copula_grid(sample, cfg.kernel, ctx, cfg.grid_m)
        a0 = lattice_values(sample, {ProcessKind.ALPHA_ZERO_STAR: 1.0}, ctx.window, grid_m=cfg.grid_m)
        obs = float(np.abs(smooth - a0).max())
        return obs, rate_normalizer(n, ctx.kn), _rate_bound(gamma)
    if exp is Experiment.LIL_TAIL_QUANTILE:
        obs = sup_norm_window(sample, ProcessKind.BETA_U_STAR, ctx=ctx)
        return obs, float(log2(n)) ** -0.5, fact_constant(FactKind.LIL_BETA, gamma)
    if exp is Experiment.LIL_GSTAR:
        obs = sup_norm_window(sample, ProcessKind.G_STAR, ctx=ctx, grid_m=cfg.grid_m, method=cfg.sup_method)
        return obs, (2.0 * float(log2(n))) ** -0.5, fact_constant(FactKind.LIL_GSTAR)
    if exp is Experiment.BAHADUR_KIEFER:
        r_u, _, r_n = bahadur_kiefer(sample, ctx)
        return r_u, 1.0 / r_n, fact_constant(FactKind.BAHADUR_KIEFER, gamma)
    if exp is Experiment.OSCILLATION:
        h = oscillation_h(n, cfg.h_exponent)
        obs = oscillation_modulus(sample, h, cfg.grid_m)
        return obs, (2.0 * h * float(log1(1.0 / h))) ** -0.5, fact_constant(FactKind.OSCILLATION)
    raise ValueError(f"{exp.value} is not a per-sample experiment")


def _trajectory(cfg: ExperimentConfig, sizes, rep: int) -> list:
    rng = derive_rng(cfg.seed, rep)
    u, v = draw_pairs(cfg.model, int(sizes[-1]), rng)
    rows = []
    for n in sizes:
        n = int(n)
        sample = build_sample(np.column_stack([u[:n], v[:n]]))
        ctx = TailContext.from_spec(cfg.kn_spec, n)
        obs, norm, bound = _observe(cfg, sample, ctx)
        rows.append(Row(cfg.experiment.value, n, ctx.kn, rep, obs, norm, bound))
    return rows


def _map(fn, items, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


def _rate_h(n: int, kn: float, gamma: float):
    """Oscillation bandwidth of the rate argument with epsilon = 0, without
    and with the extra ``log1 n`` factor of the ``gamma > 1/2`` case."""
    c = math.sqrt(2.0 * (1.0 - gamma)) if gamma <= 0.5 else 2.0 ** -0.5 * gamma ** -0.5
    h = c * math.sqrt(kn) * math.sqrt(float(log2(n))) / n
    return h, h * float(log1(n))


def _summarize(cfg: ExperimentConfig, rows: list, reps: int) -> list:
    sizes = sorted({r.n for r in rows})
    table = {(r.n, r.rep): r for r in rows}
    running = np.full(reps, -np.inf)
    out = []
    for n in sizes:
        vals = np.array([table[n, k].normalized for k in range(reps)])
        bounds = np.array([table[n, k].bound for k in range(reps)])
        running = np.maximum(running, vals)
        entry = {
            "experiment": cfg.experiment.value, "n": n, "kn": table[n, 0].kn, "reps": reps,
            "median_normalized": float(np.median(vals)),
            "mean_running_max": float(running.mean()), "max_running_max": float(running.max()),
            "exceed_fraction": float(np.mean(vals > bounds)),
            "running": running.copy(), "values": vals,
        }
        if cfg.experiment in (Experiment.RATE, Experiment.RATE_GENERAL, Experiment.RATE_SMOOTHED):
            entry["h_n"], entry["h_n_log"] = _rate_h(n, table[n, 0].kn, _gamma(cfg))
        elif cfg.experiment is Experiment.OSCILLATION:
            entry["h_n"] = oscillation_h(n, cfg.h_exponent)
        out.append(entry)
    return out


def _oscillation_conditions(sizes, exponent: float) -> dict:
    """Finite-schedule checks of the bandwidth conditions: n h increasing,
    n h / log1 n increasing and log1(1/h) / log2 n increasing."""
    ns = np.asarray(sizes, dtype=float)
    h = ns ** -exponent
    a = ns * h
    b = a / log1(ns)
    c = log1(1.0 / h) / log2(ns)
    inc = lambda x: bool(np.all(np.diff(x) > 0)) if x.size > 1 else True  # noqa: E731
    return {"h_decreasing": inc(-h), "nh_increasing": inc(a), "nh_over_log_increasing": inc(b),
            "log_ratio_increasing": inc(c)}


# ---------------------------------------------------------------------------
# special drivers

_COV_POINTS = (0.25, 0.5, 0.75)
_COV_BATCH = 500


def _cov_check(cfg: ExperimentConfig, threads: int) -> ExperimentReport:
    m = cfg.cov_m
    idx = []
    for s in _COV_POINTS:
        for t in _COV_POINTS:
            i, j = s * m, t * m
            if abs(i - round(i)) > 1e-9 or abs(j - round(j)) > 1e-9:
                raise ValueError("cov_m must be a multiple of 4")
            idx.append((int(round(i)), int(round(j))))
    ii = np.array([a for a, _ in idx])
    jj = np.array([b for _, b in idx])
    pts = [(s, t) for s in _COV_POINTS for t in _COV_POINTS]

    def batch(lo):
        hi = min(lo + _COV_BATCH, cfg.reps)
        sheets = np.stack([simulate_sheets(m, 1, cfg.seed, r)[0] for r in range(lo, hi)])
        bridges = _bridge_values(sheets)
        tied = _tied_values(bridges)
        return np.stack([f[:, ii, jj] for f in (sheets, bridges, tied)])

    parts = _map(batch, range(0, cfg.reps, _COV_BATCH), threads)
    data = np.concatenate(parts, axis=1)  # (3, reps, 9)
    rows = []
    worst = 0.0
    for k, kind in enumerate((CovKind.SHEET, CovKind.BRIDGE, CovKind.TIED_DOWN)):
        x = data[k]
        xc = x - x.mean(axis=0)
        prod = xc[:, :, None] * xc[:, None, :]
        emp = prod.sum(axis=0) / (cfg.reps - 1)
        se = prod.std(axis=0, ddof=1) / math.sqrt(cfg.reps)
        for a in range(9):
            for b in range(9):
                (s1, t1), (s2, t2) = pts[a], pts[b]
                exact = covariance(kind, s1, t1, s2, t2)
                row = Row(f"{cfg.experiment.value}_{kind.value}", m, float(m), a * 9 + b,
                          abs(emp[a, b] - exact), 1.0 / se[a, b], 4.0)
                worst = max(worst, row.ratio)
                rows.append(row)
    rep = ExperimentReport(cfg, rows, details={"max_ratio": worst, "all_within_4se": worst <= 1.0})
    rep.checks.append(("covariances within 4 SE", worst <= 1.0, f"max |diff|/(4 SE) = {worst:.4f}"))
    return rep


def _test_calibration(cfg: ExperimentConfig, threads: int) -> ExperimentReport:
    n = int(schedule_sizes(cfg)[0])
    ctx = TailContext.from_spec(cfg.kn_spec, n)
    nu1, nu2 = cfg.nu1, cfg.nu2
    null_mc = null_distribution(n, ctx, nu1, nu2, cfg.null_reps, cfg.seed, Method.MC, threads, stream=(0,))
    null_gauss = null_distribution(n, ctx, nu1, nu2, cfg.null_reps, cfg.seed, Method.GAUSS, threads, stream=(3,))
    def trial(args):
        arm, t, model = args
        u, v = draw_pairs(model, n, derive_rng(cfg.seed, arm, t))
        omega = omega_statistic(build_sample(np.column_stack([u, v])), ctx, nu1, nu2)
        return p_value(omega, null_mc)

    arms = [("null", 1, CopulaModel.independence())]
    if not cfg.model.is_independence:
        arms.append(("alt", 2, cfg.model))
    rows = []
    details = {"n": n, "window": ctx.window, "trials": cfg.reps, "null_reps": cfg.null_reps}
    for label, arm, model in arms:
        pvals = _map(trial, [(arm, t, model) for t in range(cfg.reps)], threads)
        for t, pv in enumerate(pvals):
            rows.append(Row(f"{cfg.experiment.value}_{label}", n, ctx.kn, t, pv, 1.0, cfg.level))
        details["size" if label == "null" else "power"] = float(np.mean(np.array(pvals) <= cfg.level))
        if label == "null":
            deciles = np.arange(1, 10) / 10
            ecdf = np.array([np.mean(np.array(pvals) <= d) for d in deciles])
            details["pvalue_decile_max_dev"] = float(np.max(ecdf - deciles))
    q_mc = float(np.quantile(null_mc, 0.95))
    q_gauss = float(np.quantile(null_gauss, 0.95))
    details.update({"p95_mc": q_mc, "p95_gauss": q_gauss, "p95_rel_diff": abs(q_mc - q_gauss) / q_mc})
    rep = ExperimentReport(cfg, rows, details=details)
    a = cfg.assertions
    if a.size_in is not None:
        lo, hi = a.size_in
        rep.checks.append(("size in range", lo <= details["size"] <= hi, f"size = {details['size']:.4f}"))
    if a.power_margin is not None:
        ok = "power" in details and details["power"] - details["size"] >= a.power_margin
        rep.checks.append(("power exceeds size", ok, f"power = {details.get('power', float('nan')):.4f}"))
    if a.percentile_rel_tol is not None:
        ok = details["p95_rel_diff"] <= a.percentile_rel_tol
        rep.checks.append(("95th percentiles agree", ok, f"relative difference = {details['p95_rel_diff']:.4f}"))
    return rep


# ---------------------------------------------------------------------------


def _check_schedule(cfg: ExperimentConfig, rep: ExperimentReport) -> None:
    a = cfg.assertions
    last = rep.summary[-1]
    if a.exceed_fraction_max is not None:
        ok = last["exceed_fraction"] <= a.exceed_fraction_max
        rep.checks.append(("exceed fraction at largest n", ok, f"{last['exceed_fraction']:.4f}"))
    if a.median_below is not None:
        ok = last["median_normalized"] < a.median_below
        rep.checks.append(("median normalized below", ok, f"{last['median_normalized']:.4f}"))
    if a.running_max_in is not None:
        lo, hi = a.running_max_in
        frac = float(np.mean((last["running"] >= lo) & (last["running"] <= hi)))
        rep.checks.append(("running max in range", frac >= a.min_fraction, f"fraction = {frac:.4f}"))
    if a.value_in is not None:
        lo, hi = a.value_in
        frac = float(np.mean((last["values"] >= lo) & (last["values"] <= hi)))
        rep.checks.append(("value in range", frac >= a.min_fraction, f"fraction = {frac:.4f}"))
    if a.mean_in is not None:
        lo, hi = a.mean_in
        mean = float(np.mean(last["values"]))
        rep.checks.append(("mean in range", lo <= mean <= hi, f"mean = {mean:.4f}"))


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Run a configured study; rows come back in canonical order."""
    if threads < 1:
        raise ValueError("threads must be >= 1")
    if cfg.experiment is Experiment.COV_CHECK:
        return _cov_check(cfg, threads)
    if cfg.experiment is Experiment.TEST_CALIBRATION:
        return _test_calibration(cfg, threads)
    sizes = schedule_sizes(cfg)
    per_rep = _map(lambda r: _trajectory(cfg, sizes, r), range(cfg.reps), threads)
    rows = sorted((row for rows in per_rep for row in rows), key=lambda r: (r.n, r.rep))
    rep = ExperimentReport(cfg, rows)
    rep.summary = _summarize(cfg, rows, cfg.reps)
    rep.details["kn_conditions"] = cfg.kn_spec.check_schedule(sizes)
    if cfg.experiment is Experiment.OSCILLATION:
        rep.details["h_conditions"] = _oscillation_conditions(sizes, cfg.h_exponent)
    _check_schedule(cfg, rep)
    return rep

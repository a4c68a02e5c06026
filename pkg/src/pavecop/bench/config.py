"""Line-oriented ``key = value`` experiment configuration."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from pavecop.models import CopulaModel, KnRule, KnSpec
from pavecop.smoothing import KernelKind, KernelSpec


class Experiment(enum.Enum):
    RATE = "rate"
    RATE_GENERAL = "rate_general"
    RATE_SMOOTHED = "rate_smoothed"
    LIL_TAIL_QUANTILE = "lil_tail_quantile"
    LIL_GSTAR = "lil_gstar"
    BAHADUR_KIEFER = "bahadur_kiefer"
    OSCILLATION = "oscillation"
    COV_CHECK = "cov_check"
    TEST_CALIBRATION = "test_calibration"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Schedule:
    """Geometric sample-size schedule ``round(n0 * factor**i)``, ``i < count``."""

    n0: int
    factor: float
    count: int

    def __post_init__(self):
        if self.n0 < 2:
            raise ConfigError("n0 must be >= 2")
        if self.count < 1:
            raise ConfigError("count must be >= 1")
        if self.count > 1 and not self.factor > 1:
            raise ConfigError("factor must exceed 1 so the schedule is strictly increasing")

    @property
    def sizes(self) -> list[int]:
        return [int(round(self.n0 * self.factor ** i)) for i in range(self.count)]


@dataclass(frozen=True)
class Assertions:
    """Pass criteria checked on the finished report (all optional)."""

    exceed_fraction_max: float | None = None
    median_below: float | None = None
    running_max_in: tuple[float, float] | None = None
    value_in: tuple[float, float] | None = None
    mean_in: tuple[float, float] | None = None
    min_fraction: float = 1.0
    size_in: tuple[float, float] | None = None
    power_margin: float | None = None
    percentile_rel_tol: float | None = None

    def any(self) -> bool:
        return any(getattr(self, k) is not None for k in (
            "exceed_fraction_max", "median_below", "running_max_in", "value_in", "mean_in",
            "size_in", "power_margin", "percentile_rel_tol"))


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: Experiment
    seed: int
    schedule: Schedule | None = None
    model: CopulaModel = field(default_factory=CopulaModel.independence)
    kn_spec: KnSpec = field(default_factory=KnSpec)
    reps: int = 100
    grid_m: int = 512
    sup_method: str = "auto"
    kernel: KernelSpec | None = None
    h_exponent: float = 0.5
    cov_m: int = 64
    nu1: float = 0.0
    nu2: float = 0.0
    level: float = 0.05
    null_reps: int = 2000
    output_path: str = "report.csv"
    assertions: Assertions = field(default_factory=Assertions)

    def __post_init__(self):
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")
        if self.grid_m < 2:
            raise ConfigError("grid_m must be >= 2")
        if self.experiment is Experiment.RATE_SMOOTHED and self.kernel is None:
            raise ConfigError("rate_smoothed needs a kernel (set kernel = epanechnikov or gaussian)")
        if self.experiment is not Experiment.COV_CHECK and self.schedule is None:
            raise ConfigError("missing required key 'n0'")


_FLOAT = float


def _int(v):
    f = float(v)
    if f != int(f):
        raise ValueError(f"expected an integer, got {v!r}")
    return int(f)


def _pair(v):
    parts = [p for p in v.replace(",", " ").split() if p]
    if len(parts) != 2:
        raise ValueError(f"expected two numbers, got {v!r}")
    lo, hi = float(parts[0]), float(parts[1])
    if lo > hi:
        raise ValueError(f"empty range {v!r}")
    return lo, hi


def _seed(v):
    s = int(v, 0)
    if not 0 <= s < 2 ** 64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    return s


_KEYS = {
    "experiment": str, "seed": _seed, "n0": _int, "factor": _FLOAT, "count": _int,
    "model": str, "theta": _FLOAT, "kn_rule": str, "gamma": _FLOAT, "kn_exponent": _FLOAT,
    "reps": _int, "grid_m": _int, "sup_method": str, "kernel": str, "kernel_c": _FLOAT,
    "kernel_delta": _FLOAT, "h_exponent": _FLOAT, "cov_m": _int, "nu1": _FLOAT, "nu2": _FLOAT,
    "level": _FLOAT, "null_reps": _int, "output": str,
    "assert_exceed_fraction_max": _FLOAT, "assert_median_below": _FLOAT,
    "assert_running_max_in": _pair, "assert_value_in": _pair, "assert_mean_in": _pair,
    "assert_min_fraction": _FLOAT, "assert_size_in": _pair, "assert_power_margin": _FLOAT,
    "assert_percentile_rel_tol": _FLOAT,
}


def parse_config(text: str) -> ExperimentConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    Raises
    ------
    ConfigError
        On unknown or repeated keys and bad values (with the line number),
        missing required keys (by name) and invalid combinations.
    """
    raw: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key '{key}'")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key '{key}'")
        try:
            raw[key] = _KEYS[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for '{key}': {exc}") from None
    if "gamma" in raw and raw.get("kn_rule", "proportional").lower() == "proportional":
        try:
            KnSpec.proportional(raw["gamma"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    for key in ("experiment", "seed"):
        if key not in raw:
            raise ConfigError(f"missing required key '{key}'")
    try:
        exp = Experiment(raw["experiment"].lower())
    except ValueError:
        raise ConfigError(f"unknown experiment {raw['experiment']!r}") from None

    schedule = None
    if exp is not Experiment.COV_CHECK:
        for key in ("n0", "count"):
            if key not in raw:
                raise ConfigError(f"missing required key '{key}'")
        if raw["count"] > 1 and "factor" not in raw:
            raise ConfigError("missing required key 'factor'")
        schedule = Schedule(raw["n0"], raw.get("factor", 2.0), raw["count"])

    try:
        model = CopulaModel.from_name(raw.get("model", "independence"), raw.get("theta", 0.0))
        rule = KnRule(raw.get("kn_rule", "proportional").lower())
        if rule is KnRule.PROPORTIONAL and "gamma" not in raw and exp is not Experiment.COV_CHECK:
            raise ConfigError("missing required key 'gamma'")
        kn_spec = KnSpec(rule, gamma=raw.get("gamma", 1.0), exponent=raw.get("kn_exponent", 0.5))
        kernel = None
        if "kernel" in raw:
            kernel = KernelSpec(KernelKind(raw["kernel"].lower()), raw.get("kernel_c", 1.0),
                                raw.get("kernel_delta", 0.05))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if raw.get("sup_method", "auto") not in ("auto", "exact", "points", "lines"):
        raise ConfigError("sup_method must be one of auto, exact, points, lines")
    level = raw.get("level", 0.05)
    if not 0 < level < 1:
        raise ConfigError("level must lie in (0, 1)")

    asserts = Assertions(**{k[len("assert_"):]: v for k, v in raw.items() if k.startswith("assert_")})
    return ExperimentConfig(
        experiment=exp, seed=raw["seed"], schedule=schedule, model=model, kn_spec=kn_spec,
        reps=raw.get("reps", 100), grid_m=raw.get("grid_m", 512), sup_method=raw.get("sup_method", "auto"),
        kernel=kernel, h_exponent=raw.get("h_exponent", 0.5), cov_m=raw.get("cov_m", 64),
        nu1=raw.get("nu1", 0.0), nu2=raw.get("nu2", 0.0), level=level,
        null_reps=raw.get("null_reps", 2000), output_path=raw.get("output", f"{exp.value}.csv"),
        assertions=asserts,
    )


def schedule_sizes(config: ExperimentConfig) -> np.ndarray:
    return np.array(config.schedule.sizes if config.schedule else [], dtype=np.int64)

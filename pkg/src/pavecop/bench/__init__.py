"""Monte Carlo harness checking the almost-sure constants at finite n."""

from pavecop.bench.config import Experiment, ExperimentConfig, parse_config
from pavecop.bench.constants import BoundCase, FactKind, fact_constant, theorem_bound
from pavecop.bench.runner import ExperimentReport, run_experiment

"""Empirical copula processes on shrinking pavements ``[0, k_n/n]^2``."""

from pavecop.models import CopulaModel, KnSpec, TailContext, copula_eval, kn_value, sample_pairs
from pavecop.empirical import Sample, ProcessKind, build_sample, empirical_copula, eval_process

__version__ = "0.1.0"

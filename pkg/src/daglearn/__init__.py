"""Sparse nonparametric DAG learning by continuous constrained optimization."""

from .acyclicity import h_grad, h_value, is_dag
from .metrics import MetricsReport, count_accuracy
from .semmodel import MlpSem, SobolevSem
from .simulate import GraphSpec, SemSpec, sample_dag, simulate_sem
from .solver import LearnConfig, LearnResult, augmented_lagrangian_learn, threshold_to_dag

__version__ = "0.1.0"

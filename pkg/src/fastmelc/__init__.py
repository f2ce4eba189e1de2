"""Fast training of the Multithreshold Entropy Linear Classifier.

A MELC model projects data on a unit vector ``v`` chosen to maximize the
Cauchy-Schwarz divergence between the Gaussian KDEs of the two projected
classes.  This package evaluates that objective exactly or with two
error-bounded approximations and optimizes it off the sphere.
"""

from .approx import (
    ApproxConfig,
    BinPartition,
    DiscardStats,
    SortCache,
    bin_width,
    discard_threshold,
    ip_bin,
    ip_discard,
    sort_cache_update,
)
from .classify import EvalMetrics, MelcModel, balanced_accuracy, fit, predict, predict_many
from .core import KdeParams, LabeledDataset, VarianceProfile, project, variance_profile
from .optimizer import (
    ObjectiveHandle,
    OptimizationResult,
    OptimizerConfig,
    dcs_objective,
    multi_restart,
    optimize,
    penalized_objective,
)
from .potential import DcsValue, GradContext, PotentialValue, dcs_evaluate, ip_exact

__version__ = "0.1.0"

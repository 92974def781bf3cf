"""Slack-rescaled structural SVMs through margin-rescaling oracles.

Labels of one example are points ``(h, g)``; training with slack rescaling
needs ``argmax_y h(y) * g(y)`` while ordinary inference code only provides
``argmax_y h(y) + lam * g(y)``.  This package bridges the two.
"""

__version__ = "0.1.0"

from .geometry import LabelPoint, capacity, lambda_score, mirror_point, phi, subopt_bound
from .oracles import (
    ChainInstance,
    EnumerationInstance,
    MultiLabelInstance,
    OracleAnswer,
    OracleQuery,
    StrictSide,
    TreeInstance,
    UnsupportedConstraint,
    enumeration_backend,
)
from .search import (
    Angle,
    Certificate,
    SearchConfig,
    SearchOutcome,
    angular_search,
    binary_search_upper,
    bisecting_search,
    exhaustive_search,
    run_search,
    sarawagi_search,
)
from .model import ChainTask, HierarchicalTask, ModelState, MultiLabelTask, TrainingExample
from .training import SearchStrategy, cutting_plane_train, sgd_train
from .data import MultiLabelDataset, adversarial_instance, load_multilabel, random_instance
from .metrics import MetricsReport, evaluate

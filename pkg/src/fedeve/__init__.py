"""Cross-device federated learning simulator with a Kalman-filter server
optimizer (FedEve), standard baselines and drift-measurement tools."""

from .client import ClientUpdate, DivergenceError, LocalHyper, local_train_prox, local_train_scaffold, local_train_sgd
from .data import (
    LabeledDataset,
    PartitionPlan,
    drift_isolation_view,
    gen_synthetic,
    heterogeneity_H,
    load_idx,
    partition_dirichlet,
    partition_iid,
)
from .drift import (
    exact_period_drift,
    normality_diagnostic,
    subset_variance_bruteforce,
    subset_variance_closed_form,
    track_drift_series,
)
from .experiment import ExperimentConfig, RoundLog, parse_config, run_experiment, sample_clients, summarize, plot_series
from .model import Batch, ModelSpec, backward, evaluate, finite_diff_grad, forward_loss, init_params
from .server import (
    DriftEstimates,
    FedEveState,
    ServerHyper,
    aggregate,
    estimate_drift_variances,
    fedavg_step,
    fedavgm_step,
    fedeve_observe_update,
    fedeve_predict,
    fedopt_adam_step,
    fuse_gaussians,
    kalman_gain,
)

__version__ = "0.1.0"

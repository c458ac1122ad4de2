from .gru import GruBaselineParams, gru_baseline_forward, init_gru_network, matched_hidden_size
from .optim import Adam
from .rollout import RolloutBatch, collect_rollout, policy_forward, start_rollouts
from .targets import gae, td_lambda_targets
from .train import METRIC_COLUMNS, TrainResult, evaluate_trials, train, train_iter
from .updates import TrainerConfig, a2c_update, ppo_update

__all__ = [
    "Adam", "GruBaselineParams", "METRIC_COLUMNS", "RolloutBatch", "TrainResult", "TrainerConfig",
    "a2c_update", "collect_rollout", "evaluate_trials", "gae", "gru_baseline_forward",
    "init_gru_network", "matched_hidden_size", "policy_forward", "ppo_update", "start_rollouts",
    "td_lambda_targets", "train", "train_iter",
]

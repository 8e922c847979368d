from .network import QNetwork, StateEncoder
from .policies import BASELINES, LEARNED, POLICIES, BaselinePolicy, QocoPolicy, make_policy, select_action
from .replay import ReplayBuffer
from .runner import EpisodeMetrics, run_episode
from .trainer import TrainerState, target_q, train_step

__all__ = [
    "QNetwork", "StateEncoder", "BASELINES", "LEARNED", "POLICIES", "BaselinePolicy", "QocoPolicy",
    "make_policy", "select_action", "ReplayBuffer", "EpisodeMetrics", "run_episode", "TrainerState",
    "target_q", "train_step",
]

from .base import Env, EnvState, Transition
from .cartpole import StatelessCartPole
from .memory_length import MemoryLength
from .meta import MetaEnv, MetaState, ProjectionPair, sample_projection, trial_episode_wrapper
from .prev_action import PreviousActionObs, PreviousActionState
from .repeat_previous import RepeatPrevious

__all__ = [
    "Env", "EnvState", "Transition", "MemoryLength", "StatelessCartPole", "RepeatPrevious",
    "MetaEnv", "PreviousActionObs", "PreviousActionState", "MetaState", "ProjectionPair", "sample_projection", "trial_episode_wrapper",
]

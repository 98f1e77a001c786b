"""Double DQN learner with manual backprop, replay, Adam and an optional RND bonus."""

from .checkpoint import CheckpointError, decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint
from .dqn import AgentConfig, DQNAgent, act, double_dqn_update, epsilon, greedy, sync_target, td_targets
from .network import QNetwork, q_forward
from .optim import Adam
from .replay import Batch, ReplayBuffer
from .rnd import RNDPair, rnd_bonus, rnd_train_step

__all__ = [
    "Adam",
    "AgentConfig",
    "Batch",
    "CheckpointError",
    "DQNAgent",
    "QNetwork",
    "RNDPair",
    "ReplayBuffer",
    "act",
    "decode_checkpoint",
    "double_dqn_update",
    "encode_checkpoint",
    "epsilon",
    "greedy",
    "load_checkpoint",
    "q_forward",
    "rnd_bonus",
    "rnd_train_step",
    "save_checkpoint",
    "sync_target",
    "td_targets",
]

"""Reset-free RL laboratory: grid tasks, double DQN, evaluation and exact-MDP theory checks."""

__version__ = "0.1.0"

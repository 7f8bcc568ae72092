"""Diversity-regularised MaxminDQN / EnsembleDQN with CKA similarity analysis."""
from .agents import Agent, AgentConfig, TrainingRecord, train
from .regularizers import Regularizer

__all__ = ["Agent", "AgentConfig", "Regularizer", "TrainingRecord", "train"]
__version__ = "0.1.0"

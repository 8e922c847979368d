"""Slotted simulator of multi-device, multi-edge computation offloading with a
dueling double-DQN offloading agent and an experiment harness."""
from .config import AgentConfig, SimConfig, desk_profile, load_config, full_profile
from .mdp import Action, Experience, QoERecord, StateVector
from .tasks import Task
from .world import SlotReport, World

__version__ = "0.1.0"

__all__ = [
    "AgentConfig", "SimConfig", "desk_profile", "full_profile", "load_config",
    "Action", "Experience", "QoERecord", "StateVector", "Task", "World", "SlotReport",
]

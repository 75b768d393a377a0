"""Center selection and security allocation against a quantal-response attacker."""

from .model import GameInstance, generate_instance, read_instance, write_instance
from .objective import Strategy, defender_utility

__all__ = [
    "GameInstance",
    "Strategy",
    "defender_utility",
    "generate_instance",
    "read_instance",
    "write_instance",
]

__version__ = "0.1.0"

"""Dynamic tree-scan selective state space engine."""
from ._backend import BACKEND

__version__ = "0.1.0"

"""Accident-risk adaptive V2X broadcast simulator.

Each vehicle learns per-context danger weights with a tabular
epsilon-greedy contextual bandit; the summed weights set its CSMA backoff
so riskier vehicles get the medium first.
"""

from .errors import ConfigError, ContractViolation, ParameterError, V2XError

__version__ = "0.1.0"

__all__ = ["ConfigError", "ContractViolation", "ParameterError", "V2XError", "__version__"]

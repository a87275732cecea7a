"""Exception hierarchy for the solver library."""

from __future__ import annotations


class VolterraError(Exception):
    """Base class for all library errors."""


class ShapeError(VolterraError, ValueError):
    """Array dimensions disagree with a declared contract."""


class InputError(VolterraError, ValueError):
    """Non-finite or otherwise invalid numerical input."""


class ConfigError(VolterraError, ValueError):
    """Invalid run or solver configuration."""


class DomainError(VolterraError, ValueError):
    """Argument outside a function's mathematical domain (e.g. t > s)."""


class ContractError(VolterraError, ValueError):
    """A caller violated an operation precondition (missing data)."""


class SimulationError(VolterraError, RuntimeError):
    """Path simulation failed; carries the offending path and step."""

    def __init__(self, message: str, path_index: int | None = None,
                 step: int | None = None):
        super().__init__(message)
        self.path_index = path_index
        self.step = step


class TrainingError(VolterraError, RuntimeError):
    """Training diverged; carries the time step and, if known, the layer."""

    def __init__(self, message: str, step: int | None = None,
                 layer_index: int | None = None, last_state=None):
        super().__init__(message)
        self.step = step
        self.layer_index = layer_index
        self.last_state = last_state

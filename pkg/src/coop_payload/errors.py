"""Exception types shared across the estimation stages."""

from __future__ import annotations

import numpy as np


class EstimationError(RuntimeError):
    """Base class for failures of an estimation stage."""


class ObservabilityError(EstimationError):
    """The data do not determine every parameter.

    ``directions`` holds unit vectors (rows) spanning the unobservable
    subspace in the coordinates of the unknown; ``singular_values`` are those
    of the stacked regression matrix; ``partial_solution`` is the minimum-norm
    least-squares solution, which is correct on the observable complement.
    """

    label = "unobservable"

    def __init__(self, message: str, directions, singular_values=None, partial_solution=None):
        self.directions = np.atleast_2d(np.asarray(directions, dtype=float))
        self.singular_values = None if singular_values is None else np.asarray(singular_values)
        self.partial_solution = None if partial_solution is None else np.asarray(partial_solution)
        dirs = "; ".join(np.array2string(d, precision=4, suppress_small=True) for d in self.directions)
        super().__init__(f"{message} ({self.label} direction(s): {dirs})")


class InsufficientExcitation(ObservabilityError):
    label = "unexcited"


class InsufficientOrientations(ObservabilityError):
    label = "unobservable"


class UnrealizableWrenchError(EstimationError):
    """Requested net wrench has a component outside the grasp map's range."""

    def __init__(self, message: str, subspace, residual: float):
        self.subspace = np.atleast_2d(np.asarray(subspace, dtype=float))
        self.residual = float(residual)
        super().__init__(f"{message}; unreachable residual {residual:.3e}")


class DisconnectedGraphError(EstimationError):
    def __init__(self, unreachable):
        self.unreachable = sorted(unreachable)
        super().__init__(f"frames not connected to the reference: {self.unreachable}")


class DatasetError(ValueError):
    """Malformed or inconsistent dataset file."""

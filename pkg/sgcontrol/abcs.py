from abc import ABCMeta, abstractmethod
from typing import Optional, Sequence

import numpy as np

from .convexify import ConvexDecomposition, RelaxationTable
from .dynamics import Trajectory
from .saturation import LadderStep
from .signals import ControlSignal
from .torus import ModeSubspace, SpectralField


class ResultStorage(metaclass=ABCMeta):
    """Destination of the artifacts produced by the ``sgcontrol`` commands."""

    @abstractmethod
    def exists(self) -> bool:
        """Does a manifest already exist in this storage?"""
        pass

    @abstractmethod
    def save_trajectory(self, trajectory: Trajectory):
        """Save the norm diagnostics of a trajectory."""
        pass

    @abstractmethod
    def save_snapshot(self, index: int, state: SpectralField):
        """Save one state of a trajectory."""
        pass

    @abstractmethod
    def fetch_snapshot(self, index: int) -> SpectralField:
        """Retrieve a state saved by :meth:`save_snapshot`."""
        pass

    @abstractmethod
    def save_relaxation(self, table: RelaxationTable):
        """Save the sup norms of a relaxation study."""
        pass

    @abstractmethod
    def save_decomposition(self, decomposition: ConvexDecomposition):
        """Save a convex decomposition."""
        pass

    @abstractmethod
    def save_ladder(self, ladder: Sequence[LadderStep], meta: Optional[dict] = None):
        """Save a ladder certificate."""
        pass

    @abstractmethod
    def save_control(self, signal: ControlSignal, times: Optional[np.ndarray] = None,
                     support: Optional[ModeSubspace] = None):
        """Save the samples of a control signal."""
        pass

    @abstractmethod
    def save_manifest(self, manifest: dict):
        """Save the summary of a run."""
        pass

    @abstractmethod
    def fetch_manifest(self) -> dict:
        """Retrieve the summary of a run."""
        pass

from abc import ABC, abstractmethod
from pathlib import Path
from typing import Union
from iqsync.domain.models import DetectionSet

PathLike = Union[str, Path]

class IDetectionStore(ABC):
    """Interface for persisting Bob's detection record."""

    @abstractmethod
    def load(self, path: PathLike) -> DetectionSet:
        """Reads a detection file; rejects unsorted or malformed content."""
        pass

    @abstractmethod
    def save(self, path: PathLike, detections: DetectionSet) -> None:
        """Writes the detection timebins in ascending order."""
        pass

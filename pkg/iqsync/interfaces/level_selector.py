from abc import ABC, abstractmethod
import numpy as np

class ILevelSelector(ABC):
    """Interface for the pseudorandom level choice of the pattern generator.

    Selectors are addressed by symbol index (counter mode), so the scalar and
    the vectorized draws for the same k_s agree.
    """

    @abstractmethod
    def uniform_int(self, k_s: int, lo: int, hi: int) -> int:
        """Draws the level of symbol k_s uniformly from {lo, ..., hi}."""
        pass

    @abstractmethod
    def uniform_int_array(self, k_s: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """Vectorized uniform_int over arrays of symbol indices and bounds."""
        pass

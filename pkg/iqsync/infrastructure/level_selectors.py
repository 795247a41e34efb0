import numpy as np
from typing import Sequence
from iqsync.interfaces.level_selector import ILevelSelector
from iqsync.domain.exceptions import ConfigurationError
from iqsync.core.logger import get_logger

logger = get_logger(__name__)

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MIX_1 = 0xBF58476D1CE4E5B9
_MIX_2 = 0x94D049BB133111EB

# Counter layout: (k_s << ATTEMPT_BITS) | attempt, so k_s must stay below 2**56.
ATTEMPT_BITS = 8
MAX_ATTEMPTS = 1 << ATTEMPT_BITS


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int."""
    z = ((z ^ (z >> 30)) * _MIX_1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX_2) & MASK64
    return z ^ (z >> 31)


def mix64_array(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer on uint64 arrays; multiplication wraps modulo 2**64."""
    z = z.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= np.uint64(_MIX_1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_MIX_2)
    z ^= z >> np.uint64(31)
    return z


class SplitMixLevelSelector(ILevelSelector):
    """Counter-mode level selector built on the SplitMix64 mixing function.

    Word j of symbol k_s is mix64(key + ((k_s << 8) | j) * gamma). Spans that are
    not a power of two use rejection: words below 2**64 mod span are discarded
    and the next attempt of the same symbol is drawn.
    """

    def __init__(self, seed: int):
        self.seed = seed
        self._key = mix64(seed & MASK64)

    def word(self, k_s: int, attempt: int = 0) -> int:
        counter = ((k_s << ATTEMPT_BITS) | attempt) & MASK64
        return mix64((self._key + counter * GOLDEN_GAMMA) & MASK64)

    def uniform_int(self, k_s: int, lo: int, hi: int) -> int:
        span = hi - lo + 1
        if span < 1:
            raise ConfigurationError(f"empty level range [{lo}, {hi}]")
        if span == 1:
            return lo
        reject_below = (1 << 64) % span
        for attempt in range(MAX_ATTEMPTS):
            w = self.word(k_s, attempt)
            if w >= reject_below:
                return lo + w % span
        # 256 consecutive rejections have probability below 2**-256
        logger.warning(f"Rejection sampling exhausted at k_s={k_s}")
        return lo + w % span

    def _word_array(self, k_s: np.ndarray, attempt: int) -> np.ndarray:
        counter = (k_s << np.uint64(ATTEMPT_BITS)) | np.uint64(attempt)
        return mix64_array(np.uint64(self._key) + counter * np.uint64(GOLDEN_GAMMA))

    def uniform_int_array(self, k_s: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        k_s = np.asarray(k_s, dtype=np.uint64)
        lo = np.broadcast_to(np.asarray(lo, dtype=np.uint64), k_s.shape)
        hi = np.broadcast_to(np.asarray(hi, dtype=np.uint64), k_s.shape)
        span = hi - lo + np.uint64(1)
        out = lo.copy()
        pending = np.flatnonzero(span > 1)
        if pending.size == 0:
            return out
        # 2**64 mod span, computed as (2**64 - span) mod span in wrapping arithmetic
        reject_below = (np.zeros(pending.size, dtype=np.uint64) - span[pending]) % span[pending]
        for attempt in range(MAX_ATTEMPTS):
            w = self._word_array(k_s[pending], attempt)
            accepted = w >= reject_below
            if attempt == MAX_ATTEMPTS - 1:
                accepted[:] = True
            idx = pending[accepted]
            out[idx] = lo[idx] + w[accepted] % span[idx]
            pending = pending[~accepted]
            reject_below = reject_below[~accepted]
            if pending.size == 0:
                break
        return out


class ScriptedLevelSelector(ILevelSelector):
    """Replays a fixed row of level choices, one per symbol index."""

    def __init__(self, levels: Sequence[int]):
        self.levels = np.asarray(levels, dtype=np.uint64)

    def uniform_int(self, k_s: int, lo: int, hi: int) -> int:
        if k_s >= self.levels.size:
            raise ConfigurationError(f"scripted levels end at k_s={self.levels.size - 1}")
        level = int(self.levels[k_s])
        if not lo <= level <= hi:
            raise ConfigurationError(f"scripted level {level} at k_s={k_s} outside [{lo}, {hi}]")
        return level

    def uniform_int_array(self, k_s: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        k_s = np.asarray(k_s, dtype=np.uint64)
        if k_s.size and int(k_s.max()) >= self.levels.size:
            raise ConfigurationError(f"scripted levels end at k_s={self.levels.size - 1}")
        levels = self.levels[k_s.astype(np.int64)]
        if np.any(levels < lo) or np.any(levels > hi):
            raise ConfigurationError("scripted level outside its group range")
        return levels

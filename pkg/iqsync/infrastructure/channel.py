import math
from typing import Iterator, List, Optional, Tuple
import numpy as np

from iqsync.domain.models import SyncConfig, LinkParams, DetectionSet
from iqsync.domain.pattern import pattern_chunks
from iqsync.domain.exceptions import ConfigurationError, DetectionDataError
from iqsync.interfaces.level_selector import ILevelSelector
from iqsync.infrastructure.level_selectors import SplitMixLevelSelector
from iqsync.core.config import settings
from iqsync.core.logger import get_logger

logger = get_logger(__name__)

MAX_TIMEBIN = (1 << 63) - 1


def ppm_timebin(k_s: int, s: int) -> int:
    """Binary PPM: bit 0 is the early timebin of the symbol, bit 1 the late one."""
    if s not in (0, 1):
        raise ConfigurationError(f"PPM symbol must be 0 or 1, got {s}")
    return 2 * k_s + s


def _symbol_blocks(
    config: SyncConfig,
    selector: Optional[ILevelSelector],
    symbols: Optional[np.ndarray],
    chunk: int,
) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
    if symbols is None:
        selector = selector or SplitMixLevelSelector(config.seed)
        for k_s, _, s in pattern_chunks(config, selector, chunk_symbols=chunk):
            yield k_s.astype(np.int64), s.astype(np.int64)
        return
    if symbols.size != config.n_symbols:
        raise ConfigurationError(f"got {symbols.size} symbols for a pattern of {config.n_symbols}")
    for begin in range(0, symbols.size, chunk):
        end = min(begin + chunk, symbols.size)
        yield np.arange(begin, end, dtype=np.int64), symbols[begin:end].astype(np.int64)


def simulate_detections(
    config: SyncConfig,
    link: LinkParams,
    selector: Optional[ILevelSelector] = None,
    symbols: Optional[np.ndarray] = None,
    chunk_symbols: Optional[int] = None,
) -> DetectionSet:
    """Runs the pattern through a lossy, noisy channel and a single-photon detector.

    Each symbol is detected in its PPM timebin with probability p_sig; each of its
    two timebins independently collects a noise click with probability p_noise/2.
    All clicks are shifted by the clock offset, clicks before Bob's window are
    dropped and coincident clicks collapse into one detection.

    When the link carries a fractional offset or jitter, raw picosecond
    timestamps are attached; ``timebins`` then still holds the ideal indices.
    """
    chunk = chunk_symbols or settings.CHUNK_SYMBOLS
    offset = link.offset_timebins
    if 2 * config.n_symbols + abs(offset) > MAX_TIMEBIN:
        raise DetectionDataError("timebin index space overflow")

    rng = np.random.default_rng(link.rng_seed % (1 << 64))
    half_noise = link.p_noise / 2
    parts: List[np.ndarray] = []
    for k_s, s in _symbol_blocks(config, selector, symbols, chunk):
        base = 2 * k_s + offset
        hits = rng.random(k_s.size) < link.p_sig
        parts.append(base[hits] + s[hits])
        if half_noise > 0:
            early = rng.random(k_s.size) < half_noise
            late = rng.random(k_s.size) < half_noise
            parts.append(base[early])
            parts.append(base[late] + 1)

    clicks = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
    detections = DetectionSet.from_unsorted(clicks)
    timebins = detections.timebins

    raw = None
    if link.has_raw_timestamps and timebins.size:
        timing_rng = np.random.default_rng([link.rng_seed % (1 << 64), 1])
        jitter = link.jitter_sigma * timing_rng.standard_normal(timebins.size) if link.jitter_sigma > 0 else 0.0
        raw = (timebins + 0.5 + link.frac_offset + jitter) * config.timebin_duration
        raw = np.sort(np.clip(raw, 0.0, None))

    logger.debug(f"Simulated {timebins.size} detections over {config.n_symbols} symbols")
    if raw is None:
        return detections
    return detections.model_copy(update={"raw_timestamps": raw})


def align_timebins(
    raw_timestamps,
    timebin_duration: float,
    n_bins: Optional[int] = None,
) -> Tuple[float, DetectionSet]:
    """Aligns picosecond timestamps to timebins with a phase histogram.

    The circular mean of the phases around the histogram peak gives the shift
    that puts detections at timebin centers; shifted timestamps are then floor
    divided by the timebin duration.
    """
    n_bins = n_bins or settings.HISTOGRAM_BINS
    if n_bins < 8:
        raise ConfigurationError(f"n_bins must be at least 8, got {n_bins}")
    if timebin_duration <= 0:
        raise ConfigurationError("timebin duration must be positive")
    t = np.asarray(raw_timestamps, dtype=np.float64)
    if t.size == 0:
        raise DetectionDataError("no timestamps to align")
    if np.any(t < 0):
        raise DetectionDataError("timestamps must be non-negative")

    phase = np.mod(t, timebin_duration) / timebin_duration
    hist, _ = np.histogram(phase, bins=n_bins, range=(0.0, 1.0))
    expected = t.size / n_bins
    peak = int(np.argmax(hist))

    if hist[peak] < expected + 3 * math.sqrt(expected):
        logger.warning("Timestamp phase histogram is flat; applying zero shift")
        shift = 0.0
    else:
        half_width = max(1, n_bins // 8)
        bin_idx = np.minimum((phase * n_bins).astype(np.int64), n_bins - 1)
        distance = (bin_idx - peak) % n_bins
        near = (distance <= half_width) | (distance >= n_bins - half_width)
        angles = 2 * np.pi * phase[near]
        mean_angle = math.atan2(float(np.sin(angles).sum()), float(np.cos(angles).sum()))
        peak_phase = (mean_angle / (2 * np.pi)) % 1.0
        shift = (peak_phase - 0.5) * timebin_duration

    indices = np.floor((t - shift) / timebin_duration).astype(np.int64)
    aligned = DetectionSet.from_unsorted(indices).model_copy(update={"raw_timestamps": t})
    return shift, aligned

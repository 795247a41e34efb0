"""Dichotomic clock-offset recovery.

Levels are resolved from the least significant offset bit upwards. For level l
every detection of the group carrying l votes on whether the offset bit l is
already right: its shifted position must carry bit (l - 1) of its own symbol
index. A majority of disagreeing votes flips the bit. Within one level the
running offset is constant, so each level is evaluated as one array
expression over the slice of detections the listing would iterate.
"""
from typing import Sequence, Union
import numpy as np

from iqsync.domain.models import DetectionSet, RecoveryResult
from iqsync.domain.exceptions import ConfigurationError, DetectionDataError
from iqsync.core.logger import get_logger

logger = get_logger(__name__)

_ONE = np.uint64(1)


def _as_timebins(detections: Union[DetectionSet, Sequence[int], np.ndarray]) -> np.ndarray:
    if isinstance(detections, DetectionSet):
        return detections.timebins
    arr = np.asarray(detections)
    if arr.ndim != 1:
        raise DetectionDataError("detections must be one-dimensional")
    if arr.size == 0:
        return np.zeros(0, dtype=np.uint64)
    if arr.dtype.kind not in "iu":
        raise DetectionDataError(f"detections must be integer timebins, got dtype {arr.dtype}")
    if arr.dtype.kind == "i" and arr.min() < 0:
        raise DetectionDataError("detections must be non-negative")
    arr = arr.astype(np.uint64)
    if np.any(arr[1:] < arr[:-1]):
        raise DetectionDataError("detections must be sorted ascending")
    return arr


def recover_offset(
    l_max: int,
    d_i: int,
    detections: Union[DetectionSet, Sequence[int], np.ndarray],
) -> RecoveryResult:
    """Recovers the clock offset in timebins; positive when Bob's clock runs ahead."""
    if l_max < 1 or not 1 <= d_i <= l_max + 1:
        raise ConfigurationError(f"invalid configuration l_max={l_max}, d_i={d_i}")
    d = _as_timebins(detections)
    n_levels = l_max + 1
    if d.size == 0:
        logger.warning("No detections; returning a zero offset")
        return RecoveryResult(
            delta_timebins=0, delta_symbols=0, level_counters=[0] * n_levels, loop_iterations=0, no_data=True
        )

    window_lo = 1 << (l_max - 1)
    window_hi = (1 << n_levels) - window_lo
    groups = (d >> _ONE) >> np.uint64(n_levels)
    in_group = (d >> _ONE) & np.uint64((1 << n_levels) - 1)
    in_window = (in_group >= np.uint64(window_lo)) & (in_group < np.uint64(window_hi))

    delta = 0
    k_start = 0
    counters = []
    iterations = 0
    for level in range(n_levels):
        g_req = level // d_i
        # first index at or after k_start whose group lies beyond g_req
        k_stop = k_start + int(np.searchsorted(groups[k_start:], np.uint64(g_req), side="right"))
        iterations += k_stop - k_start

        mask = in_window[k_start:k_stop]
        shifted = d[k_start:k_stop][mask] + np.uint64(delta)
        expected = (((shifted >> _ONE) << _ONE) >> np.uint64(level)) & _ONE
        matches = int(np.count_nonzero((shifted & _ONE) == expected))
        counter = 2 * matches - int(shifted.size)
        counters.append(counter)
        if counter < 0:
            delta += 1 << level

        if k_stop < d.size and (level + 1) // d_i > g_req:
            k_start = k_stop

    if delta > (1 << l_max):
        delta -= 1 << n_levels
    delta = -delta
    logger.debug(f"Recovered offset {delta} timebins from {d.size} detections, counters {counters}")
    return RecoveryResult(
        delta_timebins=delta,
        delta_symbols=int(delta / 2),
        level_counters=counters,
        loop_iterations=iterations,
    )


def verify_range(delta: int, l_max: int, strict: bool = False) -> bool:
    """Whether delta lies in the range recover_offset can return.

    strict restricts to whole-symbol offsets in [-Delta_max, Delta_max - 2]
    plus a one-timebin sub-offset.
    """
    if strict:
        delta_max = 1 << (l_max - 1)
        return -2 * delta_max <= delta <= 2 * (delta_max - 2) + 1
    return -(1 << l_max) <= delta <= (1 << l_max) - 1

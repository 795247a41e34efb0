"""Synchronization pattern generation.

Symbols are produced in groups of N_s,g = 2**(l_max+1). Group k_g carries the
levels k_g*d_i ... min(k_g*d_i + d_i - 1, l_max); every symbol takes one of them
at random and transmits bit (level - 1) of its own index (0 for level 0).
"""
from typing import Iterator, Optional, Tuple
import numpy as np

from iqsync.domain.models import SyncConfig, SymbolRecord
from iqsync.domain.exceptions import ConfigurationError
from iqsync.interfaces.level_selector import ILevelSelector

PICOSECONDS_PER_SECOND = 1e12


def derived_counts(config: SyncConfig) -> Tuple[int, int, int, int]:
    """Returns (N_l, N_g, N_s,g, N_s)."""
    if config.l_max < 1 or not 1 <= config.d_i <= config.l_max + 1:
        raise ConfigurationError(f"invalid configuration l_max={config.l_max}, d_i={config.d_i}")
    return config.n_levels, config.n_groups, config.symbols_per_group, config.n_symbols


def symbol_bit(k_s: int, level: int) -> int:
    return ((k_s << 1) >> level) & 1


def level_range(config: SyncConfig, k_g: int) -> Tuple[int, int]:
    lo = k_g * config.d_i
    return lo, min(lo + config.d_i - 1, config.l_max)


def symbol_at(config: SyncConfig, selector: ILevelSelector, k_s: int) -> SymbolRecord:
    if not 0 <= k_s < config.n_symbols:
        raise ConfigurationError(f"symbol index {k_s} outside [0, {config.n_symbols})")
    k_g = k_s >> config.n_levels
    lo, hi = level_range(config, k_g)
    level = selector.uniform_int(k_s, lo, hi)
    return SymbolRecord.model_construct(k_s=k_s, k_g=k_g, level=level, symbol=symbol_bit(k_s, level))


def generate_pattern(config: SyncConfig, selector: ILevelSelector) -> Iterator[SymbolRecord]:
    """Yields the N_s symbols in order, holding only the current one."""
    derived_counts(config)
    for k_s in range(config.n_symbols):
        yield symbol_at(config, selector, k_s)


def pattern_chunks(
    config: SyncConfig,
    selector: ILevelSelector,
    chunk_symbols: int = 1 << 20,
    start: int = 0,
    stop: Optional[int] = None,
) -> Iterator[Tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Vectorized generate_pattern: yields (k_s, level, symbol) uint64 blocks."""
    derived_counts(config)
    stop = config.n_symbols if stop is None else min(stop, config.n_symbols)
    n_levels = np.uint64(config.n_levels)
    d_i = np.uint64(config.d_i)
    l_max = np.uint64(config.l_max)
    for begin in range(start, stop, chunk_symbols):
        k_s = np.arange(begin, min(begin + chunk_symbols, stop), dtype=np.uint64)
        lo = (k_s >> n_levels) * d_i
        hi = np.minimum(lo + d_i - np.uint64(1), l_max)
        levels = selector.uniform_int_array(k_s, lo, hi)
        symbols = ((k_s << np.uint64(1)) >> levels) & np.uint64(1)
        yield k_s, levels, symbols


def pattern_symbols(config: SyncConfig, selector: ILevelSelector) -> np.ndarray:
    """Materializes the whole symbol row as uint8; only for small patterns."""
    if config.n_symbols == 0:
        return np.zeros(0, dtype=np.uint8)
    return np.concatenate([s.astype(np.uint8) for _, _, s in pattern_chunks(config, selector)])


def max_offset(config: SyncConfig) -> Tuple[int, float]:
    """Returns (Delta_max in symbols, Delta_max in picoseconds)."""
    delta_max = config.delta_max
    return delta_max, delta_max * config.t_s


def pattern_duration(config: SyncConfig) -> float:
    """T = N_s * t_s in seconds."""
    return config.n_symbols * config.t_s / PICOSECONDS_PER_SECOND

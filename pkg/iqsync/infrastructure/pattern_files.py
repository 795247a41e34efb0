import struct
from pathlib import Path
from typing import Optional, Union
import numpy as np

from iqsync.domain.models import SyncConfig
from iqsync.domain.pattern import pattern_chunks
from iqsync.domain.exceptions import DetectionDataError
from iqsync.interfaces.level_selector import ILevelSelector
from iqsync.infrastructure.level_selectors import SplitMixLevelSelector
from iqsync.core.logger import get_logger

logger = get_logger(__name__)

# Little-endian uint64 symbol count, then the symbols packed LSB-first.
HEADER = struct.Struct("<Q")


def pack_symbols(symbols: np.ndarray) -> bytes:
    symbols = np.asarray(symbols, dtype=np.uint8)
    return HEADER.pack(symbols.size) + np.packbits(symbols, bitorder="little").tobytes()


def unpack_symbols(data: bytes) -> np.ndarray:
    if len(data) < HEADER.size:
        raise DetectionDataError("pattern file shorter than its length prefix")
    (n_symbols,) = HEADER.unpack_from(data)
    payload = np.frombuffer(data, dtype=np.uint8, offset=HEADER.size)
    if payload.size * 8 < n_symbols:
        raise DetectionDataError(f"pattern file holds {payload.size * 8} bits, prefix says {n_symbols}")
    return np.unpackbits(payload, count=n_symbols, bitorder="little")


def write_pattern(path: Union[str, Path], config: SyncConfig, selector: Optional[ILevelSelector] = None) -> int:
    """Streams the packed pattern to disk chunk by chunk; returns N_s."""
    chunk = 1 << 20  # multiple of 8, so chunk boundaries stay byte aligned
    selector = selector or SplitMixLevelSelector(config.seed)
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(config.n_symbols))
        for _, _, symbols in pattern_chunks(config, selector, chunk_symbols=chunk):
            fh.write(np.packbits(symbols.astype(np.uint8), bitorder="little").tobytes())
    logger.info(f"Wrote {config.n_symbols} symbols to {path}")
    return config.n_symbols


def read_pattern(path: Union[str, Path]) -> np.ndarray:
    return unpack_symbols(Path(path).read_bytes())

from pathlib import Path
import numpy as np

from iqsync.interfaces.detection_store import IDetectionStore, PathLike
from iqsync.domain.models import DetectionSet
from iqsync.domain.exceptions import DetectionDataError
from iqsync.core.logger import get_logger

logger = get_logger(__name__)


def _validated(values: np.ndarray, source: PathLike) -> DetectionSet:
    if values.size > 1 and not np.all(values[1:] > values[:-1]):
        raise DetectionDataError(f"{source}: timebins are not strictly increasing")
    return DetectionSet(timebins=values)


class TextDetectionStore(IDetectionStore):
    """One decimal timebin index per line; blank lines and '#' comments are skipped."""

    def load(self, path: PathLike) -> DetectionSet:
        values = []
        try:
            with open(path, "r", encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, start=1):
                    text = line.split("#", 1)[0].strip()
                    if not text:
                        continue
                    try:
                        value = int(text)
                    except ValueError:
                        raise DetectionDataError(f"{path}:{lineno}: not an integer: {text!r}")
                    if value < 0:
                        raise DetectionDataError(f"{path}:{lineno}: negative timebin {value}")
                    values.append(value)
        except OSError as e:
            raise DetectionDataError(f"cannot read {path}: {e}")
        logger.info(f"Loaded {len(values)} detections from {path}")
        return _validated(np.asarray(values, dtype=np.uint64), path)

    def save(self, path: PathLike, detections: DetectionSet) -> None:
        np.savetxt(path, detections.timebins, fmt="%d")
        logger.info(f"Wrote {len(detections)} detections to {path}")


class BinaryDetectionStore(IDetectionStore):
    """Raw little-endian uint64 timebin indices."""

    def load(self, path: PathLike) -> DetectionSet:
        try:
            data = Path(path).read_bytes()
        except OSError as e:
            raise DetectionDataError(f"cannot read {path}: {e}")
        if len(data) % 8:
            raise DetectionDataError(f"{path}: size {len(data)} is not a multiple of 8 bytes")
        values = np.frombuffer(data, dtype="<u8").astype(np.uint64)
        logger.info(f"Loaded {values.size} detections from {path}")
        return _validated(values, path)

    def save(self, path: PathLike, detections: DetectionSet) -> None:
        Path(path).write_bytes(detections.timebins.astype("<u8").tobytes())
        logger.info(f"Wrote {len(detections)} detections to {path}")


def detection_store_for(path: PathLike) -> IDetectionStore:
    if Path(path).suffix.lower() == ".bin":
        return BinaryDetectionStore()
    return TextDetectionStore()

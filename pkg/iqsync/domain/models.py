import math
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import List, Literal, Optional, Union
import numpy as np

class SyncConfig(BaseModel):
    """Protocol parameters agreed by Alice and Bob before synchronization."""
    model_config = ConfigDict(frozen=True)

    l_max: int = Field(ge=1, le=60, description="Maximum level")
    d_i: int = Field(default=1, ge=1, description="Degree of interleaving")
    seed: int = Field(default=0, description="Seed of the level selector (64 bit)")
    t_s: float = Field(default=1600.0, gt=0, description="Symbol duration in picoseconds")

    @model_validator(mode="after")
    def _check_interleaving(self) -> "SyncConfig":
        if self.d_i > self.l_max + 1:
            raise ValueError(f"d_i={self.d_i} exceeds the number of levels {self.l_max + 1}")
        return self

    @property
    def n_levels(self) -> int:
        return self.l_max + 1

    @property
    def n_groups(self) -> int:
        return -(-self.n_levels // self.d_i)

    @property
    def symbols_per_group(self) -> int:
        return 1 << self.n_levels

    @property
    def n_symbols(self) -> int:
        return self.symbols_per_group * self.n_groups

    @property
    def delta_max(self) -> int:
        return 1 << (self.l_max - 1)

    @property
    def timebin_duration(self) -> float:
        return self.t_s / 2

class SymbolRecord(BaseModel):
    """One transmitted symbol of the synchronization pattern."""
    model_config = ConfigDict(frozen=True)

    k_s: int
    k_g: int
    level: int
    symbol: int = Field(ge=0, le=1)

class LinkParams(BaseModel):
    """Per-symbol detection statistics of the link plus the injected clock offset."""
    model_config = ConfigDict(frozen=True)

    p_sig: float = Field(ge=0, le=1)
    p_noise: float = Field(default=0.0, ge=0, le=1)
    offset_timebins: int = 0
    frac_offset: float = Field(default=0.0, ge=0, lt=1)
    jitter_sigma: float = Field(default=0.0, ge=0)
    rng_seed: int = 0

    @classmethod
    def from_attenuation(cls, eta_db: float, mu: float = 1.0, **kwargs) -> "LinkParams":
        return cls(p_sig=min(1.0, mu * 10 ** (-eta_db / 10)), **kwargs)

    @property
    def attenuation_db(self) -> float:
        if self.p_sig <= 0:
            return math.inf
        return -10 * math.log10(self.p_sig)

    @property
    def has_raw_timestamps(self) -> bool:
        return self.frac_offset > 0 or self.jitter_sigma > 0

class DetectionSet(BaseModel):
    """Timebin indices Bob observed, strictly increasing."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    timebins: np.ndarray
    raw_timestamps: Optional[np.ndarray] = None

    @field_validator("timebins", mode="before")
    @classmethod
    def _as_sorted_uint64(cls, value):
        arr = np.asarray(value)
        if arr.ndim != 1:
            raise ValueError("timebins must be one-dimensional")
        if arr.size == 0:
            return np.zeros(0, dtype=np.uint64)
        if arr.dtype.kind not in "iu":
            raise ValueError(f"timebins must be integers, got dtype {arr.dtype}")
        if arr.dtype.kind == "i" and arr.min() < 0:
            raise ValueError("timebins must be non-negative")
        arr = arr.astype(np.uint64)
        if not np.all(arr[1:] > arr[:-1]):
            raise ValueError("timebins must be strictly increasing")
        return arr

    @field_validator("raw_timestamps", mode="before")
    @classmethod
    def _as_float(cls, value):
        if value is None:
            return None
        return np.asarray(value, dtype=np.float64)

    @classmethod
    def from_unsorted(cls, values) -> "DetectionSet":
        arr = np.asarray(values)
        if arr.size and arr.dtype.kind == "i":
            arr = arr[arr >= 0]
        return cls(timebins=np.unique(arr.astype(np.uint64)))

    def __len__(self) -> int:
        return int(self.timebins.size)

    def as_list(self) -> List[int]:
        return [int(v) for v in self.timebins.tolist()]

class RecoveryResult(BaseModel):
    """Outcome of the dichotomic offset recovery."""
    delta_timebins: int
    delta_symbols: int
    level_counters: List[int]
    loop_iterations: int
    no_data: bool = False

class ModelResult(BaseModel):
    """Analytical success probability and the normal-approximation moments behind it."""
    p_success_1: float = Field(ge=0, le=1)
    p_success: float = Field(ge=0, le=1)
    mu_tot: float
    sigma_tot: float = Field(ge=0)
    p_rand: float
    normal_approx_valid: bool
    signal_approx_valid: bool

    @property
    def p_fail(self) -> float:
        return 1.0 - self.p_success

class NoiseSpec(BaseModel):
    """Noise policy: none, a fixed probability, or a fixed ratio to p_sig."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["zero", "fixed", "ratio"] = "zero"
    value: float = Field(default=0.0, ge=0)

    def p_noise(self, p_sig: float) -> float:
        if self.kind == "fixed":
            return self.value
        if self.kind == "ratio":
            return min(1.0, self.value * p_sig)
        return 0.0

    @property
    def label(self) -> str:
        if self.kind == "ratio":
            return f"{self.value:g}*p_sig"
        return f"{self.p_noise(0.0):g}"

class ComplexityPoint(BaseModel):
    """One point of the time-complexity curve at the tolerable attenuation."""
    l_max: int
    d_i: int
    delta_max: int
    eta_db: Optional[float] = None
    p_sig: Optional[float] = None
    p_noise: Optional[float] = None
    n_loop: Optional[float] = None
    fft_reference: float
    solved: bool = True
    note: str = ""

class PolyLogFit(BaseModel):
    """Fit of f(n) = a (log2 n)^b."""
    a: float
    b: float
    max_rel_dev: float
    n_points: int

    def __call__(self, n: float) -> float:
        return self.a * math.log2(n) ** self.b

DiChoice = Union[int, Literal["max"]]

class SweepSpec(BaseModel):
    """Monte-Carlo grid: configurations x link points x noise policy x trials."""
    l_max_values: List[int] = Field(min_length=1)
    d_i_values: List[DiChoice] = Field(min_length=1)
    p_sig_values: List[float] = Field(min_length=1)
    noise: NoiseSpec = NoiseSpec()
    trials: int = Field(ge=1)
    base_seed: int = 0
    t_s: float = Field(default=1600.0, gt=0)
    out: Optional[str] = None

    @field_validator("p_sig_values")
    @classmethod
    def _check_probabilities(cls, values: List[float]) -> List[float]:
        for p in values:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"p_sig={p} outside [0, 1]")
        return values

class TrialRecord(BaseModel):
    """One synchronization attempt of a sweep cell."""
    l_max: int
    d_i: int
    p_sig: float
    p_noise: float
    trial: int
    seed: int
    injected_offset_tb: int
    recovered_offset_tb: int
    success: bool
    loop_iterations: int
    detections: int

class CellSummary(BaseModel):
    """Aggregate of all trials of one sweep cell."""
    l_max: int
    d_i: int
    p_sig: float
    p_noise: float
    n_symbols: int
    trials: int = 0
    failures: int = 0
    p_fail: Optional[float] = None
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None
    p_fail_model: Optional[float] = None
    mean_loop_iterations: Optional[float] = None
    n_loop_model: Optional[float] = None
    skipped: bool = False
    note: str = ""

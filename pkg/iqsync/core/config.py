from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field
from typing import Optional

class Settings(BaseSettings):
    """
    Protocol and harness configuration using Pydantic Settings.
    Reads from environment variables and a key=value env file.
    Keys mirror the command-line flags (``LMAX`` <-> ``--lmax``).
    """
    APP_NAME: str = "iQSync"
    LOG_LEVEL: str = Field(default="INFO", description="Root level of the iqsync logger")

    # Protocol
    LMAX: int = Field(default=10, ge=1, description="Maximum level l_max")
    DI: str = Field(default="1", description="Degree of interleaving, integer or 'max'")
    SEED: int = Field(default=0x5EED, description="Seed of the level selector and of sweep trials")
    TS_PS: float = Field(default=1600.0, gt=0, description="Symbol duration in picoseconds")

    # Link
    PSIG: Optional[float] = Field(default=None, ge=0, le=1, description="Signal detection probability per symbol")
    PNOISE: float = Field(default=0.0, ge=0, le=1, description="Noise detection probability per symbol")
    PNOISE_RATIO: Optional[float] = Field(default=None, ge=0, description="Noise as a multiple of PSIG, alternative to PNOISE")
    ETA_DB: Optional[float] = Field(default=None, ge=0, description="Channel attenuation, alternative to PSIG")
    OFFSET_TB: int = Field(default=0, description="Injected clock offset in timebins")
    FRAC_OFFSET: float = Field(default=0.0, ge=0, lt=1)
    JITTER_SIGMA: float = Field(default=0.0, ge=0)

    # Harness
    TRIALS: int = Field(default=50, ge=1)
    TARGET: float = Field(default=0.5, gt=0, lt=1, description="Target success probability of the attenuation solver")
    OUT: Optional[str] = None
    FORCE: bool = False
    WORKERS: int = Field(default=1, ge=1)
    MAX_SIMULATED_SYMBOLS: int = 2**30
    MAX_SWEEP_SYMBOLS: int = 2**22
    CHUNK_SYMBOLS: int = 2**20
    HISTOGRAM_BINS: int = Field(default=64, ge=8)
    CSV_SIGNIFICANT_DIGITS: int = 9

    # Tolerable-attenuation solver
    BISECTION_TOL_DB: float = 1e-4
    BISECTION_P_TOL: float = 1e-10
    BISECTION_MAX_ITER: int = 200
    BISECTION_ETA_MAX_DB: float = 3000.0

    model_config = SettingsConfigDict(env_file=".env", env_file_encoding="utf-8", extra="ignore")

settings = Settings()

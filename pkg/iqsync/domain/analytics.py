"""Closed-form models of the dichotomic offset recovery.

Per level the counter C is the difference of signal votes and two symmetric
random vote streams over the N_s,g/2 symbols of the acceptance window, each
approximated by a normal distribution. The recovery succeeds when every level
has C > 0.
"""
import math
from typing import Iterable, List, Optional, Sequence, Tuple, Union
import numpy as np
from scipy.stats import beta, norm
from sklearn.linear_model import LinearRegression

from iqsync.domain.models import ComplexityPoint, DiChoice, ModelResult, NoiseSpec, PolyLogFit
from iqsync.domain.exceptions import (
    ConfigurationError,
    FitError,
    NoDetectionStatisticsError,
    NoSolutionError,
    SolverError,
)
from iqsync.core.config import settings
from iqsync.core.logger import get_logger

logger = get_logger(__name__)

GOLDEN_RATIO = (1 + math.sqrt(5)) / 2
# Clean and noisy tolerable attenuation differ by this much where the clean
# curve's transmission equals p_noise.
KINK_GAP_DB = 10 * math.log10(GOLDEN_RATIO)
MONOTONICITY_SAMPLES = 16


def _check_probability(name: str, p: float) -> None:
    if not 0.0 <= p <= 1.0 or math.isnan(p):
        raise ConfigurationError(f"{name}={p} outside [0, 1]")


def _check_config(l_max: int, d_i: int) -> None:
    if l_max < 1 or not 1 <= d_i <= l_max + 1:
        raise ConfigurationError(f"invalid configuration l_max={l_max}, d_i={d_i}")


def attenuation_to_p_sig(eta_db: float, mu: float = 1.0) -> float:
    return min(1.0, mu * 10 ** (-eta_db / 10))


def p_sig_to_attenuation(p_sig: float, mu: float = 1.0) -> float:
    if p_sig <= 0:
        return math.inf
    return -10 * math.log10(p_sig / mu)


def detection_probability(p_sig: float, p_noise: float) -> float:
    """p_det: at least one click in the two timebins of a symbol."""
    return 1.0 - (1.0 - p_sig) * (1.0 - p_noise)


def p_rand_exact(p_sig: float, p_noise: float, d_i: int) -> float:
    """Probability that a symbol yields a click uncorrelated with the current level."""
    _check_probability("p_sig", p_sig)
    _check_probability("p_noise", p_noise)
    if d_i < 1:
        raise ConfigurationError(f"d_i must be at least 1, got {d_i}")
    return 1.0 - (1.0 - p_noise) * (1.0 - p_sig * (1.0 - 1.0 / d_i))


def _normal_ok(n: float, p: float) -> bool:
    """The 3-sigma rule 9(1-p)/(np) < 1; never met by an empty binomial (p = 0)."""
    if p <= 0:
        return False
    return bool(9 * (1 - p) / (n * p) < 1)


def success_probability(l_max: int, d_i: int, p_sig: float, p_noise: float) -> ModelResult:
    _check_config(l_max, d_i)
    _check_probability("p_sig", p_sig)
    _check_probability("p_noise", p_noise)

    n = float(1 << l_max)  # N_s,g / 2 symbols inside the acceptance window
    p_s = p_sig / d_i
    p_r = p_rand_exact(p_sig, p_noise, d_i)
    mu_tot = n * p_s
    var_sig = n * p_s * (1 - p_s)
    var_rand = n * (p_r / 2) * (1 - p_r / 2)
    sigma_tot = math.sqrt(var_sig + 2 * var_rand)

    if sigma_tot == 0:
        if mu_tot <= 0:
            raise NoDetectionStatisticsError("no detection statistics: p_sig = p_noise = 0")
        p1 = 1.0
    else:
        p1 = float(norm.cdf(mu_tot / sigma_tot))

    signal_ok = _normal_ok(n, p_s)
    valid = signal_ok and _normal_ok(n, p_r / 2)
    if not valid:
        logger.debug(f"Normal approximation outside its validity range (l_max={l_max}, p_sig={p_sig:g})")

    return ModelResult(
        p_success_1=p1,
        p_success=p1 ** (l_max + 1),
        mu_tot=mu_tot,
        sigma_tot=sigma_tot,
        p_rand=p_r,
        normal_approx_valid=valid,
        signal_approx_valid=signal_ok,
    )


def expected_loop_iterations(l_max: int, d_i: int, p_sig: float, p_noise: float) -> float:
    """N_loop = p_det * N_s,g * N_l; every level scans the detections of one group."""
    _check_config(l_max, d_i)
    return detection_probability(p_sig, p_noise) * (1 << (l_max + 1)) * (l_max + 1)


def expected_detections(l_max: int, d_i: int, p_sig: float, p_noise: float) -> float:
    _check_config(l_max, d_i)
    n_groups = -(-(l_max + 1) // d_i)
    return detection_probability(p_sig, p_noise) * (1 << (l_max + 1)) * n_groups


def qber_estimate(p_sig: float, p_noise: float) -> float:
    if p_sig <= 0:
        raise ConfigurationError("QBER needs p_sig > 0")
    return p_noise / (2 * p_sig)


def _as_noise(p_noise: Union[float, NoiseSpec]) -> NoiseSpec:
    if isinstance(p_noise, NoiseSpec):
        return p_noise
    _check_probability("p_noise", p_noise)
    return NoiseSpec(kind="fixed", value=p_noise)


def tolerable_attenuation(
    l_max: int,
    d_i: int,
    p_noise: Union[float, NoiseSpec],
    p_target: float,
    tol_db: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> float:
    """Largest attenuation (dB, mu = 1) at which P_success still reaches p_target.

    Bisection on eta; P_success falls monotonically with eta. Raises
    NoSolutionError when p_target is out of reach and SolverError when the
    bracket is not monotone.
    """
    _check_config(l_max, d_i)
    if not 0.0 < p_target < 1.0:
        raise ConfigurationError(f"p_target={p_target} outside (0, 1)")
    noise = _as_noise(p_noise)
    tol_db = settings.BISECTION_TOL_DB if tol_db is None else tol_db
    max_iter = settings.BISECTION_MAX_ITER if max_iter is None else max_iter

    floor = 0.5 ** (l_max + 1)
    if p_target <= floor:
        raise NoSolutionError(f"p_target={p_target:g} at or below the zero-signal limit {floor:g}")

    def f(eta: float) -> float:
        p_sig = attenuation_to_p_sig(eta)
        return success_probability(l_max, d_i, p_sig, noise.p_noise(p_sig)).p_success

    if f(0.0) < p_target:
        raise NoSolutionError(f"p_target={p_target:g} not reached even without loss")

    hi = 10.0
    while f(hi) >= p_target:
        if hi >= settings.BISECTION_ETA_MAX_DB:
            raise NoSolutionError(f"p_target={p_target:g} still met at {hi:g} dB")
        hi = min(2 * hi, settings.BISECTION_ETA_MAX_DB)

    if d_i > 1:
        etas = np.linspace(0.0, hi, MONOTONICITY_SAMPLES)
        values = np.array([f(e) for e in etas])
        rising = np.flatnonzero(np.diff(values) > 1e-12)
        if rising.size:
            i = int(rising[0])
            raise SolverError(
                f"P_success not monotone in eta: {values[i]:.6g} at {etas[i]:.4g} dB "
                f"< {values[i + 1]:.6g} at {etas[i + 1]:.4g} dB"
            )

    lo = 0.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break  # floating-point resolution exhausted
        value = f(mid)
        if value >= p_target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol_db and abs(value - p_target) <= settings.BISECTION_P_TOL:
            return mid
    return 0.5 * (lo + hi)


def _d_i_for(l_max: int, policy: DiChoice) -> int:
    if policy == "max":
        return l_max + 1
    if policy == "none":
        return 1
    return int(policy)


def fft_reference_cost(delta_max: int) -> float:
    return delta_max * math.log2(delta_max) if delta_max > 1 else 0.0


def complexity_curve(
    l_max_values: Iterable[int],
    d_i_policy: Union[DiChoice, str],
    noise: Union[float, NoiseSpec],
    p_target: float = 0.5,
) -> List[ComplexityPoint]:
    noise = _as_noise(noise)
    points = []
    for l_max in l_max_values:
        d_i = _d_i_for(l_max, d_i_policy)
        delta_max = 1 << (l_max - 1)
        try:
            eta = tolerable_attenuation(l_max, d_i, noise, p_target)
        except (SolverError, ConfigurationError) as e:
            logger.warning(f"No tolerable attenuation for l_max={l_max}, d_i={d_i}: {e}")
            points.append(ComplexityPoint(
                l_max=l_max, d_i=d_i, delta_max=delta_max,
                fft_reference=fft_reference_cost(delta_max), solved=False, note=str(e),
            ))
            continue
        p_sig = attenuation_to_p_sig(eta)
        p_noise = noise.p_noise(p_sig)
        points.append(ComplexityPoint(
            l_max=l_max, d_i=d_i, delta_max=delta_max, eta_db=eta, p_sig=p_sig, p_noise=p_noise,
            n_loop=expected_loop_iterations(l_max, d_i, p_sig, p_noise),
            fft_reference=fft_reference_cost(delta_max),
        ))
    return points


def polylog_fit(points: Sequence[Tuple[float, float]]) -> PolyLogFit:
    """Least-squares fit of y = a (log2 n)^b in log-log space."""
    if len(points) < 3:
        raise FitError(f"need at least 3 points, got {len(points)}")
    data = np.asarray(points, dtype=np.float64)
    n, y = data[:, 0], data[:, 1]
    if not np.all(np.isfinite(data)) or np.any(n < 2) or np.any(y <= 0):
        raise FitError("points need finite n >= 2 and y > 0")
    x = np.log(np.log2(n))
    if np.ptp(x) == 0:
        raise FitError("all points share the same n")

    model = LinearRegression()
    model.fit(x.reshape(-1, 1), np.log(y))
    a = float(math.exp(model.intercept_))
    b = float(model.coef_[0])
    fitted = a * np.log2(n) ** b
    max_rel_dev = float(np.max(np.abs(fitted - y) / y))
    return PolyLogFit(a=a, b=b, max_rel_dev=max_rel_dev, n_points=len(points))


def reference_durations(delta_max: int) -> Tuple[int, int, int]:
    """Pattern lengths in symbols: iQSync without and with maximal interleaving,
    and a single-FFT cross-correlation covering the same search window."""
    if delta_max < 1 or delta_max & (delta_max - 1):
        raise ConfigurationError(f"delta_max={delta_max} is not a power of two")
    l_max = delta_max.bit_length()
    n_levels = l_max + 1
    per_group = 1 << n_levels
    return per_group * n_levels, per_group, 2 * delta_max


def binomial_ci(failures: int, trials: int, confidence: float = 0.95) -> Tuple[float, float]:
    """Clopper-Pearson interval for a failure rate."""
    if trials < 1 or not 0 <= failures <= trials:
        raise ConfigurationError(f"invalid counts {failures}/{trials}")
    alpha = 1 - confidence
    low = 0.0 if failures == 0 else float(beta.ppf(alpha / 2, failures, trials - failures + 1))
    high = 1.0 if failures == trials else float(beta.ppf(1 - alpha / 2, failures + 1, trials - failures))
    return low, high


def noise_kink_attenuation(l_max_values: Sequence[int], p_noise: float, p_target: float = 0.5) -> float:
    """Attenuation of the noise-free d_i = 1 curve where noise starts to dominate.

    Located where the noise-free and noisy tolerable attenuations drift apart
    by KINK_GAP_DB, interpolated linearly between neighbouring l_max.
    """
    if p_noise <= 0:
        raise ConfigurationError("the kink needs p_noise > 0")
    previous = None
    for l_max in sorted(l_max_values):
        clean = tolerable_attenuation(l_max, 1, 0.0, p_target)
        gap = clean - tolerable_attenuation(l_max, 1, p_noise, p_target)
        if gap >= KINK_GAP_DB:
            if previous is None:
                raise NoSolutionError(f"kink lies below l_max={l_max}")
            prev_clean, prev_gap = previous
            w = (KINK_GAP_DB - prev_gap) / (gap - prev_gap)
            return prev_clean + w * (clean - prev_clean)
        previous = (clean, gap)
    raise NoSolutionError("kink lies beyond the scanned l_max range")

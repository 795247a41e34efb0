from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union
import numpy as np
import pandas as pd

from iqsync.interfaces.level_selector import ILevelSelector
from iqsync.interfaces.detection_store import IDetectionStore, PathLike
from iqsync.domain.models import (
    CellSummary,
    DetectionSet,
    DiChoice,
    LinkParams,
    NoiseSpec,
    PolyLogFit,
    RecoveryResult,
    SweepSpec,
    SyncConfig,
    TrialRecord,
)
from iqsync.domain.exceptions import FitError, NoDetectionStatisticsError, OversizeError
from iqsync.domain.pattern import pattern_duration, pattern_symbols
from iqsync.domain.recovery import recover_offset, verify_range
from iqsync.domain import analytics
from iqsync.infrastructure.channel import align_timebins, simulate_detections
from iqsync.infrastructure.detection_files import detection_store_for
from iqsync.infrastructure.level_selectors import SplitMixLevelSelector
from iqsync.infrastructure.pattern_files import write_pattern
from iqsync.core.config import settings
from iqsync.core.logger import get_logger

logger = get_logger(__name__)

SelectorFactory = Callable[[SyncConfig], ILevelSelector]


def default_selector(config: SyncConfig) -> ILevelSelector:
    return SplitMixLevelSelector(config.seed)


def resolve_d_i(l_max: int, choice: DiChoice) -> int:
    return l_max + 1 if choice == "max" else int(choice)


def draw_offset(l_max: int, rng: np.random.Generator) -> int:
    """Random offset in timebins: a whole-symbol offset in [-Delta_max, Delta_max - 2],
    plus a one-timebin sub-offset in half of the draws."""
    delta_max = 1 << (l_max - 1)
    symbols = int(rng.integers(-delta_max, delta_max - 1))
    with_sub = rng.random() < 0.5
    sign = 1 if rng.integers(0, 2) else -1
    offset = 2 * symbols + (sign if with_sub else 0)
    if not verify_range(offset, l_max):
        offset = 2 * symbols
    return offset


def trial_seeds(seed: int) -> Tuple[np.random.Generator, int]:
    """Splits a trial seed into an offset generator and a channel seed."""
    offset_seq, channel_seq = np.random.SeedSequence(seed % (1 << 64)).spawn(2)
    channel_seed = int(channel_seq.generate_state(1, dtype=np.uint64)[0])
    return np.random.default_rng(offset_seq), channel_seed


class SyncService:
    """Runs the protocol end to end: pattern, channel, alignment and recovery,
    plus the analytic tables and Monte-Carlo sweeps built on them."""

    def __init__(
        self,
        selector_factory: SelectorFactory = default_selector,
        detection_store: Optional[IDetectionStore] = None,
    ):
        self.selector_factory = selector_factory
        self.detection_store = detection_store

    def _store(self, path: PathLike) -> IDetectionStore:
        return self.detection_store or detection_store_for(path)

    def _guard(self, config: SyncConfig, force: bool) -> None:
        if config.n_symbols > settings.MAX_SIMULATED_SYMBOLS and not force:
            raise OversizeError(
                f"N_s={config.n_symbols} exceeds {settings.MAX_SIMULATED_SYMBOLS} symbols; use --force to run anyway"
            )

    def export_pattern(self, config: SyncConfig, path: Optional[PathLike] = None, force: bool = False) -> Union[int, str]:
        """Writes the packed pattern to path, or returns it as a '0'/'1' string."""
        self._guard(config, force)
        selector = self.selector_factory(config)
        if path is not None:
            return write_pattern(path, config, selector)
        symbols = pattern_symbols(config, selector)
        return (symbols + ord("0")).astype(np.uint8).tobytes().decode("ascii")

    def simulate(
        self,
        config: SyncConfig,
        link: LinkParams,
        out: Optional[PathLike] = None,
        force: bool = False,
        symbols: Optional[np.ndarray] = None,
    ) -> DetectionSet:
        self._guard(config, force)
        logger.debug(
            f"Simulating l_max={config.l_max} d_i={config.d_i} p_sig={link.p_sig:g} "
            f"p_noise={link.p_noise:g} offset={link.offset_timebins}"
        )
        detections = simulate_detections(config, link, self.selector_factory(config), symbols=symbols)
        if out is not None:
            self.save_detections(out, detections)
        return detections

    def load_detections(self, path: PathLike) -> DetectionSet:
        return self._store(path).load(path)

    def save_detections(self, path: PathLike, detections: DetectionSet) -> None:
        self._store(path).save(path, detections)

    def recover(self, config: SyncConfig, detections: Union[DetectionSet, PathLike]) -> RecoveryResult:
        if isinstance(detections, (str, Path)):
            detections = self.load_detections(detections)
        return recover_offset(config.l_max, config.d_i, detections)

    def synchronize(
        self,
        config: SyncConfig,
        link: LinkParams,
        symbols: Optional[np.ndarray] = None,
        trial: int = 0,
        force: bool = False,
    ) -> TrialRecord:
        """One full protocol run; timestamps are aligned first when the link produces them."""
        detections = self.simulate(config, link, force=force, symbols=symbols)
        expected = link.offset_timebins
        if detections.raw_timestamps is not None:
            _, detections = align_timebins(detections.raw_timestamps, config.timebin_duration)
            # a fractional offset past half a timebin rounds to the next timebin
            expected += 1 if link.frac_offset > 0.5 else 0
        result = recover_offset(config.l_max, config.d_i, detections)
        return TrialRecord(
            l_max=config.l_max,
            d_i=config.d_i,
            p_sig=link.p_sig,
            p_noise=link.p_noise,
            trial=trial,
            seed=link.rng_seed,
            injected_offset_tb=expected,
            recovered_offset_tb=result.delta_timebins,
            success=result.delta_timebins == expected,
            loop_iterations=result.loop_iterations,
            detections=len(detections),
        )

    def run_trial(
        self,
        config: SyncConfig,
        p_sig: float,
        p_noise: float,
        seed: int,
        trial: int = 0,
        symbols: Optional[np.ndarray] = None,
    ) -> TrialRecord:
        offset_rng, channel_seed = trial_seeds(seed)
        link = LinkParams(
            p_sig=p_sig, p_noise=p_noise, offset_timebins=draw_offset(config.l_max, offset_rng), rng_seed=channel_seed
        )
        record = self.synchronize(config, link, symbols=symbols, trial=trial, force=True)
        return record.model_copy(update={"seed": seed})

    def run_cell(
        self, l_max: int, d_i: int, p_sig: float, noise: NoiseSpec, trials: int, base_seed: int, t_s: float
    ) -> Tuple[List[TrialRecord], CellSummary]:
        p_noise = noise.p_noise(p_sig)
        summary = CellSummary(l_max=l_max, d_i=d_i, p_sig=p_sig, p_noise=p_noise, n_symbols=0)
        if not 1 <= d_i <= l_max + 1:
            logger.warning(f"Skipping cell l_max={l_max}, d_i={d_i}: invalid interleaving")
            return [], summary.model_copy(update={"skipped": True, "note": "invalid d_i"})
        config = SyncConfig(l_max=l_max, d_i=d_i, seed=base_seed, t_s=t_s)
        summary = summary.model_copy(update={"n_symbols": config.n_symbols})
        if config.n_symbols > settings.MAX_SWEEP_SYMBOLS:
            logger.warning(f"Skipping cell l_max={l_max}, d_i={d_i}: N_s={config.n_symbols} above sweep limit")
            return [], summary.model_copy(update={"skipped": True, "note": "N_s above sweep limit"})

        symbols = pattern_symbols(config, self.selector_factory(config))
        records = [
            self.run_trial(config, p_sig, p_noise, base_seed + t, trial=t, symbols=symbols) for t in range(trials)
        ]
        failures = sum(not r.success for r in records)
        ci_low, ci_high = analytics.binomial_ci(failures, trials)
        try:
            p_fail_model = analytics.success_probability(l_max, d_i, p_sig, p_noise).p_fail
        except NoDetectionStatisticsError:
            p_fail_model = None
        summary = summary.model_copy(update={
            "trials": trials,
            "failures": failures,
            "p_fail": failures / trials,
            "ci_low": ci_low,
            "ci_high": ci_high,
            "p_fail_model": p_fail_model,
            "mean_loop_iterations": float(np.mean([r.loop_iterations for r in records])),
            "n_loop_model": analytics.expected_loop_iterations(l_max, d_i, p_sig, p_noise),
        })
        return records, summary

    def run_sweep(self, spec: SweepSpec, workers: int = 1) -> Tuple[pd.DataFrame, pd.DataFrame]:
        """Monte-Carlo grid; returns (per-trial table, per-cell summary) sorted by cell."""
        cells = sorted(
            {
                (l_max, resolve_d_i(l_max, d), p_sig)
                for l_max in spec.l_max_values
                for d in spec.d_i_values
                for p_sig in spec.p_sig_values
            }
        )
        args = [(l, d, p, spec.noise, spec.trials, spec.base_seed, spec.t_s) for l, d, p in cells]
        logger.info(f"Sweeping {len(cells)} cells x {spec.trials} trials with {workers} worker(s)")
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_run_cell, [self.selector_factory] * len(args), args))
        else:
            results = [self.run_cell(*a) for a in args]

        trials = [r.model_dump() for records, _ in results for r in records]
        summaries = [s.model_dump() for _, s in results]
        trial_df = pd.DataFrame(trials, columns=list(TrialRecord.model_fields))
        summary_df = pd.DataFrame(summaries, columns=list(CellSummary.model_fields))
        return trial_df, summary_df

    # Analytic tables

    def success_table(
        self, l_max_values: Iterable[int], d_i_values: Sequence[DiChoice], p_sig_values: Iterable[float], noise: NoiseSpec
    ) -> pd.DataFrame:
        rows = []
        for l_max in l_max_values:
            for choice in d_i_values:
                d_i = resolve_d_i(l_max, choice)
                for p_sig in p_sig_values:
                    p_noise = noise.p_noise(p_sig)
                    model = analytics.success_probability(l_max, d_i, p_sig, p_noise)
                    rows.append({
                        "l_max": l_max, "d_i": d_i, "p_sig": p_sig, "p_noise": p_noise,
                        "eta_db": analytics.p_sig_to_attenuation(p_sig),
                        **model.model_dump(), "p_fail": model.p_fail,
                    })
        return pd.DataFrame(rows)

    def loops_table(
        self, l_max_values: Iterable[int], d_i_values: Sequence[DiChoice], p_sig_values: Iterable[float], noise: NoiseSpec
    ) -> pd.DataFrame:
        rows = []
        for l_max in l_max_values:
            for choice in d_i_values:
                d_i = resolve_d_i(l_max, choice)
                for p_sig in p_sig_values:
                    p_noise = noise.p_noise(p_sig)
                    rows.append({
                        "l_max": l_max, "d_i": d_i, "p_sig": p_sig, "p_noise": p_noise,
                        "p_det": analytics.detection_probability(p_sig, p_noise),
                        "n_loop": analytics.expected_loop_iterations(l_max, d_i, p_sig, p_noise),
                        "detections": analytics.expected_detections(l_max, d_i, p_sig, p_noise),
                    })
        return pd.DataFrame(rows)

    def attenuation_table(
        self, l_max_values: Iterable[int], d_i_values: Sequence[DiChoice], noise: NoiseSpec, p_target: float
    ) -> pd.DataFrame:
        rows = []
        for l_max in l_max_values:
            for choice in d_i_values:
                for point in analytics.complexity_curve([l_max], choice, noise, p_target):
                    rows.append({**point.model_dump(), "noise": noise.label, "p_target": p_target})
        return pd.DataFrame(rows)

    def qber_table(self, p_sig_values: Iterable[float], noise: NoiseSpec) -> pd.DataFrame:
        rows = []
        for p_sig in p_sig_values:
            p_noise = noise.p_noise(p_sig)
            rows.append({"p_sig": p_sig, "p_noise": p_noise, "qber": analytics.qber_estimate(p_sig, p_noise)})
        return pd.DataFrame(rows)

    def durations_table(self, l_max_values: Iterable[int], t_s: float) -> pd.DataFrame:
        rows = []
        for l_max in l_max_values:
            delta_max = 1 << (l_max - 1)
            no_interleave, max_interleave, crosscorr = analytics.reference_durations(delta_max)
            rows.append({
                "l_max": l_max,
                "delta_max": delta_max,
                "n_symbols_d1": no_interleave,
                "n_symbols_dmax": max_interleave,
                "crosscorr_n": crosscorr,
                "duration_s_d1": pattern_duration(SyncConfig(l_max=l_max, d_i=1, t_s=t_s)),
                "duration_s_dmax": pattern_duration(SyncConfig(l_max=l_max, d_i=l_max + 1, t_s=t_s)),
            })
        return pd.DataFrame(rows)

    def complexity_table(
        self, l_max_values: Iterable[int], d_i_policy: DiChoice, noise: NoiseSpec, p_target: float
    ) -> pd.DataFrame:
        points = analytics.complexity_curve(l_max_values, d_i_policy, noise, p_target)
        return pd.DataFrame([p.model_dump() for p in points])

    def fit_curve(self, curve: pd.DataFrame, x: str = "delta_max", y: str = "n_loop") -> PolyLogFit:
        """Poly-log fit of a complexity table; unsolved rows are ignored."""
        missing = {x, y} - set(curve.columns)
        if missing:
            raise FitError(f"curve lacks column(s) {sorted(missing)}")
        if "solved" in curve.columns:
            curve = curve[curve["solved"].astype(bool)]
        curve = curve.dropna(subset=[x, y])
        return analytics.polylog_fit(list(zip(curve[x].astype(float), curve[y].astype(float))))


def _run_cell(selector_factory: SelectorFactory, args: tuple) -> Tuple[List[TrialRecord], CellSummary]:
    return SyncService(selector_factory).run_cell(*args)

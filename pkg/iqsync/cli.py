"""Command-line harness: pattern export, channel simulation, offset recovery,
analytic tables, Monte-Carlo sweeps and poly-log fits.

Exit codes: 0 success, 1 usage error, 2 data error, 3 no solution.
"""
import argparse
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import pandas as pd
from pydantic import ValidationError

from iqsync.application.sync_service import SyncService
from iqsync.domain.models import DiChoice, LinkParams, NoiseSpec, SweepSpec, SyncConfig
from iqsync.domain.exceptions import (
    ConfigurationError,
    DetectionDataError,
    FitError,
    NoDetectionStatisticsError,
    OversizeError,
    SolverError,
)
from iqsync.domain import analytics
from iqsync.infrastructure.channel import align_timebins
from iqsync.core.config import Settings, settings
from iqsync.core.logger import get_logger, setup_logger

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NO_SOLUTION = 3


class _Parser(argparse.ArgumentParser):
    """Raises instead of exiting so usage errors share the exit-code mapping."""

    def error(self, message):
        raise ConfigurationError(f"{self.prog}: {message}")


def _grid_parts(text) -> List[str]:
    parts = [p.strip() for p in str(text).split(",") if p.strip()]
    if not parts:
        raise ConfigurationError(f"empty grid {text!r}")
    return parts


def parse_int_grid(text) -> List[int]:
    """'12', '8:12' (inclusive) or '8,10,12'."""
    values = []
    try:
        for part in _grid_parts(text):
            if ":" in part:
                lo, hi = (int(v) for v in part.split(":", 1))
                if hi < lo:
                    raise ConfigurationError(f"empty range {part!r}")
                values.extend(range(lo, hi + 1))
            else:
                values.append(int(part))
    except ValueError:
        raise ConfigurationError(f"not an integer grid: {text!r}")
    return values


def parse_di_grid(text) -> List[DiChoice]:
    values: List[DiChoice] = []
    for part in _grid_parts(text):
        values.extend(["max"] if part.lower() == "max" else parse_int_grid(part))
    return values


def parse_float_grid(text) -> List[float]:
    """'0.01', '0.1,0.01' or 'start:stop[:step]' (inclusive, step 1 by default)."""
    values = []
    try:
        for part in _grid_parts(text):
            if ":" in part:
                fields = [float(v) for v in part.split(":")]
                if len(fields) > 3:
                    raise ConfigurationError(f"bad range {part!r}")
                start, stop = fields[0], fields[1]
                step = fields[2] if len(fields) == 3 else 1.0
                if step <= 0 or stop < start:
                    raise ConfigurationError(f"bad range {part!r}")
                count = int(round((stop - start) / step)) + 1
                values.extend(start + i * step for i in range(count))
            else:
                values.append(float(part))
    except ValueError:
        raise ConfigurationError(f"not a number grid: {text!r}")
    return values


def _single(values: Sequence, flag: str):
    if len(values) != 1:
        raise ConfigurationError(f"{flag} takes a single value for this command")
    return values[0]


def load_settings(path: Optional[str]) -> Settings:
    if path is None:
        return settings
    if not Path(path).is_file():
        raise ConfigurationError(f"config file {path} not found")
    return Settings(_env_file=path)


def _pick(flag, fallback):
    return fallback if flag is None else flag


def _l_max_values(args, cfg: Settings) -> List[int]:
    return parse_int_grid(_pick(args.lmax, cfg.LMAX))


def _d_i_values(args, cfg: Settings) -> List[DiChoice]:
    return parse_di_grid(_pick(args.di, cfg.DI))


def _p_sig_values(args, cfg: Settings) -> List[float]:
    if args.psig is not None:
        return parse_float_grid(args.psig)
    if args.eta_db is not None:
        return [LinkParams.from_attenuation(eta).p_sig for eta in parse_float_grid(args.eta_db)]
    if cfg.PSIG is not None:
        return [cfg.PSIG]
    if cfg.ETA_DB is not None:
        return [LinkParams.from_attenuation(cfg.ETA_DB).p_sig]
    raise ConfigurationError("one of --psig or --eta-db is required")


def _noise_values(args, cfg: Settings) -> List[NoiseSpec]:
    if args.pnoise_ratio is not None:
        return [NoiseSpec(kind="ratio", value=args.pnoise_ratio)]
    if args.pnoise is not None:
        values = parse_float_grid(args.pnoise)
    elif cfg.PNOISE_RATIO is not None:
        return [NoiseSpec(kind="ratio", value=cfg.PNOISE_RATIO)]
    else:
        values = [cfg.PNOISE]
    return [NoiseSpec(kind="fixed", value=v) if v > 0 else NoiseSpec() for v in values]


def _config(args, cfg: Settings) -> SyncConfig:
    l_max = _single(_l_max_values(args, cfg), "--lmax")
    d_i = _single(_d_i_values(args, cfg), "--di")
    return SyncConfig(
        l_max=l_max,
        d_i=l_max + 1 if d_i == "max" else d_i,
        seed=_pick(args.seed, cfg.SEED),
        t_s=_pick(args.ts_ps, cfg.TS_PS),
    )


def _write_csv(df: pd.DataFrame, out: Optional[str], cfg: Settings) -> None:
    float_format = f"%.{cfg.CSV_SIGNIFICANT_DIGITS}g"
    if out is None:
        df.to_csv(sys.stdout, index=False, float_format=float_format)
    else:
        df.to_csv(out, index=False, float_format=float_format)
        logger.info(f"Wrote {len(df)} rows to {out}")


def cmd_pattern(args, cfg: Settings, service: SyncService) -> int:
    config = _config(args, cfg)
    out = _pick(args.out, cfg.OUT)
    result = service.export_pattern(config, out, force=args.force or cfg.FORCE)
    if out is None:
        print(result)
    else:
        print(f"symbols={result}")
    return EXIT_OK


def cmd_simulate(args, cfg: Settings, service: SyncService) -> int:
    config = _config(args, cfg)
    p_sig = _single(_p_sig_values(args, cfg), "--psig/--eta-db")
    noise = _single(_noise_values(args, cfg), "--pnoise")
    link = LinkParams(
        p_sig=p_sig,
        p_noise=noise.p_noise(p_sig),
        offset_timebins=_pick(args.offset_tb, cfg.OFFSET_TB),
        frac_offset=_pick(args.frac_offset, cfg.FRAC_OFFSET),
        jitter_sigma=_pick(args.jitter, cfg.JITTER_SIGMA),
        rng_seed=config.seed,
    )
    detections = service.simulate(config, link, force=args.force or cfg.FORCE)
    if detections.raw_timestamps is not None:
        shift, detections = align_timebins(detections.raw_timestamps, config.timebin_duration, cfg.HISTOGRAM_BINS)
        print(f"alignment_shift_ps={shift:.3f}")
    out = _pick(args.out, cfg.OUT)
    if out is not None:
        service.save_detections(out, detections)
    expected = analytics.expected_detections(config.l_max, config.d_i, link.p_sig, link.p_noise)
    print(f"eta_db={link.attenuation_db:.6g}")
    print(f"detections={len(detections)}")
    print(f"expected={expected:.{cfg.CSV_SIGNIFICANT_DIGITS}g}")
    return EXIT_OK


def cmd_recover(args, cfg: Settings, service: SyncService) -> int:
    config = _config(args, cfg)
    result = service.recover(config, args.detections)
    print(f"delta_timebins={result.delta_timebins}")
    print(f"delta_symbols={result.delta_symbols}")
    print(f"level_counters={','.join(str(c) for c in result.level_counters)}")
    print(f"loop_iterations={result.loop_iterations}")
    if result.no_data:
        print("no_data=true")
    return EXIT_OK


def _concat(frames: List[pd.DataFrame]) -> pd.DataFrame:
    frames = [f for f in frames if not f.empty]
    return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()


def cmd_model(args, cfg: Settings, service: SyncService) -> int:
    quantity = args.quantity
    target = _pick(args.target, cfg.TARGET)
    if quantity == "durations":
        df = service.durations_table(_l_max_values(args, cfg), _pick(args.ts_ps, cfg.TS_PS))
    elif quantity == "qber":
        p_sig = _p_sig_values(args, cfg)
        df = _concat([service.qber_table(p_sig, noise) for noise in _noise_values(args, cfg)])
    elif quantity in ("success", "loops"):
        table = service.success_table if quantity == "success" else service.loops_table
        l_max, d_i, p_sig = _l_max_values(args, cfg), _d_i_values(args, cfg), _p_sig_values(args, cfg)
        df = _concat([table(l_max, d_i, p_sig, noise) for noise in _noise_values(args, cfg)])
    elif quantity == "attenuation":
        l_max, d_i = _l_max_values(args, cfg), _d_i_values(args, cfg)
        df = _concat([service.attenuation_table(l_max, d_i, noise, target) for noise in _noise_values(args, cfg)])
    else:
        l_max, d_i = _l_max_values(args, cfg), _single(_d_i_values(args, cfg), "--di")
        df = _concat([service.complexity_table(l_max, d_i, noise, target) for noise in _noise_values(args, cfg)])

    _write_csv(df, _pick(args.out, cfg.OUT), cfg)
    if "solved" in df.columns and not df["solved"].all():
        logger.warning(f"{int((~df['solved']).sum())} point(s) without solution")
        return EXIT_NO_SOLUTION
    return EXIT_OK


def cmd_sweep(args, cfg: Settings, service: SyncService) -> int:
    specs = [
        SweepSpec(
            l_max_values=_l_max_values(args, cfg),
            d_i_values=_d_i_values(args, cfg),
            p_sig_values=_p_sig_values(args, cfg),
            noise=noise,
            trials=_pick(args.trials, cfg.TRIALS),
            base_seed=_pick(args.seed, cfg.SEED),
            t_s=_pick(args.ts_ps, cfg.TS_PS),
            out=_pick(args.out, cfg.OUT),
        )
        for noise in _noise_values(args, cfg)
    ]
    out = specs[0].out
    trial_frames, summary_frames = [], []
    for spec in specs:
        trials, summary = service.run_sweep(spec, workers=_pick(args.workers, cfg.WORKERS))
        trial_frames.append(trials)
        summary_frames.append(summary)

    keys = ["l_max", "d_i", "p_sig", "p_noise"]
    trials = _concat(trial_frames)
    if not trials.empty:
        trials = trials.sort_values(keys + ["trial"], kind="stable", ignore_index=True)
    summary = _concat(summary_frames).sort_values(keys, kind="stable", ignore_index=True)
    if out is None:
        _write_csv(summary, None, cfg)
    else:
        _write_csv(trials, out, cfg)
        path = Path(out)
        _write_csv(summary, str(path.with_name(f"{path.stem}_summary.csv")), cfg)
    return EXIT_OK


def cmd_fit(args, cfg: Settings, service: SyncService) -> int:
    try:
        curve = pd.read_csv(args.points)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise FitError(f"cannot read {args.points}: {e}")
    fit = service.fit_curve(curve, x=args.x, y=args.y)
    print(f"a={fit.a:.6g}")
    print(f"b={fit.b:.6g}")
    print(f"max_rel_dev={fit.max_rel_dev:.6g}")
    print(f"n_points={fit.n_points}")
    return EXIT_OK


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="key=value settings file; flags win over its values")
    p.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    p.add_argument("--lmax", default=None, help="maximum level, or a grid 'a:b' / 'a,b,c'")
    p.add_argument("--di", default=None, help="degree of interleaving, integer or 'max', grids allowed")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--ts-ps", type=float, default=None, help="symbol duration in picoseconds")
    p.add_argument("--out", default=None)
    p.add_argument("--force", action="store_true", help="allow patterns above the desk-scale guard")


def _add_link_flags(p: argparse.ArgumentParser) -> None:
    sig = p.add_mutually_exclusive_group()
    sig.add_argument("--psig", default=None, help="signal detection probability per symbol")
    sig.add_argument("--eta-db", default=None, help="channel attenuation in dB (mu = 1)")
    noise = p.add_mutually_exclusive_group()
    noise.add_argument("--pnoise", default=None, help="noise detection probability per symbol")
    noise.add_argument("--pnoise-ratio", type=float, default=None, help="noise as a multiple of p_sig")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="iqsync", description="Clock offset recovery for QKD with sublinear complexity")
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("pattern", help="export the synchronization pattern")
    _add_config_flags(s)
    s.set_defaults(func=cmd_pattern)

    s = sub.add_parser("simulate", help="simulate Bob's detections")
    _add_config_flags(s)
    _add_link_flags(s)
    s.add_argument("--offset-tb", type=int, default=None, help="clock offset in timebins, positive when Bob is ahead")
    s.add_argument("--frac-offset", type=float, default=None, help="fractional timebin offset in [0, 1)")
    s.add_argument("--jitter", type=float, default=None, help="timing jitter sigma in timebins")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("recover", help="recover the clock offset from a detection file")
    _add_config_flags(s)
    s.add_argument("detections", help="detection file (.bin for raw uint64, text otherwise)")
    s.set_defaults(func=cmd_recover)

    s = sub.add_parser("model", help="analytic tables as CSV")
    s.add_argument(
        "quantity", choices=["success", "loops", "attenuation", "qber", "durations", "complexity"]
    )
    _add_config_flags(s)
    _add_link_flags(s)
    s.add_argument("--target", type=float, default=None, help="target success probability")
    s.set_defaults(func=cmd_model)

    s = sub.add_parser("sweep", help="Monte-Carlo failure rates against the model")
    _add_config_flags(s)
    _add_link_flags(s)
    s.add_argument("--trials", type=int, default=None)
    s.add_argument("--workers", type=int, default=None)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("fit", help="poly-log fit of a complexity curve")
    _add_config_flags(s)
    s.add_argument("points", help="CSV with the curve, e.g. from 'model complexity'")
    s.add_argument("--x", default="delta_max")
    s.add_argument("--y", default="n_loop")
    s.set_defaults(func=cmd_fit)
    return p


def main(argv: Optional[Sequence[str]] = None, service: Optional[SyncService] = None) -> int:
    setup_logger()
    try:
        args = build_parser().parse_args(argv)
        cfg = load_settings(args.config)
        setup_logger(level=args.log_level or cfg.LOG_LEVEL)
        return args.func(args, cfg, service or SyncService())
    except (ConfigurationError, OversizeError, ValidationError) as e:
        logger.error(str(e))
        return EXIT_USAGE
    except (DetectionDataError, FitError, NoDetectionStatisticsError) as e:
        logger.error(str(e))
        return EXIT_DATA
    except SolverError as e:
        logger.error(str(e))
        return EXIT_NO_SOLUTION


if __name__ == "__main__":
    sys.exit(main())

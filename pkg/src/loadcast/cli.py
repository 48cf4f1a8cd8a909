"""Command-line entry point.

Subcommands: synth, preprocess, screen, train, evaluate, predict, bounds,
run. Exit codes: 0 success, 2 config error, 3 data error, 4 numeric
failure (non-finite loss).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig
from .models import TrainAbort, WeightFileError
from .preprocess import DataError
from .tensor import NonFiniteError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _add_config_overrides(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out-dir", dest="out_dir")
    parser.add_argument("--synth", action="store_true", default=None,
                        help="generate synthetic inputs instead of reading CSVs")
    parser.add_argument("--load-csv", dest="load_csv")
    parser.add_argument("--weather-csv", dest="weather_csv")
    parser.add_argument("--holiday-csv", dest="holiday_csv")
    parser.add_argument("--architectures",
                        help="'all' or comma list, e.g. pcga,pcg,gru")
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--synth-days", dest="synth_days", type=int)
    parser.add_argument("--synth-distractors", dest="synth_distractors", type=int)


def _build_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides = {k: v for k, v in vars(args).items()
                 if k in RunConfig.__dataclass_fields__ and v is not None}
    return cfg.with_overrides(overrides)


def _cmd_synth(args) -> int:
    from .synth import SynthSpec, synth_generate
    spec = SynthSpec(n_days=args.days, noise_sigma=args.noise,
                     distractor_features=args.distractors)
    truth = synth_generate(spec, seed=args.seed, outdir=args.out)
    print(f"wrote load/weather/holiday CSVs to {args.out} "
          f"({len(truth['holiday_dates'])} holidays)")
    return EXIT_OK


def _prepare_table(load_csv, weather_csv, holiday_csv, outlier_k: float):
    from .preprocess import (
        derive_load_features,
        encode_features,
        flag_and_clean_outliers,
        impute_missing,
        read_holiday_csv,
        read_load_csv,
        read_weather_csv,
    )
    load_df = impute_missing(read_load_csv(load_csv))
    holiday_df = read_holiday_csv(holiday_csv)
    load_df = flag_and_clean_outliers(load_df, holiday_df, k=outlier_k)
    table = encode_features(load_df.drop(columns=["is_holiday"]),
                            read_weather_csv(weather_csv), holiday_df)
    return derive_load_features(table)


def _cmd_preprocess(args) -> int:
    from .preprocess import make_windows, save_window_cache
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table = _prepare_table(args.load, args.weather, args.holidays, args.outlier_k)
    table.to_csv(out / "processed.csv", index=False, float_format="%.17g")
    retained = ([c.strip() for c in args.retained.split(",")] if args.retained
                else [c for c in table.columns if c != "timestamp"])
    ws = make_windows(table, retained, t_steps=args.time_steps, horizon=args.horizon)
    save_window_cache(ws, out / "windows.lcwc")
    print(f"wrote {out / 'processed.csv'} and {len(ws)} windows")
    return EXIT_OK


def _cmd_screen(args) -> int:
    import pandas as pd
    from .featsel import screen
    if args.table:
        table = pd.read_csv(args.table)
    else:
        table = _prepare_table(args.load, args.weather, args.holidays, args.outlier_k)
    report = screen(table, target="load_kw", alpha=args.alpha,
                    ce_min=args.ce_min, lag=args.lag)
    report.to_csv(args.out)
    kept = report.retained_features()
    print(f"retained {len(kept)} features: {', '.join(kept)}")
    return EXIT_OK


def _cmd_train(args) -> int:
    from .experiment import run_experiment
    cfg = _build_config(args)
    cfg = cfg.with_overrides({"architectures": args.architecture})
    out = run_experiment(cfg, architectures=[args.architecture])
    print(f"trained {args.architecture}; artifacts in {out / 'models' / args.architecture}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    from .metrics import evaluate
    from .models import load_weights, predict_batched
    from .preprocess import Scaler, load_window_cache
    model = load_weights(args.weights)
    scaler = Scaler.load(args.scaler)
    ws = scaler.transform(load_window_cache(args.windows))
    pred = scaler.inverse_y(predict_batched(model, ws.dyn, ws.stat))
    actual = scaler.inverse_y(ws.y)
    rep = evaluate(pred, actual)
    mape = "undefined" if rep.mape is None else f"{rep.mape:.4f}%"
    print(f"n={rep.n} MAPE={mape} MAE={rep.mae:.6f} "
          f"RMSE={rep.rmse:.6f} R2={rep.r2 if rep.r2 is not None else 'undefined'}")
    return EXIT_OK


def _cmd_predict(args) -> int:
    from .experiment import predict_from_files
    value = predict_from_files(args.weights, args.scaler, args.window)
    print(repr(value))
    return EXIT_OK


def _cmd_bounds(args) -> int:
    from .bounds import bound_terms, empirical_rademacher, independence_grid
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)

    with open(out / "rademacher.csv", "w") as fh:
        fh.write("n_hypotheses,n_samples,mc_estimate,std_error,exact\n")
        for h in (1, 4, 8):
            losses = rng.uniform(size=(h, args.n_samples))
            est = empirical_rademacher(losses, mc_draws=args.draws, seed=args.seed)
            fh.write(f"{h},{args.n_samples},{est.value!r},{est.std_error!r},"
                     f"{'' if est.exact is None else repr(est.exact)}\n")

    with open(out / "bound_terms.csv", "w") as fh:
        fh.write("weighting,term_L,term_C,term_Cov,confidence,total\n")
        losses = rng.uniform(size=(2, 400))
        comp = np.array([0.05, 0.08])
        equal = bound_terms(losses, np.full(2, 0.5), comp)
        w1 = 1.0 - losses[0] / losses.sum(axis=0)
        adaptive = bound_terms(losses, np.vstack([w1, 1 - w1]), comp)
        for name, bt in (("equal", equal), ("adaptive", adaptive)):
            fh.write(f"{name},{bt.term_l!r},{bt.term_c!r},{bt.term_cov!r},"
                     f"{bt.confidence_term!r},{bt.total()!r}\n")

    with open(out / "independence_grid.csv", "w") as fh:
        fh.write("mixing,mi_estimate_median,n\n")
        for point in independence_grid(args.n_samples_mi):
            fh.write(f"{point.mixing!r},{point.mi_estimate!r},{point.n}\n")
    print(f"wrote bound diagnostics to {out}")
    return EXIT_OK


def _cmd_run(args) -> int:
    from .experiment import run_experiment
    cfg = _build_config(args)
    out = run_experiment(cfg)
    print(f"experiment complete; reports in {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loadcast",
        description="Multi-source power load forecasting toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic load/weather/holiday CSVs")
    p.add_argument("--out", required=True)
    p.add_argument("--days", type=int, default=60)
    p.add_argument("--noise", type=float, default=0.8)
    p.add_argument("--distractors", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("preprocess", help="impute, clean, encode and window raw CSVs")
    p.add_argument("--load", required=True)
    p.add_argument("--weather", required=True)
    p.add_argument("--holidays", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--retained", help="comma list of feature columns to keep")
    p.add_argument("--time-steps", dest="time_steps", type=int, default=12)
    p.add_argument("--horizon", type=int, default=1)
    p.add_argument("--outlier-k", dest="outlier_k", type=float, default=5.0)
    p.set_defaults(func=_cmd_preprocess)

    p = sub.add_parser("screen", help="correlation/CE/Granger feature screen")
    p.add_argument("--table", help="processed.csv from the preprocess step")
    p.add_argument("--load")
    p.add_argument("--weather")
    p.add_argument("--holidays")
    p.add_argument("--out", default="screen_report.csv")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--ce-min", dest="ce_min", type=float, default=None)
    p.add_argument("--lag", type=int, default=4)
    p.add_argument("--outlier-k", dest="outlier_k", type=float, default=5.0)
    p.set_defaults(func=_cmd_screen)

    p = sub.add_parser("train", help="train one architecture end to end")
    p.add_argument("--architecture", required=True)
    _add_config_overrides(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="metrics for saved weights on cached windows")
    p.add_argument("--weights", required=True)
    p.add_argument("--scaler", required=True)
    p.add_argument("--windows", required=True)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("predict", help="one-step forecast from a recent-window CSV")
    p.add_argument("--weights", required=True)
    p.add_argument("--scaler", required=True)
    p.add_argument("--window", required=True)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("bounds", help="generalization-bound numeric diagnostics")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--draws", type=int, default=100_000)
    p.add_argument("--n-samples", dest="n_samples", type=int, default=10)
    p.add_argument("--n-samples-mi", dest="n_samples_mi", type=int, default=2000)
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("run", help="full experiment matrix over architectures")
    _add_config_overrides(p)
    p.set_defaults(func=_cmd_run)
    return parser


def main(argv: list | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TrainAbort, NonFiniteError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, WeightFileError, FileNotFoundError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except RuntimeError as exc:
        cause = getattr(exc, "cause", None)
        if isinstance(cause, (TrainAbort, NonFiniteError)):
            print(f"numeric failure: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        if isinstance(cause, ConfigError):
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

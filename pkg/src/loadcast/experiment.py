"""End-to-end experiment orchestration.

run_experiment drives: data (synthetic or CSVs) -> impute/outliers ->
encode + load features -> screen -> windows -> chronological split +
normalization -> per-architecture train/evaluate -> report emission.
Every stage failure aborts with a stage-tagged error and removes the
partially written run directory.

Report directory layout:
  data/                   synthetic inputs (when synth=true)
  processed.csv           encoded feature table
  screen_report.csv       per-feature screening statistics
  windows.lcwc            window cache with checksum
  scaler.json             train-fitted normalization statistics
  models/<arch>/          weights.lcwt, training_log.csv, per-split
                          metrics_{val,test}.csv and
                          error_density_{val,test}.csv,
                          predictions_nearest_day.csv,
                          predictions_farthest_day.csv
  summary.csv             all architectures with percentage deltas vs the
                          cnn and gru baselines
  manifest.json           config hash, seed, package/library versions
"""

from __future__ import annotations

import json
import shutil
import sys
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .config import RunConfig
from .featsel import screen
from .metrics import error_density, evaluate
from .models import (
    Hyper,
    ModelSpec,
    build_model,
    load_weights,
    predict_batched,
    save_weights,
    train_model,
)
from .preprocess import (
    Scaler,
    WindowSet,
    derive_load_features,
    encode_features,
    flag_and_clean_outliers,
    impute_missing,
    make_windows,
    read_holiday_csv,
    read_load_csv,
    read_weather_csv,
    save_window_cache,
    split_and_normalize,
)
from .synth import SynthSpec, synth_generate

__all__ = ["StageError", "run_experiment", "predict_from_files", "hyper_from_config"]


class StageError(RuntimeError):
    """Pipeline failure tagged with the stage that raised it."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[stage: {stage}] {cause}")
        self.stage = stage
        self.cause = cause


def hyper_from_config(cfg: RunConfig) -> Hyper:
    return Hyper(epochs=cfg.epochs, batch_size=cfg.batch_size,
                 learning_rate=cfg.learning_rate, dropout=cfg.dropout,
                 decay_factor=cfg.decay_factor, decay_every=cfg.decay_every,
                 hidden_size=cfg.hidden_size, hidden_layers=cfg.hidden_layers,
                 channels=(cfg.channels_1, cfg.channels_2),
                 kernel_size=cfg.kernel_size, pool_size=cfg.pool_size,
                 pool_stride=cfg.pool_stride, cnn_fc_dim=cfg.cnn_fc_dim,
                 attention_rows=cfg.attention_rows)


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and np.isnan(v)):
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_metrics_csv(path, report) -> None:
    with open(path, "w") as fh:
        fh.write("mape,mae,rmse,r2\n")
        fh.write(",".join(_fmt(v) for v in
                          (report.mape, report.mae, report.rmse, report.r2)) + "\n")


def _write_density_csv(path, tables) -> None:
    with open(path, "w") as fh:
        fh.write("kind,bin_left,bin_right,density,count\n")
        for kind, t in tables.items():
            for left, right, dens, cnt in zip(t.bin_edges[:-1], t.bin_edges[1:],
                                              t.density, t.counts):
                fh.write(f"{kind},{left!r},{right!r},{dens!r},{int(cnt)}\n")


def _write_day_csv(path, timestamps, actual, predicted) -> None:
    with open(path, "w") as fh:
        fh.write("timestamp,actual,predicted\n")
        for ts, a, p in zip(timestamps, actual, predicted):
            fh.write(f"{pd.Timestamp(ts).isoformat()},{float(a)!r},{float(p)!r}\n")


def _ensure_min_static(retained: list, report, minimum: int) -> list:
    """Pad the static feature set with the best remaining CE scorers so the
    parallel conv stack (two pool stages) stays runnable for every
    architecture in the matrix."""
    from .preprocess import DYNAMIC_FEATURES
    static = [c for c in retained if c not in DYNAMIC_FEATURES]
    if len(static) >= minimum:
        return retained
    spare = sorted((r for r in report.rows
                    if not r.retained and r.name not in DYNAMIC_FEATURES
                    and np.isfinite(r.ce_score)),
                   key=lambda r: r.ce_score, reverse=True)
    extra = [r.name for r in spare[:minimum - len(static)]]
    return retained + extra


def _day_slices(timestamps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Index masks for the chronologically first and last day of a split."""
    dates = pd.DatetimeIndex(timestamps).normalize()
    first, last = dates[0], dates[-1]
    return np.asarray(dates == first), np.asarray(dates == last)


def _evaluate_split(model, ws: WindowSet, scaler: Scaler, batch_size: int):
    pred_scaled = predict_batched(model, ws.dyn, ws.stat, max(batch_size, 256))
    pred = scaler.inverse_y(pred_scaled)
    actual = scaler.inverse_y(ws.y)
    return pred, actual


def run_experiment(cfg: RunConfig, architectures: list | None = None) -> Path:
    cfg.validate()
    archs = architectures if architectures is not None else cfg.architecture_list()
    out = Path(cfg.out_dir)
    created = not out.exists()
    out.mkdir(parents=True, exist_ok=True)

    try:
        return _run_stages(cfg, archs, out)
    except StageError:
        if created:
            shutil.rmtree(out, ignore_errors=True)
        else:
            for child in out.iterdir():
                if child.is_dir():
                    shutil.rmtree(child, ignore_errors=True)
                else:
                    child.unlink(missing_ok=True)
        raise


def _run_stages(cfg: RunConfig, archs: list, out: Path) -> Path:
    try:
        if cfg.synth:
            spec = SynthSpec(n_days=cfg.synth_days, noise_sigma=cfg.synth_noise,
                             distractor_features=cfg.synth_distractors)
            synth_generate(spec, seed=cfg.seed, outdir=out / "data")
            load_path = out / "data" / "load.csv"
            weather_path = out / "data" / "weather.csv"
            holiday_path = out / "data" / "holidays.csv"
        else:
            load_path, weather_path, holiday_path = (
                Path(cfg.load_csv), Path(cfg.weather_csv), Path(cfg.holiday_csv))
        load_df = read_load_csv(load_path)
        weather_df = read_weather_csv(weather_path)
        holiday_df = read_holiday_csv(holiday_path)
    except Exception as exc:
        raise StageError("data", exc) from exc

    try:
        load_df = impute_missing(load_df)
        load_df = flag_and_clean_outliers(load_df, holiday_df, k=cfg.outlier_k)
        table = encode_features(load_df.drop(columns=["is_holiday"]),
                                weather_df, holiday_df)
        table = derive_load_features(table)
        table.to_csv(out / "processed.csv", index=False, float_format="%.17g")
    except Exception as exc:
        raise StageError("preprocess", exc) from exc

    try:
        report = screen(table, target="load_kw", alpha=cfg.alpha,
                        ce_min=cfg.ce_min, lag=cfg.granger_lag, knn_k=cfg.knn_k)
        report.to_csv(out / "screen_report.csv")
        retained = ["load_kw"] + report.retained_features()
        retained = _ensure_min_static(retained, report, minimum=4)
    except Exception as exc:
        raise StageError("screen", exc) from exc

    try:
        windows = make_windows(table, retained, t_steps=cfg.time_steps,
                               horizon=cfg.horizon)
        save_window_cache(windows, out / "windows.lcwc")
        train_ws, val_ws, test_ws, scaler = split_and_normalize(
            windows, ratios=(cfg.train_ratio, cfg.val_ratio, cfg.test_ratio))
        scaler.save(out / "scaler.json")
    except Exception as exc:
        raise StageError("window", exc) from exc

    hyper = hyper_from_config(cfg)
    rows = []
    for arch in archs:
        try:
            rows.append(_train_one(arch, cfg, hyper, train_ws, val_ws, test_ws,
                                   scaler, out))
        except Exception as exc:
            raise StageError(f"train:{arch}", exc) from exc

    try:
        _write_summary(out / "summary.csv", rows)
        manifest = {
            "config": asdict(cfg),
            "config_hash": cfg.content_hash(),
            "seed": cfg.seed,
            "architectures": archs,
            "versions": {"loadcast": __version__,
                         "numpy": np.__version__,
                         "python": sys.version.split()[0]},
            "created_utc": datetime.now(timezone.utc).isoformat(),
        }
        with open(out / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
    except Exception as exc:
        raise StageError("report", exc) from exc
    return out


def _train_one(arch: str, cfg: RunConfig, hyper: Hyper, train_ws, val_ws, test_ws,
               scaler: Scaler, out: Path) -> dict:
    spec = ModelSpec(architecture=arch, time_steps=cfg.time_steps,
                     dyn_features=train_ws.dyn.shape[2],
                     stat_features=train_ws.stat.shape[1],
                     horizon=cfg.horizon, hyper=hyper)
    model = build_model(spec, seed=cfg.seed)
    log = train_model(model, (train_ws.dyn, train_ws.stat, train_ws.y),
                      (val_ws.dyn, val_ws.stat, val_ws.y), seed=cfg.seed)

    mdir = out / "models" / arch
    mdir.mkdir(parents=True, exist_ok=True)
    save_weights(model, mdir / "weights.lcwt")
    with open(mdir / "training_log.csv", "w") as fh:
        fh.write("epoch,train_mse,val_mse,lr\n")
        for e in log.epochs:
            fh.write(f"{e.epoch},{e.train_mse!r},{e.val_mse!r},{e.lr!r}\n")

    row = {"architecture": arch, "best_val_epoch": log.best_val_epoch}
    for split, ws in (("val", val_ws), ("test", test_ws)):
        pred, actual = _evaluate_split(model, ws, scaler, hyper.batch_size)
        rep = evaluate(pred, actual)
        _write_metrics_csv(mdir / f"metrics_{split}.csv", rep)
        _write_density_csv(mdir / f"error_density_{split}.csv",
                           error_density(pred, actual))
        row[split] = rep
        if split == "test":
            near, far = _day_slices(ws.timestamps)
            _write_day_csv(mdir / "predictions_nearest_day.csv",
                           ws.timestamps[near], actual[near], pred[near])
            _write_day_csv(mdir / "predictions_farthest_day.csv",
                           ws.timestamps[far], actual[far], pred[far])
    return row


_SUMMARY_METRICS = ("mape", "mae", "rmse", "r2")


def _delta_pct(value, base) -> float | None:
    if value is None or base in (None, 0.0):
        return None
    return (value - base) / base * 100.0


def _write_summary(path, rows: list) -> None:
    baselines = {r["architecture"]: r for r in rows
                 if r["architecture"] in ("cnn", "gru")}
    header = ["architecture", "split"] + list(_SUMMARY_METRICS) + ["best_val_epoch"]
    for base in ("cnn", "gru"):
        header += [f"delta_{m}_vs_{base}_pct" for m in _SUMMARY_METRICS]
    lines = [",".join(header)]
    for row in rows:
        for split in ("val", "test"):
            rep = row[split]
            cells = [row["architecture"], split]
            cells += [_fmt(getattr(rep, m)) for m in _SUMMARY_METRICS]
            cells.append(str(row["best_val_epoch"]))
            for base in ("cnn", "gru"):
                base_rep = baselines.get(base, {})
                for m in _SUMMARY_METRICS:
                    base_val = getattr(base_rep[split], m) if base_rep else None
                    cells.append(_fmt(_delta_pct(getattr(rep, m), base_val)))
            lines.append(",".join(cells))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


class PredictError(ValueError):
    """Prediction inputs do not line up with the trained artifacts."""


def predict_from_files(weights_path, scaler_path, window_csv) -> float:
    """Point forecast for t+1 from a recent-window CSV.

    The CSV must contain the processed feature columns; its first
    ``time_steps`` rows supply the dynamic history and its final row the
    static features at the target instant (its load cell may be empty).
    Returns the forecast in original units.
    """
    model = load_weights(weights_path)
    scaler = Scaler.load(scaler_path)
    spec = model.spec
    if len(scaler.dyn_names) != spec.dyn_features or \
            len(scaler.stat_names) != spec.stat_features:
        raise PredictError(
            f"scaler ({len(scaler.dyn_names)} dyn / {len(scaler.stat_names)} stat "
            f"features) does not match weights ({spec.dyn_features} dyn / "
            f"{spec.stat_features} stat)")

    df = pd.read_csv(window_csv)
    needed = list(scaler.dyn_names) + list(scaler.stat_names)
    missing = [c for c in needed if c not in df.columns]
    if missing:
        raise PredictError(f"window CSV lacks columns {missing}")
    if len(df) != spec.time_steps + 1:
        raise PredictError(
            f"window CSV must have time_steps+1 = {spec.time_steps + 1} rows "
            f"(history plus the target-time statics row), got {len(df)}")
    dyn = df[list(scaler.dyn_names)].to_numpy(dtype=np.float64)[:spec.time_steps]
    stat = df[list(scaler.stat_names)].to_numpy(dtype=np.float64)[spec.time_steps]
    if np.isnan(dyn).any() or np.isnan(stat).any():
        raise PredictError("window CSV has missing values in feature columns")

    dyn_n = (dyn - scaler.dyn_mean) / scaler.dyn_std
    stat_n = ((stat - scaler.stat_mean) / scaler.stat_std
              if len(scaler.stat_names) else stat)
    pred = model.forward(dyn_n[None], stat_n[None], train=False).data[0]
    return float(scaler.inverse_y(pred))

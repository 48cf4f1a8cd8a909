"""Raw load/weather/calendar records to model-ready sample windows.

Input CSV schemas (headers required, timestamps ISO-8601):
  load file     timestamp,load_kw          15-minute cadence (96/day)
  weather file  date,tmax_c,tmin_c,weather_cond,wind_day,winddir_day,
                wind_night,winddir_night   daily cadence; extra numeric
                columns pass through as additional static features
  holiday file  date,holiday_type

Pipeline: impute gaps from same-time-of-day neighbors, mask robust
outliers (non-holidays only) and re-impute, encode calendar/weather
factors, add the daily-mean and trend/seasonal/residual load features,
cut sliding windows, split chronologically 7:2:1 and z-score with
train-only statistics.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd

__all__ = [
    "DataError",
    "UnrecoverableGapError",
    "POINTS_PER_DAY",
    "WEATHER_SEVERITY",
    "WIND_DIRECTIONS",
    "HOLIDAY_TYPES",
    "DYNAMIC_FEATURES",
    "read_load_csv",
    "read_weather_csv",
    "read_holiday_csv",
    "impute_missing",
    "flag_and_clean_outliers",
    "encode_features",
    "Decomposition",
    "decompose",
    "derive_load_features",
    "SampleWindow",
    "WindowSet",
    "make_windows",
    "Scaler",
    "split_and_normalize",
    "save_window_cache",
    "load_window_cache",
]


class DataError(ValueError):
    """Schema, encoding or content problem in input data."""


class UnrecoverableGapError(DataError):
    """A missing load cell has no same-time-of-day donors at all."""


POINTS_PER_DAY = 96  # 15-minute cadence

WEATHER_SEVERITY = {
    "sunny": 1, "cloudy": 2, "overcast": 3, "light rain": 4,
    "moderate rain": 5, "heavy rain": 6, "rainstorm": 7,
}

WIND_DIRECTIONS = ("northeast", "southeast", "east", "north",
                   "south", "southwest", "none")

HOLIDAY_TYPES = {
    "none": 0, "new year": 1, "spring festival": 2, "tomb-sweeping": 3,
    "labour day": 4, "dragon boat": 5, "mid-autumn": 6, "national day": 7,
}

# historical-load group -> dynamic branch; everything else is static
DYNAMIC_FEATURES = ("load_kw", "daily_mean_load", "trend", "seasonal", "residual")


def _require_columns(df: pd.DataFrame, required: list, what: str) -> None:
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise DataError(f"{what} file is missing columns {missing}; "
                        f"found {list(df.columns)}")


def read_load_csv(path) -> pd.DataFrame:
    """Load series on a complete 15-minute grid; gaps become NaN."""
    df = pd.read_csv(path)
    _require_columns(df, ["timestamp", "load_kw"], "load")
    ts = pd.to_datetime(df["timestamp"], format="ISO8601")
    if not ts.is_monotonic_increasing or ts.duplicated().any():
        raise DataError("load timestamps must be strictly increasing")
    df = pd.DataFrame({"load_kw": pd.to_numeric(df["load_kw"], errors="coerce").values},
                      index=ts)
    full = pd.date_range(ts.iloc[0], ts.iloc[-1], freq="15min")
    df = df.reindex(full)
    df.index.name = "timestamp"
    return df.reset_index()


def read_weather_csv(path) -> pd.DataFrame:
    df = pd.read_csv(path)
    _require_columns(df, ["date", "tmax_c", "tmin_c", "weather_cond", "wind_day",
                          "winddir_day", "wind_night", "winddir_night"], "weather")
    df["date"] = pd.to_datetime(df["date"]).dt.normalize()
    return df


def read_holiday_csv(path) -> pd.DataFrame:
    df = pd.read_csv(path)
    _require_columns(df, ["date", "holiday_type"], "holiday")
    df["date"] = pd.to_datetime(df["date"]).dt.normalize()
    return df


# -- gap imputation ---------------------------------------------------------


def _day_phase_matrix(df: pd.DataFrame) -> tuple[np.ndarray, pd.DatetimeIndex]:
    """Values as a [days, 96] matrix (NaN padded at the edges of partial days)."""
    ts = pd.DatetimeIndex(df["timestamp"])
    days = ts.normalize()
    uniq_days = days.unique().sort_values()
    phase = (ts - days).total_seconds().astype(int) // 900
    mat = np.full((len(uniq_days), POINTS_PER_DAY), np.nan)
    rows = uniq_days.searchsorted(days)
    mat[rows, phase] = df["load_kw"].to_numpy()
    return mat, uniq_days


def impute_missing(df: pd.DataFrame) -> pd.DataFrame:
    """Fill each missing load cell with the mean of the same-time-of-day
    values on the 7 prior and 7 following days (existing values only)."""
    df = df.copy()
    values = df["load_kw"].to_numpy(dtype=np.float64)
    if not np.isnan(values).any():
        return df
    mat, uniq_days = _day_phase_matrix(df)
    observed = ~np.isnan(mat)
    n_days = mat.shape[0]

    ts = pd.DatetimeIndex(df["timestamp"])
    days = ts.normalize()
    phase = ((ts - days).total_seconds().astype(int) // 900).to_numpy()
    rows = uniq_days.searchsorted(days)

    filled = values.copy()
    failures = []
    for i in np.flatnonzero(np.isnan(values)):
        d, p = rows[i], phase[i]
        lo, hi = max(0, d - 7), min(n_days, d + 8)
        donor_days = [dd for dd in range(lo, hi) if dd != d and observed[dd, p]]
        if not donor_days:
            failures.append(str(ts[i]))
            continue
        filled[i] = mat[donor_days, p].mean()
    if failures:
        raise UnrecoverableGapError(
            f"no same-time-of-day donors for {len(failures)} cells: "
            + ", ".join(failures[:5]) + ("..." if len(failures) > 5 else ""))
    df["load_kw"] = filled
    return df


# -- outliers -----------------------------------------------------------------


def flag_and_clean_outliers(df: pd.DataFrame, holidays: pd.DataFrame,
                            k: float = 5.0, window_days: int = 28) -> pd.DataFrame:
    """Mask non-holiday points beyond k·MAD of the same-time-of-day rolling
    median, then re-impute. Adds the ``is_holiday`` column."""
    df = df.copy()
    ts = pd.DatetimeIndex(df["timestamp"])
    dates = ts.normalize()
    hset = set(holidays["date"]) if len(holidays) else set()
    df["is_holiday"] = np.fromiter((d in hset for d in dates), dtype=bool,
                                   count=len(dates)).astype(np.float64)

    mat, uniq_days = _day_phase_matrix(df)
    n_days = mat.shape[0]
    if n_days < window_days:
        warnings.warn(f"series spans {n_days} days < {window_days}; "
                      "robust window shrunk to the full span")
    half = window_days // 2

    rows = uniq_days.searchsorted(dates)
    phase = ((ts - dates).total_seconds().astype(int) // 900).to_numpy()

    values = df["load_kw"].to_numpy(dtype=np.float64)
    mask = np.zeros(len(values), dtype=bool)
    shrunk = False
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN windows
        for i in range(len(values)):
            if np.isnan(values[i]) or df["is_holiday"].iat[i]:
                continue
            d, p = rows[i], phase[i]
            lo, hi = d - half, d + half
            if lo < 0 or hi > n_days:
                shrunk = True
                lo, hi = max(0, lo), min(n_days, hi)
            window = mat[lo:hi, p]
            med = np.nanmedian(window)
            mad = np.nanmedian(np.abs(window - med))
            if np.isfinite(med) and abs(values[i] - med) > k * mad:
                mask[i] = True
    if shrunk and n_days >= window_days:
        warnings.warn("robust window shrunk at the series boundary")
    if mask.any():
        df.loc[mask, "load_kw"] = np.nan
        df = impute_missing(df)
    return df


# -- encoding -----------------------------------------------------------------

_SEASON_BY_MONTH = {3: 1, 4: 1, 5: 1, 6: 2, 7: 2, 8: 2, 9: 3, 10: 3, 11: 3,
                    12: 4, 1: 4, 2: 4}


def _encode_category(series: pd.Series, vocab: dict, column: str) -> np.ndarray:
    out = np.empty(len(series))
    for i, v in enumerate(series):
        key = str(v).strip().lower()
        if key not in vocab:
            raise DataError(f"unseen category {v!r} in column {column!r}; "
                            f"known: {sorted(vocab)}")
        out[i] = vocab[key]
    return out


def _one_hot_direction(series: pd.Series, column: str) -> pd.DataFrame:
    codes = np.empty(len(series), dtype=int)
    for i, v in enumerate(series):
        key = str(v).strip().lower()
        if key not in WIND_DIRECTIONS:
            raise DataError(f"unseen category {v!r} in column {column!r}; "
                            f"known: {list(WIND_DIRECTIONS)}")
        codes[i] = WIND_DIRECTIONS.index(key)
    out = {}
    for j, name in enumerate(WIND_DIRECTIONS):
        out[f"{column}_{name}"] = (codes == j).astype(np.float64)
    return pd.DataFrame(out, index=series.index)


def encode_features(load_df: pd.DataFrame, weather_df: pd.DataFrame,
                    holiday_df: pd.DataFrame) -> pd.DataFrame:
    """Join daily weather/holiday data onto the 15-minute load grid and
    encode every factor numerically: ascending ordinals for season (1-4),
    month, weekday, hour, weather severity (sunny -> rainstorm) and wind
    force; one-hot wind directions; weekend/holiday booleans and the
    holiday-type code."""
    ts = pd.DatetimeIndex(load_df["timestamp"])
    dates = ts.normalize()
    out = pd.DataFrame({"timestamp": ts, "load_kw": load_df["load_kw"].to_numpy()})

    out["year"] = ts.year.astype(np.float64)
    out["quarter"] = ts.quarter.astype(np.float64)
    out["month"] = ts.month.astype(np.float64)
    out["day"] = ts.day.astype(np.float64)
    out["hour"] = ts.hour.astype(np.float64)
    out["weekday"] = (ts.dayofweek + 1).astype(np.float64)  # Mon=1 .. Sun=7
    out["season"] = np.fromiter((_SEASON_BY_MONTH[m] for m in ts.month),
                                dtype=np.float64, count=len(ts))
    out["is_weekend"] = (ts.dayofweek >= 5).astype(np.float64)

    hmap = {row.date: str(row.holiday_type) for row in holiday_df.itertuples()}
    holiday_names = pd.Series([hmap.get(d, "none") for d in dates], index=out.index)
    out["is_holiday"] = (holiday_names != "none").astype(np.float64)
    out["holiday_type"] = _encode_category(holiday_names, HOLIDAY_TYPES, "holiday_type")

    wx = weather_df.set_index("date")
    missing_days = [str(d.date()) for d in dates.unique() if d not in wx.index]
    if missing_days:
        raise DataError(f"weather file lacks {len(missing_days)} days: "
                        + ", ".join(missing_days[:5]))
    daily = wx.loc[dates]
    daily.index = out.index

    for col in ("tmax_c", "tmin_c", "wind_day", "wind_night"):
        vals = pd.to_numeric(daily[col], errors="coerce")
        if vals.isna().any():
            raise DataError(f"non-numeric values in weather column {col!r}")
        out[col] = vals.to_numpy(dtype=np.float64)
    out["weather_cond"] = _encode_category(daily["weather_cond"],
                                           WEATHER_SEVERITY, "weather_cond")
    out = pd.concat([out, _one_hot_direction(daily["winddir_day"], "winddir_day"),
                     _one_hot_direction(daily["winddir_night"], "winddir_night")],
                    axis=1)

    known = {"tmax_c", "tmin_c", "weather_cond", "wind_day", "winddir_day",
             "wind_night", "winddir_night"}
    for col in weather_df.columns:
        if col == "date" or col in known:
            continue
        vals = pd.to_numeric(daily[col], errors="coerce")
        if vals.isna().any():
            raise DataError(f"extra weather column {col!r} must be numeric")
        out[col] = vals.to_numpy(dtype=np.float64)
    return out


# -- decomposition -------------------------------------------------------------


@dataclass
class Decomposition:
    trend: np.ndarray
    seasonal: np.ndarray
    residual: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.trend + self.seasonal) + self.residual


def decompose(series, period: int = POINTS_PER_DAY) -> Decomposition:
    """Classical additive decomposition with an exact reconstruction.

    Trend is the symmetric 2x``period`` centered moving average (half
    weights at the ends), edge-filled with the nearest valid value.
    Seasonal is the per-phase mean of the detrended series, re-centered to
    sum to zero over one period. The residual is defined against the
    precomputed trend+seasonal sum and nudged until
    ``(trend + seasonal) + residual`` reproduces the input bit-exactly —
    guaranteed whenever input values are not ~2^50 below the local
    component magnitude (always true for load-like data); otherwise the
    affected values are off by one ulp, with a warning.
    """
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1:
        raise DataError("decompose expects a 1-D series")
    n = len(x)
    if n < 2 * period:
        raise DataError(f"series of length {n} too short for period {period} "
                        f"(need >= {2 * period})")

    weights = np.full(period + 1, 1.0 / period)
    weights[0] = weights[-1] = 0.5 / period
    valid = np.convolve(x, weights, mode="valid")  # length n - period
    trend = np.empty(n)
    half = period // 2
    trend[half:half + len(valid)] = valid
    trend[:half] = valid[0]
    trend[half + len(valid):] = valid[-1]

    detrended = x - trend
    phases = np.arange(n) % period
    seasonal_profile = np.array([detrended[phases == p].mean() for p in range(period)])
    seasonal_profile -= seasonal_profile.mean()
    seasonal = seasonal_profile[phases]

    base = trend + seasonal
    residual = x - base
    bad = np.flatnonzero((base + residual) != x)
    unpinnable = 0
    for i in bad:
        if not _pin_reconstruction(x, trend, seasonal, residual, int(i)):
            unpinnable += 1
    if unpinnable:
        # only possible when |x[i]| is ~2^50 below the local component scale
        # (e.g. dust at a zero crossing); the value is then off by <= 1 ulp
        warnings.warn(f"{unpinnable} value(s) too small relative to their "
                      "trend+seasonal scale for bit-exact reconstruction")
    return Decomposition(trend=trend, seasonal=seasonal, residual=residual)


def _pin_reconstruction(x, trend, seasonal, residual, i: int) -> bool:
    """Adjust residual[i] (and, if needed, trend[i] by <= 2 ulp) until
    (trend[i] + seasonal[i]) + residual[i] == x[i] bit-exactly.

    Rounding can make a + (x - a) land one ulp off; when the residual grid
    is coarser than the input grid, nudging the smooth trend component by
    ulp-level dust shifts the reachable set onto x[i]."""
    t0, s, xi = trend[i], seasonal[i], x[i]
    t_candidates = [t0]
    for k in (1, 2):
        up, dn = t0, t0
        for _ in range(k):
            up = np.nextafter(up, np.inf)
            dn = np.nextafter(dn, -np.inf)
        t_candidates += [up, dn]
    for t in t_candidates:
        b = t + s
        r0 = xi - b
        for r in (r0, np.nextafter(r0, np.inf), np.nextafter(r0, -np.inf)):
            if b + r == xi:
                trend[i] = t
                residual[i] = r
                return True
    return False


def derive_load_features(df: pd.DataFrame, period: int = POINTS_PER_DAY) -> pd.DataFrame:
    """Add the daily-mean-load column and the three decomposition columns."""
    df = df.copy()
    if df["load_kw"].isna().any():
        raise DataError("derive_load_features needs an imputed load column")
    ts = pd.DatetimeIndex(df["timestamp"])
    daily_mean = df.groupby(ts.normalize())["load_kw"].transform("mean")
    df["daily_mean_load"] = daily_mean.to_numpy()
    dec = decompose(df["load_kw"].to_numpy(), period=period)
    df["trend"] = dec.trend
    df["seasonal"] = dec.seasonal
    df["residual"] = dec.residual
    return df


# -- windows --------------------------------------------------------------------


@dataclass
class SampleWindow:
    dyn: np.ndarray     # [T, D_dyn]
    stat: np.ndarray    # [D_stat]
    target: float


@dataclass
class WindowSet:
    dyn: np.ndarray          # [N, T, D_dyn]
    stat: np.ndarray         # [N, D_stat]
    y: np.ndarray            # [N]
    timestamps: np.ndarray   # target instants, [N]
    dyn_names: list
    stat_names: list

    def __len__(self) -> int:
        return len(self.y)

    def sample(self, i: int) -> SampleWindow:
        return SampleWindow(self.dyn[i], self.stat[i], float(self.y[i]))

    def slice(self, start: int, stop: int) -> "WindowSet":
        return WindowSet(self.dyn[start:stop], self.stat[start:stop],
                         self.y[start:stop], self.timestamps[start:stop],
                         self.dyn_names, self.stat_names)


def make_windows(df: pd.DataFrame, retained: list, t_steps: int = 12,
                 horizon: int = 1) -> WindowSet:
    """Sliding windows with stride 1: dynamic block from the load-history
    group, static vector sampled at the target time, target = load at t+h."""
    n = len(df)
    if n <= t_steps:
        raise DataError(f"need more than {t_steps} rows, got {n}")
    dyn_names = [c for c in retained if c in DYNAMIC_FEATURES]
    stat_names = [c for c in retained if c not in DYNAMIC_FEATURES]
    if not dyn_names:
        dyn_names = ["load_kw"]
    for c in dyn_names + stat_names:
        if c not in df.columns:
            raise DataError(f"retained feature {c!r} not in table")
        if df[c].isna().any():
            raise DataError(f"column {c!r} still has missing values")

    n_windows = n - t_steps - horizon + 1
    if n_windows < 1:
        raise DataError("series too short for the requested window/horizon")
    dyn_mat = df[dyn_names].to_numpy(dtype=np.float64)
    stat_mat = (df[stat_names].to_numpy(dtype=np.float64)
                if stat_names else np.zeros((n, 0)))
    load = df["load_kw"].to_numpy(dtype=np.float64)
    ts = df["timestamp"].to_numpy()

    windows = np.lib.stride_tricks.sliding_window_view(dyn_mat, t_steps, axis=0)
    dyn = np.ascontiguousarray(windows[:n_windows].transpose(0, 2, 1))
    target_rows = np.arange(n_windows) + t_steps + horizon - 1
    return WindowSet(dyn=dyn, stat=stat_mat[target_rows], y=load[target_rows],
                     timestamps=ts[target_rows], dyn_names=dyn_names,
                     stat_names=stat_names)


# -- normalization ----------------------------------------------------------------

SCALER_VERSION = 1


@dataclass
class Scaler:
    """Train-fitted z-score statistics for dyn/stat blocks and the target."""

    dyn_mean: np.ndarray
    dyn_std: np.ndarray
    stat_mean: np.ndarray
    stat_std: np.ndarray
    y_mean: float
    y_std: float
    dyn_names: list
    stat_names: list
    version: int = SCALER_VERSION

    @classmethod
    def fit(cls, ws: WindowSet) -> "Scaler":
        def stats(arr):
            mean = arr.mean(axis=0)
            std = arr.std(axis=0)
            degenerate = std == 0.0
            if degenerate.any():
                warnings.warn(f"{int(degenerate.sum())} constant feature(s); "
                              "scale left at 1")
                std = std.copy()
                std[degenerate] = 1.0
            return mean, std

        dyn_mean, dyn_std = stats(ws.dyn.reshape(-1, ws.dyn.shape[2]))
        if ws.stat.shape[1]:
            stat_mean, stat_std = stats(ws.stat)
        else:
            stat_mean = np.zeros(0)
            stat_std = np.ones(0)
        y_std = float(ws.y.std())
        if y_std == 0.0:
            warnings.warn("constant target; scale left at 1")
            y_std = 1.0
        return cls(dyn_mean, dyn_std, stat_mean, stat_std, float(ws.y.mean()),
                   y_std, ws.dyn_names, ws.stat_names)

    def transform(self, ws: WindowSet) -> WindowSet:
        stat = ((ws.stat - self.stat_mean) / self.stat_std
                if ws.stat.shape[1] else ws.stat)
        return WindowSet(dyn=(ws.dyn - self.dyn_mean) / self.dyn_std,
                         stat=stat, y=(ws.y - self.y_mean) / self.y_std,
                         timestamps=ws.timestamps, dyn_names=ws.dyn_names,
                         stat_names=ws.stat_names)

    def inverse_transform(self, ws: WindowSet) -> WindowSet:
        stat = (ws.stat * self.stat_std + self.stat_mean
                if ws.stat.shape[1] else ws.stat)
        return WindowSet(dyn=ws.dyn * self.dyn_std + self.dyn_mean,
                         stat=stat, y=ws.y * self.y_std + self.y_mean,
                         timestamps=ws.timestamps, dyn_names=ws.dyn_names,
                         stat_names=ws.stat_names)

    def inverse_y(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(y) * self.y_std + self.y_mean

    def to_json(self) -> str:
        return json.dumps({
            "version": self.version,
            "dyn_mean": self.dyn_mean.tolist(), "dyn_std": self.dyn_std.tolist(),
            "stat_mean": self.stat_mean.tolist(), "stat_std": self.stat_std.tolist(),
            "y_mean": self.y_mean, "y_std": self.y_std,
            "dyn_names": self.dyn_names, "stat_names": self.stat_names,
        }, sort_keys=True)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def from_json(cls, text: str) -> "Scaler":
        d = json.loads(text)
        if d.get("version") != SCALER_VERSION:
            raise DataError(f"scaler version {d.get('version')} "
                            f"!= supported {SCALER_VERSION}")
        return cls(np.array(d["dyn_mean"]), np.array(d["dyn_std"]),
                   np.array(d["stat_mean"]), np.array(d["stat_std"]),
                   d["y_mean"], d["y_std"], d["dyn_names"], d["stat_names"],
                   version=d["version"])

    @classmethod
    def load(cls, path) -> "Scaler":
        with open(path) as fh:
            return cls.from_json(fh.read())


def split_and_normalize(ws: WindowSet, ratios: tuple = (0.7, 0.2, 0.1)
                        ) -> tuple[WindowSet, WindowSet, WindowSet, Scaler]:
    """Contiguous chronological split; scaler fit on train only."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise DataError(f"split ratios must sum to 1, got {ratios}")
    n = len(ws)
    n_train = int(n * ratios[0])
    n_val = int(n * ratios[1])
    if n_train < 1 or n_val < 1 or n - n_train - n_val < 1:
        raise DataError(f"{n} windows cannot be split {ratios}")
    train, val, test = (ws.slice(0, n_train), ws.slice(n_train, n_train + n_val),
                        ws.slice(n_train + n_val, n))
    scaler = Scaler.fit(train)
    return (scaler.transform(train), scaler.transform(val),
            scaler.transform(test), scaler)


# -- window cache -----------------------------------------------------------------

CACHE_MAGIC = b"LCWC"


def save_window_cache(ws: WindowSet, path) -> None:
    """Binary window cache with a payload checksum."""
    arrays = {"dyn": ws.dyn, "stat": ws.stat, "y": ws.y}
    payload = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes()
                       for a in arrays.values())
    header = {
        "arrays": [{"name": k, "shape": list(v.shape)} for k, v in arrays.items()],
        "timestamps": [str(t) for t in ws.timestamps],
        "dyn_names": ws.dyn_names, "stat_names": ws.stat_names,
        "sha256": hashlib.sha256(payload).hexdigest(),
    }
    hbytes = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(len(hbytes).to_bytes(4, "little"))
        fh.write(hbytes)
        fh.write(payload)


def load_window_cache(path) -> WindowSet:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != CACHE_MAGIC:
        raise DataError("not a window cache file")
    hlen = int.from_bytes(blob[4:8], "little")
    header = json.loads(blob[8:8 + hlen].decode())
    payload = blob[8 + hlen:]
    if hashlib.sha256(payload).hexdigest() != header["sha256"]:
        raise DataError("window cache checksum mismatch")
    arrays = {}
    pos = 0
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape))
        arrays[entry["name"]] = np.frombuffer(
            payload[pos * 8:(pos + count) * 8], dtype="<f8").reshape(shape).copy()
        pos += count
    return WindowSet(dyn=arrays["dyn"], stat=arrays["stat"], y=arrays["y"],
                     timestamps=np.array(header["timestamps"], dtype="datetime64[ns]"),
                     dyn_names=header["dyn_names"], stat_names=header["stat_names"])

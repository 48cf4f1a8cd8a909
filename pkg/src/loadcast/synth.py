"""Synthetic load/weather/holiday data standing in for private utility data.

The generated load follows realistic patterns: a smooth double-peak daily
profile, lower weekend levels (Sundays most), dips on holidays, a slow
trend, temperature coupling and Gaussian noise. Weather is daily; holidays
are sparse with typed labels. Output CSVs are byte-identical for a given
spec and seed, and the ground-truth driver list is recorded alongside for
screening validation.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .preprocess import HOLIDAY_TYPES, POINTS_PER_DAY, WEATHER_SEVERITY, WIND_DIRECTIONS
from .rng import make_rng

__all__ = ["SynthSpec", "synth_generate", "planted_screen_frame"]


@dataclass
class SynthSpec:
    n_days: int = 60
    base_level: float = 50.0
    daily_amplitude: float = 10.0
    weekly_dip: float = 4.0          # weekend level drop; Sundays 1.5x
    trend_slope: float = 0.02        # per day
    holiday_effect: float = -8.0
    noise_sigma: float = 0.8
    temp_coeff: float = 0.35         # load response per deg C above seasonal mean
    distractor_features: int = 0
    start: str = "2021-01-01"

    def validate(self) -> None:
        if self.n_days < 30:
            raise ValueError(f"n_days must be >= 30, got {self.n_days}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


def _daily_shape(phases: np.ndarray) -> np.ndarray:
    """Smooth double-peak profile over the day, zero mean, unit-ish range."""
    t = phases / POINTS_PER_DAY
    shape = (0.6 * np.sin(2 * np.pi * (t - 0.30))
             + 0.4 * np.sin(4 * np.pi * (t - 0.22)))
    return shape - shape.mean()


def synth_generate(spec: SynthSpec, seed: int, outdir) -> dict:
    """Write load.csv, weather.csv, holidays.csv and truth.json to
    ``outdir``; returns the truth record (driver list and holiday dates)."""
    spec.validate()
    rng = make_rng(seed)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    n_days = spec.n_days
    days = pd.date_range(spec.start, periods=n_days, freq="D")
    day_of_year = days.dayofyear.to_numpy()

    tmax = 20.0 + 8.0 * np.sin(2 * np.pi * (day_of_year - 100) / 365.0) \
        + rng.normal(0, 1.5, n_days)
    tmin = tmax - rng.uniform(5.0, 10.0, n_days)
    cond_names = list(WEATHER_SEVERITY)
    cond = rng.choice(cond_names, size=n_days,
                      p=[0.35, 0.25, 0.15, 0.12, 0.07, 0.04, 0.02])
    wind_day = rng.integers(0, 8, n_days)
    wind_night = rng.integers(0, 8, n_days)
    dir_day = rng.choice(WIND_DIRECTIONS, size=n_days)
    dir_night = rng.choice(WIND_DIRECTIONS, size=n_days)

    n_holidays = max(1, n_days // 30)
    holiday_days = np.sort(rng.choice(np.arange(2, n_days - 2), size=n_holidays,
                                      replace=False))
    type_names = [t for t in HOLIDAY_TYPES if t != "none"]
    holiday_types = rng.choice(type_names, size=n_holidays)
    is_holiday = np.zeros(n_days, dtype=bool)
    is_holiday[holiday_days] = True

    n_points = n_days * POINTS_PER_DAY
    day_idx = np.repeat(np.arange(n_days), POINTS_PER_DAY)
    phases = np.tile(np.arange(POINTS_PER_DAY), n_days)
    dow = np.repeat(days.dayofweek.to_numpy(), POINTS_PER_DAY)

    weekly = np.zeros(n_points)
    weekly[dow == 5] = -spec.weekly_dip
    weekly[dow == 6] = -1.5 * spec.weekly_dip

    load = (spec.base_level
            + spec.trend_slope * day_idx
            + spec.daily_amplitude * _daily_shape(phases)
            + weekly
            + spec.holiday_effect * is_holiday[day_idx]
            + spec.temp_coeff * (tmax[day_idx] - 20.0)
            + spec.noise_sigma * rng.standard_normal(n_points))

    timestamps = pd.date_range(spec.start, periods=n_points, freq="15min")

    with open(outdir / "load.csv", "w") as fh:
        fh.write("timestamp,load_kw\n")
        for ts, v in zip(timestamps, load):
            fh.write(f"{ts.isoformat()},{float(v)!r}\n")

    distractors = [f"distractor_{i + 1}" for i in range(spec.distractor_features)]
    dvals = rng.normal(0, 1, size=(spec.distractor_features, n_days))
    with open(outdir / "weather.csv", "w") as fh:
        header = ("date,tmax_c,tmin_c,weather_cond,wind_day,winddir_day,"
                  "wind_night,winddir_night")
        if distractors:
            header += "," + ",".join(distractors)
        fh.write(header + "\n")
        for i, d in enumerate(days):
            row = (f"{d.date().isoformat()},{float(tmax[i])!r},{float(tmin[i])!r},"
                   f"{cond[i]},{wind_day[i]},{dir_day[i]},{wind_night[i]},"
                   f"{dir_night[i]}")
            if distractors:
                row += "," + ",".join(repr(float(v)) for v in dvals[:, i])
            fh.write(row + "\n")

    with open(outdir / "holidays.csv", "w") as fh:
        fh.write("date,holiday_type\n")
        for d, t in zip(holiday_days, holiday_types):
            fh.write(f"{days[d].date().isoformat()},{t}\n")

    truth = {
        "drivers": ["tmax_c", "is_holiday", "is_weekend", "weekday", "hour"],
        "holiday_dates": [days[d].date().isoformat() for d in holiday_days],
        "spec": asdict(spec),
        "seed": seed,
    }
    with open(outdir / "truth.json", "w") as fh:
        json.dump(truth, fh, indent=2, sort_keys=True)
    return truth


def planted_screen_frame(n: int = 2500, n_drivers: int = 3,
                         n_distractors: int = 10, seed: int = 0):
    """Feature table where the target is driven by lagged copies of the
    driver columns; distractors are independent AR(1) noise. Returns
    (frame, driver names) for screening-recovery experiments."""
    rng = make_rng(seed)
    cols = {}
    drivers = []
    y = 0.2 * rng.standard_normal(n)

    def ar1(length):
        x = np.zeros(length)
        eps = rng.standard_normal(length)
        for t in range(1, length):
            x[t] = 0.7 * x[t - 1] + eps[t]
        return x

    for i in range(n_drivers):
        name = f"driver_{i}"
        x = ar1(n)
        cols[name] = x
        y[1:] += 0.8 * x[:-1]
        drivers.append(name)
    for i in range(n_distractors):
        cols[f"distractor_{i}"] = ar1(n)
    cols["load_kw"] = y
    return pd.DataFrame(cols), drivers

"""Preprocessing pipeline: imputation, outliers, encoding, decomposition, windows."""

import numpy as np
import pandas as pd
import pytest

from loadcast.preprocess import (
    DataError,
    Scaler,
    UnrecoverableGapError,
    decompose,
    derive_load_features,
    encode_features,
    flag_and_clean_outliers,
    impute_missing,
    load_window_cache,
    make_windows,
    read_load_csv,
    save_window_cache,
    split_and_normalize,
)

POINTS = 96


def load_frame(n_days=20, value=5.0, start="2021-01-01"):
    ts = pd.date_range(start, periods=n_days * POINTS, freq="15min")
    return pd.DataFrame({"timestamp": ts, "load_kw": np.full(len(ts), value)})


def weather_frame(dates):
    return pd.DataFrame({
        "date": pd.to_datetime(dates),
        "tmax_c": 20.0, "tmin_c": 10.0, "weather_cond": "sunny",
        "wind_day": 3, "winddir_day": "east",
        "wind_night": 2, "winddir_night": "north",
    })


class TestImpute:
    def test_constant_donors(self):
        df = load_frame(16)
        idx = 8 * POINTS + 48  # noon, day 8
        df.loc[idx, "load_kw"] = np.nan
        out = impute_missing(df)
        assert out.loc[idx, "load_kw"] == 5.0
        assert not out["load_kw"].isna().any()

    def test_hand_mean_of_two_donors(self):
        df = load_frame(16)
        target_day, phase = 8, 40
        # all same-phase values missing except day 7 (=4) and day 9 (=6)
        for d in range(16):
            i = d * POINTS + phase
            if d == target_day:
                df.loc[i, "load_kw"] = np.nan
            elif d == 7:
                df.loc[i, "load_kw"] = 4.0
            elif d == 9:
                df.loc[i, "load_kw"] = 6.0
            elif abs(d - target_day) <= 7:
                df.loc[i, "load_kw"] = np.nan
        out = impute_missing(df)
        assert out.loc[target_day * POINTS + phase, "load_kw"] == 5.0

    def test_no_donors_raises(self):
        df = load_frame(16)
        phase = 12
        for d in range(16):
            df.loc[d * POINTS + phase, "load_kw"] = np.nan
        with pytest.raises(UnrecoverableGapError):
            impute_missing(df)

    def test_clean_input_unchanged(self):
        df = load_frame(10)
        out = impute_missing(df)
        pd.testing.assert_frame_equal(df, out)


class TestOutliers:
    def holidays(self, dates=()):
        return pd.DataFrame({"date": pd.to_datetime(list(dates)),
                             "holiday_type": ["national day"] * len(dates)})

    def test_clean_constant_series_untouched(self):
        df = load_frame(40)
        out = flag_and_clean_outliers(df, self.holidays(), k=5.0)
        np.testing.assert_array_equal(out["load_kw"], df["load_kw"])

    def test_single_spike_masked_and_imputed(self):
        df = load_frame(40)
        idx = 20 * POINTS + 30
        df.loc[idx, "load_kw"] = 50.0  # 10x the constant level
        out = flag_and_clean_outliers(df, self.holidays(), k=5.0)
        assert out.loc[idx, "load_kw"] == 5.0
        changed = np.flatnonzero(out["load_kw"].to_numpy()
                                 != df["load_kw"].to_numpy())
        assert list(changed) == [idx]

    def test_holiday_spike_kept(self):
        df = load_frame(40)
        spike_day = pd.Timestamp("2021-01-21")
        idx = 20 * POINTS + 30
        df.loc[idx, "load_kw"] = 50.0
        out = flag_and_clean_outliers(df, self.holidays([spike_day]), k=5.0)
        assert out.loc[idx, "load_kw"] == 50.0
        assert out.loc[idx, "is_holiday"] == 1.0

    def test_short_series_warns(self):
        df = load_frame(10)
        with pytest.warns(UserWarning, match="shrunk"):
            flag_and_clean_outliers(df, self.holidays(), k=5.0)


class TestEncode:
    def test_season_codes(self):
        df = load_frame(1, start="2021-04-10")
        enc = encode_features(df, weather_frame(["2021-04-10"]), self.no_holidays())
        assert (enc["season"] == 1).all()   # April -> spring
        df = load_frame(1, start="2021-12-25")
        enc = encode_features(df, weather_frame(["2021-12-25"]), self.no_holidays())
        assert (enc["season"] == 4).all()

    def no_holidays(self):
        return pd.DataFrame({"date": pd.to_datetime([]), "holiday_type": []})

    def test_one_hot_direction(self):
        df = load_frame(1)
        enc = encode_features(df, weather_frame(["2021-01-01"]), self.no_holidays())
        assert (enc["winddir_day_east"] == 1.0).all()
        others = [c for c in enc.columns
                  if c.startswith("winddir_day_") and c != "winddir_day_east"]
        assert all((enc[c] == 0.0).all() for c in others)

    def test_unseen_direction_rejected(self):
        df = load_frame(1)
        wx = weather_frame(["2021-01-01"])
        wx.loc[0, "winddir_day"] = "NNE"
        with pytest.raises(DataError, match="NNE"):
            encode_features(df, wx, self.no_holidays())

    def test_unseen_weather_cond_rejected(self):
        df = load_frame(1)
        wx = weather_frame(["2021-01-01"])
        wx.loc[0, "weather_cond"] = "hail"
        with pytest.raises(DataError, match="hail"):
            encode_features(df, wx, self.no_holidays())

    def test_weekend_and_holiday_flags(self):
        df = load_frame(2, start="2021-01-02")  # Sat + Sun
        hol = pd.DataFrame({"date": pd.to_datetime(["2021-01-03"]),
                            "holiday_type": ["new year"]})
        enc = encode_features(df, weather_frame(["2021-01-02", "2021-01-03"]), hol)
        assert (enc["is_weekend"] == 1.0).all()
        assert enc["is_holiday"].iloc[:POINTS].sum() == 0
        assert enc["is_holiday"].iloc[POINTS:].sum() == POINTS
        assert enc["holiday_type"].iloc[-1] == 1.0

    def test_extra_numeric_weather_columns_pass_through(self):
        df = load_frame(1)
        wx = weather_frame(["2021-01-01"])
        wx["distractor_1"] = 0.42
        enc = encode_features(df, wx, self.no_holidays())
        assert (enc["distractor_1"] == 0.42).all()


class TestDecompose:
    def test_pure_sine(self):
        t = np.arange(10 * POINTS)
        x = np.sin(2 * np.pi * t / POINTS)
        dec = decompose(x, period=POINTS)
        interior = slice(POINTS, -POINTS)
        assert np.abs(dec.seasonal[interior] - x[interior]).max() < 1e-6
        assert np.abs(dec.trend[interior]).max() < 1e-6
        assert np.abs(dec.residual[interior]).max() < 1e-6

    def test_constant_series(self):
        x = np.full(5 * POINTS, 3.7)
        dec = decompose(x, period=POINTS)
        np.testing.assert_allclose(dec.trend, 3.7, atol=1e-12)
        np.testing.assert_allclose(dec.seasonal, 0.0, atol=1e-12)
        np.testing.assert_allclose(dec.residual, 0.0, atol=1e-12)

    def test_reconstruction_exact_on_random_loadlike(self):
        # positive level with bounded variation, like a load series: the
        # identity is guaranteed when values stay at or above the residual
        # scale (see decompose docstring)
        rng = np.random.default_rng(7)
        for _ in range(25):
            n = int(rng.integers(2 * POINTS, 6 * POINTS))
            level = rng.uniform(20, 200)
            t = np.arange(n)
            x = (level
                 + 0.3 * level * np.sin(2 * np.pi * t / POINTS + rng.uniform(0, 7))
                 + 0.05 * level * rng.standard_normal(n)
                 + rng.uniform(-0.01, 0.01) * level * t / n)
            dec = decompose(x, period=POINTS)
            np.testing.assert_array_equal(dec.reconstruct(), x)

    def test_zero_crossing_data_warns_and_stays_within_ulp(self):
        # values ~2^50 below the component scale cannot be represented
        # exactly by any float64 residual; the off-by-one-ulp cases warn
        t = np.arange(10 * POINTS)
        x = np.sin(2 * np.pi * t / POINTS)
        with pytest.warns(UserWarning, match="bit-exact"):
            dec = decompose(x, period=POINTS)
        np.testing.assert_allclose(dec.reconstruct(), x, rtol=0, atol=1e-15)

    def test_seasonal_sums_to_zero(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=4 * POINTS) + np.tile(rng.normal(size=POINTS), 4)
        dec = decompose(x, period=POINTS)
        assert abs(dec.seasonal[:POINTS].sum()) < 1e-9

    def test_too_short_rejected(self):
        with pytest.raises(DataError):
            decompose(np.zeros(POINTS), period=POINTS)


class TestDeriveFeatures:
    def test_constant_day_daily_mean(self):
        df = load_frame(3, value=3.0)
        out = derive_load_features(df)
        np.testing.assert_allclose(out["daily_mean_load"], 3.0, atol=1e-12)

    def test_arithmetic_series_mean(self):
        df = load_frame(2)
        df["load_kw"] = np.concatenate([np.arange(1.0, 97.0), np.arange(1.0, 97.0)])
        out = derive_load_features(df)
        np.testing.assert_allclose(out["daily_mean_load"], 48.5, atol=1e-12)

    def test_decomposition_columns_match(self):
        rng = np.random.default_rng(3)
        df = load_frame(4)
        df["load_kw"] = rng.normal(size=len(df)) + 10.0
        out = derive_load_features(df)
        dec = decompose(df["load_kw"].to_numpy(), period=POINTS)
        np.testing.assert_array_equal(out["trend"], dec.trend)
        np.testing.assert_array_equal(out["seasonal"], dec.seasonal)
        np.testing.assert_array_equal(out["residual"], dec.residual)


class TestWindows:
    def encoded(self, n=30):
        rng = np.random.default_rng(0)
        ts = pd.date_range("2021-01-01", periods=n, freq="15min")
        return pd.DataFrame({
            "timestamp": ts,
            "load_kw": rng.normal(size=n) + 10,
            "daily_mean_load": rng.normal(size=n),
            "tmax_c": rng.normal(size=n),
            "is_holiday": (rng.random(n) > 0.8).astype(float),
        })

    def test_window_count(self):
        df = self.encoded(20)
        ws = make_windows(df, ["load_kw", "tmax_c"], t_steps=12, horizon=1)
        assert len(ws) == 8

    def test_target_is_load_at_t_plus_T(self):
        df = self.encoded(30)
        ws = make_windows(df, ["load_kw", "tmax_c"], t_steps=12)
        load = df["load_kw"].to_numpy()
        for i in range(len(ws)):
            assert ws.y[i] == load[i + 12]

    def test_first_window_verbatim(self):
        df = self.encoded(30)
        ws = make_windows(df, ["load_kw", "daily_mean_load", "tmax_c"], t_steps=12)
        np.testing.assert_array_equal(
            ws.dyn[0], df[["load_kw", "daily_mean_load"]].to_numpy()[:12])
        np.testing.assert_array_equal(ws.stat[0], df[["tmax_c"]].to_numpy()[12])

    def test_count_formula_random(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            n = int(rng.integers(14, 60))
            t = int(rng.integers(2, n - 1))
            ws = make_windows(self.encoded(n), ["load_kw"], t_steps=t)
            assert len(ws) == n - t

    def test_too_short_rejected(self):
        with pytest.raises(DataError):
            make_windows(self.encoded(10), ["load_kw"], t_steps=12)

    def test_missing_values_rejected(self):
        df = self.encoded(30)
        df.loc[5, "tmax_c"] = np.nan
        with pytest.raises(DataError, match="tmax_c"):
            make_windows(df, ["load_kw", "tmax_c"], t_steps=12)


class TestSplitNormalize:
    def windows(self, n=100):
        rng = np.random.default_rng(2)
        df = TestWindows().encoded(n + 12)
        return make_windows(df, ["load_kw", "daily_mean_load", "tmax_c"], t_steps=12)

    def test_70_20_10(self):
        train, val, test, _ = split_and_normalize(self.windows(100))
        assert (len(train), len(val), len(test)) == (70, 20, 10)

    def test_train_scaled_to_unit(self):
        train, _, _, _ = split_and_normalize(self.windows(100))
        flat = train.dyn.reshape(-1, train.dyn.shape[2])
        np.testing.assert_allclose(flat.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(flat.std(axis=0), 1.0, atol=1e-12)
        assert abs(train.y.mean()) < 1e-12
        assert abs(train.y.std() - 1.0) < 1e-12

    def test_chronological_order(self):
        train, val, test, _ = split_and_normalize(self.windows(100))
        assert train.timestamps.max() < val.timestamps.min()
        assert val.timestamps.max() < test.timestamps.min()

    def test_constant_column_passes_with_warning(self):
        ws = self.windows(100)
        ws.stat[:, 0] = 2.0
        with pytest.warns(UserWarning, match="constant"):
            train, _, _, scaler = split_and_normalize(ws)
        assert scaler.stat_std[0] == 1.0
        np.testing.assert_allclose(train.stat[:, 0], 0.0, atol=1e-12)

    def test_inverse_round_trip(self):
        ws = self.windows(100)
        _, _, _, scaler = split_and_normalize(ws)
        back = scaler.inverse_transform(scaler.transform(ws))
        np.testing.assert_allclose(back.dyn, ws.dyn, atol=1e-12)
        np.testing.assert_allclose(back.y, ws.y, atol=1e-12)

    def test_scaler_json_round_trip(self):
        _, _, _, scaler = split_and_normalize(self.windows(100))
        clone = Scaler.from_json(scaler.to_json())
        np.testing.assert_array_equal(clone.dyn_mean, scaler.dyn_mean)
        assert clone.y_std == scaler.y_std

    def test_scaler_version_mismatch_names_both(self):
        _, _, _, scaler = split_and_normalize(self.windows(100))
        text = scaler.to_json().replace('"version": 1', '"version": 99')
        with pytest.raises(DataError, match=r"99.*1"):
            Scaler.from_json(text)

    def test_bad_ratios_rejected(self):
        with pytest.raises(DataError):
            split_and_normalize(self.windows(100), ratios=(0.5, 0.2, 0.2))


class TestWindowCache:
    def test_round_trip(self, tmp_path):
        ws = TestSplitNormalize().windows(50)
        path = tmp_path / "cache.lcwc"
        save_window_cache(ws, path)
        back = load_window_cache(path)
        np.testing.assert_array_equal(back.dyn, ws.dyn)
        np.testing.assert_array_equal(back.y, ws.y)
        assert back.dyn_names == ws.dyn_names

    def test_checksum_detects_corruption(self, tmp_path):
        ws = TestSplitNormalize().windows(50)
        path = tmp_path / "cache.lcwc"
        save_window_cache(ws, path)
        blob = bytearray(path.read_bytes())
        blob[-5] ^= 0xFF
        path.write_bytes(bytes(blob))
        with pytest.raises(DataError, match="checksum"):
            load_window_cache(path)


class TestLoadCsv:
    def test_reindexes_gaps_to_nan(self, tmp_path):
        ts = pd.date_range("2021-01-01", periods=10, freq="15min")
        df = pd.DataFrame({"timestamp": ts, "load_kw": 1.0}).drop(index=[4])
        p = tmp_path / "load.csv"
        df.to_csv(p, index=False)
        out = read_load_csv(p)
        assert len(out) == 10
        assert out["load_kw"].isna().sum() == 1

    def test_non_monotonic_rejected(self, tmp_path):
        p = tmp_path / "load.csv"
        p.write_text("timestamp,load_kw\n2021-01-01T00:15:00,1\n2021-01-01T00:00:00,2\n")
        with pytest.raises(DataError, match="increasing"):
            read_load_csv(p)

    def test_missing_column_rejected(self, tmp_path):
        p = tmp_path / "load.csv"
        p.write_text("time,load\n2021-01-01T00:00:00,1\n")
        with pytest.raises(DataError, match="missing columns"):
            read_load_csv(p)


class TestPipelineIdempotence:
    def test_clean_table_passes_unchanged(self):
        df = load_frame(35)
        rng = np.random.default_rng(4)
        df["load_kw"] = 10.0 + 0.1 * rng.standard_normal(len(df))
        hol = pd.DataFrame({"date": pd.to_datetime([]), "holiday_type": []})
        once = flag_and_clean_outliers(impute_missing(df), hol, k=8.0)
        twice = flag_and_clean_outliers(impute_missing(once.drop(columns="is_holiday")),
                                        hol, k=8.0)
        np.testing.assert_array_equal(once["load_kw"], twice["load_kw"])

from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import loadveil as lv
from loadveil.meterdata import MeterCsvError, format_timestamp, parse_timestamp

UTC0 = datetime(2020, 1, 1, tzinfo=timezone.utc)


def batch(values, meter="m1", start=UTC0, period=900):
    return lv.ReadingBatch(meter, start, np.asarray(values, dtype=float), period)


class TestReadingBatch:
    def test_requires_two_readings(self):
        with pytest.raises(ValueError):
            batch([1.0])

    def test_rejects_negative(self):
        with pytest.raises(ValueError, match="nonnegative"):
            batch([1.0, -0.5])

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError, match="finite"):
            batch([1.0, float("nan")])

    def test_rejects_bad_period(self):
        with pytest.raises(ValueError, match="period"):
            batch([1.0, 2.0], period=0)

    def test_values_are_frozen(self):
        b = batch([1.0, 2.0])
        with pytest.raises(ValueError):
            b.values[0] = 9.0

    def test_timestamps_spacing(self):
        b = batch([1.0, 2.0, 3.0], period=900)
        ts = b.timestamps()
        assert ts[0] == UTC0
        assert ts[2] - ts[1] == timedelta(seconds=900)


class TestApplianceProfile:
    def test_rejects_jitter_of_one(self):
        with pytest.raises(ValueError, match="jitter"):
            lv.ApplianceProfile("x", 100.0, 2.0, 2.0, 1.0)

    def test_rejects_submulti_slot_dwell(self):
        with pytest.raises(ValueError, match="slot"):
            lv.ApplianceProfile("x", 100.0, 0.5, 2.0)

    def test_rejects_nonpositive_power(self):
        with pytest.raises(ValueError, match="rated_power"):
            lv.ApplianceProfile("x", 0.0, 2.0, 2.0)


class TestLoadCsv:
    def test_exact_fit_single_batch(self, tmp_path):
        readings, _ = lv.generate_synthetic(
            [lv.ApplianceProfile("a", 50.0, 4.0, 4.0)], t=96, batches=1, seed=3)
        path = tmp_path / "r.csv"
        lv.write_csv(readings, path)
        loaded = lv.load_csv(path, batch_length=96)
        assert len(loaded) == 1
        assert loaded[0].t == 96
        assert loaded[0].period_seconds == 900

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        assert lv.load_csv(path) == []

    def test_header_only_file(self, tmp_path):
        path = tmp_path / "h.csv"
        path.write_text("meter_id,timestamp,watts\n")
        assert lv.load_csv(path) == []

    def test_negative_value_names_line_and_value(self, tmp_path):
        path = tmp_path / "neg.csv"
        path.write_text("m1,2020-01-01T00:00:00Z,-5.0\n")
        with pytest.raises(MeterCsvError) as err:
            lv.load_csv(path)
        assert "line 1" in str(err.value)
        assert "-5.0" in str(err.value)

    def test_malformed_row_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("m1,2020-01-01T00:00:00Z,1.0\nm1,oops\n")
        with pytest.raises(MeterCsvError, match="line 2"):
            lv.load_csv(path)

    def test_unparseable_timestamp(self, tmp_path):
        path = tmp_path / "ts.csv"
        path.write_text("m1,yesterday,1.0\n")
        with pytest.raises(MeterCsvError, match="timestamp"):
            lv.load_csv(path)

    def test_non_monotone_timestamps(self, tmp_path):
        path = tmp_path / "mono.csv"
        path.write_text(
            "m1,2020-01-01T00:15:00Z,1.0\n"
            "m1,2020-01-01T00:00:00Z,2.0\n")
        with pytest.raises(MeterCsvError, match="non-monotone"):
            lv.load_csv(path)

    def test_partial_trailing_batch_flagged_by_length(self, tmp_path):
        readings, _ = lv.generate_synthetic(
            [lv.ApplianceProfile("a", 50.0, 4.0, 4.0)], t=10, batches=1, seed=3)
        lv.write_csv(readings, tmp_path / "r.csv")
        loaded = lv.load_csv(tmp_path / "r.csv", batch_length=7)
        assert [b.t for b in loaded] == [7, 3]
        np.testing.assert_allclose(
            np.concatenate([b.values for b in loaded]), readings[0].values, rtol=1e-9)

    def test_stranded_single_reading_is_an_error(self, tmp_path):
        rows = ["m1,2020-01-01T00:00:00Z,1.0",
                "m1,2020-01-01T00:15:00Z,2.0",
                "m1,2020-01-01T00:30:00Z,3.0"]
        (tmp_path / "r.csv").write_text("\n".join(rows) + "\n")
        with pytest.raises(MeterCsvError, match="single reading"):
            lv.load_csv(tmp_path / "r.csv", batch_length=2)

    def test_spacing_change_starts_new_run(self, tmp_path):
        rows = ["m1,2020-01-01T00:00:00Z,1.0",
                "m1,2020-01-01T00:15:00Z,2.0",
                "m1,2020-01-01T01:15:00Z,3.0",  # gap: new run
                "m1,2020-01-01T02:15:00Z,4.0"]
        (tmp_path / "r.csv").write_text("\n".join(rows) + "\n")
        loaded = lv.load_csv(tmp_path / "r.csv", batch_length=96)
        assert [b.t for b in loaded] == [2, 2]
        assert loaded[0].period_seconds == 900
        assert loaded[1].period_seconds == 3600

    def test_noncontiguous_meter_rows(self, tmp_path):
        rows = ["a,2020-01-01T00:00:00Z,1.0",
                "a,2020-01-01T00:15:00Z,1.0",
                "b,2020-01-01T00:00:00Z,1.0",
                "b,2020-01-01T00:15:00Z,1.0",
                "a,2020-01-01T00:30:00Z,1.0",
                "a,2020-01-01T00:45:00Z,1.0"]
        (tmp_path / "r.csv").write_text("\n".join(rows) + "\n")
        with pytest.raises(MeterCsvError, match="not contiguous"):
            lv.load_csv(tmp_path / "r.csv")


class TestRoundTrip:
    @settings(max_examples=40, deadline=None)
    @given(values=st.lists(st.floats(min_value=0.0, max_value=1e9, allow_subnormal=False),
                           min_size=2, max_size=40))
    def test_write_then_load_preserves_values(self, values, tmp_path_factory):
        path = tmp_path_factory.mktemp("rt") / "r.csv"
        lv.write_csv([batch(values)], path)
        loaded = lv.load_csv(path, batch_length=len(values))
        assert len(loaded) == 1
        np.testing.assert_allclose(loaded[0].values, values, rtol=1e-9, atol=0)

    def test_multi_batch_round_trip_preserves_order(self, tmp_path):
        readings, _ = lv.generate_synthetic(
            [lv.ApplianceProfile("a", 75.0, 3.0, 5.0, 0.1)], t=24, batches=5, seed=8)
        path = tmp_path / "r.csv"
        lv.write_csv(readings, path)
        loaded = lv.load_csv(path, batch_length=24)
        assert len(loaded) == 5
        for orig, back in zip(readings, loaded):
            np.testing.assert_allclose(back.values, orig.values, rtol=1e-9)
            assert back.start_time == orig.start_time

    def test_tiny_and_huge_magnitudes(self, tmp_path):
        values = [1.2345678901e-7, 9.87654321e8, 0.0, 123.456]
        path = tmp_path / "r.csv"
        lv.write_csv([batch(values)], path)
        np.testing.assert_allclose(
            lv.load_csv(path, batch_length=4)[0].values, values, rtol=1e-9, atol=0)


class TestGenerateSynthetic:
    def test_deterministic_per_seed(self):
        profiles = [lv.ApplianceProfile("a", 60.0, 3.0, 4.0, 0.2)]
        r1, t1 = lv.generate_synthetic(profiles, t=16, batches=3, seed=5)
        r2, t2 = lv.generate_synthetic(profiles, t=16, batches=3, seed=5)
        for b1, b2 in zip(r1, r2):
            assert np.array_equal(b1.values, b2.values)
        for g1, g2 in zip(t1[0], t2[0]):
            assert np.array_equal(g1.states, g2.states)

    def test_always_on_constant_appliance(self):
        # huge mean ON dwell: starts ON (stationary draw) and never switches
        profiles = [lv.ApplianceProfile("heater", 100.0, 1e9, 1.0)]
        readings, truth = lv.generate_synthetic(profiles, t=48, batches=2, seed=0)
        for b in readings:
            assert np.all(b.values == 100.0)
        assert all(g.states.all() for batch_truth in truth for g in batch_truth)

    def test_zero_profiles_rejected(self):
        with pytest.raises(ValueError, match="at least one"):
            lv.generate_synthetic([], t=16, batches=1, seed=0)

    def test_two_profiles_value_enumeration(self):
        # with zero jitter every reading is one of the 4 subset sums
        profiles = [lv.ApplianceProfile("a", 100.0, 3.0, 3.0),
                    lv.ApplianceProfile("b", 60.0, 2.0, 5.0)]
        readings, _ = lv.generate_synthetic(profiles, t=96, batches=4, seed=21)
        allowed = {0.0, 60.0, 100.0, 160.0}
        seen = {v for b in readings for v in b.values}
        assert seen <= allowed
        assert len(seen) >= 3  # the process actually moves around

    def test_values_equal_sum_of_appliance_draws(self):
        profiles = [lv.ApplianceProfile("a", 100.0, 3.0, 3.0),
                    lv.ApplianceProfile("b", 7.5, 2.0, 5.0)]
        readings, truth = lv.generate_synthetic(profiles, t=64, batches=3, seed=9)
        for b, batch_truth in zip(readings, truth):
            recon = sum(g.states * p.rated_power_watts
                        for g, p in zip(batch_truth, profiles))
            np.testing.assert_allclose(b.values, recon, rtol=0, atol=1e-12)

    def test_batches_are_contiguous_in_time(self):
        profiles = [lv.ApplianceProfile("a", 10.0, 2.0, 2.0)]
        readings, _ = lv.generate_synthetic(profiles, t=12, batches=3, seed=1)
        for prev, cur in zip(readings, readings[1:]):
            assert (cur.start_time - prev.start_time).total_seconds() == 12 * 900


class TestWriteCsv:
    def test_empty_list_writes_header_only(self, tmp_path):
        path = tmp_path / "empty.csv"
        lv.write_csv([], path)
        assert path.read_text() == "meter_id,timestamp,watts\n"

    def test_row_count(self, tmp_path):
        readings, _ = lv.generate_synthetic(
            [lv.ApplianceProfile("a", 5.0, 2.0, 2.0)], t=96, batches=1, seed=0)
        path = tmp_path / "r.csv"
        lv.write_csv(readings, path)
        lines = path.read_text().strip().split("\n")
        assert len(lines) == 1 + 96


class TestTruthCsv:
    def test_round_trip(self, tmp_path):
        profiles = [lv.ApplianceProfile("a", 10.0, 2.0, 2.0),
                    lv.ApplianceProfile("b", 5.0, 3.0, 4.0)]
        _, truth = lv.generate_synthetic(profiles, t=20, batches=3, seed=2)
        path = tmp_path / "truth.csv"
        lv.write_truth_csv(truth, path)
        back = lv.load_truth_csv(path)
        assert len(back) == 3
        for orig_list, back_list in zip(truth, back):
            for orig, copy in zip(orig_list, back_list):
                assert orig.appliance_name == copy.appliance_name
                assert np.array_equal(orig.states, copy.states)


class TestTimestamps:
    def test_z_suffix_round_trip(self):
        ts = parse_timestamp("2020-06-01T12:30:00Z")
        assert ts.tzinfo is not None
        assert format_timestamp(ts) == "2020-06-01T12:30:00Z"

    def test_offset_form_normalized_to_utc(self):
        ts = parse_timestamp("2020-06-01T14:30:00+02:00")
        assert format_timestamp(ts) == "2020-06-01T12:30:00Z"

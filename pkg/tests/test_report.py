import time

import numpy as np
import pytest

from entropy_patterns.errors import EmptySeriesError, EmptySideError
from entropy_patterns.market_data import BarSeries
from entropy_patterns.pattern_engine import Pattern
from entropy_patterns.report import (
    all_pairs_histogram,
    build_manifest,
    cross_distance_histogram,
    file_digest,
    histogram_shift_summary,
    manifests_equal_except_clock,
    monthly_volatility,
    read_histogram_csv,
    read_manifest,
    write_histogram_csv,
    write_manifest,
    write_volatility_csv,
)
from entropy_patterns.svg import render_box_plot, render_histogram, write_svg
from entropy_patterns.validation import BUY, SELL


def pat(pid, vec, label):
    origin = np.datetime64("2017-01-02T00:00:00", "s") + np.timedelta64(pid, "m")
    return Pattern(pid, origin, np.asarray(vec, np.float64), label, 20.0)


def series_with_opens(month_opens, start_year=2017):
    """month_opens: list of (month 1..12 offset from start_year, opens list)."""
    stamps, opens = [], []
    for months_from_start, values in month_opens:
        year = start_year + months_from_start // 12
        month = months_from_start % 12 + 1
        for day, v in enumerate(values, start=1):
            stamps.append(np.datetime64(f"{year:04d}-{month:02d}-{day:02d}T00:00:00", "s"))
            opens.append(float(v))
    opens = np.array(opens)
    return BarSeries("T", 30, np.array(stamps, dtype="datetime64[s]"),
                     opens, opens + 1.0, opens - 1.0, opens.copy())


class TestCrossHistogram:
    def test_single_pair(self):
        h = cross_distance_histogram([pat(0, [0.0, 0.0], BUY)], [pat(1, [1.0, 2.0], SELL)], bins=4)
        assert h.sample_count == 1
        assert h.mean == 3.0 and h.median == 3.0
        assert h.counts.sum() == 1

    def test_translation_invariant(self):
        buys = [pat(i, np.array([i, 0.5 * i, 3.0]), BUY) for i in range(4)]
        sells = [pat(10 + i, np.array([2.0 * i, 1.0, i]), SELL) for i in range(5)]
        shift = np.array([7.0, -3.0, 11.0])
        buys2 = [pat(p.id, p.features + shift, BUY) for p in buys]
        sells2 = [pat(p.id, p.features + shift, SELL) for p in sells]
        a = cross_distance_histogram(buys, sells, bins=6)
        b = cross_distance_histogram(buys2, sells2, bins=6)
        assert np.allclose(a.bin_edges, b.bin_edges, atol=1e-9)
        assert np.array_equal(a.counts, b.counts)
        assert a.mean == pytest.approx(b.mean, abs=1e-9)

    def test_three_by_three_hand_arithmetic(self):
        buys = [pat(i, [float(i), 0.0], BUY) for i in range(3)]
        sells = [pat(10 + i, [0.0, float(i + 1)], SELL) for i in range(3)]
        # distances: {1,2,3, 2,3,4, 3,4,5} -> mean 3, median 3
        h = cross_distance_histogram(buys, sells, bins=5)
        assert h.sample_count == 9
        assert h.mean == 3.0
        assert h.median == 3.0

    def test_counts_conserved(self):
        rng = np.random.default_rng(3)
        buys = [pat(i, rng.uniform(0, 5, 8), BUY) for i in range(17)]
        sells = [pat(100 + i, rng.uniform(0, 5, 8), SELL) for i in range(23)]
        h = cross_distance_histogram(buys, sells, bins=13)
        assert h.counts.sum() == 17 * 23
        assert h.bin_edges[0] <= h.median <= h.bin_edges[-1]
        assert h.bin_edges[0] <= h.mean <= h.bin_edges[-1]

    def test_empty_side(self):
        with pytest.raises(EmptySideError):
            cross_distance_histogram([], [pat(0, [1.0], SELL)])

    def test_all_pairs_mode(self):
        pats = [pat(i, [float(i)], BUY) for i in range(5)]
        h = all_pairs_histogram(pats, bins=4)
        assert h.sample_count == 10  # C(5,2)

    def test_shift_summary(self):
        buys = [pat(i, [float(i), 0.0], BUY) for i in range(3)]
        sells = [pat(10 + i, [0.0, float(i + 1)], SELL) for i in range(3)]
        raw = cross_distance_histogram(buys, sells, bins=5, population="raw")
        filt = cross_distance_histogram(buys[:1], sells[2:], bins=5, population="filtered")
        s = histogram_shift_summary(raw, filt)
        assert s["mean_delta"] == filt.mean - raw.mean
        assert s["median_delta"] == filt.median - raw.median
        assert s["raw_pairs"] == 9 and s["filtered_pairs"] == 1


class TestMonthlyVolatility:
    def test_constant_month_zero_std(self):
        years = monthly_volatility(series_with_opens([(0, [5.0] * 10)]))
        assert years[0].monthly_std == [0.0]

    def test_known_population_std(self):
        years = monthly_volatility(series_with_opens([(0, [1.0, 2.0, 3.0, 4.0])]))
        assert years[0].monthly_std[0] == pytest.approx(1.118033988749895, abs=1e-12)

    def test_sample_std_switch(self):
        years = monthly_volatility(
            series_with_opens([(0, [1.0, 2.0, 3.0, 4.0])]), ddof=1
        )
        assert years[0].monthly_std[0] == pytest.approx(np.std([1, 2, 3, 4], ddof=1), abs=1e-12)

    def test_identical_years_identical_boxes(self):
        rng = np.random.default_rng(11)
        months = [(m, list(rng.uniform(0, 10, 6))) for m in range(12)]
        twice = months + [(m + 12, vals) for m, vals in months]
        a, b = monthly_volatility(series_with_opens(twice))
        assert a.monthly_std == b.monthly_std
        assert (a.q1, a.median, a.q3) == (b.q1, b.median, b.q3)
        assert (a.whisker_low, a.whisker_high) == (b.whisker_low, b.whisker_high)

    def test_quartile_ordering(self):
        rng = np.random.default_rng(13)
        months = [(m, list(rng.uniform(0, 50, 8))) for m in range(12)]
        (y,) = monthly_volatility(series_with_opens(months))
        assert y.q1 <= y.median <= y.q3
        assert y.whisker_low <= y.q1 and y.q3 <= y.whisker_high
        assert all(s >= 0 for s in y.monthly_std)

    def test_empty_series(self):
        with pytest.raises(EmptySeriesError):
            monthly_volatility(BarSeries("T", 30))


class TestManifest:
    def config(self):
        return {"alpha": 0.8, "k": 25, "theta": 9.5, "swing_points": 15.0}

    def test_equal_except_clock(self, tmp_path):
        data = tmp_path / "input.csv"
        data.write_text("20170102 180100;1;2;0;1;0\n")
        counts = {"raw_patterns": 42, "filtered": 17}
        a = build_manifest("0.1.0", self.config(), {"bars": data}, counts, seed=7)
        time.sleep(0.01)
        b = build_manifest("0.1.0", self.config(), {"bars": data}, counts, seed=7)
        assert manifests_equal_except_clock(a, b)

    def test_config_change_localized(self, tmp_path):
        data = tmp_path / "input.csv"
        data.write_text("x\n")
        a = build_manifest("0.1.0", self.config(), {"bars": data}, {}, seed=7)
        changed = dict(self.config(), alpha=0.5)
        b = build_manifest("0.1.0", changed, {"bars": data}, {}, seed=7)
        assert not manifests_equal_except_clock(a, b)
        assert a["inputs"] == b["inputs"]
        assert a["config"]["k"] == b["config"]["k"]
        assert a["config"]["alpha"] != b["config"]["alpha"]

    def test_digest_tracks_content(self, tmp_path):
        f = tmp_path / "f.csv"
        f.write_text("one\n")
        d1 = file_digest(f)
        f.write_text("two\n")
        assert file_digest(f) != d1

    def test_round_trip(self, tmp_path):
        data = tmp_path / "input.csv"
        data.write_text("x\n")
        m = build_manifest("0.1.0", self.config(), {"bars": data}, {"n": 1}, seed=3)
        path = tmp_path / "manifest.json"
        write_manifest(m, path)
        assert read_manifest(path) == m


class TestArtifacts:
    def histogram(self):
        rng = np.random.default_rng(17)
        buys = [pat(i, rng.uniform(0, 5, 8), BUY) for i in range(9)]
        sells = [pat(50 + i, rng.uniform(0, 5, 8), SELL) for i in range(11)]
        return cross_distance_histogram(buys, sells, bins=7)

    def test_histogram_csv_round_trip(self, tmp_path):
        h = self.histogram()
        path = tmp_path / "hist.csv"
        write_histogram_csv(h, path)
        text = path.read_text()
        assert text.startswith("# population=raw\n")
        back = read_histogram_csv(path)
        assert np.array_equal(back.counts, h.counts)
        assert np.allclose(back.bin_edges, h.bin_edges, atol=0, rtol=0)
        assert back.mean == h.mean and back.median == h.median
        assert back.sample_count == h.sample_count

    def test_volatility_csv(self, tmp_path):
        rng = np.random.default_rng(19)
        months = [(m, list(rng.uniform(0, 10, 5))) for m in range(12)]
        years = monthly_volatility(series_with_opens(months))
        path = tmp_path / "vol.csv"
        write_volatility_csv(years, path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# year=2017 ")
        assert "year,month_index,std" in lines
        assert len([l for l in lines if not l.startswith("#")]) == 13

    def test_histogram_svg(self, tmp_path):
        h = self.histogram()
        text = render_histogram(h)
        assert text.startswith("<svg ")
        assert text.count("<rect") == len(h.counts) + 1  # bins + background
        path = tmp_path / "hist.svg"
        write_svg(text, path)
        write_svg(render_histogram(h), tmp_path / "hist2.svg")
        assert path.read_bytes() == (tmp_path / "hist2.svg").read_bytes()

    def test_box_plot_svg(self):
        rng = np.random.default_rng(23)
        months = [(m, list(rng.uniform(0, 10, 5))) for m in range(24)]
        years = monthly_volatility(series_with_opens(months))
        text = render_box_plot(years)
        assert text.startswith("<svg ")
        assert text.count("<rect") == len(years) + 1
        assert "2017" in text and "2018" in text

import pytest

from scripts.analyze import load_csv, median


def test_median_matches_pandas_for_odd_and_even_counts():
    assert median([3, 1, 2]) == 2.0
    assert median([4.0, 1.0, 3.0, 2.0]) == 2.5


def test_median_of_nothing_is_zero():
    assert median([]) == 0.0


def test_missing_csv_loads_as_no_rows(tmp_path):
    assert load_csv(tmp_path, "latency.csv") == []


def test_latency_csv_feeds_the_median(tmp_path):
    (tmp_path / "latency.csv").write_text("source,latency_us\n1,2000000\n1,4000000\n2,9000000\n")
    rows = load_csv(tmp_path, "latency.csv")
    assert median([int(r["latency_us"]) for r in rows]) == pytest.approx(4_000_000)

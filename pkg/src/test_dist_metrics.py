"""Tests for outcome distributions and total variation distance."""
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dist_metrics import OutcomeDistribution, normalize, tvd, tvd_counts, tvd_per_part, tvd_summary
from errors import MetricsError
from sim_engine import CountsTable, run_shots

OUTCOMES = ["00", "01", "10", "11"]


@st.composite
def distributions(draw):
    weights = draw(st.lists(st.integers(min_value=0, max_value=1000), min_size=4, max_size=4)
                   .filter(lambda w: sum(w) > 0))
    total = sum(weights)
    return {x: w / total for x, w in zip(OUTCOMES, weights) if w}


def test_known_distances():
    assert tvd({"0": 1.0}, {"1": 1.0}) == 1.0
    assert tvd({"00": 0.5, "11": 0.5}, {"00": 0.5, "11": 0.5}) == 0.0
    assert tvd({"00": 0.5, "11": 0.5}, {"00": 1.0}) == pytest.approx(0.5)


def test_missing_outcomes_count_as_zero():
    p = OutcomeDistribution({"00": 0.25, "01": 0.75})
    q = OutcomeDistribution({"01": 0.75, "10": 0.25})
    assert tvd(p, q) == pytest.approx(0.25)


def test_distribution_validation():
    with pytest.raises(MetricsError, match="sum to"):
        OutcomeDistribution({"0": 0.5})
    with pytest.raises(MetricsError, match="outside"):
        OutcomeDistribution({"0": 1.5, "1": -0.5})


def test_distribution_lookup_and_support():
    d = OutcomeDistribution({"1": 0.0, "0": 1.0})
    assert d["0"] == 1.0 and d["1"] == 0.0 and d["x"] == 0.0
    assert d.support == ("0",)


def test_normalize():
    d = normalize(CountsTable({"0": 1, "1": 3}, 4))
    assert d.probs == {"0": 0.25, "1": 0.75}
    with pytest.raises(MetricsError):
        normalize(CountsTable({}, 0))


def test_per_part_and_summary():
    ref = CountsTable({"00": 50, "11": 50}, 100)
    parts = [CountsTable({"00": 50, "11": 50}, 100), CountsTable({"00": 40, "11": 50, "01": 10}, 100)]
    distances = tvd_per_part(parts, ref)
    assert distances == pytest.approx([0.0, 0.1])
    assert tvd_summary(distances) == pytest.approx((0.05, 0.1))
    assert tvd_per_part(parts, [ref, parts[1]]) == pytest.approx([0.0, 0.0])
    with pytest.raises(MetricsError):
        tvd_per_part(parts, [ref])
    with pytest.raises(MetricsError):
        tvd_summary([])


@settings(max_examples=1000)
@given(p=distributions(), q=distributions(), r=distributions())
def test_tvd_is_a_metric(p, q, r):
    assert 0.0 <= tvd(p, q) <= 1.0
    assert tvd(p, q) == pytest.approx(tvd(q, p), abs=1e-15)
    assert tvd(p, p) <= 1e-12
    assert tvd(p, r) <= tvd(p, q) + tvd(q, r) + 1e-12


def test_split_seeds_match_one_run(bell, noiseless):
    whole = run_shots(bell, noiseless, 50_000, seed=21)
    halves = run_shots(bell, noiseless, 25_000, seed=22).merge(run_shots(bell, noiseless, 25_000, seed=23))
    assert halves.shots == 50_000
    assert tvd_counts(whole, halves) <= 0.02

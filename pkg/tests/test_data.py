import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dagloop.data import (
    DEFAULT_BUCKETS,
    DataError,
    IngestConfig,
    PanelDataset,
    TemporalTag,
    bucket_allocation,
    load_csv,
    sample_balanced_subset,
    tag_column,
)


@pytest.mark.parametrize(
    "name, expected",
    [
        ("delta_roa_2016_2017", TemporalTag.delta(2016, 2017)),
        ("delta_ebitda_margin_2015_2016", TemporalTag.delta(2015, 2016)),
        ("sales2015", TemporalTag.static(2015)),
        ("roe2016", TemporalTag.static(2016)),
        ("roe_2016", TemporalTag.static(2016)),
        ("bankruptcy_2018_2019", TemporalTag.static(2019)),
        ("province_milano", TemporalTag.atemporal()),
        ("sector_C", TemporalTag.atemporal()),
        ("delta_roa_2017", TemporalTag.static(2017)),
        ("ratio_2015_vs_2017_x", TemporalTag.atemporal()),
    ],
)
def test_tag_column(name, expected):
    assert tag_column(name) == expected


def test_effective_times():
    assert TemporalTag.delta(2016, 2017).effective_time == 2017
    assert TemporalTag.static(2015).effective_time == 2015
    assert TemporalTag.atemporal().effective_time == -math.inf


def test_outcome_range_anchors_to_earliest_year():
    assert tag_column("bankruptcy_2018_2019", outcome=True) == TemporalTag.static(2018)


def test_delta_requires_increasing_years():
    with pytest.raises(ValueError):
        TemporalTag.delta(2017, 2016)


@given(st.text(max_size=40))
def test_tag_column_is_total_and_pure(name):
    assert tag_column(name) == tag_column(name)


def test_load_csv_tags_and_kinds(write_csv):
    path = write_csv(
        "delta_ebitda_margin_2015_2016,bankruptcy_2018_2019,roe2016\n"
        "0.1,0,1.5\n-0.2,1,2.5\n0.3,0,0.5\n"
    )
    ds = load_csv(path, IngestConfig("delta_ebitda_margin_2015_2016", "bankruptcy_2018_2019"))
    tags = ds.tags()
    assert tags["delta_ebitda_margin_2015_2016"] == TemporalTag.delta(2015, 2016)
    assert tags["bankruptcy_2018_2019"] == TemporalTag.static(2018)
    assert tags["roe2016"] == TemporalTag.static(2016)
    assert ds.is_binary("bankruptcy_2018_2019")
    assert not ds.is_binary("roe2016")
    assert ds.values.shape == (3, 3)


def test_load_csv_missing_outcome(write_csv):
    path = write_csv("a,b\n1,2\n")
    with pytest.raises(DataError, match="'y'"):
        load_csv(path, IngestConfig("a", "y"))


def test_load_csv_non_numeric_reports_coordinates(write_csv):
    path = write_csv("a,b\n1,2\n3,oops\n")
    with pytest.raises(DataError, match=r":3: non-numeric cell 'oops' in column 'b'"):
        load_csv(path, IngestConfig("a", "b"))


def test_load_csv_drops_incomplete_rows(write_csv):
    path = write_csv("a,b\n1,2\n3,\n4,NA\n5,6\n")
    ds = load_csv(path, IngestConfig("a", "b"))
    assert ds.n_rows == 2
    assert ds.rows_dropped == 2


def test_load_csv_strict_missing(write_csv):
    path = write_csv("a,b\n1,2\n3,\n")
    with pytest.raises(DataError, match="missing value"):
        load_csv(path, IngestConfig("a", "b", missing="error"))


def test_load_csv_empty(write_csv):
    with pytest.raises(DataError):
        load_csv(write_csv("a,b\n"), IngestConfig("a", "b"))


def test_tag_overrides_and_binary_config(write_csv):
    path = write_csv("a,b,c\n1,0,1\n2,0,1\n3,0,1\n")
    cfg = IngestConfig("a", "c", tag_overrides={"a": "delta:2015:2016"}, binary_columns=["b"])
    ds = load_csv(path, cfg)
    assert ds.meta("a").tag == TemporalTag.delta(2015, 2016)
    assert ds.is_binary("b")
    assert not ds.is_binary("c")  # only one value observed


def test_ingest_config_from_json(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text('{"treatment": "a", "outcome": "b", "missing": "error"}')
    cfg = IngestConfig.from_json(p)
    assert (cfg.treatment, cfg.outcome, cfg.missing) == ("a", "b", "error")
    p.write_text('{"treatment": "a", "outcome": "b", "bogus": 1}')
    with pytest.raises(DataError, match="bogus"):
        IngestConfig.from_json(p)


def _bucket_counts(ds, names):
    tags = ds.tags()
    counts = Counter(tags[n] for n in names[2:])
    return tuple(counts[b] for b in DEFAULT_BUCKETS)


@pytest.mark.parametrize(
    "m, expected",
    [(20, (3, 3, 3, 3, 6)), (7, (1, 1, 1, 1, 1)), (2, (0, 0, 0, 0, 0)), (50, (9, 9, 9, 9, 12))],
)
def test_sample_balanced_subset_allocation(panel, m, expected):
    names = sample_balanced_subset(panel, m, rng_seed=4)
    assert names[:2] == [panel.treatment, panel.outcome]
    assert len(set(names)) == m
    assert _bucket_counts(panel, names) == expected


def test_sample_balanced_subset_rejects_small_m(panel):
    with pytest.raises(DataError):
        sample_balanced_subset(panel, 1, 0)


def test_bucket_allocation_shortfall_goes_to_2017_then_in_order():
    # quota 4 each (+0 remainder); first bucket has only 1
    assert bucket_allocation([1, 10, 10, 10, 10], 20) == [1, 4, 4, 4, 7]
    # 2017 bucket also short: deficit spills to the other buckets in order
    assert bucket_allocation([1, 10, 10, 10, 5], 20) == [1, 6, 4, 4, 5]
    with pytest.raises(DataError):
        bucket_allocation([1, 1, 1, 1, 1], 6)


@given(m=st.integers(2, 60), seed=st.integers(0, 2**32 - 1))
def test_sample_balanced_subset_properties(panel, m, seed):
    a = sample_balanced_subset(panel, m, seed)
    b = sample_balanced_subset(panel, m, seed)
    assert a == b
    assert len(a) == m and len(set(a)) == m
    assert panel.treatment in a and panel.outcome in a
    counts = _bucket_counts(panel, a)
    assert sum(counts) == m - 2
    quota = (m - 2) // 5
    # every bucket holds 12 columns here, so only the 2017 remainder can spill
    assert all(c >= quota for c in counts)
    if quota + (m - 2) % 5 <= 12:
        assert counts[:4] == (quota,) * 4


def test_panel_dataset_validates_roles():
    with pytest.raises(DataError):
        PanelDataset.from_array(["a", "b"], np.zeros((3, 2)), "a", "zz")

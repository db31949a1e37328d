import numpy as np
import pytest

from attnbench import errors
from attnbench.fixtures import gen_fixture


class TestCounting:
    def test_enumerates_all_sequences(self):
        data = gen_fixture("counting", seed=3)
        assert len(data.series) == 1024
        assert data.n == 10
        # every bit pattern appears exactly once
        codes = {tuple(int(v) for v in row) for row in data.series}
        assert len(codes) == 1024

    def test_eleven_classes(self):
        data = gen_fixture("counting", seed=3)
        assert data.classes == list(range(11))
        ones = data.series.sum(axis=1).astype(int)
        assert np.array_equal(ones, data.labels)

    def test_split_sizes(self):
        data = gen_fixture("counting", seed=3)
        counts = {s: int((data.split == s).sum()) for s in ("train", "val", "test")}
        assert counts == {"train": 308, "val": 204, "test": 512}

    def test_deterministic_under_seed(self):
        a = gen_fixture("counting", seed=9)
        b = gen_fixture("counting", seed=9)
        assert np.array_equal(a.series, b.series)
        assert np.array_equal(a.split, b.split)
        c = gen_fixture("counting", seed=10)
        assert not np.array_equal(a.split, c.split)

    def test_custom_length(self):
        data = gen_fixture("counting", {"length": 6}, seed=0)
        assert len(data.series) == 64
        assert data.classes == list(range(7))


class TestCountingBinary:
    def test_two_classes_partitioned_at_five(self):
        data = gen_fixture("counting-binary", seed=3)
        assert data.classes == [0, 1]
        ones = data.series.sum(axis=1).astype(int)
        assert np.array_equal(data.labels, (ones >= 5).astype(int))

    def test_same_sequences_as_counting(self):
        plain = gen_fixture("counting", seed=3)
        binary = gen_fixture("counting-binary", seed=3)
        assert np.array_equal(plain.series, binary.series)


class TestTrend:
    def test_deterministic_under_seed(self):
        a = gen_fixture("trend", seed=4)
        b = gen_fixture("trend", seed=4)
        assert np.array_equal(a.series, b.series)
        assert np.array_equal(a.labels, b.labels)

    def test_shape_and_splits(self):
        data = gen_fixture("trend", {"n": 24, "train_per_class": 5, "test_per_class": 7}, seed=1)
        assert data.n == 24
        assert int((data.split == "train").sum()) == 10
        assert int((data.split == "test").sum()) == 14
        assert data.classes == [0, 1]

    def test_classes_have_distinct_midpoints(self):
        # the slow fall is already mid-range at n/2; the sudden fall is not
        data = gen_fixture("trend", {"noise": 0.0}, seed=2)
        mid = data.n // 2
        slow = data.series[data.labels == 0][:, mid]
        sudden = data.series[data.labels == 1][:, mid]
        assert slow.max() < 0.5
        assert sudden.min() > 0.5


class TestBadParams:
    def test_unknown_kind(self):
        with pytest.raises(errors.BadParams):
            gen_fixture("nope")

    def test_bad_length(self):
        with pytest.raises(errors.BadParams):
            gen_fixture("counting", {"length": 1})

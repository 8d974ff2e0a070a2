import random

import pytest
from hypothesis import given, strategies as st

from groupin.core import DeviceId, ScannerId, TimeGrid, WirelessPacket
from groupin.preprocess import (NormalizationConfig, SampledReading, StreamingSampler, lower_median, normalize,
                                sample, to_traces)

GRID = TimeGrid(5.0, 120.0, 0.0)


def pk(t, rssi, device="a", scanner="s1", ref=None):
    return WirelessPacket(t, rssi, DeviceId(device), ScannerId(scanner), ref)


def reading(mr, mrr=None):
    return SampledReading(ScannerId("s1"), DeviceId("a"), 0, mr, mrr, 1)


class TestSample:
    def test_median_of_three(self):
        (r,) = sample([pk(0.1, -70), pk(0.2, -60), pk(0.3, -80)], GRID)
        assert r.mr == -70 and r.count == 3

    def test_even_count_takes_lower_middle(self):
        (r,) = sample([pk(0.1, -70), pk(0.2, -60)], GRID)
        assert r.mr == -70

    def test_singleton(self):
        (r,) = sample([pk(1.0, -55)], GRID)
        assert (r.mr, r.count, r.mrr) == (-55, 1, None)

    def test_mean_mode(self):
        (r,) = sample([pk(0.1, -70), pk(0.2, -60)], GRID, NormalizationConfig(mode="mean"))
        assert r.mr == -65

    def test_one_reading_per_key(self):
        ps = [pk(0.1, -70), pk(4.9, -71), pk(5.0, -72), pk(1.0, -60, "b"), pk(1.0, -61, scanner="s2")]
        keys = [(r.slot, r.scanner, r.device) for r in sample(ps, GRID)]
        assert keys == [(0, "s1", "a"), (0, "s1", "b"), (0, "s2", "a"), (1, "s1", "a")]

    def test_reference_rssi_median(self):
        (r,) = sample([pk(0.1, -70, ref=-64), pk(0.2, -71, ref=-60), pk(0.3, -72, ref=-66)], GRID)
        assert r.mrr == -64

    def test_lower_median_against_sort(self):
        rng = random.Random(7)
        for _ in range(1000):
            xs = [rng.uniform(-100, -30) for _ in range(rng.randint(1, 12))]
            assert lower_median(xs) == sorted(xs)[(len(xs) - 1) // 2]

    @given(st.lists(st.tuples(st.floats(0, 4.999), st.floats(-110, -30)), min_size=1, max_size=20), st.randoms())
    def test_permutation_invariant(self, items, rnd):
        ps = [pk(t, r) for t, r in items]
        shuffled = ps[:]
        rnd.shuffle(shuffled)
        assert sample(ps, GRID) == sample(shuffled, GRID)
        (r,) = sample(ps, GRID)
        assert min(x for _, x in items) <= r.mr <= max(x for _, x in items)


class TestNormalize:
    def test_midpoint(self):
        assert normalize(reading(-70)).nrssi == pytest.approx(0.5)

    def test_reference_shift(self):
        assert normalize(reading(-70, -64)).nrssi == pytest.approx(35 / 60)

    def test_clamp_floor(self):
        assert normalize(reading(-120)).nrssi == 0.0

    def test_clamp_ceiling(self):
        assert normalize(reading(-10)).nrssi == 1.0

    def test_zero_shift_equals_no_reference(self):
        assert normalize(reading(-73.5, -59.0)) == normalize(reading(-73.5))

    def test_bounds_validated(self):
        with pytest.raises(ValueError):
            NormalizationConfig(rssi_min=-40, rssi_max=-100)
        with pytest.raises(ValueError):
            NormalizationConfig(mode="max")

    @given(st.floats(-200, 50), st.floats(-200, 50), st.none() | st.floats(-90, -30))
    def test_range_and_monotone(self, x, y, ref):
        lo, hi = sorted((x, y))
        a, b = normalize(reading(lo, ref)), normalize(reading(hi, ref))
        assert 0.0 <= a.nrssi <= b.nrssi <= 1.0


class TestStreamingSampler:
    def _packets(self, seed=3, n=400):
        rng = random.Random(seed)
        return sorted((pk(rng.uniform(0, 60), rng.uniform(-90, -50), rng.choice("abc"), rng.choice(["s1", "s2"]))
                       for _ in range(n)), key=lambda p: p.time)

    def test_matches_batch_on_ordered_input(self):
        ps = self._packets()
        s = StreamingSampler(GRID)
        out = []
        for p in ps:
            out.extend(s.push(p))
        out.extend(s.flush())
        assert sorted(out, key=lambda r: (r.slot, r.scanner, r.device)) == sample(ps, GRID)
        assert s.late == 0

    def test_bounded_disorder_tolerated(self):
        ps = self._packets()
        rng = random.Random(1)
        jittered = sorted(ps, key=lambda p: p.time + rng.uniform(0, 9.0))  # within 2 slots
        s = StreamingSampler(GRID)
        out = []
        for p in jittered:
            out.extend(s.push(p))
        out.extend(s.flush())
        assert s.late == 0
        assert sorted(out, key=lambda r: (r.slot, r.scanner, r.device)) == sample(ps, GRID)

    def test_late_packets_dropped_and_counted(self):
        s = StreamingSampler(GRID, lateness=0.0)
        s.push(pk(1.0, -60))
        sealed = s.push(pk(20.0, -60))
        assert [r.slot for r in sealed] == [0]
        assert s.push(pk(2.0, -61)) == []
        assert s.late == 1

    def test_to_traces_in_range(self):
        for t in to_traces(self._packets(), GRID):
            assert 0.0 <= t.nrssi <= 1.0

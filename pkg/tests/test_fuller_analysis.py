"""Switch-set order estimation, chatter statistics, slow-decay machinery."""

import math
import random

import numpy as np
import pytest

from fullerkit import (
    BracketCache,
    ExtremalSystem,
    OrderReport,
    SwitchSet,
    auto_epsilon,
    builtin,
    chatter_ratio,
    check_accumulation_conditions,
    divergence_check,
    fuller_order,
    geometric_times,
    nested_geometric_times,
    recursion_simulate,
    simulate_chattering,
    strip_isolated,
)


class TestStripIsolated:
    def test_all_isolated(self):
        isolated, residual = strip_isolated([0.0, 1.0, 2.0], 0.5)
        assert isolated == [0.0, 1.0, 2.0]
        assert residual == []

    def test_empty(self):
        assert strip_isolated([], 1.0) == ([], [])

    def test_geometric_tail(self):
        points = [1 - 2.0**-k for k in range(11)]
        eps = 2.0**-8
        isolated, residual = strip_isolated(points, eps)
        # nearest-neighbour distance of point k is its forward gap 2^-(k+1);
        # strictly greater than eps holds for k <= 6
        assert isolated == points[:7]
        assert residual == points[7:]

    def test_single_point_isolated(self):
        isolated, residual = strip_isolated([3.0], 10.0)
        assert isolated == [3.0] and residual == []


class TestFullerOrder:
    def test_evenly_spaced_order_zero(self):
        sset = SwitchSet.from_times([0.1 * k for k in range(20)], resolution=1e-3)
        assert fuller_order(sset, 0.05).estimated_order == 0
        assert fuller_order(sset, 0.5).estimated_order == 0

    def test_single_accumulation_order_one(self):
        base = [0.0, 1.0, 2.0, 3.0]
        cluster = geometric_times(5.0, 0.05, 0.4, 12)
        sset = SwitchSet.from_times(base + cluster)
        # documented window: above the largest intra-cluster gap, below the
        # separation between the base points and the cluster
        report = fuller_order(sset, 0.1)
        assert report.estimated_order == 1
        assert len(report.accumulation_points) == 1
        # supremum convention: the representative is the deepest cluster point
        assert report.accumulation_points[0] == max(cluster)

    def test_centroid_mode(self):
        base = [0.0, 1.0, 2.0, 3.0]
        cluster = geometric_times(5.0, 0.05, 0.4, 12)
        sset = SwitchSet.from_times(base + cluster)
        report = fuller_order(sset, 0.1, mode="centroid")
        assert report.estimated_order == 1
        assert min(cluster) < report.accumulation_points[0] < max(cluster)

    def test_two_level_order_two(self):
        times = nested_geometric_times()
        sset = SwitchSet.from_times(times)
        for eps in (2e-5, 1e-4, 4e-4):
            report = fuller_order(sset, eps)
            assert report.estimated_order == 2, eps

    def test_partition(self):
        times = nested_geometric_times()
        sset = SwitchSet.from_times(times)
        report = fuller_order(sset, 1e-4)
        merged = sorted(t for layer in report.layers for t in layer)
        assert merged == sorted(times)

    def test_layer_separation(self):
        # points stripped at round 0 are pairwise separated by more than eps
        times = nested_geometric_times()
        sset = SwitchSet.from_times(times)
        eps = 1e-4
        report = fuller_order(sset, eps)
        layer0 = report.layers[0]
        assert all(b - a > eps for a, b in zip(layer0, layer0[1:]))

    def test_eps_below_resolution_rejected(self):
        sset = SwitchSet.from_times([0.0, 1.0], resolution=0.1)
        with pytest.raises(ValueError):
            fuller_order(sset, 0.05)

    def test_chattering_run_order_one(self):
        result = simulate_chattering(1e-3)
        sset = SwitchSet.from_sim_payload({"result": result.to_payload()})
        eps = auto_epsilon(sset.gaps)
        report = fuller_order(sset, max(eps, 2 * sset.resolution))
        assert report.estimated_order >= 1
        # accumulation sits at t = 0 by the fixture's convention
        assert abs(report.accumulation_points[-1]) < 1e-6


class TestOrderProperties:
    @staticmethod
    def _random_set(rng: random.Random):
        kind = rng.choice(["uniform", "two_cluster", "geometric", "mixture"])
        if kind == "uniform":
            times = sorted(rng.uniform(0, 10) for _ in range(rng.randint(8, 40)))
        elif kind == "two_cluster":
            times = sorted(
                [rng.uniform(0, 1) for _ in range(rng.randint(4, 12))]
                + [rng.uniform(5, 5.02) for _ in range(rng.randint(4, 12))]
            )
        elif kind == "geometric":
            ratio = rng.uniform(0.2, 0.7)
            times = geometric_times(
                rng.uniform(2, 8), rng.uniform(0.1, 1.0), ratio, rng.randint(8, 16)
            )
        else:
            times = sorted(
                [rng.uniform(0, 3) for _ in range(10)]
                + geometric_times(5.0, 0.1, rng.uniform(0.3, 0.6), 10)
            )
        # dedupe with a strictly increasing pass
        out = [times[0]]
        for t in times[1:]:
            if t > out[-1]:
                out.append(t)
        return out

    def test_idempotence_on_random_sets(self):
        rng = random.Random(2024)
        for trial in range(100):
            times = self._random_set(rng)
            if len(times) < 3:
                continue
            sset = SwitchSet.from_times(times)
            eps = max(2 * sset.resolution, auto_epsilon(sset.gaps))
            report = fuller_order(sset, eps)
            layer0 = set(report.layers[0]) if report.layers else set()
            rest = [t for t in times if t not in layer0]
            if len(rest) < 2:
                continue
            again = fuller_order(SwitchSet.from_times(rest, resolution=sset.resolution), eps)
            expected = [tuple(l) for l in report.layers[1:] if l]
            got = [tuple(l) for l in again.layers if l]
            assert got == expected, (trial, times)

    def test_eps_monotonicity_on_random_sets(self):
        rng = random.Random(4096)
        for trial in range(100):
            times = self._random_set(rng)
            if len(times) < 3:
                continue
            sset = SwitchSet.from_times(times)
            gaps = sset.gaps
            lo = max(min(gaps), 2 * sset.resolution)
            hi = max(gaps) * 1.5
            ladder = np.geomspace(lo, hi, 8)
            orders = [fuller_order(sset, float(e)).estimated_order for e in ladder]
            assert all(
                b <= a for a, b in zip(orders, orders[1:])
            ), (trial, times, orders)


class TestAutoEpsilon:
    def test_bimodal(self):
        gaps = [0.001, 0.0012, 0.0009, 1.0, 1.1, 0.9]
        eps = auto_epsilon(gaps)
        assert 0.001 < eps < 0.9

    def test_uniform_ramp(self):
        gaps = [0.5**k for k in range(10)]
        eps = auto_epsilon(gaps)
        assert min(gaps) < eps < max(gaps)

    def test_equal_gaps(self):
        assert auto_epsilon([0.25, 0.25, 0.25]) == 0.25


class TestChatterRatio:
    def test_exact_geometric(self):
        times = [1 - 2.0**-k for k in range(12)]
        stats = chatter_ratio(times)
        assert abs(stats.ratio - 0.5) <= 1e-9
        assert stats.log_ratio_std <= 1e-12

    def test_evenly_spaced(self):
        stats = chatter_ratio([float(k) for k in range(10)])
        assert abs(stats.ratio - 1.0) <= 1e-12

    def test_too_few_intervals(self):
        with pytest.raises(ValueError):
            chatter_ratio([0.0, 1.0, 1.5, 1.75, 1.9])  # four intervals

    def test_chattering_run(self):
        result = simulate_chattering(1e-3)
        stats = chatter_ratio(result.switch_times[-11:])
        assert 0.0 < stats.ratio < 1.0
        assert stats.log_ratio_std < 0.02


class TestRecursion:
    def test_constant_when_c_zero(self):
        seq = recursion_simulate(0.3, 0.0, 50)
        assert np.all(seq == 0.3)

    def test_slow_decay(self):
        seq = recursion_simulate(0.1, 1.0, 10**5)
        assert seq[-1] < 2e-5
        # asymptotically t_i ~ 1 / (c i)
        assert abs(seq[-1] * 10**5 - 1.0) < 0.2

    def test_monotone_positive(self):
        seq = recursion_simulate(0.1, 1.0, 1000)
        assert np.all(seq > 0)
        assert np.all(np.diff(seq) < 0)

    def test_domain_checks(self):
        with pytest.raises(ValueError):
            recursion_simulate(2.0, 1.0, 10)
        with pytest.raises(ValueError):
            recursion_simulate(-0.1, 0.0, 10)


class TestDivergence:
    def test_geometric_not_reached(self):
        seq = [2.0**-i for i in range(1, 60)]
        assert divergence_check(seq, 2.0) is None

    def test_constant_reaches_at_five(self):
        assert divergence_check([1.0] * 10, 5.0) == 5

    def test_slow_decay_reaches(self):
        seq = recursion_simulate(0.1, 1.0, 10**5)
        idx = divergence_check(seq, 3.0)
        assert idx is not None and idx <= 10**5

    def test_logarithmic_growth_fit(self):
        seq = recursion_simulate(0.1, 1.0, 10**5)
        partial = np.cumsum(seq)
        ns = np.unique(np.geomspace(10**3, 10**5, 40).astype(int))
        x = np.log(ns)
        y = partial[ns - 1]
        slope, intercept = np.polyfit(x, y, 1)
        fitted = slope * x + intercept
        ss_res = float(np.sum((y - fitted) ** 2))
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        assert slope > 0
        assert 1 - ss_res / ss_tot > 0.99


class TestAccumulationConditions:
    def test_bang_bang_vacuous(self):
        bundle = builtin("double_integrator")
        from fullerkit import run_bundle

        result = run_bundle(bundle)
        cache = BracketCache(bundle.scenario.f0, bundle.scenario.f1)
        report = OrderReport((), 0, (), 1e-3, (), "supremum")
        assert check_accumulation_conditions(result, report, cache) == []

    def test_chattering_conditions_hold(self):
        bundle = builtin("fuller")
        result = simulate_chattering(1e-3)
        cache = BracketCache(bundle.scenario.f0, bundle.scenario.f1)
        sset = SwitchSet.from_sim_payload({"result": result.to_payload()})
        eps = max(auto_epsilon(sset.gaps), 2 * sset.resolution)
        report = fuller_order(sset, eps)
        violations = check_accumulation_conditions(result, report, cache, tol=1e-4)
        assert violations == []

    def test_corrupted_report_flagged(self):
        bundle = builtin("fuller")
        result = simulate_chattering(1e-3)
        cache = BracketCache(bundle.scenario.f0, bundle.scenario.f1)
        # point the report at the middle of the first arc, far from the
        # accumulation: h1 is at full scale there
        t_mid = 0.5 * (result.arcs[0].t_start + result.arcs[0].t_end)
        report = OrderReport(((),), 1, (t_mid,), 1e-3, (), "supremum")
        violations = check_accumulation_conditions(result, report, cache, tol=1e-4)
        assert any(v["check"] == "h1" for v in violations)

# Copyright ©2022-2023. The Regents of the University of California
# (Regents). All Rights Reserved.

# Redistribution and use in source and binary forms, with or without
# modification, are permitted provided that the following conditions
# are met: 

# 1. Redistributions of source code must retain the above copyright
# notice, this list of conditions and the following disclaimer. 

# 2. Redistributions in binary form must reproduce the above copyright
# notice, this list of conditions and the following disclaimer in the 
# documentation and/or other materials provided with the
# distribution. 

# THIS SOFTWARE IS PROVIDED BY THE COPYRIGHT HOLDERS AND CONTRIBUTORS
# "AS IS" AND ANY EXPRESS OR IMPLIED WARRANTIES, INCLUDING, BUT NOT
# LIMITED TO, THE IMPLIED WARRANTIES OF MERCHANTABILITY AND FITNESS FOR
# A PARTICULAR PURPOSE ARE DISCLAIMED. IN NO EVENT SHALL THE COPYRIGHT
# HOLDER OR CONTRIBUTORS BE LIABLE FOR ANY DIRECT, INDIRECT, INCIDENTAL,
# SPECIAL, EXEMPLARY, OR CONSEQUENTIAL DAMAGES (INCLUDING, BUT NOT
# LIMITED TO, PROCUREMENT OF SUBSTITUTE GOODS OR SERVICES; LOSS OF USE,
# DATA, OR PROFITS; OR BUSINESS INTERRUPTION) HOWEVER CAUSED AND ON ANY
# THEORY OF LIABILITY, WHETHER IN CONTRACT, STRICT LIABILITY, OR TORT
# (INCLUDING NEGLIGENCE OR OTHERWISE) ARISING IN ANY WAY OUT OF THE USE
# OF THIS SOFTWARE, EVEN IF ADVISED OF THE POSSIBILITY OF SUCH DAMAGE.

import math
from typing import List, Tuple

import numpy as np
import pytest

from rotsets.invsets import GridRegion
from rotsets.mapzoo import (drift, fibred_rotation, open_annulus_double_reeb, plane_linear, rigid_rotation,
                            sine_exp_profile, twice_reeb_plane, twist)
from rotsets.rotset import (AnnulusWindows, EndWindow, ExtendedInterval, RadiiSchedule, RotationSetEstimate,
                            SampleAccumulator, SamplingPlan, affine_law_check, classify_annulus, merge_intervals,
                            reflect_check, rho_K, rho_VW, rho_ann, rho_local, rho_local_naive, rho_measured,
                            sweep)


def estimate_of(parts: List[Tuple[float, float]]) -> RotationSetEstimate:
    return RotationSetEstimate([ExtendedInterval(lo, hi) for lo, hi in parts], len(parts), (1, 1))


@pytest.fixture
def band() -> GridRegion:
    return GridRegion.band(-1.0, 1.0, 8, 8)


@pytest.fixture
def plan() -> SamplingPlan:
    return SamplingPlan(density_x=4, density_y=401)


class TestIntervals:

    @pytest.mark.unit_test
    @pytest.mark.parametrize("lo, hi", [(1.0, 0.0), (math.inf, math.inf), (-math.inf, -math.inf), (math.nan, 0.0)])
    def test_invalid_interval(self, lo: float, hi: float) -> None:
        with pytest.raises(ValueError):
            ExtendedInterval(lo, hi)

    @pytest.mark.unit_test
    def test_affine_with_negative_q(self) -> None:
        assert ExtendedInterval(0.2, 0.5).affine(-1, 0) == ExtendedInterval(-0.5, -0.2)

    @pytest.mark.unit_test
    def test_merge(self) -> None:
        merged = merge_intervals([ExtendedInterval(0.5, 0.6), ExtendedInterval(0.0, 0.1),
                                  ExtendedInterval(0.105, 0.2)], 0.01)
        assert merged == [ExtendedInterval(0.0, 0.2), ExtendedInterval(0.5, 0.6)]

    @pytest.mark.unit_test
    def test_infinite_endpoints_serialise_as_strings(self) -> None:
        assert ExtendedInterval(-math.inf, 1.0).to_list() == ['-inf', 1.0]


class TestSampleAccumulator:

    @pytest.mark.unit_test
    def test_cap_and_non_finite(self) -> None:
        acc = SampleAccumulator(0.01, cap=1e3)
        acc.add(np.array([0.0, 0.005, 0.5, 2000.0, -np.inf, np.nan]))
        assert acc.sample_count == 3
        assert acc.infinite_flags == {'-inf': False, '+inf': True}
        assert acc.intervals() == [ExtendedInterval(0.0, 0.005), ExtendedInterval(0.5, 0.5)]

    @pytest.mark.unit_test
    def test_merge_is_order_independent(self) -> None:
        values = np.random.default_rng(3).uniform(-1.0, 1.0, 500)
        whole = SampleAccumulator(0.05)
        whole.add(values)
        first, second = SampleAccumulator(0.05), SampleAccumulator(0.05)
        first.add(values[250:])
        second.add(values[:250])
        merged = second.merge(first)
        assert merged.intervals() == whole.intervals()
        assert merged.sample_count == whole.sample_count == 500

    @pytest.mark.unit_test
    def test_merge_needs_same_epsilon(self) -> None:
        with pytest.raises(ValueError):
            SampleAccumulator(0.01).merge(SampleAccumulator(0.02))

    @pytest.mark.unit_test
    def test_epsilon_positive(self) -> None:
        with pytest.raises(ValueError):
            SampleAccumulator(0.0)


class TestRotationSetEstimate:

    @pytest.mark.unit_test
    def test_hausdorff(self) -> None:
        assert RotationSetEstimate.point(0.3).hausdorff(RotationSetEstimate.point(0.5)) == pytest.approx(0.2)
        assert estimate_of([(0.0, 1.0)]).hausdorff(estimate_of([(0.0, 0.4), (0.6, 1.0)])) == pytest.approx(0.1)
        assert estimate_of([]).hausdorff(estimate_of([(0.0, 1.0)])) == math.inf

    @pytest.mark.unit_test
    def test_gaps_and_interval(self) -> None:
        estimate = estimate_of([(0.0, 0.4), (0.6, 1.0)])
        assert estimate.gap_measure() == pytest.approx(0.2)
        assert not estimate.is_interval()
        assert estimate.is_interval(gap_tolerance=0.25)

    @pytest.mark.unit_test
    def test_hull_opens_to_infinity(self) -> None:
        estimate = estimate_of([(0.0, 1.0)])
        estimate.infinite_flags['+inf'] = True
        assert estimate.hull() == ExtendedInterval(0.0, math.inf)
        assert estimate.affine(-1, 0).infinite_flags == {'-inf': True, '+inf': False}

    @pytest.mark.unit_test
    def test_empty(self) -> None:
        estimate = estimate_of([])
        assert estimate.is_empty
        assert estimate.hull() is None
        with pytest.raises(ValueError):
            estimate.affine(0, 1)

    @pytest.mark.unit_test
    def test_intersect_union(self) -> None:
        a, b = estimate_of([(0.0, 1.0)]), estimate_of([(0.5, 2.0)])
        assert a.intersect(b).intervals == [ExtendedInterval(0.5, 1.0)]
        assert a.union(b).intervals == [ExtendedInterval(0.0, 2.0)]
        assert estimate_of([(0.0, 0.1)]).intersect(b).status == 'empty intersection'

    @pytest.mark.unit_test
    def test_record_keeps_intervals(self) -> None:
        estimate = estimate_of([(-1.0, 0.0), (0.5, 1.0)])
        estimate.infinite_flags['-inf'] = True
        restored = RotationSetEstimate.from_dict(estimate.to_dict())
        assert restored.intervals == estimate.intervals
        assert restored.infinite_flags == estimate.infinite_flags

    @pytest.mark.unit_test
    @pytest.mark.parametrize("parts, expected", [
        ([(0.3, 0.3)], 'positive'),
        ([(-0.5, -0.2)], 'negative'),
        ([(-1.0, 1.0)], 'neither'),
    ])
    def test_classify(self, parts: List[Tuple[float, float]], expected: str) -> None:
        assert classify_annulus(estimate_of(parts)) == expected


class TestSamplingPlan:

    @pytest.mark.unit_test
    @pytest.mark.parametrize("kwargs", [{'mode': 'random'}, {'jitter': 2.0}, {'density_x': 0}])
    def test_invalid(self, kwargs: dict) -> None:
        with pytest.raises(ValueError):
            SamplingPlan(**kwargs)

    @pytest.mark.unit_test
    def test_grid_seeds(self) -> None:
        x, y = SamplingPlan(density_x=8, density_y=5).seeds(GridRegion.band(0.0, 1.0, 4, 4))
        assert x.size == 40
        assert y.min() == 0.0 and y.max() == 1.0

    @pytest.mark.unit_test
    def test_jitter_is_seeded(self) -> None:
        region = GridRegion.band(0.0, 1.0, 4, 4)
        a = SamplingPlan(density_x=8, density_y=8, jitter=0.5, seed=7).seeds(region)
        b = SamplingPlan(density_x=8, density_y=8, jitter=0.5, seed=7).seeds(region)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    @pytest.mark.unit_test
    def test_cells_mode(self) -> None:
        region = GridRegion.band(0.0, 1.0, 4, 4)
        occupancy = np.zeros((4, 4), dtype=bool)
        occupancy[1, 2] = True
        x, y = SamplingPlan(mode='cells').seeds(region.with_occupancy(occupancy))
        assert x.tolist() == [0.625]
        assert y.tolist() == [0.375]

    @pytest.mark.unit_test
    def test_from_config(self) -> None:
        assert SamplingPlan.from_config(None) == SamplingPlan()
        assert SamplingPlan.from_config({'density_x': 3, 'mode': 'cells'}).to_dict()['density_x'] == 3


class TestRhoK:

    @pytest.mark.unit_test
    def test_rigid_rotation_is_a_point(self, band: GridRegion, plan: SamplingPlan) -> None:
        estimate = rho_K(rigid_rotation(0.3), band, 1, 20, plan)
        hull = estimate.hull()
        assert hull is not None
        assert hull.lo == pytest.approx(0.3) and hull.hi == pytest.approx(0.3)
        assert estimate.tail is not None and estimate.tail.contains(0.3, 1e-9)

    @pytest.mark.unit_test
    def test_twist_fills_the_band(self, band: GridRegion, plan: SamplingPlan) -> None:
        estimate = rho_K(twist(1.0), band, 1, 10, plan)
        assert estimate.is_interval()
        assert estimate.hausdorff(estimate_of([(-1.0, 1.0)])) <= 0.01
        assert list(estimate.convergence.columns)[:3] == ['level', 'horizon', 'sample_count']

    @pytest.mark.unit_test
    def test_no_returning_orbits(self) -> None:
        estimate = rho_K(drift(2.0), GridRegion.band(0.0, 1.0, 4, 4), 1, 5, SamplingPlan(8, 8))
        assert estimate.is_empty
        assert estimate.status == 'no returning orbits'

    @pytest.mark.unit_test
    def test_m_above_n(self, band: GridRegion) -> None:
        with pytest.raises(ValueError):
            rho_K(rigid_rotation(0.0), band, 5, 2)

    @pytest.mark.unit_test
    def test_threads_do_not_change_the_result(self, band: GridRegion) -> None:
        plan = SamplingPlan(density_x=80, density_y=80)
        one = rho_K(twist(1.0), band, 1, 8, plan, threads=1)
        two = rho_K(twist(1.0), band, 1, 8, plan, threads=2)
        assert one.intervals == two.intervals
        assert one.sample_count == two.sample_count

    @pytest.mark.unit_test
    def test_sweep_stay_condition(self) -> None:
        x0, y0 = np.zeros(3), np.array([0.0, 0.5, 0.9])
        result = sweep(drift(0.2), x0, y0, 1, 3, land=lambda x, y: np.ones_like(x, dtype=bool),
                       stay=lambda x, y: y <= 1.0)
        # 0.0 stays 3 steps, 0.5 two steps, 0.9 none
        assert result.main.sample_count == 5
        assert result.seeds == 3


class TestLocalRotation:

    @pytest.mark.unit_test
    @pytest.mark.parametrize("kwargs", [{'shrink': 1.5}, {'depth': 1}, {'inner_depth': 0}])
    def test_invalid_schedule(self, kwargs: dict) -> None:
        with pytest.raises(ValueError):
            RadiiSchedule(0.0, **kwargs)

    @pytest.mark.unit_test
    def test_schedule_windows(self) -> None:
        schedule = RadiiSchedule(0.0, shrink=0.5, depth=3)
        assert schedule.step == pytest.approx(math.log(2.0))
        assert [w.level for w in schedule.windows('N')] == pytest.approx([0.0, math.log(2), 2 * math.log(2)])
        assert [w.level for w in schedule.windows('S')] == pytest.approx([0.0, -math.log(2), -2 * math.log(2)])

    @pytest.mark.unit_test
    def test_end_windows(self) -> None:
        with pytest.raises(ValueError):
            EndWindow('E', 0.0)
        assert EndWindow('N', 1.0).is_inside(EndWindow('N', 0.0))
        assert EndWindow('S', -1.0).is_inside(EndWindow('S', 0.0))
        assert not EndWindow('N', 0.0).is_inside(EndWindow('N', 0.0))

    @pytest.mark.unit_test
    def test_rho_vw_needs_nested_windows(self) -> None:
        with pytest.raises(ValueError):
            rho_VW(twist(1.0), EndWindow('N', 1.0), EndWindow('N', 0.0), 1, 5)

    @pytest.mark.unit_test
    def test_linear_contraction(self) -> None:
        local = rho_local(plane_linear(0.5, 0.25), RadiiSchedule(0.0, depth=3, inner_depth=2), 1, 5,
                          plan=SamplingPlan(density_x=8, density_y=32))
        assert local.converged
        assert local.extrapolated.contains(0.25, 1e-9)
        assert len(local.levels) == 3
        assert local.table.shape[0] == 3

    @pytest.mark.unit_test
    @pytest.mark.parametrize("angle_turns", [0.0, 0.25])
    def test_plane_contractions(self, angle_turns: float) -> None:
        local = rho_local(plane_linear(0.5, angle_turns), RadiiSchedule(0.0, depth=3, inner_depth=2), 1, 5,
                          plan=SamplingPlan(density_x=8, density_y=32))
        hull = local.extrapolated.hull()
        assert hull.lo == pytest.approx(angle_turns, abs=1e-9)
        assert hull.hi == pytest.approx(angle_turns, abs=1e-9)

    @pytest.mark.unit_test
    def test_naive_variant_on_a_contraction(self) -> None:
        local = rho_local_naive(plane_linear(0.5, 0.25), RadiiSchedule(0.0, depth=3, inner_depth=2), 1, 5,
                                plan=SamplingPlan(density_x=8, density_y=32))
        assert len(local.levels) == 3
        assert local.extrapolated.contains(0.25, 1e-9)
        assert local.extrapolated.hull().hi == pytest.approx(0.25, abs=1e-9)
        assert local.levels[0].label.startswith('rho_V naive N')

    @pytest.mark.unit_test
    def test_sine_profile_fills_its_limit_band(self) -> None:
        schedule = RadiiSchedule(2.0, shrink=0.5, depth=3, inner_depth=2)
        local = rho_local(fibred_rotation(sine_exp_profile()), schedule, 1, 5,
                          plan=SamplingPlan(density_x=1, density_y=4096))
        hull = local.extrapolated.hull()
        bound = 1 / (2 * math.pi)
        assert hull.lo == pytest.approx(-bound, abs=0.05 * bound)
        assert hull.hi == pytest.approx(bound, abs=0.05 * bound)


class TestOtherEstimators:

    @pytest.mark.unit_test
    def test_rho_ann_rows(self) -> None:
        estimate = rho_ann(rigid_rotation(0.3), AnnulusWindows(0.0, 2.0, 2), 1, 5, SamplingPlan(4, 8), nx=4, ny=4)
        assert estimate.contains(0.3, 1e-9)
        assert estimate.convergence.shape[0] == 2

    @pytest.mark.unit_test
    def test_double_reeb_hull(self) -> None:
        estimate = rho_ann(open_annulus_double_reeb(), AnnulusWindows(0.0, 6.0, 2), 1, 50, SamplingPlan(4, 256),
                           nx=8, ny=16)
        hull = estimate.hull()
        assert hull.lo == pytest.approx(-1.0, abs=0.05)
        assert hull.hi == pytest.approx(1.0, abs=0.05)

    @pytest.mark.unit_test
    @pytest.mark.parametrize("k", [0, 1])
    def test_twice_reeb_bands_contain_zero(self, k: int) -> None:
        lifted = twice_reeb_plane()
        estimate = rho_K(lifted, GridRegion.band(float(k), k + 1.0, 8, 16), 1, 50, SamplingPlan(4, 128))
        assert estimate.contains(0.0, 0.01)
        hull = estimate.hull()
        assert -0.1 - 1e-9 <= hull.lo and hull.hi <= 0.1 + 1e-9

    @pytest.mark.unit_test
    def test_annulus_windows(self) -> None:
        assert AnnulusWindows(1.0, 2.0, 2).bands() == [(0.0, 2.0), (-1.0, 3.0)]
        with pytest.raises(ValueError):
            AnnulusWindows(0.0, 0.0)

    @pytest.mark.unit_test
    def test_rho_measured(self) -> None:
        region = GridRegion.band(0.0, 1.0, 4, 4)
        estimate = rho_measured(rigid_rotation(0.25), region, 5, 20, SamplingPlan(4, 4))
        assert estimate.contains(0.25, 1e-9)
        assert rho_measured(drift(2.0), region, 0, 5, SamplingPlan(4, 4)).status == 'no invariant mass detected'
        with pytest.raises(ValueError):
            rho_measured(rigid_rotation(0.25), region, -1, 5)


class TestLaws:

    @pytest.mark.unit_test
    def test_affine_law(self, band: GridRegion) -> None:
        report = affine_law_check(rigid_rotation(0.3), 1, 2, lambda f: rho_K(f, band, 1, 10, SamplingPlan(4, 4)))
        assert report.passed
        assert report.transformed.contains(1.6, 1e-9)
        assert report.to_dict()['passed'] is True
        with pytest.raises(ValueError):
            affine_law_check(rigid_rotation(0.3), 1, 0, lambda f: rho_K(f, band, 1, 10))

    @pytest.mark.unit_test
    def test_reflect(self, band: GridRegion, plan: SamplingPlan) -> None:
        report = reflect_check(twist(1.0), lambda f: rho_K(f, band, 1, 5, plan))
        assert report.passed

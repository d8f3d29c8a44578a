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

import numpy as np
import pandas as pd
import pytest

from rotsets.branches import (STABLE, UNSTABLE, BandSpec, HeteroclinicConfig, LambdaLimit,
                              branch_intersection_experiment, branch_of, branch_window, h2_check, lambda_limit,
                              lambda_n, lambda_sequence, revalidate_certificate, witness_orbit)
from rotsets.cover import CoverPoint, LiftedAnnulusMap
from rotsets.errors import BranchError, WindowOverflowError
from rotsets.invsets import GraphCurve, GridRegion
from rotsets.mapzoo import drift, identity, rigid_rotation, skew_heteroclinic

TOP = GraphCurve.horizontal(2.0)
MIDDLE = GraphCurve.horizontal(1.25)
BOTTOM = GraphCurve.horizontal(0.0)


@pytest.fixture(scope='module')
def skew() -> LiftedAnnulusMap:
    return skew_heteroclinic()


@pytest.fixture
def band0() -> BandSpec:
    return BandSpec(TOP, MIDDLE, 0)


class TestBandSpec:

    @pytest.mark.unit_test
    def test_curves_must_be_ordered(self) -> None:
        with pytest.raises(ValueError):
            BandSpec(MIDDLE, TOP)

    @pytest.mark.unit_test
    def test_contains_and_far_curve(self, band0: BandSpec) -> None:
        assert band0.contains(np.array([0.3, 0.3]), np.array([1.5, 2.5])).tolist() == [True, False]
        assert band0.far_curve(UNSTABLE) == MIDDLE
        assert band0.far_curve(STABLE) == TOP
        assert band0.to_dict() == {'upper': {'level': 2.0}, 'lower': {'level': 1.25}, 'index': 0}

    @pytest.mark.unit_test
    def test_branch_window(self) -> None:
        assert branch_window(2.7, 8) == (-2, 8)


class TestLambda:

    @pytest.mark.unit_test
    def test_invalid_arguments(self, skew: LiftedAnnulusMap, band0: BandSpec) -> None:
        with pytest.raises(ValueError):
            lambda_sequence(skew, band0, 3, sign='sideways')
        with pytest.raises(ValueError):
            lambda_sequence(skew, band0, -1)
        with pytest.raises(ValueError):
            lambda_limit(skew, band0, 0)

    @pytest.mark.unit_test
    @pytest.mark.parametrize("sign", [UNSTABLE, STABLE])
    def test_sequence_is_nested(self, skew: LiftedAnnulusMap, band0: BandSpec, sign: str) -> None:
        sequence = lambda_sequence(skew, band0, 5, sign, nx=32, ny=40)
        assert len(sequence) == 6
        for outer, inner in zip(sequence, sequence[1:]):
            assert inner.issubset(outer)

    @pytest.mark.unit_test
    def test_unstable_limit_sits_below_the_circle(self, skew: LiftedAnnulusMap, band0: BandSpec) -> None:
        limit = lambda_limit(skew, band0, 10, UNSTABLE, nx=40, ny=60)
        assert limit.escape.contains(0.5, 1.4)
        assert not limit.escape.contains(0.5, 1.9)
        assert limit.history.shape[0] == 11
        assert limit.to_dict()['sign'] == UNSTABLE

    @pytest.mark.unit_test
    @pytest.mark.parametrize("sign", [UNSTABLE, STABLE])
    def test_lambda_n_is_the_last_of_the_sequence(self, skew: LiftedAnnulusMap, band0: BandSpec, sign: str) -> None:
        last = lambda_sequence(skew, band0, 4, sign, nx=16, ny=24)[-1]
        depth = lambda_n(skew, band0, 4, sign, nx=16, ny=24)
        assert np.array_equal(depth.occupancy, last.occupancy)
        unrolled = lambda_n(skew, band0, 4, sign, nx=16, ny=24, window=(-1, 2))
        assert unrolled.x_lo == -1.0
        assert unrolled.width == 2.0
        assert unrolled.count == 2 * last.count


class TestBranchOf:

    @pytest.mark.unit_test
    def test_escaped_base_point(self, skew: LiftedAnnulusMap, band0: BandSpec) -> None:
        limit = lambda_limit(skew, band0, 10, UNSTABLE, nx=40, ny=60)
        with pytest.raises(BranchError):
            branch_of(skew, band0, CoverPoint(0.5, 1.95), limit)

    @pytest.mark.unit_test
    def test_untilted_branch_spans_the_window(self, skew: LiftedAnnulusMap, band0: BandSpec) -> None:
        limit = lambda_limit(skew, band0, 10, UNSTABLE, nx=40, ny=60)
        branch = branch_of(skew, band0, CoverPoint(0.5, 1.4), limit, window_units=2)
        assert not branch.compact
        assert branch.meets_far_curve
        assert branch.region.width == 8.0
        assert branch.widenings == 2
        assert branch.to_dict()['compact'] is False
        with pytest.raises(WindowOverflowError):
            branch_of(skew, band0, CoverPoint(0.5, 1.4), limit, window_units=4, strict=True, max_window_units=4)

    @pytest.mark.unit_test
    def test_straddling_branch_widens_once(self, band0: BandSpec) -> None:
        occupancy = np.zeros((4, 4), dtype=bool)
        occupancy[1, [0, 3]] = True
        region = GridRegion(0.0, 1.0, 1.25, 2.0, occupancy)
        limit = LambdaLimit(UNSTABLE, 1, region, region, None, pd.DataFrame())
        branch = branch_of(rigid_rotation(0.0), band0, CoverPoint(0.1, 1.5), limit, window_units=1)
        assert branch.compact
        assert branch.widenings == 1
        assert branch.region.width == 2.0
        assert branch.region.count == 2
        assert branch.diameter == pytest.approx(0.5)

    @pytest.mark.unit_test
    def test_widening_stops_at_the_cap(self, band0: BandSpec) -> None:
        occupancy = np.zeros((4, 4), dtype=bool)
        occupancy[1] = True
        region = GridRegion(0.0, 1.0, 1.25, 2.0, occupancy)
        limit = LambdaLimit(UNSTABLE, 1, region, region, None, pd.DataFrame())
        branch = branch_of(rigid_rotation(0.0), band0, CoverPoint(0.1, 1.5), limit, window_units=1,
                           max_window_units=3)
        assert not branch.compact
        assert (branch.widenings, branch.region.width) == (2, 3.0)
        with pytest.raises(WindowOverflowError):
            branch_of(rigid_rotation(0.0), band0, CoverPoint(0.1, 1.5), limit, window_units=1, strict=True)


class TestH2:

    @pytest.mark.unit_test
    def test_curve_falling_past_gamma2(self) -> None:
        report = h2_check(drift(-1.0), TOP, BOTTOM, 5, samples=64)
        assert not report.holds
        assert report.fails_at == 1
        assert report.limiting_level == pytest.approx(-3.0)
        assert report.table.shape[0] == 5

    @pytest.mark.unit_test
    def test_coincident_curves_meet(self) -> None:
        report = h2_check(identity(), GraphCurve.horizontal(1.0), GraphCurve.horizontal(1.0), 3, samples=16)
        assert report.holds and report.fails_at is None
        assert report.to_dict()['holds'] is True


class TestHeteroclinicConfig:

    @pytest.mark.unit_test
    def test_record_omits_threads(self) -> None:
        record = HeteroclinicConfig(threads=4).to_dict()
        assert 'threads' not in record
        assert record['plan']['mode'] == 'cells'

    @pytest.mark.unit_test
    def test_from_config(self) -> None:
        assert HeteroclinicConfig.from_config(None) == HeteroclinicConfig()
        config = HeteroclinicConfig.from_config({'nx': 10, 'plan': {'mode': 'grid'}, 'unknown': 1})
        assert config.nx == 10
        assert config.plan.mode == 'grid'


class TestWitness:

    @pytest.mark.unit_test
    def test_one_sided_drift_is_no_witness(self) -> None:
        witness = witness_orbit(rigid_rotation(-0.5), (0.0, 1.0), 2, 50, BandSpec(TOP, BOTTOM))
        assert witness.n_plus == 3
        assert witness.n_minus is None
        assert not witness.drifts_left
        assert not witness.passes(1.0)

    @pytest.mark.unit_test
    def test_heteroclinic_orbit_drifts_left_both_ways(self, skew: LiftedAnnulusMap) -> None:
        witness = witness_orbit(skew, (0.0, 1.0), 2, 200, BandSpec(TOP, BOTTOM))
        assert witness.drifts_left
        assert witness.contained
        assert witness.value is not None
        assert abs(witness.value) < 0.3 / (witness.n_plus + witness.n_minus)
        assert [s['k'] for s in witness.samples] == [1, 2]

    @pytest.mark.unit_test
    def test_revalidate(self, skew: LiftedAnnulusMap) -> None:
        witness = witness_orbit(skew, (0.0, 1.0), 2, 200, BandSpec(TOP, BOTTOM))
        record = {'status': 'certified', 'config': {'tolerance': 0.1, 'witness_horizon': 200},
                  'gammas': {'gamma0': TOP.to_dict(), 'gamma2': BOTTOM.to_dict()}, 'witness': witness.to_dict()}
        assert revalidate_certificate(skew, record)['valid']
        record['witness']['n_plus'] += 1
        report = revalidate_certificate(skew, record)
        assert not report['valid']
        assert report['mismatches'][0].startswith('n_plus')

    @pytest.mark.unit_test
    def test_revalidate_needs_a_certified_record(self, skew: LiftedAnnulusMap) -> None:
        assert not revalidate_certificate(skew, {'status': 'inconclusive'})['valid']


class TestExperiment:

    @pytest.mark.unit_test
    def test_refuses_without_free_curves(self) -> None:
        cert = branch_intersection_experiment(identity(), TOP, MIDDLE, BOTTOM, HeteroclinicConfig(nx=8, ny=8))
        assert cert.status == 'refused'
        assert cert.reason.startswith('(H1)')
        assert cert.to_dict()['h1'] == {'gamma0': 'not-free', 'gamma1': 'not-free', 'gamma2': 'not-free'}

    @pytest.mark.unit_test
    def test_refuses_without_rotation_gap(self) -> None:
        config = HeteroclinicConfig(nx=16, ny=16, theta_horizon=5, lambda_horizon=3, N=10)
        cert = branch_intersection_experiment(drift(-0.5), TOP, MIDDLE, BOTTOM, config)
        assert cert.status == 'refused'
        assert cert.reason.startswith('(H3)')
        assert cert.h2 is not None

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
from typing import Tuple, Type

import numpy as np
import pytest

from rotsets.cover import (TOL_LIFT, AnnulusPoint, CoverPoint, LiftedAnnulusMap, PlaneChart, Window, displacement,
                           rho_n, rho_n_cocycle_error, validate_lift)
from rotsets.errors import MapEvaluationError, OrbitEscapeError
from rotsets.mapzoo import drift, identity, rigid_rotation, twist


def doubling() -> LiftedAnnulusMap:
    # not a lift of an annulus map: fails T-equivariance
    return LiftedAnnulusMap('doubling', lambda x, y: (2 * x, y.copy()), lambda x, y: (x / 2, y.copy()), 10.0)


def blows_up() -> LiftedAnnulusMap:
    return LiftedAnnulusMap('blows_up', lambda x, y: (x / (y - 0.5), y.copy()), lambda x, y: (x, y.copy()), 1.0)


class TestPoints:

    @pytest.mark.unit_test
    @pytest.mark.parametrize("theta, expected", [(1.25, 0.25), (-0.25, 0.75), (0.0, 0.0), (3.0, 0.0)])
    def test_annulus_point_reduces_theta(self, theta: float, expected: float) -> None:
        assert AnnulusPoint(theta, 1.0).theta == pytest.approx(expected)

    @pytest.mark.unit_test
    def test_tiny_negative_theta_stays_below_one(self) -> None:
        assert 0.0 <= AnnulusPoint(-1e-20, 0.0).theta < 1.0

    @pytest.mark.unit_test
    def test_lift_project_translate(self) -> None:
        point = AnnulusPoint(0.3, 2.0)
        assert point.lift(2) == CoverPoint(2.3, 2.0)
        assert CoverPoint(2.3, 2.0).project().theta == pytest.approx(0.3)
        assert CoverPoint(0.5, 1.0).translate(-3) == CoverPoint(-2.5, 1.0)

    @pytest.mark.unit_test
    @pytest.mark.parametrize("bounds", [(1.0, 0.0, 0.0, 1.0), (0.0, 0.0, 0.0, 1.0), (0.0, 1.0, 1.0, 0.0)])
    def test_empty_window_raises(self, bounds: Tuple[float, float, float, float]) -> None:
        with pytest.raises(ValueError):
            Window(*bounds)

    @pytest.mark.unit_test
    def test_window_grid_includes_corners(self) -> None:
        x, y = Window.band(-1.0, 1.0).grid(3)
        assert x.size == 9
        assert set(zip(x.tolist(), y.tolist())) >= {(0.0, -1.0), (1.0, 1.0)}


class TestLiftedAnnulusMap:

    @pytest.mark.unit_test
    def test_negative_horizontal_bound_raises(self) -> None:
        with pytest.raises(ValueError):
            LiftedAnnulusMap('bad', lambda x, y: (x, y), lambda x, y: (x, y), -1.0)

    @pytest.mark.unit_test
    def test_apply_uses_the_inverse_for_negative_n(self) -> None:
        f = rigid_rotation(0.25)
        x, y = f.apply(0.0, 1.0, -4)
        assert float(x) == pytest.approx(-1.0)
        assert float(y) == 1.0

    @pytest.mark.unit_test
    def test_inverted_swaps_directions(self) -> None:
        g = twist(1.0).inverted()
        x, _ = g(0.0, 0.5)
        assert float(x) == pytest.approx(-0.5)
        assert g.name == 'twist^-1'

    @pytest.mark.unit_test
    def test_metadata_carries_params(self) -> None:
        meta = rigid_rotation(0.3).metadata()
        assert meta['name'] == 'rigid_rotation'
        assert meta['params'] == {'angle': 0.3}
        assert meta['horizontal_bound'] == pytest.approx(0.3)


class TestValidateLift:

    @pytest.mark.unit_test
    @pytest.mark.parametrize("lifted_map", [identity(), rigid_rotation(0.3), twist(1.0)])
    def test_lifts_pass(self, lifted_map: LiftedAnnulusMap) -> None:
        report = validate_lift(lifted_map, Window.band(-1.0, 1.0), 16)
        assert report.passed
        assert report.sample_count == 256
        assert report.to_dict()['passed'] is True

    @pytest.mark.unit_test
    def test_non_equivariant_map_fails(self) -> None:
        report = validate_lift(doubling(), Window.band(0.0, 1.0), 8)
        assert not report.passed
        assert report.max_equivariance_error == pytest.approx(1.0)

    @pytest.mark.unit_test
    def test_understated_bound_fails(self) -> None:
        lifted = LiftedAnnulusMap('fast', lambda x, y: (x + 0.5, y.copy()), lambda x, y: (x - 0.5, y.copy()), 0.1)
        report = validate_lift(lifted, Window.band(0.0, 1.0), 4)
        assert report.max_equivariance_error <= TOL_LIFT
        assert not report.passed

    @pytest.mark.unit_test
    def test_non_finite_output_raises(self) -> None:
        with pytest.raises(MapEvaluationError):
            validate_lift(blows_up(), Window.band(0.0, 1.0), 3)

    @pytest.mark.unit_test
    def test_samples_must_be_positive(self) -> None:
        with pytest.raises(ValueError):
            validate_lift(identity(), Window.band(0.0, 1.0), 0)


class TestDisplacement:

    @pytest.mark.unit_test
    @pytest.mark.parametrize("lifted_map, point, n, expected", [
        (identity(), AnnulusPoint(0.3, 0.0), 5, 0.0),
        (rigid_rotation(0.3), AnnulusPoint(0.9, 4.0), 10, 0.3),
        (twist(1.0), AnnulusPoint(0.0, 0.5), 7, 0.5),
        (twist(2.0), AnnulusPoint(0.1, -0.25), 3, -0.5),
    ])
    def test_rho_n(self, lifted_map: LiftedAnnulusMap, point: AnnulusPoint, n: int, expected: float) -> None:
        assert rho_n(lifted_map, point, n) == pytest.approx(expected, abs=1e-12)

    @pytest.mark.unit_test
    def test_rho_n_needs_positive_n(self) -> None:
        with pytest.raises(ValueError):
            rho_n(identity(), AnnulusPoint(0.0, 0.0), 0)

    @pytest.mark.unit_test
    def test_escape_is_reported(self) -> None:
        segment = displacement(drift(1e9), CoverPoint(0.0, 0.0), 5)
        assert segment.escaped
        assert segment.steps_completed == 1
        with pytest.raises(OrbitEscapeError):
            rho_n(drift(1e9), AnnulusPoint(0.0, 0.0), 5)

    @pytest.mark.unit_test
    def test_horizon_cap(self) -> None:
        with pytest.raises(ValueError):
            displacement(identity(), CoverPoint(0.0, 0.0), 11, max_horizon=10)

    @pytest.mark.unit_test
    def test_backward_displacement(self) -> None:
        segment = displacement(rigid_rotation(0.25), CoverPoint(0.0, 0.0), -4)
        assert segment.displacement == pytest.approx(-1.0)
        assert segment.x_trace.size == 5
        assert segment.contained_in(0.0, 0.0)

    @pytest.mark.unit_test
    @pytest.mark.parametrize("lifted_map", [twist(1.0), rigid_rotation(0.3)])
    def test_cocycle(self, lifted_map: LiftedAnnulusMap) -> None:
        rng = np.random.default_rng(0)
        for x, y in rng.uniform(-1.0, 1.0, size=(20, 2)):
            assert rho_n_cocycle_error(lifted_map, CoverPoint(float(x), float(y)), 7, 5) <= 100 * TOL_LIFT


class TestPlaneChart:

    @pytest.mark.unit_test
    @pytest.mark.parametrize("log_base", [1.0, 0.5])
    def test_invalid_base(self, log_base: float) -> None:
        with pytest.raises(ValueError):
            PlaneChart(log_base)

    @pytest.mark.unit_test
    @pytest.mark.parametrize("log_base", [math.e, 3.0])
    def test_chart_round_trip(self, log_base: float) -> None:
        chart = PlaneChart(log_base)
        px, py = chart.to_plane(0.25, 1.0)
        theta, y = chart.to_annulus(px, py)
        assert float(theta) == pytest.approx(0.25)
        assert float(y) == pytest.approx(1.0)
        assert chart.level_to_radius(chart.radius_to_level(0.2)) == pytest.approx(0.2)

    @pytest.mark.unit_test
    def test_origin_has_no_coordinates(self) -> None:
        with pytest.raises(MapEvaluationError):
            PlaneChart().to_annulus(0.0, 0.0)

    @pytest.mark.unit_test
    def test_small_radius_is_the_n_end(self) -> None:
        chart = PlaneChart()
        assert chart.radius_to_level(1e-3) > chart.radius_to_level(1.0) == 0.0

    @pytest.mark.unit_test
    def test_lift_linear(self) -> None:
        lifted = PlaneChart().lift_linear(0.5, 0.25)
        x, y = lifted(0.0, 0.0)
        assert float(x) == pytest.approx(0.25)
        assert float(y) == pytest.approx(math.log(2.0))
        with pytest.raises(ValueError):
            PlaneChart().lift_linear(0.0, 0.25)

    @pytest.mark.unit_test
    def test_polar_lift_agrees_with_linear_lift(self) -> None:
        chart = PlaneChart()
        polar = chart.plane_map_to_lift(lambda r: r / 2, lambda r: 2 * r, lambda r: np.full_like(r, 0.25), 0.25)
        linear = chart.lift_linear(0.5, 0.25)
        x = np.linspace(0.0, 1.0, 5)
        y = np.linspace(-1.0, 3.0, 5)
        for a, b in zip(polar(x, y), linear(x, y)):
            np.testing.assert_allclose(a, b, atol=1e-12)
        for a, b in zip(polar.inverse_lift(x, y), linear.inverse_lift(x, y)):
            np.testing.assert_allclose(a, b, atol=1e-12)

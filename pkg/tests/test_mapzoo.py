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

from typing import Any, Dict

import numpy as np
import pytest

from rotsets.cover import PlaneChart
from rotsets.errors import PreconditionError
from rotsets.invsets import GraphCurve, free_curve_classify
from rotsets.mapzoo import (MAP_FAMILIES, AnchoredPiecewiseLinear, MapSpec, SkewLevels, compose, conjugate,
                            constant_profile, default_heteroclinic_radial, finger, identity, identity_profile,
                            min_plane_displacement, open_annulus_double_reeb, piecewise_linear, profile_from_config,
                            reflect, rigid_rotation, rigid_rotation_isotopy_power, skew_heteroclinic, skew_product,
                            tilted_skew_heteroclinic, trapping_band_twist, twice_reeb_plane, twist)


class TestProfiles:

    @pytest.mark.unit_test
    def test_piecewise_linear_clamps(self) -> None:
        alpha = piecewise_linear([0.0, 1.0], [0.0, 2.0])
        np.testing.assert_allclose(alpha([-1.0, 0.5, 5.0]), [0.0, 1.0, 2.0])
        assert alpha.bound == 2.0

    @pytest.mark.unit_test
    @pytest.mark.parametrize("knots, values, period", [
        ([0.0], [1.0], None),
        ([1.0, 0.0], [0.0, 1.0], None),
        ([0.0, 2.0], [0.0, 1.0], 1.0),
    ])
    def test_piecewise_linear_rejects(self, knots: Any, values: Any, period: Any) -> None:
        with pytest.raises(ValueError):
            piecewise_linear(knots, values, period)

    @pytest.mark.unit_test
    def test_anchored_inverse(self) -> None:
        alpha = AnchoredPiecewiseLinear([0.0, 1.0, 2.0], [0.0, 0.5, 2.0])
        assert alpha.fixed_points() == [0.0, 2.0]
        y = np.linspace(-3.0, 5.0, 41)
        np.testing.assert_allclose(alpha.inverse(alpha(y)), y, atol=1e-12)
        assert float(alpha(2.0)) == 2.0

    @pytest.mark.unit_test
    def test_anchored_needs_increasing_values(self) -> None:
        with pytest.raises(ValueError):
            AnchoredPiecewiseLinear([0.0, 1.0], [1.0, 0.0])

    @pytest.mark.unit_test
    def test_missing_inverse(self) -> None:
        with pytest.raises(ValueError):
            constant_profile(0.5).inverse(0.0)
        assert identity_profile().has_inverse

    @pytest.mark.unit_test
    @pytest.mark.parametrize("cfg, y, expected", [
        ({'kind': 'constant', 'value': 0.25}, 3.0, 0.25),
        ({'kind': 'identity'}, 3.0, 3.0),
        ({'kind': 'piecewise_linear', 'knots': [0, 1], 'values': [0, 1]}, 0.5, 0.5),
        ({'kind': 'rational'}, 1.0, 0.5),
    ])
    def test_profile_from_config(self, cfg: Dict[str, Any], y: float, expected: float) -> None:
        assert float(profile_from_config(cfg)(y)) == pytest.approx(expected)

    @pytest.mark.unit_test
    def test_unknown_profile(self) -> None:
        with pytest.raises(ValueError):
            profile_from_config({'kind': 'spline'})

    @pytest.mark.unit_test
    def test_finger(self) -> None:
        np.testing.assert_allclose(finger(np.array([0.0, 0.5, 1.5, 0.56, 0.9])), [0.0, 1.0, 1.0, 0.0, 0.0])


class TestElementaryMaps:

    @pytest.mark.unit_test
    def test_skew_product_needs_invertible_radial(self) -> None:
        with pytest.raises(PreconditionError):
            skew_product(identity_profile(), constant_profile(1.0))

    @pytest.mark.unit_test
    def test_trapping_band_contraction_range(self) -> None:
        with pytest.raises(ValueError):
            trapping_band_twist(contraction=1.5)

    @pytest.mark.unit_test
    def test_trapping_band_attracts(self) -> None:
        f = trapping_band_twist()
        _, y_above = f(0.0, 1.2)
        _, y_below = f(0.0, -0.3)
        assert 0.7 < float(y_above) < 1.2
        assert -0.3 < float(y_below) < 0.2

    @pytest.mark.unit_test
    def test_double_reeb_drifts_up(self) -> None:
        f = open_annulus_double_reeb()
        y = np.linspace(-10.0, 10.0, 101)
        X, Y = f(np.zeros_like(y), y)
        assert np.all(Y > y)
        assert float(X[0]) == pytest.approx(1.0)
        assert float(X[-1]) == pytest.approx(-1.0)

    @pytest.mark.unit_test
    def test_double_reeb_preconditions(self) -> None:
        with pytest.raises(PreconditionError):
            open_annulus_double_reeb(y_minus=1.0, y_plus=0.0)
        with pytest.raises(PreconditionError):
            open_annulus_double_reeb(drift_min=0.3, drift_max=0.2)

    @pytest.mark.unit_test
    def test_min_plane_displacement_of_identity(self) -> None:
        assert min_plane_displacement(identity(), PlaneChart(3.0), (1.0, 3.0), 16) == 0.0


class TestCombinators:

    @pytest.mark.unit_test
    def test_isotopy_power(self) -> None:
        g = rigid_rotation_isotopy_power(rigid_rotation(0.25), 1, 2)
        x, _ = g(0.0, 0.0)
        assert float(x) == pytest.approx(1.5)
        x, _ = g.inverse_lift(1.5, 0.0)
        assert float(x) == pytest.approx(0.0)
        assert g.horizontal_bound == pytest.approx(1.5)

    @pytest.mark.unit_test
    def test_isotopy_power_needs_q(self) -> None:
        with pytest.raises(ValueError):
            rigid_rotation_isotopy_power(identity(), 1, 0)

    @pytest.mark.unit_test
    def test_reflect_changes_sign(self) -> None:
        x, _ = reflect(rigid_rotation(0.25))(0.0, 0.0)
        assert float(x) == pytest.approx(-0.25)

    @pytest.mark.unit_test
    def test_conjugate_by_rotation_commutes(self) -> None:
        g = conjugate(twist(1.0), rigid_rotation(0.3))
        x, y = g(0.1, 0.5)
        assert float(x) == pytest.approx(0.6)
        assert float(y) == pytest.approx(0.5)
        assert g.name == 'conjugate'

    @pytest.mark.unit_test
    def test_compose_order_and_empty(self) -> None:
        g = compose([rigid_rotation(0.25), twist(1.0)])
        x, _ = g(0.0, 1.0)
        assert float(x) == pytest.approx(1.25)
        with pytest.raises(ValueError):
            compose([])


class TestWorkedExamples:

    @pytest.mark.unit_test
    def test_skew_levels_order(self) -> None:
        with pytest.raises(PreconditionError):
            SkewLevels(y2=1.0)

    @pytest.mark.unit_test
    def test_skew_heteroclinic_invariant_circles(self) -> None:
        f = skew_heteroclinic()
        levels = SkewLevels()
        x, y = f(np.zeros(2), np.array([levels.y_a, levels.y_b]))
        np.testing.assert_allclose(y, [levels.y_a, levels.y_b])
        assert float(x[0]) > 0 > float(x[1])

    @pytest.mark.unit_test
    def test_negative_tilt_refused(self) -> None:
        with pytest.raises(PreconditionError):
            skew_heteroclinic(tilt=-1.0)

    @pytest.mark.unit_test
    @pytest.mark.parametrize("tilt", [-0.04, 0.0, 0.04])
    def test_sine_tilt_inverse(self, tilt: float) -> None:
        f = skew_heteroclinic(tilt=tilt, tilt_shape='sine')
        rng = np.random.default_rng(2)
        x = rng.uniform(0.0, 1.0, 200)
        y = rng.uniform(-0.5, 2.5, 200)
        x0, y0 = f.inverse_lift(*f(x, y))
        np.testing.assert_allclose(x0, x, atol=1e-9)
        np.testing.assert_allclose(y0, y, atol=1e-9)

    @pytest.mark.unit_test
    def test_sine_tilt_adds_a_wave(self) -> None:
        radial = default_heteroclinic_radial(SkewLevels())
        y = np.linspace(0.0, 2.0, 9)
        X, Y = skew_heteroclinic(tilt=0.03, tilt_shape='sine')(np.full_like(y, 0.1), y)
        np.testing.assert_allclose(Y, radial(y) + 0.03 * np.sin(2 * np.pi * X), atol=1e-12)

    @pytest.mark.unit_test
    def test_sine_tilt_keeps_the_curves_free(self) -> None:
        f = skew_heteroclinic(tilt=0.03, tilt_shape='sine')
        for level in (2.0, 1.25, 0.0):
            assert free_curve_classify(f, GraphCurve.horizontal(level), 0.01).kind == 'attracting'

    @pytest.mark.unit_test
    @pytest.mark.parametrize("kwargs", [{'tilt': 0.1, 'tilt_shape': 'sine'}, {'tilt': -0.1, 'tilt_shape': 'sine'},
                                        {'tilt': 0.5, 'tilt_shape': 'step'}])
    def test_bad_tilt_refused(self, kwargs: Dict[str, Any]) -> None:
        with pytest.raises(PreconditionError):
            skew_heteroclinic(**kwargs)

    @pytest.mark.unit_test
    def test_tilt_shape_from_config(self) -> None:
        f = MapSpec('skew-het', {'tilt': 0.02, 'tilt_shape': 'sine'}).resolve()
        assert f.params['tilt_shape'] == 'sine'
        assert MapSpec('skew-het').resolve().params['tilt_shape'] == 'finger'

    @pytest.mark.unit_test
    @pytest.mark.parametrize("tilt", [0.0, 0.5, 2.0])
    def test_tilted_inverse(self, tilt: float) -> None:
        f = tilted_skew_heteroclinic(tilt=tilt)
        rng = np.random.default_rng(1)
        x = rng.uniform(0.0, 1.0, 200)
        y = rng.uniform(-0.5, 2.5, 200)
        x0, y0 = f.inverse_lift(*f(x, y))
        np.testing.assert_allclose(x0, x, atol=1e-9)
        np.testing.assert_allclose(y0, y, atol=1e-9)

    @pytest.mark.unit_test
    def test_twice_reeb_certifies_no_fixed_point(self) -> None:
        f = twice_reeb_plane()
        assert f.params['min_grid_displacement'] > 0.0

    @pytest.mark.unit_test
    @pytest.mark.parametrize("kwargs", [{'beta': 1.0}, {'alpha': -2.0}, {'stiffness': 0.5}])
    def test_twice_reeb_preconditions(self, kwargs: Dict[str, Any]) -> None:
        with pytest.raises(PreconditionError):
            twice_reeb_plane(**kwargs)


class TestMapSpec:

    @pytest.mark.unit_test
    def test_family_normalised(self) -> None:
        spec = MapSpec('rigid_rotation', {'angle': 0.25})
        assert spec.family == 'rigid-rotation'
        lifted = spec.resolve()
        assert lifted.params['family'] == 'rigid-rotation'
        assert spec.to_dict() == {'family': 'rigid-rotation', 'params': {'angle': 0.25}}

    @pytest.mark.unit_test
    def test_unknown_family(self) -> None:
        with pytest.raises(ValueError):
            MapSpec('horseshoe')

    @pytest.mark.unit_test
    def test_nested_config(self) -> None:
        cfg = {'family': 'iterate', 'params': {'map': {'family': 'rigid-rotation', 'params': {'angle': 0.25}},
                                               'k': 3}}
        x, _ = MapSpec.from_config(cfg).resolve()(0.0, 0.0)
        assert float(x) == pytest.approx(0.75)

    @pytest.mark.unit_test
    @pytest.mark.parametrize("family", ['identity', 'double-reeb', 'skew-het', 'skew-het-tilted',
                                        'trapping-band-twist'])
    def test_parameter_free_families_resolve(self, family: str) -> None:
        assert family in MAP_FAMILIES
        assert MapSpec(family).resolve().horizontal_bound >= 0.0

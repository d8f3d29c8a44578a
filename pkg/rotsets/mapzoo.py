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

from dataclasses import dataclass, field
import math
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from numpy import ndarray

from helpers.utils import strictly_increasing
from .cover import LiftedAnnulusMap, PlaneChart
from .errors import PreconditionError

INF = math.inf


class Alpha1D:
    """
    A continuous function of one real variable with a declared domain and a certified bound on |value|.

    Serves both as a rotation profile (values in turns) and as the radial part of a skew product, in which
    case an inverse must be supplied.
    """

    def __init__(self,
                 fn: Callable[[ndarray], ndarray],
                 domain: Tuple[float, float] = (-INF, INF),
                 bound: float = INF,
                 inverse: Optional[Callable[[ndarray], ndarray]] = None,
                 name: str = 'alpha',
                 params: Optional[Dict[str, Any]] = None):
        self.fn = fn
        self.domain = (float(domain[0]), float(domain[1]))
        self.bound = float(bound)
        self._inverse = inverse
        self.name = name
        self.params = dict(params) if params else {}

    def __call__(self, y: Any) -> ndarray:
        return np.asarray(self.fn(np.asarray(y, dtype=float)), dtype=float)

    @property
    def has_inverse(self) -> bool:
        return self._inverse is not None

    def inverse(self, y: Any) -> ndarray:
        if self._inverse is None:
            raise ValueError(f'Profile {self.name} has no inverse')
        return np.asarray(self._inverse(np.asarray(y, dtype=float)), dtype=float)

    def _samples(self, lo: Optional[float], hi: Optional[float], samples: int) -> ndarray:
        lo = self.domain[0] if lo is None else lo
        hi = self.domain[1] if hi is None else hi
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError('Sampling needs a finite range')
        return np.linspace(lo, hi, samples)

    def is_strictly_increasing(self, lo: Optional[float] = None, hi: Optional[float] = None,
                               samples: int = 4096) -> bool:
        values = self(self._samples(lo, hi, samples))
        return bool(np.all(np.isfinite(values))) and strictly_increasing(list(values))

    def to_dict(self) -> Dict[str, Any]:
        return {'kind': self.name, **self.params}

    def __repr__(self) -> str:
        return f'Alpha1D({self.name}, {self.params})'


def constant_profile(value: float) -> Alpha1D:
    return Alpha1D(lambda y: np.full_like(y, value, dtype=float), bound=abs(value), name='constant',
                   params={'value': value})


def identity_profile() -> Alpha1D:
    return Alpha1D(lambda y: y.copy(), inverse=lambda y: y.copy(), name='identity')


def piecewise_linear(knots: Sequence[float], values: Sequence[float], period: Optional[float] = None) -> Alpha1D:
    """Linear interpolation, clamped outside the knots, or periodic with the given period."""
    knots = [float(k) for k in knots]
    values = [float(v) for v in values]
    if len(knots) != len(values) or len(knots) < 2 or not strictly_increasing(knots):
        raise ValueError('piecewise_linear needs at least two strictly increasing knots, one value each')
    if period is not None and not knots[-1] - knots[0] <= period:
        raise ValueError('knots must fit inside one period')

    def fn(y: ndarray) -> ndarray:
        return np.interp(y, knots, values, period=period)

    return Alpha1D(fn, bound=max(abs(v) for v in values), name='piecewise_linear',
                   params={'knots': knots, 'values': values, 'period': period})


def sine_exp_profile(amplitude: float = 1.0 / (2.0 * math.pi)) -> Alpha1D:
    """amplitude * sin(e^y): sin(1/r) in plane coordinates, oscillating ever faster toward the origin."""
    return Alpha1D(lambda y: amplitude * np.sin(np.exp(y)), domain=(-INF, 700.0), bound=abs(amplitude),
                   name='sine_exp', params={'amplitude': amplitude})


def rational_profile() -> Alpha1D:
    return Alpha1D(lambda y: 1.0 / (1.0 + y * y), bound=1.0, name='rational')


class AnchoredPiecewiseLinear(Alpha1D):
    """
    Strictly increasing piecewise linear profile with an exact piecewise linear inverse.

    Each piece is evaluated from an anchor knot: the knot that is a fixed point (value == knot) when there
    is one, the left knot otherwise. Rounding then never moves an orbit across a fixed point. Outside the
    knots the end pieces are extended.
    """

    def __init__(self, knots: Sequence[float], values: Sequence[float], name: str = 'anchored_piecewise_linear'):
        self.knots = np.asarray(knots, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.knots.size < 2 or self.knots.size != self.values.size:
            raise ValueError('need at least two knots, one value each')
        if not (strictly_increasing(list(self.knots)) and strictly_increasing(list(self.values))):
            raise ValueError('knots and values must both be strictly increasing')
        self.fixed = self.knots == self.values
        super().__init__(self._evaluate, bound=INF, inverse=self._invert, name=name,
                         params={'knots': self.knots.tolist(), 'values': self.values.tolist()})

    def fixed_points(self) -> List[float]:
        return self.knots[self.fixed].tolist()

    @staticmethod
    def _piecewise(y: ndarray, knots: ndarray, values: ndarray, fixed: ndarray) -> ndarray:
        slopes = np.diff(values) / np.diff(knots)
        piece = np.clip(np.searchsorted(knots, y, side='right') - 1, 0, knots.size - 2)
        left_anchor = fixed[piece] | ~fixed[piece + 1]
        anchor = np.where(left_anchor, piece, piece + 1)
        return values[anchor] + slopes[piece] * (y - knots[anchor])

    def _evaluate(self, y: ndarray) -> ndarray:
        return self._piecewise(y, self.knots, self.values, self.fixed)

    def _invert(self, y: ndarray) -> ndarray:
        return self._piecewise(y, self.values, self.knots, self.fixed)


def profile_from_config(cfg: Mapping[str, Any]) -> Alpha1D:
    kind = cfg['kind']
    if kind == 'constant':
        return constant_profile(float(cfg['value']))
    if kind == 'identity':
        return identity_profile()
    if kind == 'piecewise_linear':
        return piecewise_linear(cfg['knots'], cfg['values'], cfg.get('period'))
    if kind == 'anchored_piecewise_linear':
        return AnchoredPiecewiseLinear(cfg['knots'], cfg['values'])
    if kind == 'sine_exp':
        return sine_exp_profile(float(cfg.get('amplitude', 1.0 / (2.0 * math.pi))))
    if kind == 'rational':
        return rational_profile()
    raise ValueError(f'Invalid profile kind {kind}')


# Elementary families


def identity() -> LiftedAnnulusMap:
    def same(x: ndarray, y: ndarray) -> Tuple[ndarray, ndarray]:
        return x.copy(), y.copy()
    return LiftedAnnulusMap('identity', same, same, 0.0)


def rigid_rotation(angle: float) -> LiftedAnnulusMap:
    def forward(x: ndarray, y: ndarray) -> Tuple[ndarray, ndarray]:
        return x + angle, y.copy()

    def inverse(x: ndarray, y: ndarray) -> Tuple[ndarray, ndarray]:
        return x - angle, y.copy()

    return LiftedAnnulusMap('rigid_rotation', forward, inverse, abs(angle), params={'angle': angle})


def twist(scale: float = 1.0, band: Tuple[float, float] = (-2.0, 2.0)) -> LiftedAnnulusMap:
    """(x, y) -> (x + scale * y, y); the horizontal bound is certified on the given band only."""
    def forward(x: ndarray, y: ndarray) -> Tuple[ndarray, ndarray]:
        return x + scale * y, y.copy()

    def inverse(x: ndarray, y: ndarray) -> Tuple[ndarray, ndarray]:
        return x - scale * y, y.copy()

    bound = abs(scale) * max(abs(band[0]), abs(band[1]))
    return LiftedAnnulusMap('twist', forward, inverse, bound, band=band, params={'scale': scale, 'band': list(band)})


def drift(dy: float) -> LiftedAnnulusMap:
    """Uniform vertical drift (x, y) -> (x, y + dy)."""
    def forward(x: ndarray, y: ndarray) -> Tuple[ndarray, ndarray]:
        return x.copy(), y + dy

    def inverse(x: ndarray, y: ndarray) -> Tuple[ndarray, ndarray]:
        return x.copy(), y - dy

    return LiftedAnnulusMap('drift', forward, inverse, 0.0, params={'dy': dy})


def fibred_rotation(alpha: Alpha1D) -> LiftedAnnulusMap:
    """Each circle y = const turns rigidly by alpha(y) turns."""
    def forward(x: ndarray, y: ndarray) -> Tuple[ndarray, ndarray]:
        return x + alpha(y), y.copy()

    def inverse(x: ndarray, y: ndarray) -> Tuple[ndarray, ndarray]:
        return x - alpha(y), y.copy()

    return LiftedAnnulusMap('fibred_rotation', forward, inverse, alpha.bound, band=alpha.domain,
                            params={'alpha': alpha.to_dict()})


def skew_product(omega: Alpha1D, radial: Alpha1D, name: str = 'skew_product',
                 band: Tuple[float, float] = (-INF, INF),
                 params: Optional[Dict[str, Any]] = None) -> LiftedAnnulusMap:
    """(x, y) -> (x + omega(y), radial(y)); radial must be invertible."""
    if not radial.has_inverse:
        raise PreconditionError('radial profile of a skew product needs an inverse')

    def forward(x: ndarray, y: ndarray) -> Tuple[ndarray, ndarray]:
        return x + omega(y), radial(y)

    def inverse(x: ndarray, y: ndarray) -> Tuple[ndarray, ndarray]:
        y0 = radial.inverse(y)
        return x - omega(y0), y0

    record = {'omega': omega.to_dict(), 'radial': radial.to_dict()}
    record.update(params or {})
    return LiftedAnnulusMap(name, forward, inverse, omega.bound, band=band, params=record)


def plane_linear(modulus: float, angle_turns: float, log_base: float = math.e) -> LiftedAnnulusMap:
    """The plane map z -> modulus * exp(2 pi i angle_turns) * z seen through the log-polar chart."""
    return PlaneChart(log_base).lift_linear(modulus, angle_turns)


def trapping_band_twist(y_lo: float = 0.2, y_hi: float = 0.7, contraction: float = 0.5) -> LiftedAnnulusMap:
    """
    Twist whose radial part pulls every level toward the invariant band [y_lo, y_hi]. Curves above the band
    are attracting, curves below it repulsing.
    """
    if not 0 < contraction < 1:
        raise ValueError('contraction must lie in (0, 1)')
    radial = AnchoredPiecewiseLinear([y_lo - 1.0, y_lo, y_hi, y_hi + 1.0],
                                     [y_lo - contraction, y_lo, y_hi, y_hi + contraction])
    return skew_product(identity_profile(), radial, name='trapping_band_twist', band=(y_lo - 1.0, y_hi + 1.0),
                        params={'y_lo': y_lo, 'y_hi': y_hi, 'contraction': contraction})


# Combinators


def rigid_rotation_isotopy_power(lifted_map: LiftedAnnulusMap, p: int, q: int) -> LiftedAnnulusMap:
    """z -> f^q(z) + (p, 0). Every rotation estimate transforms by rho -> q rho + p."""
    if q == 0:
        raise ValueError('q must be non-zero')

    def forward(x: ndarray, y: ndarray) -> Tuple[ndarray, ndarray]:
        X, Y = lifted_map.apply(x, y, q)
        return X + p, Y

    def inverse(x: ndarray, y: ndarray) -> Tuple[ndarray, ndarray]:
        return lifted_map.apply(x - p, y, -q)

    return LiftedAnnulusMap(f'{lifted_map.name}^{q}+{p}', forward, inverse,
                            abs(q) * lifted_map.horizontal_bound + abs(p), band=lifted_map.band,
                            params={'base': lifted_map.metadata(), 'p': p, 'q': q})


def iterate(lifted_map: LiftedAnnulusMap, k: int) -> LiftedAnnulusMap:
    return rigid_rotation_isotopy_power(lifted_map, 0, k)


def compose(maps: Sequence[LiftedAnnulusMap]) -> LiftedAnnulusMap:
    """Composition applying the maps in list order: the first element acts first."""
    maps = list(maps)
    if not maps:
        raise ValueError('compose needs at least one map')

    def forward(x: ndarray, y: ndarray) -> Tuple[ndarray, ndarray]:
        for m in maps:
            x, y = m(x, y)
        return x, y

    def inverse(x: ndarray, y: ndarray) -> Tuple[ndarray, ndarray]:
        for m in reversed(maps):
            x, y = m.inverse_lift(x, y)
        return x, y

    return LiftedAnnulusMap('compose', forward, inverse, sum(m.horizontal_bound for m in maps),
                            params={'maps': [m.metadata() for m in maps]})


def conjugate(lifted_map: LiftedAnnulusMap, by: LiftedAnnulusMap) -> LiftedAnnulusMap:
    """h o f o h^-1 with h = by."""
    conjugated = compose([by.inverted(), lifted_map, by])
    conjugated.name = 'conjugate'
    conjugated.horizontal_bound = lifted_map.horizontal_bound + 2 * by.horizontal_bound
    conjugated.params = {'map': lifted_map.metadata(), 'by': by.metadata()}
    return conjugated


def reflect(lifted_map: LiftedAnnulusMap) -> LiftedAnnulusMap:
    """Conjugation by the orientation-reversing reflection (x, y) -> (-x, y); rotation sets change sign."""
    def forward(x: ndarray, y: ndarray) -> Tuple[ndarray, ndarray]:
        X, Y = lifted_map(-x, y)
        return -X, Y

    def inverse(x: ndarray, y: ndarray) -> Tuple[ndarray, ndarray]:
        X, Y = lifted_map.inverse_lift(-x, y)
        return -X, Y

    return LiftedAnnulusMap(f'reflect({lifted_map.name})', forward, inverse, lifted_map.horizontal_bound,
                            band=lifted_map.band, params={'map': lifted_map.metadata()})


# The worked examples


def twice_reeb_plane(beta: float = 0.1, alpha: float = -0.1, stiffness: float = 0.05,
                     check_resolution: int = 512, min_displacement: float = 0.0) -> LiftedAnnulusMap:
    """
    Plane homeomorphism fixing 0, self-similar under z -> z/3, built on the chart u = -log_3 r.

    On every fundamental annulus 3^-(k+1) <= r <= 3^-k three circles are invariant: the two boundary
    circles turn by beta, the circle r = 2 * 3^-(k+1) by alpha. In between, orbits drift radially
    (by about `stiffness` in u) so that the angle profile can pass through 0 without creating a fixed point.
    Self-similarity becomes 1-periodicity in u.

    Raises:
        PreconditionError: if a fixed circle carries an integer rotation, the radial part is not monotone,
            or the grid check finds a plane displacement not above min_displacement.
    """
    u_mid = 1.0 - math.log(2.0, 3.0)
    for name, value in (('beta', beta), ('alpha', alpha)):
        if float(value).is_integer():
            raise PreconditionError(f'{name} = {value} is an integer: every point of that circle is fixed')
    if not 0 < stiffness < min(u_mid, 1.0 - u_mid) / 2:
        raise PreconditionError(f'stiffness must lie in (0, {min(u_mid, 1.0 - u_mid) / 2:.4f})')

    cell = AnchoredPiecewiseLinear([0.0, u_mid / 2, u_mid, (1.0 + u_mid) / 2, 1.0],
                                   [0.0, u_mid / 2 - stiffness, u_mid, (1.0 + u_mid) / 2 - stiffness, 1.0])
    knots = [0.0, u_mid, 1.0]
    angles = [beta, alpha, beta]

    def rotation(u: ndarray) -> ndarray:
        return np.interp(u - np.floor(u), knots, angles)

    def radial(u: ndarray) -> ndarray:
        k = np.floor(u)
        return k + cell(u - k)

    def radial_inverse(u: ndarray) -> ndarray:
        k = np.floor(u)
        return k + cell.inverse(u - k)

    def forward(x: ndarray, u: ndarray) -> Tuple[ndarray, ndarray]:
        return x + rotation(u), radial(u)

    def inverse(x: ndarray, u: ndarray) -> Tuple[ndarray, ndarray]:
        u0 = radial_inverse(u)
        return x - rotation(u0), u0

    params = {'beta': beta, 'alpha': alpha, 'stiffness': stiffness, 'u_mid': u_mid, 'log_base': 3.0}
    lifted = LiftedAnnulusMap('twice_reeb_plane', forward, inverse, max(abs(beta), abs(alpha)), params=params)

    grid_min = min_plane_displacement(lifted, PlaneChart(3.0), (1.0, 3.0), check_resolution)
    if not grid_min > min_displacement:
        raise PreconditionError(f'twice_reeb_plane has a grid point moved by {grid_min:.3g} '
                                f'<= {min_displacement}: the interpolation created a fixed point')
    lifted.params['min_grid_displacement'] = grid_min
    return lifted


def min_plane_displacement(lifted_map: LiftedAnnulusMap, chart: PlaneChart, radii: Tuple[float, float],
                           resolution: int) -> float:
    """min |f(z) - z| over a resolution x resolution polar grid of the plane annulus radii[0] <= r <= radii[1]."""
    theta = np.arange(resolution) / resolution
    levels = np.linspace(chart.radius_to_level(radii[1]), chart.radius_to_level(radii[0]), resolution)
    t, u = np.meshgrid(theta, levels)
    t, u = t.ravel(), u.ravel()
    X, U = lifted_map(t, u)
    px, py = chart.to_plane(t, u)
    qx, qy = chart.to_plane(X, U)
    return float(np.min(np.hypot(qx - px, qy - py)))


def open_annulus_double_reeb(y_minus: float = -3.0, y_plus: float = 3.0,
                             drift_min: float = 0.02, drift_max: float = 0.2) -> LiftedAnnulusMap:
    """
    Annulus map turning +1 turn near the S end (y <= y_minus) and -1 turn near the N end (y >= y_plus), with
    a strictly positive upward drift everywhere. Every orbit runs from S to N, so no compact set is invariant,
    while orbit segments crossing the middle produce every average between -1 and +1.
    """
    if not y_minus < y_plus:
        raise PreconditionError('need y_minus < y_plus')
    if not 0 < drift_min <= drift_max:
        raise PreconditionError('need 0 < drift_min <= drift_max')
    y_mid = (y_minus + y_plus) / 2
    rotation = piecewise_linear([y_minus, y_plus], [1.0, -1.0])
    knots = [y_minus - 1.0, y_minus, y_mid, y_plus, y_plus + 1.0]
    radial = AnchoredPiecewiseLinear(knots, [knots[0] + drift_min, y_minus + drift_min, y_mid + drift_max,
                                             y_plus + drift_min, knots[-1] + drift_min])
    return skew_product(rotation, radial, name='open_annulus_double_reeb',
                        params={'y_minus': y_minus, 'y_plus': y_plus, 'drift_min': drift_min,
                                'drift_max': drift_max})


@dataclass(frozen=True)
class SkewLevels:
    """Heights y2 < y_b < y1 < y_a < y0 of the three free curves and the two invariant circles."""
    y2: float = 0.0
    y_b: float = 0.5
    y1: float = 1.25
    y_a: float = 1.5
    y0: float = 2.0

    def __post_init__(self) -> None:
        if not strictly_increasing([self.y2, self.y_b, self.y1, self.y_a, self.y0]):
            raise PreconditionError(f'levels must satisfy y2 < y_b < y1 < y_a < y0, got {self}')

    def to_dict(self) -> Dict[str, float]:
        return {'y2': self.y2, 'y_b': self.y_b, 'y1': self.y1, 'y_a': self.y_a, 'y0': self.y0}


def default_heteroclinic_radial(levels: SkewLevels, slope_below: float = 1.5, slope_inner: float = 0.8,
                                slope_above: float = 0.5) -> AnchoredPiecewiseLinear:
    """
    Radial profile with semi-stable fixed points y_b and y_a: every other level moves down. The break point
    between the two fixed points is their midpoint, where continuity forces the upper inner slope to be
    2 - slope_inner.
    """
    y_m = (levels.y_b + levels.y_a) / 2
    h = y_m - levels.y_b
    knots = [levels.y_b - 1.0, levels.y_b, y_m, levels.y_a, levels.y_a + 1.0]
    values = [levels.y_b - slope_below, levels.y_b, levels.y_b + slope_inner * h, levels.y_a,
              levels.y_a + slope_above]
    return AnchoredPiecewiseLinear(knots, values)


TILT_SHAPES = ('finger', 'sine')


def finger(x: ndarray, center: float = 0.5, half_width: float = 0.05, ramp: float = 0.01) -> ndarray:
    """1-periodic plateau bump: 1 on |x - center| <= half_width, 0 beyond half_width + ramp."""
    knots = [0.0, center - half_width - ramp, center - half_width, center + half_width,
             center + half_width + ramp, 1.0]
    return np.interp(x - np.floor(x), knots, [0.0, 0.0, 1.0, 1.0, 0.0, 0.0])


def skew_heteroclinic(levels: Optional[SkewLevels] = None,
                      omega: Optional[Alpha1D] = None,
                      radial: Optional[Alpha1D] = None,
                      tilt: float = 0.0,
                      finger_center: float = 0.5,
                      finger_half_width: float = 0.05,
                      finger_ramp: float = 0.01,
                      tilt_shape: str = 'finger') -> LiftedAnnulusMap:
    """
    Skew product with two oppositely rotating invariant circles y_a (positive) and y_b (negative) joined by
    heteroclinic orbits, followed by a vertical tilt S:

        f = S o R,  R(x, y) = (x + omega(y), radial(y)).

    With tilt_shape 'finger', S(x, y) = (x, y - tilt * finger(x)). That tilt only ever pushes down, so the
    horizontal curves at y0, y1, y2 stay free and attracting for every tilt >= 0. A tilt of at least
    radial(y0) - y2 makes the image of the top curve reach the bottom curve.

    With tilt_shape 'sine', S(x, y) = (x, y + tilt * sin(2 pi x)), the smooth variant. The curves stay free
    only while |tilt| is below their smallest margin y - radial(y), so larger tilts are refused.

    Both shears are invertible, so f is a homeomorphism.
    """
    levels = levels or SkewLevels()
    omega = omega or piecewise_linear([levels.y_b, levels.y_a], [-0.2, 0.3])
    radial = radial or default_heteroclinic_radial(levels)
    if tilt_shape not in TILT_SHAPES:
        raise PreconditionError(f'tilt_shape must be one of {TILT_SHAPES}, got {tilt_shape}')
    if tilt_shape == 'finger' and tilt < 0:
        raise PreconditionError('tilt must be non-negative')
    if not radial.has_inverse:
        raise PreconditionError('radial profile needs an inverse')

    tol = 1e-12
    for name in ('y_a', 'y_b'):
        level = getattr(levels, name)
        if abs(float(radial(level)) - level) > tol:
            raise PreconditionError(f'radial({name}={level}) = {float(radial(level))} is not a fixed point')
    ys = np.linspace(levels.y2, levels.y0, 8192)
    away = (np.abs(ys - levels.y_a) > 1e-9) & (np.abs(ys - levels.y_b) > 1e-9)
    if not np.all(radial(ys[away]) < ys[away]):
        raise PreconditionError('radial(y) < y must hold on [y2, y0] away from y_a and y_b')
    if not radial.is_strictly_increasing(levels.y2 - 1.0, levels.y0 + 1.0):
        raise PreconditionError('radial profile is not strictly increasing')
    if not float(omega(levels.y_a)) > 0 or not float(omega(levels.y_b)) < 0:
        raise PreconditionError('need omega(y_a) > 0 and omega(y_b) < 0')
    if tilt_shape == 'sine':
        margin = min(level - float(radial(level)) for level in (levels.y0, levels.y1, levels.y2))
        if not abs(tilt) < margin:
            raise PreconditionError(f'sine tilt {tilt} must stay below the free-curve margin {margin}')

    def bump(x: ndarray) -> ndarray:
        if tilt_shape == 'sine':
            return -np.sin(2 * np.pi * x)
        return finger(x, finger_center, finger_half_width, finger_ramp)

    def forward(x: ndarray, y: ndarray) -> Tuple[ndarray, ndarray]:
        X = x + omega(y)
        Y = radial(y)
        if tilt:
            Y = Y - tilt * bump(X)
        return X, Y

    def inverse(x: ndarray, y: ndarray) -> Tuple[ndarray, ndarray]:
        if tilt:
            y = y + tilt * bump(x)
        y0 = radial.inverse(y)
        return x - omega(y0), y0

    params = {'levels': levels.to_dict(), 'omega': omega.to_dict(), 'radial': radial.to_dict(), 'tilt': tilt,
              'finger': {'center': finger_center, 'half_width': finger_half_width, 'ramp': finger_ramp},
              'tilt_shape': tilt_shape}
    return LiftedAnnulusMap('skew_heteroclinic', forward, inverse, omega.bound, params=params)


def tilted_skew_heteroclinic(tilt: float = 2.0, levels: Optional[SkewLevels] = None) -> LiftedAnnulusMap:
    """
    Reference tilted variant. The angle profile is exactly +1/3 on [y1, y0] and -1/3 below y1 - 0.25, so
    orbits on the invariant circles visit three residues mod 1; the columns whose residues all miss the finger
    survive. Unstable and stable branches are then compact.
    """
    levels = levels or SkewLevels()
    omega = piecewise_linear([levels.y1 - 0.25, levels.y1], [-1.0 / 3.0, 1.0 / 3.0])
    lifted = skew_heteroclinic(levels, omega=omega, tilt=tilt)
    lifted.name = 'skew_heteroclinic_tilted'
    return lifted


# Config resolution

MapFactory = Callable[..., LiftedAnnulusMap]


def _nested(params: Dict[str, Any], key: str) -> LiftedAnnulusMap:
    return MapSpec.from_config(params.pop(key)).resolve()


def _build_fibred(params: Dict[str, Any]) -> LiftedAnnulusMap:
    return fibred_rotation(profile_from_config(params['alpha']))


def _build_skew_product(params: Dict[str, Any]) -> LiftedAnnulusMap:
    return skew_product(profile_from_config(params['omega']), profile_from_config(params['radial']))


def _build_skew_het(params: Dict[str, Any]) -> LiftedAnnulusMap:
    levels = SkewLevels(**params.pop('levels')) if 'levels' in params else None
    omega = profile_from_config(params.pop('omega')) if 'omega' in params else None
    radial = profile_from_config(params.pop('radial')) if 'radial' in params else None
    return skew_heteroclinic(levels, omega, radial, **params)


def _build_skew_het_tilted(params: Dict[str, Any]) -> LiftedAnnulusMap:
    levels = SkewLevels(**params.pop('levels')) if 'levels' in params else None
    return tilted_skew_heteroclinic(levels=levels, **params)


def _build_isotopy_power(params: Dict[str, Any]) -> LiftedAnnulusMap:
    return rigid_rotation_isotopy_power(_nested(params, 'map'), int(params['p']), int(params['q']))


def _build_conjugate(params: Dict[str, Any]) -> LiftedAnnulusMap:
    return conjugate(_nested(params, 'map'), _nested(params, 'by'))


MAP_FAMILIES: Dict[str, Callable[[Dict[str, Any]], LiftedAnnulusMap]] = {
    'identity': lambda p: identity(),
    'rigid-rotation': lambda p: rigid_rotation(float(p['angle'])),
    'twist': lambda p: twist(float(p.get('scale', 1.0)), tuple(p.get('band', (-2.0, 2.0)))),  # type: ignore
    'drift': lambda p: drift(float(p['dy'])),
    'fibred-rotation': _build_fibred,
    'skew-product': _build_skew_product,
    'plane-linear': lambda p: plane_linear(float(p['modulus']), float(p['angle_turns']),
                                           float(p.get('log_base', math.e))),
    'trapping-band-twist': lambda p: trapping_band_twist(**p),
    'twice-reeb': lambda p: twice_reeb_plane(**p),
    'double-reeb': lambda p: open_annulus_double_reeb(**p),
    'skew-het': _build_skew_het,
    'skew-het-tilted': _build_skew_het_tilted,
    'isotopy-power': _build_isotopy_power,
    'iterate': lambda p: iterate(_nested(p, 'map'), int(p['k'])),
    'reflect': lambda p: reflect(_nested(p, 'map')),
    'conjugate': _build_conjugate,
    'compose': lambda p: compose([MapSpec.from_config(m).resolve() for m in p['maps']]),
}


@dataclass(frozen=True)
class MapSpec:
    """A family tag plus named parameters; serialises to and from the config format."""
    family: str
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        family = self.family.replace('_', '-')
        if family not in MAP_FAMILIES:
            raise ValueError(f'Invalid map family {self.family}; choose from {sorted(MAP_FAMILIES)}')
        object.__setattr__(self, 'family', family)

    @classmethod
    def from_config(cls, cfg: Mapping[str, Any]) -> 'MapSpec':
        params = cfg.get('params') or {}
        return cls(str(cfg['family']), _plain(params))

    def to_dict(self) -> Dict[str, Any]:
        return {'family': self.family, 'params': _plain(self.params)}

    def resolve(self) -> LiftedAnnulusMap:
        lifted = MAP_FAMILIES[self.family](_plain(self.params))
        lifted.params.setdefault('family', self.family)
        return lifted


def _plain(value: Any) -> Any:
    # Box and other mappings become plain dicts, tuples become lists
    if isinstance(value, Mapping):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value

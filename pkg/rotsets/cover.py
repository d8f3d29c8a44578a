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
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np
from numpy import ndarray

from .errors import MapEvaluationError, OrbitEscapeError

LiftFn = Callable[[ndarray, ndarray], Tuple[ndarray, ndarray]]

TOL_LIFT = 1e-9
OVERFLOW_GUARD = 1e9
MAX_HORIZON = 10 ** 6


@dataclass(frozen=True)
class AnnulusPoint:
    theta: float
    y: float

    def __post_init__(self) -> None:
        # Reduce into [0, 1); a tiny negative theta can round up to exactly 1.0
        theta = float(self.theta) % 1.0
        if theta >= 1.0:
            theta = 0.0
        object.__setattr__(self, 'theta', theta)
        object.__setattr__(self, 'y', float(self.y))

    def lift(self, k: int = 0) -> 'CoverPoint':
        return CoverPoint(self.theta + k, self.y)


@dataclass(frozen=True)
class CoverPoint:
    x: float
    y: float

    def project(self) -> AnnulusPoint:
        return AnnulusPoint(self.x - math.floor(self.x), self.y)

    def translate(self, k: int = 1) -> 'CoverPoint':
        """Deck translation T^k."""
        return CoverPoint(self.x + k, self.y)


@dataclass(frozen=True)
class Window:
    """Closed rectangle [x_lo, x_hi] x [y_lo, y_hi] of the cover."""
    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float

    def __post_init__(self) -> None:
        if not (self.x_lo < self.x_hi and self.y_lo <= self.y_hi):
            raise ValueError(f'Empty window {self}')

    @classmethod
    def band(cls, y_lo: float, y_hi: float) -> 'Window':
        return cls(0.0, 1.0, y_lo, y_hi)

    def grid(self, samples: int) -> Tuple[ndarray, ndarray]:
        xs = np.linspace(self.x_lo, self.x_hi, samples)
        ys = np.linspace(self.y_lo, self.y_hi, samples)
        gx, gy = np.meshgrid(xs, ys)
        return gx.ravel(), gy.ravel()


class LiftedAnnulusMap:
    """
    A homeomorphism of the annulus given by a lift to the universal cover R x R.

    Both directions are vectorised callables (x, y) -> (X, Y) on numpy arrays. The lift is expected to
    commute with the deck translation T(x, y) = (x + 1, y); validate_lift checks this by sampling.

    Args:
        name: family name, used in records and plots
        forward: the lift f
        inverse: the lift of f^-1
        horizontal_bound: M0, a bound on |p1(f(z)) - p1(z)| over the declared band
        band: (y_lo, y_hi) over which horizontal_bound is certified
        params: parameter record echoed into results
    """

    def __init__(self,
                 name: str,
                 forward: LiftFn,
                 inverse: LiftFn,
                 horizontal_bound: float,
                 band: Tuple[float, float] = (-math.inf, math.inf),
                 params: Optional[Dict[str, Any]] = None):
        if horizontal_bound < 0:
            raise ValueError('horizontal_bound must be non-negative')
        self.name = name
        self.forward = forward
        self.inverse = inverse
        self.horizontal_bound = float(horizontal_bound)
        self.band = (float(band[0]), float(band[1]))
        self.params: Dict[str, Any] = dict(params) if params else {}

    def __call__(self, x: Any, y: Any) -> Tuple[ndarray, ndarray]:
        return self.forward(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def inverse_lift(self, x: Any, y: Any) -> Tuple[ndarray, ndarray]:
        return self.inverse(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def step(self, x: Any, y: Any, direction: int = 1) -> Tuple[ndarray, ndarray]:
        return self(x, y) if direction >= 0 else self.inverse_lift(x, y)

    def apply(self, x: Any, y: Any, n: int) -> Tuple[ndarray, ndarray]:
        """n-fold composition; negative n uses the supplied inverse."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        for _ in range(abs(n)):
            x, y = self.step(x, y, 1 if n > 0 else -1)
        return x, y

    def inverted(self) -> 'LiftedAnnulusMap':
        return LiftedAnnulusMap(f'{self.name}^-1', self.inverse, self.forward, self.horizontal_bound,
                                self.band, self.params)

    def metadata(self) -> Dict[str, Any]:
        return {'name': self.name, 'params': self.params, 'horizontal_bound': self.horizontal_bound,
                'band': list(self.band)}

    def __repr__(self) -> str:
        return f'LiftedAnnulusMap({self.name!r}, M0={self.horizontal_bound})'


@dataclass(frozen=True)
class LiftValidationReport:
    max_equivariance_error: float
    max_inverse_error: float
    observed_bound: float
    declared_bound: float
    sample_count: int
    tol: float

    @property
    def passed(self) -> bool:
        return (self.max_equivariance_error <= self.tol
                and self.max_inverse_error <= self.tol
                and self.observed_bound <= self.declared_bound + self.tol)

    def to_dict(self) -> Dict[str, Any]:
        return {'max_equivariance_error': self.max_equivariance_error,
                'max_inverse_error': self.max_inverse_error,
                'observed_bound': self.observed_bound,
                'declared_bound': self.declared_bound,
                'sample_count': self.sample_count,
                'passed': self.passed}


def _check_finite(x: ndarray, y: ndarray, X: ndarray, Y: ndarray, what: str) -> None:
    bad = ~(np.isfinite(X) & np.isfinite(Y))
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise MapEvaluationError(f'Map evaluation failure ({what})', (x[i], y[i]))


def validate_lift(lifted_map: LiftedAnnulusMap, window: Window, samples: int,
                  tol: float = TOL_LIFT) -> LiftValidationReport:
    """
    Check T-equivariance, inverse consistency and the horizontal bound on a samples x samples grid
    (endpoints included) of the window. The bound is only checked at points inside the map's band.
    """
    if samples < 1:
        raise ValueError('samples must be at least 1')
    x, y = window.grid(samples)
    X, Y = lifted_map(x, y)
    _check_finite(x, y, X, Y, 'forward')
    X1, Y1 = lifted_map(x + 1.0, y)
    _check_finite(x + 1.0, y, X1, Y1, 'forward')
    xi, yi = lifted_map.inverse_lift(X, Y)
    _check_finite(X, Y, xi, yi, 'inverse')

    equivariance = np.maximum(np.abs(X1 - X - 1.0), np.abs(Y1 - Y))
    inverse = np.maximum(np.abs(xi - x), np.abs(yi - y))
    in_band = (y >= lifted_map.band[0]) & (y <= lifted_map.band[1])
    observed = float(np.max(np.abs(X - x)[in_band])) if in_band.any() else 0.0

    return LiftValidationReport(max_equivariance_error=float(equivariance.max()),
                                max_inverse_error=float(inverse.max()),
                                observed_bound=observed,
                                declared_bound=lifted_map.horizontal_bound,
                                sample_count=int(x.size),
                                tol=tol)


@dataclass
class OrbitSegment:
    start: CoverPoint
    n: int
    displacement: float
    x_trace: ndarray = field(repr=False)
    y_trace: ndarray = field(repr=False)
    escaped: bool = False
    steps_completed: int = 0

    @property
    def end(self) -> CoverPoint:
        return CoverPoint(float(self.x_trace[-1]), float(self.y_trace[-1]))

    def contained_in(self, y_lo: float, y_hi: float) -> bool:
        return bool(np.all((self.y_trace >= y_lo) & (self.y_trace <= y_hi)))


def displacement(lifted_map: LiftedAnnulusMap, point: CoverPoint, n: int,
                 max_horizon: int = MAX_HORIZON, overflow_guard: float = OVERFLOW_GUARD) -> OrbitSegment:
    """
    p1(f^n(z)) - p1(z) for signed n, with the full orbit trace. An orbit leaving |x|, |y| <= overflow_guard
    is flagged as escaped and its partial trace returned.
    """
    if abs(n) > max_horizon:
        raise ValueError(f'|n| = {abs(n)} exceeds the configured max horizon {max_horizon}')
    direction = 1 if n >= 0 else -1
    xs = np.empty(abs(n) + 1)
    ys = np.empty(abs(n) + 1)
    xs[0], ys[0] = point.x, point.y
    x, y = np.asarray(point.x, dtype=float), np.asarray(point.y, dtype=float)
    escaped = False
    steps = 0
    for k in range(1, abs(n) + 1):
        x, y = lifted_map.step(x, y, direction)
        if not (np.isfinite(x) and np.isfinite(y)) or abs(x) > overflow_guard or abs(y) > overflow_guard:
            escaped = True
            break
        xs[k], ys[k] = x, y
        steps = k
    xs, ys = xs[:steps + 1], ys[:steps + 1]
    return OrbitSegment(start=point, n=n, displacement=float(xs[-1] - xs[0]), x_trace=xs, y_trace=ys,
                        escaped=escaped, steps_completed=steps)


def rho_n(lifted_map: LiftedAnnulusMap, z: AnnulusPoint, n: int, **kwargs: Any) -> float:
    """Average lifted angular displacement over n iterates, in turns per iterate."""
    if n < 1:
        raise ValueError('n must be >= 1')
    segment = displacement(lifted_map, z.lift(), n, **kwargs)
    if segment.escaped:
        raise OrbitEscapeError(f'Orbit of {z} escaped after {segment.steps_completed} steps', segment)
    return segment.displacement / n


def rho_n_cocycle_error(lifted_map: LiftedAnnulusMap, point: CoverPoint, n: int, m: int) -> float:
    """|(n+m) rho_{n+m}(z) - n rho_n(z) - m rho_m(f^n z)|"""
    whole = displacement(lifted_map, point, n + m).displacement
    head = displacement(lifted_map, point, n)
    tail = displacement(lifted_map, head.end, m).displacement
    return abs(whole - head.displacement - tail)


class PlaneChart:
    """
    Log-polar identification of the punctured plane with the annulus: (r, phi) -> (phi / 2pi, -log_b r).

    The origin sits at the end y -> +inf. The chart preserves orientation, so a plane rotation by c turns
    is an x-translation by c; local values at the origin are therefore reported in plane orientation.
    """

    def __init__(self, log_base: float = math.e):
        if log_base <= 1:
            raise ValueError('log_base must exceed 1')
        self.log_base = float(log_base)
        self._log_b = math.log(self.log_base)

    def to_annulus(self, px: Any, py: Any) -> Tuple[ndarray, ndarray]:
        px = np.asarray(px, dtype=float)
        py = np.asarray(py, dtype=float)
        r = np.hypot(px, py)
        if np.any(r == 0):
            raise MapEvaluationError('The origin has no annulus coordinates')
        theta = np.mod(np.arctan2(py, px) / (2 * np.pi), 1.0)
        return np.where(theta >= 1.0, 0.0, theta), -np.log(r) / self._log_b

    def to_plane(self, theta: Any, y: Any) -> Tuple[ndarray, ndarray]:
        r = np.power(self.log_base, -np.asarray(y, dtype=float))
        phi = 2 * np.pi * np.asarray(theta, dtype=float)
        return r * np.cos(phi), r * np.sin(phi)

    def radius_to_level(self, r: float) -> float:
        return -math.log(r) / self._log_b

    def level_to_radius(self, y: float) -> float:
        return float(self.log_base ** (-y))

    def lift_linear(self, modulus: float, angle_turns: float, name: str = 'plane_linear') -> LiftedAnnulusMap:
        """Lift of the complex-linear map z -> modulus * e^{2 pi i angle} z."""
        if modulus <= 0:
            raise ValueError('modulus must be positive')
        dy = -math.log(modulus) / self._log_b

        def forward(x: ndarray, y: ndarray) -> Tuple[ndarray, ndarray]:
            return x + angle_turns, y + dy

        def inverse(x: ndarray, y: ndarray) -> Tuple[ndarray, ndarray]:
            return x - angle_turns, y - dy

        return LiftedAnnulusMap(name, forward, inverse, abs(angle_turns),
                                params={'modulus': modulus, 'angle_turns': angle_turns, 'log_base': self.log_base})

    def plane_map_to_lift(self, radial: Callable[[ndarray], ndarray], radial_inverse: Callable[[ndarray], ndarray],
                          angular: Callable[[ndarray], ndarray], horizontal_bound: float,
                          name: str = 'plane_polar') -> LiftedAnnulusMap:
        """
        Lift of a plane map fixing 0 given in polar form (r, phi) -> (radial(r), phi + 2 pi angular(r)).

        Args:
            radial: increasing homeomorphism of (0, inf) with radial(r) -> 0 as r -> 0
            radial_inverse: its inverse
            angular: rotation in turns at radius r, the lift of the angular part
            horizontal_bound: sup of |angular| over the radii in use
            name: map name
        """
        log_b = self._log_b

        def forward(x: ndarray, y: ndarray) -> Tuple[ndarray, ndarray]:
            r = np.exp(-y * log_b)
            return x + angular(r), -np.log(radial(r)) / log_b

        def inverse(x: ndarray, y: ndarray) -> Tuple[ndarray, ndarray]:
            r = radial_inverse(np.exp(-y * log_b))
            return x - angular(r), -np.log(r) / log_b

        return LiftedAnnulusMap(name, forward, inverse, float(horizontal_bound), params={'log_base': self.log_base})

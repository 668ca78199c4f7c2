"""Closed-form energy-optimal trajectories between control-zone boundaries.

Minimizing the quadratic control effort (1/2)*integral(u^2) for double-
integrator motion between known entry and exit conditions gives a control
input that is linear in time, hence a quadratic speed and a cubic position
law.  This module constructs that cubic from boundary data, evaluates and
inverts it, checks it against speed/acceleration bounds, and computes the
control cost.  Time is kept relative to the entry instant for numerical
conditioning; all public methods accept and return absolute times.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np


class InvalidHorizonError(ValueError):
    """Exit time does not lie strictly after the entry time."""


class NonMonotoneError(ValueError):
    """Operation requires a strictly forward-moving trajectory."""


class OutOfDomainError(ValueError):
    """Query time or position outside the trajectory's window."""


@dataclass(frozen=True)
class VehicleParams:
    """Per-vehicle actuation bounds and car-following parameters.

    accel bounds in m/s^2, speed bounds in m/s, headway in seconds,
    standstill_gap in meters; reaction_gain scales the perceived gap to the
    vehicle ahead (dimensionless).
    """

    u_min: float = -3.0
    u_max: float = 3.0
    v_min: float = 2.0
    v_max: float = 18.0
    headway: float = 1.0
    standstill_gap: float = 1.5
    reaction_gain: float = 1.0

    def __post_init__(self) -> None:
        if not self.u_min < 0 < self.u_max:
            raise ValueError("accel bounds must satisfy u_min < 0 < u_max")
        if not 0 < self.v_min < self.v_max:
            raise ValueError("speed bounds must satisfy 0 < v_min < v_max")
        if self.headway <= 0:
            raise ValueError("headway must be positive")
        if self.standstill_gap <= 0:
            raise ValueError("standstill_gap must be positive")
        if self.reaction_gain <= 0:
            raise ValueError("reaction_gain must be positive")

    def safe_distance(self, speed: float) -> float:
        """Minimum allowed gap to the vehicle ahead at a given own speed."""
        return self.standstill_gap + self.headway * speed


class TrajectorySample(NamedTuple):
    position: float
    speed: float
    accel: float


class BoundViolation(NamedTuple):
    bound: str  # "v_min" | "v_max" | "u_min" | "u_max"
    magnitude: float
    time: float


@dataclass(frozen=True)
class FeasibilityReport:
    """Exact speed/acceleration extrema of a trajectory against bounds."""

    speed_ok: bool
    accel_ok: bool
    min_speed: float
    max_speed: float
    min_accel: float
    max_accel: float
    worst_violation: Optional[BoundViolation]

    @property
    def ok(self) -> bool:
        return self.speed_ok and self.accel_ok


@dataclass(frozen=True)
class InverseFit:
    """Least-squares cubic fit of time as a function of position.

    A diagnostic/serialization companion to the exact numeric inverse: the
    true inverse of a cubic position law is generally not itself a cubic,
    so the worst sample residual is carried alongside the coefficients.
    Never use the fit for safety checks.
    """

    c3: float
    c2: float
    c1: float
    c0: float
    max_residual: float

    def time_at(self, position: float) -> float:
        return ((self.c3 * position + self.c2) * position + self.c1) * position + self.c0


_INVERT_TOL = 1e-12


@dataclass(frozen=True)
class CubicTrajectory:
    """Position law p(tau) = c3*tau^3 + c2*tau^2 + c1*tau + c0, tau = t - t0.

    Covers [t0, tf] and travels s_total meters; c0 is zero because position
    is measured from the control-zone entry.
    """

    c3: float
    c2: float
    c1: float
    c0: float
    t0: float
    tf: float
    s_total: float

    def __post_init__(self) -> None:
        if not self.tf > self.t0:
            raise InvalidHorizonError(f"tf={self.tf} must exceed t0={self.t0}")
        if self.s_total <= 0:
            raise ValueError("s_total must be positive")
        if abs(self.c0) > 1e-9:
            raise ValueError("entry position must be zero")
        T = self.tf - self.t0
        end = ((self.c3 * T + self.c2) * T + self.c1) * T + self.c0
        if abs(end - self.s_total) > max(1e-6, 1e-9 * self.s_total):
            raise ValueError(
                f"terminal position {end} inconsistent with s_total {self.s_total}"
            )

    # -- basic evaluation ----------------------------------------------------

    @property
    def duration(self) -> float:
        return self.tf - self.t0

    def _pva(self, tau: float) -> TrajectorySample:
        p = ((self.c3 * tau + self.c2) * tau + self.c1) * tau + self.c0
        v = (3.0 * self.c3 * tau + 2.0 * self.c2) * tau + self.c1
        a = 6.0 * self.c3 * tau + 2.0 * self.c2
        return TrajectorySample(p, v, a)

    def eval(self, t: float) -> TrajectorySample:
        """Position, speed and acceleration at absolute time t."""
        if t < self.t0 - 1e-9 or t > self.tf + 1e-9:
            raise OutOfDomainError(
                f"t={t} outside trajectory window [{self.t0}, {self.tf}]"
            )
        tau = min(max(t - self.t0, 0.0), self.duration)
        return self._pva(tau)

    def absolute_coefficients(self) -> tuple[float, float, float, float]:
        """Coefficients (a3, a2, a1, a0) of the same cubic in absolute time."""
        a = self.t0
        a3 = self.c3
        a2 = self.c2 - 3.0 * self.c3 * a
        a1 = self.c1 - 2.0 * self.c2 * a + 3.0 * self.c3 * a * a
        a0 = self.c0 - self.c1 * a + self.c2 * a * a - self.c3 * a**3
        return (a3, a2, a1, a0)

    # -- monotonicity and inversion -------------------------------------------

    @property
    def is_monotone(self) -> bool:
        """True when speed stays strictly positive over the whole window."""
        return self._min_speed() > 0.0

    def _min_speed(self) -> float:
        T = self.duration
        candidates = [self._pva(0.0).speed, self._pva(T).speed]
        if self.c3 != 0.0:
            vertex = -self.c2 / (3.0 * self.c3)
            if 0.0 < vertex < T:
                candidates.append(self._pva(vertex).speed)
        return min(candidates)

    def invert(self, position: float) -> float:
        """Absolute time at which the vehicle is at `position`.

        Safeguarded Newton iteration bracketed by bisection; the trajectory
        must be strictly forward-moving so the inverse is unique.
        """
        if not self.is_monotone:
            raise NonMonotoneError("cannot invert a non-monotone trajectory")
        if position < -1e-9 or position > self.s_total + 1e-9:
            raise OutOfDomainError(
                f"position {position} outside [0, {self.s_total}]"
            )
        position = min(max(position, 0.0), self.s_total)
        T = self.duration
        if position == 0.0:
            return self.t0
        if position == self.s_total:
            return self.tf
        c3, c2, c1 = self.c3, self.c2, self.c1
        step_tol = _INVERT_TOL * max(1.0, T)
        lo, hi = 0.0, T
        tau = T * position / self.s_total
        for _ in range(100):
            err = ((c3 * tau + c2) * tau + c1) * tau - position
            speed = (3.0 * c3 * tau + 2.0 * c2) * tau + c1
            if err > 0.0:
                hi = tau
            else:
                lo = tau
            if speed > 0.0:
                delta = err / speed
                if abs(delta) <= step_tol:
                    tau = min(max(tau - delta, 0.0), T)
                    break
                candidate = tau - delta
                tau = candidate if lo < candidate < hi else 0.5 * (lo + hi)
            else:
                tau = 0.5 * (lo + hi)
            if hi - lo <= step_tol:
                tau = 0.5 * (lo + hi)
                break
        return self.t0 + tau

    def inverse_cubic_fit(self, samples: int = 101) -> InverseFit:
        """Cubic-in-position least-squares fit of the inverted motion law."""
        if not self.is_monotone:
            raise NonMonotoneError("cannot fit the inverse of a non-monotone trajectory")
        positions = np.linspace(0.0, self.s_total, samples)
        times = np.array([self.invert(p) for p in positions])
        coeffs = np.polyfit(positions, times, deg=3)
        fitted = np.polyval(coeffs, positions)
        residual = float(np.max(np.abs(fitted - times)))
        c3, c2, c1, c0 = (float(c) for c in coeffs)
        return InverseFit(c3, c2, c1, c0, residual)

    # -- feasibility and cost --------------------------------------------------

    def feasibility(self, params: VehicleParams) -> FeasibilityReport:
        """Exact bound check: speed is quadratic (endpoint or interior vertex
        extrema), acceleration is linear (endpoint extrema)."""
        T = self.duration
        speed_pts = [(0.0, self._pva(0.0).speed), (T, self._pva(T).speed)]
        if self.c3 != 0.0:
            vertex = -self.c2 / (3.0 * self.c3)
            if 0.0 < vertex < T:
                speed_pts.append((vertex, self._pva(vertex).speed))
        accel_pts = [(0.0, self._pva(0.0).accel), (T, self._pva(T).accel)]

        t_vmin, min_speed = min(speed_pts, key=lambda kv: kv[1])
        t_vmax, max_speed = max(speed_pts, key=lambda kv: kv[1])
        t_umin, min_accel = min(accel_pts, key=lambda kv: kv[1])
        t_umax, max_accel = max(accel_pts, key=lambda kv: kv[1])

        violations = []
        if min_speed < params.v_min:
            violations.append(BoundViolation("v_min", params.v_min - min_speed, self.t0 + t_vmin))
        if max_speed > params.v_max:
            violations.append(BoundViolation("v_max", max_speed - params.v_max, self.t0 + t_vmax))
        if min_accel < params.u_min:
            violations.append(BoundViolation("u_min", params.u_min - min_accel, self.t0 + t_umin))
        if max_accel > params.u_max:
            violations.append(BoundViolation("u_max", max_accel - params.u_max, self.t0 + t_umax))

        speed_ok = params.v_min <= min_speed and max_speed <= params.v_max
        accel_ok = params.u_min <= min_accel and max_accel <= params.u_max
        worst = max(violations, key=lambda v: v.magnitude) if violations else None
        return FeasibilityReport(
            speed_ok, accel_ok, min_speed, max_speed, min_accel, max_accel, worst
        )

    def energy_cost(self) -> float:
        """Control cost (1/2)*integral(u^2) over the window, in closed form.

        With u(tau) = 6*c3*tau + 2*c2 the integrand is quadratic, so
        J = (1/2)*(12*c3^2*T^3 + 12*c3*c2*T^2 + 4*c2^2*T).
        """
        T = self.duration
        return 0.5 * (
            12.0 * self.c3**2 * T**3
            + 12.0 * self.c3 * self.c2 * T**2
            + 4.0 * self.c2**2 * T
        )


def solve_boundary(v0: float, s_total: float, t0: float, tf: float) -> CubicTrajectory:
    """Unique cubic meeting p(t0)=0, v(t0)=v0, p(tf)=s_total, u(tf)=0.

    Zero terminal acceleration is the free-terminal-speed closure for the
    quadratic-effort objective.  With T = tf - t0 the coefficients are
    c3 = (v0*T - s_total) / (2*T^3) and c2 = 3*(s_total - v0*T) / (2*T^2);
    when T equals s_total/v0 exactly, both vanish and the trajectory is the
    constant-speed line.  The result may violate monotonicity for extreme
    inputs; callers must reject it via `is_monotone` before inverting.
    """
    if tf <= t0:
        raise InvalidHorizonError(f"tf={tf} must exceed t0={t0}")
    if v0 <= 0:
        raise ValueError("entry speed must be positive")
    if s_total <= 0:
        raise ValueError("total distance must be positive")
    T = tf - t0
    c3 = (v0 * T - s_total) / (2.0 * T**3)
    c2 = 3.0 * (s_total - v0 * T) / (2.0 * T**2)
    return CubicTrajectory(c3, c2, v0, 0.0, t0, tf, s_total)

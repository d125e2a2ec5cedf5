"""Longitudinal load model and front/rear braking-force allocation."""
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class VehicleParams:
    """Bus body parameters.

    ``eta_t`` is the motor-to-wheel driveline efficiency.  ``r_t`` closes the
    top-speed kinematics (4th gear x final drive 10.92 at 4500 rpm -> 81.7 km/h).
    ``brake_mu`` and ``emergency_decel`` parameterise the rear-first braking policy.
    """

    M: float = 15000.0
    delta: float = 1.1
    g: float = 9.81
    f_r: float = 0.01
    C_d: float = 0.65
    rho_a: float = 1.2
    A_f: float = 7.5
    r_t: float = 0.526
    h_g: float = 1.2
    L: float = 5.5
    b: float = 2.6
    eta_t: float = 0.92
    brake_mu: float = 0.7
    emergency_decel: float = 3.0

    def __post_init__(self):
        checks = (
            (self.M > 0, "M must be positive"),
            (self.r_t > 0, "r_t must be positive"),
            (0 < self.eta_t <= 1, "eta_t must lie in (0, 1]"),
            (self.delta >= 1, "delta must be >= 1"),
            (0 <= self.b <= self.L, "b must lie in [0, L]"),
            (self.h_g > 0, "h_g must be positive"),
            (self.g > 0, "g must be positive"),
            (self.f_r >= 0 and self.C_d >= 0 and self.rho_a >= 0 and self.A_f >= 0, "resistance coefficients must be >= 0"),
            (self.brake_mu > 0, "brake_mu must be positive"),
        )
        for ok, msg in checks:
            if not ok:
                raise ValidationError(msg)

    @property
    def weight(self):
        return self.M * self.g


@dataclass(frozen=True)
class BrakeSplit:
    F_xF: float
    F_xR: float

    @property
    def total(self):
        return self.F_xF + self.F_xR


def road_load_force(v, grade, p):
    phi = np.arctan(grade)
    return p.weight * np.sin(phi) + p.weight * p.f_r * np.cos(phi) + 0.5 * p.rho_a * p.C_d * p.A_f * np.square(v)


def load_torque(v, grade, p):
    """Wheel torque of grade, rolling and aerodynamic resistance at steady speed."""
    return road_load_force(v, grade, p) * p.r_t


def required_wheel_torque(v, accel, grade, p):
    """Total wheel torque demand; negative values are braking demand."""
    return (p.delta * p.M * accel) * p.r_t + load_torque(v, grade, p)


def ideal_front_force(total_force, p):
    """Front share on the ideal (simultaneous-lock) curve for a given total force."""
    z = total_force / p.weight
    return z * p.weight * (p.b + z * p.h_g) / p.L


def ideal_rear_force(front_force, p):
    """Rear force on the ideal curve as a function of the front force."""
    w = p.weight
    return w / (2.0 * p.h_g) * (math.sqrt(p.b ** 2 + 4.0 * p.h_g * p.L * front_force / w) - p.b) - front_force


def rear_adhesion_limit(total_force, p):
    """Rear force the rear axle can carry at the deceleration implied by ``total_force``."""
    z = total_force / p.weight
    normal = p.weight * ((p.L - p.b) - z * p.h_g) / p.L
    return max(0.0, p.brake_mu * normal)


def is_emergency(decel, p):
    return decel >= p.emergency_decel


def split_braking(total_force, p, emergency, rear_capacity=math.inf):
    """Allocate a braking-force magnitude between the axles.

    Non-emergency demands go entirely to the (regenerable) rear axle while they
    stay below both ``rear_capacity`` and the rear adhesion limit; everything else
    follows the ideal curve.
    """
    if total_force < 0:
        raise ValueError("total_force is a magnitude and must be >= 0")
    if total_force == 0:
        return BrakeSplit(0.0, 0.0)
    threshold = min(rear_capacity, rear_adhesion_limit(total_force, p))
    if not emergency and total_force <= threshold:
        return BrakeSplit(0.0, float(total_force))
    front = ideal_front_force(total_force, p)
    front = min(max(front, 0.0), total_force)
    return BrakeSplit(float(front), float(total_force - front))


def split_braking_array(total_force, p, emergency, rear_capacity):
    """Vectorised :func:`split_braking`; returns ``(front, rear)`` arrays."""
    total = np.asarray(total_force, dtype=float)
    if np.any(total < 0):
        raise ValueError("total_force is a magnitude and must be >= 0")
    z = total / p.weight
    adhesion = np.maximum(0.0, p.brake_mu * p.weight * ((p.L - p.b) - z * p.h_g) / p.L)
    threshold = np.minimum(rear_capacity, adhesion)
    front = np.clip(z * p.weight * (p.b + z * p.h_g) / p.L, 0.0, total)
    rear_only = ~np.asarray(emergency, dtype=bool) & (total <= threshold)
    front = np.where(rear_only | (total == 0), 0.0, front)
    return front, total - front

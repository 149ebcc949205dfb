"""Reduced-space kinematics of two identical Dubins cars.

The reduced state ``(x, y, theta)`` places the pursuer at the origin with its
velocity along the +y axis; ``theta`` is the evader heading relative to the
pursuer, counted clockwise.  Both players move with unit speed and unit
minimum turn radius, so the only free parameter of the game is the capture
radius ``ell``.

Everything here is a pure function.  The ``*_xyz`` / ``*_nu`` helpers accept
scalars or numpy arrays and broadcast, which the barrier sampler relies on.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi
EPS_SW = 1e-9  # switch functions with |s| <= EPS_SW take the zero branch
_FOLD = 1e-15

ControlSet = frozenset
MINUS: ControlSet = frozenset({-1})
ZERO: ControlSet = frozenset({0})
PLUS: ControlSet = frozenset({1})
BANG: ControlSet = frozenset({-1, 1})
ANY: ControlSet = frozenset({-1, 0, 1})


def wrap_angle(theta):
    """Map an angle (or array of angles) into ``[0, 2*pi)``."""
    w = np.mod(theta, TWO_PI)
    w = np.where(w >= TWO_PI - _FOLD, 0.0, w)
    if np.ndim(w) == 0:
        return float(w)
    return w


def angle_diff(a, b):
    """Signed difference ``a - b`` reduced to ``[-pi, pi)``."""
    return np.mod(np.asarray(a) - b + math.pi, TWO_PI) - math.pi


def sinc(x):
    """``sin(x)/x`` with ``sinc(0) = 1``; Taylor series near zero."""
    x = np.asarray(x, dtype=float)
    x2 = x * x
    small = np.abs(x) < 1e-4
    series = 1.0 - x2 / 6.0 + x2 * x2 / 120.0 - x2 * x2 * x2 / 5040.0
    safe = np.where(small, 1.0, x)
    out = np.where(small, series, np.sin(safe) / safe)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class State:
    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])


@dataclass(frozen=True)
class Costate:
    """Barrier normal.  Not necessarily unit length."""

    nu_x: float
    nu_y: float
    nu_theta: float

    def __post_init__(self):
        for name in ("nu_x", "nu_y", "nu_theta"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.nu_x == 0.0 and self.nu_y == 0.0 and self.nu_theta == 0.0:
            raise ValueError("costate must be a nonzero vector")

    def as_array(self) -> np.ndarray:
        return np.array([self.nu_x, self.nu_y, self.nu_theta])


@dataclass(frozen=True)
class ControlPair:
    u: float
    v: float

    def __post_init__(self):
        for name in ("u", "v"):
            val = float(getattr(self, name))
            if not -1.0 <= val <= 1.0:
                raise ValueError(f"control {name}={val} outside [-1, 1]")
            object.__setattr__(self, name, val)


def dynamics_rhs(z: State, c: ControlPair) -> tuple[float, float, float]:
    """Forward-time velocity ``(dx/dt, dy/dt, dtheta/dt)``."""
    u, v = c.u, c.v
    return (
        -u * z.y + math.sin(z.theta),
        -1.0 + u * z.x + math.cos(z.theta),
        v - u,
    )


def adjoint_rhs(z: State, nu: Costate, c: ControlPair) -> tuple[float, float, float]:
    """Forward-time costate derivative along a path with controls ``c``."""
    return (
        -c.u * nu.nu_y,
        c.u * nu.nu_x,
        -nu.nu_x * math.cos(z.theta) + nu.nu_y * math.sin(z.theta),
    )


def flow_xyz(tau, x, y, theta, u, v):
    """Closed-form state ``tau`` time units before reaching ``(x, y, theta)``.

    Valid for any real ``tau``: a negative value propagates forward in time.
    The returned angle is not wrapped.
    """
    ut = u * tau
    cu, su = np.cos(ut), np.sin(ut)
    half_v = sinc(v * tau / 2.0)
    phase = theta + (u - v / 2.0) * tau
    xr = x * cu + y * su + u * tau * tau / 2.0 * sinc(ut / 2.0) ** 2 - tau * half_v * np.sin(phase)
    yr = y * cu - x * su + tau * sinc(ut) - tau * half_v * np.cos(phase)
    return xr, yr, theta + (u - v) * tau


def flow_nu(tau, theta, nu_x, nu_y, nu_theta, u, v):
    """Closed-form costate at retrograde time ``tau``.

    ``theta`` is the terminal heading, i.e. the one paired with the terminal
    costate ``(nu_x, nu_y, nu_theta)``.
    """
    ut = u * tau
    cu, su = np.cos(ut), np.sin(ut)
    shifted = theta - v * tau / 2.0
    nt = nu_theta + tau * sinc(v * tau / 2.0) * (nu_x * np.cos(shifted) - nu_y * np.sin(shifted))
    return nu_x * cu + nu_y * su, nu_y * cu - nu_x * su, nt


def flow_state(tau: float, z_tilde: State, c: ControlPair) -> State:
    """State at ``t_f - tau`` given the terminal state ``z_tilde`` and constant controls."""
    if tau < 0:
        raise ValueError("retrograde time must be non-negative")
    return State(*flow_xyz(tau, z_tilde.x, z_tilde.y, z_tilde.theta, c.u, c.v))


def propagate(z: State, c: ControlPair, dt: float) -> State:
    """Exact forward propagation over ``dt`` with constant controls."""
    return State(*flow_xyz(-dt, z.x, z.y, z.theta, c.u, c.v))


def flow_costate(tau: float, z_tilde: State, nu_tilde: Costate, c: ControlPair) -> Costate:
    if tau < 0:
        raise ValueError("retrograde time must be non-negative")
    return Costate(*flow_nu(tau, z_tilde.theta, nu_tilde.nu_x, nu_tilde.nu_y,
                            nu_tilde.nu_theta, c.u, c.v))


def switch_values(z: State, nu: Costate) -> tuple[float, float]:
    """Pursuer and evader switch functions ``(s_P, s_E)``."""
    s_p = z.y * nu.nu_x - z.x * nu.nu_y + nu.nu_theta
    return s_p, nu.nu_theta


def main_equation_residual(x, y, theta, nu_x, nu_y, nu_theta):
    """``min_u max_v <nu, f(z, u, v)>`` in closed form (array friendly).

    The Hamiltonian is bilinear and separable in ``u`` and ``v``, so the
    saddle value is ``-|s_P| + |s_E|`` plus the control-free drift term.
    """
    s_p = y * nu_x - x * nu_y + nu_theta
    return -np.abs(s_p) + np.abs(nu_theta) + nu_x * np.sin(theta) + nu_y * np.cos(theta) - nu_y


def _sign_set(value: float, eps: float) -> ControlSet | None:
    if value > eps:
        return PLUS
    if value < -eps:
        return MINUS
    return None


def candidate_controls(z: State, nu: Costate, eps: float = EPS_SW) -> tuple[ControlSet, ControlSet]:
    """Candidate optimal control sets from the switch functions.

    Zero switch functions are resolved with the left-continuity rule; when
    that rule leaves the value undetermined the whole set ``{-1, 0, 1}`` is
    returned.
    """
    s_p, s_e = switch_values(z, nu)
    sin_t, cos_t = math.sin(z.theta), math.cos(z.theta)

    u_set = _sign_set(s_p, eps)
    if u_set is None:
        u_set = _sign_set(nu.nu_x, eps)
    if u_set is None:
        u_set = ZERO if nu.nu_y < -eps else ANY

    v_set = _sign_set(s_e, eps)
    if v_set is None:
        v_set = _sign_set(nu.nu_x * cos_t - nu.nu_y * sin_t, eps)
    if v_set is None:
        v_set = ZERO if nu.nu_x * sin_t < -nu.nu_y * cos_t - eps else ANY
    return u_set, v_set


def radial_distance(z: State) -> float:
    return math.hypot(z.x, z.y)


def reflect(z: State) -> State:
    """Mirror symmetry ``(x, y, theta) -> (-x, y, 2*pi - theta)``."""
    return State(-z.x, z.y, TWO_PI - z.theta)

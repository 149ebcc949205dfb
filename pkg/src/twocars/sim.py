"""Forward simulation, semipermeability audits and a brute-force game oracle.

The oracle is deliberately independent of the barrier construction: it
plays the game on a coarse grid of piecewise-constant controls and reads the
outcome off the minimum distance between the cars.  It is what the analytic
side of a probe state is checked against.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import barrier as bar
from . import classify as cls
from .barrier import BarrierModel, Family, PieceId, SlicePoint
from .errors import BudgetExceeded, InsideCapture, NotOnBarrier, OutOfChart, PolicyRange
from .kinematics import (
    ControlPair, Costate, State, TWO_PI, dynamics_rhs, main_equation_residual, radial_distance,
    sinc,
)

Policy = Callable[[State], float]

CAPTURE_TIME_RES = 1e-10
DEFAULT_BUDGET = 9 ** 6


class Termination(str, enum.Enum):
    CAPTURED = "captured"
    HORIZON = "horizon"
    LEFT_LAYER = "left_layer"


@dataclass
class Trajectory:
    times: list[float] = field(default_factory=list)
    states: list[State] = field(default_factory=list)
    termination: Termination = Termination.HORIZON
    t_end: float = 0.0

    @property
    def samples(self) -> list[tuple[float, State]]:
        return list(zip(self.times, self.states))


class Outcome(str, enum.Enum):
    CAPTURE = "capture"
    ESCAPE = "escape"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class OracleVerdict:
    outcome: Outcome
    horizon: float
    min_distance: float
    control_grid: str


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------

def constant(value: float) -> Policy:
    return lambda z: value


def _checked(policy: Policy, z: State, who: str) -> float:
    val = float(policy(z))
    if not (math.isfinite(val) and -1.0 <= val <= 1.0):
        raise PolicyRange(f"{who} policy returned {val} at {z}")
    return val


def rk4_step(z: State, c: ControlPair, dt: float) -> State:
    def f(x, y, th):
        return np.array(dynamics_rhs(State(x, y, th), c))

    s = np.array([z.x, z.y, z.theta])
    k1 = f(*s)
    k2 = f(*(s + dt / 2 * k1))
    k3 = f(*(s + dt / 2 * k2))
    k4 = f(*(s + dt * k3))
    return State(*(s + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)))


def integrate(
    z0: State,
    u_policy: Policy,
    v_policy: Policy,
    dt: float,
    t_max: float,
    ell: float,
    monitor: Optional[Callable[[State], bool]] = None,
) -> Trajectory:
    """Fixed-step RK4 with controls held over each step.

    Capture (``r <= ell``) is located between accepted steps by bisection on
    the step length.  ``monitor`` may stop the run early by returning False,
    which ends it with :attr:`Termination.LEFT_LAYER`.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    traj = Trajectory([0.0], [z0])
    if radial_distance(z0) <= ell:
        traj.termination, traj.t_end = Termination.CAPTURED, 0.0
        return traj
    t, z = 0.0, z0
    n_steps = int(math.ceil(t_max / dt - 1e-12))
    for k in range(n_steps):
        if monitor is not None and not monitor(z):
            traj.termination, traj.t_end = Termination.LEFT_LAYER, t
            return traj
        h = min(dt, t_max - t)
        c = ControlPair(_checked(u_policy, z, "pursuer"), _checked(v_policy, z, "evader"))
        z_new = rk4_step(z, c, h)
        if radial_distance(z_new) <= ell:
            lo, hi = 0.0, h
            while hi - lo > CAPTURE_TIME_RES:
                mid = 0.5 * (lo + hi)
                if radial_distance(rk4_step(z, c, mid)) <= ell:
                    hi = mid
                else:
                    lo = mid
            z_cap = rk4_step(z, c, hi)
            traj.times.append(t + hi)
            traj.states.append(z_cap)
            traj.termination, traj.t_end = Termination.CAPTURED, t + hi
            return traj
        t = (k + 1) * dt if k + 1 < n_steps else t_max
        z = z_new
        traj.times.append(t)
        traj.states.append(z)
    traj.termination, traj.t_end = Termination.HORIZON, t
    return traj


# ---------------------------------------------------------------------------
# Audits
# ---------------------------------------------------------------------------

def semipermeability_residual(z: State, nu: Costate) -> float:
    """``min_u max_v <nu, f(z, u, v)>``; zero on a semipermeable surface."""
    return float(main_equation_residual(z.x, z.y, z.theta, nu.nu_x, nu.nu_y, nu.nu_theta))


def residual_audit(model: BarrierModel, n_vartheta: int = 100, n_tau: int = 100,
                   rng: Optional[np.random.Generator] = None) -> dict[str, tuple[float, int]]:
    """Worst main-equation residual per piece over sampled parameters."""
    out = {}
    for family in (*bar.SURFACES, *bar.LINES):
        for side in (1, -1):
            k = n_tau if family in bar.SURFACES else 1
            tau, vt = bar.sample_params(model, family, n_vartheta, k, rng)
            x, y, th = bar.piece_xyz(model.ell, family, side, tau, vt)
            nu = bar.piece_normal(model.ell, family, side, tau, vt)
            res = np.abs(main_equation_residual(x, y, th, *nu))
            out[str(PieceId(family, side))] = (float(res.max()), int(res.size))
    return out


# ---------------------------------------------------------------------------
# Game oracle
# ---------------------------------------------------------------------------

def _stage_coefficients(vals: np.ndarray, stage_dt: float, substeps: int):
    """Per control pair and substep, the terms of the constant-control flow.

    Forward flow over time ``t`` (``tau = -t``) reads
    ``x' = x cos(u tau) + y sin(u tau) + a - c sin(theta + phi)`` and
    ``y' = y cos(u tau) - x sin(u tau) + b - c cos(theta + phi)``.
    """
    u, v = np.meshgrid(vals, vals, indexing="ij")
    u, v = u.reshape(-1, 1), v.reshape(-1, 1)
    tau = -stage_dt * np.arange(1, substeps + 1)[None, :] / substeps
    ut = u * tau
    a = u * tau * tau / 2.0 * sinc(ut / 2.0) ** 2
    b = tau * sinc(ut)
    c = tau * sinc(v * tau / 2.0)
    phi = (u - v / 2.0) * tau
    turn = ((u - v) * tau)[:, -1]
    return np.cos(ut), np.sin(ut), a, b, c, np.cos(phi), np.sin(phi), np.cos(turn), np.sin(turn)


def game_oracle(
    z0: State,
    ell: float,
    stages: int = 6,
    values: Sequence[float] = (-1.0, 0.0, 1.0),
    stage_dt: float = 0.6,
    substeps: int = 16,
    budget: int = DEFAULT_BUDGET,
) -> OracleVerdict:
    """Exhaustive minimax over piecewise-constant controls.

    The payoff is the smallest distance between the cars over the horizon
    ``stages * stage_dt``, tracked on ``substeps`` points per stage with the
    exact constant-control flow.  The whole game tree is expanded once and
    reduced in two orders:

    * pursuer first in every stage, evader answering with knowledge of the
      pursuer's value.  If even this informed evader is caught, the verdict
      is Capture.
    * evader first in every stage.  If this evader keeps the distance above
      ``ell`` against every informed pursuer, the verdict is Escape.

    Anything else is Undecided.
    """
    vals = np.asarray(values, dtype=float)
    k = vals.size
    leaves = (k * k) ** stages
    if stages > 6 or k > 3 or leaves > budget:
        raise BudgetExceeded(f"{leaves} leaves exceed the oracle budget of {budget}")
    cu, su, a, b, c, cphi, sphi, cturn, sturn = _stage_coefficients(vals, stage_dt, substeps)
    xs = np.array([z0.x])
    ys = np.array([z0.y])
    st = np.array([math.sin(z0.theta)])
    ct = np.array([math.cos(z0.theta)])
    d2 = xs * xs + ys * ys
    for _ in range(stages):
        x, y = xs[:, None, None], ys[:, None, None]
        s, co = st[:, None, None], ct[:, None, None]
        sin_p = s * cphi + co * sphi
        cos_p = co * cphi - s * sphi
        px = x * cu + y * su + a - c * sin_p
        py = y * cu - x * su + b - c * cos_p
        d2 = np.minimum(d2[:, None], (px * px + py * py).min(axis=2)).ravel()
        xs, ys = px[:, :, -1].ravel(), py[:, :, -1].ravel()
        st, ct = (s[:, :, 0] * cturn + co[:, :, 0] * sturn).ravel(), (co[:, :, 0] * cturn - s[:, :, 0] * sturn).ravel()
    tree = np.sqrt(d2).reshape((k,) * (2 * stages))
    upper, lower = tree, tree
    for _ in range(stages):
        upper = upper.max(axis=-1).min(axis=-1)
        lower = lower.min(axis=-2).max(axis=-1)
    upper, lower = float(upper), float(lower)
    if upper <= ell:
        outcome, value = Outcome.CAPTURE, upper
    elif lower > ell:
        outcome, value = Outcome.ESCAPE, lower
    else:
        outcome, value = Outcome.UNDECIDED, upper
    grid = f"{stages} stages x {stage_dt:g}, values {sorted(set(vals.tolist()))}"
    return OracleVerdict(outcome, stages * stage_dt, value, grid)


# ---------------------------------------------------------------------------
# Probes
# ---------------------------------------------------------------------------

def emanation_controls(piece: PieceId, z: Optional[State] = None, model: Optional[BarrierModel] = None) -> ControlPair:
    """Single control pair under which a piece was grown.

    Used to resolve multi-valued optimal control sets during simulation.
    On the dispersal line the pair of the surface traced by the line is
    used; on ``BUP0`` both players copy ``sgn x`` (or go straight at
    ``x = 0``).
    """
    fam, s = piece.family, piece.side
    if fam is Family.DL:
        if z is None or model is None:
            raise ValueError("dispersal controls need the state and the model")
        branch, _ = bar.dispersal_branch(model, z.theta)
        return emanation_controls(branch)
    if fam is Family.BUP0:
        sgn = 0.0 if z is None else float((z.x > 0) - (z.x < 0))
        return ControlPair(sgn, sgn)
    if fam is Family.UL:
        return ControlPair(0.0, s)
    if fam is Family.TS:
        return ControlPair(s, s)
    return ControlPair(-s, s)


def chart_family(piece: PieceId) -> Optional[Family]:
    """Surface chart that measures drift away from a piece."""
    fam = piece.family
    if fam in bar.SURFACES:
        return fam
    if fam is Family.UL:
        return Family.TS
    if fam is Family.PL:
        return Family.P
    return None


class BarrierPlayer:
    """Feedback play along the barrier.

    Each state is classified and both players use the emanation pair of
    the matched piece.  The last classification is cached because the two
    policies and the monitor are queried with the same state.
    """

    def __init__(self, model: BarrierModel, cfg: cls.LayerConfig = cls.LayerConfig(),
                 evader_override: Optional[float] = None):
        self.model = model
        self.cfg = cfg
        self.evader_override = evader_override
        self._key: Optional[State] = None
        self._match: Optional[cls.PieceMatch] = None

    def match(self, z: State) -> Optional[cls.PieceMatch]:
        if z != self._key:
            try:
                self._match = cls.classify(self.model, z, self.cfg)
            except InsideCapture:
                self._match = None
            self._key = z
        return self._match

    def _pair(self, z: State) -> ControlPair:
        m = self.match(z)
        if m is None:
            raise NotOnBarrier(f"state {z} is not on the barrier layer")
        return emanation_controls(m.piece, z, self.model)

    def u(self, z: State) -> float:
        return self._pair(z).u

    def v(self, z: State) -> float:
        if self.evader_override is not None:
            return self.evader_override
        return self._pair(z).v

    def on_layer(self, z: State) -> bool:
        return self.match(z) is not None


def layer_offset(model: BarrierModel, piece: PieceId, z: State) -> Optional[float]:
    """``ell_piece(z) - ell`` in the chart attached to ``piece``, if it applies."""
    fam = chart_family(piece)
    if fam is None:
        return radial_distance(z) - model.ell if piece.family is not Family.DL else None
    try:
        return cls.piece_ell(fam, piece.side, z) - model.ell
    except OutOfChart:
        return None


def barrier_invariance_probe(
    model: BarrierModel,
    z: State,
    cfg: cls.LayerConfig = cls.LayerConfig(),
    t_probe: float = 0.5,
    dt: float = 1e-4,
    evader_override: Optional[float] = None,
) -> tuple[float, list[float]]:
    """Drift of ``ell_piece`` along a path that starts on the barrier.

    Both players follow the barrier feedback of :class:`BarrierPlayer`.
    With ``evader_override`` the evader instead holds that value, and the
    path is measured in the chart of the starting piece throughout.
    Returns the largest ``|ell_piece(z(t)) - ell|`` and the signed series
    ``ell_piece(z(t)) - ell`` over the samples where a chart applies.
    """
    start = cls.classify(model, z, cfg)
    if start is None:
        raise NotOnBarrier(f"state {z} is not on the barrier layer")
    player = BarrierPlayer(model, cfg, evader_override)
    if evader_override is None:
        traj = integrate(z, player.u, player.v, dt, t_probe, model.ell, monitor=player.on_layer)
        pieces = [player.match(zt) for zt in traj.states]
    else:
        pair = emanation_controls(start.piece, z, model)
        traj = integrate(z, constant(pair.u), constant(evader_override), dt, t_probe, model.ell)
        pieces = [start] * len(traj.states)
    series = []
    for zt, m in zip(traj.states, pieces):
        if m is None:
            continue
        off = layer_offset(model, m.piece, zt)
        if off is not None:
            series.append(off)
    drift = max((abs(d) for d in series), default=0.0)
    return drift, series


def normal_offset(point: SlicePoint, distance: float) -> State:
    """Move a slice point by ``distance`` along its in-slice unit normal."""
    nu = point.normal
    if nu is None:
        raise ValueError("slice point carries no normal")
    n = math.hypot(nu.nu_x, nu.nu_y)
    return State(point.z.x + distance * nu.nu_x / n, point.z.y + distance * nu.nu_y / n, point.z.theta)


def _inside(poly: np.ndarray, x: float, y: float) -> bool:
    from matplotlib.path import Path

    return bool(Path(poly).contains_point((x, y)))


def boundary_distance(poly: np.ndarray, x: float, y: float) -> float:
    """Euclidean distance from ``(x, y)`` to a closed polygon's boundary."""
    a = poly
    b = np.roll(poly, -1, axis=0)
    d = b - a
    dd = np.einsum("ij,ij->i", d, d)
    p = np.array([x, y])
    t = np.clip(np.einsum("ij,ij->i", p - a, d) / np.where(dd == 0.0, 1.0, dd), 0.0, 1.0)
    foot = a + t[:, None] * d
    return float(np.hypot(*(foot - p).T).min())


def analytic_side(model: BarrierModel, z: State, n: int = 400) -> Outcome:
    """Capture or Escape by point-in-polygon against the slice through ``z``."""
    if radial_distance(z) <= model.ell:
        return Outcome.CAPTURE
    poly = bar.slice_polygon(model, z.theta, n)
    return Outcome.CAPTURE if _inside(poly, z.x, z.y) else Outcome.ESCAPE


@dataclass(frozen=True)
class Probe:
    base: SlicePoint
    displacement: float
    state: State
    expected: Outcome
    clearance: float


def probe_set(model: BarrierModel, count: int, displacement: float,
              rng: np.random.Generator, n: int = 12, poly_n: int = 400) -> list[Probe]:
    """Random surface points pushed ``+-displacement`` along their normals.

    Returns ``2 * count`` probes.  Base points are drawn from the P, TS and
    TD rows of random slices.  A base point is redrawn when either displaced
    state lands inside the capture circle or ends up closer than
    ``displacement / 2`` to the slice boundary.  The second case happens
    next to a corner of the slice, where the normal of one sheet points
    at another sheet and the "displaced" state is in fact still on the
    barrier.
    """
    out: list[Probe] = []
    while len(out) < 2 * count:
        theta = float(rng.uniform(0.2, TWO_PI - 0.2))
        rows = [p for p in bar.sample_slice(model, theta, n) if p.piece.family in bar.SURFACES]
        base = rows[int(rng.integers(len(rows)))]
        poly = bar.slice_polygon(model, base.z.theta, poly_n)
        pair = []
        for d in (displacement, -displacement):
            z = normal_offset(base, d)
            gap = boundary_distance(poly, z.x, z.y)
            if radial_distance(z) <= model.ell * 1.02 or gap < abs(d) / 2:
                break
            side = Outcome.CAPTURE if _inside(poly, z.x, z.y) else Outcome.ESCAPE
            pair.append(Probe(base, d, z, side, gap))
        if len(pair) == 2:
            out += pair
    return out

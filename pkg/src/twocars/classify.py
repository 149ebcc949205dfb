"""Locating a state on the barrier and reading off the optimal controls.

Every surface piece can be written as ``{z in F : ell == ell_piece(z)}``
for an explicit function ``ell_piece`` and a frame set ``F`` that encodes
the parameter limits.  Because the barrier has measure zero, a state is
tested against a thin layer ``ell <= ell_piece(z) <= ell (1 + delta)``
instead, with the frame evaluated at the recovered radius.

Lines, the dispersal line and the BUP pieces have no chart of their own.
Their layer is the segment swept by the piece's point at this ``theta``
as the radius runs over ``[ell, ell (1 + delta)]``, thickened by
``ell * delta``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import barrier as bar
from .barrier import BarrierModel, Family, PieceId
from .errors import InsideCapture, NotOnBarrier, OutOfChart, OutOfDomain
from .kinematics import ANY, BANG, ControlSet, State, TWO_PI, angle_diff, radial_distance

PI = math.pi
MODEL_SWITCH = 1e-9  # rebuild the model at ell_piece(z) only beyond this offset
ON_PIECE = 1e-9  # relative layer width of the on-piece pass in classify

PRIORITY = (
    Family.DL, Family.BUP0, Family.BUP, Family.UL, Family.PL, Family.TS, Family.TD, Family.P,
)


@dataclass(frozen=True)
class LayerConfig:
    delta: float = 1e-3
    frame_slack: float = 1e-9

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not self.frame_slack >= 0:
            raise ValueError(f"frame_slack must be non-negative, got {self.frame_slack}")


@dataclass(frozen=True)
class PieceMatch:
    piece: PieceId
    ell_recovered: float
    layer_excess: float
    u_set: ControlSet
    v_set: ControlSet


# ---------------------------------------------------------------------------
# Charts
# ---------------------------------------------------------------------------

def _vartheta(family: Family, side: int, theta: float) -> float:
    return float(bar.vartheta_of(family, side, theta))


def _ts_parts(side, z):
    a = side * z.x - 1.0 + math.cos(z.theta)
    b = z.y - side * math.sin(z.theta)
    return a, b


def _td_parts(side, z):
    a = side * z.x + 1.0 + math.cos(z.theta)
    b = z.y - side * math.sin(z.theta)
    rad = a * a + b * b - 4.0
    if rad < 0.0:
        raise OutOfChart(f"TD{side:+d}: negative radicand {rad:.3e}")
    return a, b, math.sqrt(rad)


def piece_ell(family: Family, side: int, z: State) -> float:
    """Capture radius whose barrier piece passes through ``z``."""
    family = Family(family)
    if family is Family.P:
        h = z.theta / 2.0
        return -side * (z.x * math.sin(h) + z.y * math.cos(h))
    vt = _vartheta(family, side, z.theta)
    if family is Family.TS:
        a, b = _ts_parts(side, z)
        return -vt + math.hypot(a, b)
    if family is Family.TD:
        a, b, s = _td_parts(side, z)
        arg = (2.0 * a + b * s) / (a * a + b * b)
        if not -1.0 - 1e-12 <= arg <= 1.0 + 1e-12:
            raise OutOfChart(f"TD{side:+d}: arccos argument {arg} outside [-1, 1]")
        return s - vt + 2.0 * math.acos(min(1.0, max(-1.0, arg)))
    raise OutOfChart(f"{family.value} has no state-space chart")


def _lt(a, b, slack):
    return a < b + slack


def in_frame(model: BarrierModel, family: Family, side: int, z: State, slack: float = 1e-9) -> bool:
    """Frame-set membership for the barrier of ``model``.

    Strict inequalities are relaxed by ``slack``.  For the lines the test
    is the distance from ``(x, y)`` to the line's point at this ``theta``.
    """
    family = Family(family)
    vt = _vartheta(family, side, z.theta)
    lo, hi = bar.vartheta_range(model, family)
    if not (_lt(lo, vt, slack) and _lt(vt, hi, slack)) or vt == 0.0:
        return False
    vt_c = min(max(vt, lo), hi)
    try:
        if family is Family.P:
            top = bar.tau_max(model, family, vt_c)
            h = -z.x * math.cos(z.theta / 2.0) + z.y * math.sin(z.theta / 2.0)
            bound = 2.0 * math.cos(vt_c / 2.0) - 2.0 * math.cos(top + vt_c / 2.0)
            return _lt(0.0, h, slack) and _lt(h, bound, slack)
        if family is Family.TS:
            top = bar.tau_max(model, family, vt_c)
            a, b = _ts_parts(side, z)
            return _lt(0.0, a, slack) and _lt((model.ell + vt_c) * math.cos(top - vt_c), b, slack)
        if family is Family.TD:
            top = bar.tau_max(model, family, vt_c)
            a, b, s = _td_parts(side, z)
            gap = s - model.ell
            return (_lt(0.0, gap, slack) and _lt(gap, 2.0 * top - vt_c, slack)
                    and _lt(a * s, 2.0 * b, slack))
    except (OutOfChart, OutOfDomain):
        return False
    x, y, _ = bar.piece_xyz(model.ell, family, side, 0.0, vt_c)
    return math.hypot(z.x - float(x), z.y - float(y)) <= slack


# ---------------------------------------------------------------------------
# Layer tests
# ---------------------------------------------------------------------------

def _model_at(model: BarrierModel, ell: float) -> BarrierModel:
    if abs(ell - model.ell) <= MODEL_SWITCH:
        return model
    return bar.build_model(ell)


def _surface_layer(model, family, side, z, cfg) -> Optional[float]:
    try:
        ell_z = piece_ell(family, side, z)
    except OutOfChart:
        return None
    ell = model.ell
    if not (ell - cfg.frame_slack <= ell_z <= ell * (1.0 + cfg.delta) + cfg.frame_slack):
        return None
    try:
        local = _model_at(model, max(ell_z, ell))
    except Exception:  # a radius the solver cannot handle is simply not a match
        return None
    return ell_z if in_frame(local, family, side, z, cfg.frame_slack) else None


def _segment_layer(z: State, a, b, ell: float, delta: float) -> Optional[float]:
    """Radius recovered by projecting onto the segment from ``a`` (ell) to ``b``."""
    p = np.array([z.x, z.y])
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    d = b - a
    dd = float(d @ d)
    t = 0.0 if dd == 0.0 else min(1.0, max(0.0, float((p - a) @ d) / dd))
    if float(np.hypot(*(p - a - t * d))) > ell * delta:
        return None
    return ell * (1.0 + delta * t)


def _line_layer(model, family, side, z, cfg) -> Optional[float]:
    ell, delta = model.ell, cfg.delta
    if family is Family.BUP0:
        if abs(float(angle_diff(z.theta, 0.0))) > delta:
            return None
        r = radial_distance(z)
        if not ell * (1.0 - cfg.frame_slack) <= r <= ell * (1.0 + delta):
            return None
        return r
    if family is Family.DL:
        if not 0.0 < z.theta < TWO_PI:
            return None
        far = ell * (1.0 + delta)
        try:
            a = bar.dispersal_point(model, z.theta)
            b = bar.dispersal_point(bar.build_model(far), z.theta)
        except Exception:
            return None
        return _segment_layer(z, (a.x, a.y), (b.x, b.y), ell, delta)
    if family is Family.BUP:
        vt = z.theta
    else:
        vt = _vartheta(family, side, z.theta)
        lo, hi = bar.vartheta_range(model, family)
        if not (lo - cfg.frame_slack < vt <= hi + cfg.frame_slack) or vt == 0.0:
            return None
    a = bar.piece_xyz(ell, family, side, 0.0, vt)[:2]
    b = bar.piece_xyz(ell * (1.0 + delta), family, side, 0.0, vt)[:2]
    return _segment_layer(z, a, b, ell, delta)


def controls_for(piece: PieceId, z: Optional[State] = None) -> tuple[ControlSet, ControlSet]:
    """Optimal control sets on a barrier piece."""
    fam, s = piece.family, piece.side
    if fam is Family.DL:
        return BANG, BANG
    if fam is Family.BUP0:
        sgn = 0 if z is None else (z.x > 0) - (z.x < 0)
        if sgn == 0:
            return ANY, ANY
        return frozenset({sgn}), frozenset({sgn})
    v = frozenset({s})
    if fam is Family.UL:
        return frozenset({0}), v
    if fam is Family.TS:
        return frozenset({s}), v
    return frozenset({-s}), v


def classify(model: BarrierModel, z: State, cfg: LayerConfig = LayerConfig()) -> Optional[PieceMatch]:
    """Barrier piece whose layer contains ``z``.

    A first pass uses a layer of relative width ``ON_PIECE`` so that a state
    lying on a piece to rounding precision gets that piece, even when a
    line's wider tube also reaches it.  The second pass uses ``cfg.delta``.
    Within a pass the first family in ``PRIORITY`` wins.
    """
    if radial_distance(z) < model.ell * (1.0 - cfg.frame_slack):
        raise InsideCapture(f"state {z} lies inside the capture circle of radius {model.ell}")
    if cfg.delta > ON_PIECE:
        exact = _first_match(model, z, LayerConfig(ON_PIECE, cfg.frame_slack))
        if exact is not None:
            return exact
    return _first_match(model, z, cfg)


def _first_match(model: BarrierModel, z: State, cfg: LayerConfig) -> Optional[PieceMatch]:
    for family in PRIORITY:
        sides = (1, -1) if family.sided else (None,)
        for side in sides:
            if family in bar.SURFACES:
                ell_z = _surface_layer(model, family, side, z, cfg)
            else:
                ell_z = _line_layer(model, family, side, z, cfg)
            if ell_z is None:
                continue
            piece = PieceId(family, side)
            u_set, v_set = controls_for(piece, z)
            return PieceMatch(piece, ell_z, max(0.0, ell_z - model.ell), u_set, v_set)
    return None


def optimal_controls(model: BarrierModel, z: State, cfg: LayerConfig = LayerConfig()) -> tuple[ControlSet, ControlSet]:
    match = classify(model, z, cfg)
    if match is None:
        raise NotOnBarrier(f"state {z} is not within the barrier layer (delta={cfg.delta})")
    return match.u_set, match.v_set

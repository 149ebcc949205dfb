"""Assembly of the barrier of the game of two identical cars.

The barrier is glued from a handful of closed-form pieces, each grown in
retrograde time from the boundary of the usable part (BUP) of the capture
circle:

* ``P``  -- primary surface, controls ``(-side, side)`` from ``BUP_side``;
* ``PL`` -- line where ``P`` leaves its emanation after half a turn;
* ``UL`` -- universal line, controls ``(0, side)`` from ``(0, ell, 0)``;
* ``TS`` / ``TD`` -- tributaries of ``UL`` with equal / opposite turns;
* ``DL`` -- dispersal line where the two halves of the barrier meet.

Surfaces are parametrised by ``(tau, vartheta)``; the slice angle ``theta``
of a point is ``vartheta`` or ``2*pi - vartheta`` depending on the family
and side.  Each surface is valid only up to the retrograde time
``tau_max(vartheta)`` at which it runs into another piece.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Union

import numpy as np

from . import roots
from .errors import BuildError, OutOfDomain, RegimeMismatch, Unsupported
from .kinematics import Costate, State, TWO_PI, flow_nu, reflect, wrap_angle
from .roots import Regime, xi, eta

PI = math.pi
JUNCTION_TOL = 1e-8
# Where a branch ends with a square-root singularity (arccos reaching -1), a
# one-ulp error in the critical angle moves tau by ~sqrt(eps); those
# junctions are held to this looser bound instead.
SQRT_JUNCTION_TOL = 2.0 * math.sqrt(64.0 * np.finfo(float).eps)
PARAM_SLACK = 1e-12


class Family(str, enum.Enum):
    BUP0 = "BUP0"
    BUP = "BUP"
    P = "P"
    PL = "PL"
    UL = "UL"
    TS = "TS"
    TD = "TD"
    DL = "DL"

    @property
    def sided(self) -> bool:
        return self not in (Family.BUP0, Family.DL)


SURFACES = (Family.P, Family.TS, Family.TD)
LINES = (Family.PL, Family.UL)


@dataclass(frozen=True)
class PieceId:
    family: Family
    side: Optional[int] = None

    def __post_init__(self):
        fam = Family(self.family)
        object.__setattr__(self, "family", fam)
        if fam.sided:
            if self.side not in (-1, 1):
                raise ValueError(f"{fam.value} needs side -1 or +1, got {self.side}")
        elif self.side is not None:
            raise ValueError(f"{fam.value} carries no side")

    def mirrored(self) -> "PieceId":
        return self if self.side is None else PieceId(self.family, -self.side)

    def __str__(self):
        if self.side is None:
            return self.family.value
        return f"{self.family.value}{self.side:+d}"


@dataclass(frozen=True)
class SurfaceParams:
    tau: float
    vartheta: float


Params = Union[SurfaceParams, float]


@dataclass(frozen=True)
class BarrierModel:
    ell: float
    regime: Regime
    theta_J: float
    ell_J: float
    theta1: float
    theta2: float
    theta12: float
    theta21: float
    w: Optional[float] = None
    m: Optional[float] = None
    n: Optional[float] = None


@dataclass(frozen=True)
class SlicePoint:
    z: State
    piece: PieceId
    params: SurfaceParams
    normal: Optional[Costate] = field(default=None)


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def build_model(ell: float) -> BarrierModel:
    """All radius-dependent constants, with the branch junctions checked."""
    ell = float(ell)
    regime = roots.regime_of(ell)
    theta_j, ell_j = roots.junction_constants()
    theta1, theta2 = roots.critical_angles(ell)
    w = m = n = None
    if regime is Regime.SMALL:
        w = theta1
    elif regime is Regime.LARGE:
        m, n = theta1, theta2
    if regime is Regime.LARGE:
        theta12, theta21 = theta2, theta1
    else:
        theta12, theta21 = theta1, theta2
    model = BarrierModel(ell, regime, theta_j, ell_j, theta1, theta2, theta12, theta21, w, m, n)
    _check_junctions(model)
    return model


def _check_junctions(model: BarrierModel) -> None:
    for fam, vt, left, right, tol in junctions(model):
        a = _tau_max_branch(model, fam, vt, left)
        b = _tau_max_branch(model, fam, vt, right)
        if not abs(a - b) <= tol:
            raise BuildError(
                f"tau_max of {fam.value} jumps by {abs(a - b):.3e} at vartheta={vt} "
                f"(ell={model.ell})")


def junctions(model: BarrierModel):
    """``(family, vartheta, left_branch, right_branch, tol)`` for each junction."""
    t1, t2 = model.theta1, model.theta2
    tight, loose = JUNCTION_TOL, SQRT_JUNCTION_TOL
    if model.regime is Regime.SMALL:
        return [
            (Family.P, t1, 1, 2, tight), (Family.P, t2, 2, 3, tight),
            (Family.TD, t1, 1, 2, tight), (Family.TD, t2, 2, 3, tight),
        ]
    if model.regime is Regime.MEDIUM:
        # Inside the guard band ell is off ell_J by up to MEDIUM_GUARD and the
        # square-root junction moves by about sqrt(|ell - ell_J|).
        loose += 2.0 * math.sqrt(abs(model.ell - model.ell_J))
        return [(Family.P, t1, 1, 3, loose), (Family.TD, t1, 1, 3, tight)]
    return [
        (Family.P, t1, 1, 3, loose), (Family.TS, t1, 1, 2, tight),
        (Family.TD, t2, 1, 3, tight), (Family.TD, TWO_PI - t2, 3, 4, tight),
    ]


def tau_max_branch(model: BarrierModel, family: Family, vartheta: float, branch: int) -> float:
    """One closed-form branch of ``tau_max``, evaluated without range checks."""
    return _tau_max_branch(model, Family(family), float(vartheta), branch)


# ---------------------------------------------------------------------------
# Maximal retrograde times
# ---------------------------------------------------------------------------

@lru_cache(maxsize=4096)
def _p(ell: float, vartheta: float) -> float:
    return roots.p_root(ell, vartheta).value


@lru_cache(maxsize=4096)
def _q(ell: float, vartheta: float) -> float:
    return roots.q_root(ell, vartheta).value


def clear_caches() -> None:
    """Forget cached models and roots, e.g. after changing the solver tolerance."""
    build_model.cache_clear()
    _p.cache_clear()
    _q.cache_clear()


def _clip_unit(a: float) -> float:
    return min(1.0, max(-1.0, a))


def _ts_tau_from_p_cut(ell: float, vt: float) -> float:
    """Retrograde time on ``TS`` at its crossing with the opposite ``P``."""
    return vt / 2.0 + math.acos(_clip_unit((2.0 * math.sin(vt / 2.0) - ell) / (ell + vt)))


def _p_tau_from_ts_cut(ell: float, vt: float) -> float:
    """Retrograde time on ``P`` at its crossing with the opposite ``TS``.

    This is ``-vt/2 + acos(cos(vt/2) - r/2)`` with
    ``r = sqrt((ell + vt)^2 - (ell - 2 sin(vt/2))^2)``.  The argument equals
    ``-1 + delta`` where ``delta`` is proportional to minus the ``m``
    equation, so it reaches ``-1`` exactly at ``m`` (or ``theta_J``).  The
    arcsine form below avoids the square-root loss of arccos near ``-1``.
    """
    c = math.cos(vt / 2.0)
    r = roots.safe_sqrt((ell + vt) ** 2 - (ell - 2.0 * math.sin(vt / 2.0)) ** 2)
    delta = -float(roots.m_equation(ell, vt)) / (2.0 * (2.0 + 2.0 * c + r))
    if delta > 1.0:
        return -vt / 2.0 + math.acos(_clip_unit(c - 0.5 * r))
    return -vt / 2.0 + PI - 2.0 * math.asin(math.sqrt(max(delta, 0.0) / 2.0))


def _p_tau_from_td_cut(theta2: float, vt: float) -> float:
    """Retrograde time on ``P`` at its crossing with the opposite ``TD``.

    The arccos argument is ``2 cos(vt/2) - sqrt((ell + w)^2 - ell^2 + 4)/2``,
    which equals ``-1 + delta`` with ``delta = 2 (cos(vt/2) - cos(theta2/2))``
    because of how ``theta2`` is defined.  Writing ``acos(-1 + delta)`` as
    ``pi - 2 asin(sqrt(delta/2))`` keeps full precision where ``vt`` is close
    to ``theta2`` and arccos would lose half the digits.
    """
    delta = -4.0 * math.sin((vt + theta2) / 4.0) * math.sin((vt - theta2) / 4.0)
    return -vt / 2.0 + PI - 2.0 * math.asin(math.sqrt(max(delta, 0.0) / 2.0))


def _ts_tau_from_td_cut(ell: float, vt: float, q: float) -> float:
    return PI - math.asin(_clip_unit(((ell + vt) ** 2 - (ell + q) ** 2) / (4.0 * (ell + vt))))


def _td_tau_prime_from_td_cut(ell: float, vt: float, p: float) -> float:
    r = roots.safe_sqrt((xi(ell, p) - 4.0 * math.cos(vt / 2.0)) ** 2 + eta(ell, p) ** 2 - 4.0)
    return PI - (ell + vt) / 2.0 + 0.5 * r


def _tau_max_branch(model: BarrierModel, family: Family, vt: float, branch: int) -> float:
    ell = model.ell
    if family is Family.P:
        if branch == 1:
            return _p_tau_from_ts_cut(ell, vt)
        if branch == 2:
            return _p_tau_from_td_cut(model.theta2, vt)
        return PI - vt / 2.0
    if family is Family.TS:
        if branch == 1:
            return _ts_tau_from_p_cut(ell, vt)
        return _ts_tau_from_td_cut(ell, vt, _q(ell, vt))
    # TD
    if branch == 1:
        return vt
    if branch == 2:
        return (model.w + vt) / 2.0
    if branch == 3:
        return (_p_known(model, vt) + vt) / 2.0
    return (_q(ell, TWO_PI - vt) + vt) / 2.0


def _p_known(model: BarrierModel, vt: float) -> float:
    """``p`` with its limits at the window ends taken from the model.

    Inside the guard band around ``ell_J`` the model is Medium although
    ``ell`` differs from ``ell_J`` by rounding, and the ``p`` equation need
    not have a root exactly at ``theta2``.  The limit values do not depend
    on that.
    """
    if vt == model.theta2:
        return model.w if model.regime is Regime.SMALL else model.theta2
    if vt == TWO_PI - model.theta2 and model.regime is not Regime.LARGE:
        return 0.0
    return _p(model.ell, vt)


def vartheta_range(model: BarrierModel, family: Family) -> tuple[float, float]:
    """Closure of the ``vartheta`` interval on which a piece exists."""
    family = Family(family)
    if family in (Family.P, Family.BUP, Family.BUP0):
        return 0.0, TWO_PI
    if family is Family.PL:
        return model.theta21, TWO_PI
    if family in (Family.UL, Family.TS):
        return 0.0, model.theta12
    if family is Family.TD:
        return 0.0, TWO_PI - model.theta21
    raise Unsupported(f"{family.value} has no vartheta range")


def _require_range(model, family, vt, open_lo=True, open_hi=False):
    lo, hi = vartheta_range(model, family)
    bad_lo = vt <= lo if open_lo else vt < lo - PARAM_SLACK
    bad_hi = vt >= hi if open_hi else vt > hi + PARAM_SLACK
    if bad_lo or bad_hi or not math.isfinite(vt):
        raise OutOfDomain(
            f"{family.value}: vartheta={vt} outside ({lo}, {hi}{')' if open_hi else ']'}")


def tau_max(model: BarrierModel, family: Family, vartheta: float) -> float:
    """Largest retrograde time of the valid part of a surface at ``vartheta``."""
    family = Family(family)
    vt = float(vartheta)
    if family not in SURFACES:
        raise Unsupported(f"tau_max is defined for P, TS, TD, not {family.value}")
    _require_range(model, family, vt, open_hi=family is Family.P)
    t1, t2 = model.theta1, model.theta2
    small = model.regime is Regime.SMALL
    large = model.regime is Regime.LARGE
    if family is Family.P:
        if vt <= t1:
            return _tau_max_branch(model, family, vt, 1)
        if small and vt <= model.theta21:
            return _tau_max_branch(model, family, vt, 2)
        return _tau_max_branch(model, family, vt, 3)
    if family is Family.TS:
        return _tau_max_branch(model, family, vt, 1 if vt <= t1 else 2)
    if vt <= model.theta12:
        return vt
    if small and vt <= t2:
        return _tau_max_branch(model, family, vt, 2)
    if vt <= TWO_PI - t2 or not large:
        return _tau_max_branch(model, family, min(vt, TWO_PI - t2), 3)
    return _tau_max_branch(model, family, vt, 4)


def tau_min(family: Family, vartheta):
    """Smallest retrograde time of a surface: where it leaves its generator."""
    family = Family(family)
    if family is Family.P:
        return 0.0 * vartheta
    if family is Family.TS:
        return vartheta
    if family is Family.TD:
        return vartheta / 2.0
    raise Unsupported(f"{family.value} is not a surface")


# ---------------------------------------------------------------------------
# Closed-form evaluators (array friendly, no domain checks)
# ---------------------------------------------------------------------------

def slice_angle(family: Family, side: int, vartheta):
    """``theta`` of a point of a sided piece, as a function of ``vartheta``."""
    family = Family(family)
    if family in (Family.P, Family.PL):
        return (1 - side) * PI + side * vartheta
    return (1 + side) * PI - side * vartheta


def vartheta_of(family: Family, side: int, theta):
    """Inverse of :func:`slice_angle`, reduced to ``[0, 2*pi)``."""
    family = Family(family)
    if family in (Family.P, Family.PL):
        return wrap_angle(side * (theta - (1 - side) * PI))
    return wrap_angle(side * ((1 + side) * PI - theta))


def piece_xyz(ell: float, family: Family, side: int, tau, vartheta):
    """Closed-form ``(x, y, theta)`` of a piece; ``theta`` is not wrapped.

    For the lines ``tau`` is ignored.  ``BUP`` reads ``vartheta`` as the
    terminal heading and ``BUP0`` as the polar angle on the capture circle.
    """
    family = Family(family)
    s = side
    vt = np.asarray(vartheta, dtype=float)
    if family is Family.P:
        t = np.asarray(tau, dtype=float)
        x = -s * (ell * np.sin(vt / 2) + np.cos(vt) - np.cos(t + vt) + 1 - np.cos(t))
        y = -ell * np.cos(vt / 2) + np.sin(vt) - np.sin(t + vt) + np.sin(t)
    elif family is Family.PL:
        x = -s * (ell * np.sin(vt / 2) + 2 * np.cos(vt / 2) + 1 + np.cos(vt))
        y = -ell * np.cos(vt / 2) + 2 * np.sin(vt / 2) + np.sin(vt)
    elif family is Family.UL:
        x = s * (1 - np.cos(vt))
        y = ell + vt - np.sin(vt)
    elif family is Family.TS:
        t = np.asarray(tau, dtype=float)
        x = s * ((ell + vt) * np.sin(t - vt) + 1 - np.cos(vt))
        y = (ell + vt) * np.cos(t - vt) - np.sin(vt)
    elif family is Family.TD:
        t = np.asarray(tau, dtype=float)
        a = ell + 2 * t - vt
        x = s * (a * np.sin(t - vt) + 2 * np.cos(t - vt) - 1 - np.cos(vt))
        y = a * np.cos(t - vt) - 2 * np.sin(t - vt) - np.sin(vt)
    elif family is Family.BUP:
        x = -s * ell * np.sin(vt / 2)
        y = -s * ell * np.cos(vt / 2)
        return x, y, vt + 0.0
    elif family is Family.BUP0:
        return ell * np.sin(vt), ell * np.cos(vt), 0.0 * vt
    else:
        raise Unsupported(f"no closed form for {family.value}")
    return x, y, slice_angle(family, s, vt) + 0.0 * x


def _bup_normal(side, theta_f):
    phi = ((1 + side) * PI + theta_f) / 2.0
    return np.sin(phi), np.cos(phi), 0.0 * phi


def _ul_normal(side, tau1):
    return 0.0 * tau1, 1.0 + 0.0 * tau1, side * (1.0 - np.cos(tau1))


def piece_normal(ell: float, family: Family, side: int, tau, vartheta):
    """Analytic costate of a piece, flowed from the BUP normal.

    Only ``P`` and ``BUP`` depend on ``ell`` through nothing but the
    terminal point, so ``ell`` is accepted for a uniform signature.
    """
    family = Family(family)
    s = side
    vt = np.asarray(vartheta, dtype=float)
    if family in (Family.P, Family.PL):
        t = PI - vt / 2.0 if family is Family.PL else np.asarray(tau, dtype=float)
        theta_f = (1 - s) * PI + s * vt + 2 * s * t
        n0 = _bup_normal(s, theta_f)
        return flow_nu(t, theta_f, *n0, -s, s)
    if family is Family.UL:
        return _ul_normal(s, vt)
    if family in (Family.TS, Family.TD):
        t = np.asarray(tau, dtype=float)
        if family is Family.TS:
            tau1, tau2, u = vt, t - vt, s
        else:
            tau1, tau2, u = 2 * t - vt, vt - t, -s
        theta_ul = (1 + s) * PI - s * tau1
        return flow_nu(tau2, theta_ul, *_ul_normal(s, tau1), u, s)
    if family is Family.BUP:
        return _bup_normal(s, vt)
    if family is Family.BUP0:
        return np.sin(vt), np.cos(vt), 0.0 * vt
    raise Unsupported(f"{family.value} has no single analytic normal")


# ---------------------------------------------------------------------------
# Checked scalar evaluators
# ---------------------------------------------------------------------------

def _as_params(piece: PieceId, params: Params) -> SurfaceParams:
    if isinstance(params, SurfaceParams):
        return params
    if isinstance(params, tuple):
        return SurfaceParams(*map(float, params))
    val = float(params)
    fam = piece.family
    if fam in SURFACES:
        raise TypeError(f"{fam.value} needs SurfaceParams(tau, vartheta)")
    if fam is Family.UL:
        return SurfaceParams(val, val)
    if fam is Family.PL:
        return SurfaceParams(PI - val / 2.0, val)
    return SurfaceParams(0.0, val)


def validate_params(model: BarrierModel, piece: PieceId, params: Params) -> SurfaceParams:
    """Check that parameters lie on the valid part of a piece.

    Interval ends are accepted (the pieces are closed up to their limits),
    except ``vartheta = 0`` and the upper end of ``P``.
    """
    sp = _as_params(piece, params)
    fam = piece.family
    vt, t = sp.vartheta, sp.tau
    if fam in (Family.BUP, Family.BUP0, Family.DL):
        if not math.isfinite(vt):
            raise OutOfDomain(f"{fam.value}: non-finite parameter")
        return sp
    if fam is Family.PL:
        lo, hi = vartheta_range(model, fam)
        if not (lo - PARAM_SLACK <= vt < hi):
            raise OutOfDomain(f"PL: vartheta={vt} outside [{lo}, {hi})")
        return sp
    if fam is Family.UL:
        _require_range(model, fam, vt)
        return sp
    top = tau_max(model, fam, vt)
    bottom = float(tau_min(fam, vt))
    if not (bottom - PARAM_SLACK <= t <= top + PARAM_SLACK):
        raise OutOfDomain(f"{fam.value}: tau={t} outside [{bottom}, {top}] at vartheta={vt}")
    return sp


def eval_piece(model: BarrierModel, piece: PieceId, params: Params, valid_only: bool = True) -> State:
    """State on a barrier piece.

    ``valid_only=False`` skips the domain check and evaluates the full
    emanated surface, which is what the boundary identities are about.
    """
    if piece.family is Family.DL:
        return dispersal_point(model, _as_params(piece, params).vartheta)
    sp = validate_params(model, piece, params) if valid_only else _as_params(piece, params)
    x, y, th = piece_xyz(model.ell, piece.family, piece.side or 1, sp.tau, sp.vartheta)
    return State(float(x), float(y), float(th))


def eval_piece_normal(model: BarrierModel, piece: PieceId, params: Params, valid_only: bool = True) -> Costate:
    if piece.family is Family.DL:
        raise Unsupported("the dispersal line has two normals, one per adjoining surface")
    sp = validate_params(model, piece, params) if valid_only else _as_params(piece, params)
    nx, ny, nt = piece_normal(model.ell, piece.family, piece.side or 1, sp.tau, sp.vartheta)
    return Costate(float(nx), float(ny), float(nt))


# ---------------------------------------------------------------------------
# Intersections and the dispersal line
# ---------------------------------------------------------------------------

class Pair(str, enum.Enum):
    P_TS = "PxTS"
    TD_TD = "TDxTD"
    P_TD = "PxTD"
    TS_TD = "TSxTD"


def intersection_params(model: BarrierModel, pair: Pair, vartheta: float) -> tuple[float, float]:
    """Closed-form ``(tau, tau')`` where two surfaces cross.

    The first surface is evaluated at ``vartheta`` on side ``side`` and the
    second on side ``-side`` at the parameter returned by
    :func:`intersection_surfaces`.
    """
    pair = Pair(pair)
    ell, vt = model.ell, float(vartheta)
    t1, t2 = model.theta1, model.theta2
    if pair is Pair.P_TS:
        if not 0.0 < vt <= t1:
            raise OutOfDomain(f"PxTS needs vartheta in (0, {t1}], got {vt}")
        return _p_tau_from_ts_cut(ell, vt), _ts_tau_from_p_cut(ell, vt)
    if pair is Pair.TD_TD:
        if not t2 < vt < TWO_PI - t2:
            raise OutOfDomain(f"TDxTD needs vartheta in ({t2}, {TWO_PI - t2}), got {vt}")
        p = roots.solve_p(ell, vt).value
        return (vt + p) / 2.0, _td_tau_prime_from_td_cut(ell, vt, p)
    if pair is Pair.P_TD:
        if model.regime is not Regime.SMALL:
            raise RegimeMismatch(f"PxTD occurs only for ell < ell_J (ell={ell})")
        if not t1 < vt < t2:
            raise OutOfDomain(f"PxTD needs vartheta in ({t1}, {t2}), got {vt}")
        return _p_tau_from_td_cut(model.theta2, vt), (model.w + vt) / 2.0
    if model.regime is not Regime.LARGE:
        raise RegimeMismatch(f"TSxTD occurs only for ell > ell_J (ell={ell})")
    if not t1 < vt < t2:
        raise OutOfDomain(f"TSxTD needs vartheta in ({t1}, {t2}), got {vt}")
    q = roots.solve_q(ell, vt).value
    return _ts_tau_from_td_cut(ell, vt, q), PI + (q - vt) / 2.0


def intersection_surfaces(pair: Pair, side: int = 1):
    """``(piece_a, piece_b, vartheta_b(vartheta))`` for an intersection pair."""
    pair = Pair(pair)
    if pair is Pair.P_TS:
        return PieceId(Family.P, side), PieceId(Family.TS, -side), lambda v: v
    if pair is Pair.P_TD:
        return PieceId(Family.P, side), PieceId(Family.TD, -side), lambda v: v
    if pair is Pair.TD_TD:
        return PieceId(Family.TD, -side), PieceId(Family.TD, side), lambda v: TWO_PI - v
    return PieceId(Family.TS, -side), PieceId(Family.TD, side), lambda v: TWO_PI - v


def intersection_states(model: BarrierModel, pair: Pair, vartheta: float, side: int = 1) -> tuple[State, State]:
    tau, tau_p = intersection_params(model, pair, vartheta)
    a, b, other = intersection_surfaces(pair, side)
    za = eval_piece(model, a, SurfaceParams(tau, vartheta), valid_only=False)
    zb = eval_piece(model, b, SurfaceParams(tau_p, other(vartheta)), valid_only=False)
    return za, zb


def dispersal_branch(model: BarrierModel, theta: float) -> tuple[PieceId, SurfaceParams]:
    """Surface and parameters whose ``tau_max`` end traces the dispersal line."""
    theta = float(theta)
    if not 0.0 < theta < TWO_PI:
        raise OutOfDomain(f"dispersal line needs theta in (0, 2*pi), got {theta}")
    vt = PI - abs(PI - theta)
    gamma = -1 if theta <= PI else 1
    fam = Family.TD if vt >= model.theta12 else Family.TS
    return PieceId(fam, gamma), SurfaceParams(tau_max(model, fam, vt), vt)


def dispersal_point(model: BarrierModel, theta: float) -> State:
    piece, sp = dispersal_branch(model, theta)
    x, y, _ = piece_xyz(model.ell, piece.family, piece.side, sp.tau, sp.vartheta)
    return State(float(x), float(y), float(theta))


# ---------------------------------------------------------------------------
# Slices
# ---------------------------------------------------------------------------

def _interior(a: float, b: float, n: int) -> np.ndarray:
    k = np.arange(1, n + 1)
    return a + (b - a) * k / (n + 1)


def _point(model, piece, tau, vt) -> SlicePoint:
    ell, fam, s = model.ell, piece.family, piece.side
    x, y, th = piece_xyz(ell, fam, s, tau, vt)
    nx, ny, nt = piece_normal(ell, fam, s, tau, vt)
    return SlicePoint(State(float(x), float(y), float(th)), piece,
                      SurfaceParams(float(tau), float(vt)), Costate(float(nx), float(ny), float(nt)))


def _run(model, piece, vt, t_from, t_to, n) -> list[SlicePoint]:
    return [_point(model, piece, t, vt) for t in _interior(t_from, t_to, n)]


def _half_slice(model: BarrierModel, theta: float, n: int) -> list[SlicePoint]:
    """Closed boundary of the capture region in a slice with ``theta <= pi``."""
    plus = lambda f: PieceId(f, 1)  # noqa: E731
    minus = lambda f: PieceId(f, -1)  # noqa: E731
    pts: list[SlicePoint] = []
    pts.append(_point(model, plus(Family.BUP), 0.0, theta))
    pts += _run(model, plus(Family.P), theta, 0.0, tau_max(model, Family.P, theta), n)
    if theta >= model.theta21:
        far = TWO_PI - theta
        pts.append(_point(model, plus(Family.PL), PI - theta / 2.0, theta))
        pts += _run(model, plus(Family.TD), far, far / 2.0, tau_max(model, Family.TD, far), n)

    dl_piece, dl_params = dispersal_branch(model, theta)
    x, y, _ = piece_xyz(model.ell, dl_piece.family, dl_piece.side, dl_params.tau, dl_params.vartheta)
    pts.append(SlicePoint(State(float(x), float(y), theta), PieceId(Family.DL), dl_params, None))

    if theta < model.theta12:
        pts += _run(model, minus(Family.TS), theta, tau_max(model, Family.TS, theta), theta, n)
        pts.append(_point(model, minus(Family.UL), theta, theta))
        pts += _run(model, minus(Family.TD), theta, theta, theta / 2.0, n)
    else:
        pts += _run(model, minus(Family.TD), theta, tau_max(model, Family.TD, theta), theta / 2.0, n)
    far = TWO_PI - theta
    pts.append(_point(model, minus(Family.PL), PI - far / 2.0, far))
    pts += _run(model, minus(Family.P), far, PI - far / 2.0, 0.0, n)
    pts.append(_point(model, minus(Family.BUP), 0.0, theta))
    return pts


def _reflect_point(p: SlicePoint) -> SlicePoint:
    nu = p.normal
    mirrored = None if nu is None else Costate(-nu.nu_x, nu.nu_y, -nu.nu_theta)
    return SlicePoint(reflect(p.z), p.piece.mirrored(), p.params, mirrored)


def sample_slice(model: BarrierModel, theta: float, n: int = 50) -> list[SlicePoint]:
    """Ordered barrier points of the cross-section at heading ``theta``.

    Surfaces contribute ``n`` interior points each; lines, the dispersal
    point and the two BUP end points are exact single rows.  The list runs
    from ``BUP_{+1}`` through the dispersal point to ``BUP_{-1}`` for
    ``theta <= pi`` (mirrored otherwise); the capture-circle arc between
    the two BUP points closes the curve.
    """
    theta = float(theta)
    if not 0.0 < theta < TWO_PI:
        raise OutOfDomain(f"slice angle must lie in (0, 2*pi), got {theta}")
    if n < 2:
        raise ValueError("need at least two points per piece")
    if theta <= PI:
        return _half_slice(model, theta, n)
    return [_reflect_point(p) for p in _half_slice(model, TWO_PI - theta, n)]


def closing_arc(model: BarrierModel, theta: float, n: int = 64) -> np.ndarray:
    """``(n, 2)`` capture-circle points from ``BUP_{-1}`` back to ``BUP_{+1}``."""
    half = min(theta, TWO_PI - theta) / 2.0
    phi = np.linspace(half, half - PI, n)
    if theta > PI:
        phi = -phi
    return np.column_stack([model.ell * np.sin(phi), model.ell * np.cos(phi)])


def slice_polygon(model: BarrierModel, theta: float, n: int = 200) -> np.ndarray:
    """Closed ``(k, 2)`` outline of the capture region in a slice."""
    pts = np.array([[p.z.x, p.z.y] for p in sample_slice(model, theta, n)])
    return np.vstack([pts, closing_arc(model, theta)[1:-1]])


# ---------------------------------------------------------------------------
# Bulk sampling
# ---------------------------------------------------------------------------

def sample_params(model: BarrierModel, family: Family, n_vartheta: int, n_tau: int = 1,
                  rng: Optional[np.random.Generator] = None) -> tuple[np.ndarray, np.ndarray]:
    """Parameters spread over the valid part of a piece.

    Returns ``(tau, vartheta)`` arrays of length ``n_vartheta * n_tau``.
    With ``rng`` the positions are uniform random, otherwise an interior
    grid.  Lines use ``n_tau = 1`` and the line's own time parameter.
    """
    family = Family(family)
    lo, hi = vartheta_range(model, family)
    if rng is None:
        vts = _interior(lo, hi, n_vartheta)
    else:
        vts = lo + (hi - lo) * rng.uniform(0.0, 1.0, n_vartheta)
        vts = np.clip(vts, lo + 1e-9, hi - 1e-9)
    if family in LINES:
        taus = vts if family is Family.UL else PI - vts / 2.0
        return taus, vts
    tau_out, vt_out = [], []
    for vt in vts:
        a, b = float(tau_min(family, vt)), tau_max(model, family, float(vt))
        ts = _interior(a, b, n_tau) if rng is None else a + (b - a) * rng.uniform(0.0, 1.0, n_tau)
        tau_out.append(ts)
        vt_out.append(np.full(n_tau, vt))
    return np.concatenate(tau_out), np.concatenate(vt_out)

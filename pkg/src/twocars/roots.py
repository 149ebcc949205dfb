"""Scalar root finding and the transcendental equations of the barrier.

The defining functions (``*_equation``) accept numpy arrays so that brackets
can be located by a vectorised sign scan; where a square root has a negative
radicand they return ``nan`` instead of raising, and the scan skips those
points.  The public ``solve_*`` functions validate their domain and return a
:class:`RootResult`.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, MaxIterations, NoSignChange

TWO_PI = 2.0 * math.pi
DEFAULT_TOL = 1e-12
FD_STEP = 1e-7
MAX_ITER = 200
RADICAND_CLAMP = 1e-12
MEDIUM_GUARD = 1e-9  # |ell - ell_J| below this is treated as the junction radius
SCAN_POINTS = 257


class Regime(str, enum.Enum):
    SMALL = "small"
    MEDIUM = "medium"
    LARGE = "large"


@dataclass(frozen=True)
class Bracket:
    lo: float
    hi: float
    f_lo_sign: int
    f_hi_sign: int

    def __post_init__(self):
        if not self.lo < self.hi:
            raise NoSignChange(f"empty bracket [{self.lo}, {self.hi}]")
        if self.f_lo_sign * self.f_hi_sign > 0:
            raise NoSignChange("function has the same sign at both bracket ends")


@dataclass(frozen=True)
class RootResult:
    value: float
    residual: float
    iterations: int


@dataclass(frozen=True)
class XiEta:
    xi: float
    eta: float


def xi(ell, alpha):
    return (ell + alpha) * np.sin(alpha / 2.0) + 2.0 * np.cos(alpha / 2.0)


def eta(ell, alpha):
    return (ell + alpha) * np.cos(alpha / 2.0) - 2.0 * np.sin(alpha / 2.0)


def xi_eta(ell: float, alpha: float) -> XiEta:
    if not ell > 0:
        raise DomainError(f"capture radius must be positive, got {ell}")
    return XiEta(float(xi(ell, alpha)), float(eta(ell, alpha)))


def safe_sqrt(r, clamp: float = RADICAND_CLAMP):
    """Square root that clamps tiny negative radicands to zero.

    Scalars below ``-clamp`` raise :class:`DomainError`; array entries below
    ``-clamp`` become ``nan``.
    """
    if np.ndim(r) == 0:
        r = float(r)
        if r < -clamp or math.isnan(r):
            raise DomainError(f"negative radicand {r}")
        return math.sqrt(max(r, 0.0))
    r = np.asarray(r, dtype=float)
    out = np.sqrt(np.where(r < 0.0, 0.0, r))
    return np.where(r < -clamp, np.nan, out)


def _sqrt_or_nan(r):
    r = np.asarray(r, dtype=float)
    out = np.sqrt(np.where(r < 0.0, 0.0, r))
    out = np.where(r < -RADICAND_CLAMP, np.nan, out)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Defining equations
# ---------------------------------------------------------------------------

def theta_j_equation(v):
    """``v - 4 (1 + cos(v/2)) cot(v/2)``; increasing on ``(0, 2*pi)``."""
    return v - 4.0 * (1.0 + np.cos(v / 2.0)) * np.cos(v / 2.0) / np.sin(v / 2.0)


def theta_j_derivative(v):
    c, s = np.cos(v / 2.0), np.sin(v / 2.0)
    return (1.0 + c) ** 2 * (3.0 - 2.0 * c) / s ** 2


def ell_from_theta_j(theta_j: float) -> float:
    return -2.0 * (math.cos(theta_j / 2.0) + math.cos(theta_j)) / math.sin(theta_j / 2.0)


def w_equation(ell, w):
    return eta(ell, w) + ell


def m_equation(ell, m):
    return (ell + m) ** 2 - (2.0 * np.sin(m / 2.0) - ell) ** 2 - (2.0 + 2.0 * np.cos(m / 2.0)) ** 2


def n_radicand(ell, n):
    return (ell + n - 2.0 * np.sin(n)) ** 2 - 4.0 * np.sin(n) ** 2


def n_equation(ell, n):
    return eta(ell, _sqrt_or_nan(n_radicand(ell, n)) - ell) + eta(ell, n)


def p_radicand(ell, vartheta, p):
    return (xi(ell, p) - 4.0 * np.cos(vartheta / 2.0)) ** 2 + eta(ell, p) ** 2 - 4.0


def p_equation(ell, vartheta, p):
    return eta(ell, p) + eta(ell, _sqrt_or_nan(p_radicand(ell, vartheta, p)) - ell)


def q_equation(ell, vartheta, q):
    half = (q - vartheta) / 2.0
    return (ell + vartheta) ** 2 - (2.0 + 2.0 * np.cos(half)) ** 2 - (ell + q + 2.0 * np.sin(half)) ** 2


# ---------------------------------------------------------------------------
# Solvers
# ---------------------------------------------------------------------------

_default_tol = DEFAULT_TOL


def set_default_tol(tol: float) -> None:
    """Residual tolerance used when a solver is called without ``tol``.

    The cached barrier models hold roots solved under the previous value,
    so callers should drop them (``barrier.clear_caches``) afterwards.
    """
    global _default_tol
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    _default_tol = float(tol)


def _sign(v: float) -> int:
    return (v > 0) - (v < 0)


def solve_bracketed(
    f: Callable[[float], float],
    df: Optional[Callable[[float], float]] = None,
    interval: tuple[float, float] = (0.0, 1.0),
    guess: Optional[float] = None,
    tol: Optional[float] = None,
    max_iter: int = MAX_ITER,
) -> RootResult:
    """Newton iteration kept inside a sign-change bracket.

    A Newton step is replaced by bisection whenever it leaves the bracket,
    lands where ``f`` is undefined, or does not shrink ``|f|``.  Iteration
    stops once ``|f| <= tol`` or the bracket has collapsed to float
    resolution, whichever comes first.
    """
    if tol is None:
        tol = _default_tol
    if not tol >= 0:
        raise ValueError(f"tol must be non-negative, got {tol}")
    lo, hi = float(interval[0]), float(interval[1])
    f_lo, f_hi = float(f(lo)), float(f(hi))
    if not (math.isfinite(f_lo) and math.isfinite(f_hi)):
        raise NoSignChange("function undefined at a bracket end")
    if abs(f_lo) <= tol:
        return RootResult(lo, f_lo, 0)
    if abs(f_hi) <= tol:
        return RootResult(hi, f_hi, 0)
    Bracket(lo, hi, _sign(f_lo), _sign(f_hi))

    def deriv(x, fx):
        if df is not None:
            return float(df(x))
        h = FD_STEP if x + FD_STEP < hi else -FD_STEP
        return (float(f(x + h)) - fx) / h

    x = guess if guess is not None and lo < guess < hi else 0.5 * (lo + hi)
    fx = float(f(x))
    for it in range(1, max_iter + 1):
        if not math.isfinite(fx):
            raise DomainError(f"defining function undefined at {x} inside the bracket")
        if abs(fx) <= tol:
            return RootResult(x, fx, it)
        if _sign(fx) == _sign(f_lo):
            lo, f_lo = x, fx
        else:
            hi, f_hi = x, fx
        if hi - lo <= 4.0 * np.spacing(max(abs(lo), abs(hi), 1.0)):
            best = min(((lo, f_lo), (hi, f_hi), (x, fx)), key=lambda t: abs(t[1]))
            return RootResult(best[0], best[1], it)

        d = deriv(x, fx)
        xn = x - fx / d if d != 0 and math.isfinite(d) else math.nan
        newton = lo < xn < hi
        if not newton:
            xn = 0.5 * (lo + hi)
        fn = float(f(xn))
        if newton and not (math.isfinite(fn) and abs(fn) < abs(fx)):
            if math.isfinite(fn):
                if _sign(fn) == _sign(f_lo):
                    lo, f_lo = xn, fn
                else:
                    hi, f_hi = xn, fn
            xn = 0.5 * (lo + hi)
            fn = float(f(xn))
        x, fx = xn, fn
    raise MaxIterations(f"no convergence in {max_iter} iterations (|f| = {abs(fx):.3e})")


def scan_brackets(fvec, lo: float, hi: float, n: int = SCAN_POINTS) -> list[tuple[float, float]]:
    """Sign-change sub-intervals of ``fvec`` on a uniform grid of ``[lo, hi]``.

    Grid points where ``fvec`` is not finite are ignored; only neighbouring
    finite samples can form a bracket.
    """
    xs = np.linspace(lo, hi, n)
    with np.errstate(invalid="ignore", divide="ignore"):
        vs = np.asarray(fvec(xs), dtype=float)
    ok = np.isfinite(vs)
    pairs = ok[:-1] & ok[1:]
    change = pairs & (np.sign(vs[:-1]) * np.sign(vs[1:]) <= 0) & ~((vs[:-1] == 0) & (vs[1:] == 0))
    out = []
    for i in np.nonzero(change)[0]:
        if vs[i + 1] == 0 and i + 2 < n and change[i + 1]:
            continue  # exact zero on a grid point: keep a single bracket
        out.append((float(xs[i]), float(xs[i + 1])))
    return out


def _solve_scanned(fvec, lo, hi, guess, tol, what, df=None):
    # The feasible set of the n and p equations can be a sliver around the
    # root, so a coarse scan that sees no bracket is refined before giving up.
    for n in (SCAN_POINTS, 16 * SCAN_POINTS, 256 * SCAN_POINTS):
        brackets = scan_brackets(fvec, lo, hi, n)
        if brackets:
            break
    if not brackets:
        raise NoSignChange(f"{what}: no sign change on [{lo}, {hi}]")
    a, b = min(brackets, key=lambda ab: abs(0.5 * (ab[0] + ab[1]) - guess))
    return solve_bracketed(lambda x: float(fvec(x)), df, (a, b), guess, tol)


def _check_ell(ell):
    if not (ell > 0 and math.isfinite(ell)):
        raise DomainError(f"capture radius must be a positive finite number, got {ell}")


@lru_cache(maxsize=None)
def _theta_j() -> RootResult:
    # tol=0 runs to float resolution: the branch junctions of the barrier
    # are square-root singular, so every digit of the critical angles counts.
    return solve_bracketed(theta_j_equation, theta_j_derivative, (1e-6, TWO_PI - 1e-6), 2.3, tol=0.0)


def junction_constants() -> tuple[float, float]:
    """``(theta_J, ell_J)``: where the small and large regimes meet."""
    t = _theta_j().value
    return t, _ell_j(t)


@lru_cache(maxsize=None)
def _ell_j(t: float) -> float:
    return ell_from_theta_j(t)


def ell_junction() -> float:
    return junction_constants()[1]


def regime_of(ell: float) -> Regime:
    _check_ell(ell)
    ell_j = ell_junction()
    if abs(ell - ell_j) < MEDIUM_GUARD:
        return Regime.MEDIUM
    return Regime.SMALL if ell < ell_j else Regime.LARGE


def solve_w(ell: float, tol: Optional[float] = None) -> RootResult:
    _check_ell(ell)
    theta_j, ell_j = junction_constants()
    if not ell < ell_j:
        raise DomainError(f"w is defined for 0 < ell < {ell_j}, got {ell}")
    return _solve_scanned(lambda w: w_equation(ell, w), 0.0, TWO_PI, theta_j, tol, "w",
                          df=lambda w: -0.5 * (ell + w) * math.sin(w / 2.0))


def solve_m(ell: float, tol: Optional[float] = None) -> RootResult:
    _check_ell(ell)
    if not ell > ell_junction():
        raise DomainError(f"m is defined for ell > {ell_junction()}, got {ell}")
    return _solve_scanned(lambda m: m_equation(ell, m), 0.0, TWO_PI, math.pi, tol, "m")


def solve_n(ell: float, tol: Optional[float] = None) -> RootResult:
    _check_ell(ell)
    if not ell > ell_junction():
        raise DomainError(f"n is defined for ell > {ell_junction()}, got {ell}")
    return _solve_scanned(lambda n: n_equation(ell, n), 0.0, TWO_PI, math.pi, tol, "n")


@lru_cache(maxsize=256)
def critical_angles(ell: float) -> tuple[float, float]:
    """``(theta1, theta2)``, the two regime-dependent critical slice angles."""
    reg = regime_of(ell)
    if reg is Regime.MEDIUM:
        t = junction_constants()[0]
        return t, t
    if reg is Regime.SMALL:
        w = solve_w(ell, tol=0.0).value
        arg = (math.sqrt((ell + w) ** 2 - ell ** 2 + 4.0) - 2.0) / 4.0
        return w, 2.0 * math.acos(arg)
    return solve_m(ell, tol=0.0).value, solve_n(ell, tol=0.0).value


def p_root(ell: float, vartheta: float, tol: Optional[float] = None) -> RootResult:
    """Root of the ``p`` equation on the closed interval ``[0, vartheta]``.

    Unlike :func:`solve_p` this accepts the end points of the slice-angle
    window, where the root sits on the boundary of its interval.
    """
    f = lambda p: p_equation(ell, vartheta, p)  # noqa: E731
    lo, hi = 0.0, float(vartheta)
    for end in (lo, hi):
        fe = f(end)
        if math.isfinite(fe) and abs(fe) <= 1e-12:
            return RootResult(end, float(fe), 0)
    return _solve_scanned(f, lo, hi, vartheta, tol, "p")


def q_root(ell: float, vartheta: float, tol: Optional[float] = None) -> RootResult:
    """Root of the ``q`` equation on the closed interval ``[0, 2*pi - vartheta]``."""
    f = lambda q: q_equation(ell, vartheta, q)  # noqa: E731
    lo, hi = 0.0, TWO_PI - float(vartheta)
    for end in (lo, hi):
        fe = f(end)
        if abs(fe) <= 1e-12:
            return RootResult(end, float(fe), 0)
    return _solve_scanned(f, lo, hi, vartheta, tol, "q")


def solve_p(ell: float, vartheta: float, tol: Optional[float] = None) -> RootResult:
    _check_ell(ell)
    _, theta2 = critical_angles(ell)
    if not theta2 < vartheta < TWO_PI - theta2:
        raise DomainError(f"p needs vartheta in ({theta2}, {TWO_PI - theta2}), got {vartheta}")
    return p_root(ell, vartheta, tol)


def solve_q(ell: float, vartheta: float, tol: Optional[float] = None) -> RootResult:
    _check_ell(ell)
    if not ell > ell_junction():
        raise DomainError(f"q is defined for ell > {ell_junction()}, got {ell}")
    theta1, theta2 = critical_angles(ell)
    if not theta1 < vartheta < theta2:
        raise DomainError(f"q needs vartheta in ({theta1}, {theta2}), got {vartheta}")
    return q_root(ell, vartheta, tol)

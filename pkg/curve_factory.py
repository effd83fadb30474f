"""
Generating curves of the grim reaper families.

Reapers (a != 0) and minimal reapers (a = 0) are integrated apex-outward from
(x, z, theta) = (0, z0, 0) and the two halves are joined into one curve ordered
by arc length. Analytic profiles (horizontal lines, circle arcs, the vertical
line) are built in closed form for the surface checks.
"""
import logging
import math
from typing import List, Optional, Tuple

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline
from scipy.special import beta

from halfspace_model import DomainError
from reaper_ode import graph_residual, integrate_orbit, reflect_orbit, theta_prime
from schemas import (
    BiGraph,
    BiGraphBranch,
    CurveFamily,
    CurveState,
    EventKind,
    GeneratingCurve,
    IntegrationResult,
    ODEParams,
)

logger = logging.getLogger(__name__)

TURNING_GAP = 1e-6


class BiGraphError(ValueError):
    """Curve cannot be split into two graphs over the x-axis"""
    pass


def _apex(z0: float) -> CurveState:
    return CurveState(s=0.0, x=0.0, z=z0, theta=0.0)


def join_halves(backward: IntegrationResult, forward: IntegrationResult) -> Tuple[np.ndarray, ...]:
    """Concatenate a backward half (s <= 0) and a forward half (s >= 0) sharing the apex."""
    columns = []
    for name in ('s', 'x', 'z', 'theta'):
        back = getattr(backward, name)[::-1][:-1]
        columns.append(np.concatenate([back, getattr(forward, name)]))
    return tuple(columns)


def _insert_state(columns: Tuple[np.ndarray, ...], state: CurveState) -> Tuple[Tuple[np.ndarray, ...], int]:
    """Insert an exact state into s-ordered columns; returns the columns and its index."""
    s = columns[0]
    i = int(np.searchsorted(s, state.s))
    for j in (i - 1, i):
        if 0 <= j < len(s) and abs(s[j] - state.s) < 1e-13:
            return columns, j
    values = (state.s, state.x, state.z, state.theta)
    return tuple(np.insert(col, i, v) for col, v in zip(columns, values)), i


def build_reaper(z0: float, a: float, params: ODEParams) -> GeneratingCurve:
    """
    The reaper through the apex (0, z0) for the Killing parameter a != 0.

    For a > 0 the turning point (theta = pi/2) lies on the backward half; for
    a < 0 the curve is the mirror image of the |a| curve.
    """
    if a == 0:
        raise DomainError("build_reaper needs a != 0; use build_minimal_reaper for a = 0")
    if not z0 > params.z_min:
        raise DomainError(f"z0 must exceed z_min ({z0} <= {params.z_min})")

    run = params.model_copy(update={'a': abs(a)})
    forward = integrate_orbit(_apex(z0), run, direction=1)
    backward = integrate_orbit(_apex(z0), run, direction=-1)
    if a < 0:
        forward, backward = reflect_orbit(backward), reflect_orbit(forward)

    columns = join_halves(backward, forward)
    turning: List = backward.events_of(EventKind.THETA_HALF_PI) + forward.events_of(EventKind.THETA_HALF_PI)
    turning_index: Optional[int] = None
    turning_state: Optional[CurveState] = None
    if len(turning) == 1:
        turning_state = turning[0].state
        columns, turning_index = _insert_state(columns, turning_state)
    else:
        logger.warning(f"reaper z0={z0}, a={a}: expected one turning point, found {len(turning)}")

    s, x, z, theta = columns
    logger.info(f"built reaper z0={z0}, a={a} with {len(s)} samples")
    return GeneratingCurve(
        s=s, x=x, z=z, theta=theta,
        curvature=theta_prime(z, theta, a),
        family=CurveFamily.REAPER,
        apex_height=z0,
        a=a,
        turning_index=turning_index,
        turning_state=turning_state,
    )


def build_minimal_reaper(z0: float, params: ODEParams) -> GeneratingCurve:
    """The a = 0 arch through the apex (0, z0), meeting z = z_min almost vertically at both ends."""
    if not z0 > params.z_min:
        raise DomainError(f"z0 must exceed z_min ({z0} <= {params.z_min})")

    run = params.model_copy(update={'a': 0.0})
    forward = integrate_orbit(_apex(z0), run, direction=1)
    backward = integrate_orbit(_apex(z0), run, direction=-1)
    s, x, z, theta = join_halves(backward, forward)
    logger.info(f"built minimal reaper z0={z0} with {len(s)} samples")
    return GeneratingCurve(
        s=s, x=x, z=z, theta=theta,
        curvature=theta_prime(z, theta, 0.0),
        family=CurveFamily.MINIMAL_REAPER,
        apex_height=z0,
        a=0.0,
    )


def build_vertical_plane(z_lo: float, z_hi: float, x0: float = 0.0, n_samples: int = 2) -> GeneratingCurve:
    """Vertical segment x = x0, theta = pi/2, generating a totally geodesic plane."""
    if not 0 < z_lo < z_hi:
        raise DomainError(f"need 0 < z_lo < z_hi, got ({z_lo}, {z_hi})")
    if n_samples < 2:
        raise DomainError("a vertical plane needs at least two samples")
    z = np.linspace(z_lo, z_hi, n_samples)
    return GeneratingCurve(
        s=z - z_lo,
        x=np.full(n_samples, float(x0)),
        z=z,
        theta=np.full(n_samples, math.pi / 2),
        curvature=np.zeros(n_samples),
        family=CurveFamily.VERTICAL_PLANE,
        apex_height=float(z_hi),
    )


def horizontal_profile(height: float, x_lo: float = 0.5, x_hi: float = 2.0, n_samples: int = 64) -> GeneratingCurve:
    """Horizontal line z = height (a horosphere generator)."""
    if not height > 0:
        raise DomainError(f"height must be positive, got {height}")
    if not x_lo < x_hi:
        raise DomainError(f"need x_lo < x_hi, got ({x_lo}, {x_hi})")
    x = np.linspace(x_lo, x_hi, n_samples)
    return GeneratingCurve(
        s=x - x_lo,
        x=x,
        z=np.full(n_samples, float(height)),
        theta=np.zeros(n_samples),
        curvature=np.zeros(n_samples),
        family=CurveFamily.ANALYTIC_PROFILE,
        apex_height=float(height),
    )


def circle_profile(radius: float = 1.0, collar: float = 0.1, n_samples: int = 64) -> GeneratingCurve:
    """
    Quarter circle (x, z) = r (sin(s/r), cos(s/r)) centred on the ideal boundary,
    with both ends cut back by the angle ``collar`` so that x > 0 and z > 0.
    """
    if not radius > 0:
        raise DomainError(f"radius must be positive, got {radius}")
    if not 0 < collar < math.pi / 4:
        raise DomainError(f"collar must lie in (0, pi/4), got {collar}")
    phi = np.linspace(collar, math.pi / 2 - collar, n_samples)
    z = radius * np.cos(phi)
    return GeneratingCurve(
        s=radius * phi,
        x=radius * np.sin(phi),
        z=z,
        theta=-phi,
        curvature=np.full(n_samples, -1.0 / radius),
        family=CurveFamily.ANALYTIC_PROFILE,
        apex_height=float(np.max(z)),
    )


# Measurements of the minimal family

def half_width(z0: float, quad_tol: float = 1e-12) -> float:
    """
    Half the x-span of the minimal reaper of height z0:

        w(z0) = z0 * integral_0^1 t^2 / sqrt(1 - t^4) dt

    The (1 - t)^(-1/2) endpoint singularity is handed to QUADPACK's algebraic weight.
    """
    if not z0 > 0:
        raise DomainError(f"z0 must be positive, got {z0}")
    value, error = quad(lambda t: t * t / np.sqrt((1.0 + t) * (1.0 + t * t)), 0.0, 1.0,
                        weight='alg', wvar=(0.0, -0.5), epsabs=quad_tol, epsrel=quad_tol)
    logger.debug(f"half-width quadrature {value!r} with error estimate {error:.1e}")
    return z0 * value


def half_width_closed_form(z0: float) -> float:
    """z0 * B(3/4, 1/2) / 4."""
    if not z0 > 0:
        raise DomainError(f"z0 must be positive, got {z0}")
    return z0 * beta(0.75, 0.5) / 4.0


def _x_intercept(x_end: float, z_end: float, x_prev: float, z_prev: float) -> float:
    if z_end == z_prev:
        return x_end
    return x_end - z_end * (x_end - x_prev) / (z_end - z_prev)


def x_span(curve: GeneratingCurve) -> float:
    """Width of the curve on the x-axis, with both ends extended linearly down to z = 0."""
    if len(curve) < 2:
        raise DomainError("x_span needs at least two samples")
    left = _x_intercept(curve.x[0], curve.z[0], curve.x[1], curve.z[1])
    right = _x_intercept(curve.x[-1], curve.z[-1], curve.x[-2], curve.z[-2])
    return float(max(left, right, np.max(curve.x)) - min(left, right, np.min(curve.x)))


def grid_window(curve: GeneratingCurve, s_lo: Optional[float] = None, s_hi: Optional[float] = None,
                stride: int = 1) -> GeneratingCurve:
    """
    Keep the samples lying on the uniform output grid (dropping inserted turning
    and terminal states), restricted to s_lo <= s <= s_hi and thinned by ``stride``.

    The result always has uniform spacing, as the finite-difference checks require.
    """
    if stride < 1:
        raise DomainError(f"stride must be at least 1, got {stride}")
    step = float(np.median(np.diff(curve.s)))
    origin = curve.s[int(np.argmax(curve.z))]
    ratio = (curve.s - origin) / step
    on_grid = np.abs(ratio - np.round(ratio)) < 1e-6
    if s_lo is not None:
        on_grid &= curve.s >= s_lo
    if s_hi is not None:
        on_grid &= curve.s <= s_hi
    index = np.flatnonzero(on_grid)
    if len(index) == 0:
        raise DomainError("no grid samples inside the requested window")
    # stride is anchored at the apex so nested windows share nodes
    k = np.round(ratio[index]).astype(int)
    index = index[k % stride == 0]
    z = curve.z[index]
    return GeneratingCurve(
        s=curve.s[index], x=curve.x[index], z=z, theta=curve.theta[index],
        curvature=curve.curvature[index],
        family=curve.family,
        apex_height=float(np.max(z)),
        a=curve.a,
    )


# Bi-graph decomposition

def _branch(s: np.ndarray, x: np.ndarray, u: np.ndarray) -> BiGraphBranch:
    if len(x) > 1 and x[-1] < x[0]:
        s, x, u = s[::-1], x[::-1], u[::-1]
    if len(x) > 1 and not np.all(np.diff(x) > 0):
        raise BiGraphError("branch is not a graph over the x-axis")
    return BiGraphBranch(s=s.copy(), x=x.copy(), u=u.copy())


def to_bigraph(curve: GeneratingCurve) -> BiGraph:
    """Split a reaper at its turning point into lower and upper graphs, each ordered by increasing x."""
    if curve.family == CurveFamily.MINIMAL_REAPER:
        raise BiGraphError("a minimal reaper is a single graph; use its samples directly")
    if curve.family != CurveFamily.REAPER or curve.turning_index is None:
        raise BiGraphError(f"{curve.family.value} curve has no turning point to split at")

    # neighbours within TURNING_GAP of the vertical tangent have x equal to the
    # turning x in double precision
    k = curve.turning_index
    keep = np.abs(curve.s - curve.s[k]) >= TURNING_GAP
    keep[k] = True
    s, x, z = curve.s[keep], curve.x[keep], curve.z[keep]
    k = int(np.count_nonzero(keep[:k]))
    first = _branch(s[:k + 1], x[:k + 1], z[:k + 1])
    second = _branch(s[k:], x[k:], z[k:])
    lower, upper = (first, second) if np.max(first.u) < np.max(second.u) else (second, first)
    return BiGraph(lower=lower, upper=upper, turning_state=curve.turning_state)


def branch_graph_residual_fd(branch: BiGraphBranch, a: float) -> np.ndarray:
    """
    graph_residual on a branch with derivatives from finite differences in s.

    Uses the parametric forms u' = z_s / x_s and u'' = (z_ss x_s - x_ss z_s) / x_s^3.
    Returns values at interior samples [2:-2]; near the turning point x_s -> 0 and
    the values there are not meaningful.
    """
    if len(branch.s) < 5:
        raise DomainError("branch needs at least five samples for second differences")
    s, x, u = branch.s, branch.x, branch.u
    x_s = np.gradient(x, s)
    u_s = np.gradient(u, s)
    x_ss = np.gradient(x_s, s)
    u_ss = np.gradient(u_s, s)
    du = u_s / x_s
    ddu = (u_ss * x_s - x_ss * u_s) / x_s ** 3
    inner = slice(2, -2)
    return graph_residual(u[inner], du[inner], ddu[inner], a)


def resample_branch(branch: BiGraphBranch, x: np.ndarray) -> np.ndarray:
    """
    Heights of a branch at new abscissae by cubic-spline interpolation in x.

    Keep ``x`` away from the turning point: the branch has a vertical tangent there
    and the spline is only accurate where u(x) is smooth on the sample scale.
    """
    x = np.asarray(x, dtype=float)
    if len(branch.x) < 4:
        raise DomainError("branch needs at least four samples to be resampled")
    if np.min(x) < branch.x[0] or np.max(x) > branch.x[-1]:
        raise DomainError(
            f"resampling range [{np.min(x)}, {np.max(x)}] leaves the branch [{branch.x[0]}, {branch.x[-1]}]"
        )
    return CubicSpline(branch.x, branch.u)(x)

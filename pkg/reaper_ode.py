"""
Grim reaper ODE system in arc-length form.

    x' = cos(theta)
    z' = sin(theta)
    theta' = -(2 / z^2) * (a sin(theta) + z cos(theta))

Orbits are integrated with an embedded explicit Runge-Kutta pair (scipy's
RK45 by default) while the curve is away from the ideal boundary; once the
height drops below ``stiff_height * |a|`` the angle equation becomes stiff
(its Jacobian is about -2a/z^2) and the tail is handed to scipy's Radau.
Sign changes of the event functions are refined by bisection on the dense
output of the step in which they occur.
"""
import logging
import math
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.integrate import DOP853, RK45, Radau
from scipy.optimize import bisect

from config import Config
from halfspace_model import DomainError
from schemas import CurveState, EventKind, IntegrationResult, ODEParams, OrbitEvent

logger = logging.getLogger(__name__)

HALF_PI = math.pi / 2

_EXPLICIT_SOLVERS = {"RK45": RK45, "DOP853": DOP853}


class IntegrationFailure(RuntimeError):
    """Solver breakdown or step-size underflow; carries the last valid state"""

    def __init__(self, message: str, last_state: CurveState):
        super().__init__(message)
        self.last_state = last_state


def theta_prime(z, theta, a: float):
    """Angle derivative, elementwise on arrays."""
    return -2.0 / (z * z) * (a * np.sin(theta) + z * np.cos(theta))


def gamma_function(z, theta, a: float):
    """Zero exactly where the Euclidean curvature vanishes (z = -a tan(theta))."""
    return a * np.sin(theta) + z * np.cos(theta)


def rhs(state: CurveState, a: float) -> Tuple[float, float, float]:
    if not state.z > 0:
        raise DomainError(f"height must be positive, got z={state.z}")
    c, s = math.cos(state.theta), math.sin(state.theta)
    return c, s, -2.0 / (state.z * state.z) * (a * s + state.z * c)


def _vector_field(a: float, direction: int) -> Callable:
    def fun(sigma, y):
        z, theta = y[1], y[2]
        c, s = math.cos(theta), math.sin(theta)
        return np.array([direction * c, direction * s,
                         direction * (-2.0 / (z * z)) * (a * s + z * c)])
    return fun


def _jacobian_matrix(z: float, theta: float, a: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    dtheta_dz = 4.0 * a * s / z ** 3 + 2.0 * c / (z * z)
    dtheta_dtheta = -2.0 * a * c / (z * z) + 2.0 * s / z
    return np.array([
        [0.0, 0.0, -s],
        [0.0, 0.0, c],
        [0.0, dtheta_dz, dtheta_dtheta],
    ])


def jacobian(state: CurveState, a: float) -> np.ndarray:
    """d(rhs)/d(x, z, theta) at ``state``."""
    if not state.z > 0:
        raise DomainError(f"height must be positive, got z={state.z}")
    return _jacobian_matrix(state.z, state.theta, a)


def _jacobian(a: float, direction: int) -> Callable:
    def jac(sigma, y):
        return direction * _jacobian_matrix(y[1], y[2], a)
    return jac


def _refine(g: Callable[[float], float], lo: float, hi: float) -> float:
    g_hi = g(hi)
    if g_hi == 0.0:
        return hi
    return bisect(g, lo, hi, xtol=Config.EVENT_S_TOL)


def _state(initial: CurveState, direction: int, sigma: float, y: np.ndarray) -> CurveState:
    return CurveState(s=initial.s + direction * sigma, x=float(y[0]), z=float(y[1]), theta=float(y[2]))


def integrate_orbit(initial: CurveState, params: ODEParams, direction: int = 1) -> IntegrationResult:
    """
    Integrate one orbit from ``initial`` until the height cutoff or the arc-length budget.

    ``direction=-1`` integrates towards decreasing s (internally forward in -s).
    Samples lie on the grid initial.s + direction * k * output_step, followed by
    the terminal state. Events carry their bisection-refined states.
    """
    if direction not in (1, -1):
        raise DomainError(f"direction must be +1 or -1, got {direction}")
    if not initial.z > params.z_min:
        raise DomainError(f"initial height {initial.z} must exceed z_min={params.z_min}")

    a = params.a
    fun = _vector_field(a, direction)
    jac = _jacobian(a, direction)
    switch_height = params.stiff_height * abs(a)
    floor = params.resolved_event_floor()

    def make_solver(t0: float, y: np.ndarray, stiff: bool):
        if stiff:
            return Radau(fun, t0, y, params.s_max, rtol=params.rel_tol, atol=params.abs_tol, jac=jac)
        solver_cls = _EXPLICIT_SOLVERS[params.method]
        return solver_cls(fun, t0, y, params.s_max, rtol=params.rel_tol, atol=params.abs_tol)

    watched: List[Tuple[EventKind, Callable[[np.ndarray], float]]] = [
        (EventKind.THETA_ZERO, lambda y: y[2]),
        (EventKind.THETA_HALF_PI, lambda y: y[2] - HALF_PI),
    ]
    if a != 0:
        watched.append((EventKind.GAMMA_CROSSING, lambda y: gamma_function(y[1], y[2], a)))

    def cutoff(y: np.ndarray) -> float:
        return y[1] - params.z_min

    y0 = np.array([initial.x, initial.z, initial.theta], dtype=float)
    stiff = switch_height > 0 and initial.z < switch_height
    solver = make_solver(0.0, y0, stiff)

    sigmas: List[float] = [0.0]
    columns: List[np.ndarray] = [y0]
    events: List[OrbitEvent] = []
    g_prev = [g(y0) for _, g in watched]
    next_k = 1
    termination: Optional[EventKind] = None
    last_y = y0

    while termination is None:
        message = solver.step()
        if solver.status == 'failed':
            raise IntegrationFailure(
                f"integration failed at s={initial.s + direction * solver.t}: {message}",
                _state(initial, direction, solver.t, last_y),
            )
        if solver.step_size is not None and solver.step_size < Config.MIN_STEP:
            raise IntegrationFailure(
                f"step size {solver.step_size:.3e} underflowed below {Config.MIN_STEP:.0e}",
                _state(initial, direction, solver.t, last_y),
            )

        t_old, t_end = solver.t_old, solver.t
        dense = solver.dense_output()
        y_end = solver.y

        if cutoff(y_end) <= 0:
            t_end = _refine(lambda t: cutoff(dense(t)), t_old, t_end)
            y_end = dense(t_end)
            termination = EventKind.HEIGHT_CUTOFF
        elif solver.status == 'finished':
            termination = EventKind.BUDGET

        step_events: List[OrbitEvent] = []
        g_new = []
        for (kind, g), g0 in zip(watched, g_prev):
            g1 = g(y_end)
            g_new.append(g1)
            if g0 == 0.0 or not (g0 * g1 < 0 or g1 == 0.0):
                continue
            root = _refine(lambda t, g=g: g(dense(t)), t_old, t_end)
            state = _state(initial, direction, root, dense(root))
            if kind != EventKind.THETA_ZERO and state.z < floor:
                logger.warning(f"dropping {kind.value} at z={state.z:.3e}: below event floor {floor:.3e}")
                continue
            step_events.append(OrbitEvent(kind=kind, s=state.s, state=state))
        g_prev = g_new
        events.extend(sorted(step_events, key=lambda e: abs(e.s - initial.s)))

        grid = []
        while next_k * params.output_step <= t_end:
            grid.append(next_k * params.output_step)
            next_k += 1
        if grid:
            sigmas.extend(grid)
            columns.extend(np.atleast_2d(dense(np.array(grid))).T)

        if termination is not None:
            if t_end > sigmas[-1]:
                sigmas.append(t_end)
                columns.append(np.asarray(y_end))
            terminal = _state(initial, direction, t_end, y_end)
            events.append(OrbitEvent(kind=termination, s=terminal.s, state=terminal))
        else:
            last_y = y_end
            if not stiff and switch_height > 0 and y_end[1] < switch_height:
                logger.debug(f"handing tail to Radau at z={y_end[1]:.3e}")
                stiff = True
                solver = make_solver(t_end, y_end, stiff)

    data = np.asarray(columns)
    sigma = np.asarray(sigmas)
    logger.info(
        f"orbit a={a} from (z={initial.z}, theta={initial.theta}) direction {direction:+d}: "
        f"{termination.value} at s={initial.s + direction * sigma[-1]:.6g} with {len(events)} events"
    )
    return IntegrationResult(
        s=initial.s + direction * sigma,
        x=data[:, 0],
        z=data[:, 1],
        theta=data[:, 2],
        events=events,
        termination=termination,
        a=a,
        direction=direction,
    )


def orbit_curvature(orbit: IntegrationResult) -> np.ndarray:
    """Signed Euclidean curvature theta' at every sample."""
    return theta_prime(orbit.z, orbit.theta, orbit.a)


def reflect_orbit(orbit: IntegrationResult) -> IntegrationResult:
    """
    Reflect an orbit in the plane x = 0 and reverse its traversal.

    (s, x, z, theta) -> (-s, -x, z, -theta) maps solutions with parameter a
    onto solutions with parameter -a, so the a < 0 family is the mirror image
    of the |a| family.
    """
    def flip(state: CurveState) -> CurveState:
        return CurveState(s=-state.s, x=-state.x, z=state.z, theta=-state.theta)

    return IntegrationResult(
        s=-orbit.s,
        x=-orbit.x,
        z=orbit.z.copy(),
        theta=-orbit.theta,
        events=[OrbitEvent(kind=e.kind, s=-e.s, state=flip(e.state)) for e in orbit.events],
        termination=orbit.termination,
        a=-orbit.a,
        direction=-orbit.direction,
    )


# First integral of the a = 0 family

def first_integral_a0(state: CurveState) -> float:
    """z^4 / cos^2(theta); +inf where the curve is vertical."""
    c = math.cos(state.theta)
    if abs(c) < 1e-15:
        return math.inf
    return state.z ** 4 / (c * c)


def first_integral_a0_field(z: np.ndarray, theta: np.ndarray) -> np.ndarray:
    c = np.cos(theta)
    with np.errstate(divide='ignore'):
        return np.where(np.abs(c) < 1e-15, np.inf, z ** 4 / (c * c))


def first_integral_a0_graph(z: float, dz: float) -> float:
    """Graph-chart form (1 + z'^2) z^4 of the same constant."""
    return (1.0 + dz * dz) * z ** 4


# Graph-chart residuals

def graph_residual(u, du, ddu, a: float):
    """u''/(1 + u'^2) + 2/u + 2 a u'/u^2 for a graph x -> (x, 0, u(x))."""
    u = np.asarray(u, dtype=float) if not np.isscalar(u) else u
    if np.any(np.asarray(u) <= 0):
        raise DomainError(f"graph height must be positive, got u={u}")
    return ddu / (1.0 + du * du) + 2.0 / u + 2.0 * a * du / (u * u)


def minimal_graph_residual(z, dz, ddz):
    return graph_residual(z, dz, ddz, 0.0)


def graph_residual_a1(u, du, ddu):
    return graph_residual(u, du, ddu, 1.0)

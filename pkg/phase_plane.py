"""
Phase plane of the grim reaper system.

The angle equation does not involve x, so every orbit projects to a trace in
the half-strip {(z, theta): z > 0}. The zero-curvature curve z = -tan(theta)
and the line theta = 0 split the reduced chart (-pi/2, pi] into regions where
z and theta are strictly monotone.
"""
import logging
import math
from typing import Tuple

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree

from halfspace_model import DomainError
from reaper_ode import gamma_function, integrate_orbit
from schemas import (
    CurveState,
    EventKind,
    IntegrationResult,
    ODEParams,
    OrbitEvent,
    OrbitReport,
    PhasePoint,
    RegionTag,
)

logger = logging.getLogger(__name__)

# distance to the theta = 0 / pi lines and to Gamma under which a sign counts as zero
TIE_TOL = 1e-12


class ClassificationFailure(RuntimeError):
    """Orbit is missing (or duplicates) an event its family requires"""
    pass


def gamma_curve(theta: float) -> float:
    """Height of the zero-curvature curve: z = -tan(theta)."""
    lower = -math.pi / 2 < theta < 0
    upper = math.pi / 2 < theta < math.pi
    if not (lower or upper):
        raise DomainError(
            f"Gamma is only defined for theta in (-pi/2, 0) or (pi/2, pi), got {theta}"
        )
    return -math.tan(theta)


def gamma_polyline(branch: str = "lower", z_max: float = 4.0, n: int = 200) -> pd.DataFrame:
    """Sample one branch of Gamma as (z, theta) rows, z in (0, z_max]."""
    if z_max <= 0 or n < 2:
        raise DomainError("gamma polyline needs z_max > 0 and n >= 2")
    z = np.linspace(z_max / n, z_max, n)
    if branch == "lower":
        theta = -np.arctan(z)
    elif branch == "upper":
        theta = np.pi - np.arctan(z)
    else:
        raise DomainError(f"unknown Gamma branch {branch!r}; expected 'lower' or 'upper'")
    return pd.DataFrame({'z': z, 'theta': theta})


def region_signs(z, theta) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized monotonicity signs in the a = 1 chart."""
    z = np.asarray(z, dtype=float)
    theta = np.asarray(theta, dtype=float)
    sin_t = np.sin(theta)
    cos_t = np.cos(theta)

    dz_sign = np.where(np.abs(sin_t) <= TIE_TOL, 0, np.sign(sin_t)).astype(int)

    g = gamma_function(z, theta, 1.0)
    with np.errstate(divide='ignore', invalid='ignore'):
        on_gamma = (np.abs(cos_t) > 0) & (np.abs(g / cos_t) <= TIE_TOL)
    dtheta_sign = np.where(on_gamma, 0, np.sign(-g)).astype(int)
    return dz_sign, dtheta_sign


def classify_region(p: PhasePoint) -> RegionTag:
    dz_sign, dtheta_sign = region_signs(p.z, p.theta)
    return RegionTag(dz_sign=int(dz_sign), dtheta_sign=int(dtheta_sign))


def region_grid(z_values, theta_values) -> pd.DataFrame:
    """Region tags on the tensor grid z_values x theta_values."""
    z_values = np.asarray(z_values, dtype=float)
    if np.any(z_values <= 0):
        raise DomainError("region grid heights must be positive")
    zz, tt = np.meshgrid(z_values, np.asarray(theta_values, dtype=float), indexing='ij')
    dz_sign, dtheta_sign = region_signs(zz, tt)
    symbol = {-1: "-", 0: "0", 1: "+"}
    labels = [f"{symbol[i]}{symbol[j]}" for i, j in zip(dz_sign.ravel(), dtheta_sign.ravel())]
    return pd.DataFrame({
        'z': zz.ravel(),
        'theta': tt.ravel(),
        'dz_sign': dz_sign.ravel(),
        'dtheta_sign': dtheta_sign.ravel(),
        'label': labels,
    })


def reduce_to_chart(theta):
    """
    Reduce angles to the chart (-pi/2, pi].

    Angles are first taken modulo 2*pi into [-pi/2, 3*pi/2); the part outside the
    chart is brought back by the orbit symmetry theta -> theta - pi (or + pi at
    theta = -pi/2).
    """
    theta = np.asarray(theta, dtype=float)
    w = np.mod(theta + np.pi / 2, 2 * np.pi) - np.pi / 2
    w = np.where(w > np.pi, w - np.pi, w)
    w = np.where(w <= -np.pi / 2, w + np.pi, w)
    return float(w) if w.ndim == 0 else w


def phase_trace(orbit: IntegrationResult) -> pd.DataFrame:
    """
    (s, z, theta) samples of an orbit in the a = 1 chart of Gamma and the regions.

    For a > 0 the map (s, z) -> (s/a, z/a) carries the orbit to a solution of the
    a = 1 equation with the same angle; other values of a are returned as is.
    """
    scale = orbit.a if orbit.a > 0 else 1.0
    return pd.DataFrame({'s': orbit.s / scale, 'z': orbit.z / scale, 'theta': orbit.theta})


def symmetry_dual(orbit: IntegrationResult) -> IntegrationResult:
    """
    Dual orbit (s, x, z, theta) -> (-s, x, z, theta - pi).

    The point set is unchanged and traversed backwards, so the sample order (and
    the integration order) is kept while the direction flips. Event kinds keep
    referring to the original angle.
    """
    def dual(state: CurveState) -> CurveState:
        return CurveState(s=-state.s, x=state.x, z=state.z, theta=state.theta - math.pi)

    return IntegrationResult(
        s=-orbit.s,
        x=orbit.x.copy(),
        z=orbit.z.copy(),
        theta=orbit.theta - np.pi,
        events=[OrbitEvent(kind=e.kind, s=-e.s, state=dual(e.state)) for e in orbit.events],
        termination=orbit.termination,
        a=orbit.a,
        direction=-orbit.direction,
    )


def reintegration_defect(orbit: IntegrationResult, params: ODEParams) -> float:
    """
    Re-integrate from the first sample of ``orbit`` and return the largest
    pointwise deviation in (x, z, theta) over the shared output grid.
    """
    if len(orbit) < 3:
        raise DomainError("orbit needs at least three samples to be re-integrated")
    step = abs(float(orbit.s[1] - orbit.s[0]))
    span = abs(float(orbit.s[-1] - orbit.s[0]))
    rerun_params = params.model_copy(update={'a': orbit.a, 'output_step': step, 's_max': span})
    rerun = integrate_orbit(orbit.state(0), rerun_params, direction=orbit.direction)

    # last samples may be off-grid terminal states
    m = min(len(orbit), len(rerun)) - 1
    defect = max(
        float(np.max(np.abs(orbit.x[:m] - rerun.x[:m]))),
        float(np.max(np.abs(orbit.z[:m] - rerun.z[:m]))),
        float(np.max(np.abs(orbit.theta[:m] - rerun.theta[:m]))),
    )
    logger.info(f"re-integration defect {defect:.3e} over {m} samples")
    return defect


def min_trace_distance(first: IntegrationResult, second: IntegrationResult,
                       z_lo: float, z_hi: float) -> float:
    """Smallest (z, theta) distance between two traces inside the band z_lo <= z <= z_hi."""
    def window(orbit: IntegrationResult) -> np.ndarray:
        keep = (orbit.z >= z_lo) & (orbit.z <= z_hi)
        return np.column_stack([orbit.z[keep], orbit.theta[keep]])

    pts_a, pts_b = window(first), window(second)
    if len(pts_a) == 0 or len(pts_b) == 0:
        raise DomainError(f"no samples inside the window [{z_lo}, {z_hi}]")
    distances, _ = cKDTree(pts_b).query(pts_a)
    return float(np.min(distances))


def _is_bigraph(forward: IntegrationResult, backward: IntegrationResult, turning_s: float) -> bool:
    if not np.all(np.diff(forward.x) > 0):
        return False
    before = np.abs(backward.s) <= abs(turning_s)
    x_before, x_after = backward.x[before], backward.x[~before]
    return bool(np.all(np.diff(x_before) < 0) and np.all(np.diff(x_after) > 0))


def trace_halves(z0: float, params: ODEParams) -> Tuple[IntegrationResult, IntegrationResult]:
    """
    Forward and backward halves of the orbit through the apex (z0, 0).

    Orbits with a < 0 are mirror images of the |a| orbit, so the halves are
    always integrated for |a|.
    """
    if params.a == 0:
        raise DomainError("orbit classification needs a != 0; a = 0 orbits are minimal reapers")
    if not z0 > params.z_min:
        raise DomainError(f"z0 must exceed z_min ({z0} <= {params.z_min})")
    run = params.model_copy(update={'a': abs(params.a)})
    apex = CurveState(s=0.0, x=0.0, z=z0, theta=0.0)
    return integrate_orbit(apex, run, direction=1), integrate_orbit(apex, run, direction=-1)


def trace_and_classify(z0: float, params: ODEParams) -> OrbitReport:
    """
    Integrate both halves of the orbit through the apex (z0, 0) and classify it.

    a < 0 orbits are classified in mirror-normalized form and reported with
    ``mirrored=True``.
    """
    forward, backward = trace_halves(z0, params)
    return classify_halves(z0, params, forward, backward)


def classify_halves(z0: float, params: ODEParams, forward: IntegrationResult,
                    backward: IntegrationResult) -> OrbitReport:
    """Build the OrbitReport from the two (|a|-normalized) halves of trace_halves."""
    mirrored = params.a < 0
    run = params.model_copy(update={'a': abs(params.a)})

    gamma_events = forward.events_of(EventKind.GAMMA_CROSSING)
    if len(gamma_events) != 1:
        raise ClassificationFailure(
            f"expected exactly one forward GammaCrossing within s_max={run.s_max}, found {len(gamma_events)}"
        )
    halfpi_events = backward.events_of(EventKind.THETA_HALF_PI)
    if len(halfpi_events) != 1:
        raise ClassificationFailure(
            f"expected exactly one backward ThetaHalfPi crossing within s_max={run.s_max}, "
            f"found {len(halfpi_events)}"
        )

    for name, half in (("forward", forward), ("backward", backward)):
        if not np.all(np.diff(half.z) < 0):
            raise ClassificationFailure(f"height is not strictly decreasing on the {name} half")

    turning = halfpi_events[0].state
    report = OrbitReport(
        apex_height=z0,
        a=params.a,
        z_min=params.z_min,
        gamma_crossing_s=gamma_events[0].s,
        gamma_crossing_z=gamma_events[0].state.z,
        theta_halfpi_crossing_s=halfpi_events[0].s,
        turning_point_x=turning.x,
        forward_asymptote=forward.terminal.theta,
        backward_asymptote=backward.terminal.theta,
        forward_terminal_z=forward.terminal.z,
        backward_terminal_z=backward.terminal.z,
        curvature_sign_changes=len(gamma_events) + len(backward.events_of(EventKind.GAMMA_CROSSING)),
        max_height=float(max(np.max(forward.z), np.max(backward.z))),
        is_bigraph=_is_bigraph(forward, backward, turning.s),
        mirrored=mirrored,
    )
    logger.info(
        f"classified z0={z0}, a={params.a}: Gamma at s={report.gamma_crossing_s:.6g}, "
        f"turning at s={report.theta_halfpi_crossing_s:.6g}, "
        f"asymptotes {report.forward_asymptote:.3e} / {report.backward_asymptote:.6f}"
    )
    return report

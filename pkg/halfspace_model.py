"""
Upper half-space model of hyperbolic 3-space.

Metric scaling, the parabolic Killing field xi = a d/dx + b d/dy, and the bridge
between Euclidean and hyperbolic curvature data. The hyperbolic unit normal is
never stored: every formula goes through N = z * N_e.
"""
import logging
import math
from typing import Sequence, Union

import numpy as np

from config import Config
from schemas import CurvatureData, HalfSpacePoint, KillingFieldParams

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


class DomainError(ValueError):
    """Input outside the domain of a half-space operation"""
    pass


class ConsistencyError(ValueError):
    """Curvature data that violates H = z*H_e + (N_e)_3"""
    pass


def _require_positive_height(z: ArrayLike) -> None:
    if np.any(np.asarray(z) <= 0):
        raise DomainError(f"height must be positive, got z={z}")


def hyp_inner(p: HalfSpacePoint, u: Sequence[float], v: Sequence[float]) -> float:
    """Hyperbolic inner product of two tangent vectors at p: <u, v>_e / z^2."""
    _require_positive_height(p.z)
    return float(np.dot(u, v)) / (p.z * p.z)


def hyp_norm(p: HalfSpacePoint, u: Sequence[float]) -> float:
    return math.sqrt(hyp_inner(p, u, u))


def mean_curvature_from_euclidean(z: ArrayLike, H_e: ArrayLike, Ne3: ArrayLike) -> ArrayLike:
    """
    Hyperbolic mean curvature from Euclidean data: H = z*H_e + (N_e)_3.

    Works elementwise on arrays of equal shape.
    """
    _require_positive_height(z)
    return z * H_e + Ne3


def killing_inner(z: ArrayLike, N_e: np.ndarray, k: KillingFieldParams) -> ArrayLike:
    """
    <N, xi> for N = z*N_e, which reduces to <N_e, (a, b, 0)>_e / z.

    N_e may be a single vector or an array whose last axis has length 3.
    """
    _require_positive_height(z)
    return (np.asarray(N_e, dtype=float) @ k.horizontal()) / z


def soliton_residual_field(H: ArrayLike, N_e: np.ndarray, z: ArrayLike,
                           k: KillingFieldParams) -> ArrayLike:
    """Vectorized H - <N, xi>."""
    return H - killing_inner(z, N_e, k)


def soliton_residual_pointwise(c: CurvatureData, p: HalfSpacePoint, k: KillingFieldParams,
                               tol: float = None) -> float:
    """Residual of H = <N, xi> at a single point with consistent curvature data."""
    _require_positive_height(p.z)
    tol = Config.GEOMETRY_TOL if tol is None else tol
    expected = mean_curvature_from_euclidean(p.z, c.H_e, c.N_e[2])
    if abs(expected - c.H) > tol:
        raise ConsistencyError(
            f"curvature data inconsistent at z={p.z}: H={c.H} but z*H_e + N3 = {expected}"
        )
    return float(soliton_residual_field(c.H, np.asarray(c.N_e), p.z, k))


def curvature_data(p: HalfSpacePoint, H_e: float, N_e: Sequence[float]) -> CurvatureData:
    """Assemble consistent CurvatureData from Euclidean quantities."""
    H = mean_curvature_from_euclidean(p.z, H_e, N_e[2])
    return CurvatureData(H_e=H_e, N_e=tuple(float(c) for c in N_e), H=float(H))


def reverse_orientation(c: CurvatureData) -> CurvatureData:
    return CurvatureData(H_e=-c.H_e, N_e=tuple(-n for n in c.N_e), H=-c.H)


# Isometries and similarities used by the equivariance checks

def translate_along_killing(p: HalfSpacePoint, k: KillingFieldParams, t: float) -> HalfSpacePoint:
    """Flow of xi for time t: the horizontal translation by t*(a, b, 0)."""
    return HalfSpacePoint(x=p.x + t * k.a, y=p.y + t * k.b, z=p.z)


def reflect_vertical(p: HalfSpacePoint) -> HalfSpacePoint:
    """Reflection in the vertical plane x = 0."""
    return HalfSpacePoint(x=-p.x, y=p.y, z=p.z)


def homothety(p: HalfSpacePoint, lam: float) -> HalfSpacePoint:
    if lam <= 0:
        raise DomainError(f"homothety factor must be positive, got {lam}")
    return HalfSpacePoint(x=lam * p.x, y=lam * p.y, z=lam * p.z)


def rotate_killing_field(k: KillingFieldParams, phi: float) -> KillingFieldParams:
    """
    Components of xi in the frame rotated by phi about the z-axis.

    A parabolic surface whose rulings point along (-sin phi, cos phi, 0) is a
    translator for xi exactly when its profile solves the ruling-frame equation
    with a' = a cos phi + b sin phi.
    """
    c, s = math.cos(phi), math.sin(phi)
    return KillingFieldParams(a=c * k.a + s * k.b, b=-s * k.a + c * k.b)

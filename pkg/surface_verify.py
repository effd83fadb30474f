"""
Surface meshes built from generating curves, and the checks run on them.

Three invariant surface classes are meshed on a parametric (s, t) grid:

    Parabolic       Psi(s, t) = (x(s), t, z(s))                rulings along y
    Spherical       Psi(s, t) = (x(s) cos t, x(s) sin t, z(s)) revolution about the z-axis
    HyperbolicCone  Psi(s, t) = t * (x(s), y(s), 1)            radial graph over a plane curve

Builders attach analytic curvature data with the normal Psi_s x Psi_t / |Psi_s x Psi_t|.
mesh_curvature_fd recomputes the same data from the vertices alone, so the two
sources can be cross-checked.
"""
import logging
import math
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from config import Config
from halfspace_model import DomainError, killing_inner, mean_curvature_from_euclidean
from schemas import (
    ConeClass,
    ConeProfile,
    ConeReport,
    FourierObstruction,
    GeneratingCurve,
    KillingFieldParams,
    Provenance,
    ResidualReport,
    SurfaceMesh,
)

logger = logging.getLogger(__name__)


class AxisDegeneracyError(DomainError):
    """Profile touches the axis of revolution"""
    pass


class DegenerateProfileError(DomainError):
    """Cone profile with |alpha|^2 - <alpha', alpha>^2 <= 0"""
    pass


class SingularMetricError(DomainError):
    """First fundamental form is degenerate at a vertex"""

    def __init__(self, message: str, vertex: Tuple[int, int]):
        super().__init__(message)
        self.vertex = vertex


# Mesh builders

def extrude_parabolic(curve: GeneratingCurve, t_lo: float = -1.0, t_hi: float = 1.0, nt: int = 16,
                      ruling_angle: float = 0.0) -> SurfaceMesh:
    """
    Extrude a generating curve along horizontal rulings.

    With ``ruling_angle`` phi the whole surface is rotated about the z-axis, so the
    rulings point along (-sin phi, cos phi, 0); see rotate_killing_field.
    """
    if nt < 2 or not t_lo < t_hi:
        raise DomainError(f"need nt >= 2 and t_lo < t_hi, got nt={nt}, [{t_lo}, {t_hi}]")
    t = np.linspace(t_lo, t_hi, nt)
    ns = len(curve)
    c, s = math.cos(ruling_angle), math.sin(ruling_angle)

    X = np.repeat(curve.x[:, None], nt, axis=1)
    T = np.repeat(t[None, :], ns, axis=0)
    Z = np.repeat(curve.z[:, None], nt, axis=1)
    vertices = np.stack([c * X - s * T, s * X + c * T, Z], axis=-1)

    sin_t = np.sin(curve.theta)[:, None]
    cos_t = np.repeat(np.cos(curve.theta)[:, None], nt, axis=1)
    normals = np.stack([
        np.repeat(-sin_t * c, nt, axis=1),
        np.repeat(-sin_t * s, nt, axis=1),
        cos_t,
    ], axis=-1)

    H_e = np.repeat(curve.curvature[:, None] / 2.0, nt, axis=1)
    H = mean_curvature_from_euclidean(Z, H_e, normals[..., 2])
    logger.debug(f"parabolic mesh {ns}x{nt} from {curve.family.value} curve")
    return SurfaceMesh(s=curve.s.copy(), t=t, vertices=vertices, normals=normals, H_e=H_e, H=H,
                       provenance=Provenance.PARABOLIC)


def revolve_spherical(curve: GeneratingCurve, nt: int = 32) -> SurfaceMesh:
    """Revolve a profile about the z-axis over t in [0, 2*pi) with nt uniform steps."""
    if np.any(curve.x <= 0):
        raise AxisDegeneracyError("profile must stay off the axis (x > 0) to be revolved")
    if nt < 2:
        raise DomainError(f"need nt >= 2, got {nt}")
    t = np.linspace(0.0, 2 * math.pi, nt, endpoint=False)
    x = curve.x[:, None]
    z = np.repeat(curve.z[:, None], nt, axis=1)
    sin_th, cos_th = np.sin(curve.theta)[:, None], np.cos(curve.theta)[:, None]
    cos_t, sin_t = np.cos(t)[None, :], np.sin(t)[None, :]

    vertices = np.stack([x * cos_t, x * sin_t, z], axis=-1)
    normals = np.stack([-sin_th * cos_t, -sin_th * sin_t, np.repeat(cos_th, nt, axis=1)], axis=-1)
    # meridian curvature theta' and parallel curvature z'/x
    H_e = np.repeat((curve.curvature[:, None] + sin_th / x) / 2.0, nt, axis=1)
    H = mean_curvature_from_euclidean(z, H_e, normals[..., 2])
    return SurfaceMesh(s=curve.s.copy(), t=t, vertices=vertices, normals=normals, H_e=H_e, H=H,
                       provenance=Provenance.SPHERICAL)


# Cone profiles

def line_profile(point: Sequence[float], direction: Sequence[float], s_lo: float = -1.0, s_hi: float = 1.0,
                 n_samples: int = 33) -> ConeProfile:
    """Straight line point + s * direction (direction normalized) at height 1."""
    d = np.asarray(direction, dtype=float)
    norm = float(np.linalg.norm(d))
    if norm == 0:
        raise DomainError("line direction must be nonzero")
    d = d / norm
    s = np.linspace(s_lo, s_hi, n_samples)
    zeros = np.zeros(n_samples)
    return ConeProfile(s=s, x=point[0] + s * d[0], y=point[1] + s * d[1],
                       dx=np.full(n_samples, d[0]), dy=np.full(n_samples, d[1]), ddx=zeros, ddy=zeros.copy())


def circle_cone_profile(radius: float = 1.0, s_lo: float = 0.0, s_hi: Optional[float] = None,
                        n_samples: int = 65) -> ConeProfile:
    """Arc-length circle of the given radius about the origin."""
    if not radius > 0:
        raise DomainError(f"radius must be positive, got {radius}")
    s_hi = 2 * math.pi * radius if s_hi is None else s_hi
    s = np.linspace(s_lo, s_hi, n_samples)
    phi = s / radius
    return ConeProfile(s=s, x=radius * np.cos(phi), y=radius * np.sin(phi),
                       dx=-np.sin(phi), dy=np.cos(phi),
                       ddx=-np.cos(phi) / radius, ddy=-np.sin(phi) / radius)


def _cone_terms(profile: ConeProfile) -> Tuple[np.ndarray, ...]:
    """alpha' x alpha, |alpha|^2 and D = |alpha|^2 - <alpha', alpha>^2 per sample."""
    cross = np.stack([profile.dy, -profile.dx, profile.dx * profile.y - profile.dy * profile.x], axis=-1)
    alpha_sq = profile.x ** 2 + profile.y ** 2 + 1.0
    along = profile.dx * profile.x + profile.dy * profile.y
    D = alpha_sq - along ** 2
    bad = np.flatnonzero(D <= 0)
    if len(bad):
        raise DegenerateProfileError(f"profile is degenerate at sample {int(bad[0])} (D={D[bad[0]]:.3e})")
    return cross, alpha_sq, D


def _cone_left_side(profile: ConeProfile, cross: np.ndarray, alpha_sq: np.ndarray, D: np.ndarray) -> np.ndarray:
    twist = cross[:, 0] * profile.ddx + cross[:, 1] * profile.ddy
    return alpha_sq * twist / (2.0 * D) + cross[:, 2]


def hyperbolic_cone_check(profile: ConeProfile, k: KillingFieldParams, tol: Optional[float] = None) -> ConeReport:
    """
    Split the soliton equation of the cone t * alpha(s) into its t-independent
    part L(s) and the coefficient R(s) of 1/t; it holds for every t only if
    both vanish identically.
    """
    tol = Config.GEOMETRY_TOL if tol is None else tol
    cross, alpha_sq, D = _cone_terms(profile)
    L = _cone_left_side(profile, cross, alpha_sq, D)
    R = k.a * cross[:, 0] + k.b * cross[:, 1]

    L_max, R_max = float(np.max(np.abs(L))), float(np.max(np.abs(R)))
    L_vanishes, R_vanishes = L_max <= tol, R_max <= tol
    if L_vanishes and R_vanishes:
        classification = ConeClass.TOTALLY_GEODESIC
    elif R_vanishes:
        classification = ConeClass.EQUIDISTANT
    else:
        classification = ConeClass.NOT_TRANSLATOR
    logger.info(f"cone check: max|L|={L_max:.3e}, max|R|={R_max:.3e} -> {classification.value}")
    return ConeReport(s=profile.s.copy(), L=L, R=R, L_max_abs=L_max, R_max_abs=R_max,
                      L_vanishes=L_vanishes, R_vanishes=R_vanishes, classification=classification)


def radial_cone(profile: ConeProfile, t_lo: float = 0.5, t_hi: float = 2.0, nt: int = 16) -> SurfaceMesh:
    """Mesh of Psi(s, t) = t * (x(s), y(s), 1) with H = L / sqrt(D)."""
    if not 0 < t_lo < t_hi:
        raise DomainError(f"cone heights must satisfy 0 < t_lo < t_hi, got [{t_lo}, {t_hi}]")
    cross, alpha_sq, D = _cone_terms(profile)
    L = _cone_left_side(profile, cross, alpha_sq, D)
    root_D = np.sqrt(D)
    t = np.linspace(t_lo, t_hi, nt)

    alpha = np.stack([profile.x, profile.y, np.ones_like(profile.x)], axis=-1)
    vertices = t[None, :, None] * alpha[:, None, :]
    normals = np.repeat((cross / root_D[:, None])[:, None, :], nt, axis=1)
    twist = cross[:, 0] * profile.ddx + cross[:, 1] * profile.ddy
    H_e = alpha_sq[:, None] * twist[:, None] / (2.0 * t[None, :] * D[:, None] * root_D[:, None])
    H = np.repeat((L / root_D)[:, None], nt, axis=1)
    return SurfaceMesh(s=profile.s.copy(), t=t, vertices=vertices, normals=normals, H_e=H_e, H=H,
                       provenance=Provenance.HYPERBOLIC_CONE)


def spherical_obstruction(curve: GeneratingCurve, k: KillingFieldParams) -> FourierObstruction:
    """
    Soliton defect of the revolved profile in the basis {1, cos t, sin t}:

        c0 = (z/2)(theta' + z'/x) + x',  c1 = a z'/z,  c2 = b z'/z
    """
    if np.any(curve.x <= 0):
        raise AxisDegeneracyError("spherical obstruction needs x > 0 at every sample")
    dz = np.sin(curve.theta)
    c0 = curve.z / 2.0 * (curve.curvature + dz / curve.x) + np.cos(curve.theta)
    return FourierObstruction(s=curve.s.copy(), c0=c0, c1=k.a * dz / curve.z, c2=k.b * dz / curve.z)


# Finite-difference curvature

def _uniform_spacing(coords: np.ndarray, name: str) -> float:
    steps = np.diff(coords)
    h = float(np.mean(steps))
    if np.max(np.abs(steps - h)) > 1e-9 * abs(h):
        raise DomainError(f"finite differences need a uniform {name} grid")
    return h


def _second_derivative(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Central second difference with second-order one-sided stencils on the two boundary rows."""
    f = np.moveaxis(f, axis, 0)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / (h * h)
    out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / (h * h)
    out[-1] = (2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]) / (h * h)
    return np.moveaxis(out, 0, axis)


def mesh_curvature_fd(mesh: SurfaceMesh) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Recompute (H_e, N_e, H) from the vertices with second-order differences of
    the parametrization, using the first and second fundamental forms.
    """
    if mesh.ns < 4 or mesh.nt < 4:
        raise DomainError(f"finite differences need a grid of at least 4x4, got {mesh.ns}x{mesh.nt}")
    h_s = _uniform_spacing(mesh.s, "s")
    h_t = _uniform_spacing(mesh.t, "t")
    V = mesh.vertices

    Psi_s = np.gradient(V, h_s, axis=0, edge_order=2)
    Psi_t = np.gradient(V, h_t, axis=1, edge_order=2)
    Psi_ss = _second_derivative(V, h_s, axis=0)
    Psi_tt = _second_derivative(V, h_t, axis=1)
    Psi_st = np.gradient(Psi_s, h_t, axis=1, edge_order=2)

    E = np.einsum('ijk,ijk->ij', Psi_s, Psi_s)
    F = np.einsum('ijk,ijk->ij', Psi_s, Psi_t)
    G = np.einsum('ijk,ijk->ij', Psi_t, Psi_t)
    det = E * G - F * F
    bad = np.argwhere(det <= 1e-14 * E * G)
    if len(bad):
        i, j = (int(v) for v in bad[0])
        raise SingularMetricError(f"degenerate first fundamental form at vertex ({i}, {j})", vertex=(i, j))

    n = np.cross(Psi_s, Psi_t)
    N = mesh.orientation * n / np.linalg.norm(n, axis=-1, keepdims=True)
    e = np.einsum('ijk,ijk->ij', Psi_ss, N)
    f = np.einsum('ijk,ijk->ij', Psi_st, N)
    g = np.einsum('ijk,ijk->ij', Psi_tt, N)

    H_e = (e * G - 2.0 * f * F + g * E) / (2.0 * det)
    H = mean_curvature_from_euclidean(mesh.heights, H_e, N[..., 2])
    return H_e, N, H


def mesh_mean_curvature_fd(mesh: SurfaceMesh) -> np.ndarray:
    """Per-vertex hyperbolic mean curvature from the vertices alone."""
    return mesh_curvature_fd(mesh)[2]


def _report(per_vertex: np.ndarray, spacing: float, source: str) -> ResidualReport:
    magnitudes = np.abs(per_vertex).ravel()
    # fsum keeps the mean independent of summation order
    return ResidualReport(
        max_abs=float(np.max(magnitudes)),
        mean_abs=math.fsum(magnitudes) / len(magnitudes),
        per_vertex=per_vertex,
        grid_spacing=spacing,
        source=source,
    )


def soliton_residual(mesh: SurfaceMesh, k: KillingFieldParams, source: str = "analytic") -> ResidualReport:
    """Per-vertex H - <N, xi> with H and N from the stored data or from finite differences."""
    k.require_nontrivial()
    if source == "analytic":
        H, N = mesh.H, mesh.normals
    elif source == "finite_difference":
        _, N, H = mesh_curvature_fd(mesh)
    else:
        raise DomainError(f"unknown curvature source {source!r}; expected 'analytic' or 'finite_difference'")
    per_vertex = H - killing_inner(mesh.heights, N, k)
    spacing = max(float(np.max(np.abs(np.diff(mesh.s)))), float(np.max(np.abs(np.diff(mesh.t)))))
    report = _report(per_vertex, spacing, source)
    logger.info(f"{mesh.provenance.value} mesh residual ({source}): max {report.max_abs:.3e}, "
                f"mean {report.mean_abs:.3e}")
    return report


def graph_pde_residual(u: np.ndarray, k: KillingFieldParams, h: Union[float, Tuple[float, float]]) -> ResidualReport:
    """
    Soliton equation for a graph z = u(x, y):

        div(Du / W) + 2 (u + a u_x + b u_y) / (u^2 W),   W = sqrt(1 + |Du|^2)

    with u indexed [x, y]. Fluxes and divergence use central differences; the two
    outer layers, where the stencils are one-sided, are cropped.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim != 2 or min(u.shape) < 5:
        raise DomainError(f"u must be a 2-D grid of at least 5x5, got shape {u.shape}")
    if np.any(u <= 0):
        raise DomainError("graph height must be positive everywhere")
    hx, hy = (h, h) if np.isscalar(h) else h

    u_x, u_y = np.gradient(u, hx, hy)
    W = np.sqrt(1.0 + u_x ** 2 + u_y ** 2)
    div = np.gradient(u_x / W, hx, axis=0) + np.gradient(u_y / W, hy, axis=1)
    residual = div + 2.0 * (u + k.a * u_x + k.b * u_y) / (u * u * W)
    return _report(residual[2:-2, 2:-2], max(hx, hy), "graph_pde")


def convergence_orders(errors: Sequence[float]) -> List[float]:
    """Observed orders log2(e_k / e_{k+1}) for errors on successively halved grids."""
    return [math.log2(coarse / fine) for coarse, fine in zip(errors[:-1], errors[1:])]

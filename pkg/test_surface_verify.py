import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from curve_factory import (
    build_reaper,
    build_vertical_plane,
    circle_profile,
    grid_window,
    horizontal_profile,
    to_bigraph,
)
from halfspace_model import DomainError, rotate_killing_field
from schemas import ConeClass, ConeProfile, CurveFamily, GeneratingCurve, KillingFieldParams
from surface_verify import (
    AxisDegeneracyError,
    DegenerateProfileError,
    SingularMetricError,
    circle_cone_profile,
    convergence_orders,
    extrude_parabolic,
    graph_pde_residual,
    hyperbolic_cone_check,
    line_profile,
    mesh_curvature_fd,
    mesh_mean_curvature_fd,
    radial_cone,
    revolve_spherical,
    soliton_residual,
    spherical_obstruction,
)


# Parabolic surfaces

@pytest.mark.parametrize("z0", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("b", [0.0, 3.0])
def test_extruded_reaper_is_a_translator(default_params, z0, b):
    curve = build_reaper(z0, 1.0, default_params)
    mesh = extrude_parabolic(curve, nt=8)
    report = soliton_residual(mesh, KillingFieldParams(a=1.0, b=b))
    assert report.max_abs < 1e-8
    assert report.source == "analytic"


@pytest.mark.parametrize("z0", [0.5, 1.0, 2.0])
def test_finite_difference_residual_converges(tight_params, z0):
    # grid and window scale with the apex height, as the curvature does
    step = 0.005 * z0
    half = 0.24 * z0 + 1e-9
    curve = build_reaper(z0, 1.0, tight_params.model_copy(update={'output_step': step}))
    k = KillingFieldParams(a=1.0, b=3.0)
    errors = []
    for level, stride in enumerate((4, 2, 1)):
        mesh = extrude_parabolic(grid_window(curve, -half, half, stride=stride), nt=8)
        per_vertex = soliton_residual(mesh, k, "finite_difference").per_vertex
        # nodes shared with the coarsest grid
        errors.append(float(np.max(np.abs(per_vertex[::2 ** level]))))
    orders = convergence_orders(errors)
    assert min(orders) >= 1.9



def test_fd_curvature_matches_analytic(reaper_one_tight):
    mesh = extrude_parabolic(grid_window(reaper_one_tight, -0.5, 0.5), nt=6)
    H_e, N, H = mesh_curvature_fd(mesh)
    assert_allclose(N, mesh.normals, atol=1e-3)
    assert_allclose(H, mesh.H, atol=1e-2)
    assert_allclose(mesh_mean_curvature_fd(mesh), H)


def test_rotated_rulings_use_rotated_field(default_params):
    phi = math.pi / 6
    k = KillingFieldParams(a=math.cos(phi), b=math.sin(phi))
    assert rotate_killing_field(k, phi).a == pytest.approx(1.0)
    mesh = extrude_parabolic(build_reaper(1.0, 1.0, default_params), nt=8, ruling_angle=phi)
    assert soliton_residual(mesh, k).max_abs < 1e-8


def test_vertical_plane_is_exactly_minimal():
    mesh = extrude_parabolic(build_vertical_plane(0.5, 2.0, n_samples=9), nt=5)
    assert np.all(mesh_mean_curvature_fd(mesh) == 0.0)
    assert soliton_residual(mesh, KillingFieldParams(a=0.0, b=1.0)).max_abs < 1e-15


def test_horosphere_has_constant_curvature_one():
    mesh = extrude_parabolic(horizontal_profile(0.8, n_samples=9), nt=5)
    assert_allclose(mesh.H, 1.0)
    assert_allclose(mesh_mean_curvature_fd(mesh), 1.0, atol=1e-12)
    # not a translator: the residual is H itself
    assert soliton_residual(mesh, KillingFieldParams(a=1.0, b=0.0)).max_abs == pytest.approx(1.0)


def test_flipped_mesh_negates_curvature(reaper_one_tight):
    mesh = extrude_parabolic(grid_window(reaper_one_tight, -0.3, 0.3), nt=5)
    flipped = mesh.flipped()
    assert flipped.orientation == -1
    assert_allclose(mesh_mean_curvature_fd(flipped), -mesh_mean_curvature_fd(mesh))
    k = KillingFieldParams(a=1.0, b=0.0)
    assert_allclose(soliton_residual(flipped, k).per_vertex, -soliton_residual(mesh, k).per_vertex)


def test_collapsed_curve_has_singular_metric():
    n = 6
    curve = GeneratingCurve(s=np.linspace(0.0, 1.0, n), x=np.ones(n), z=np.ones(n), theta=np.zeros(n),
                            curvature=np.zeros(n), family=CurveFamily.ANALYTIC_PROFILE, apex_height=1.0)
    with pytest.raises(SingularMetricError) as info:
        mesh_curvature_fd(extrude_parabolic(curve, nt=5))
    assert info.value.vertex == (0, 0)


def test_fd_needs_a_large_enough_uniform_grid():
    mesh = extrude_parabolic(horizontal_profile(1.0, n_samples=3), nt=5)
    with pytest.raises(DomainError):
        mesh_mean_curvature_fd(mesh)


def test_residual_argument_checks():
    mesh = extrude_parabolic(horizontal_profile(1.0, n_samples=5), nt=5)
    with pytest.raises(DomainError):
        soliton_residual(mesh, KillingFieldParams(a=0.0, b=0.0))
    with pytest.raises(DomainError):
        soliton_residual(mesh, KillingFieldParams(), source="spectral")


# Spherical surfaces

def test_horosphere_obstruction_is_constant():
    profile = horizontal_profile(1.5, n_samples=12)
    k = KillingFieldParams(a=1.0, b=2.0)
    obstruction = spherical_obstruction(profile, k)
    assert_allclose(obstruction.c0, 1.0)
    assert obstruction.max_abs()[1:] == (0.0, 0.0)
    mesh = revolve_spherical(profile, nt=24)
    direct = soliton_residual(mesh, k).per_vertex
    assert np.max(np.abs(obstruction.evaluate(mesh.t) - direct)) < 1e-10


@pytest.mark.parametrize("a, b", [(1.0, 0.0), (0.0, 2.0), (1.0, -1.0)])
def test_hemisphere_is_not_a_translator(a, b):
    profile = circle_profile(1.0, n_samples=20)
    obstruction = spherical_obstruction(profile, KillingFieldParams(a=a, b=b))
    assert max(obstruction.max_abs()[1:]) > 0.1
    assert not obstruction.is_identically_zero(1e-8)
    assert_allclose(obstruction.c0, 0.0, atol=1e-14)


def test_hemisphere_fd_curvature_converges():
    errors = []
    for level in range(3):
        profile = circle_profile(1.0, n_samples=16 * 2 ** level + 1)
        mesh = revolve_spherical(profile, nt=32 * 2 ** level)
        assert_allclose(mesh.H, 0.0, atol=1e-14)
        gap = mesh_mean_curvature_fd(mesh)[::2 ** level, ::2 ** level]
        errors.append(float(np.max(np.abs(gap))))
    assert min(convergence_orders(errors)) >= 1.9


def test_revolving_across_axis_fails():
    with pytest.raises(AxisDegeneracyError):
        revolve_spherical(horizontal_profile(1.0, x_lo=-1.0, x_hi=1.0))


# Hyperbolic cones

def test_line_through_origin_parallel_to_field_is_totally_geodesic():
    report = hyperbolic_cone_check(line_profile((0.0, 0.0), (1.0, 2.0)), KillingFieldParams(a=1.0, b=2.0))
    assert report.classification == ConeClass.TOTALLY_GEODESIC
    assert report.L_max_abs < 1e-10 and report.R_max_abs < 1e-10


def test_offset_parallel_line_is_equidistant():
    report = hyperbolic_cone_check(line_profile((0.0, 0.5), (1.0, 0.0)), KillingFieldParams(a=1.0, b=0.0))
    assert report.classification == ConeClass.EQUIDISTANT
    assert_allclose(report.L, 0.5)
    mesh = radial_cone(line_profile((0.0, 0.5), (1.0, 0.0)))
    assert_allclose(mesh.H, 0.5 / math.sqrt(1.25))


def test_non_parallel_line_is_not_a_translator():
    report = hyperbolic_cone_check(line_profile((0.0, 0.0), (0.0, 1.0)), KillingFieldParams(a=1.0, b=0.0))
    assert report.classification == ConeClass.NOT_TRANSLATOR
    assert report.R_max_abs == pytest.approx(1.0)


def test_circle_cone_profile():
    report = hyperbolic_cone_check(circle_cone_profile(1.0), KillingFieldParams(a=1.0, b=0.0))
    assert_allclose(report.L, -1.5)
    assert not report.L_vanishes
    assert report.classification == ConeClass.NOT_TRANSLATOR
    summary = report.summary()
    assert summary['classification'] == "NotTranslator"


def test_cone_fd_curvature_converges():
    errors = []
    for level in range(3):
        profile = circle_cone_profile(1.0, n_samples=32 * 2 ** level + 1)
        mesh = radial_cone(profile, nt=8 * 2 ** level + 1)
        gap = (mesh_mean_curvature_fd(mesh) - mesh.H)[::2 ** level, ::2 ** level]
        errors.append(float(np.max(np.abs(gap))))
    assert min(convergence_orders(errors)) >= 1.9


def test_sampled_profile_derivatives():
    s = np.linspace(0.0, 1.0, 41)
    profile = ConeProfile.from_samples(s, 2.0 + s, 0.5 * np.ones_like(s))
    assert_allclose(profile.dx, 1.0)
    assert_allclose(profile.ddx, 0.0, atol=1e-10)


def test_degenerate_cone_profile():
    s = np.linspace(0.5, 1.0, 11)
    profile = ConeProfile.from_samples(s, 10.0 * s, np.zeros_like(s))
    with pytest.raises(DegenerateProfileError):
        hyperbolic_cone_check(profile, KillingFieldParams())


# Graph PDE

def test_constant_graph_defect():
    u = np.full((9, 9), 2.0)
    report = graph_pde_residual(u, KillingFieldParams(a=1.0, b=1.0), 0.1)
    assert_allclose(report.per_vertex, 1.0)
    assert report.per_vertex.shape == (5, 5)
    with pytest.raises(DomainError):
        graph_pde_residual(np.zeros((9, 9)), KillingFieldParams(), 0.1)


def test_lower_branch_solves_graph_pde(reaper_one_fine):
    from curve_factory import resample_branch

    lower = to_bigraph(reaper_one_fine).lower
    u_turn = lower.u[0]
    x_lo = float(np.interp(-0.8 * u_turn, -lower.u, lower.x))
    x_hi = float(np.interp(-0.3 * u_turn, -lower.u, lower.x))
    errors = []
    for level in range(3):
        x = np.linspace(x_lo, x_hi, 20 * 2 ** level + 1)
        h = x[1] - x[0]
        u = np.repeat(resample_branch(lower, x)[:, None], 7, axis=1)
        plain = graph_pde_residual(u, KillingFieldParams(a=1.0, b=0.0), h)
        tilted = graph_pde_residual(u, KillingFieldParams(a=1.0, b=3.0), h)
        assert np.array_equal(plain.per_vertex, tilted.per_vertex)
        # cropped rows that sit on the coarsest grid's interior nodes
        shared = plain.per_vertex[2 ** (level + 1) - 2::2 ** level, 0][:17]
        errors.append(float(np.max(np.abs(shared))))
    assert min(convergence_orders(errors)) >= 1.9


def test_convergence_orders():
    assert convergence_orders([4.0, 1.0, 0.25]) == [2.0, 2.0]

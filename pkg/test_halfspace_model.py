import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from pydantic import ValidationError

from halfspace_model import (
    ConsistencyError,
    DomainError,
    curvature_data,
    homothety,
    hyp_inner,
    hyp_norm,
    killing_inner,
    mean_curvature_from_euclidean,
    reflect_vertical,
    reverse_orientation,
    rotate_killing_field,
    soliton_residual_field,
    soliton_residual_pointwise,
    translate_along_killing,
)
from schemas import CurvatureData, HalfSpacePoint, KillingFieldParams


def test_point_rejects_boundary_and_below():
    with pytest.raises(ValidationError):
        HalfSpacePoint(x=0.0, y=0.0, z=0.0)
    with pytest.raises(ValidationError):
        HalfSpacePoint(x=0.0, y=0.0, z=-1.0)


def test_hyp_inner_scales_with_height():
    p = HalfSpacePoint(x=0.0, y=0.0, z=2.0)
    assert hyp_inner(p, (1.0, 0.0, 0.0), (1.0, 0.0, 0.0)) == pytest.approx(0.25)
    assert hyp_norm(p, (0.0, 0.0, 2.0)) == pytest.approx(1.0)
    assert hyp_inner(p, (1.0, 0.0, 0.0), (0.0, 1.0, 0.0)) == 0.0


def test_horosphere_has_unit_mean_curvature():
    # z = c, upward normal, flat in the Euclidean sense
    for c in (0.1, 1.0, 7.5):
        assert mean_curvature_from_euclidean(c, 0.0, 1.0) == 1.0


def test_hemisphere_is_minimal():
    # unit hemisphere with outward normal N_e = p has H_e = -1
    for phi in np.linspace(0.1, 1.4, 7):
        p = np.array([math.sin(phi), 0.0, math.cos(phi)])
        H = mean_curvature_from_euclidean(p[2], -1.0, p[2])
        assert H == pytest.approx(0.0, abs=1e-15)


def test_mean_curvature_rejects_non_positive_height():
    with pytest.raises(DomainError):
        mean_curvature_from_euclidean(0.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        mean_curvature_from_euclidean(np.array([1.0, -1.0]), 0.0, 1.0)


def test_killing_inner_vectorized():
    k = KillingFieldParams(a=2.0, b=-1.0)
    N_e = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    z = np.array([1.0, 2.0, 4.0])
    assert_allclose(killing_inner(z, N_e, k), [2.0, -0.5, 0.0])


def test_curvature_data_requires_unit_normal():
    with pytest.raises(ValidationError):
        CurvatureData(H_e=0.0, N_e=(0.0, 0.0, 2.0), H=2.0)


def test_pointwise_residual_detects_inconsistent_data():
    p = HalfSpacePoint(x=0.0, y=0.0, z=1.0)
    k = KillingFieldParams(a=1.0, b=0.0)
    bad = CurvatureData(H_e=0.0, N_e=(0.0, 0.0, 1.0), H=0.5)
    with pytest.raises(ConsistencyError):
        soliton_residual_pointwise(bad, p, k)


def test_pointwise_residual_of_horosphere():
    p = HalfSpacePoint(x=0.3, y=-2.0, z=0.5)
    c = curvature_data(p, 0.0, (0.0, 0.0, 1.0))
    assert c.H == 1.0
    assert soliton_residual_pointwise(c, p, KillingFieldParams(a=1.0, b=3.0)) == pytest.approx(1.0)


def test_vertical_plane_parallel_to_killing_field_is_a_translator():
    # plane x = 0 with normal e_x; xi = d/dy is tangent
    k = KillingFieldParams(a=0.0, b=1.0)
    for z in (0.01, 1.0, 10.0):
        p = HalfSpacePoint(x=0.0, y=5.0, z=z)
        c = curvature_data(p, 0.0, (1.0, 0.0, 0.0))
        assert soliton_residual_pointwise(c, p, k) == 0.0


def test_reversing_orientation_negates_residual():
    p = HalfSpacePoint(x=0.0, y=0.0, z=0.7)
    k = KillingFieldParams(a=1.0, b=0.5)
    n = np.array([0.6, 0.0, 0.8])
    c = curvature_data(p, 0.3, tuple(n))
    r = soliton_residual_pointwise(c, p, k)
    assert soliton_residual_pointwise(reverse_orientation(c), p, k) == pytest.approx(-r)


def test_field_residual_matches_pointwise():
    k = KillingFieldParams(a=1.0, b=2.0)
    n = np.array([0.6, 0.0, 0.8])
    z = np.array([0.5, 1.0])
    H = mean_curvature_from_euclidean(z, np.array([0.1, 0.2]), n[2])
    field = soliton_residual_field(H, np.stack([n, n]), z, k)
    for i in range(2):
        p = HalfSpacePoint(x=0.0, y=0.0, z=float(z[i]))
        c = CurvatureData(H_e=[0.1, 0.2][i], N_e=tuple(n), H=float(H[i]))
        assert field[i] == pytest.approx(soliton_residual_pointwise(c, p, k))


def test_translation_follows_killing_field():
    p = HalfSpacePoint(x=1.0, y=2.0, z=3.0)
    q = translate_along_killing(p, KillingFieldParams(a=0.5, b=-1.0), 2.0)
    assert (q.x, q.y, q.z) == (2.0, 0.0, 3.0)


def test_reflection_and_homothety():
    p = HalfSpacePoint(x=1.0, y=2.0, z=3.0)
    assert reflect_vertical(p).x == -1.0
    q = homothety(p, 0.5)
    assert (q.x, q.y, q.z) == (0.5, 1.0, 1.5)
    with pytest.raises(DomainError):
        homothety(p, 0.0)


@pytest.mark.parametrize("t", [-3.0, 0.5, 7.0])
def test_residual_is_invariant_under_the_killing_flow(t):
    k = KillingFieldParams(a=1.0, b=-0.5)
    p = HalfSpacePoint(x=0.2, y=1.0, z=0.8)
    c = curvature_data(p, 0.4, (0.6, 0.0, 0.8))
    q = translate_along_killing(p, k, t)
    moved = curvature_data(q, c.H_e, c.N_e)
    assert moved == c
    assert soliton_residual_pointwise(moved, q, k) == soliton_residual_pointwise(c, p, k)


def test_residual_under_reflection_and_homothety():
    k = KillingFieldParams(a=1.0, b=0.5)
    p = HalfSpacePoint(x=0.2, y=1.0, z=0.8)
    n = (0.6, 0.0, 0.8)
    r = soliton_residual_pointwise(curvature_data(p, 0.4, n), p, k)

    mirrored = reflect_vertical(p)
    c = curvature_data(mirrored, 0.4, (-n[0], n[1], n[2]))
    assert soliton_residual_pointwise(c, mirrored, KillingFieldParams(a=-k.a, b=k.b)) == pytest.approx(r, abs=1e-15)

    # H is scale invariant while <N, xi> scales like 1/lam unless xi does too
    lam = 2.5
    scaled = homothety(p, lam)
    c = curvature_data(scaled, 0.4 / lam, n)
    assert soliton_residual_pointwise(c, scaled, KillingFieldParams(a=lam * k.a, b=lam * k.b)) == pytest.approx(r)


def test_rotating_killing_field_preserves_length():
    k = KillingFieldParams(a=1.0, b=3.0)
    phi = math.atan2(3.0, 1.0)
    rotated = rotate_killing_field(k, phi)
    assert rotated.a == pytest.approx(math.sqrt(10.0))
    assert rotated.b == pytest.approx(0.0, abs=1e-15)


def test_trivial_killing_field_is_rejected():
    with pytest.raises(DomainError):
        KillingFieldParams(a=0.0, b=0.0).require_nontrivial()
    assert KillingFieldParams(a=0.0, b=1.0).require_nontrivial().b == 1.0

import json
import xml.etree.ElementTree as ET

import numpy as np
import pandas as pd
import pytest

import exporters
from curve_factory import circle_profile, horizontal_profile
from reaper_ode import integrate_orbit
from schemas import CurveState, EventKind, KillingFieldParams, ODEParams
from surface_verify import extrude_parabolic, revolve_spherical, soliton_residual

SVG_NS = '{http://www.w3.org/2000/svg}'


@pytest.fixture
def short_orbit():
    apex = CurveState(s=0.0, x=0.0, z=1.0, theta=0.0)
    return integrate_orbit(apex, ODEParams(a=0.0, z_min=1e-3, s_max=0.3, output_step=0.05))


@pytest.fixture
def flat_mesh():
    return extrude_parabolic(horizontal_profile(0.5, n_samples=5), nt=4)


def _read_obj(path):
    v, vn, f = [], [], []
    for line in path.read_text().splitlines():
        tag, *rest = line.split()
        if tag == 'v':
            v.append([float(c) for c in rest])
        elif tag == 'vn':
            vn.append([float(c) for c in rest])
        elif tag == 'f':
            f.append([int(c.split('//')[0]) - 1 for c in rest])
    return np.array(v), np.array(vn), np.array(f)


def test_csv_preamble_and_round_trip(tmp_path, short_orbit):
    df = exporters.orbit_frame(short_orbit, with_first_integral=True)
    path = exporters.write_csv(tmp_path / 'sub' / 'orbit.csv', df, {'z0': 1.0, 'a': 0.0})
    lines = path.read_text().splitlines()
    assert lines[:2] == ["# a=0.0", "# z0=1.0"]
    assert lines[2] == "s,x,z,theta,first_integral"
    pd.testing.assert_frame_equal(exporters.read_csv(path), df)


def test_events_frame(short_orbit):
    df = exporters.events_frame(short_orbit)
    assert list(df.columns) == ['kind', 's', 'x', 'z', 'theta']
    assert df.kind.iloc[-1] == EventKind.BUDGET.value


def test_orbit_frame_joins_halves_at_the_apex():
    apex = CurveState(s=0.0, x=0.0, z=1.0, theta=0.0)
    params = ODEParams(a=1.0, z_min=1e-3, s_max=0.3, output_step=0.05)
    forward = integrate_orbit(apex, params, direction=1)
    backward = integrate_orbit(apex, params, direction=-1)
    df = exporters.orbit_frame(backward, forward)
    assert len(df) == len(backward) + len(forward) - 1
    assert np.all(np.diff(df.s) > 0)
    assert (df.s == 0.0).sum() == 1
    with pytest.raises(ValueError):
        exporters.orbit_frame(backward, forward, forward)


def test_residual_frame_covers_every_vertex(flat_mesh):
    report = soliton_residual(flat_mesh, KillingFieldParams(a=1.0, b=0.0))
    df = exporters.residual_frame(flat_mesh, report)
    assert len(df) == flat_mesh.ns * flat_mesh.nt
    assert np.allclose(df.H, 1.0)
    assert np.allclose(df.residual, 1.0)


def test_json_sorted_with_numpy_values(tmp_path):
    payload = {'zeta': np.float64(0.5), 'alpha': np.int64(3), 'grid': np.arange(3)}
    path = exporters.write_json(tmp_path / 'report.json', payload)
    text = path.read_text()
    assert text.index('"alpha"') < text.index('"grid"') < text.index('"zeta"')
    assert json.loads(text) == {'zeta': 0.5, 'alpha': 3, 'grid': [0, 1, 2]}
    with pytest.raises(TypeError):
        exporters.write_json(tmp_path / 'bad.json', {'value': object()})


@pytest.mark.parametrize("flip", [False, True])
def test_obj_faces_follow_normals(tmp_path, flat_mesh, flip):
    mesh = flat_mesh.flipped() if flip else flat_mesh
    v, vn, f = _read_obj(exporters.write_obj(tmp_path / 'mesh.obj', mesh))
    assert len(v) == len(vn) == mesh.ns * mesh.nt
    assert len(f) == 2 * (mesh.ns - 1) * (mesh.nt - 1)
    np.testing.assert_allclose(v.reshape(mesh.vertices.shape), mesh.vertices)
    face_normals = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    assert np.all(np.einsum('ij,ij->i', face_normals, vn[f[:, 0]]) > 0)


@pytest.mark.parametrize("flip", [False, True])
def test_obj_closes_spherical_seam(tmp_path, flip):
    mesh = revolve_spherical(circle_profile(1.0, n_samples=5), nt=8)
    mesh = mesh.flipped() if flip else mesh
    v, vn, f = _read_obj(exporters.write_obj(tmp_path / 'sphere.obj', mesh))
    assert len(f) == 2 * (mesh.ns - 1) * mesh.nt == 64
    face_normals = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    assert np.all(np.einsum('ij,ij->i', face_normals, vn[f[:, 0]]) > 0)
    seam = [face for face in f if {int(k) % mesh.nt for k in face} == {mesh.nt - 1, 0}]
    assert len(seam) == 2 * (mesh.ns - 1)


def test_svg_polylines_and_guides(tmp_path):
    x = np.linspace(0.0, 1.0, 5)
    path = exporters.write_svg(
        tmp_path / 'plot.svg',
        [("first", x, x ** 2), ("second", x, -x)],
        x_label='x', y_label='z', title="demo",
        guides=[('h', 0.0), ('v', 0.5)],
    )
    root = ET.parse(path).getroot()
    polylines = root.findall(f'{SVG_NS}polyline')
    assert [p.get('data-name') for p in polylines] == ["first", "second"]
    assert len(polylines[0].get('points').split()) == 5
    dashed = [line for line in root.findall(f'{SVG_NS}line') if line.get('stroke-dasharray')]
    assert len(dashed) == 2
    assert root.find(f'{SVG_NS}title').text == "demo"


def test_writers_are_deterministic(tmp_path, short_orbit, flat_mesh):
    df = exporters.orbit_frame(short_orbit)
    for name in ('a', 'b'):
        exporters.write_csv(tmp_path / f'{name}.csv', df, {'a': 0.0})
        exporters.write_obj(tmp_path / f'{name}.obj', flat_mesh)
        exporters.write_svg(tmp_path / f'{name}.svg', [("orbit", df.x, df.z)], 'x', 'z')
    for ext in ('csv', 'obj', 'svg'):
        assert (tmp_path / f'a.{ext}').read_bytes() == (tmp_path / f'b.{ext}').read_bytes()

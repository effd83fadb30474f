"""
Deterministic file writers: CSV (pandas), JSON, Wavefront OBJ and SVG.

Identical inputs give byte-identical files: floats in CSV/OBJ use 17 significant
digits, JSON keys are sorted, and every writer uses LF line endings.
"""
import json
import logging
import xml.etree.ElementTree as ET
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from reaper_ode import first_integral_a0_field
from schemas import GeneratingCurve, IntegrationResult, Provenance, ResidualReport, SurfaceMesh

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


# Tables

def orbit_frame(orbit: IntegrationResult, *more: IntegrationResult, with_first_integral: bool = False) -> pd.DataFrame:
    """
    Samples of one half, or of a backward half followed by its forward half.

    Two halves share the apex, which appears once; rows are ordered by s.
    """
    halves = [orbit, *more]
    if len(halves) > 2:
        raise ValueError(f"expected one or two halves, got {len(halves)}")
    frames = [pd.DataFrame({'s': h.s, 'x': h.x, 'z': h.z, 'theta': h.theta}) for h in halves]
    if len(frames) == 2:
        frames[0] = frames[0].iloc[::-1].iloc[:-1]
    df = pd.concat(frames, ignore_index=True)
    if with_first_integral:
        df['first_integral'] = first_integral_a0_field(df.z.to_numpy(), df.theta.to_numpy())
    return df


def events_frame(orbit: IntegrationResult) -> pd.DataFrame:
    rows = [
        {'kind': e.kind.value, 's': e.s, 'x': e.state.x, 'z': e.state.z, 'theta': e.state.theta}
        for e in orbit.events
    ]
    return pd.DataFrame(rows, columns=['kind', 's', 'x', 'z', 'theta'])


def curve_frame(curve: GeneratingCurve) -> pd.DataFrame:
    return pd.DataFrame({'s': curve.s, 'x': curve.x, 'z': curve.z, 'theta': curve.theta})


def residual_frame(mesh: SurfaceMesh, report: ResidualReport) -> pd.DataFrame:
    i, j = np.meshgrid(np.arange(mesh.ns), np.arange(mesh.nt), indexing='ij')
    return pd.DataFrame({
        'i': i.ravel(),
        'j': j.ravel(),
        'x': mesh.vertices[..., 0].ravel(),
        'y': mesh.vertices[..., 1].ravel(),
        'z': mesh.vertices[..., 2].ravel(),
        'H': mesh.H.ravel(),
        'residual': report.per_vertex.ravel(),
    })


def write_csv(path: Path, df: pd.DataFrame, metadata: Optional[Dict[str, object]] = None) -> Path:
    """CSV with an optional '# key=value' preamble (read back with comment='#')."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='\n', encoding='utf-8') as f:
        for key in sorted(metadata or {}):
            f.write(f"# {key}={metadata[key]}\n")
        df.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    logger.info(f"wrote {path} ({len(df)} rows)")
    return path


def read_csv(path: Path) -> pd.DataFrame:
    return pd.read_csv(path, comment='#')


def _plain(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"cannot serialize {type(value).__name__}")


def write_json(path: Path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_plain) + "\n", encoding='utf-8')
    logger.info(f"wrote {path}")
    return path


# Meshes

def _faces(ns: int, nt: int, orientation: int, wrap: bool = False) -> List[Tuple[int, int, int]]:
    """
    Two triangles per grid quad, counterclockwise when seen from the normal side.

    With ``wrap`` the last t column is joined back to the first.
    """
    faces = []
    for i in range(ns - 1):
        for j in range(nt if wrap else nt - 1):
            p00 = i * nt + j + 1
            p10 = p00 + nt
            p01 = i * nt + (j + 1) % nt + 1
            p11 = p01 + nt
            if orientation > 0:
                faces.append((p00, p10, p11))
                faces.append((p00, p11, p01))
            else:
                faces.append((p00, p11, p10))
                faces.append((p00, p01, p11))
    return faces


def write_obj(path: Path, mesh: SurfaceMesh) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# {mesh.provenance.value} mesh {mesh.ns}x{mesh.nt}"]
    for x, y, z in mesh.vertices.reshape(-1, 3):
        lines.append(f"v {x:.17g} {y:.17g} {z:.17g}")
    for nx, ny, nz in mesh.normals.reshape(-1, 3):
        lines.append(f"vn {nx:.17g} {ny:.17g} {nz:.17g}")
    for a, b, c in _faces(mesh.ns, mesh.nt, mesh.orientation, wrap=mesh.provenance == Provenance.SPHERICAL):
        lines.append(f"f {a}//{a} {b}//{b} {c}//{c}")
    with open(path, 'w', newline='\n', encoding='utf-8') as f:
        f.write("\n".join(lines) + "\n")
    logger.info(f"wrote {path} ({mesh.ns * mesh.nt} vertices)")
    return path


# Figures

SVG_SIZE = 800
SVG_MARGIN = 60
PALETTE = ["#1f4e79", "#b22222", "#2e7d32", "#6a1b9a", "#ef6c00", "#00838f"]


def write_svg(path: Path, polylines: Sequence[Tuple[str, np.ndarray, np.ndarray]],
              x_label: str, y_label: str, title: str = "",
              guides: Iterable[Tuple[str, float]] = ()) -> Path:
    """
    Static SVG of labelled polylines over shared axes.

    ``guides`` are ('h' | 'v', value) dashed reference lines (asymptotes, z = 0).
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    xs = np.concatenate([np.asarray(x, dtype=float) for _, x, _ in polylines]) if polylines else np.zeros(1)
    ys = np.concatenate([np.asarray(y, dtype=float) for _, _, y in polylines]) if polylines else np.zeros(1)
    guides = list(guides)
    xs = np.concatenate([xs, [v for d, v in guides if d == 'v']])
    ys = np.concatenate([ys, [v for d, v in guides if d == 'h']])
    x_lo, x_hi = float(np.min(xs)), float(np.max(xs))
    y_lo, y_hi = float(np.min(ys)), float(np.max(ys))
    x_hi = x_hi if x_hi > x_lo else x_lo + 1.0
    y_hi = y_hi if y_hi > y_lo else y_lo + 1.0
    span = SVG_SIZE - 2 * SVG_MARGIN

    def px(x):
        return SVG_MARGIN + (np.asarray(x) - x_lo) / (x_hi - x_lo) * span

    def py(y):
        return SVG_SIZE - SVG_MARGIN - (np.asarray(y) - y_lo) / (y_hi - y_lo) * span

    svg = ET.Element('svg', {
        'xmlns': 'http://www.w3.org/2000/svg',
        'viewBox': f"0 0 {SVG_SIZE} {SVG_SIZE}",
        'width': str(SVG_SIZE),
        'height': str(SVG_SIZE),
    })
    if title:
        ET.SubElement(svg, 'title').text = title

    axes = ET.SubElement(svg, 'g', {'stroke': '#000', 'stroke-width': '1', 'fill': 'none'})
    ET.SubElement(axes, 'line', {'x1': str(SVG_MARGIN), 'y1': str(SVG_SIZE - SVG_MARGIN),
                                 'x2': str(SVG_SIZE - SVG_MARGIN), 'y2': str(SVG_SIZE - SVG_MARGIN)})
    ET.SubElement(axes, 'line', {'x1': str(SVG_MARGIN), 'y1': str(SVG_MARGIN),
                                 'x2': str(SVG_MARGIN), 'y2': str(SVG_SIZE - SVG_MARGIN)})

    labels = ET.SubElement(svg, 'g', {'font-family': 'sans-serif', 'font-size': '14'})
    for text, x, y in (
        (x_label, SVG_SIZE / 2, SVG_SIZE - 15),
        (f"{x_lo:.3g}", SVG_MARGIN, SVG_SIZE - SVG_MARGIN + 20),
        (f"{x_hi:.3g}", SVG_SIZE - SVG_MARGIN, SVG_SIZE - SVG_MARGIN + 20),
        (y_label, 15, SVG_SIZE / 2),
        (f"{y_lo:.3g}", 10, SVG_SIZE - SVG_MARGIN),
        (f"{y_hi:.3g}", 10, SVG_MARGIN),
    ):
        ET.SubElement(labels, 'text', {'x': f"{x:.2f}", 'y': f"{y:.2f}"}).text = text

    for direction, value in guides:
        if direction == 'h':
            coords = {'x1': f"{px(x_lo):.2f}", 'x2': f"{px(x_hi):.2f}", 'y1': f"{py(value):.2f}", 'y2': f"{py(value):.2f}"}
        else:
            coords = {'x1': f"{px(value):.2f}", 'x2': f"{px(value):.2f}", 'y1': f"{py(y_lo):.2f}", 'y2': f"{py(y_hi):.2f}"}
        ET.SubElement(svg, 'line', dict(coords, **{'stroke': '#888', 'stroke-dasharray': '6 4'}))

    for n, (name, x, y) in enumerate(polylines):
        points = " ".join(f"{u:.3f},{v:.3f}" for u, v in zip(px(x), py(y)))
        ET.SubElement(svg, 'polyline', {
            'points': points,
            'fill': 'none',
            'stroke': PALETTE[n % len(PALETTE)],
            'stroke-width': '2',
            'data-name': name,
        })

    ET.ElementTree(svg).write(path, encoding='utf-8', xml_declaration=True)
    logger.info(f"wrote {path}")
    return path

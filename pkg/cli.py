"""
Command-line front end.

    python cli.py trace    --z0 2 --a 1
    python cli.py reaper   --z0 2
    python cli.py minimal  --z0 1
    python cli.py mesh     --family reaper --z0 1 --a 1 --b 0
    python cli.py portrait --orbits 1 2 3
    python cli.py sweep    --a 0 --z0-start 0.5 --z0-stop 2 --count 4

Every command accepts --config <file.yaml|file.json>; explicit flags override
file values. Written files are announced on stdout as "wrote <path>".

Exit codes: 0 success, 1 verification failure, 2 usage or validation error,
3 numerical failure.
"""
import argparse
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
import yaml
from pydantic import ValidationError

import exporters
from config import Config
from curve_factory import (
    BiGraphError,
    build_minimal_reaper,
    build_reaper,
    build_vertical_plane,
    circle_profile,
    grid_window,
    half_width,
    horizontal_profile,
    to_bigraph,
    x_span,
)
from phase_plane import (
    ClassificationFailure,
    classify_halves,
    gamma_polyline,
    phase_trace,
    reduce_to_chart,
    region_grid,
    trace_halves,
)
from reaper_ode import (
    IntegrationFailure,
    integrate_orbit,
    reflect_orbit,
    theta_prime,
)
from schemas import (
    CurveConfig,
    CurveFamily,
    CurveState,
    GeneratingCurve,
    MeshConfig,
    PortraitConfig,
    RunConfig,
    SweepConfig,
    TraceConfig,
)
from surface_verify import (
    circle_cone_profile,
    extrude_parabolic,
    hyperbolic_cone_check,
    line_profile,
    mesh_mean_curvature_fd,
    radial_cone,
    revolve_spherical,
    soliton_residual,
    spherical_obstruction,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VERIFICATION = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

VERSION_FILE = Path(__file__).parent / 'version.json'


class VerificationFailure(Exception):
    """A run finished but one of its checks missed its threshold"""
    pass


def read_version() -> str:
    try:
        with open(VERSION_FILE, 'r') as f:
            return json.load(f)['version']
    except FileNotFoundError:
        return "unknown"


def announce(path: Path) -> Path:
    print(f"wrote {path}")
    return path


def _verify(checks: Dict[str, bool]) -> None:
    failed = [name for name, ok in checks.items() if not ok]
    if failed:
        raise VerificationFailure(f"checks failed: {', '.join(failed)}")


def _apex(z0: float) -> CurveState:
    return CurveState(s=0.0, x=0.0, z=z0, theta=0.0)


# Commands

def cmd_trace(cfg: TraceConfig) -> None:
    out = Path(cfg.out_dir)
    params = cfg.ode_params(cfg.a)

    if cfg.a == 0:
        forward = integrate_orbit(_apex(cfg.z0), params, direction=1)
        backward = integrate_orbit(_apex(cfg.z0), params, direction=-1)
    else:
        forward, backward = trace_halves(cfg.z0, params)
        report = classify_halves(cfg.z0, params, forward, backward)
        if report.mirrored:
            forward, backward = reflect_orbit(backward), reflect_orbit(forward)

    orbit = exporters.orbit_frame(backward, forward, with_first_integral=(cfg.a == 0))
    s, x, z, theta = (orbit[c].to_numpy() for c in ('s', 'x', 'z', 'theta'))
    events = pd.concat([exporters.events_frame(backward), exporters.events_frame(forward)], ignore_index=True)

    if cfg.a == 0:
        invariant = orbit['first_integral'].to_numpy()
        regular = np.cos(theta) ** 2 >= 1e-4
        drift = float(np.max(np.abs(invariant[regular] / cfg.z0 ** 4 - 1.0)))
        payload = {
            'apex_height': cfg.z0,
            'a': 0.0,
            'z_min': cfg.z_min,
            'first_integral': cfg.z0 ** 4,
            'first_integral_max_relative_drift': drift,
            'forward_terminal_theta': forward.terminal.theta,
            'backward_terminal_theta': backward.terminal.theta,
            'half_width_quadrature': half_width(cfg.z0),
            'x_span': x_span(GeneratingCurve(s=s, x=x, z=z, theta=theta, curvature=theta_prime(z, theta, 0.0),
                                           family=CurveFamily.MINIMAL_REAPER, apex_height=cfg.z0)),
        }
        checks = {'first_integral_conserved': drift <= cfg.first_integral_tol}
    else:
        payload = report.model_dump(mode='json')
        checks = {
            'bigraph': report.is_bigraph,
            'apex_is_maximum': abs(report.max_height - cfg.z0) <= 1e-10,
        }
    payload['checks'] = checks

    meta = {'a': cfg.a, 'z0': cfg.z0, 'z_min': cfg.z_min}
    announce(exporters.write_csv(out / 'trace_orbit.csv', orbit, meta))
    announce(exporters.write_csv(out / 'trace_events.csv', events, meta))
    announce(exporters.write_json(out / 'trace_report.json', payload))
    _verify(checks)


def _curve_outputs(cfg: CurveConfig, curve, name: str, checks: Dict[str, bool]) -> None:
    out = Path(cfg.out_dir)
    meta = {'family': curve.family.value, 'z0': cfg.z0, 'a': curve.a}
    announce(exporters.write_csv(out / f'{name}_curve.csv', exporters.curve_frame(curve), meta))
    if cfg.svg:
        announce(exporters.write_svg(
            out / f'{name}_curve.svg',
            [(curve.family.value, curve.x, curve.z)],
            x_label='x', y_label='z',
            title=f"{curve.family.value} of maximum height {cfg.z0:g}",
            guides=[('h', 0.0)],
        ))
    announce(exporters.write_json(out / f'{name}_summary.json', dict(meta, apex_height=curve.apex_height,
                                                                     samples=len(curve), checks=checks)))
    _verify(checks)


def cmd_reaper(cfg: CurveConfig) -> None:
    if cfg.a == 0:
        raise ValueError("the reaper command needs a != 0; use the 'minimal' command for a = 0")
    curve = build_reaper(cfg.z0, cfg.a, cfg.ode_params(cfg.a))
    try:
        to_bigraph(curve)
        is_bigraph = True
    except BiGraphError as e:
        logger.warning(f"bi-graph split failed: {e}")
        is_bigraph = False
    checks = {
        'apex_is_maximum': abs(float(np.max(curve.z)) - cfg.z0) <= 1e-10,
        'single_turning_point': curve.turning_index is not None,
        'bigraph': is_bigraph,
    }
    _curve_outputs(cfg, curve, 'reaper', checks)


def cmd_minimal(cfg: CurveConfig) -> None:
    curve = build_minimal_reaper(cfg.z0, cfg.ode_params(0.0))
    checks = {
        'apex_is_maximum': abs(float(np.max(curve.z)) - cfg.z0) <= 1e-10,
        'no_turning_point': curve.turning_index is None,
    }
    _curve_outputs(cfg, curve, 'minimal', checks)


def _mesh_for(cfg: MeshConfig):
    """Build the mesh requested by the config; returns (mesh, extra summary entries, extra checks)."""
    k = cfg.killing_field()
    extra, checks = {}, {}

    half = cfg.window * cfg.z0 + 1e-9
    if cfg.family == "reaper":
        curve = grid_window(build_reaper(cfg.z0, k.a, cfg.ode_params(k.a)), -half, half, cfg.stride)
        return extrude_parabolic(curve, cfg.t_lo, cfg.t_hi, cfg.nt), extra, checks
    if cfg.family == "minimal":
        curve = grid_window(build_minimal_reaper(cfg.z0, cfg.ode_params(0.0)), -half, half, cfg.stride)
        return extrude_parabolic(curve, cfg.t_lo, cfg.t_hi, cfg.nt), extra, checks
    if cfg.family == "vertical-plane":
        curve = build_vertical_plane(cfg.height / 2.0, 2.0 * cfg.height, n_samples=cfg.ns)
        return extrude_parabolic(curve, cfg.t_lo, cfg.t_hi, cfg.nt), extra, checks
    if cfg.family == "horosphere":
        curve = horizontal_profile(cfg.height, n_samples=cfg.ns)
        mesh = extrude_parabolic(curve, cfg.t_lo, cfg.t_hi, cfg.nt)
        checks['H_equals_one'] = bool(np.max(np.abs(mesh.H - 1.0)) <= cfg.residual_tol)
        return mesh, extra, checks
    if cfg.family == "spherical":
        curve = (horizontal_profile(cfg.height, n_samples=cfg.ns) if cfg.profile == "horizontal"
                 else circle_profile(cfg.height, n_samples=cfg.ns))
        mesh = revolve_spherical(curve, cfg.nt)
        obstruction = spherical_obstruction(curve, k)
        direct = soliton_residual(mesh, k, "analytic").per_vertex
        reconstruction = float(np.max(np.abs(obstruction.evaluate(mesh.t) - direct)))
        c0, c1, c2 = obstruction.max_abs()
        extra['obstruction'] = {'c0_max_abs': c0, 'c1_max_abs': c1, 'c2_max_abs': c2,
                                'reconstruction_error': reconstruction}
        checks['fourier_reconstruction'] = reconstruction <= 1e-10
        return mesh, extra, checks
    # cone
    if cfg.profile == "circle":
        profile = circle_cone_profile(cfg.height, n_samples=cfg.ns)
    else:
        direction = (k.a, k.b) if not k.is_trivial else (1.0, 0.0)
        norm = math.hypot(*direction)
        point = (-cfg.offset * direction[1] / norm, cfg.offset * direction[0] / norm)
        profile = line_profile(point, direction, n_samples=cfg.ns)
    extra['cone'] = hyperbolic_cone_check(profile, k).summary()
    return radial_cone(profile, nt=cfg.nt), extra, checks


def cmd_mesh(cfg: MeshConfig) -> None:
    out = Path(cfg.out_dir)
    k = cfg.killing_field()
    mesh, extra, checks = _mesh_for(cfg)

    analytic = soliton_residual(mesh, k, "analytic")
    fd = soliton_residual(mesh, k, "finite_difference")
    fd_gap = float(np.max(np.abs(mesh_mean_curvature_fd(mesh) - mesh.H)))
    checks['fd_matches_analytic'] = fd_gap <= cfg.fd_tol
    if cfg.family in ("reaper", "minimal", "vertical-plane"):
        checks['soliton_residual'] = analytic.max_abs <= cfg.residual_tol

    summary = {
        'family': cfg.family,
        'provenance': mesh.provenance.value,
        'a': k.a,
        'b': k.b,
        'grid': [mesh.ns, mesh.nt],
        'analytic': analytic.summary(),
        'finite_difference': fd.summary(),
        'fd_max_abs_H_gap': fd_gap,
        'checks': checks,
    }
    summary.update(extra)

    announce(exporters.write_obj(out / f'mesh_{cfg.family}.obj', mesh))
    announce(exporters.write_csv(out / f'mesh_{cfg.family}_residual.csv',
                                 exporters.residual_frame(mesh, analytic),
                                 {'family': cfg.family, 'a': k.a, 'b': k.b}))
    announce(exporters.write_json(out / f'mesh_{cfg.family}_summary.json', summary))
    _verify(checks)


def cmd_portrait(cfg: PortraitConfig) -> None:
    out = Path(cfg.out_dir)
    lower = gamma_polyline("lower", cfg.z_max, cfg.n_gamma).assign(branch="lower")
    upper = gamma_polyline("upper", cfg.z_max, cfg.n_gamma).assign(branch="upper")
    gamma = pd.concat([lower, upper], ignore_index=True)[['branch', 'z', 'theta']]

    regions = region_grid(
        np.linspace(cfg.z_max / cfg.grid_z, cfg.z_max, cfg.grid_z),
        np.linspace(-math.pi / 2, math.pi, cfg.grid_theta + 2)[1:-1],
    )

    traces = []
    polylines = [("Gamma lower", lower.theta.to_numpy(), lower.z.to_numpy()),
                 ("Gamma upper", upper.theta.to_numpy(), upper.z.to_numpy())]
    params = cfg.ode_params(cfg.a)
    for n, z0 in enumerate(cfg.orbits):
        forward = phase_trace(integrate_orbit(_apex(z0), params, direction=1))
        backward = phase_trace(integrate_orbit(_apex(z0), params, direction=-1))
        trace = pd.concat([backward.iloc[::-1].iloc[:-1], forward], ignore_index=True)
        trace = trace[trace.z <= cfg.z_max].assign(theta=lambda df: reduce_to_chart(df.theta.to_numpy()))
        traces.append(trace.assign(orbit=n, z0=z0)[['orbit', 'z0', 's', 'z', 'theta']])
        polylines.append((f"orbit z0={z0:g}", trace.theta.to_numpy(), trace.z.to_numpy()))
    orbits = (pd.concat(traces, ignore_index=True) if traces
              else pd.DataFrame(columns=['orbit', 'z0', 's', 'z', 'theta']))

    meta = {'a': cfg.a, 'z_max': cfg.z_max, 'chart': 'z/a, s/a'}
    announce(exporters.write_csv(out / 'portrait_gamma.csv', gamma, meta))
    announce(exporters.write_csv(out / 'portrait_regions.csv', regions, meta))
    announce(exporters.write_csv(out / 'portrait_orbits.csv', orbits, meta))
    announce(exporters.write_svg(
        out / 'portrait.svg', polylines, x_label='theta', y_label='z / a',
        title=f"phase plane, a={cfg.a:g}",
        guides=[('v', 0.0), ('v', math.pi / 2), ('h', 0.0)],
    ))


def sweep_row(z0: float, a: float, params_dump: dict) -> dict:
    """One sweep row; module-level so worker processes can pickle it."""
    cfg = RunConfig(**params_dump)
    params = cfg.ode_params(a)
    if a == 0:
        curve = build_minimal_reaper(z0, params)
        return {
            'z0': z0,
            'forward_terminal_theta': float(curve.theta[-1]),
            'backward_terminal_theta': float(curve.theta[0]),
            'turning_point_x': float('nan'),
            'half_width': x_span(curve) / 2.0,
            'is_bigraph': False,
        }
    forward, backward = trace_halves(z0, params)
    report = classify_halves(z0, params, forward, backward)
    return {
        'z0': z0,
        'forward_terminal_theta': report.forward_asymptote,
        'backward_terminal_theta': report.backward_asymptote,
        'turning_point_x': report.turning_point_x,
        'half_width': float('nan'),
        'is_bigraph': report.is_bigraph,
    }


def cmd_sweep(cfg: SweepConfig) -> None:
    out = Path(cfg.out_dir)
    heights = cfg.heights()
    shared = cfg.model_dump(include=set(RunConfig.model_fields))
    if cfg.workers <= 1:
        rows = [sweep_row(z0, cfg.a, shared) for z0 in heights]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            # map keeps input order
            rows = list(pool.map(sweep_row, heights, [cfg.a] * len(heights), [shared] * len(heights)))
    table = pd.DataFrame(rows, columns=['z0', 'forward_terminal_theta', 'backward_terminal_theta',
                                        'turning_point_x', 'half_width', 'is_bigraph'])

    summary = {'a': cfg.a, 'heights': heights}
    if cfg.a == 0:
        w1 = half_width(1.0)
        summary['half_width_unit'] = w1
        if len(heights) >= 2:
            slope = float(np.polyfit(table.z0.to_numpy(), table.half_width.to_numpy(), 1)[0])
            summary['half_width_slope'] = slope
            checks = {'half_width_linear': abs(slope - w1) <= cfg.slope_tol}
        else:
            checks = {}
    else:
        checks = {'all_bigraphs': bool(table.is_bigraph.all())}
    summary['checks'] = checks

    announce(exporters.write_csv(out / 'sweep.csv', table, {'a': cfg.a}))
    announce(exporters.write_json(out / 'sweep_summary.json', summary))
    _verify(checks)


# Argument parsing

def _ode_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', help='YAML or JSON file with run options')
    parser.add_argument('--out-dir', dest='out_dir', help='Output directory (default: out)')
    parser.add_argument('--z-min', dest='z_min', type=float, help='Height cutoff')
    parser.add_argument('--s-max', dest='s_max', type=float, help='Arc-length budget per half orbit')
    parser.add_argument('--rel-tol', dest='rel_tol', type=float, help='Relative step tolerance')
    parser.add_argument('--abs-tol', dest='abs_tol', type=float, help='Absolute step tolerance')
    parser.add_argument('--output-step', dest='output_step', type=float, help='Arc-length spacing of samples')
    parser.add_argument('--method', choices=['RK45', 'DOP853'], help='Explicit Runge-Kutta pair')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='cli.py',
        description='Grim reaper translators in the hyperbolic half-space: trace, build, mesh and verify',
    )
    parser.add_argument('--version', action='version', version=f"%(prog)s {read_version()}")
    sub = parser.add_subparsers(dest='command', required=True)

    trace = sub.add_parser('trace', help='Trace and classify the orbit through an apex')
    _ode_flags(trace)
    trace.add_argument('--z0', type=float, help='Apex height')
    trace.add_argument('--a', type=float, help='Killing parameter along d/dx (default: 1)')
    trace.add_argument('--first-integral-tol', dest='first_integral_tol', type=float,
                       help='Allowed relative drift of the a = 0 first integral')

    for name, help_text in (('reaper', 'Build a reaper generating curve (a != 0)'),
                            ('minimal', 'Build a minimal reaper generating curve (a = 0)')):
        curve = sub.add_parser(name, help=help_text)
        _ode_flags(curve)
        curve.add_argument('--z0', type=float, help='Apex height')
        if name == 'reaper':
            curve.add_argument('--a', type=float, help='Killing parameter along d/dx (default: 1)')
        curve.add_argument('--no-svg', dest='svg', action='store_const', const=False, help='Skip the SVG rendering')

    mesh = sub.add_parser('mesh', help='Mesh a surface and check the soliton equation')
    _ode_flags(mesh)
    mesh.add_argument('--family', choices=['reaper', 'minimal', 'vertical-plane', 'horosphere', 'spherical', 'cone'])
    mesh.add_argument('--z0', type=float, help='Apex height of reaper families')
    mesh.add_argument('--a', type=float, help='Killing parameter along d/dx')
    mesh.add_argument('--b', type=float, help='Killing parameter along d/dy')
    mesh.add_argument('--height', type=float, help='Horosphere height, or profile radius')
    mesh.add_argument('--profile', choices=['circle', 'horizontal', 'line'])
    mesh.add_argument('--offset', type=float, help='Distance of a cone line profile from the origin')
    mesh.add_argument('--ns', type=int, help='Profile samples of analytic families')
    mesh.add_argument('--nt', type=int, help='Samples across the rulings / around the axis')
    mesh.add_argument('--stride', type=int, help='Keep every stride-th curve sample')
    mesh.add_argument('--window', type=float, help='Half arc-length window of reaper families, in units of z0')
    mesh.add_argument('--residual-tol', dest='residual_tol', type=float)
    mesh.add_argument('--fd-tol', dest='fd_tol', type=float)

    portrait = sub.add_parser('portrait', help='Phase portrait with Gamma, regions and orbits')
    _ode_flags(portrait)
    portrait.add_argument('--a', type=float)
    portrait.add_argument('--orbits', type=float, nargs='*', help='Apex heights of the drawn orbits')
    portrait.add_argument('--z-max', dest='z_max', type=float)
    portrait.add_argument('--n-gamma', dest='n_gamma', type=int)

    sweep = sub.add_parser('sweep', help='Sweep the apex height')
    _ode_flags(sweep)
    sweep.add_argument('--a', type=float)
    sweep.add_argument('--z0-start', dest='z0_start', type=float)
    sweep.add_argument('--z0-stop', dest='z0_stop', type=float)
    sweep.add_argument('--count', type=int)
    sweep.add_argument('--z0-values', dest='values', type=float, nargs='+')
    sweep.add_argument('--workers', type=int)
    return parser


COMMANDS: Dict[str, tuple] = {
    'trace': (TraceConfig, cmd_trace),
    'reaper': (CurveConfig, cmd_reaper),
    'minimal': (CurveConfig, cmd_minimal),
    'mesh': (MeshConfig, cmd_mesh),
    'portrait': (PortraitConfig, cmd_portrait),
    'sweep': (SweepConfig, cmd_sweep),
}


def load_run_config(args: argparse.Namespace, model):
    """File values first (YAML or JSON), then every flag that was given."""
    values = {}
    if args.config:
        with open(args.config, 'r') as f:
            loaded = yaml.safe_load(f) or {}
        if not isinstance(loaded, dict):
            raise ValueError(f"config file {args.config} must hold a mapping")
        values.update(loaded)
    for key, value in vars(args).items():
        if key in ('command', 'config') or value is None:
            continue
        values[key] = value
    return model(**values)


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=Config.LOG_LEVEL)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE

    model, command = COMMANDS[args.command]
    try:
        defaults = Config.get_ode_defaults()
        logger.debug(f"integrator defaults: {defaults}")
        cfg = load_run_config(args, model)
        command(cfg)
    except (ClassificationFailure, VerificationFailure) as e:
        logger.error(f"{args.command}: {e}")
        return EXIT_VERIFICATION
    except IntegrationFailure as e:
        logger.error(f"{args.command}: {e} (last state {e.last_state})")
        return EXIT_NUMERICAL
    except (ValidationError, ValueError, OSError, yaml.YAMLError) as e:
        logger.error(f"{args.command}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())

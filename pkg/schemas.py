# schemas.py
from enum import Enum
from typing import List, Literal, Optional, Tuple
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from config import Config


# Half-space primitives
class HalfSpacePoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: float
    y: float
    z: float

    @field_validator('z')
    @classmethod
    def _height_positive(cls, value: float) -> float:
        if not value > 0:
            raise ValueError(f"point must lie in the upper half-space, got z={value}")
        return value


class KillingFieldParams(BaseModel):
    """xi = a d/dx + b d/dy; stored exactly as given."""
    model_config = ConfigDict(frozen=True)

    a: float = 1.0
    b: float = 0.0

    @property
    def is_trivial(self) -> bool:
        return self.a == 0 and self.b == 0

    def require_nontrivial(self) -> "KillingFieldParams":
        if self.is_trivial:
            # local import keeps schemas free of module dependencies
            from halfspace_model import DomainError
            raise DomainError("a and b must not both vanish for a soliton problem")
        return self

    def horizontal(self) -> np.ndarray:
        return np.array([self.a, self.b, 0.0])


class CurvatureData(BaseModel):
    model_config = ConfigDict(frozen=True)

    H_e: float
    N_e: Tuple[float, float, float]
    H: float

    @field_validator('N_e')
    @classmethod
    def _unit_normal(cls, value: Tuple[float, float, float]) -> Tuple[float, float, float]:
        norm = math.sqrt(sum(c * c for c in value))
        if abs(norm - 1.0) > Config.GEOMETRY_TOL:
            raise ValueError(f"Euclidean normal must be unit length, got |N_e|={norm!r}")
        return value


# ODE records
class CurveState(BaseModel):
    model_config = ConfigDict(frozen=True)

    s: float
    x: float
    z: float
    theta: float


class EventKind(str, Enum):
    GAMMA_CROSSING = "GammaCrossing"
    THETA_ZERO = "ThetaZero"
    THETA_HALF_PI = "ThetaHalfPi"
    HEIGHT_CUTOFF = "HeightCutoff"
    BUDGET = "Budget"


class OrbitEvent(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: EventKind
    s: float
    state: CurveState


class ODEParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    a: float = 1.0
    z_min: float = Field(default_factory=lambda: Config.Z_MIN, gt=0)
    s_max: float = Field(default_factory=lambda: Config.S_MAX, gt=0)
    rel_tol: float = Field(default_factory=lambda: Config.REL_TOL, gt=0, le=1e-2)
    abs_tol: float = Field(default_factory=lambda: Config.ABS_TOL, gt=0, le=1e-2)
    output_step: float = Field(default_factory=lambda: Config.OUTPUT_STEP, gt=0)
    stiff_height: float = Field(default_factory=lambda: Config.STIFF_HEIGHT, ge=0)
    method: Literal["RK45", "DOP853"] = Field(default_factory=lambda: Config.METHOD)
    # sign changes of the Gamma / half-pi functions below this height are not reported
    event_floor: Optional[float] = Field(default=None, ge=0)

    def resolved_event_floor(self) -> float:
        if self.event_floor is not None:
            return self.event_floor
        tol = max(self.rel_tol, self.abs_tol)
        return (1000.0 * max(abs(self.a), 1.0) ** 3 * tol) ** (1.0 / 3.0)


class IntegrationResult(BaseModel):
    """Samples of one orbit in integration order (|s| increasing)."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    s: np.ndarray
    x: np.ndarray
    z: np.ndarray
    theta: np.ndarray
    events: List[OrbitEvent] = Field(default_factory=list)
    termination: EventKind
    a: float
    direction: Literal[-1, 1] = 1

    @model_validator(mode='after')
    def _ordered(self) -> "IntegrationResult":
        n = len(self.s)
        if not (len(self.x) == len(self.z) == len(self.theta) == n):
            raise ValueError("sample columns must have equal length")
        if n > 1:
            steps = np.diff(self.s)
            if not (np.all(steps > 0) or np.all(steps < 0)):
                raise ValueError("samples must be strictly ordered in s")
        return self

    def __len__(self) -> int:
        return len(self.s)

    def state(self, i: int) -> CurveState:
        return CurveState(s=float(self.s[i]), x=float(self.x[i]),
                          z=float(self.z[i]), theta=float(self.theta[i]))

    @property
    def samples(self) -> List[CurveState]:
        return [self.state(i) for i in range(len(self.s))]

    @property
    def terminal(self) -> CurveState:
        return self.state(-1)

    def events_of(self, kind: EventKind) -> List[OrbitEvent]:
        return [event for event in self.events if event.kind == kind]


# Phase plane records
class PhasePoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    z: float = Field(gt=0)
    theta: float

    @field_validator('theta')
    @classmethod
    def _reduced_chart(cls, value: float) -> float:
        if not -math.pi / 2 < value <= math.pi:
            raise ValueError(f"theta must lie in (-pi/2, pi], got {value}")
        return value


class RegionTag(BaseModel):
    model_config = ConfigDict(frozen=True)

    dz_sign: Literal[-1, 0, 1]
    dtheta_sign: Literal[-1, 0, 1]

    @property
    def label(self) -> str:
        symbol = {-1: "-", 0: "0", 1: "+"}
        return f"{symbol[self.dz_sign]}{symbol[self.dtheta_sign]}"


class OrbitReport(BaseModel):
    apex_height: float
    a: float
    z_min: float
    gamma_crossing_s: float
    gamma_crossing_z: float
    theta_halfpi_crossing_s: float
    turning_point_x: float
    forward_asymptote: float
    backward_asymptote: float
    forward_terminal_z: float
    backward_terminal_z: float
    curvature_sign_changes: int
    max_height: float
    is_bigraph: bool
    mirrored: bool = False

    @model_validator(mode='after')
    def _crossing_sides(self) -> "OrbitReport":
        if not self.gamma_crossing_s > 0:
            raise ValueError("Gamma crossing must lie on the forward half of the orbit")
        if not self.theta_halfpi_crossing_s < 0:
            raise ValueError("half-pi crossing must lie on the backward half of the orbit")
        return self


# Generating curves
class CurveFamily(str, Enum):
    MINIMAL_REAPER = "MinimalReaper"
    REAPER = "Reaper"
    VERTICAL_PLANE = "VerticalPlane"
    ANALYTIC_PROFILE = "AnalyticProfile"


class GeneratingCurve(BaseModel):
    """Arc-length samples of alpha(s) = (x(s), 0, z(s)) ordered by s."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    s: np.ndarray
    x: np.ndarray
    z: np.ndarray
    theta: np.ndarray
    curvature: np.ndarray
    family: CurveFamily
    apex_height: float
    a: float = 0.0
    turning_index: Optional[int] = None
    turning_state: Optional[CurveState] = None

    @model_validator(mode='after')
    def _apex_is_max(self) -> "GeneratingCurve":
        if np.any(self.z <= 0):
            raise ValueError("generating curve must stay in the upper half-space")
        if abs(float(np.max(self.z)) - self.apex_height) > 1e-10:
            raise ValueError(
                f"apex height {self.apex_height} differs from sampled maximum {float(np.max(self.z))}"
            )
        if self.family == CurveFamily.MINIMAL_REAPER and self.turning_index is not None:
            raise ValueError("minimal reapers have no turning point")
        return self

    def __len__(self) -> int:
        return len(self.s)

    @property
    def samples(self) -> List[CurveState]:
        return [
            CurveState(s=float(s), x=float(x), z=float(z), theta=float(t))
            for s, x, z, t in zip(self.s, self.x, self.z, self.theta)
        ]


class BiGraphBranch(BaseModel):
    """One graphical component, ordered by increasing x, starting at the turning point."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    s: np.ndarray
    x: np.ndarray
    u: np.ndarray

    @model_validator(mode='after')
    def _is_graph(self) -> "BiGraphBranch":
        if len(self.x) > 1 and not np.all(np.diff(self.x) > 0):
            raise ValueError("branch must be strictly increasing in x")
        return self

    def pairs(self) -> List[Tuple[float, float]]:
        return [(float(x), float(u)) for x, u in zip(self.x, self.u)]


class BiGraph(BaseModel):
    lower: BiGraphBranch
    upper: BiGraphBranch
    turning_state: CurveState


# Surfaces
class Provenance(str, Enum):
    PARABOLIC = "Parabolic"
    SPHERICAL = "Spherical"
    HYPERBOLIC_CONE = "HyperbolicCone"


class SurfaceMesh(BaseModel):
    """Parametric (s, t) grid with analytic per-vertex curvature data."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    s: np.ndarray
    t: np.ndarray
    vertices: np.ndarray
    normals: np.ndarray
    H_e: np.ndarray
    H: np.ndarray
    provenance: Provenance
    orientation: Literal[-1, 1] = 1

    @model_validator(mode='after')
    def _valid_grid(self) -> "SurfaceMesh":
        shape = (len(self.s), len(self.t))
        if self.vertices.shape != shape + (3,) or self.normals.shape != shape + (3,):
            raise ValueError(f"vertex and normal arrays must have shape {shape + (3,)}")
        if self.H_e.shape != shape or self.H.shape != shape:
            raise ValueError(f"curvature arrays must have shape {shape}")
        if np.any(self.vertices[..., 2] <= 0):
            raise ValueError("all vertex heights must be positive")
        norms = np.linalg.norm(self.normals, axis=-1)
        if np.max(np.abs(norms - 1.0)) > Config.GEOMETRY_TOL:
            raise ValueError("normals must be unit length")
        return self

    @property
    def ns(self) -> int:
        return len(self.s)

    @property
    def nt(self) -> int:
        return len(self.t)

    @property
    def heights(self) -> np.ndarray:
        return self.vertices[..., 2]

    def flipped(self) -> "SurfaceMesh":
        return self.model_copy(update={
            'normals': -self.normals,
            'H_e': -self.H_e,
            'H': -self.H,
            'orientation': -self.orientation,
        })


class ResidualReport(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    max_abs: float
    mean_abs: float
    per_vertex: np.ndarray
    grid_spacing: float
    source: str

    @model_validator(mode='after')
    def _ordered_stats(self) -> "ResidualReport":
        if not self.max_abs >= self.mean_abs >= 0:
            raise ValueError("expected max_abs >= mean_abs >= 0")
        return self

    def summary(self) -> dict:
        return {
            'source': self.source,
            'max_abs': self.max_abs,
            'mean_abs': self.mean_abs,
            'grid_spacing': self.grid_spacing,
        }


class FourierObstruction(BaseModel):
    """Soliton defect of a spherical surface: c0(s) + c1(s) cos t + c2(s) sin t."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    s: np.ndarray
    c0: np.ndarray
    c1: np.ndarray
    c2: np.ndarray

    def evaluate(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.c0[:, None] + self.c1[:, None] * np.cos(t)[None, :] + self.c2[:, None] * np.sin(t)[None, :]

    def max_abs(self) -> Tuple[float, float, float]:
        return (float(np.max(np.abs(self.c0))), float(np.max(np.abs(self.c1))),
                float(np.max(np.abs(self.c2))))

    def is_identically_zero(self, tol: float) -> bool:
        return max(self.max_abs()) <= tol


class ConeProfile(BaseModel):
    """Plane curve (x(s), y(s)) at height 1 with its first two s-derivatives."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    s: np.ndarray
    x: np.ndarray
    y: np.ndarray
    dx: np.ndarray
    dy: np.ndarray
    ddx: np.ndarray
    ddy: np.ndarray

    @model_validator(mode='after')
    def _equal_lengths(self) -> "ConeProfile":
        n = len(self.s)
        if any(len(getattr(self, name)) != n for name in ('x', 'y', 'dx', 'dy', 'ddx', 'ddy')):
            raise ValueError("profile columns must have equal length")
        if n < 3:
            raise ValueError("profile needs at least three samples")
        return self

    @classmethod
    def from_samples(cls, s: np.ndarray, x: np.ndarray, y: np.ndarray) -> "ConeProfile":
        """Derivatives by second-order finite differences in s."""
        s = np.asarray(s, dtype=float)
        dx = np.gradient(x, s, edge_order=2)
        dy = np.gradient(y, s, edge_order=2)
        return cls(s=s, x=np.asarray(x, dtype=float), y=np.asarray(y, dtype=float), dx=dx, dy=dy,
                   ddx=np.gradient(dx, s, edge_order=2), ddy=np.gradient(dy, s, edge_order=2))


class ConeClass(str, Enum):
    TOTALLY_GEODESIC = "TotallyGeodesic"
    EQUIDISTANT = "Equidistant"
    NOT_TRANSLATOR = "NotTranslator"


class ConeReport(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    s: np.ndarray
    L: np.ndarray
    R: np.ndarray
    L_max_abs: float
    R_max_abs: float
    L_vanishes: bool
    R_vanishes: bool
    classification: ConeClass

    def summary(self) -> dict:
        return {
            'L_max_abs': self.L_max_abs,
            'R_max_abs': self.R_max_abs,
            'L_vanishes': self.L_vanishes,
            'R_vanishes': self.R_vanishes,
            'classification': self.classification.value,
        }


# Command-line run configurations
class RunConfig(BaseModel):
    """Options shared by every command; numeric defaults come from Config."""
    model_config = ConfigDict(extra='forbid')

    out_dir: str = "out"
    z_min: float = Field(default_factory=lambda: Config.Z_MIN, gt=0)
    s_max: float = Field(default_factory=lambda: Config.S_MAX, gt=0)
    rel_tol: float = Field(default_factory=lambda: Config.REL_TOL, gt=0, le=1e-2)
    abs_tol: float = Field(default_factory=lambda: Config.ABS_TOL, gt=0, le=1e-2)
    output_step: float = Field(default_factory=lambda: Config.OUTPUT_STEP, gt=0)
    method: Literal["RK45", "DOP853"] = Field(default_factory=lambda: Config.METHOD)

    def ode_params(self, a: float) -> ODEParams:
        return ODEParams(a=a, z_min=self.z_min, s_max=self.s_max, rel_tol=self.rel_tol,
                         abs_tol=self.abs_tol, output_step=self.output_step, method=self.method)

    def _require_above_cutoff(self, z0: float) -> None:
        if not z0 > self.z_min:
            raise ValueError(f"z0 must exceed z_min (z0={z0}, z_min={self.z_min})")


class TraceConfig(RunConfig):
    z0: float
    a: float = 1.0
    # relative drift allowed for the a = 0 first integral
    first_integral_tol: float = Field(default=1e-6, gt=0)

    @model_validator(mode='after')
    def _above_cutoff(self) -> "TraceConfig":
        self._require_above_cutoff(self.z0)
        return self


class CurveConfig(RunConfig):
    z0: float
    a: float = 1.0
    svg: bool = True

    @model_validator(mode='after')
    def _above_cutoff(self) -> "CurveConfig":
        self._require_above_cutoff(self.z0)
        return self


MeshFamily = Literal["reaper", "minimal", "vertical-plane", "horosphere", "spherical", "cone"]


class MeshConfig(RunConfig):
    family: MeshFamily = "reaper"
    z_min: float = Field(default=1e-3, gt=0)
    z0: float = 1.0
    a: Optional[float] = None
    b: Optional[float] = None
    height: float = Field(default=1.0, gt=0)
    profile: Optional[Literal["circle", "horizontal", "line"]] = None
    offset: float = 0.0
    ns: int = Field(default=33, ge=4)
    nt: int = Field(default=32, ge=4)
    # reaper families keep |s| <= window * z0 around the apex
    window: float = Field(default=0.5, gt=0)
    t_lo: float = -1.0
    t_hi: float = 1.0
    stride: int = Field(default=1, ge=1)
    residual_tol: float = Field(default=1e-8, gt=0)
    fd_tol: float = Field(default=1e-2, gt=0)

    @model_validator(mode='after')
    def _consistent(self) -> "MeshConfig":
        if self.family in ("reaper", "minimal"):
            self._require_above_cutoff(self.z0)
        if self.family == "minimal" and self.a not in (None, 0.0):
            raise ValueError("minimal reapers have a = 0")
        if self.family == "reaper" and self.a == 0:
            raise ValueError("reaper meshes need a != 0; use --family minimal")
        allowed = {"spherical": ("circle", "horizontal"), "cone": ("line", "circle")}
        if self.profile is not None and self.profile not in allowed.get(self.family, ()):
            raise ValueError(f"profile {self.profile!r} does not apply to family {self.family!r}")
        if not self.t_lo < self.t_hi:
            raise ValueError("t_lo must be below t_hi")
        return self

    def killing_field(self) -> KillingFieldParams:
        """Family defaults: xi = d/dy for the a = 0 families, d/dx otherwise."""
        if self.family in ("minimal", "vertical-plane"):
            a, b = 0.0, 1.0 if self.b is None else self.b
        else:
            a = 1.0 if self.a is None else self.a
            b = 0.0 if self.b is None else self.b
        return KillingFieldParams(a=a, b=b)


class PortraitConfig(RunConfig):
    a: float = Field(default=1.0, gt=0)
    orbits: List[float] = Field(default_factory=lambda: [2.0])
    z_max: float = Field(default=4.0, gt=0)
    n_gamma: int = Field(default=200, ge=2)
    grid_z: int = Field(default=40, ge=1)
    grid_theta: int = Field(default=60, ge=1)

    @model_validator(mode='after')
    def _orbits_above_cutoff(self) -> "PortraitConfig":
        for z0 in self.orbits:
            self._require_above_cutoff(z0)
        return self


class SweepConfig(RunConfig):
    a: float = 1.0
    z0_start: Optional[float] = None
    z0_stop: Optional[float] = None
    count: int = Field(default=4, ge=1)
    values: Optional[List[float]] = None
    workers: int = Field(default_factory=lambda: Config.SWEEP_WORKERS, ge=1)
    slope_tol: float = Field(default=1e-6, gt=0)

    @model_validator(mode='after')
    def _valid_range(self) -> "SweepConfig":
        if self.values is None:
            if self.z0_start is None or self.z0_stop is None:
                raise ValueError("give either explicit z0 values or z0_start and z0_stop")
            if self.count > 1 and not self.z0_start < self.z0_stop:
                raise ValueError(f"z0 range bounds are reversed ({self.z0_start} >= {self.z0_stop})")
        for z0 in self.heights():
            self._require_above_cutoff(z0)
        return self

    def heights(self) -> List[float]:
        if self.values is not None:
            return list(self.values)
        if self.count == 1:
            return [self.z0_start]
        return [float(v) for v in np.linspace(self.z0_start, self.z0_stop, self.count)]

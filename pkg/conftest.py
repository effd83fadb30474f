"""
Shared fixtures. Orbits are expensive, so the common ones are session-scoped.
"""
import pytest

from curve_factory import build_minimal_reaper, build_reaper
from schemas import CurveState, ODEParams


@pytest.fixture(scope="session")
def tight_params():
    """High-order pair at tight tolerances, for oracles that need many digits."""
    return ODEParams(a=1.0, z_min=1e-3, rel_tol=1e-12, abs_tol=1e-12, method="DOP853")


@pytest.fixture(scope="session")
def default_params():
    return ODEParams(a=1.0, z_min=1e-3)


@pytest.fixture(scope="session")
def reaper_two(default_params):
    """The a = 1 reaper with apex height 2."""
    return build_reaper(2.0, 1.0, default_params)


@pytest.fixture(scope="session")
def reaper_one_tight(tight_params):
    return build_reaper(1.0, 1.0, tight_params)


@pytest.fixture(scope="session")
def minimal_one(tight_params):
    return build_minimal_reaper(1.0, tight_params)


@pytest.fixture
def apex():
    def make(z0: float) -> CurveState:
        return CurveState(s=0.0, x=0.0, z=z0, theta=0.0)
    return make


@pytest.fixture(scope="session")
def reaper_one_fine(tight_params):
    """Densely sampled a = 1 reaper of height 1, for spline resampling."""
    return build_reaper(1.0, 1.0, tight_params.model_copy(update={'output_step': 2.5e-4}))

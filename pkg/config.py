"""
Configuration management for the grim reaper toolkit.
Loads numerical defaults from environment variables (and an optional .env file).
"""
import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


class Config:
    """Numerical defaults from environment variables"""

    # Integrator
    Z_MIN = float(os.getenv('REAPER_Z_MIN', '1e-6'))
    S_MAX = float(os.getenv('REAPER_S_MAX', '100'))
    REL_TOL = float(os.getenv('REAPER_REL_TOL', '1e-10'))
    ABS_TOL = float(os.getenv('REAPER_ABS_TOL', '1e-10'))
    OUTPUT_STEP = float(os.getenv('REAPER_OUTPUT_STEP', '0.01'))
    STIFF_HEIGHT = float(os.getenv('REAPER_STIFF_HEIGHT', '0.1'))
    METHOD = os.getenv('REAPER_METHOD', 'RK45')
    EVENT_S_TOL = float(os.getenv('REAPER_EVENT_S_TOL', '1e-14'))
    MIN_STEP = float(os.getenv('REAPER_MIN_STEP', '1e-14'))

    # Geometry checks (unit normals, CurvatureData consistency)
    GEOMETRY_TOL = float(os.getenv('REAPER_GEOMETRY_TOL', '1e-10'))

    # CLI
    SWEEP_WORKERS = int(os.getenv('REAPER_SWEEP_WORKERS', '1'))
    LOG_LEVEL = os.getenv('REAPER_LOG_LEVEL', 'INFO')

    @classmethod
    def validate_numeric(cls) -> tuple[bool, str]:
        """
        Validate that the numerical defaults satisfy the integrator preconditions.

        Returns:
            tuple: (is_valid, error_message)
        """
        problems = []

        if cls.Z_MIN <= 0:
            problems.append('REAPER_Z_MIN must be positive')
        if cls.S_MAX <= 0:
            problems.append('REAPER_S_MAX must be positive')
        for name, value in (('REAPER_REL_TOL', cls.REL_TOL), ('REAPER_ABS_TOL', cls.ABS_TOL)):
            if not 0 < value <= 1e-2:
                problems.append(f'{name} must lie in (0, 1e-2]')
        if cls.OUTPUT_STEP <= 0:
            problems.append('REAPER_OUTPUT_STEP must be positive')
        if cls.STIFF_HEIGHT < 0:
            problems.append('REAPER_STIFF_HEIGHT must be non-negative')
        if cls.METHOD not in ('RK45', 'DOP853'):
            problems.append('REAPER_METHOD must be RK45 or DOP853')

        if problems:
            return False, f"Invalid numerical configuration: {'; '.join(problems)}"

        return True, "Numerical configuration is valid"

    @classmethod
    def get_ode_defaults(cls) -> dict:
        """
        Get integrator defaults as a dictionary (ODEParams field names).

        Returns:
            dict: Dictionary of integrator defaults

        Raises:
            ValueError: If the environment holds invalid values
        """
        is_valid, error_msg = cls.validate_numeric()
        if not is_valid:
            raise ValueError(error_msg)

        return {
            'z_min': cls.Z_MIN,
            's_max': cls.S_MAX,
            'rel_tol': cls.REL_TOL,
            'abs_tol': cls.ABS_TOL,
            'output_step': cls.OUTPUT_STEP,
            'stiff_height': cls.STIFF_HEIGHT,
            'method': cls.METHOD,
        }

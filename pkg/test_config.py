import pytest

from cli import EXIT_USAGE, main
from config import Config


def test_defaults_are_valid():
    is_valid, message = Config.validate_numeric()
    assert is_valid, message
    defaults = Config.get_ode_defaults()
    assert set(defaults) == {'z_min', 's_max', 'rel_tol', 'abs_tol', 'output_step', 'stiff_height', 'method'}


@pytest.mark.parametrize("name, value", [
    ('Z_MIN', 0.0),
    ('REL_TOL', 0.5),
    ('OUTPUT_STEP', -0.01),
    ('METHOD', 'Euler'),
])
def test_invalid_environment_is_reported(monkeypatch, name, value):
    monkeypatch.setattr(Config, name, value)
    is_valid, message = Config.validate_numeric()
    assert not is_valid
    assert message.startswith("Invalid numerical configuration")
    with pytest.raises(ValueError):
        Config.get_ode_defaults()


def test_cli_refuses_invalid_environment(tmp_path, monkeypatch):
    monkeypatch.setattr(Config, 'STIFF_HEIGHT', -1.0)
    assert main(['trace', '--z0', '1', '--out-dir', str(tmp_path)]) == EXIT_USAGE
    assert not (tmp_path / 'trace_report.json').exists()

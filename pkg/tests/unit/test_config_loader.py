"""
ConfigLoaderのユニットテスト
"""

from pathlib import Path

import pytest
from pydantic import ValidationError as PydanticValidationError

from biostab.config.loader import ConfigLoader, build_case_config
from biostab.data.models import TopBoundary
from biostab.utils.errors import ConfigError


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding='utf-8')
    return path


def test_load_defaults_from_empty_file(tmp_path):
    config = ConfigLoader(write(tmp_path, "config.yaml", "")).load()
    assert config.schmidt == 20.0
    assert config.n_z == 65
    assert config.top_boundary == TopBoundary.STRESS_FREE


def test_load_flat_keys(tmp_path):
    path = write(tmp_path, "config.yaml", "vc: 15\ntau_h: 1.0\ntop_boundary: rigid\nk_max: 4.0\n")
    config = ConfigLoader(path).load()
    params = config.to_params()
    assert params.swim_speed == 15.0
    assert params.extinction == 1.0
    assert params.top_boundary == TopBoundary.RIGID
    assert config.to_numerics().k_max == 4.0


def test_unknown_key_is_rejected(tmp_path):
    path = write(tmp_path, "config.yaml", "vc: 20\nswim: 3\n")
    with pytest.raises(ConfigError) as excinfo:
        ConfigLoader(path).load()
    assert excinfo.value.config_key == "swim"


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        ConfigLoader(tmp_path / "missing.yaml").load()


def test_broken_yaml(tmp_path):
    path = write(tmp_path, "config.yaml", "vc: [1, 2\n")
    with pytest.raises(ConfigError):
        ConfigLoader(path).load()


@pytest.mark.parametrize("data", [
    {'omega': 1.5},
    {'tau_h': 0.0},
    {'n_tau': 200},
    {'n_z': 33},
    {'k_min': 3.0, 'k_max': 2.0},
    {'taxis': 'linear'},
])
def test_invalid_values(data):
    with pytest.raises(ConfigError):
        build_case_config(data)


def test_non_mapping_config():
    with pytest.raises(ConfigError):
        build_case_config([1, 2, 3])


def test_with_overrides_validates(tmp_path):
    config = ConfigLoader(write(tmp_path, "config.yaml", "")).load()
    updated = config.with_overrides({'b_flux': 0.62, 'a_coeff': 0.4})
    assert updated.b_flux == 0.62
    assert config.b_flux == 0.5
    with pytest.raises(PydanticValidationError):
        config.with_overrides({'omega': -0.1})


def test_sweep_expands_cases_then_grid(tmp_path):
    sweep = write(tmp_path, "sweep.yaml", (
        "cases:\n"
        "  - {tau_h: 1.0, b_flux: 0.75}\n"
        "grid:\n"
        "  b_flux: [0.5, 0.62]\n"
        "  a_coeff: [0.0, 0.4, 0.8]\n"
        "  top_boundary: rigid\n"
    ))
    loader = ConfigLoader(write(tmp_path, "config.yaml", ""))
    tuples = loader.load_sweep(sweep)
    assert len(tuples) == 7
    assert tuples[0] == {'tau_h': 1.0, 'b_flux': 0.75}
    assert tuples[1] == {'b_flux': 0.5, 'a_coeff': 0.0, 'top_boundary': 'rigid'}
    assert tuples[-1] == {'b_flux': 0.62, 'a_coeff': 0.8, 'top_boundary': 'rigid'}


def test_sweep_none_is_empty(tmp_path):
    assert ConfigLoader(write(tmp_path, "config.yaml", "")).load_sweep(None) == []


def test_sweep_rejects_unknown_section(tmp_path):
    sweep = write(tmp_path, "sweep.yaml", "runs:\n  - {vc: 10}\n")
    with pytest.raises(ConfigError):
        ConfigLoader(write(tmp_path, "config.yaml", "")).load_sweep(sweep)


CONFIG_DIR = Path(__file__).resolve().parents[2] / "config"


def test_shipped_sweep_files_have_eighteen_rows():
    for name in ("sweep_stress_free.yaml", "sweep_rigid.yaml"):
        tuples = ConfigLoader(CONFIG_DIR / "config.yaml").load_sweep(CONFIG_DIR / name)
        assert len(tuples) == 18


def test_shipped_sweeps_cover_high_flux_minimum():
    """B=0.63 の最小点 (k ≈ 6) が波数範囲の内側に入る"""
    loader = ConfigLoader(CONFIG_DIR / "config.yaml")
    base = loader.load()
    for name in ("sweep_stress_free.yaml", "sweep_rigid.yaml"):
        for overrides in loader.load_sweep(CONFIG_DIR / name):
            assert base.with_overrides(overrides).k_max >= 8.0

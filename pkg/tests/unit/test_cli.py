"""
コマンドラインインターフェースのテスト
"""

import json
from unittest.mock import MagicMock, patch

import numpy as np
import pytest

from biostab import cli
from biostab.config.models import CaseConfig
from biostab.core.analyzer import build_manifest
from biostab.core.csv_exporter import read_manifest_hash
from biostab.data.models import ResultRow
from biostab.utils.errors import BracketingError


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("b_flux: 0.5\n", encoding='utf-8')
    return path


@pytest.fixture
def empty_sweep(tmp_path):
    path = tmp_path / "sweep.yaml"
    path.write_text("cases: []\n", encoding='utf-8')
    return path


def run_cli(*args):
    return cli.main(list(args))


def test_empty_sweep_writes_header_and_manifest(config_file, empty_sweep, tmp_path):
    out = tmp_path / "out"
    code = run_cli("sweep", "--config", str(config_file), "--out", str(out), "--sweep-file", str(empty_sweep))
    assert code == cli.EXIT_OK
    lines = (out / "results.csv").read_text(encoding='utf-8').splitlines()
    assert len(lines) == 2
    assert lines[1] == ",".join(ResultRow.COLUMNS)

    records = [json.loads(line) for line in (out / "manifest.jsonl").read_text(encoding='utf-8').splitlines()]
    assert len(records) == 1
    assert records[0]['output_paths'] == [str(out / "results.csv")]
    assert records[0]['code_version']


def test_manifest_is_appended(config_file, empty_sweep, tmp_path):
    out = tmp_path / "out"
    for _ in range(2):
        run_cli("sweep", "--config", str(config_file), "--out", str(out), "--sweep-file", str(empty_sweep))
    lines = (out / "manifest.jsonl").read_text(encoding='utf-8').splitlines()
    assert len(lines) == 2
    # 同じ入力ならハッシュは同じ
    assert read_manifest_hash(out / "results.csv") == cli.StabilityAnalyzer(
        CaseConfig(b_flux=0.5)).manifest(extra={'sweep': []}).content_hash()


def test_unknown_config_key_exits_with_config_code(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("b_flux: 0.5\nflux: 1\n", encoding='utf-8')
    assert run_cli("steady", "--config", str(path), "--out", str(tmp_path)) == cli.EXIT_CONFIG


def test_evolve_requires_wavenumber(config_file, tmp_path):
    assert run_cli("evolve", "--config", str(config_file), "--out", str(tmp_path)) == cli.EXIT_CONFIG


def test_partial_sweep_exit_code(config_file, empty_sweep, tmp_path):
    rows = [
        ResultRow(vc=20, tau_h=0.5, omega=0.7, b_flux=0.5, a_coeff=0.0, lambda_c=3.0, r_c=240.0, mode=1,
                  im_sigma=0.0, branch="stationary", top_boundary="stress_free"),
        ResultRow(vc=20, tau_h=0.5, omega=0.7, b_flux=0.5, a_coeff=0.4, top_boundary="stress_free",
                  status="failed: BracketingError"),
    ]
    with patch("biostab.cli.run_sweep", return_value=rows):
        code = run_cli("sweep", "--config", str(config_file), "--out", str(tmp_path / "out"),
                       "--sweep-file", str(empty_sweep))
    assert code == cli.EXIT_PARTIAL
    lines = (tmp_path / "out" / "results.csv").read_text(encoding='utf-8').splitlines()
    assert len(lines) == 4


def test_solver_failure_exit_code(config_file, tmp_path):
    with patch("biostab.cli.StabilityAnalyzer") as analyzer_cls:
        analyzer_cls.return_value.neutral_curve.side_effect = BracketingError("符号変化なし", k=1.0)
        code = run_cli("critical", "--config", str(config_file), "--out", str(tmp_path / "out"))
    assert code == cli.EXIT_SOLVER
    # 失敗時は何も書き出さない
    assert not (tmp_path / "out").exists()


def test_unexpected_failure_exit_code(config_file, tmp_path):
    with patch("biostab.cli.StabilityAnalyzer") as analyzer_cls:
        analyzer_cls.return_value.steady_tables.side_effect = RuntimeError("boom")
        assert run_cli("steady", "--config", str(config_file), "--out", str(tmp_path)) == cli.EXIT_UNEXPECTED


def test_steady_writes_both_tables(config_file, tmp_path):
    config = CaseConfig(b_flux=0.5)
    z = np.linspace(0.0, 1.0, 5)
    intensity = {'tau': 0.5 * (1 - z), 'z': z, 'g_s': np.ones(5), 'q_s': np.ones(5)}
    basic = {name: z for name in cli.BASIC_STATE_COLUMNS}
    analyzer = MagicMock()
    analyzer.steady_tables.return_value = (intensity, basic)
    analyzer.manifest.return_value = build_manifest(config, "tanh(s=2,Gc=1)")
    out = tmp_path / "out"
    with patch("biostab.cli.StabilityAnalyzer", return_value=analyzer):
        assert run_cli("steady", "--config", str(config_file), "--out", str(out)) == cli.EXIT_OK
    assert (out / "intensity.csv").exists()
    assert (out / "basic_state.csv").exists()
    assert read_manifest_hash(out / "intensity.csv") == read_manifest_hash(out / "basic_state.csv")


def test_parser_rejects_unknown_verb():
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args(["plot"])

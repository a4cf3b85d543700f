"""
エラー処理のユニットテスト
"""

import pytest

from biostab.utils.errors import (
    AppError, BracketingError, ExportError, SolverError, format_error_message, with_error_handling,
)


@with_error_handling(ExportError, "書き込みに失敗しました")
def failing_write():
    raise OSError("disk full")


@with_error_handling(ExportError, "書き込みに失敗しました")
def failing_solve():
    raise BracketingError("符号変化がありません", k=2.0)


def test_wraps_foreign_exception():
    with pytest.raises(ExportError) as excinfo:
        failing_write()
    error = excinfo.value
    assert error.message == "書き込みに失敗しました"
    assert error.details['function'] == "failing_write"
    assert error.details['cause'] == "disk full"
    assert isinstance(error.__cause__, OSError)


def test_passes_app_errors_through():
    with pytest.raises(BracketingError):
        failing_solve()


def test_returns_value_on_success():
    @with_error_handling()
    def ok(x):
        return 2 * x

    assert ok(21) == 42
    assert ok.__name__ == "ok"


def test_format_hides_traceback():
    with pytest.raises(ExportError) as excinfo:
        failing_write()
    text = format_error_message(excinfo.value)
    assert "traceback" not in text
    assert "disk full" in text
    assert format_error_message(ValueError("x")).endswith("x")
    assert isinstance(BracketingError("m"), SolverError) and issubclass(SolverError, AppError)

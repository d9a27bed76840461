"""Acceptance suite: one test per criterion, each printing a pass/fail line."""

import pytest

from squirrelwalk.acceptance import CRITERIA, operation_checks, run_criterion


@pytest.mark.parametrize("number", sorted(CRITERIA), ids=lambda n: f"criterion_{n:02d}")
def test_criterion(number, capsys):
    result = run_criterion(number)
    with capsys.disabled():
        print("\n" + result.line())
        for key, value in result.details.items():
            print(f"    {key}: {value}")
    assert result.passed, result.details


def test_every_operation_example(capsys):
    checks = operation_checks()
    with capsys.disabled():
        print()
        for name, ok in checks:
            print(f"[{'PASS' if ok else 'FAIL'}] {name}")
    assert all(ok for _, ok in checks), [name for name, ok in checks if not ok]

import pathlib

import pytest

from fuel import cli, parser

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


def fixture_path(name: str) -> str:
    return str(FIXTURES / f"{name}.fuel")


def fixture_text(name: str) -> str:
    return (FIXTURES / f"{name}.fuel").read_text()


def parse_fixture(name: str):
    return parser.parse_module(fixture_text(name), f"{name}.fuel")


@pytest.fixture
def run_cli(capsys):
    """Invoke the CLI in-process; returns (exit code, stdout, stderr)."""

    def go(*args):
        try:
            code = cli.main(list(args))
        except SystemExit as exc:
            code = exc.code if isinstance(exc.code, int) else 1
        captured = capsys.readouterr()
        return code, captured.out, captured.err

    return go

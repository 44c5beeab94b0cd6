from __future__ import annotations

import sys
from pathlib import Path

import pytest

TESTS_DIR = Path(__file__).resolve().parent
DATA_DIR = TESTS_DIR / "data"
GOLDEN_DIR = DATA_DIR / "golden"

# Make the oracle helpers (tests/bruteforce.py) importable from any test.
if str(TESTS_DIR) not in sys.path:
    sys.path.insert(0, str(TESTS_DIR))

MINIDUMP = DATA_DIR / "minidump.xml"
FIXTURE_DATES = ("2017-03-01", "2018-03-01")


@pytest.fixture(scope="session")
def minidump_path() -> Path:
    return MINIDUMP


@pytest.fixture()
def out_dir(tmp_path: Path) -> Path:
    out = tmp_path / "out"
    out.mkdir()
    return out


def run_pipeline(out: Path, dump: Path = MINIDUMP, jobs: int = 1,
                 dates: tuple[str, ...] = FIXTURE_DATES) -> None:
    """Run extract -> snapshot -> graph over a dump, asserting success."""
    from wikilinks import cli

    date_args: list[str] = []
    for date in dates:
        date_args += ["--date", date]
    base = ["--lang", "en", "--output-dir", str(out)]
    assert cli.main(["extract", *base, "--jobs", str(jobs), str(dump)]) == 0
    assert cli.main(["snapshot", *base, *date_args]) == 0
    assert cli.main(["graph", *base, *date_args]) == 0

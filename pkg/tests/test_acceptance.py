"""Acceptance criteria 1-10 at their stated tolerances.

Runs the full ``accept`` pipeline twice on the default configuration (the
second run feeds the determinism criterion) and reports one PASS/FAIL line
per criterion. Run directly with ``python3 tests/test_acceptance.py`` or via
pytest, where the lines also appear in the terminal summary.
"""

from __future__ import annotations

import sys

import pytest

from lpmanifold.cli import run_accept
from lpmanifold.config import ExperimentConfig

LINES: list[str] = []


@pytest.fixture(scope="module")
def results(tmp_path_factory):
    out = tmp_path_factory.mktemp("accept")

    def echo(line):
        LINES.append(line)
        print(line)

    res, _ = run_accept(ExperimentConfig(), out, repeat=True, echo=echo)
    return {r.number: r for r in res}


@pytest.mark.slow
@pytest.mark.parametrize("number", range(1, 11))
def test_criterion(results, number):
    r = results[number]
    print(r.line())
    assert r.status == "PASS", f"{r.line()} measured={r.measured}"
    if r.runtime_limit is not None:
        assert r.runtime <= r.runtime_limit


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    with tempfile.TemporaryDirectory() as d:
        res, _ = run_accept(ExperimentConfig(), Path(d), repeat=True)
    sys.exit(0 if all(r.status == "PASS" for r in res) else 1)

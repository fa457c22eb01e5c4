"""Acceptance battery: one test and one report line per criterion.

Run directly (``python tests/test_acceptance.py``) to print the lines
without pytest.
"""

import json
import sys

import pytest

from hamiltonia.acceptance import CRITERIA, run_criterion


@pytest.mark.parametrize("number", sorted(CRITERIA), ids=lambda n: f"criterion_{n:02d}")
def test_criterion(number, acceptance_log):
    r = run_criterion(number)
    line = r.line()
    print(line)
    print(json.dumps(r.details, default=str, sort_keys=True))
    acceptance_log.append(line)
    assert r.passed, json.dumps(r.details, default=str, sort_keys=True)


if __name__ == "__main__":
    results = [run_criterion(n) for n in sorted(CRITERIA)]
    for r in results:
        print(r.line())
    sys.exit(0 if all(r.passed for r in results) else 1)

"""Every acceptance criterion at its stated tolerance and time budget.

Each test writes one ``[PASS]`` or ``[FAIL]`` line straight to the terminal,
so the lines also appear in plain ``pytest -v`` output.
"""

import re

import pytest

from komatu_loewner.validation import NAMES, run_criterion


def _slug(n):
    return f"criterion_{n:02d}_" + re.sub(r"[^a-z0-9]+", "_", NAMES[n].lower()).strip("_")


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(NAMES), ids=_slug)
def test_criterion(number, capsys):
    result = run_criterion(number, level="full", seed=0)
    line = result.line()
    with capsys.disabled():
        print("\n" + line)
    assert result.passed, line

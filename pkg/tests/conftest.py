from pathlib import Path

import pytest

from nfcce.game import load_game
from nfcce.seqform import build_sequence_form

DATA = Path(__file__).resolve().parents[1] / "src" / "nfcce" / "data"

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def coarse_gap_game():
    return load_game(DATA / "coarse_gap_k3.json")


@pytest.fixture(scope="session")
def coarse_gap_sf(coarse_gap_game):
    return build_sequence_form(coarse_gap_game)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")

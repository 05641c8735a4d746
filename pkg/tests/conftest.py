from types import SimpleNamespace

import numpy as np
import pytest

from curvedflats import (
    MetricSpace,
    default_spec,
    demoulin_families,
    eta_from_flat,
    generate_vacuum,
    split_W,
    split_connection,
)
from curvedflats.cli import RunConfig, run_verify

# criterion -> (passed, detail), filled by test_acceptance
ACCEPTANCE: dict = {}


@pytest.fixture(scope="session")
def space():
    return MetricSpace(2)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def vacuum():
    """The default vacuum curved flat with one Demoulin pair and its potential."""
    spec = default_spec()
    W = generate_vacuum(spec)
    DW, NW = split_W(W)
    fams = demoulin_families(W, samples=(), DW=DW)
    f = fams.member("A", (1.0, 0.0))
    ft = fams.member("A", (0.0, 1.0))
    split = split_connection(f, ft)
    pot = eta_from_flat(f, ft, 1.0, frame=W.frame, split=split)
    return SimpleNamespace(spec=spec, W=W, DW=DW, NW=NW, fams=fams, f=f, ft=ft, split=split, pot=pot)


@pytest.fixture(scope="session")
def verify_report():
    return run_verify(RunConfig.from_dict({}))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[2:])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key} {'PASS' if ok else 'FAIL'} {detail}")

import csv

import jax.numpy as jnp
import numpy as np
import pytest

from curvedflats import Field, eta_from_flat, gauge_transform, is_lie_applicable, plaquette_defect, q_direct, q_trace, tau_from_scalar
from curvedflats.applicable import wedge2_defect


def test_eta_properties(vacuum):
    pot = vacuum.pot
    assert pot.closedness().max() < 1e-12
    assert pot.bracket_defect().max() < 1e-12
    assert pot.block_defect().max() < 1e-12
    for t in (-1.0, 0.5):
        assert plaquette_defect(pot.connection(t)).max() < 1e-10


def test_eta_scales_with_m(vacuum):
    other = eta_from_flat(vacuum.f, vacuum.ft, 2.0, split=vacuum.split)
    diff = (other.eta * 2.0 - vacuum.pot.eta).norm()
    assert diff.max() < 1e-14
    with pytest.raises(ValueError, match="nonzero"):
        eta_from_flat(vacuum.f, vacuum.ft, 0.0)


def test_q_identity_and_symmetry(vacuum):
    qd = q_direct(vacuum.pot)
    qt = q_trace(vacuum.W, 1.0, vacuum.NW)
    assert (qd - qt).max() < 1e-12
    assert qd.symmetry_defect().max() < 1e-12
    assert qd.nonzero_fraction() == 1.0


def test_gauge_transform_keeps_q(vacuum):
    g = vacuum.f.grid
    phi = Field.from_function(g, lambda u, v: 0.3 * jnp.cos(u + 2 * v))
    tau = tau_from_scalar(vacuum.f, phi)
    assert wedge2_defect(vacuum.f, tau).max() < 1e-12
    moved = gauge_transform(vacuum.pot, tau)
    assert (q_direct(moved) - q_direct(vacuum.pot)).max() < 1e-10
    assert moved.closedness().max() < 1e-10


def test_gauge_transform_rejects_bad_tau(vacuum):
    g = vacuum.f.grid
    X = np.asarray(vacuum.f.space.wedge(vacuum.f.space.e(0), vacuum.f.space.e(1)))
    with pytest.raises(ValueError, match="node"):
        gauge_transform(vacuum.pot, Field.constant(g, X))


def test_is_lie_applicable(vacuum):
    ok, rep = is_lie_applicable(vacuum.f, vacuum.pot)
    assert ok, rep.failures()
    zero = vacuum.pot.scaled(0.0)
    ok, rep = is_lie_applicable(vacuum.f, zero)
    assert not ok and rep.failures() == ["q_zero_fraction"]


def test_q_csv(vacuum, tmp_path):
    path = q_direct(vacuum.pot).to_csv(tmp_path / "q.csv")
    with path.open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["i", "j", "u", "v", "det", "trace"]
    assert len(rows) == 1 + 33 * 33

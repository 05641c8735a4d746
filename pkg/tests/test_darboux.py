import numpy as np
import pytest

from curvedflats import (
    SubbundleField,
    darboux_transform,
    degenerate_spec,
    generate_vacuum,
    intersection_bundle,
    parallel_null_lines,
    ribaucour_connection,
    theorem_converse,
    verify_forward,
)
from curvedflats.darboux import lightcone_sample, null_partner


def test_lightcone_samples_are_null(space, rng):
    X = lightcone_sample(space, 50, rng)
    assert np.abs(np.sum(X * space.signs * X, axis=1)).max() < 1e-12
    for x in X[:10]:
        y = null_partner(space, x, rng)
        assert abs(space.inner(y, y)) < 1e-12 and abs(space.inner(x, y)) < 1e-12
        assert np.linalg.matrix_rank(np.column_stack([x, y])) == 2


def test_demoulin_pair_is_ribaucour(vacuum):
    fb = vacuum.fams.member("B", (0.0, 1.0))
    shat = intersection_bundle(vacuum.ft, fb)
    assert shat.parallel_defect(vacuum.pot.connection(1.0)).max() < 1e-10
    pair = darboux_transform(vacuum.f, vacuum.pot, 1.0, shat)
    assert pair.fhat.distance(fb).max() < 1e-10
    _, d = ribaucour_connection(pair)
    assert d.max < 1e-8


def test_parallel_lines_from_lightcone(vacuum, rng):
    C = vacuum.pot.connection(1.0)
    lines = parallel_null_lines(C, 2, vacuum.f.space, rng=rng, avoid=vacuum.f)
    for s in lines:
        assert s.is_null(1e-10)
        assert s.parallel_defect(C).max() < 1e-10
        pair = darboux_transform(vacuum.f, vacuum.pot, 1.0, s)
        assert pair.fhat.is_null(1e-10)


def test_darboux_transform_rejects_line_in_f(vacuum):
    inside = SubbundleField(vacuum.f.basis @ np.array([[1.0], [0.0]]), vacuum.f.space)
    with pytest.raises(ValueError, match="meets f"):
        darboux_transform(vacuum.f, vacuum.pot, 1.0, inside)
    with pytest.raises(ValueError, match="nonzero"):
        darboux_transform(vacuum.f, vacuum.pot, 0.0, inside)


def test_theorem_converse_rank2(vacuum):
    lines = [intersection_bundle(vacuum.ft, vacuum.fams.member("B", b)) for b in ((1, 0), (0, 1), (1, -1))]
    rep, ft = theorem_converse(vacuum.f, vacuum.pot, 1.0, lines)
    assert rep.passed, rep.failures()
    assert ft.distance(vacuum.ft).max() < 1e-10


def test_degenerate_w_is_not_asserted():
    rep = verify_forward(generate_vacuum(degenerate_spec()), 1.0)
    assert not rep.passed
    assert any("not regular" in n for n in rep.notes)

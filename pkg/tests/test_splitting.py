import numpy as np
import pytest

from curvedflats import Grid, MetricSpace, SubbundleField
from curvedflats.splitting import (
    check_complementary,
    gcr_residuals,
    legendre_defect,
    legendre_defect_via_complement,
    non_legendre_example,
    smooth_pair,
    split_connection,
)


def test_blocks_and_reconstruction(vacuum):
    s = vacuum.split
    for name, r in s.block_defects().items():
        assert r.max() < 1e-12, name
    assert s.preservation_defect().max() < 1e-10
    sec = vacuum.W.bundle.column(0)
    assert s.reconstruction(sec).max() < 1e-12


def test_gcr_on_exact_data(vacuum):
    reps = gcr_residuals(vacuum.split)
    assert len(reps) == 5
    assert all(r.passed and r.max < 1e-12 for r in reps)


def test_smooth_pair_gcr_is_second_order():
    sp = MetricSpace(2)
    maxima = []
    for N in (17, 33):
        f, ft = smooth_pair(Grid(N, N), sp)
        assert not f.exact
        maxima.append(max(r.max for r in gcr_residuals(split_connection(f, ft))))
    assert 1.7 < np.log2(maxima[0] / maxima[1]) < 2.3


def test_legendre_agrees_with_A(vacuum, space, rng):
    direct = legendre_defect(vacuum.f)
    for _ in range(2):
        c = vacuum.ft.transform(space.random_orthogonal(rng, 0.3))
        assert np.abs(direct - legendre_defect_via_complement(vacuum.f, c)).max() < 1e-10


def test_non_legendre_example_is_detected(space):
    f, ft = non_legendre_example(Grid(17, 17), space)
    assert legendre_defect(f).max() > 0.01
    assert legendre_defect_via_complement(f, ft).max() > 0.01


def test_check_complementary_names_node(vacuum, space):
    with pytest.raises(ValueError, match="complementary"):
        check_complementary(vacuum.f, vacuum.f)
    g = vacuum.f.grid
    e = space.e
    spacelike = SubbundleField.constant(g, space, np.column_stack([e(0), e(1)]))
    with pytest.raises(ValueError, match="not null at node"):
        check_complementary(spacelike, vacuum.ft)

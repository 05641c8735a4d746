import numpy as np
import pytest

from curvedflats import (
    CurvedFlatSpec,
    constant_vectors,
    default_spec,
    degenerate_spec,
    generate_vacuum,
    intersection_bundle,
    perturbed_spec,
    plaquette_defect,
    regularity_field,
)
from curvedflats.splitting import legendre_defect


def test_spec_json_round_trip():
    s = default_spec()
    t = CurvedFlatSpec.from_json(s.to_json())
    assert t.to_json() == s.to_json()
    d = s.to_dict()
    del d["xi2"]
    with pytest.raises(ValueError, match="xi2"):
        CurvedFlatSpec.from_dict(d)


def test_spec_validation(space):
    s = default_spec()
    s.validate()
    with pytest.raises(ValueError, match="commute"):
        perturbed_spec().validate()
    perturbed_spec().validate(strict=False)
    e = space.e
    bad = CurvedFlatSpec(2, 33, 33, s.W0_basis, (e(2), e(0)), s.xi2)
    with pytest.raises(ValueError, match="W0"):
        bad.validate()
    with pytest.raises(ValueError, match="signature"):
        CurvedFlatSpec(2, 33, 33, np.eye(6)[:, :4], s.xi1, s.xi2).validate()


def test_vacuum_is_curved_flat(vacuum):
    W = vacuum.W
    assert W.signature_ok()
    assert plaquette_defect(vacuum.DW).max() < 1e-10
    reg = regularity_field(W, vacuum.NW)
    assert reg.regular and reg.norm.min() > 0.1


def test_constant_vectors_of_default(vacuum):
    cv = constant_vectors(vacuum.W)
    assert cv["dim"] == 2 and cv["timelike"]


def test_demoulin_members_are_legendre_and_meet(vacuum):
    fams = vacuum.fams
    for fam, alpha in (("A", (1, 1)), ("B", (2, 1))):
        m = fams.member(fam, alpha)
        assert m.is_null(1e-12)
        assert legendre_defect(m).max() < 1e-12
        assert m.parallel_defect(vacuum.DW).max() < 1e-10
    s = intersection_bundle(fams.member("A", (1, 0)), fams.member("B", (1, 0)))
    assert s.rank == 1 and s.is_null(1e-12)


def test_transformed_spec_moves_W(space, rng):
    R = space.random_orthogonal(rng, 0.3)
    s = default_spec().transformed(R)
    s.validate()
    a = generate_vacuum(default_spec()).bundle
    b = generate_vacuum(s).bundle
    assert a.transform(R).distance(b).max() < 1e-10


def test_degenerate_and_perturbed():
    deg = generate_vacuum(degenerate_spec())
    assert not regularity_field(deg).regular
    pert = generate_vacuum(perturbed_spec(), strict=False)
    assert pert.frame is None

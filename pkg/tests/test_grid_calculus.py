import jax.numpy as jnp
import numpy as np
import pytest

from curvedflats import MetricSpace
from curvedflats.grid_calculus import (
    Connection,
    Field,
    FlatnessError,
    Grid,
    OneForm,
    curvature,
    dump_field,
    edge_transports,
    expm_affine,
    ext_d,
    fd_partial,
    frame_path_defect,
    load_field,
    parallel_frame,
    parallel_transport,
    plaquette_defect,
)


def test_grid_rejects_tiny():
    with pytest.raises(ValueError):
        Grid(4, 33)
    assert Grid(17, 17).halved() == Grid(33, 33)


def test_fd_partial_is_second_order():
    errs = []
    for N in (17, 33, 65):
        x = np.linspace(0, 1, N)
        d = fd_partial(np.sin(3 * x), 1.0 / (N - 1), 0)
        errs.append(np.abs(d - 3 * np.cos(3 * x)).max())
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all((orders > 1.8) & (orders < 2.2))


def test_closed_form_partials_are_exact():
    g = Grid(33, 33)
    F = Field.from_function(g, lambda u, v: jnp.sin(u) * v**2)
    U, V = g.mesh()
    assert np.allclose(F.partial(0).values, np.cos(U) * V**2, atol=1e-14)
    assert np.allclose(F.partial(1).partial(1).values, 2 * np.sin(U), atol=1e-14)
    # d d = 0 on closed forms
    assert ext_d(F.d()).norm().max() < 1e-14


def test_sampled_partial_converges():
    g = Grid(33, 33)
    U, V = g.mesh()
    F = Field.from_samples(g, np.exp(U) * np.cos(V))
    assert not F.exact
    assert np.abs(F.partial(0).values - F.values).max() < 10 * g.h**2


def test_expm_affine_matches_scipy(rng):
    from scipy.linalg import expm

    X, Y = rng.normal(size=(2, 4, 4))
    fn = expm_affine(X, Y)
    assert np.allclose(np.asarray(fn(0.7, -0.4)), expm(0.7 * X - 0.4 * Y), atol=1e-12)


def test_pure_gauge_is_flat_and_transports_agree():
    g = Grid(17, 17)
    X = np.array([[0.0, 1.0], [-1.0, 0.0]])
    Y = np.array([[0.0, 0.5], [0.5, 0.0]])
    # commuting constant potential: flat
    C = Connection(OneForm.constant(g, X, 2 * X))
    assert plaquette_defect(C).max() < 1e-12
    assert curvature(C).norm().max() < 1e-14
    Phi = parallel_frame(C)
    path = [(0, 0), (1, 0), (1, 1), (2, 1)]
    vec = np.array([1.0, 0.0])
    assert np.allclose(parallel_transport(C, path, vec), Phi.values[2, 1] @ vec, atol=1e-10)
    assert frame_path_defect(C).max() < 1e-10
    # non-commuting constant potential: curved
    bad = Connection(OneForm.constant(g, X, Y))
    assert plaquette_defect(bad).max() > 0.1
    with pytest.raises(FlatnessError):
        parallel_frame(bad)


def test_field_dump_round_trip(tmp_path):
    g = Grid(9, 9)
    F = Field.from_samples(g, np.arange(9 * 9 * 2.0).reshape(9, 9, 2) / 7)
    for suffix in ("json", "csv"):
        G = load_field(dump_field(F, tmp_path / f"f.{suffix}"))
        assert np.array_equal(G.values, F.values)
    with pytest.raises(ValueError):
        dump_field(F, tmp_path / "f.xml")


def test_transports_orthogonal_and_plaquette_tracks_curvature():
    sp = MetricSpace(2)
    e = sp.e
    X, Y = np.asarray(sp.wedge(e(0), e(4))), np.asarray(sp.wedge(e(1), e(0)))
    g = Grid(17, 17)
    a = Field.from_function(g, lambda u, v: (jnp.sin(u + v) + 0.5)[..., None, None] * X)
    b = Field.from_function(g, lambda u, v: (u * v)[..., None, None] * Y)
    C = Connection(OneForm(a, b))
    for T in edge_transports(C):
        assert np.abs(np.swapaxes(T, -1, -2) @ sp.gram @ T - sp.gram).max() < 1e-10
    # cell holonomy against the curvature averaged over the cell corners
    k = curvature(C).norm()
    corner = 0.25 * (k[:-1, :-1] + k[1:, :-1] + k[:-1, 1:] + k[1:, 1:])
    ratio = plaquette_defect(C) / corner
    assert ratio.min() > 0.5 and ratio.max() < 2.0

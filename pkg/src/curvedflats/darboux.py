"""Darboux transforms, the Ribaucour connection and the curved flat theorem checks.

For a Lie applicable ``f`` with potential ``eta`` and a null line ``s^``
parallel for ``d + m eta`` and nowhere in ``f``, the plane
``f^ = (f ^ s^perp) + s^`` is an ``m``-Darboux transform.  The routines here
build such transforms, test the Ribaucour condition and run both directions
of the correspondence between curved flats and Darboux pairs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import jax.numpy as jnp
import numpy as np

from .applicable import GaugePotential, eta_from_flat, is_lie_applicable
from .bundles import SubbundleField
from .curved_flat import (
    WField,
    demoulin_families,
    from_bundle,
    intersection_bundle,
    regularity_field,
    split_W,
)
from .grid_calculus import (
    Connection,
    Field,
    FlatnessError,
    OneForm,
    default_flatness_tol,
    expm_affine,
    lift,
    parallel_frame,
    plaquette_defect,
)
from .pseudo_linalg import MetricSpace, normalize_rp1
from .report import CheckReport, DefectReport, defect
from .splitting import check_complementary, exact_tolerance, split_connection

# a line counts as meeting f when its angle to f drops below this
MEET_ANGLE = 1e-6
# lines sampled for transforms keep at least this angle from f
SAMPLE_ANGLE = 1e-3
# singular-value gap deciding the rank of a span of lines
RANK_GAP = 1e-6


def _angle_to(f: SubbundleField, vec: np.ndarray) -> np.ndarray:
    """Nodewise sine of the angle between ``vec`` (``(..., dim)``) and the fiber of ``f``."""
    q, _ = np.linalg.qr(f.values)
    r = vec - (q @ (np.swapaxes(q, -1, -2) @ vec[..., None]))[..., 0]
    return np.linalg.norm(r, axis=-1) / np.linalg.norm(vec, axis=-1)


def lightcone_sample(space: MetricSpace, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` null vectors ``(p, q)`` with ``|p| = |q| = 1``, stratified in the angle of ``q``."""
    P = rng.normal(size=(count, space.n + 2))
    P /= np.linalg.norm(P, axis=1, keepdims=True)
    theta = 2.0 * np.pi * (np.arange(count) + rng.uniform(size=count)) / count
    return np.column_stack([P, np.cos(theta), np.sin(theta)])


def null_partner(space: MetricSpace, x: np.ndarray, rng: np.random.Generator, flip: bool = False) -> np.ndarray:
    """A null vector orthogonal to the null vector ``x = (p, q)``, independent of it."""
    p, q = x[: space.n + 2], x[space.n + 2 :]
    r = rng.normal(size=p.shape)
    r -= (r @ p) / (p @ p) * p
    r *= np.linalg.norm(q) / np.linalg.norm(r)
    jq = np.array([-q[1], q[0]]) * (-1.0 if flip else 1.0)
    return np.concatenate([r, jq])


def lines_through(frame: Field, vectors, space: MetricSpace, name: str = "s^") -> list[SubbundleField]:
    """The line bundles ``Phi v`` for constant vectors ``v``."""
    return [SubbundleField.from_frame(frame, v, space, name=f"{name}{k}") for k, v in enumerate(np.atleast_2d(vectors))]


def parallel_null_lines(
    C: Connection,
    count: int,
    space: MetricSpace,
    rng: Optional[np.random.Generator] = None,
    avoid: Optional[SubbundleField] = None,
    tol: Optional[float] = None,
    frame: Optional[Field] = None,
) -> list[SubbundleField]:
    """``count`` null line bundles parallel for ``C``, from a stratified lightcone sample.

    Each line is ``Phi (constant null line)`` for the parallel frame ``Phi``;
    lines coming within angle ``SAMPLE_ANGLE`` of ``avoid`` anywhere are
    rejected.  Raises ``FlatnessError`` when ``C`` is not flat, and
    ``ValueError`` when too few admissible lines are found.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    Phi = parallel_frame(C, tol=tol) if frame is None else frame
    out: list[SubbundleField] = []
    for v in lightcone_sample(space, 8 * count, rng):
        if avoid is not None:
            moved = Phi.values @ v
            if _angle_to(avoid, moved).min() < SAMPLE_ANGLE:
                continue
        out.append(SubbundleField.from_frame(Phi, v, space, name=f"s^{len(out)}"))
        if len(out) == count:
            return out
    raise ValueError(f"found only {len(out)} of {count} admissible null lines")


@dataclass
class DarbouxPair:
    """An ``m``-Darboux pair ``(f, f^)`` with ``f ^ f^ = s0`` and ``f^ = s0 + s^``."""

    f: SubbundleField
    fhat: SubbundleField
    s0: SubbundleField
    shat: SubbundleField
    m: float
    eta: Optional[GaugePotential] = None

    def complement_reps(self) -> tuple[Field, Field]:
        """Sections of ``f`` and ``f^`` spanning a complement of ``s0`` in ``f + f^``."""
        B = self.f.basis
        s = self.shat.column(0)
        sg = self.f.space.signs

        def op(B, s):
            c = jnp.swapaxes(B, -1, -2) @ (sg * s)[..., None]
            return (B @ c)[..., 0]

        return lift(op, B, s), s


def s0_field(f: SubbundleField, shat: SubbundleField) -> SubbundleField:
    """``f ^ s^perp``: ``(s^, sigma_2) sigma_1 - (s^, sigma_1) sigma_2``."""
    sg = f.space.signs

    def op(B, s):
        c = jnp.swapaxes(B, -1, -2) @ (sg[:, None] * s)
        return B[..., :, 0:1] * c[..., 1:2, :] - B[..., :, 1:2] * c[..., 0:1, :]

    return SubbundleField(lift(op, f.basis, shat.basis), f.space, "s0")


def darboux_transform(f: SubbundleField, eta: Optional[GaugePotential], m: float, shat: SubbundleField) -> DarbouxPair:
    """``f^ = (f ^ s^perp) + s^``.

    Raises ``ValueError`` listing the nodes where ``s^`` meets ``f`` or is
    orthogonal to it (``s0`` would not be a line).
    """
    if m == 0:
        raise ValueError("m must be nonzero")
    v = shat.values[..., 0]
    ang = _angle_to(f, v)
    bad = np.argwhere(ang <= MEET_ANGLE)
    if bad.size:
        raise ValueError(f"s^ meets f at {len(bad)} nodes, e.g. {bad[:5].tolist()}")
    pair = np.swapaxes(f.values, -1, -2) @ (f.space.signs * v)[..., None]
    scale = np.linalg.norm(f.values, 2, axis=(-2, -1)) * np.linalg.norm(v, axis=-1)
    weak = np.argwhere(np.linalg.norm(pair[..., 0], axis=-1) / scale <= MEET_ANGLE)
    if weak.size:
        raise ValueError(f"s0 = f ^ s^perp is not a line at nodes {weak[:5].tolist()}")
    s0 = s0_field(f, shat)
    fhat = s0.span(shat, name="f^")
    return DarbouxPair(f, fhat, s0, shat, m, eta)


def twisted_line(shat: SubbundleField, generator, scale: float = 1.0) -> SubbundleField:
    """``exp(scale u v X) s^``: a null line that is not parallel, for counterexamples."""
    X = np.asarray(generator, dtype=float)
    ex = expm_affine(X * scale, np.zeros_like(X))

    def fn(u, v):
        return ex(u * v, jnp.zeros_like(u))

    R = Field.from_function(shat.grid, fn)
    return SubbundleField(R @ shat.basis, shat.space, f"{shat.name}~")


def ribaucour_form(a: Field, b: Field, space: MetricSpace) -> OneForm:
    """Connection form of ``nabla`` on ``(f + f^)/s0`` in the frame ``e = (a, b)``.

    ``omega = (e^T G e)^{-1} e^T G de``: the derivative is projected onto the
    span of ``e`` orthogonally inside ``s0^perp``; components along ``s0``
    drop out because ``s0`` is orthogonal to both sections.
    """
    sg = space.signs
    E = lift(lambda x, y: jnp.stack([x, y], axis=-1), a, b)
    dE = E.d()

    def comp(dx):
        def op(e, de):
            et = jnp.swapaxes(e, -1, -2) * sg
            return jnp.linalg.solve(et @ e, et @ de)

        return lift(op, E, dx)

    return OneForm(comp(dE.du), comp(dE.dv))


def ribaucour_connection(
    pair=None,
    f: Optional[SubbundleField] = None,
    fhat: Optional[SubbundleField] = None,
    s0: Optional[SubbundleField] = None,
    tol: Optional[float] = None,
) -> tuple[Connection, DefectReport]:
    """Flatness of the Ribaucour connection of an enveloping pair.

    Accepts a ``DarbouxPair`` or ``(f, fhat, s0)``.  Returns the 2x2
    connection ``d + omega`` and the plaquette defect report.
    """
    if pair is not None:
        a, b = pair.complement_reps()
        f, space, grid = pair.f, pair.f.space, pair.f.grid
    else:
        space, grid = f.space, f.grid
        a = _section_off(f, s0)
        b = _section_off(fhat, s0)
    G2 = lift(lambda x, y: jnp.stack([x, y], axis=-1), a, b)
    gram = np.swapaxes(G2.values, -1, -2) @ (space.signs[:, None] * G2.values)
    det = np.abs(np.linalg.det(gram))
    if det.min() <= 1e-12 * np.max(np.linalg.norm(gram, axis=(-2, -1))) ** 2:
        raise ValueError("induced metric on (f + f^)/s0 is degenerate")
    C = Connection(ribaucour_form(a, b, space))
    exact = C.exact
    tol = exact_tolerance(exact, grid) if tol is None else tol
    return C, defect("ribaucour_flatness", plaquette_defect(C), tol, grid)


def _section_off(B: SubbundleField, s0: SubbundleField) -> Field:
    """A section of the plane ``B`` complementary to the line ``s0 < B``.

    Closed form when both are: the coefficient vector of ``s0`` in ``B`` is
    rotated by a right angle.
    """

    def op(Bv, s):
        coeff = jnp.linalg.solve(jnp.swapaxes(Bv, -1, -2) @ Bv, jnp.swapaxes(Bv, -1, -2) @ s)
        perp = jnp.concatenate([-coeff[..., 1:2, :], coeff[..., 0:1, :]], axis=-2)
        return (Bv @ perp)[..., 0]

    return lift(op, B.basis, s0.basis)


def _opposite(alpha) -> tuple[float, float]:
    a0, a1 = normalize_rp1(alpha)
    return normalize_rp1((-a1, a0))


def verify_forward(
    W: WField,
    m: float = 1.0,
    alphas: Sequence = ((1.0, 0.0), (1.0, 1.0), (2.0, 1.0)),
    betas: Sequence = ((1.0, 0.0), (0.0, 1.0), (1.0, -1.0)),
) -> CheckReport:
    """Every ``(f_alpha, f^_beta)`` is an ``m``-Darboux pair.

    For each sampled pair: ``s = f_alpha ^ f^_beta`` is parallel for ``D^W``,
    the line ``s^ = f~ ^ f^_beta`` in the complement ``f~`` used for
    ``eta_alpha`` is parallel for ``d + m eta_alpha`` and transforms
    ``f_alpha`` into ``f^_beta``, both members are Lie applicable and the
    Ribaucour connection is flat.  A ``W`` that fails regularity is reported
    as not regular and the theorem is not asserted.  When ``D^W`` is not
    flat the rulings are moved by the generating motion and the failing
    checks are reported.
    """
    g = W.grid
    rep = CheckReport("verify_forward", {"m": m, "alpha": [list(normalize_rp1(a)) for a in alphas], "beta": [list(normalize_rp1(b)) for b in betas]})
    DW, NW = split_W(W)
    reg = regularity_field(W, NW)
    rep.add(defect("regularity_zero_fraction", [1.0 - reg.fraction], 0.01, g))
    if not reg.regular:
        rep.notes.append("not regular: theorem not asserted")
        return rep
    try:
        fams = demoulin_families(W, samples=(), DW=DW)
    except FlatnessError as exc:
        if W.motion is None:
            raise
        rep.notes.append(f"D^W not flat ({exc}); rulings moved by the generating motion")
        fams = demoulin_families(W, samples=(), frame=W.motion)
        DW = DW.without_gauge()
    exact = W.bundle.exact
    tol = exact_tolerance(exact, g)

    def potential(family, key):
        f = fams.member(family, key)
        ft = fams.member(family, _opposite(key))
        return f, ft, eta_from_flat(f, ft, m, frame=W.frame, tol=np.inf)

    pots = {}
    for fam, keys in (("A", alphas), ("B", betas)):
        for key in keys:
            pots[(fam, normalize_rp1(key))] = f, ft, eta = potential(fam, key)
            _, r = is_lie_applicable(f, eta, tol=tol)
            for d in r.defects:
                d.name = f"{fam}{normalize_rp1(key)}:{d.name}"
                rep.add(d)
    for a in alphas:
        fa, ft, eta = pots[("A", normalize_rp1(a))]
        C = eta.connection(m)
        for b in betas:
            fb = pots[("B", normalize_rp1(b))][0]
            tag = f"{normalize_rp1(a)}x{normalize_rp1(b)}"
            s = intersection_bundle(fa, fb)
            rep.add(defect(f"{tag}:s_parallel_DW", s.parallel_defect(DW), tol, g))
            # the transforming line lies in the complement
            shat = intersection_bundle(ft, fb)
            rep.add(defect(f"{tag}:shat_parallel_eta", shat.parallel_defect(C), tol, g))
            pair = darboux_transform(fa, eta, m, shat)
            rep.add(defect(f"{tag}:darboux_distance", pair.fhat.distance(fb), tol, g))
            _, rib = ribaucour_connection(pair, tol=tol)
            rib.name = f"{tag}:ribaucour_flatness"
            rep.add(rib)
    return rep


def verify_converse(
    f: SubbundleField,
    eta: GaugePotential,
    m: float,
    ft: SubbundleField,
    tol: Optional[float] = None,
) -> tuple[CheckReport, Optional[WField]]:
    """``W = f + f~`` is a regular curved flat when ``f~`` is ``d + m eta``-parallel.

    Also cross-checks ``A_{f~,f} = -m eta`` on ``wedge^2 f`` and
    ``N_{f~} = -m eta`` on ``f ^ W^perp``.
    """
    g = f.grid
    exact = f.exact and ft.exact and eta.exact
    tol = exact_tolerance(exact, g) if tol is None else tol
    rep = CheckReport("verify_converse", {"m": m})
    ok, app = is_lie_applicable(f, eta, tol=tol)
    rep.extend(app.defects)
    check_complementary(f, ft)
    C = eta.connection(m)
    rep.add(defect("ft_parallel", ft.parallel_defect(C), tol, g))
    W = from_bundle(f.span(ft, name="W"))
    W.frame = eta.frame
    DW, NW = split_W(W)
    flat_tol = max(tol, default_flatness_tol(DW))
    rep.add(defect("DW_plaquette", plaquette_defect(DW), flat_tol, g))
    reg = regularity_field(W, NW)
    rep.add(defect("regularity_zero_fraction", [1.0 - reg.fraction], 0.01, g))
    s = split_connection(f, ft)
    pf = s.proj["f"].values
    pft = s.proj["ft"].values
    d1 = np.zeros(pf.shape[:2])
    d2 = np.zeros(pf.shape[:2])
    for axis in (0, 1):
        E = eta.eta.component(axis).values
        e2f = pf @ E @ pft
        d1 = np.maximum(d1, np.linalg.norm(s.A_ft_f.component(axis).values + m * e2f, axis=(-2, -1)))
        d2 = np.maximum(d2, np.linalg.norm(s.N_ft.component(axis).values + m * (E - e2f), axis=(-2, -1)))
    rep.add(defect("A_ft_f_vs_eta", d1, tol, g))
    rep.add(defect("N_ft_vs_eta", d2, tol, g))
    return rep, W


def corollary_check(
    f: SubbundleField,
    eta: GaugePotential,
    m: float = 1.0,
    rng: Optional[np.random.Generator] = None,
    attempts: int = 16,
) -> tuple[bool, CheckReport]:
    """A regular curved flat ``W > f`` with ``W^perp < f^perp``, built from ``f``.

    The complement is ``Phi P_0`` for the parallel frame ``Phi`` of
    ``d + m eta`` and a null plane ``P_0`` spanned by two orthogonal null
    lines from a stratified lightcone sample, kept when it is complementary
    to ``f`` at every node.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    g = f.grid
    rep = CheckReport("corollary", {"m": m})
    ok, app = is_lie_applicable(f, eta)
    rep.extend(app.defects)
    if not ok:
        rep.notes.append("f is not Lie applicable with this potential")
        return False, rep
    C = eta.connection(m)
    Phi = parallel_frame(C)
    space = f.space
    ft = None
    for x in lightcone_sample(space, attempts, rng):
        for flip in (False, True):
            P0 = np.column_stack([x, null_partner(space, x, rng, flip)])
            cand = SubbundleField.from_frame(Phi, P0, space, name="f~")
            try:
                check_complementary(f, cand, tol=1e-9)
            except ValueError:
                continue
            sv = np.linalg.svd(np.swapaxes(f.values, -1, -2) @ (space.signs[:, None] * cand.values), compute_uv=False)
            if sv[..., -1].min() > 1e-3:
                ft = cand
                break
        if ft is not None:
            break
    if ft is None:
        rep.notes.append("no admissible complement among the sampled null planes")
        return False, rep
    crep, W = verify_converse(f, eta, m, ft)
    for d in crep.defects:
        if d.name in ("ft_parallel", "DW_plaquette", "regularity_zero_fraction"):
            rep.add(d)
    K = W.complement.values
    B = f.values
    pairing = np.abs(np.swapaxes(K, -1, -2) @ (space.signs[:, None] * B)).max(axis=(-2, -1))
    pairing /= np.linalg.norm(K, 2, axis=(-2, -1)) * np.linalg.norm(B, 2, axis=(-2, -1))
    rep.add(defect("Wperp_in_fperp", pairing, 1e-12, g))
    return rep.passed, rep


def theorem_converse(
    f: SubbundleField,
    eta: GaugePotential,
    m: float,
    shats: Sequence[SubbundleField],
) -> tuple[CheckReport, SubbundleField]:
    """A parallel rank-2 complement of ``f`` from three parallel null lines.

    If the lines span a rank-2 bundle it is the complement.  If they span
    rank 3, ``s = span ^ f`` is a constant line, and the complement is
    ``s^_i + (f^* ^ s^_i^perp)`` where ``f^* = s + l`` is the null plane
    through ``s`` built from ``f + span``.
    """
    if len(shats) != 3:
        raise ValueError("need three lines")
    g = f.grid
    space = f.space
    sg = space.signs
    exact = f.exact and eta.exact and all(s.exact for s in shats)
    tol = exact_tolerance(exact, g)
    fd_tol = 10.0 * g.h**2
    rep = CheckReport("theorem_converse", {"m": m})
    C = eta.connection(m)
    for k, s in enumerate(shats):
        rep.add(defect(f"shat{k}_parallel", s.parallel_defect(C), tol, g))
    T = np.concatenate([s.values for s in shats], axis=-1)
    sv = np.linalg.svd(T, compute_uv=False)
    ratios = sv[..., 2] / sv[..., 0]
    rank3 = ratios > RANK_GAP
    if np.any(rank3) and not np.all(rank3):
        raise ValueError("the span of the lines changes rank across the grid")
    if not np.all(rank3):
        rep.params["rank"] = 2
        if exact:
            ft = SubbundleField(_pair_span(shats), space, "T")
        else:
            ft = SubbundleField.from_samples(g, space, np.linalg.svd(T)[0][..., :2], name="T")
        rep.add(defect("complement_parallel", ft.parallel_defect(C), tol if ft.exact else fd_tol, g))
        return rep, ft
    rep.params["rank"] = 3
    Tb = SubbundleField.from_samples(g, space, T, align=False, name="T")
    s = f.intersect(Tb, rank=1, name="s")
    s_vals = s.values[..., 0]
    s_vals = s_vals / np.linalg.norm(s_vals, axis=-1, keepdims=True)
    s_vals *= np.sign(np.sum(s_vals * s_vals[0, 0], axis=-1))[..., None]
    var = np.linalg.norm(s_vals - s_vals[0, 0], axis=-1)
    rep.add(defect("s_constant", var, fd_tol, g))
    rep.add(defect("s_parallel", s.sampled().parallel_defect(C), fd_tol, g))
    # W' = f + T has rank 4; Q = s^perp ^ W'
    out = np.empty((g.nu, g.nv, space.dim, 2))
    s0 = s_vals[0, 0]
    pick = None
    for k, sh in enumerate(shats):
        v = sh.values[..., 0]
        if np.abs(np.sum(v * sg * s0, axis=-1)).min() > 1e-6 * np.linalg.norm(v, axis=-1).min():
            pick = k
            break
    if pick is None:
        raise ValueError("no line pairs nontrivially with s")
    for i in range(g.nu):
        for j in range(g.nv):
            out[i, j] = _rank3_complement(f.values[i, j], T[i, j], s0, shats[pick].values[i, j, :, 0], space)
    ft = SubbundleField.from_samples(g, space, out, name="f~")
    rep.params["line"] = pick
    rep.add(defect("complement_parallel", ft.parallel_defect(C), fd_tol, g))
    rep.add(defect("complement_null", ft.nullity(), 1e-10, g))
    return rep, ft


def _pair_span(shats: Sequence[SubbundleField]) -> Field:
    """Closed-form span of two independent lines among three."""
    a, b = shats[0], shats[1]
    return lift(lambda x, y: jnp.concatenate([x, y], axis=-1), a.basis, b.basis)


def _rank3_complement(B: np.ndarray, T: np.ndarray, s: np.ndarray, shat: np.ndarray, space: MetricSpace) -> np.ndarray:
    sg = space.signs
    ip = lambda x, y: float(x @ (sg * y))  # noqa: E731
    Wb = np.linalg.svd(np.concatenate([B, T], axis=1))[0][:, :4]
    # Q = s^perp inside W'
    c = Wb.T @ (sg * s)
    Q = Wb @ np.linalg.svd(c[None, :])[2][1:].T
    # y in f independent of s; z in Q off f
    coeff = np.linalg.lstsq(B, s, rcond=None)[0]
    y = B @ np.array([-coeff[1], coeff[0]])
    qf, _ = np.linalg.qr(B)
    off = Q - qf @ (qf.T @ Q)
    z = Q[:, int(np.argmax(np.linalg.norm(off, axis=0)))]
    ell = -ip(z, z) * y + 2.0 * ip(y, z) * z
    Fs = np.column_stack([s, ell])
    k = np.array([ip(ell, shat), -ip(s, shat)])
    line = Fs @ k
    return np.column_stack([shat, line])

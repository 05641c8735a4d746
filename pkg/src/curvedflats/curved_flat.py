"""Vacuum curved flats in the Grassmannian of (2,2)-planes and their Demoulin families.

A vacuum curved flat is ``W(u, v) = exp(u xi_1 + v xi_2) W_0`` with commuting
``xi_i = u_i ^ v_i``, ``u_i`` in ``W_0`` and ``v_i`` in ``W_0^perp``.  In the
frame ``F = exp(u xi_1 + v xi_2)`` the normal part of ``d`` is the constant
form ``xi_1 du + xi_2 dv`` and the induced connection is trivial, so every
quantity downstream has a closed form.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .bundles import SubbundleField
from .grid_calculus import (
    Connection,
    Field,
    Grid,
    OneForm,
    VacuumFrame,
    attach_gauge,
    default_flatness_tol,
    expm_affine,
    lift,
    parallel_frame,
)
from .pseudo_linalg import MetricSpace, Subspace, adapted_basis, bracket, normalize_rp1, ruling_coefficients

EPS_REG = 1e-6
REGULAR_FRACTION = 0.99
DEFAULT_SAMPLES = ((1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, -1.0), (2.0, 1.0))


@dataclass
class CurvedFlatSpec:
    """Data of a vacuum curved flat: ``W_0`` and the pairs ``(u_i, v_i)``."""

    n: int
    nu: int
    nv: int
    W0_basis: np.ndarray
    xi1: tuple
    xi2: tuple

    def __post_init__(self):
        self.W0_basis = np.asarray(self.W0_basis, dtype=float)
        self.xi1 = tuple(np.asarray(x, dtype=float) for x in self.xi1)
        self.xi2 = tuple(np.asarray(x, dtype=float) for x in self.xi2)

    @property
    def space(self) -> MetricSpace:
        return MetricSpace(self.n)

    @property
    def grid(self) -> Grid:
        return Grid(self.nu, self.nv)

    @property
    def generators(self) -> tuple[np.ndarray, np.ndarray]:
        sp = self.space
        return np.asarray(sp.wedge(*self.xi1)), np.asarray(sp.wedge(*self.xi2))

    def commutator_norm(self) -> float:
        X1, X2 = self.generators
        return float(np.linalg.norm(bracket(X1, X2)))

    def validate(self, strict: bool = True) -> None:
        """Raise ``ValueError`` unless the data define a vacuum curved flat.

        With ``strict=False`` the commuting condition is not enforced, which
        allows the non-flat counterexample configurations.
        """
        sp = self.space
        if self.W0_basis.shape != (sp.dim, 4):
            raise ValueError(f"W0_basis must be {sp.dim}x4, got {self.W0_basis.shape}")
        for name, pair in (("xi1", self.xi1), ("xi2", self.xi2)):
            if len(pair) != 2 or any(np.shape(x) != (sp.dim,) for x in pair):
                raise ValueError(f"{name} needs two vectors of length {sp.dim}")
        W0 = Subspace(self.W0_basis, sp)
        if W0.signature() != (2, 2, 0):
            raise ValueError(f"W0 has signature {W0.signature()}, expected (2, 2, 0)")
        P = W0.orth_complement()
        for name, (a, b) in (("xi1", self.xi1), ("xi2", self.xi2)):
            if not (W0.contains(a, 1e-12) and P.contains(b, 1e-12)):
                raise ValueError(f"{name} must pair a vector of W0 with one of W0^perp")
        if strict:
            c = self.commutator_norm()
            if c > 1e-12:
                raise ValueError(f"xi1 and xi2 do not commute (|[xi1, xi2]| = {c:.3e})")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "N_u": self.nu,
            "N_v": self.nv,
            "W0_basis": self.W0_basis.T.tolist(),
            "xi1": {"u": self.xi1[0].tolist(), "v": self.xi1[1].tolist()},
            "xi2": {"u": self.xi2[0].tolist(), "v": self.xi2[1].tolist()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CurvedFlatSpec":
        try:
            return cls(
                int(d["n"]),
                int(d["N_u"]),
                int(d["N_v"]),
                np.asarray(d["W0_basis"], dtype=float).T,
                (d["xi1"]["u"], d["xi1"]["v"]),
                (d["xi2"]["u"], d["xi2"]["v"]),
            )
        except KeyError as exc:
            raise ValueError(f"curved flat spec is missing field {exc}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CurvedFlatSpec":
        return cls.from_dict(json.loads(text))

    def with_grid(self, nu: int, nv: Optional[int] = None) -> "CurvedFlatSpec":
        return replace(self, nu=nu, nv=nu if nv is None else nv)

    def scaled(self, lam: float) -> "CurvedFlatSpec":
        """Scale both generators by ``lam`` (through their ``u`` vectors)."""
        return replace(self, xi1=(lam * self.xi1[0], self.xi1[1]), xi2=(lam * self.xi2[0], self.xi2[1]))

    def transformed(self, R) -> "CurvedFlatSpec":
        """Apply a constant map preserving the form to all data."""
        R = np.asarray(R, dtype=float)
        return replace(
            self,
            W0_basis=R @ self.W0_basis,
            xi1=tuple(R @ x for x in self.xi1),
            xi2=tuple(R @ x for x in self.xi2),
        )


def default_spec(n: int = 2, N: int = 33) -> CurvedFlatSpec:
    """``W_0 = span(e_1, e_2, e_{n+3}, e_{n+4})`` with ``xi_1 = e_1 ^ e_3``, ``xi_2 = e_{n+3} ^ e_4``.

    ``u_1, u_2`` are an orthogonal spacelike/timelike pair in ``W_0`` and
    ``v_1, v_2`` orthonormal in ``W_0^perp``; the generators commute and the
    metric ``g`` is ``diag(-1, 1)``.
    """
    sp = MetricSpace(n)
    e = sp.e
    W0 = np.column_stack([e(0), e(1), e(n + 2), e(n + 3)])
    return CurvedFlatSpec(n, N, N, W0, (e(0), e(2)), (e(n + 2), e(3)))


def perturbed_spec(delta: float = 0.5, n: int = 2, N: int = 33) -> CurvedFlatSpec:
    """Default data with ``v_2`` tilted towards ``v_1``, so ``[xi_1, xi_2] != 0``."""
    s = default_spec(n, N)
    e = s.space.e
    return replace(s, xi2=(e(n + 2), e(3) + delta * e(2)))


def degenerate_spec(n: int = 2, N: int = 33) -> CurvedFlatSpec:
    """Default data with ``xi_1 = xi_2 = 0``: ``W`` is constant and ``g`` vanishes.

    Zeroing only ``xi_2`` would not do: ``g`` is then ``diag(-1, 0)``, which
    is nonzero, so that ``W`` still counts as regular.
    """
    s = default_spec(n, N)
    zero = np.zeros(s.space.dim)
    return replace(s, xi1=(zero, s.xi1[1]), xi2=(zero, s.xi2[1]))


@dataclass
class WField:
    """A rank-4 bundle of (2,2) planes, with the motion that generated it if known."""

    bundle: SubbundleField
    spec: Optional[CurvedFlatSpec] = None
    frame: Optional[VacuumFrame] = None
    motion: Optional[Field] = None
    _perp: Optional[SubbundleField] = field(default=None, repr=False)

    @property
    def grid(self) -> Grid:
        return self.bundle.grid

    @property
    def space(self) -> MetricSpace:
        return self.bundle.space

    @property
    def complement(self) -> SubbundleField:
        if self._perp is None:
            self._perp = self.bundle.orth_complement(name="W^perp")
        return self._perp

    def signature_ok(self) -> bool:
        return self.bundle.signatures() == {(2, 2, 0)}


def generate_vacuum(spec: CurvedFlatSpec, strict: bool = True) -> WField:
    """``W(u, v) = exp(u xi_1 + v xi_2) W_0``.

    ``strict=False`` accepts non-commuting generators; the result is then
    not a curved flat and carries no vacuum frame.
    """
    spec.validate(strict=strict)
    X1, X2 = spec.generators
    F = Field.from_function(spec.grid, expm_affine(X1, X2))
    bundle = SubbundleField(F @ spec.W0_basis, spec.space, name="W")
    frame = VacuumFrame(X1, X2) if spec.commutator_norm() <= 1e-12 else None
    return WField(bundle, spec, frame, F)


def from_bundle(bundle: SubbundleField) -> WField:
    if bundle.rank != 4:
        raise ValueError("W must have rank 4")
    return WField(bundle)


def split_W(W: WField) -> tuple[Connection, OneForm]:
    """``d = D^W + N^W``; returns ``(D^W, N^W)``.

    ``N^W = pi^perp (d pi) pi - pi (d pi) pi^perp``; ``D^W = d - N^W``.  When
    the bundle came from a vacuum frame, ``D^W`` is returned in that gauge.
    """
    pi = W.bundle.projector()
    dpi = pi.d()

    def comp(axis: int) -> Field:
        eye = np.eye(W.space.dim)
        return lift(lambda p, dp: (eye - p) @ dp @ p - p @ dp @ (eye - p), pi, dpi.component(axis))

    NW = OneForm(comp(0), comp(1))
    DW = Connection(-NW)
    if W.frame is not None:
        gauged = attach_gauge(DW, W.frame, tol=1e-9)
        if gauged is not None:
            DW = gauged
    return DW, NW


@dataclass
class Regularity:
    """The metric ``g(X, Y) = tr(N^W(X) N^W(Y) |_W)`` on coordinate directions."""

    g: np.ndarray
    eps: float = EPS_REG

    @property
    def det(self) -> np.ndarray:
        return np.linalg.det(self.g)

    @property
    def norm(self) -> np.ndarray:
        return np.linalg.norm(self.g, axis=(-2, -1))

    @property
    def fraction(self) -> float:
        return float(np.mean(self.norm > self.eps))

    @property
    def regular(self) -> bool:
        return self.fraction >= REGULAR_FRACTION


def trace_metric(NW: OneForm, pi_W: Field) -> np.ndarray:
    """Nodewise 2x2 matrix ``tr(N(X) N(Y) pi_W)``."""
    comps = (NW.du.values, NW.dv.values)
    P = pi_W.values
    g = np.empty(P.shape[:2] + (2, 2))
    for a in (0, 1):
        for b in (0, 1):
            g[..., a, b] = np.trace(comps[a] @ comps[b] @ P, axis1=-2, axis2=-1)
    return g


def regularity_field(W: WField, NW: Optional[OneForm] = None, eps: float = EPS_REG) -> Regularity:
    if NW is None:
        _, NW = split_W(W)
    return Regularity(trace_metric(NW, W.bundle.projector()), eps)


@dataclass
class DemoulinFamilies:
    """The two rulings of ``W`` moved by a parallel frame of ``D^W``."""

    W: WField
    frame: Field
    adapted: np.ndarray
    A: dict
    B: dict

    def member(self, family: str, alpha) -> SubbundleField:
        key = normalize_rp1(alpha)
        fam = self.A if family == "A" else self.B
        if key not in fam:
            coeffs = self.adapted @ ruling_coefficients(family, key)
            fam[key] = SubbundleField.from_frame(self.frame, coeffs, self.W.space, name=f"{family}{key}")
        return fam[key]


def demoulin_families(
    W: WField,
    samples: Sequence = DEFAULT_SAMPLES,
    DW: Optional[Connection] = None,
    tol: Optional[float] = None,
    frame: Optional[Field] = None,
) -> DemoulinFamilies:
    """Demoulin families at the sampled parameters.

    Each member is ``Phi (ruling plane of W(0, 0))`` for the parallel frame
    ``Phi`` of ``D^W``; raises ``FlatnessError`` when ``D^W`` is not flat
    within ``tol``.  Passing ``frame`` moves the rulings by that frame
    instead (used for non-flat counterexamples).
    """
    if frame is None:
        if DW is None:
            DW, _ = split_W(W)
        frame = parallel_frame(DW, tol=tol if tol is not None else default_flatness_tol(DW))
    ab = adapted_basis(W.bundle.values[0, 0], W.space)
    fams = DemoulinFamilies(W, frame, ab, {}, {})
    for alpha in samples:
        fams.member("A", alpha)
        fams.member("B", alpha)
    return fams


def intersection_bundle(fa: SubbundleField, fb: SubbundleField) -> SubbundleField:
    """``s = f_alpha ^ f^_beta``, a rank-1 null bundle (raises if the rank is not 1)."""
    return fa.intersect(fb, rank=1, name=f"{fa.name}^{fb.name}")


def constant_vectors(W: WField, stride: int = 4) -> dict:
    """Vectors lying in every fiber of ``W`` and what kinds they include.

    Samples every ``stride``-th node; reports the dimension and signature of
    the common subspace and whether it contains a timelike or a lightlike
    vector.
    """
    pi = W.bundle.projector().values[::stride, ::stride]
    eye = np.eye(W.space.dim)
    M = (eye - pi).reshape(-1, W.space.dim)
    _, s, vt = np.linalg.svd(M)
    k = int(np.sum(s <= 1e-9 * max(1.0, s[0])))
    basis = vt[len(s) - k :].T if k else np.zeros((W.space.dim, 0))
    if k == 0:
        return {"dim": 0, "signature": (0, 0, 0), "timelike": False, "lightlike": False}
    p, q, r = Subspace(basis, W.space).signature()
    return {"dim": k, "signature": (p, q, r), "timelike": q > 0, "lightlike": r > 0 or (p > 0 and q > 0)}

"""Splitting of the trivial connection along ``f + f~ + U``.

For complementary null planes ``f``, ``f~`` with ``U = (f + f~)^perp`` the
trivial connection decomposes as ``d = D + N_f + N_f~ + A_{f,f~} + A_{f~,f}``.
Every block is read off from the three projectors: the part of ``d`` taking
block ``b`` into block ``a`` is ``pi_a (d pi_b) pi_b``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import jax.numpy as jnp
import numpy as np

from .bundles import SubbundleField
from .grid_calculus import Connection, Field, OneForm, TwoForm, curvature, expm_affine, ext_d, lift, wedge_bracket
from .pseudo_linalg import RANK_RTOL
from .report import DefectReport, defect

BLOCKS = ("f", "ft", "U")

# (from, to) block pairs each form may connect
ALLOWED = {
    "N_f": (("f", "U"), ("U", "ft")),
    "N_ft": (("ft", "U"), ("U", "f")),
    "A_f_ft": (("f", "ft"),),
    "A_ft_f": (("ft", "f"),),
    "D": (("f", "f"), ("ft", "ft"), ("U", "U")),
}


def exact_tolerance(exact: bool, grid) -> float:
    """The tolerance ladder: 1e-8 on closed-form paths, ``10 h^2`` otherwise."""
    return 1e-8 if exact else 10.0 * grid.h**2


def pairing_matrix(f: SubbundleField, ft: SubbundleField) -> Field:
    s = f.space.signs
    return lift(lambda A, B: jnp.swapaxes(A, -1, -2) @ (s[:, None] * B), f.basis, ft.basis)


def check_complementary(f: SubbundleField, ft: SubbundleField, tol: float = 1e-10) -> dict:
    """Check that ``f``, ``f~`` are complementary null planes at every node.

    Raises ``ValueError`` naming the first offending node.  For null planes,
    an invertible pairing matrix is equivalent to ``f + f~`` being a (2,2)
    space meeting neither plane's partner.
    """
    if f.grid != ft.grid:
        raise ValueError("bundles live on different grids")
    if f.rank != 2 or ft.rank != 2:
        raise ValueError(f"expected rank 2 bundles, got {f.rank} and {ft.rank}")
    for name, b in (("f", f), ("ft", ft)):
        nul = b.nullity()
        if nul.max() > tol:
            i, j = np.unravel_index(np.argmax(nul), nul.shape)
            raise ValueError(f"{name} is not null at node {(int(i), int(j))} (defect {nul.max():.2e})")
    P = pairing_matrix(f, ft).values
    scale = np.linalg.norm(f.values, 2, axis=(-2, -1)) * np.linalg.norm(ft.values, 2, axis=(-2, -1))
    sv = np.linalg.svd(P, compute_uv=False)
    cond = sv[..., -1] / scale
    if cond.min() <= RANK_RTOL:
        i, j = np.unravel_index(np.argmin(cond), cond.shape)
        raise ValueError(f"f and ft are not complementary at node {(int(i), int(j))}")
    return {"min_pairing_sv": float(cond.min()), "max_nullity": float(max(f.nullity().max(), ft.nullity().max()))}


def projectors(f: SubbundleField, ft: SubbundleField) -> dict:
    """``pi_f = s P^{-T} s~^T G``, ``pi_f~ = s~ P^{-1} s^T G`` and ``pi_U``."""
    sg = f.space.signs
    eye = np.eye(f.space.dim)

    def pf(S, T):
        P = jnp.swapaxes(S, -1, -2) @ (sg[:, None] * T)
        return S @ jnp.linalg.solve(jnp.swapaxes(P, -1, -2), jnp.swapaxes(T, -1, -2) * sg)

    def pft(S, T):
        P = jnp.swapaxes(S, -1, -2) @ (sg[:, None] * T)
        return T @ jnp.linalg.solve(P, jnp.swapaxes(S, -1, -2) * sg)

    p_f = lift(pf, f.basis, ft.basis)
    p_ft = lift(pft, f.basis, ft.basis)
    p_U = lift(lambda a, b: eye - a - b, p_f, p_ft)
    return {"f": p_f, "ft": p_ft, "U": p_U}


def block_part(form: OneForm, proj: dict, pairs) -> OneForm:
    """Sum of ``pi_to w pi_from`` over the given ``(from, to)`` pairs."""
    def comp(w: Field) -> Field:
        ops = [proj[t] for _, t in pairs] + [proj[s] for s, _ in pairs]
        k = len(pairs)

        def op(x, *p):
            return sum(p[i] @ x @ p[k + i] for i in range(k))

        return lift(op, w, *ops)

    return OneForm(comp(form.du), comp(form.dv))


def block_residual(form: OneForm, proj: dict, pairs) -> np.ndarray:
    """Nodewise size of the part of ``form`` outside the allowed blocks."""
    P = {k: p.values for k, p in proj.items()}
    out = np.zeros(form.du.values.shape[:2])
    for w in (form.du.values, form.dv.values):
        inside = sum(P[t] @ w @ P[s] for s, t in pairs)
        out = np.maximum(out, np.linalg.norm(w - inside, axis=(-2, -1)))
    return out


@dataclass
class SplitData:
    """The five-part splitting of ``d`` for a complementary pair."""

    f: SubbundleField
    ft: SubbundleField
    proj: dict
    D: Connection
    N_f: OneForm
    N_ft: OneForm
    A_f_ft: OneForm
    A_ft_f: OneForm
    blocks: dict = field(default_factory=lambda: dict(ALLOWED))

    @property
    def grid(self):
        return self.f.grid

    @property
    def exact(self) -> bool:
        return self.f.exact and self.ft.exact

    def forms(self) -> dict:
        return {"N_f": self.N_f, "N_ft": self.N_ft, "A_f_ft": self.A_f_ft, "A_ft_f": self.A_ft_f}

    def block_defects(self) -> dict:
        """Nodewise containment residual of each form in its wedge block."""
        return {name: block_residual(w, self.proj, ALLOWED[name]) for name, w in self.forms().items()}

    def preservation_defect(self) -> np.ndarray:
        """How far ``D`` moves each block's basis out of the block."""
        U = self.f.span(self.ft).orth_complement(name="U")
        return np.maximum.reduce([b.parallel_defect(self.D) for b in (self.f, self.ft, U)])

    def reconstruction(self, section: Field) -> np.ndarray:
        """``|(D + sum of the four forms) s - ds|`` nodewise for a field of vectors."""
        total = self.D.A + self.N_f + self.N_ft + self.A_f_ft + self.A_ft_f
        lhs = Connection(total).covariant(section)
        rhs = section.d()
        return (lhs - rhs).norm()


def split_connection(f: SubbundleField, ft: SubbundleField, check: bool = True) -> SplitData:
    """Split ``d`` along ``f + f~ + U``."""
    if check:
        check_complementary(f, ft)
    proj = projectors(f, ft)
    dproj = {k: p.d() for k, p in proj.items()}

    def piece(a: str, b: str) -> OneForm:
        def comp(axis: int) -> Field:
            return lift(lambda pa, dpb, pb: pa @ dpb @ pb, proj[a], dproj[b].component(axis), proj[b])

        return OneForm(comp(0), comp(1))

    X = {(a, b): piece(a, b) for a in BLOCKS for b in BLOCKS if a != b}
    N_f = X[("U", "f")] + X[("ft", "U")]
    N_ft = X[("U", "ft")] + X[("f", "U")]
    A_f_ft = X[("ft", "f")]
    A_ft_f = X[("f", "ft")]
    A_D = -(N_f + N_ft + A_f_ft + A_ft_f)
    return SplitData(f, ft, proj, Connection(A_D), N_f, N_ft, A_f_ft, A_ft_f)


def covariant_ext_d(C: Connection, w: OneForm) -> TwoForm:
    """``d^D w = dw + [A ^ w]`` for an endomorphism-valued 1-form."""
    return ext_d(w) + wedge_bracket(C.A, w)


def gcr_fields(s: SplitData) -> dict:
    """The five Gauss-Codazzi-Ricci residual two-forms."""
    half = 0.5
    return {
        "gcr1_RD": curvature(s.D) + wedge_bracket(s.N_f, s.N_ft) + wedge_bracket(s.A_f_ft, s.A_ft_f),
        "gcr2_dN_f": covariant_ext_d(s.D, s.N_f) + wedge_bracket(s.N_ft, s.A_f_ft),
        "gcr3_dN_ft": covariant_ext_d(s.D, s.N_ft) + wedge_bracket(s.N_f, s.A_ft_f),
        "gcr4_dA_f_ft": covariant_ext_d(s.D, s.A_f_ft) + half * wedge_bracket(s.N_f, s.N_f),
        "gcr5_dA_ft_f": covariant_ext_d(s.D, s.A_ft_f) + half * wedge_bracket(s.N_ft, s.N_ft),
    }


def gcr_residuals(s: SplitData, tol: Optional[float] = None) -> list[DefectReport]:
    tol = exact_tolerance(s.exact, s.grid) if tol is None else tol
    return [defect(name, F.norm(), tol, s.grid) for name, F in gcr_fields(s).items()]


def legendre_defect(f: SubbundleField) -> np.ndarray:
    """Nodewise ``max |(d_X s_i, s_j)|`` over basis sections and both directions."""
    sg = f.space.signs
    out = np.zeros(f.values.shape[:2])
    B = f.values
    for axis in (0, 1):
        dB = f.basis.partial(axis).values
        P = np.swapaxes(dB, -1, -2) @ (sg[:, None] * B)
        out = np.maximum(out, np.abs(P).max(axis=(-2, -1)))
    return out


def legendre_defect_via_complement(f: SubbundleField, ft: SubbundleField, split: Optional[SplitData] = None) -> np.ndarray:
    """Nodewise ``max_X |A_{f,f~}(X)|``; zero exactly for Legendre maps."""
    s = split if split is not None else split_connection(f, ft)
    return np.maximum(s.A_f_ft.du.norm(), s.A_f_ft.dv.norm())


def bracket_split(s: SplitData) -> dict:
    """``[N_f^N_f]``, ``[N_f^N_f~]`` and ``[N_f~^N_f~]`` norms, nodewise."""
    return {
        "NfNf": wedge_bracket(s.N_f, s.N_f).norm(),
        "NfNft": wedge_bracket(s.N_f, s.N_ft).norm(),
        "NftNft": wedge_bracket(s.N_ft, s.N_ft).norm(),
    }


def _null_pair(space) -> tuple[np.ndarray, np.ndarray]:
    """Complementary constant null planes ``span(e_1 + e_{n+3}, e_2 + e_{n+4})`` and the ``-`` one."""
    e, n = space.e, space.n
    f0 = np.column_stack([e(0) + e(n + 2), e(1) + e(n + 3)])
    ft0 = np.column_stack([e(0) - e(n + 2), e(1) - e(n + 3)])
    return f0, ft0


def smooth_pair(grid, space, seed: int = 1, scale: float = 0.15) -> tuple[SubbundleField, SubbundleField]:
    """A smooth complementary pair known only through samples.

    ``f = exp(u X_1 + v Y_1) f_0`` and ``f~ = exp(u X_2 + v Y_2) f~_0`` for
    fixed pseudo-random skew generators; neither is Legendre and nothing
    about the pair is special, so finite-difference residuals show their
    generic second-order behaviour.
    """
    rng = np.random.default_rng(seed)
    G = space.gram

    def skew():
        M = rng.normal(size=(space.dim, space.dim)) * scale
        return M - G @ M.T @ G

    X1, Y1, X2, Y2 = (skew() for _ in range(4))
    f0, ft0 = _null_pair(space)
    f = (Field.from_function(grid, expm_affine(X1, Y1)) @ f0).values
    ft = (Field.from_function(grid, expm_affine(X2, Y2)) @ ft0).values
    return (
        SubbundleField.from_samples(grid, space, f, align=False, name="f"),
        SubbundleField.from_samples(grid, space, ft, align=False, name="ft"),
    )


def non_legendre_example(grid, space) -> tuple[SubbundleField, SubbundleField]:
    """``f = exp(u X) f_0`` with ``X`` in ``wedge^2 f~_0``, and the constant ``f~_0``.

    ``X`` moves ``f_0`` into ``f~_0``, so ``df`` leaves ``f^perp``; both the
    direct Legendre defect and ``A_{f,f~}`` are of order one.
    """
    f0, ft0 = _null_pair(space)
    X = np.asarray(space.wedge(ft0[:, 0], ft0[:, 1]))
    F = Field.from_function(grid, expm_affine(X, np.zeros_like(X)))
    return SubbundleField(F @ f0, space, "f"), SubbundleField.constant(grid, space, ft0, "ft")

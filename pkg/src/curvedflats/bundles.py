"""Subbundles of the trivial bundle over the grid.

A subbundle is stored as a field of bases (``dim x k`` matrices).  Bundles
built from closed forms keep them, so every derived bundle (complements,
intersections, spans) is again closed-form and can be differentiated
exactly.  Bundles recovered node by node from samples use SVDs and are
gauge-aligned with a least-squares sweep so that their bases vary smoothly.
"""

from __future__ import annotations

from typing import Optional

import jax.numpy as jnp
import numpy as np

from .grid_calculus import Connection, Field, Grid, lift
from .pseudo_linalg import RANK_RTOL, MetricSpace, Subspace, _null_space, column_space_distance

# A smooth kernel representative is trusted while its smallest singular value
# stays above this fraction of the largest.
KERNEL_RTOL = 1e-6


def align_bases(values: np.ndarray) -> np.ndarray:
    """Least-squares gauge alignment of a field of bases.

    Node ``(i, 0)`` is aligned to ``(i-1, 0)`` and node ``(i, j)`` to
    ``(i, j-1)``: each basis is replaced by the projection of its
    neighbour's basis onto its own column space.
    """
    B = np.array(values, dtype=float)
    nu, nv = B.shape[:2]

    def toward(cur, prev):
        X = np.linalg.pinv(cur) @ prev
        return cur @ X

    for i in range(1, nu):
        B[i, 0] = toward(B[i, 0], B[i - 1, 0])
    for j in range(1, nv):
        B[:, j] = toward(B[:, j], B[:, j - 1])
    return B


def _svd_kernel(M: np.ndarray, k: int) -> np.ndarray:
    """Batched right kernel of dimension ``k`` (orthonormal columns)."""
    _, _, vt = np.linalg.svd(M)
    return np.swapaxes(vt[..., vt.shape[-1] - k :, :], -1, -2)


def smooth_kernel(S: Field, reference: np.ndarray) -> Field:
    """Kernel of a field of symmetric positive semidefinite matrices.

    Returns ``(S + R R^T)^{-1} R`` for the constant reference ``R``.  Its
    columns span ``ker S`` wherever ``R`` projects injectively onto the
    kernel, and the expression is smooth, so closed forms are preserved.
    """
    R = np.asarray(reference, dtype=float)
    RRt = R @ R.T
    return lift(lambda s: jnp.linalg.solve(s + RRt, jnp.broadcast_to(R, s.shape[:-2] + R.shape)), S)


class SubbundleField:
    """Grid-indexed family of ``k``-dimensional subspaces of constant rank."""

    def __init__(self, basis: Field, space: MetricSpace, name: str = ""):
        if basis.shape[:1] != (space.dim,) or len(basis.shape) != 2:
            raise ValueError(f"basis field must have shape (dim, k), got {basis.shape}")
        self.basis = basis
        self.space = space
        self.name = name
        s = np.linalg.svd(basis.values, compute_uv=False)
        worst = float(np.min(s[..., -1] / s[..., 0])) if basis.shape[1] else 1.0
        if worst <= 1e-10:
            raise ValueError(f"basis field {name!r} is rank deficient somewhere (min ratio {worst:.2e})")

    def __repr__(self):
        kind = "closed-form" if self.exact else "sampled"
        return f"SubbundleField({self.name or '?'}, rank={self.rank}, {kind})"

    # --- constructors --------------------------------------------------------

    @classmethod
    def from_function(cls, grid: Grid, space: MetricSpace, fn, name: str = "") -> "SubbundleField":
        return cls(Field.from_function(grid, fn), space, name)

    @classmethod
    def constant(cls, grid: Grid, space: MetricSpace, basis, name: str = "") -> "SubbundleField":
        basis = np.asarray(basis, dtype=float)
        if basis.ndim == 1:
            basis = basis[:, None]
        return cls(Field.constant(grid, basis), space, name)

    @classmethod
    def from_frame(cls, frame: Field, basis0, space: MetricSpace, name: str = "") -> "SubbundleField":
        """The bundle ``Phi(u, v) B_0`` moved by a field of maps."""
        basis0 = np.asarray(basis0, dtype=float)
        if basis0.ndim == 1:
            basis0 = basis0[:, None]
        return cls(frame @ basis0, space, name)

    @classmethod
    def from_samples(cls, grid: Grid, space: MetricSpace, values, align: bool = True, name: str = "") -> "SubbundleField":
        values = np.asarray(values, dtype=float)
        return cls(Field(grid, align_bases(values) if align else values), space, name)

    # --- basic data ------------------------------------------------------------

    @property
    def grid(self) -> Grid:
        return self.basis.grid

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    @property
    def exact(self) -> bool:
        return self.basis.exact

    @property
    def values(self) -> np.ndarray:
        return self.basis.values

    def sampled(self) -> "SubbundleField":
        return SubbundleField(self.basis.sampled(), self.space, self.name)

    def fiber(self, i: int, j: int) -> Subspace:
        return Subspace(self.values[i, j], self.space)

    def gram(self) -> Field:
        s = self.space.signs
        return lift(lambda B: jnp.swapaxes(B, -1, -2) @ (s[:, None] * B), self.basis)

    def nullity(self) -> np.ndarray:
        """Nodewise ``max |(b_i, b_j)|`` relative to ``max |b_i|^2``."""
        g = np.abs(self.gram().values).max(axis=(-2, -1))
        scale = np.max(np.sum(self.values**2, axis=-2), axis=-1)
        return g / scale

    def is_null(self, tol: float = 1e-10) -> bool:
        return bool(np.max(self.nullity()) <= tol)

    def signatures(self) -> set:
        return {self.fiber(i, j).signature() for i in range(self.grid.nu) for j in range(self.grid.nv)}

    def transform(self, g) -> "SubbundleField":
        return SubbundleField(lift(lambda B: jnp.asarray(g) @ B, self.basis), self.space, self.name)

    def column(self, k: int) -> Field:
        return lift(lambda B: B[..., :, k], self.basis)

    # --- projectors ------------------------------------------------------------

    def projector(self) -> Field:
        """Orthogonal projector ``B (B^T G B)^{-1} B^T G`` (nondegenerate bundles)."""
        s = self.space.signs

        def op(B):
            Bt_G = jnp.swapaxes(B, -1, -2) * s
            return B @ jnp.linalg.solve(Bt_G @ B, Bt_G)

        g = self.gram().values
        ev = np.abs(np.linalg.eigvalsh(g))
        if np.min(ev.min(axis=-1) / np.maximum(ev.max(axis=-1), 1e-300)) < RANK_RTOL:
            raise ValueError("orthogonal projector needs a nondegenerate bundle")
        return lift(op, self.basis)

    # --- derived bundles -------------------------------------------------------

    def _kernel_bundle(self, M: Field, S: Field, coords: Optional[Field], k: int, name: str) -> "SubbundleField":
        """Bundle spanned by ``coords @ ker M`` with ``S = M^T M`` (``coords`` None means identity)."""
        if self.exact and S.exact:
            R = _null_space(S.values[0, 0], rtol=1e-8)
            if R.shape[1] == k:
                K = smooth_kernel(S, R)
                B = K if coords is None else coords @ K
                s = np.linalg.svd(B.values, compute_uv=False)
                if np.min(s[..., -1] / s[..., 0]) > KERNEL_RTOL:
                    return SubbundleField(B, self.space, name)
        K = _svd_kernel(M.values, k)
        B = K if coords is None else coords.values @ K
        return SubbundleField.from_samples(self.grid, self.space, B, name=name)

    def orth_complement(self, name: str = "") -> "SubbundleField":
        s = self.space.signs

        M = lift(lambda B: jnp.swapaxes(B, -1, -2) * s, self.basis)
        S = lift(lambda m: jnp.swapaxes(m, -1, -2) @ m, M)
        return self._kernel_bundle(M, S, None, self.space.dim - self.rank, name or f"{self.name}^perp")

    def intersect(self, other: "SubbundleField", rank: Optional[int] = None, name: str = "") -> "SubbundleField":
        """Fiberwise intersection; ``rank`` defaults to the value at node (0, 0)."""
        a = self.rank
        M = lift(lambda A, B: jnp.concatenate([A, -B], axis=-1), self.basis, other.basis)
        if rank is None:
            rank = self.fiber(0, 0).intersect(other.fiber(0, 0)).rank
        if rank == 0:
            raise ValueError("bundles meet only in zero at node (0, 0)")
        sv = np.linalg.svd(M.values, compute_uv=False)
        ranks = np.sum(sv > RANK_RTOL * sv[..., :1], axis=-1)
        bad = np.argwhere(ranks != a + other.rank - rank)
        if bad.size:
            raise ValueError(f"intersection rank differs from {rank} at nodes {bad[:5].tolist()}")
        # the kernel of [A, -B] lives in coefficient space; map it through A
        S = lift(lambda m: jnp.swapaxes(m, -1, -2) @ m, M)
        head = lift(lambda A: jnp.concatenate([A, jnp.zeros(A.shape[:-1] + (other.rank,))], axis=-1), self.basis)
        return self._kernel_bundle(M, S, head, rank, name or f"{self.name}^{other.name}")

    def span(self, other: "SubbundleField", name: str = "") -> "SubbundleField":
        """Direct sum (the fibers must meet only in zero)."""
        B = lift(lambda A, C: jnp.concatenate([A, C], axis=-1), self.basis, other.basis)
        return SubbundleField(B, self.space, name or f"{self.name}+{other.name}")

    # --- diagnostics -----------------------------------------------------------

    def distance(self, other: "SubbundleField") -> np.ndarray:
        """Nodewise sine of the largest principal angle."""
        if self.rank != other.rank:
            raise ValueError("bundles have different ranks")
        return column_space_distance(self.values, other.values)

    def gauge_continuity(self) -> float:
        """Largest neighbour-to-neighbour column-space angle divided by ``h``."""
        B = self.values
        du = column_space_distance(B[1:], B[:-1]) / self.grid.hu
        dv = column_space_distance(B[:, 1:], B[:, :-1]) / self.grid.hv
        return float(max(du.max(), dv.max()))

    def containment(self, vectors: np.ndarray) -> np.ndarray:
        """Nodewise norm of the part of ``vectors`` (``(..., dim, m)``) off the fiber."""
        q, _ = np.linalg.qr(self.values)
        V = np.asarray(vectors, dtype=float)
        r = V - q @ (np.swapaxes(q, -1, -2) @ V)
        return np.linalg.norm(r, axis=(-2, -1))

    def parallel_defect(self, C: Connection) -> np.ndarray:
        """Nodewise size of ``(d + A) B`` off the bundle, relative to ``|B|``.

        Zero exactly when the bundle is parallel for ``d + A``; gauge
        invariant, since a change of basis only adds terms inside the bundle.
        """
        cov = C.covariant(self.basis)
        q, _ = np.linalg.qr(self.values)
        scale = np.linalg.norm(self.values, 2, axis=(-2, -1))
        out = np.zeros(self.values.shape[:2])
        for comp in (cov.du, cov.dv):
            R = comp.values
            r = R - q @ (np.swapaxes(q, -1, -2) @ R)
            out = np.maximum(out, np.linalg.norm(r, axis=(-2, -1)) / scale)
        return out


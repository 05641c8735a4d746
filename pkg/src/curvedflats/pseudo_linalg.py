"""Linear algebra over the indefinite form of R^{n+2,2}.

The form is diagonal in the standard basis with ``+1`` on the first ``n + 2``
coordinates and ``-1`` on the last two.  Vectors are plain arrays of length
``n + 4``; endomorphisms are ``(dim, dim)`` arrays.  Every function that is
also used on grid fields accepts leading batch axes and is written with
``jax.numpy`` so closed-form fields can be differentiated through it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import jax.numpy as jnp
import numpy as np

# Relative singular-value cutoff for every rank decision.
RANK_RTOL = 1e-9
# Smallest admissible singular value (relative) for a basis.
BASIS_RTOL = 1e-10
SKEW_TOL = 1e-12


@dataclass(frozen=True)
class MetricSpace:
    """R^{n+2,2} with its Gram matrix ``diag(1, ..., 1, -1, -1)``."""

    n: int = 2
    signs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"ambient geometry dimension must be an integer >= 2, got {self.n}")
        signs = np.ones(self.n + 4)
        signs[-2:] = -1.0
        object.__setattr__(self, "signs", signs)

    @property
    def dim(self) -> int:
        return self.n + 4

    @property
    def gram(self) -> np.ndarray:
        return np.diag(self.signs)

    def e(self, i: int) -> np.ndarray:
        """Standard basis vector (0-based)."""
        v = np.zeros(self.dim)
        v[i] = 1.0
        return v

    def _check(self, *arrays):
        for a in arrays:
            if np.shape(a)[-1] != self.dim:
                raise ValueError(f"expected vectors of length {self.dim}, got shape {np.shape(a)}")

    def inner(self, u, v):
        """Symmetric bilinear pairing ``u^T G v`` (batched over leading axes)."""
        self._check(u, v)
        return jnp.sum(jnp.asarray(u) * self.signs * jnp.asarray(v), axis=-1)

    def lower(self, v):
        """``G v``; contracting with this gives the pairing."""
        return jnp.asarray(v) * self.signs

    def pairing(self, A, B):
        """Matrix of pairings ``A^T G B`` between the columns of two bases."""
        return jnp.swapaxes(jnp.asarray(A), -1, -2) @ (self.signs[:, None] * jnp.asarray(B))

    def wedge(self, a, b):
        """The skew map ``c -> (a, c) b - (b, c) a``."""
        self._check(a, b)
        a = jnp.asarray(a)
        b = jnp.asarray(b)
        return b[..., :, None] * self.lower(a)[..., None, :] - a[..., :, None] * self.lower(b)[..., None, :]

    def adjoint(self, M):
        """Adjoint with respect to the form, ``G M^T G``."""
        s = self.signs
        return s[:, None] * jnp.swapaxes(jnp.asarray(M), -1, -2) * s[None, :]

    def inv_orthogonal(self, F):
        """Inverse of a map preserving the form."""
        return self.adjoint(F)

    def skew_defect(self, M):
        """Frobenius norm of ``M^T G + G M``; zero exactly for skew maps."""
        M = jnp.asarray(M)
        s = self.signs
        R = jnp.swapaxes(M, -1, -2) * s[None, :] + s[:, None] * M
        return jnp.sqrt(jnp.sum(R**2, axis=(-2, -1)))

    def as_skew(self, M, tol: float = SKEW_TOL) -> np.ndarray:
        """Validate that ``M`` is skew for the form and return it as an array."""
        M = np.asarray(M, dtype=float)
        if M.shape[-2:] != (self.dim, self.dim):
            raise ValueError(f"expected ({self.dim}, {self.dim}) matrices, got {M.shape}")
        scale = max(1.0, float(np.max(np.abs(M), initial=0.0)))
        bad = float(np.max(self.skew_defect(M)))
        if bad > tol * scale:
            raise ValueError(f"matrix is not skew for the form (defect {bad:.3e})")
        return M

    def is_null(self, v, tol: float = 1e-12) -> bool:
        v = np.asarray(v, dtype=float)
        return abs(float(self.inner(v, v))) <= tol * max(1.0, float(v @ v))

    def random_orthogonal(self, rng: np.random.Generator, scale: float = 0.5) -> np.ndarray:
        """A random map preserving the form (exponential of a random skew map)."""
        from scipy.linalg import expm

        X = rng.normal(size=(self.dim, self.dim)) * scale
        return expm(0.5 * (X - np.asarray(self.adjoint(X))))


def bracket(A, B):
    """Commutator ``AB - BA``."""
    A = jnp.asarray(A)
    B = jnp.asarray(B)
    return A @ B - B @ A


# ---------------------------------------------------------------------------
# Subspaces of a single fiber


def _null_space(M: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal basis of the kernel of ``M`` (columns)."""
    M = np.atleast_2d(M)
    if M.size == 0:
        return np.eye(M.shape[1])
    _, s, vt = np.linalg.svd(M)
    top = s[0] if s.size else 0.0
    rank = int(np.sum(s > rtol * max(top, 1e-300))) if top > 0 else 0
    return vt[rank:].T.copy()


def _column_space(M: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    u, s, _ = np.linalg.svd(M, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((M.shape[0], 0))
    rank = int(np.sum(s > rtol * s[0]))
    return u[:, :rank].copy()


class Subspace:
    """A linear subspace of R^{n+2,2} given by a basis of columns."""

    def __init__(self, basis, space: MetricSpace):
        basis = np.asarray(basis, dtype=float)
        if basis.ndim == 1:
            basis = basis[:, None]
        if basis.shape[0] != space.dim:
            raise ValueError(f"basis has {basis.shape[0]} rows, ambient dimension is {space.dim}")
        if basis.shape[1]:
            s = np.linalg.svd(basis, compute_uv=False)
            if s[-1] <= BASIS_RTOL * s[0]:
                raise ValueError("basis columns are linearly dependent")
        self.basis = basis
        self.space = space

    def __repr__(self):
        return f"Subspace(rank={self.rank}, signature={self.signature()})"

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    def gram(self) -> np.ndarray:
        return np.asarray(self.space.pairing(self.basis, self.basis))

    def signature(self, rtol: float = RANK_RTOL) -> tuple[int, int, int]:
        """``(p, q, r)``: positive, negative and radical dimensions of the induced form."""
        if self.rank == 0:
            return (0, 0, 0)
        q, _ = np.linalg.qr(self.basis)
        ev = np.linalg.eigvalsh(np.asarray(self.space.pairing(q, q)))
        cut = rtol * max(1.0, float(np.max(np.abs(ev))))
        return (int(np.sum(ev > cut)), int(np.sum(ev < -cut)), int(np.sum(np.abs(ev) <= cut)))

    def is_null(self, tol: float = 1e-12) -> bool:
        q, _ = np.linalg.qr(self.basis)
        return float(np.max(np.abs(np.asarray(self.space.pairing(q, q))), initial=0.0)) <= tol

    def orth_complement(self) -> "Subspace":
        if self.rank == 0:
            return Subspace(np.eye(self.space.dim), self.space)
        return Subspace(_null_space(np.asarray(self.space.pairing(self.basis, np.eye(self.space.dim)))), self.space)

    def intersect(self, other: "Subspace") -> "Subspace":
        M = np.hstack([self.basis, -other.basis])
        coeff = _null_space(M)
        if coeff.shape[1] == 0:
            return Subspace(np.zeros((self.space.dim, 0)), self.space)
        return Subspace(_column_space(self.basis @ coeff[: self.rank]), self.space)

    def sum(self, other: "Subspace") -> "Subspace":
        return Subspace(_column_space(np.hstack([self.basis, other.basis])), self.space)

    def project(self, v) -> np.ndarray:
        """Component of ``v`` in this subspace along its orthogonal complement."""
        g = self.gram()
        if np.linalg.matrix_rank(g, tol=RANK_RTOL * max(1.0, np.abs(g).max())) < self.rank:
            raise ValueError("cannot project onto a degenerate subspace")
        coeff = np.linalg.solve(g, np.asarray(self.space.pairing(self.basis, np.asarray(v, float)[:, None])))
        return (self.basis @ coeff)[:, 0]

    def contains(self, v, tol: float = 1e-9) -> bool:
        v = np.asarray(v, dtype=float)
        q = _column_space(self.basis)
        r = v - q @ (q.T @ v)
        return float(np.linalg.norm(r)) <= tol * max(1.0, float(np.linalg.norm(v)))

    def distance(self, other: "Subspace") -> float:
        """Sine of the largest principal angle (Euclidean); inf for different ranks."""
        if self.rank != other.rank:
            return float("inf")
        return column_space_distance(self.basis, other.basis)

    def transform(self, g) -> "Subspace":
        return Subspace(np.asarray(g) @ self.basis, self.space)


def column_space_distance(A, B):
    """Sine of the largest principal angle between column spaces (batched)."""
    qa, _ = np.linalg.qr(np.asarray(A, dtype=float))
    qb, _ = np.linalg.qr(np.asarray(B, dtype=float))
    r = qb - qa @ (np.swapaxes(qa, -1, -2) @ qb)
    return np.linalg.norm(r, ord=2, axis=(-2, -1)) if r.ndim > 2 else float(np.linalg.norm(r, 2))


# ---------------------------------------------------------------------------
# Rulings of a (2,2) space by null planes


def normalize_rp1(alpha: Sequence[float]) -> tuple[float, float]:
    """Representative of a point of RP^1 with ``max(|a0|, |a1|) = 1``.

    The sign is fixed so that the first nonzero coordinate is positive.
    """
    a0, a1 = (float(x) for x in alpha)
    m = max(abs(a0), abs(a1))
    if m == 0.0:
        raise ValueError("(0:0) is not a point of RP^1")
    a0, a1 = a0 / m, a1 / m
    if a0 < 0 or (a0 == 0 and a1 < 0):
        a0, a1 = -a0, -a1
    return (a0 + 0.0, a1 + 0.0)


def rp1_rotation(alpha) -> tuple[float, float]:
    """``(cos t, sin t)`` of the angle ``t = 2 atan2(a1, a0)``, computed rationally."""
    a0, a1 = normalize_rp1(alpha)
    r = a0 * a0 + a1 * a1
    return ((a0 * a0 - a1 * a1) / r, 2.0 * a0 * a1 / r)


def adapted_basis(basis, space: MetricSpace, tol: float = 1e-12) -> np.ndarray:
    """Basis ``v1..v4`` of a (2,2) subspace with Gram matrix ``diag(1, 1, -1, -1)``.

    Indefinite Gram-Schmidt in the order the columns are given; an input that
    is already adapted is returned unchanged.  Only pairings are used, so the
    result commutes with maps preserving the form.
    """
    B = np.array(basis, dtype=float)
    if B.shape != (space.dim, 4):
        raise ValueError("expected a basis of four vectors")
    sig = Subspace(B, space).signature()
    if sig != (2, 2, 0):
        raise ValueError(f"subspace has signature {sig}, expected (2, 2, 0)")
    ip = lambda x, y: float(space.inner(x, y))  # noqa: E731
    done: list[np.ndarray] = []
    rest = [B[:, k] for k in range(4)]
    scale = max(abs(ip(b, b)) for b in rest) + max(float(b @ b) for b in rest)
    while rest:
        rest = [r - sum(ip(d, r) * ip(d, d) * d for d in done) for r in rest]
        pick = next((k for k, r in enumerate(rest) if abs(ip(r, r)) > 1e-3 * scale), None)
        if pick is None:
            # every remaining vector is null: combine two with nonzero pairing
            j = max(range(1, len(rest)), key=lambda k: abs(ip(rest[0], rest[k])))
            rest[0] = rest[0] + np.sign(ip(rest[0], rest[j])) * rest[j]
            pick = 0
        r = rest.pop(pick)
        done.append(r / np.sqrt(abs(ip(r, r))))
    pos = [d for d in done if ip(d, d) > 0]
    neg = [d for d in done if ip(d, d) < 0]
    out = np.column_stack(pos + neg)
    if np.max(np.abs(np.asarray(space.pairing(out, out)) - np.diag([1.0, 1.0, -1.0, -1.0]))) > 1e-8:
        raise ArithmeticError("indefinite Gram-Schmidt lost accuracy")
    return out


def ruling_coefficients(family: str, alpha) -> np.ndarray:
    """4x2 coefficients of the ruling plane in an adapted basis.

    Family ``"A"`` consists of graphs of rotations from the positive to the
    negative part, family ``"B"`` of graphs of reflections.
    """
    c, s = rp1_rotation(alpha)
    if family == "A":
        T = np.array([[c, -s], [s, c]])
    elif family == "B":
        T = np.array([[c, s], [s, -c]])
    else:
        raise ValueError(f"family must be 'A' or 'B', got {family!r}")
    return np.vstack([np.eye(2), T])


def null_plane_rulings(V: Subspace, family: str, alpha) -> Subspace:
    """The null 2-plane of ``V`` (signature (2,2)) in the given ruling at ``alpha``."""
    ab = adapted_basis(V.basis, V.space)
    return Subspace(ab @ ruling_coefficients(family, alpha), V.space)

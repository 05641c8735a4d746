"""Exterior and connection calculus on a uniform grid over [0, 1]^2.

Fields carry their samples on the grid and, when they come from a closed
form, the callable that produced them.  Derivatives of closed-form fields are
taken with forward-mode differentiation (exact up to rounding); sampled
fields fall back to second-order finite differences.  Parallel transport is
exact for connections given in a vacuum gauge, a sixth-order Magnus step for
closed-form connections, and a midpoint exponential for sampled ones.
"""

from __future__ import annotations

import csv
import json
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import jax
import jax.numpy as jnp
import numpy as np
from scipy.linalg import expm

FieldFn = Callable[[jnp.ndarray, jnp.ndarray], jnp.ndarray]

# Magnus substeps are chosen so no step is longer than this.
MAGNUS_MAX_STEP = 1.0 / 32
_MIN_BUCKET = 1024
MIN_NODES = 9


def evaluate(fn: "FieldFn", u, v) -> np.ndarray:
    """Evaluate a pointwise closed form on arrays of points of any shape.

    Points are flattened and padded to a power-of-two count so that the
    compiled kernels are shared between grids and edge batches.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    shape = u.shape
    n = u.size
    pu, pv = _padded_points(u, v)
    out = np.asarray(fn(pu, pv))[:n]
    return out.reshape(shape + out.shape[1:])


_POINTS: OrderedDict = OrderedDict()


def _padded_points(u: np.ndarray, v: np.ndarray):
    """Padded device arrays for a point set, reused for repeated point sets.

    Handing out the same array objects lets the per-field memo recognise
    evaluations on points it has already seen.
    """
    key = (u.shape, u.tobytes(), v.tobytes())
    hit = _POINTS.get(key)
    if hit is not None:
        _POINTS.move_to_end(key)
        return hit
    n = u.size
    size = max(_MIN_BUCKET, 1 << max(0, (n - 1).bit_length()))
    pu = np.zeros(size)
    pv = np.zeros(size)
    pu[:n] = u.ravel()
    pv[:n] = v.ravel()
    hit = _POINTS[key] = (jnp.asarray(pu), jnp.asarray(pv))
    if len(_POINTS) > 16:
        _POINTS.popitem(last=False)
    return hit


def expm_affine(xu, xv, reach: float = 2.0):
    """Closed form ``(u, v) -> exp(u X_u + v X_v)`` for constant ``X_u, X_v``.

    Scaling and squaring with a fixed-degree Taylor polynomial; the number of
    squarings is fixed from the generator norms for ``|u|, |v| <= reach``, so
    the expression has no data-dependent control flow.
    """
    xu = np.asarray(xu, dtype=float)
    xv = np.asarray(xv, dtype=float)
    bound = reach * (np.linalg.norm(xu, 2) + np.linalg.norm(xv, 2))
    squarings = max(0, int(np.ceil(np.log2(max(bound, 1e-300) / 0.25)))) if bound > 0.25 else 0
    scale = 2.0**-squarings
    eye = np.eye(xu.shape[-1])

    def fn(u, v):
        u = jnp.asarray(u, dtype=float)[..., None, None]
        v = jnp.asarray(v, dtype=float)[..., None, None]
        M = (u * xu + v * xv) * scale
        E = eye + M / 12.0
        for k in range(11, 0, -1):
            E = eye + (M @ E) / k
        for _ in range(squarings):
            E = E @ E
        return E

    return fn


def fd_partial(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Second-order finite difference along ``axis``.

    Central differences inside.  At the two ends a one-sided four-point
    stencil is used whose leading truncation error equals that of the central
    stencil (``h^2/6`` times the third derivative); the error of a derivative
    is then a smooth field, so derivatives of derived fields stay
    second-order up to the boundary.
    """
    x = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    if x.shape[0] < 4:
        raise ValueError("finite differences need at least 4 nodes per axis")
    out = np.empty_like(x)
    out[1:-1] = (x[2:] - x[:-2]) / (2.0 * h)
    out[0] = (-4.0 * x[0] + 7.0 * x[1] - 4.0 * x[2] + x[3]) / (2.0 * h)
    out[-1] = (4.0 * x[-1] - 7.0 * x[-2] + 4.0 * x[-3] - x[-4]) / (2.0 * h)
    return np.moveaxis(out, 0, axis)


class _Memo:
    """Reuse a closed form's output when it is called again on the same input objects.

    Composite closed forms call their operands with identical ``(u, v)``
    arrays (or tracers), so shared sub-expressions are evaluated once.
    """

    def __init__(self, fn, size: int = 4):
        self.fn = fn
        self.size = size
        self._cache: OrderedDict = OrderedDict()

    def __call__(self, u, v):
        key = (id(u), id(v))
        hit = self._cache.get(key)
        if hit is not None and hit[0] is u and hit[1] is v:
            return hit[2]
        out = self.fn(u, v)
        self._cache[key] = (u, v, out)
        if len(self._cache) > self.size:
            self._cache.popitem(last=False)
        return out


class FlatnessError(ValueError):
    """A connection required to be flat is not, within the declared tolerance."""


@dataclass(frozen=True)
class Grid:
    """Uniform ``nu x nv`` node grid on the unit square."""

    nu: int = 33
    nv: int = 33

    def __post_init__(self):
        if self.nu < MIN_NODES or self.nv < MIN_NODES:
            raise ValueError(f"grid needs at least {MIN_NODES} nodes per axis, got {self.nu}x{self.nv}")

    @property
    def hu(self) -> float:
        return 1.0 / (self.nu - 1)

    @property
    def hv(self) -> float:
        return 1.0 / (self.nv - 1)

    @property
    def h(self) -> float:
        return max(self.hu, self.hv)

    @property
    def u(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.nu)

    @property
    def v(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.nv)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.u, self.v, indexing="ij")

    def spacing(self, axis: int) -> float:
        return self.hu if axis == 0 else self.hv

    def halved(self) -> "Grid":
        return Grid(2 * self.nu - 1, 2 * self.nv - 1)


def partial_fn(fn: FieldFn, axis: int) -> FieldFn:
    """Exact partial derivative of a pointwise closed-form field."""

    def dfn(u, v):
        u = jnp.asarray(u, dtype=float)
        v = jnp.asarray(v, dtype=float)
        if axis == 0:
            return jax.jvp(lambda x: fn(x, v), (u,), (jnp.ones_like(u),))[1]
        return jax.jvp(lambda y: fn(u, y), (v,), (jnp.ones_like(v),))[1]

    return dfn


class Field:
    """Values on the grid nodes, optionally backed by a closed form.

    ``values`` has shape ``(nu, nv, *shape)``.  ``fn(u, v)`` takes arrays of
    equal shape ``S`` and returns ``S + shape``; it must be written with
    ``jax.numpy`` so it can be differentiated.
    """

    __array_priority__ = 100

    def __init__(self, grid: Grid, values, fn: Optional[FieldFn] = None):
        values = np.asarray(values, dtype=float)
        if values.shape[:2] != (grid.nu, grid.nv):
            raise ValueError(f"values of shape {values.shape} do not match grid {grid.nu}x{grid.nv}")
        self.grid = grid
        self.values = values
        self.fn = fn if fn is None or isinstance(fn, _Memo) else _Memo(fn)
        # (op, operands) when built by ``lift``; derivatives then follow the chain rule
        self._node = None
        self._partials: dict = {}

    @classmethod
    def from_function(cls, grid: Grid, fn: FieldFn) -> "Field":
        U, V = grid.mesh()
        return cls(grid, evaluate(fn, U, V), fn)

    @classmethod
    def from_samples(cls, grid: Grid, values) -> "Field":
        return cls(grid, values)

    @classmethod
    def constant(cls, grid: Grid, value) -> "Field":
        value = jnp.asarray(value, dtype=float)

        def fn(u, v):
            return jnp.broadcast_to(value, jnp.shape(u) + value.shape) + 0.0 * jnp.reshape(
                u, jnp.shape(u) + (1,) * value.ndim
            )

        return cls.from_function(grid, fn)

    def __repr__(self):
        kind = "closed-form" if self.exact else "sampled"
        return f"Field({kind}, grid={self.grid.nu}x{self.grid.nv}, shape={self.shape})"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape[2:]

    @property
    def exact(self) -> bool:
        return self.fn is not None

    def sampled(self) -> "Field":
        """Same samples with the closed form dropped."""
        return Field(self.grid, self.values)

    def at(self, u, v) -> np.ndarray:
        if self.fn is None:
            raise ValueError("sampled field cannot be evaluated off the grid")
        return evaluate(self.fn, u, v)

    def partial(self, axis: int) -> "Field":
        """Exact derivative for closed forms, finite differences otherwise.

        A closed form built by ``lift`` is differentiated through the chain
        rule, one ``jvp`` per operation on already computed operand
        derivatives, so shared sub-expressions are differentiated once.
        """
        cached = self._partials.get(axis)
        if cached is not None:
            return cached
        if self.fn is None:
            out = Field(self.grid, fd_partial(self.values, self.grid.spacing(axis), axis))
        elif self._node is not None:
            out = _chain_partial(*self._node, axis)
        else:
            out = Field.from_function(self.grid, partial_fn(self.fn, axis))
        self._partials[axis] = out
        return out

    def d(self) -> "OneForm":
        return OneForm(self.partial(0), self.partial(1))

    def norm(self) -> np.ndarray:
        """Nodewise Frobenius norm."""
        axes = tuple(range(2, self.values.ndim))
        return np.sqrt(np.sum(self.values**2, axis=axes)) if axes else np.abs(self.values)

    # arithmetic keeps closed forms when both operands have them
    def __add__(self, other):
        return lift(jnp.add, self, other)

    def __sub__(self, other):
        return lift(jnp.subtract, self, other)

    def __neg__(self):
        return lift(jnp.negative, self)

    def __mul__(self, c):
        if isinstance(c, Field):
            return lift(jnp.multiply, self, c)
        return lift(lambda x: c * x, self)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return lift(jnp.matmul, self, other)


def lift(op: Callable, *operands) -> Field:
    """Apply a pointwise ``jax.numpy`` operation to fields (and constant arrays)."""
    fields = [x for x in operands if isinstance(x, Field)]
    if not fields:
        raise TypeError("lift needs at least one Field operand")
    grid = fields[0].grid
    if any(f.grid != grid for f in fields):
        raise ValueError("fields live on different grids")
    vals = [x.values if isinstance(x, Field) else x for x in operands]
    values = np.asarray(op(*vals))
    fn = None
    if all(f.fn is not None for f in fields):
        fns = [x.fn if isinstance(x, Field) else x for x in operands]

        def fn(u, v):
            return op(*[g(u, v) if callable(g) else g for g in fns])

    out = Field(grid, values, fn)
    if fn is not None:
        out._node = (op, operands)
    return out


def _chain_partial(op: Callable, operands, axis: int) -> Field:
    pos = [i for i, x in enumerate(operands) if isinstance(x, Field)]
    fields = [operands[i] for i in pos]
    tangents = [f.partial(axis) for f in fields]
    m = len(fields)

    def g(*fv):
        args = list(operands)
        for i, x in zip(pos, fv):
            args[i] = x
        return op(*args)

    def dop(*vals):
        return jax.jvp(g, tuple(vals[:m]), tuple(vals[m:]))[1]

    return lift(dop, *fields, *tangents)


@dataclass
class OneForm:
    """``du``-component and ``dv``-component fields."""

    du: Field
    dv: Field

    @property
    def grid(self) -> Grid:
        return self.du.grid

    @property
    def exact(self) -> bool:
        return self.du.exact and self.dv.exact

    @classmethod
    def zeros(cls, grid: Grid, shape) -> "OneForm":
        z = Field.constant(grid, np.zeros(shape))
        return cls(z, z)

    @classmethod
    def constant(cls, grid: Grid, xu, xv) -> "OneForm":
        return cls(Field.constant(grid, xu), Field.constant(grid, xv))

    def component(self, axis: int) -> Field:
        return self.du if axis == 0 else self.dv

    def map(self, op: Callable, *others) -> "OneForm":
        """Apply a pointwise operation to each component (others may be forms, fields or arrays)."""

        def pick(x, axis):
            return x.component(axis) if isinstance(x, OneForm) else x

        return OneForm(*(lift(op, self.component(a), *(pick(o, a) for o in others)) for a in (0, 1)))

    def sampled(self) -> "OneForm":
        return OneForm(self.du.sampled(), self.dv.sampled())

    def norm(self) -> np.ndarray:
        """Nodewise ``sqrt(|w_u|^2 + |w_v|^2)``."""
        return np.sqrt(self.du.norm() ** 2 + self.dv.norm() ** 2)

    def __add__(self, other: "OneForm") -> "OneForm":
        return OneForm(self.du + other.du, self.dv + other.dv)

    def __sub__(self, other: "OneForm") -> "OneForm":
        return OneForm(self.du - other.du, self.dv - other.dv)

    def __neg__(self):
        return OneForm(-self.du, -self.dv)

    def __mul__(self, c: float) -> "OneForm":
        return OneForm(self.du * c, self.dv * c)

    __rmul__ = __mul__


# A two-form on the surface is determined by its value on (d/du, d/dv).
TwoForm = Field


def ext_d(x):
    """Exterior derivative of a 0-form (Field) or a 1-form (OneForm)."""
    if isinstance(x, OneForm):
        return x.dv.partial(0) - x.du.partial(1)
    return x.d()


ext_d_scalar = ext_d_vec = ext_d_oneform = ext_d


def wedge_bracket(w: OneForm, t: OneForm) -> TwoForm:
    """``[w ^ t](d/du, d/dv) = [w_u, t_v] - [w_v, t_u]``.

    With this convention ``[w ^ w] = 2 [w_u, w_v]``.
    """

    def op(wu, wv, tu, tv):
        return wu @ tv - tv @ wu - (wv @ tu - tu @ wv)

    return lift(op, w.du, w.dv, t.du, t.dv)


# ---------------------------------------------------------------------------
# Connections


@dataclass(frozen=True)
class VacuumFrame:
    """``F(u, v) = exp(u X_u + v X_v)`` for commuting ``X_u, X_v``.

    Its Maurer-Cartan form ``F^{-1} dF = X_u du + X_v dv`` is constant.
    """

    xu: np.ndarray
    xv: np.ndarray

    def __post_init__(self):
        xu = np.asarray(self.xu, dtype=float)
        xv = np.asarray(self.xv, dtype=float)
        comm = np.linalg.norm(xu @ xv - xv @ xu)
        if comm > 1e-12 * max(1.0, np.linalg.norm(xu) * np.linalg.norm(xv)):
            raise ValueError(f"frame generators do not commute (|[X_u, X_v]| = {comm:.3e})")
        object.__setattr__(self, "xu", xu)
        object.__setattr__(self, "xv", xv)

    def fn(self, u, v):
        return self._exp(u, v)

    @property
    def _exp(self):
        cached = self.__dict__.get("_exp_fn")
        if cached is None:
            cached = expm_affine(self.xu, self.xv)
            object.__setattr__(self, "_exp_fn", cached)
        return cached

    def field(self, grid: Grid) -> Field:
        return Field.from_function(grid, self.fn)


@dataclass(frozen=True)
class Gauge:
    """``d + A = F o (d + C_u du + C_v dv) o F^{-1}`` with constant ``C``."""

    frame: VacuumFrame
    cu: np.ndarray
    cv: np.ndarray

    @property
    def curvature(self) -> np.ndarray:
        return self.cu @ self.cv - self.cv @ self.cu


class Connection:
    """The connection ``d + A`` on a trivial bundle, ``A`` matrix-valued."""

    def __init__(self, A: OneForm, gauge: Optional[Gauge] = None):
        self.A = A
        self.gauge = gauge

    @property
    def grid(self) -> Grid:
        return self.A.grid

    @property
    def rank(self) -> int:
        return self.A.du.shape[-1]

    @property
    def exact(self) -> bool:
        return self.gauge is not None or self.A.exact

    @classmethod
    def trivial(cls, grid: Grid, rank: int) -> "Connection":
        z = np.zeros((rank, rank))
        return cls(OneForm.constant(grid, z, z), Gauge(VacuumFrame(z, z), z, z))

    @classmethod
    def from_gauge(cls, grid: Grid, gauge: Gauge) -> "Connection":
        fr = gauge.frame

        def comp(c, x):
            def fn(u, v):
                F = fr.fn(u, v)
                return F @ (c - x) @ jnp.linalg.inv(F)

            return Field.from_function(grid, fn)

        return cls(OneForm(comp(gauge.cu, fr.xu), comp(gauge.cv, fr.xv)), gauge)

    def sampled(self) -> "Connection":
        return Connection(self.A.sampled())

    def without_gauge(self) -> "Connection":
        return Connection(self.A)

    def covariant(self, section: Field) -> OneForm:
        """``(d + A) s`` for a field of vectors or of bases (matrices)."""
        ds = section.d()
        if len(section.shape) == 1:
            return OneForm(*(ds.component(a) + lift(lambda A, s: (A @ s[..., None])[..., 0], self.A.component(a), section) for a in (0, 1)))
        return OneForm(*(ds.component(a) + self.A.component(a) @ section for a in (0, 1)))


def attach_gauge(C: Connection, frame: VacuumFrame, tol: float = 1e-10) -> Optional[Connection]:
    """Return ``C`` with a vacuum gauge if ``F^{-1} A F + X`` is constant on the grid."""
    Fv = frame.field(C.grid).values
    Finv = np.linalg.inv(Fv)
    cs = []
    for A, x in ((C.A.du.values, frame.xu), (C.A.dv.values, frame.xv)):
        c = Finv @ A @ Fv + x
        c0 = c[0, 0]
        if np.max(np.abs(c - c0)) > tol * max(1.0, np.max(np.abs(c0))):
            return None
        cs.append(c0)
    return Connection(C.A, Gauge(frame, cs[0], cs[1]))


def curvature(C: Connection) -> TwoForm:
    """``F = dA + 1/2 [A ^ A]``, i.e. ``d_u A_v - d_v A_u + [A_u, A_v]``."""
    return ext_d(C.A) + 0.5 * wedge_bracket(C.A, C.A)


# --- edge transports --------------------------------------------------------

_GL3 = np.array([0.5 - np.sqrt(15.0) / 10.0, 0.5, 0.5 + np.sqrt(15.0) / 10.0])


def _magnus6(M1, M2, M3, dt):
    """Sixth-order Magnus exponent from samples at the three Gauss nodes."""
    a1 = dt * M2
    a2 = (np.sqrt(15.0) * dt / 3.0) * (M3 - M1)
    a3 = (10.0 * dt / 3.0) * (M3 - 2.0 * M2 + M1)
    c1 = a1 @ a2 - a2 @ a1
    x = 2.0 * a3 + c1
    c2 = -(a1 @ x - x @ a1) / 60.0
    p = -20.0 * a1 - a3 + c1
    q = a2 + c2
    return a1 + a3 / 12.0 + (p @ q - q @ p) / 240.0


def _magnus_edges(comp: Field, u0, v0, axis: int, length: float, substeps: int) -> np.ndarray:
    """Transports along straight edges starting at ``(u0, v0)`` for ``d + A``."""
    dt = length / substeps
    offs = (np.arange(substeps)[:, None] + _GL3[None, :]) * dt  # (s, 3)
    pu = np.broadcast_to(u0[..., None, None], u0.shape + offs.shape).copy()
    pv = np.broadcast_to(v0[..., None, None], v0.shape + offs.shape).copy()
    if axis == 0:
        pu = pu + offs
    else:
        pv = pv + offs
    M = -evaluate(comp.fn, pu, pv)  # (..., s, 3, r, r)
    r = M.shape[-1]
    T = np.broadcast_to(np.eye(r), u0.shape + (r, r)).copy()
    for k in range(substeps):
        om = _magnus6(M[..., k, 0, :, :], M[..., k, 1, :, :], M[..., k, 2, :, :], dt)
        T = expm(om) @ T
    return T


def edge_transports(C: Connection, substeps: Optional[int] = None) -> tuple[np.ndarray, np.ndarray]:
    """Transports along all grid edges.

    Returns ``(Tu, Tv)`` with ``Tu[i, j]`` mapping the fiber at node
    ``(i, j)`` to ``(i+1, j)`` and ``Tv[i, j]`` mapping ``(i, j)`` to ``(i, j+1)``.
    """
    g = C.grid
    U, V = g.mesh()
    if C.gauge is not None:
        F = C.gauge.frame.field(g).values
        Finv = np.linalg.inv(F)
        Eu = expm(-g.hu * C.gauge.cu)
        Ev = expm(-g.hv * C.gauge.cv)
        return F[1:] @ Eu @ Finv[:-1], F[:, 1:] @ Ev @ Finv[:, :-1]
    if C.A.exact:
        if substeps is None:
            substeps = max(1, int(np.ceil(g.h / MAGNUS_MAX_STEP - 1e-9)))
        Tu = _magnus_edges(C.A.du, U[:-1], V[:-1], 0, g.hu, substeps)
        Tv = _magnus_edges(C.A.dv, U[:, :-1], V[:, :-1], 1, g.hv, substeps)
        return Tu, Tv
    Au = C.A.du.values
    Av = C.A.dv.values
    Tu = expm(-g.hu * 0.5 * (Au[1:] + Au[:-1]))
    Tv = expm(-g.hv * 0.5 * (Av[:, 1:] + Av[:, :-1]))
    return Tu, Tv


def holonomies(C: Connection, transports=None) -> np.ndarray:
    """Holonomy around every cell, starting and ending at its lower-left node."""
    Tu, Tv = transports if transports is not None else edge_transports(C)
    return np.linalg.inv(Tv[:-1]) @ np.linalg.inv(Tu[:, 1:]) @ Tv[1:] @ Tu[:, :-1]


def plaquette_defect(C: Connection, transports=None) -> np.ndarray:
    """``|H - I|_F / (h_u h_v)`` per cell, array of shape ``(nu-1, nv-1)``."""
    H = holonomies(C, transports)
    r = H.shape[-1]
    g = C.grid
    return np.linalg.norm(H - np.eye(r), axis=(-2, -1)) / (g.hu * g.hv)


def default_flatness_tol(C: Connection) -> float:
    return 1e-8 if C.exact else 10.0 * C.grid.h**2


def parallel_transport(C: Connection, path: Sequence[tuple[int, int]], vec, transports=None) -> np.ndarray:
    """Transport ``vec`` along a path of adjacent grid nodes."""
    Tu, Tv = transports if transports is not None else edge_transports(C)
    x = np.asarray(vec, dtype=float)
    for (i0, j0), (i1, j1) in zip(path[:-1], path[1:]):
        if (i1 - i0, j1 - j0) == (1, 0):
            x = Tu[i0, j0] @ x
        elif (i1 - i0, j1 - j0) == (-1, 0):
            x = np.linalg.solve(Tu[i1, j1], x)
        elif (i1 - i0, j1 - j0) == (0, 1):
            x = Tv[i0, j0] @ x
        elif (i1 - i0, j1 - j0) == (0, -1):
            x = np.linalg.solve(Tv[i1, j1], x)
        else:
            raise ValueError(f"nodes {(i0, j0)} and {(i1, j1)} are not adjacent")
    return x


def _sweep(Tu, Tv, nu, nv, r, row_first=True):
    Phi = np.empty((nu, nv, r, r))
    if row_first:
        Phi[0, 0] = np.eye(r)
        for i in range(1, nu):
            Phi[i, 0] = Tu[i - 1, 0] @ Phi[i - 1, 0]
        for j in range(1, nv):
            Phi[:, j] = Tv[:, j - 1] @ Phi[:, j - 1]
    else:
        Phi[0, 0] = np.eye(r)
        for j in range(1, nv):
            Phi[0, j] = Tv[0, j - 1] @ Phi[0, j - 1]
        for i in range(1, nu):
            Phi[i] = Tu[i - 1] @ Phi[i - 1]
    return Phi


def parallel_frame(C: Connection, tol: Optional[float] = None, check: bool = True) -> Field:
    """Parallel frame ``Phi`` with ``Phi(0, 0) = I`` and ``(d + A) Phi = 0``.

    A flat vacuum gauge gives the closed form ``F exp(-u C_u - v C_v)``;
    otherwise transports are composed along the row-then-column lattice path.
    """
    g = C.grid
    tol = default_flatness_tol(C) if tol is None else tol
    if C.gauge is not None:
        gauge = C.gauge
        if check and np.linalg.norm(gauge.curvature) > tol:
            raise FlatnessError(f"gauge curvature {np.linalg.norm(gauge.curvature):.3e} exceeds {tol:.1e}")
        frame = gauge.frame
        inner = expm_affine(-gauge.cu, -gauge.cv)

        def fn(u, v):
            return frame.fn(u, v) @ inner(u, v)

        return Field.from_function(g, fn)
    transports = edge_transports(C)
    if check:
        worst = float(np.max(plaquette_defect(C, transports)))
        if worst > tol:
            raise FlatnessError(f"max plaquette defect {worst:.3e} exceeds {tol:.1e}")
    return Field(g, _sweep(*transports, g.nu, g.nv, C.rank))


def frame_path_defect(C: Connection) -> np.ndarray:
    """Nodewise ``|Phi_row-col - Phi_col-row|_F``; small for flat connections."""
    g = C.grid
    transports = edge_transports(C)
    a = _sweep(*transports, g.nu, g.nv, C.rank, row_first=True)
    b = _sweep(*transports, g.nu, g.nv, C.rank, row_first=False)
    return np.linalg.norm(a - b, axis=(-2, -1))


# ---------------------------------------------------------------------------
# Field dumps


def _kind(shape: tuple[int, ...]) -> str:
    return {0: "scalar", 1: "vec", 2: "matrix"}.get(len(shape), "tensor")


def dump_field(field: Field, path, fmt: Optional[str] = None) -> Path:
    """Write a field row-major (node ``(i, j)`` with ``j`` fastest) as JSON or CSV."""
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".").lower() or "json"
    g = field.grid
    flat = field.values.reshape(g.nu * g.nv, -1)
    header = {"N_u": g.nu, "N_v": g.nv, "kind": _kind(field.shape), "shape": list(field.shape)}
    if fmt == "json":
        path.write_text(json.dumps({**header, "values": flat.tolist()}))
    elif fmt == "csv":
        with path.open("w", newline="") as fh:
            fh.write("# " + json.dumps(header) + "\n")
            w = csv.writer(fh)
            w.writerow(["i", "j"] + [f"c{k}" for k in range(flat.shape[1])])
            for idx, row in enumerate(flat):
                w.writerow([idx // g.nv, idx % g.nv] + [repr(float(x)) for x in row])
    else:
        raise ValueError(f"unknown field dump format {fmt!r}")
    return path


def load_field(path) -> Field:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with path.open() as fh:
            header = json.loads(fh.readline()[2:])
            rows = list(csv.reader(fh))[1:]
        flat = np.array([[float(x) for x in r[2:]] for r in rows])
    else:
        data = json.loads(path.read_text())
        header = data
        flat = np.array(data["values"], dtype=float)
    grid = Grid(header["N_u"], header["N_v"])
    return Field(grid, flat.reshape((grid.nu, grid.nv) + tuple(header["shape"])))

"""Gauge potentials, their quadratic differential and the Lie applicability test.

A Legendre map ``f`` is Lie applicable when a 1-form ``eta`` with values in
``f ^ f^perp`` is closed, has ``[eta ^ eta] = 0`` and a quadratic
differential ``q`` that is generically nonzero.  Potentials are built from a
complementary pair of null planes inside a curved flat.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .bundles import SubbundleField
from .curved_flat import EPS_REG, REGULAR_FRACTION, WField, split_W, trace_metric
from .grid_calculus import Connection, Field, OneForm, VacuumFrame, attach_gauge, ext_d, lift, wedge_bracket
from .report import CheckReport, defect
from .splitting import SplitData, exact_tolerance, legendre_defect, split_connection


@dataclass
class GaugePotential:
    """``eta`` (a 1-form of skew maps) attached to the Legendre map ``f``.

    ``ft`` is the complement the potential was built from, if any; it gives
    the dual basis used for traces over ``f``.  ``frame`` is a vacuum frame in
    which ``eta`` has constant coefficients, when one is known.
    """

    eta: OneForm
    f: SubbundleField
    m: float = 1.0
    ft: Optional[SubbundleField] = None
    frame: Optional[VacuumFrame] = None
    split: Optional[SplitData] = None

    @property
    def grid(self):
        return self.f.grid

    @property
    def exact(self) -> bool:
        return self.eta.exact and self.f.exact

    def tolerance(self) -> float:
        return exact_tolerance(self.exact, self.grid)

    def scaled(self, lam: float) -> "GaugePotential":
        return GaugePotential(self.eta * lam, self.f, self.m, self.ft, self.frame)

    def closedness(self) -> np.ndarray:
        return ext_d(self.eta).norm()

    def bracket_defect(self) -> np.ndarray:
        return wedge_bracket(self.eta, self.eta).norm()

    def block_defect(self) -> np.ndarray:
        """Nodewise distance of ``eta`` from ``f ^ f^perp``.

        A skew map lies there exactly when it kills ``f`` and maps ``f^perp``
        into ``f``; both parts are measured relative to the basis norms.
        """
        B = self.f.values
        P = self.f.orth_complement().values
        qf, _ = np.linalg.qr(B)
        out = np.zeros(B.shape[:2])
        for E in (self.eta.du.values, self.eta.dv.values):
            kill = np.linalg.norm(E @ B, axis=(-2, -1)) / np.linalg.norm(B, axis=(-2, -1))
            img = E @ P
            off = img - qf @ (np.swapaxes(qf, -1, -2) @ img)
            out = np.maximum(out, np.maximum(kill, np.linalg.norm(off, axis=(-2, -1)) / np.linalg.norm(P, axis=(-2, -1))))
        return out

    def connection(self, t: float = 1.0) -> Connection:
        """``d + t eta``, with a constant gauge when a vacuum frame is known."""
        C = Connection(self.eta * t)
        if self.frame is not None:
            gauged = attach_gauge(C, self.frame, tol=1e-9)
            if gauged is not None:
                return gauged
        return C


@dataclass
class QuadraticDifferential:
    """Nodewise symmetric 2x2 matrix ``q(X, Y)`` on the coordinate directions."""

    values: np.ndarray
    grid: object

    @property
    def det(self) -> np.ndarray:
        return np.linalg.det(self.values)

    @property
    def trace(self) -> np.ndarray:
        return np.trace(self.values, axis1=-2, axis2=-1)

    @property
    def norm(self) -> np.ndarray:
        return np.linalg.norm(self.values, axis=(-2, -1))

    def symmetry_defect(self) -> np.ndarray:
        return np.abs(self.values[..., 0, 1] - self.values[..., 1, 0])

    def nonzero_fraction(self, eps: float = EPS_REG) -> float:
        return float(np.mean(self.norm > eps))

    def __sub__(self, other: "QuadraticDifferential") -> np.ndarray:
        """Nodewise norm of the difference."""
        return np.linalg.norm(self.values - other.values, axis=(-2, -1))

    def to_csv(self, path) -> Path:
        """One row per node: ``i, j, u, v, det, trace``."""
        path = Path(path)
        U, V = self.grid.mesh()
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "j", "u", "v", "det", "trace"])
            det, tr = self.det, self.trace
            for i in range(self.values.shape[0]):
                for j in range(self.values.shape[1]):
                    w.writerow([i, j, repr(float(U[i, j])), repr(float(V[i, j])), repr(float(det[i, j])), repr(float(tr[i, j]))])
        return path


def eta_from_flat(
    f: SubbundleField,
    ft: SubbundleField,
    m: float = 1.0,
    frame: Optional[VacuumFrame] = None,
    split: Optional[SplitData] = None,
    tol: Optional[float] = None,
) -> GaugePotential:
    """``eta = -(1/m) (A_{f~,f} + N_{f~})`` from the splitting along ``f + f~``.

    Raises ``ValueError`` for ``m = 0`` or when ``f`` is not Legendre within
    ``tol``.
    """
    if m == 0:
        raise ValueError("m must be nonzero")
    s = split if split is not None else split_connection(f, ft)
    tol = exact_tolerance(s.exact, s.grid) if tol is None else tol
    leg = float(legendre_defect(f).max())
    if leg > tol:
        raise ValueError(f"f is not Legendre (defect {leg:.3e} > {tol:.1e})")
    eta = (s.A_ft_f + s.N_ft) * (-1.0 / m)
    return GaugePotential(eta, f, m, ft, frame, s)


def _coefficients(f: SubbundleField, ft: Optional[SubbundleField], M: np.ndarray) -> np.ndarray:
    """Coordinates in the basis of ``f`` of the columns of ``M`` (nodewise, lying in ``f``).

    With a complement ``f~`` the pairing with it gives the dual basis;
    otherwise least squares.
    """
    B = f.values
    if ft is not None:
        D = np.swapaxes(ft.values, -1, -2) * f.space.signs
        return np.linalg.solve(D @ B, D @ M)
    return np.linalg.pinv(B) @ M


def q_direct(eta: GaugePotential) -> QuadraticDifferential:
    """``q(X, Y) = tr(sigma -> eta(X) d_Y sigma)`` over a basis of ``f``."""
    f = eta.f
    E = (eta.eta.du.values, eta.eta.dv.values)
    dB = (f.basis.partial(0).values, f.basis.partial(1).values)
    q = np.empty(f.values.shape[:2] + (2, 2))
    for a in (0, 1):
        for b in (0, 1):
            C = _coefficients(f, eta.ft, E[a] @ dB[b])
            q[..., a, b] = np.trace(C, axis1=-2, axis2=-1)
    return QuadraticDifferential(q, f.grid)


def q_trace(W: WField, m: float = 1.0, NW: Optional[OneForm] = None) -> QuadraticDifferential:
    """``q = -(1/2m) tr(N^W(X) N^W(Y)|_W)``."""
    if m == 0:
        raise ValueError("m must be nonzero")
    if NW is None:
        _, NW = split_W(W)
    return QuadraticDifferential(-trace_metric(NW, W.bundle.projector()) / (2.0 * m), W.grid)


def wedge_field(a: Field, b: Field, space) -> Field:
    """Nodewise ``a ^ b`` for two fields of vectors."""
    s = space.signs

    def op(x, y):
        xl = x * s
        yl = y * s
        return y[..., :, None] * xl[..., None, :] - x[..., :, None] * yl[..., None, :]

    return lift(op, a, b)


def tau_from_scalar(f: SubbundleField, phi: Field) -> Field:
    """``tau = phi sigma_1 ^ sigma_2`` for the basis sections of ``f``."""
    w = wedge_field(f.column(0), f.column(1), f.space)
    return lift(lambda p, x: p[..., None, None] * x, phi, w)


def wedge2_defect(f: SubbundleField, tau: Field) -> np.ndarray:
    """Nodewise distance of ``tau`` from the line ``wedge^2 f``, relative to ``|sigma_1 ^ sigma_2|``."""
    w = wedge_field(f.column(0), f.column(1), f.space).values
    T = tau.values
    num = np.sum(w * T, axis=(-2, -1))
    den = np.sum(w * w, axis=(-2, -1))
    resid = T - (num / den)[..., None, None] * w
    return np.linalg.norm(resid, axis=(-2, -1)) / np.sqrt(den)


def gauge_transform(eta: GaugePotential, tau: Field, tol: float = 1e-9) -> GaugePotential:
    """``eta' = eta - d tau`` for ``tau`` in ``wedge^2 f``.

    The complement moves to ``exp(m tau) f~ = (1 + m tau) f~`` (``tau`` is
    nilpotent), which is the complement that yields ``eta'``.
    """
    bad = wedge2_defect(eta.f, tau)
    if bad.max() > tol:
        i, j = np.unravel_index(np.argmax(bad), bad.shape)
        raise ValueError(f"tau leaves wedge^2 f at node {(int(i), int(j))} (defect {bad.max():.2e})")
    dtau = tau.d()
    new = eta.eta - dtau
    ft = None
    if eta.ft is not None:
        eye = np.eye(eta.f.space.dim)
        ft = SubbundleField(lift(lambda t, B: (eye + eta.m * t) @ B, tau, eta.ft.basis), eta.f.space, f"{eta.ft.name}'")
    return GaugePotential(new, eta.f, eta.m, ft, None)


def is_lie_applicable(f: SubbundleField, eta: GaugePotential, tol: Optional[float] = None, eps: float = EPS_REG) -> tuple[bool, CheckReport]:
    """Legendre, closed, ``[eta ^ eta] = 0`` and ``q`` nonzero on 99% of nodes."""
    g = f.grid
    tol = exact_tolerance(f.exact and eta.exact, g) if tol is None else tol
    rep = CheckReport("lie_applicable", {"m": eta.m})
    rep.add(defect("legendre", legendre_defect(f), tol, g))
    rep.add(defect("eta_block", eta.block_defect(), max(tol, 1e-9), g))
    rep.add(defect("eta_closed", eta.closedness(), tol, g))
    rep.add(defect("eta_bracket", eta.bracket_defect(), tol, g))
    q = q_direct(eta)
    rep.add(defect("q_zero_fraction", [1.0 - q.nonzero_fraction(eps)], 1.0 - REGULAR_FRACTION, g))
    return rep.passed, rep

"""Command-line front end: generate, verify, study convergence and export heatmaps.

    curvedflats gen --config c.json --out w.json
    curvedflats verify --config c.json --report r.json
    curvedflats convergence --config c.json --grids 17,33,65
    curvedflats plot --report r.json --outdir heatmaps/

A config is one JSON file; ``--set key=value`` overrides single entries
(dotted keys reach into nested objects, values are parsed as JSON when
possible).  Every randomized choice is drawn from one generator seeded by
``seed``.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import __version__
from .applicable import eta_from_flat, gauge_transform, q_direct, q_trace, tau_from_scalar
from .curved_flat import (
    CurvedFlatSpec,
    default_spec,
    degenerate_spec,
    demoulin_families,
    generate_vacuum,
    intersection_bundle,
    perturbed_spec,
    regularity_field,
    split_W,
)
from .darboux import (
    corollary_check,
    darboux_transform,
    ribaucour_connection,
    theorem_converse,
    twisted_line,
    verify_converse,
    verify_forward,
)
from .grid_calculus import Field, FlatnessError, Grid, default_flatness_tol, plaquette_defect
from .pseudo_linalg import MetricSpace, Subspace, adapted_basis, ruling_coefficients
from .report import SEPARATION, CheckReport, DefectReport, defect, observed_orders
from .splitting import (
    exact_tolerance,
    gcr_fields,
    gcr_residuals,
    legendre_defect,
    legendre_defect_via_complement,
    non_legendre_example,
    smooth_pair,
    split_connection,
)

log = logging.getLogger("curvedflats")

DEFAULT_CONFIG = {
    "spec": {"preset": "default", "n": 2, "N": 33},
    "m": 1.0,
    "grids": [17, 33, 65],
    "alphas": [[1, 0], [1, 1], [2, 1]],
    "betas": [[1, 0], [0, 1], [1, -1]],
    "tolerances": {},
    "seed": 0,
}

ORDER_RANGE = (1.7, 2.3)
RULING_FIBERS = 20
RULING_SAMPLES = 17
RULING_RANK_TOL = 1e-8
# finite-difference defects below this are roundoff, not truncation error
ORDER_FLOOR = 1e-10


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


def build_spec(d: dict) -> CurvedFlatSpec:
    """A spec from a preset (``default``, ``perturbed``, ``degenerate``) or explicit data."""
    if "preset" in d:
        n, N = int(d.get("n", 2)), int(d.get("N", 33))
        preset = d["preset"]
        if preset == "default":
            return default_spec(n, N)
        if preset == "perturbed":
            return perturbed_spec(float(d.get("delta", 0.5)), n, N)
        if preset == "degenerate":
            return degenerate_spec(n, N)
        raise ConfigError(f"unknown spec preset {preset!r}")
    return CurvedFlatSpec.from_dict(d)


@dataclass
class RunConfig:
    spec: CurvedFlatSpec
    m: float = 1.0
    grids: list = field(default_factory=lambda: [17, 33, 65])
    alphas: list = field(default_factory=list)
    betas: list = field(default_factory=list)
    tolerances: dict = field(default_factory=dict)
    seed: int = 0
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        merged = copy.deepcopy(DEFAULT_CONFIG)
        merged.update(d)
        m = float(merged["m"])
        if m == 0:
            raise ConfigError("m must be nonzero")
        grids = [int(x) for x in merged["grids"]]
        if any(b <= a for a, b in zip(grids, grids[1:])):
            raise ConfigError(f"grid sizes must increase strictly, got {grids}")
        try:
            spec = build_spec(merged["spec"])
            spec.validate(strict=False)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid spec: {exc}") from None
        return cls(
            spec,
            m,
            grids,
            [tuple(map(float, a)) for a in merged["alphas"]],
            [tuple(map(float, b)) for b in merged["betas"]],
            {str(k): float(v) for k, v in merged["tolerances"].items()},
            int(merged["seed"]),
            merged,
        )

    def to_dict(self) -> dict:
        out = copy.deepcopy(self.raw)
        out["spec_data"] = self.spec.to_dict()
        return out

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


def parse_override(text: str) -> tuple[list[str], object]:
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, value = text.split("=", 1)
    try:
        parsed = json.loads(value)
    except json.JSONDecodeError:
        parsed = value
    return key.strip().split("."), parsed


def apply_overrides(d: dict, overrides) -> dict:
    d = copy.deepcopy(d)
    for text in overrides or ():
        keys, value = parse_override(text)
        node = d
        for k in keys[:-1]:
            node = node.setdefault(k, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot set {'.'.join(keys)}: {k} is not an object")
        node[keys[-1]] = value
    return d


def load_config(path: Optional[str], overrides=()) -> RunConfig:
    d: dict = {}
    if path:
        text = Path(path).read_text()
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: top level must be an object")
    merged = copy.deepcopy(DEFAULT_CONFIG)
    merged.update(d)
    return RunConfig.from_dict(apply_overrides(merged, overrides))


# ---------------------------------------------------------------------------
# gen


def cmd_gen(cfg: RunConfig, out) -> dict:
    """Write the basis field of ``W`` with the spec echoed next to it."""
    W = generate_vacuum(cfg.spec, strict=False)
    reg = regularity_field(W)
    g = W.grid
    doc = {
        "spec": cfg.spec.to_dict(),
        "commuting": cfg.spec.commutator_norm() <= 1e-12,
        "regular": reg.regular,
        "regular_fraction": reg.fraction,
        "W": {"N_u": g.nu, "N_v": g.nv, "shape": list(W.bundle.basis.shape), "values": W.bundle.values.reshape(g.nu * g.nv, -1).tolist()},
    }
    Path(out).write_text(json.dumps(doc, sort_keys=True))
    if not reg.regular:
        log.warning("W is not regular: only %.1f%% of nodes have a nonzero metric", 100 * reg.fraction)
    return doc


def load_generated(path) -> tuple[CurvedFlatSpec, np.ndarray, dict]:
    """Read a ``gen`` file, re-validate it nodewise and compare with a fresh generation."""
    doc = json.loads(Path(path).read_text())
    spec = CurvedFlatSpec.from_dict(doc["spec"])
    Wd = doc["W"]
    values = np.asarray(Wd["values"], dtype=float).reshape(Wd["N_u"], Wd["N_v"], *Wd["shape"])
    sg = spec.space.signs
    gram = np.swapaxes(values, -1, -2) @ (sg[:, None] * values)
    ev = np.linalg.eigvalsh(gram)
    bad = int(np.sum(~((np.sum(ev > 0, axis=-1) == 2) & (np.sum(ev < 0, axis=-1) == 2))))
    fresh = generate_vacuum(spec, strict=False).bundle.values
    check = {"bad_signature_nodes": bad, "max_regeneration_diff": float(np.max(np.abs(fresh - values)))}
    return spec, values, check


# ---------------------------------------------------------------------------
# verify


def _failed(name: str, exc: Exception) -> CheckReport:
    rep = CheckReport(name)
    rep.add(DefectReport("error", [1.0], 0.0))
    rep.notes.append(f"{type(exc).__name__}: {exc}")
    return rep


class _Run:
    """State shared by the checks of one ``verify`` run."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.rng = cfg.rng()
        self.checks: list[CheckReport] = []
        self.fields: dict = {}

    def run(self, name: str, fn: Callable[[], CheckReport]):
        t0 = time.perf_counter()
        try:
            rep = fn()
            rep.check = name
        except Exception as exc:  # report, keep going
            log.debug("check %s raised", name, exc_info=True)
            rep = _failed(name, exc)
        for d in rep.defects:
            if d.name in self.cfg.tolerances:
                d.tolerance = self.cfg.tolerances[d.name]
        self.checks.append(rep)
        log.info("%-26s %s (%.1fs)", name, "pass" if rep.passed else "FAIL", time.perf_counter() - t0)
        return rep

    # --- individual checks ---------------------------------------------------

    def curved_flat(self) -> CheckReport:
        cfg = self.cfg
        W = self.W = generate_vacuum(cfg.spec, strict=False)
        g = W.grid
        rep = CheckReport("curved_flat", {"n": cfg.spec.n, "N_u": g.nu, "N_v": g.nv})
        rep.add(defect("commutator", [cfg.spec.commutator_norm()], 1e-12, g))
        sg = W.space.signs
        gram = np.swapaxes(W.bundle.values, -1, -2) @ (sg[:, None] * W.bundle.values)
        ev = np.linalg.eigvalsh(gram)
        bad = ~((np.sum(ev > 0, axis=-1) == 2) & (np.sum(ev < 0, axis=-1) == 2))
        rep.add(defect("signature_2_2", bad.astype(float), 0.0, g))
        self.DW, self.NW = split_W(W)
        pl = plaquette_defect(self.DW)
        self.fields["DW_plaquette"] = pl
        rep.add(defect("DW_plaquette", pl, default_flatness_tol(self.DW), g))
        reg = regularity_field(W, self.NW)
        self.fields["g_det"] = np.abs(reg.det)
        rep.add(defect("regularity_zero_fraction", [1.0 - reg.fraction], 0.01, g))
        rep.add(defect("regularity_min_norm", [reg.norm.min()], 0.1, g, expect="large"))
        self.regular = reg.regular
        return rep

    def demoulin(self) -> CheckReport:
        W = self.W
        rep = CheckReport("demoulin")
        try:
            self.fams = demoulin_families(W, samples=(), DW=self.DW)
        except FlatnessError as exc:
            rep.notes.append(f"D^W not flat ({exc}); rulings moved by the generating motion")
            self.fams = demoulin_families(W, samples=(), frame=W.motion)
        a0 = self.cfg.alphas[0]
        self.f = self.fams.member("A", a0)
        self.ft = self.fams.member("A", (-a0[1], a0[0]))
        tol = exact_tolerance(W.bundle.exact, W.grid)
        for name, b in (("f", self.f), ("ft", self.ft)):
            rep.add(defect(f"{name}_parallel_DW", b.parallel_defect(self.DW), tol, W.grid))
            rep.add(defect(f"{name}_legendre", legendre_defect(b), tol, W.grid))
        return rep

    def gcr(self) -> CheckReport:
        s = self.split = split_connection(self.f, self.ft)
        rep = CheckReport("gcr")
        tol = exact_tolerance(s.exact, s.grid)
        norms = {name: F.norm() for name, F in gcr_fields(s).items()}
        for name, v in norms.items():
            rep.add(defect(name, v, tol, s.grid))
        self.fields["gcr_max"] = np.max(list(norms.values()), axis=0)
        return rep

    def legendre_lemma(self) -> CheckReport:
        g = self.f.grid
        tol = 10.0 * g.h**2
        rep = CheckReport("legendre_lemma")
        direct = legendre_defect(self.f)
        self.fields["legendre"] = direct
        space = self.f.space
        for k in range(3):
            R = space.random_orthogonal(self.rng, 0.3)
            c = self.ft.transform(R)
            via = legendre_defect_via_complement(self.f, c)
            rep.add(defect(f"agreement_{k}", np.abs(direct - via), tol, g))
        bad_f, bad_ft = non_legendre_example(g, space)
        rep.add(defect("counterexample_direct", legendre_defect(bad_f), SEPARATION, g, expect="large"))
        rep.add(defect("counterexample_A", legendre_defect_via_complement(bad_f, bad_ft), SEPARATION, g, expect="large"))
        return rep

    def eta(self) -> CheckReport:
        m = self.cfg.m
        self.pot = eta_from_flat(self.f, self.ft, m, frame=self.W.frame, split=self.split, tol=np.inf)
        g = self.f.grid
        tol = self.pot.tolerance()
        rep = CheckReport("eta", {"m": m})
        closed = self.pot.closedness()
        self.fields["eta_closed"] = closed
        rep.add(defect("eta_closed", closed, tol, g))
        rep.add(defect("eta_bracket", self.pot.bracket_defect(), tol, g))
        rep.add(defect("eta_block", self.pot.block_defect(), max(tol, 1e-9), g))
        return rep

    def quadratic_differential(self) -> CheckReport:
        g = self.f.grid
        m = self.cfg.m
        rep = CheckReport("quadratic_differential", {"m": m})
        qd = self.q = q_direct(self.pot)
        qt = q_trace(self.W, m, self.NW)
        self.fields["q_det"] = qd.det
        rep.add(defect("q_direct_vs_trace", qd - qt, self.pot.tolerance(), g))
        rep.add(defect("q_symmetry", qd.symmetry_defect(), 1e-10, g))
        rep.add(defect("q_zero_fraction", [1.0 - qd.nonzero_fraction()], 0.01, g))
        fd_tol = 10.0 * g.h**2
        for k in range(5):
            a, b, c = self.rng.uniform(-1.0, 1.0, 3)
            phi = _scalar_field(g, a, b, c)
            moved = gauge_transform(self.pot, tau_from_scalar(self.f, phi))
            rep.add(defect(f"gauge_invariance_{k}", q_direct(moved) - qd, fd_tol, g))
        return rep

    def flat_family(self) -> CheckReport:
        g = self.f.grid
        rep = CheckReport("flat_family")
        for t in (-1.0, 0.5, self.cfg.m):
            C = self.pot.connection(t)
            rep.add(defect(f"plaquette_t={t:g}", plaquette_defect(C), default_flatness_tol(C), g))
        return rep

    def forward(self) -> CheckReport:
        return verify_forward(self.W, self.cfg.m, self.cfg.alphas, self.cfg.betas)

    def converse(self) -> CheckReport:
        m = self.cfg.m
        rep, _ = verify_converse(self.f, self.pot, m, self.ft)
        a, b, c = self.rng.uniform(-1.0, 1.0, 3)
        moved = gauge_transform(self.pot, tau_from_scalar(self.f, _scalar_field(self.f.grid, a, b, c)))
        grep, _ = verify_converse(self.f, moved, m, moved.ft, tol=10.0 * self.f.grid.h**2)
        for d in grep.defects:
            d.name = f"gauge_moved:{d.name}"
            rep.add(d)
        return rep

    def corollary(self) -> CheckReport:
        _, rep = corollary_check(self.f, self.pot, self.cfg.m, rng=self.rng)
        return rep

    def theorem(self) -> CheckReport:
        lines = [intersection_bundle(self.ft, self.fams.member("B", b)) for b in self.cfg.betas[:3]]
        rep, _ = theorem_converse(self.f, self.pot, self.cfg.m, lines)
        return rep

    def perturbation(self) -> CheckReport:
        """Non-commuting generators: the potential of a Demoulin pair is not closed."""
        delta = float(self.cfg.raw.get("perturbation_delta", 0.5))
        spec = perturbed_spec(delta, self.cfg.spec.n, self.cfg.spec.nu)
        W = generate_vacuum(spec, strict=False)
        fams = demoulin_families(W, samples=(), frame=W.motion)
        a0 = self.cfg.alphas[0]
        f, ft = fams.member("A", a0), fams.member("A", (-a0[1], a0[0]))
        pot = eta_from_flat(f, ft, self.cfg.m, tol=np.inf)
        rep = CheckReport("perturbation", {"delta": delta, "N": spec.nu})
        rep.add(defect("commutator", [spec.commutator_norm()], 1e-12, W.grid, expect="large"))
        rep.add(defect("eta_closed", pot.closedness(), SEPARATION, W.grid, expect="large"))
        return rep

    def null_rulings(self) -> CheckReport:
        """Random (2,2) fibers: rulings are null, complementary within a family, meet in a line across."""
        space = self.W.space
        sg = space.signs
        alphas = [(np.cos(t), np.sin(t)) for t in np.linspace(0.0, np.pi, RULING_SAMPLES, endpoint=False)]
        null, comp, meet = [], [], []
        for _ in range(RULING_FIBERS):
            V = Subspace(space.random_orthogonal(self.rng, 0.8) @ self.cfg.spec.W0_basis, space)
            ab = np.asarray(adapted_basis(V.basis, space))
            planes = {fam: [ab @ ruling_coefficients(fam, a) for a in alphas] for fam in "AB"}
            for fam in "AB":
                for P in planes[fam]:
                    scale = np.linalg.norm(P, axis=0)
                    null.append(np.abs(P.T @ (sg[:, None] * P)).max() / scale.max() ** 2)
                ps = planes[fam]
                for i in range(len(ps)):
                    for j in range(i + 1, len(ps)):
                        comp.append(abs(4 - np.linalg.matrix_rank(np.hstack([ps[i], ps[j]]), tol=RULING_RANK_TOL)))
            for P in planes["A"]:
                for Q in planes["B"]:
                    meet.append(abs(3 - np.linalg.matrix_rank(np.hstack([P, Q]), tol=RULING_RANK_TOL)))
        rep = CheckReport("null_rulings", {"fibers": RULING_FIBERS, "samples": RULING_SAMPLES})
        rep.add(DefectReport("null", null, 1e-12))
        rep.add(DefectReport("same_family_complementary", comp, 0.0))
        rep.add(DefectReport("opposite_family_meet_dim_1", meet, 0.0))
        return rep

    def ribaucour_counterexample(self) -> CheckReport:
        space = self.f.space
        fb = self.fams.member("B", self.cfg.betas[0])
        shat = intersection_bundle(self.ft, fb)
        X = np.asarray(space.wedge(space.e(0), space.e(2))) + np.asarray(space.wedge(space.e(1), space.e(space.n + 2)))
        pair = darboux_transform(self.f, self.pot, self.cfg.m, twisted_line(shat, X))
        _, d = ribaucour_connection(pair)
        rep = CheckReport("ribaucour_counterexample")
        rep.add(DefectReport("ribaucour_flatness", d.values, SEPARATION, d.grid, expect="large"))
        return rep


def _scalar_field(grid: Grid, a: float, b: float, c: float) -> Field:
    """``a sin(pi u + b) cos(c v)``, a smooth closed-form scalar."""
    import jax.numpy as jnp

    return Field.from_function(grid, lambda u, v: a * jnp.sin(np.pi * u + b) * jnp.cos(c * v))


CHECKS = (
    ("curved_flat", "curved_flat"),
    ("demoulin", "demoulin"),
    ("gcr", "gcr"),
    ("legendre_lemma", "legendre_lemma"),
    ("eta", "eta"),
    ("quadratic_differential", "quadratic_differential"),
    ("flat_family", "flat_family"),
    ("verify_forward", "forward"),
    ("verify_converse", "converse"),
    ("corollary", "corollary"),
    ("theorem_converse", "theorem"),
    ("ribaucour_counterexample", "ribaucour_counterexample"),
    ("perturbation", "perturbation"),
    ("null_rulings", "null_rulings"),
)


def environment() -> dict:
    import jax
    import scipy

    return {
        "artifact": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "jax": jax.__version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }


def run_verify(cfg: RunConfig) -> dict:
    """Run the whole pipeline; a failing stage fails every stage that needs it."""
    run = _Run(cfg)
    blocked: Optional[str] = None
    for name, method in CHECKS:
        if blocked is not None:
            rep = _failed(name, RuntimeError(f"not run: {blocked} failed"))
            run.checks.append(rep)
            continue
        rep = run.run(name, getattr(run, method))
        if rep.failures() == ["error"] and name in ("curved_flat", "demoulin", "gcr", "eta"):
            blocked = name
    fields = {k: {"shape": list(np.shape(v)), "values": np.asarray(v, dtype=float).tolist()} for k, v in run.fields.items()}
    return {
        "config": cfg.to_dict(),
        "checks": [c.to_dict() for c in run.checks],
        "fields": fields,
        "environment": environment(),
        "pass": all(c.passed for c in run.checks),
    }


def report_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=1)


# ---------------------------------------------------------------------------
# convergence


def run_convergence(cfg: RunConfig, exact: bool = True) -> dict:
    """Defects against ``h`` on the exact vacuum path and on a sampled smooth pair.

    ``exact=False`` skips the vacuum path, which only confirms roundoff-level
    residuals at every size.
    """
    grids = cfg.grids
    space = MetricSpace(cfg.spec.n)
    hs, exact_rows, fd_rows = [], [], []
    for N in grids:
        g = Grid(N, N)
        hs.append(g.h)
        if not exact:
            exact_rows.append({})
            f, ft = smooth_pair(g, space)
            fd_rows.append({r.name: r.max for r in gcr_residuals(split_connection(f, ft))})
            continue
        W = generate_vacuum(cfg.spec.with_grid(N), strict=False)
        try:
            fams = demoulin_families(W, samples=())
            a0 = cfg.alphas[0]
            s = split_connection(fams.member("A", a0), fams.member("A", (-a0[1], a0[0])))
            exact_rows.append({r.name: r.max for r in gcr_residuals(s)})
        except (FlatnessError, ValueError) as exc:
            log.warning("exact path skipped at N=%d: %s", N, exc)
            exact_rows.append({})
        f, ft = smooth_pair(g, space)
        fd_rows.append({r.name: r.max for r in gcr_residuals(split_connection(f, ft))})
    rep = CheckReport("convergence", {"grids": grids})
    table: dict = {}
    for path, rows in (("exact", exact_rows), ("sampled", fd_rows)):
        for name in rows[0] if rows and rows[0] else []:
            vals = [r.get(name, float("nan")) for r in rows]
            entry = {"h": hs, "max": vals}
            if path == "exact":
                rep.add(DefectReport(f"exact:{name}", vals, 1e-8))
            else:
                tol = [10.0 * h * h for h in hs]
                rep.add(DefectReport(f"sampled:{name}", np.array(vals) / np.array(tol), 1.0))
                if len(grids) >= 3:
                    orders = observed_orders(hs, vals)
                    entry["order"] = orders
                    if min(vals) > ORDER_FLOOR:
                        lo, hi = ORDER_RANGE
                        off = [0.0 if o is not None and lo <= o <= hi else 1.0 for o in orders]
                        rep.add(DefectReport(f"order:{name}", off, 0.0))
            table[f"{path}:{name}"] = entry
    if len(grids) < 3:
        rep.notes.append("fewer than three grids: observed orders omitted")
    return {"config": cfg.to_dict(), "checks": [rep.to_dict()], "convergence": table, "environment": environment(), "pass": rep.passed}


# ---------------------------------------------------------------------------
# plot


def cmd_plot(report: dict, outdir) -> list[Path]:
    """One CSV per stored per-node field: ``i, j, value``."""
    outdir = Path(outdir)
    fields = report.get("fields") or {}
    if not fields:
        log.warning("report has no per-node fields; nothing written")
        return []
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for name in sorted(fields):
        entry = fields[name]
        try:
            vals = np.asarray(entry["values"], dtype=float)
        except (KeyError, TypeError, ValueError):
            log.warning("field %s is malformed; skipped", name)
            continue
        if vals.ndim != 2:
            log.warning("field %s is not a node array; skipped", name)
            continue
        path = outdir / f"{name}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "j", name])
            for i in range(vals.shape[0]):
                for j in range(vals.shape[1]):
                    w.writerow([i, j, repr(float(vals[i, j]))])
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# entry point


def _summary(report: dict) -> str:
    lines = []
    for c in report["checks"]:
        lines.append(f"{'PASS' if c['pass'] else 'FAIL'} {c['check']}")
        for name, d in c["defects"].items():
            if not d["pass"]:
                lines.append(f"    {name}: max {d['max']} (tol {d['tolerance']})")
        for note in c.get("notes", []):
            lines.append(f"    note: {note}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="curvedflats", description="Curved flats and Darboux pairs: generation and verification")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config entry")
        sp.add_argument("--seed", type=int, help="seed for all randomized choices")

    g = sub.add_parser("gen", help="generate a vacuum curved flat and dump W")
    common(g)
    g.add_argument("--out", required=True)
    v = sub.add_parser("verify", help="run the full verification pipeline")
    common(v)
    v.add_argument("--report", help="write the JSON report here")
    c = sub.add_parser("convergence", help="defects against grid size with observed orders")
    common(c)
    c.add_argument("--grids", help="comma-separated grid sizes, e.g. 17,33,65")
    c.add_argument("--report")
    c.add_argument("--sampled-only", action="store_true", help="skip the exact vacuum path")
    pl = sub.add_parser("plot", help="export per-node heatmaps as CSV")
    pl.add_argument("--report", required=True)
    pl.add_argument("--outdir", required=True)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    log.setLevel(logging.INFO if args.verbose else logging.WARNING)
    try:
        if args.command == "plot":
            written = cmd_plot(json.loads(Path(args.report).read_text()), args.outdir)
            print(f"wrote {len(written)} files to {args.outdir}")
            return 0
        overrides = list(args.set)
        if args.seed is not None:
            overrides.append(f"seed={args.seed}")
        if getattr(args, "grids", None):
            overrides.append(f"grids=[{args.grids}]")
        cfg = load_config(args.config, overrides)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.command == "gen":
        doc = cmd_gen(cfg, args.out)
        print(f"wrote {args.out} (regular: {doc['regular']}, commuting: {doc['commuting']})")
        return 0
    if args.command == "verify":
        report = run_verify(cfg)
    else:
        report = run_convergence(cfg, exact=not args.sampled_only)
    text = report_json(report)
    if args.report:
        Path(args.report).write_text(text)
    print(_summary(report))
    print("PASS" if report["pass"] else "FAIL")
    return 0 if report["pass"] else 1


if __name__ == "__main__":
    sys.exit(main())

"""Curved flats in the Grassmannian of (2,2)-planes of R^{n+2,2}.

Numerical construction of curved flats, their Demoulin families of Legendre
maps, gauge potentials and m-Darboux transforms, together with defect
measurements for every identity relating them.
"""

import os

# CURVEDFLATS_THREADS caps the CPU threads; it must be read before jax starts.
_threads = os.environ.get("CURVEDFLATS_THREADS")
if _threads:
    os.environ.setdefault("OMP_NUM_THREADS", _threads)
    os.environ.setdefault("XLA_FLAGS", f"--xla_cpu_multi_thread_eigen=false intra_op_parallelism_threads={_threads}")

import jax  # noqa: E402

# Closed-form fields are differentiated with jax; everything runs in float64.
jax.config.update("jax_enable_x64", True)

__version__ = "0.1.0"

from curvedflats.pseudo_linalg import (  # noqa: E402
    MetricSpace,
    Subspace,
    adapted_basis,
    bracket,
    null_plane_rulings,
    normalize_rp1,
    ruling_coefficients,
)
from curvedflats.grid_calculus import (  # noqa: E402
    Connection,
    Field,
    FlatnessError,
    Grid,
    OneForm,
    VacuumFrame,
    curvature,
    ext_d,
    parallel_frame,
    plaquette_defect,
    wedge_bracket,
)
from curvedflats.bundles import SubbundleField  # noqa: E402
from curvedflats.report import CheckReport, DefectReport  # noqa: E402
from curvedflats.splitting import (  # noqa: E402
    SplitData,
    check_complementary,
    gcr_residuals,
    legendre_defect,
    legendre_defect_via_complement,
    non_legendre_example,
    smooth_pair,
    split_connection,
)
from curvedflats.curved_flat import (  # noqa: E402
    CurvedFlatSpec,
    WField,
    constant_vectors,
    default_spec,
    degenerate_spec,
    demoulin_families,
    generate_vacuum,
    intersection_bundle,
    perturbed_spec,
    regularity_field,
    split_W,
)
from curvedflats.applicable import (  # noqa: E402
    GaugePotential,
    QuadraticDifferential,
    eta_from_flat,
    gauge_transform,
    is_lie_applicable,
    q_direct,
    q_trace,
    tau_from_scalar,
)
from curvedflats.darboux import (  # noqa: E402
    DarbouxPair,
    corollary_check,
    darboux_transform,
    parallel_null_lines,
    ribaucour_connection,
    theorem_converse,
    twisted_line,
    verify_converse,
    verify_forward,
)

__all__ = [
    "CheckReport",
    "Connection",
    "CurvedFlatSpec",
    "DarbouxPair",
    "DefectReport",
    "Field",
    "FlatnessError",
    "GaugePotential",
    "Grid",
    "MetricSpace",
    "OneForm",
    "QuadraticDifferential",
    "SplitData",
    "SubbundleField",
    "Subspace",
    "VacuumFrame",
    "WField",
    "adapted_basis",
    "bracket",
    "check_complementary",
    "constant_vectors",
    "corollary_check",
    "curvature",
    "darboux_transform",
    "default_spec",
    "degenerate_spec",
    "demoulin_families",
    "eta_from_flat",
    "ext_d",
    "gauge_transform",
    "gcr_residuals",
    "generate_vacuum",
    "intersection_bundle",
    "is_lie_applicable",
    "legendre_defect",
    "legendre_defect_via_complement",
    "non_legendre_example",
    "normalize_rp1",
    "null_plane_rulings",
    "parallel_frame",
    "parallel_null_lines",
    "perturbed_spec",
    "plaquette_defect",
    "q_direct",
    "q_trace",
    "regularity_field",
    "ribaucour_connection",
    "ruling_coefficients",
    "smooth_pair",
    "split_W",
    "split_connection",
    "tau_from_scalar",
    "theorem_converse",
    "twisted_line",
    "verify_converse",
    "verify_forward",
    "wedge_bracket",
]

#!/usr/bin/env python3
# A vacuum curved flat in R^{4,2}: generate, split, check flatness and regularity,
# then pull out the two Demoulin families.

from curvedflats import (
    default_spec,
    demoulin_families,
    gcr_residuals,
    generate_vacuum,
    intersection_bundle,
    legendre_defect,
    plaquette_defect,
    regularity_field,
    split_W,
    split_connection,
)

spec = default_spec(n=2, N=33)
print("commutator of the generators:", spec.commutator_norm())

W = generate_vacuum(spec)
DW, NW = split_W(W)
print("max plaquette defect of D^W:", plaquette_defect(DW).max())

reg = regularity_field(W, NW)
print("metric g at (0,0):\n", reg.g[0, 0])
print("regular:", reg.regular, " min |g|:", reg.norm.min())

fams = demoulin_families(W, samples=())
for alpha in [(1, 0), (1, 1), (2, -1)]:
    f = fams.member("A", alpha)
    print(f"A{alpha}: legendre {legendre_defect(f).max():.1e}, parallel {f.parallel_defect(DW).max():.1e}")

s = intersection_bundle(fams.member("A", (1, 0)), fams.member("B", (0, 1)))
print("rank of the intersection line:", s.rank, " null:", s.is_null(1e-12))

split = split_connection(fams.member("A", (1, 0)), fams.member("A", (0, 1)))
for r in gcr_residuals(split):
    print(r.line())

#!/usr/bin/env python3
# Darboux pairs inside a curved flat, the Ribaucour condition, a line that
# breaks it, and the way back from (f, eta, f~) to the curved flat.
import numpy as np

from curvedflats import (
    darboux_transform,
    default_spec,
    demoulin_families,
    eta_from_flat,
    generate_vacuum,
    intersection_bundle,
    ribaucour_connection,
    twisted_line,
    verify_converse,
    verify_forward,
)

W = generate_vacuum(default_spec())
m = 1.0

rep = verify_forward(W, m, alphas=((1, 0),), betas=((0, 1), (1, -1)))
print("forward direction on a 1x2 sample:", "pass" if rep.passed else rep.failures())

fams = demoulin_families(W, samples=())
f, ft = fams.member("A", (1, 0)), fams.member("A", (0, 1))
eta = eta_from_flat(f, ft, m, frame=W.frame)

shat = intersection_bundle(ft, fams.member("B", (0, 1)))
pair = darboux_transform(f, eta, m, shat)
_, flat = ribaucour_connection(pair)
print("Ribaucour flatness of the pair:", flat.max)

sp = f.space
X = np.asarray(sp.wedge(sp.e(0), sp.e(2))) + np.asarray(sp.wedge(sp.e(1), sp.e(4)))
bad = darboux_transform(f, eta, m, twisted_line(shat, X))
_, twisted = ribaucour_connection(bad)
print("same construction with a twisted line:", twisted.max)

rep, W2 = verify_converse(f, eta, m, ft)
print("rebuilt W = f + f~:", "pass" if rep.passed else rep.failures())
print("distance to the original W:", W2.bundle.distance(W.bundle).max())

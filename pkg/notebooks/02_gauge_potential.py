#!/usr/bin/env python3
# The gauge potential of a Demoulin member, its quadratic differential, and
# what a gauge transformation does to both.
import jax.numpy as jnp

from curvedflats import (
    Field,
    default_spec,
    demoulin_families,
    eta_from_flat,
    gauge_transform,
    generate_vacuum,
    is_lie_applicable,
    plaquette_defect,
    q_direct,
    q_trace,
    tau_from_scalar,
)

W = generate_vacuum(default_spec())
fams = demoulin_families(W, samples=())
f, ft = fams.member("A", (1, 0)), fams.member("A", (0, 1))

m = 1.0
eta = eta_from_flat(f, ft, m, frame=W.frame)
print("d eta:", eta.closedness().max(), " [eta ^ eta]:", eta.bracket_defect().max())

ok, rep = is_lie_applicable(f, eta)
print("Lie applicable:", ok)
for d in rep.defects:
    print("  ", d.line())

q = q_direct(eta)
print("q at (0,0):\n", q.values[0, 0])
print("q_direct - q_trace:", (q - q_trace(W, m)).max())

for t in (-1.0, 0.5, 1.0):
    print(f"plaquette of d + {t} eta:", plaquette_defect(eta.connection(t)).max())

phi = Field.from_function(f.grid, lambda u, v: 0.4 * jnp.sin(2 * u) * v)
moved = gauge_transform(eta, tau_from_scalar(f, phi))
print("after a gauge transformation, |q' - q| =", (q_direct(moved) - q).max())
print("and the moved potential is still closed:", moved.closedness().max())

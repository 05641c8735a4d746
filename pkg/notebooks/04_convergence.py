#!/usr/bin/env python3
# Finite differences on a sampled (non closed-form) complementary pair:
# the Gauss-Codazzi-Ricci residuals shrink like h^2.
import numpy as np

from curvedflats import Grid, MetricSpace, gcr_residuals, smooth_pair, split_connection
from curvedflats.report import observed_orders

sp = MetricSpace(2)
sizes = [17, 33, 65]
hs, table = [], {}
for N in sizes:
    g = Grid(N, N)
    hs.append(g.h)
    f, ft = smooth_pair(g, sp)
    for r in gcr_residuals(split_connection(f, ft)):
        table.setdefault(r.name, []).append(r.max)

print("h:", hs)
for name, vals in table.items():
    orders = observed_orders(hs, vals)
    print(f"{name:14s}", " ".join(f"{v:.2e}" for v in vals), " orders", np.round(orders, 2))

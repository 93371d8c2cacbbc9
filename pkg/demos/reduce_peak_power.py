#!/usr/bin/env python3
"""Reduce PMEPR with per-subset unitary transforms.

Runs the stochastic descent on a K=16 codebook split into 4 and then 8
subsets, printing the quartic-statistic trace and the before/after
CCDF at a few tail points.  The step size is matched to K=16; the
K^(-3/2) rule from the large-K setting is ~20x too large here.
"""

from pathlib import Path

import paprbound as pb
from paprbound.optimizer import OptimizerConfig, run

K = 16
COUNT = 200
SEED = 99
EPSILON = 1e-3
ITERS = 2000

out_dir = Path(__file__).resolve().parent / "demo_out"
out_dir.mkdir(exist_ok=True)

const = pb.QamConstellation.square(16)
basis = pb.build_basis(K)
grid = pb.db_to_linear(pb.default_gamma_grid_db(5.0, 11.0, 0.5))

for n_subsets in (4, 8):
    book = pb.generate_codebook(const, K, COUNT, n_subsets, seed=SEED)
    config = OptimizerConfig(
        epsilon=EPSILON, max_iters=ITERS, stop_tol=0.0, seed=1, checkpoint_every=500
    )
    state, trace = run(book, basis, config)
    print(f"\nN = {n_subsets} subsets ({COUNT // n_subsets} codewords each)")
    for point in trace:
        print(f"  iter {point.iteration:5d}  R = {point.r_value:10.1f}")

    before = pb.empirical_ccdf(book, grid, oversampling=16)
    after = pb.empirical_ccdf(book, grid, state, oversampling=16)
    print(f"  {'gamma dB':>9} {'ccdf before':>12} {'ccdf after':>11}")
    for g, cb_, ca in zip(before.gamma_db, before.ccdf, after.ccdf):
        print(f"  {g:9.2f} {cb_:12.4f} {ca:11.4f}")
    after.write_csv(out_dir / f"reduced_ccdf_n{n_subsets}.csv")
    if n_subsets == 4:
        before.write_csv(out_dir / "reduced_ccdf_identity.csv")

print(f"\nwrote curves to {out_dir}/")
print("more subsets give the optimizer more freedom: the N=8 statistic should")
print("land at or below the N=4 one, mirroring the behaviour at large K.")

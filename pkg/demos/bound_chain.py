#!/usr/bin/env python3
"""Walk the bound chain on a random 16-QAM codebook.

Draws a codebook, measures the empirical PMEPR CCDF on the oversampled
grid, and prints it next to the fourth-moment Markov bound and the
exponential bound (valid only above sqrt(R)/P_av).  Writes the curves
to demo_out/.
"""

from pathlib import Path

import numpy as np

import paprbound as pb

K = 16
COUNT = 5000
SEED = 2026

out_dir = Path(__file__).resolve().parent / "demo_out"
out_dir.mkdir(exist_ok=True)

const = pb.QamConstellation.square(16)
book = pb.generate_codebook(const, K, COUNT, 5, seed=SEED)
basis = pb.build_basis(K)
grid = pb.db_to_linear(pb.default_gamma_grid_db())

curve = pb.empirical_ccdf(book, grid, oversampling=16)
report = pb.bound_report(book, basis, grid)

print(f"codebook: {COUNT} codewords, K={K}, P_av={book.p_av:.3f}")
print(f"R statistic           : {report.r_value:.1f}")
print(f"endpoints (a, b)      : ({report.a:.2f}, {report.b:.2f})")
print(f"exponential bound valid for gamma > {np.sqrt(report.r_value) / book.p_av:.3f} "
      f"({10 * np.log10(np.sqrt(report.r_value) / book.p_av):.2f} dB)")
print()
print(f"{'gamma dB':>9} {'empirical':>11} {'markov':>11} {'exponential':>12}")
for g, c, mk, hf, ok in zip(
    curve.gamma_db, curve.ccdf, report.markov, report.hoeffding, report.hoeffding_valid
):
    tail = f"{hf:12.3e}" if ok else f"{'-':>12}"
    print(f"{g:9.2f} {c:11.4f} {mk:11.4f} {tail}")

curve.write_csv(out_dir / "bound_chain_ccdf.csv")
report.write_csv(out_dir / "bound_chain_bounds.csv")
print(f"\nwrote {out_dir}/bound_chain_ccdf.csv and bound_chain_bounds.csv")
print("note: the Markov column dominates the empirical curve everywhere; the")
print("exponential bound uses the unsquared support width and decays too fast")
print("to dominate once valid (pass squared_range=True to hoeffding_ccdf_bound")
print("for the conservative variant).")

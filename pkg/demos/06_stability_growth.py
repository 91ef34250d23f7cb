"""Empirical growth of the stability constant with the partition size.

For each region count N, admissible field pairs (including adversarial
deep-interior single-region bumps) are sampled and the worst ratio

    ||c1 - c2||_L2 / ||Lam1 - Lam2||_Y

is recorded. The growth across N is fitted against (1 + omega^2 B2) N^(4/7),
producing the empirical exponent coefficient that the calibration feeds into
the constants bundle.
"""

from helmrecon import Grid, estimate_lipschitz_constant

report = estimate_lipschitz_constant(Grid(33), 5.0, 1.0, 2.0,
                                     big_ns=(1, 4, 16, 64), samples_per_n=6, seed=0)

print(f"{'N':>5} {'worst ratio (HS norm)':>22} {'worst ratio (op norm)':>22}")
for n, hs, op in zip(report.big_ns, report.max_ratios, report.max_ratios_op):
    print(f"{n:>5} {hs:>22.4e} {op:>22.4e}")

print()
print(f"fitted exponent coefficient (regression): {report.khat_fit:.4e}")
print(f"bounding exponent coefficient (dominates all samples): {report.khat_bound:.4e}")
print(f"fit residual (log scale): {report.fit_residual:.3f}")
print()
print("The worst pairs are single-region bumps deep in the interior: their")
print("boundary signature is weakest, so the ratio grows as regions shrink.")

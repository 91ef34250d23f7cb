"""The stability-constant calculus: level constants, refinement conditions,
the largest sustainable partition size, and the radius-versus-frequency law.

Two regimes are shown: a compression model that decays fast enough to refine
forever, and one whose refinement budget runs out at a finite N_max located by
bisection.
"""

import numpy as np

from helmrecon import CompressionModel, ConstantsBundle, check_omega_conditions, \
    derive_level, find_omega_for_rho, rho_vs_omega, solve_n_max

bundle = ConstantsBundle(df_bound0=1.0, df_lip0=1.0, stab_k=0.05, b1=1.0, b2=2.0,
                         omega2=0.5, eps=0.1,
                         phi=CompressionModel.power_law(1.0, 2.0))

print("== level constants (omega^2 = 0.5, phi(N) = N^-2) ==")
print(f"{'N':>5} {'df_bound':>10} {'df_lip':>10} {'stab':>12} {'curvature':>12} "
      f"{'eta':>10} {'rho':>12}")
for n in (1, 4, 16, 64):
    lc = derive_level(bundle, n)
    rho = "undefined" if lc.rho is None else f"{lc.rho:.4e}"
    print(f"{n:>5} {lc.df_bound:>10.3e} {lc.df_lip:>10.3e} {lc.stab:>12.4e} "
          f"{lc.curvature:>12.4e} {lc.eta:>10.3e} {rho:>12}")

print()
print("== refinement conditions along a dyadic schedule ==")
for n_cur, n_next in ((1, 4), (4, 16), (16, 64)):
    d = check_omega_conditions(bundle, n_cur, n_next)
    verdict = "ok" if d.passed else f"refused ({d.violated()})"
    print(f"N {n_cur:>3} -> {n_next:>3}: {verdict}")

print()
print("== largest sustainable N ==")
for label, b in (
    ("fast compression (phi = 0)",
     ConstantsBundle(df_bound0=1.0, df_lip0=1.0, stab_k=0.05, b1=1.0, b2=2.0,
                     omega2=0.5, eps=0.1, phi=CompressionModel.zero())),
    ("slow compression at low frequency (phi = N^-1, omega^2 = 0.01)",
     ConstantsBundle(df_bound0=1.0, df_lip0=1.0, stab_k=0.1, b1=1.0, b2=1.0,
                     omega2=0.01, eps=0.1, phi=CompressionModel.power_law(1.0, 1.0))),
):
    res = solve_n_max(b)
    where = "" if res.n_max is None else f" at N_max = {res.n_max}"
    print(f"{label}: {res.status}{where}")

print()
print("== convergence radius vs frequency at N = 4 ==")
rows = rho_vs_omega(bundle, 4, [0.5 * 0.5 ** i for i in range(8)])
for r in rows:
    rho = "skipped: " + r.note.partition(": ")[2][:40] if r.rho is None else f"{r.rho:.4e}"
    print(f"omega^2 = {r.omega2:9.3e}: rho = {rho}")
w2, rho = find_omega_for_rho(bundle, 4, 1e3)
print(f"first omega^2 with rho >= 1e3: {w2:.3e} (rho = {rho:.3e})")

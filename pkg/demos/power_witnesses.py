# Heavy tails: the power witness u(j) = |j|^(beta - eps) against k(j) = |j|^(-1-beta).
from cdlattice.cli import fit_scaling
from cdlattice.kernels import make_power
from cdlattice.operators import apply_L, cd_ratio
from cdlattice.witnesses import power_witness, truncated_witness

beta = 1.5
k = make_power(1.0, beta)
eps_grid = [0.4, 0.2, 0.1, 0.05]
rows = []
for eps in eps_grid:
    r = cd_ratio(k, power_witness(beta, eps))
    rows.append(r)
    print(f"eps={eps:<5} L={r.L.mid:9.4f}  Gamma2=[{r.Gamma2.lo:.4f}, {r.Gamma2.hi:.4f}]  "
          f"Gamma2/L^2={r.rho_dim.mid:.4f}")

fit = fit_scaling([(e, r.L) for e, r in zip(eps_grid, rows)])
print("L ~ eps^%.3f (slope range %.4f .. %.4f)" % (fit.slope, *fit.slope_band))

# the same picture with compact support: cut off linearly between N and N^2
eps = 0.1
ref = apply_L(k, power_witness(beta, eps))
for N in (10, 20, 40, 80):
    r = cd_ratio(k, truncated_witness(beta, eps, N))
    print(f"N={N:3d}  |L(v_N) - L(u)| = {abs(r.L.mid - ref.mid):7.3f}  Gamma2/L^2 = {r.rho_dim.mid:.4f}")

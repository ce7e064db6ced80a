# Optimal dimension and curvature of truncated kernels, over a ladder of radii.
from cdlattice.extremal import best_dimension_bound, run_ladder
from cdlattice.kernels import make_finite, make_power

for name, k in [("laplacian", make_finite({1: 1.0})), ("beta=3", make_power(1.0, 3.0)),
                ("beta=1.5", make_power(1.0, 1.5)), ("beta=1", make_power(1.0, 1.0))]:
    radii = (1, 4, 16) if name == "laplacian" else (8, 16, 32)
    print(name)
    for rep in run_ladder(k, radii):
        print(f"  R={rep.radius:3d}  d*={rep.d_star:7.4f}  kappa*={rep.kappa_star:.1e}  "
              f"kappa (linear part removed)={rep.kappa_deflated:.4f}  checks ok={all(rep.bound_checks.values())}")

d, delta, j0 = best_dimension_bound(make_power(1.0, 3.0))
print(f"explicit bound for beta=3: d <= {d:.1f} (delta={delta:.2f})")

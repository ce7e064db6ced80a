"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import math
import time

import mpmath
import numpy as np

from cdlattice.cli import fit_scaling
from cdlattice.enclosure import power_sum_bounds
from cdlattice.extremal import (best_dimension_bound, explicit_dimension_bound, extremal_report,
                                run_ladder)
from cdlattice.kernels import (SparseWeight, check_S2, check_S3, check_thin_support, make_finite,
                               make_fractional, make_power, make_sparse)
from cdlattice.operators import LatticeFunction, apply_L, cd_ratio, gamma2, ly_identity_residual
from cdlattice.witnesses import (linear_cutoff_witness, power_witness, sharpness_witness,
                                 sparse_witness, square_witness, truncated_witness)

ZOO = {
    "laplacian": {1: 1.0},
    "odd_1_3": {1: 1.0, 3: 1.0},
    "two_step": {1: 1.0, 2: 0.5},
    "gap_2_5": {2: 1.0, 5: 0.25},
    "geometric_4": {1: 1.0, 2: 0.5, 3: 0.25, 4: 0.125},
    "spread_1_7": {1: 0.3, 4: 0.9, 7: 0.05},
    "sharpness_3": {1: 1.0, 3: 1.0, 5: 1.0},
}


def test_c01_sharpness_exactness(verdict):
    t0 = time.perf_counter()
    ok, worst = True, 0.0
    for N in (1, 2, 5, 10):
        k, u = sharpness_witness(N)
        r = cd_ratio(k, u, 0)
        err_g2 = max(abs(r.Gamma2.lo - 2 * N), abs(r.Gamma2.hi - 2 * N))
        L2 = r.L.square()
        err_l2 = max(abs(L2.lo - 4 * N * N), abs(L2.hi - 4 * N * N))
        worst = max(worst, err_g2, err_l2)
        ok &= err_g2 < 1e-12 and err_l2 < 1e-12 and r.rho_dim.contains(1.0 / (2 * N))
    elapsed = time.perf_counter() - t0
    verdict(1, "sharpness exactness", ok and elapsed < 1.0,
            f"(max abs error {worst:.1e}, {elapsed:.2f}s)")


def test_c02_sum_of_squares_identity(verdict):
    rng = np.random.default_rng(20240601)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        size = int(rng.integers(1, 9))
        offs = rng.choice(np.arange(1, 9), size=size, replace=False)
        w = {int(j): float(1.0 - rng.uniform(0.0, 1.0)) for j in offs}  # weights in (0, 1]
        k = make_finite(w)
        vals = rng.normal(size=17) * 10.0 ** rng.uniform(-2, 2)
        u = LatticeFunction.explicit(start=-8, array=vals)
        scale = k.mass.hi ** 2 * float(np.max(np.abs(vals))) ** 2
        worst = max(worst, ly_identity_residual(k, u) / scale)
    elapsed = time.perf_counter() - t0
    verdict(2, "sum-of-squares identity", worst < 1e-10 and elapsed < 1.0,
            f"(max scaled residual {worst:.1e}, {elapsed:.2f}s)")


def test_c03_square_function_and_unit_dimension(verdict):
    ok, worst_rel, worst_d = True, 0.0, math.inf
    sq = square_witness()
    for w in ZOO.values():
        k = make_finite(w)
        L = apply_L(k, sq, 0)
        G2 = gamma2(k, sq, 0)
        rel = max(abs(G2.hi - L.square().lo), abs(G2.lo - L.square().hi)) / L.square().lo
        worst_rel = max(worst_rel, rel)
        ok &= rel < 1e-10
        for R in sorted({1, max(w), 2 * max(w)}):
            if any(j <= R for j in w):
                worst_d = min(worst_d, extremal_report(k, R).d_star)
    ok &= worst_d >= 1 - 1e-8
    verdict(3, "square function identity and d* >= 1", ok,
            f"(max rel gap {worst_rel:.1e}, min d* {worst_d:.6f})")


def test_c04_support_count_bound(verdict):
    ok, slack = True, math.inf
    for w in ZOO.values():
        k = make_finite(w)
        for R in range(1, max(w) + 1):
            n_supp = sum(1 for j in w if j <= R)
            if n_supp == 0:
                continue
            rep = extremal_report(k, R)
            ok &= rep.d_star <= 2 * n_supp + 1e-8
            slack = min(slack, 2 * n_supp - rep.d_star)
    lap = [extremal_report(make_finite({1: 1.0}), R).d_star for R in (1, 4, 16)]
    ok &= all(abs(d - 2.0) <= 1e-8 for d in lap)
    verdict(4, "d* <= 2 N_supp, Laplacian d* = 2", ok,
            f"(min slack {slack:.2e}, Laplacian {[round(d, 12) for d in lap]})")


def test_c05_power_witness_scaling(verdict):
    t0 = time.perf_counter()
    ok, details = True, []
    for beta in (1.0, 1.5):
        k = make_power(1.0, beta)
        eps_grid = (0.4, 0.2, 0.1, 0.05)
        ratios = [cd_ratio(k, power_witness(beta, e), 0, 20_000) for e in eps_grid]
        rig = all(r.rigorous for r in ratios)
        rho = [r.rho_dim for r in ratios]
        decreasing = all(b.hi < a.lo for a, b in zip(rho, rho[1:]))
        fit = fit_scaling([(e, r.L) for e, r in zip(eps_grid, ratios)])
        in_band = -1.25 <= fit.slope_band[0] and fit.slope_band[1] <= -0.75
        ok &= rig and decreasing and in_band
        details.append(f"beta={beta}: slope {fit.slope:.3f} rho_dim {[round(r.mid, 4) for r in rho]}")
    elapsed = time.perf_counter() - t0
    verdict(5, "power witness scaling", ok and elapsed < 60.0, f"({'; '.join(details)}; {elapsed:.1f}s)")


def test_c06_critical_exponent(verdict):
    k = make_power(1.0, 2.0)
    eps_grid = (0.4, 0.2, 0.1)
    G2 = [gamma2(k, power_witness(2.0, e), 0, 20_000) for e in eps_grid]
    scaled = [g * (e * e) for g, e in zip(G2, eps_grid)]
    band_lo = min(s.lo for s in scaled)
    band_hi = max(s.hi for s in scaled)
    fit = fit_scaling(list(zip(eps_grid, G2)))
    ok = all(g.rigorous for g in G2) and band_hi <= 10.0 * band_lo
    ok &= -2.35 <= fit.slope_band[0] and fit.slope_band[1] <= -1.65
    verdict(6, "critical exponent band", ok,
            f"(eps^2 Gamma2 in [{band_lo:.3f}, {band_hi:.3f}], slope {fit.slope:.3f} "
            f"band [{fit.slope_band[0]:.3f}, {fit.slope_band[1]:.3f}])")


def test_c07_truncated_witness(verdict):
    t0 = time.perf_counter()
    beta, eps = 1.5, 0.1
    k = make_power(1.0, beta)
    ref = apply_L(k, power_witness(beta, eps), 0)
    rows = [cd_ratio(k, truncated_witness(beta, eps, N), 0) for N in (10, 20, 40, 80)]
    # rigorous distance bounds: [lo, hi] of |L(v_N) - L(u)|
    gaps = [(max(ref.lo - r.L.hi, r.L.lo - ref.hi, 0.0), max(ref.hi - r.L.lo, r.L.hi - ref.lo))
            for r in rows]
    mono = all(b[1] < a[0] for a, b in zip(gaps, gaps[1:]))
    rho_ok = rows[-1].rho_dim.hi < rows[0].rho_dim.lo
    elapsed = time.perf_counter() - t0
    ok = mono and rho_ok and elapsed < 60.0 and all(r.rigorous for r in rows)
    verdict(7, "compactly supported witness", ok,
            f"(|dL| {[round(g[1], 3) for g in gaps]}, rho_dim {rows[0].rho_dim.mid:.4f} -> "
            f"{rows[-1].rho_dim.mid:.4f}, {elapsed:.1f}s)")


def _half_integer_gamma(n2):
    if n2 % 2 == 0:
        return math.factorial(n2 // 2 - 1)
    n = (n2 - 1) // 2
    return math.factorial(2 * n) / (4 ** n * math.factorial(n)) * math.sqrt(math.pi)


def test_c08_fractional_kernel(verdict):
    js = np.arange(1, 10_001)
    ok, bands = True, []
    for beta in (0.5, 1.0, 1.5):
        k = make_fractional(beta)
        vals = k.eval(js)
        ok &= bool(np.all(vals > 0)) and bool(np.array_equal(k.eval(-js), vals)) and k.eval(0) == 0.0
        scaled = vals * js.astype(float) ** (1.0 + beta)
        band = float(scaled.max() / scaled.min())
        bands.append(round(band, 4))
        ok &= band <= 10.0
    # beta = 1: C = 2 Gamma(1) / (sqrt(pi) |Gamma(-1/2)|), k(1) = C Gamma(1/2) / Gamma(5/2)
    C = 2.0 * _half_integer_gamma(2) / (math.sqrt(math.pi) * 2.0 * math.sqrt(math.pi))
    oracle = C * _half_integer_gamma(1) / _half_integer_gamma(5)
    err = abs(make_fractional(1.0).eval(1) - oracle)
    ok &= err < 1e-12
    verdict(8, "fractional kernel", ok, f"(bands {bands}, |k_1(1) - oracle| = {err:.1e})")


def test_c09_explicit_dimension_bound(verdict):
    lap = explicit_dimension_bound(make_finite({1: 1.0}), 0.5)
    k = make_power(1.0, 3.0)
    bound, delta, _ = best_dimension_bound(k)
    ds = [r.d_star for r in run_ladder(k, (8, 16, 32, 64))]
    change = abs(ds[3] - ds[2]) / ds[2]
    ok = lap == 128.0 and all(d <= bound for d in ds) and change < 0.2
    verdict(9, "explicit dimension bound", ok,
            f"(Laplacian {lap}, bound {bound:.2f} at delta={delta:.2f}, d* {[round(d, 4) for d in ds]}, "
            f"change {change:.2%})")


def test_c10_sparse_supports(verdict):
    s2_exp = check_S2(make_sparse("pow2", SparseWeight("exp", delta=1.0)))
    s2_pow = check_S2(make_sparse("pow2", SparseWeight("power", beta=1.0)))
    s3_exp = check_S3(make_sparse("pow3", SparseWeight("exp", delta=1.0)))
    ok = s2_exp.total.is_finite and s2_exp.total.rigorous
    ok &= math.isinf(s2_pow.total.hi)
    ok &= s3_exp.total.is_finite and s3_exp.total.rigorous
    k = make_sparse("pow3_plus_l", SparseWeight("geometric", q=0.5))
    rep = check_thin_support(k, 10 ** 6)
    ok &= rep.passed
    ratios = {}
    for n in (30, 2194):
        sw = sparse_witness(k, n, rep.N_witness)
        L = apply_L(k, sw.function, 0)
        G2 = gamma2(k, sw.function, 0)
        ratio_hi = 4.0 * G2.hi / L.square().lo
        ok &= ratio_hi <= (8 * sw.xi + sw.M) / (4 * sw.xi ** 2) * (1 + 1e-8)
        ok &= L.rigorous and G2.rigorous
        ratios[sw.xi] = (4.0 * G2.lo / L.square().hi, ratio_hi)
    ok &= set(ratios) == {4, 8}
    if ok:
        ok &= ratios[4][0] >= 2.0 * ratios[8][1]
    verdict(10, "sparse supports", ok,
            f"(S2 exp {s2_exp.total.hi:.4f}, S2 power {s2_pow.total.hi}, S3 exp {s3_exp.total.hi:.4f}, "
            f"N={rep.N_witness}, ratios {ratios})")


def test_c11_curvature_degeneration(verdict, note):
    k = make_power(1.0, 1.5)
    curv = []
    for N in (8, 16, 32, 64):
        r = cd_ratio(k, linear_cutoff_witness(N), 0)
        curv.append(r.rho_curv)
    mono = all(b.hi < a.lo for a, b in zip(curv, curv[1:]))
    below = curv[-1].hi < 0.05
    reps = run_ladder(k, (8, 16, 32, 64))
    kappas = [r.kappa_star for r in reps]
    floors = [2.0 * float(k.eval(r.radius)) - r.mass for r in reps]
    # the smallest eigenvalue is 0 at every radius; 1e-12 is the eigen-solver tolerance
    kap_mono = all(b <= a + 1e-12 for a, b in zip(kappas, kappas[1:]))
    kap_ok = kap_mono and kappas[-1] <= 0.05 and all(kp >= f - 1e-8 for kp, f in zip(kappas, floors))
    ok = mono and below and kap_ok
    deflated = [r.kappa_deflated for r in reps]
    note("criterion 11: kappa on the complement of linear functions, R = 8..64: "
         f"{[round(d, 4) for d in deflated]} (not the asserted quantity; "
         f"{'below' if deflated[-1] <= 0.05 else 'above'} 0.05 at R = 64)")
    verdict(11, "curvature degeneration", ok,
            f"(rho_curv {[round(c.mid, 5) for c in curv]}, kappa* {[f'{x:.1e}' for x in kappas]}, "
            f"floors {[round(f, 3) for f in floors]})")


def test_c12_power_sum_soundness(verdict):
    rng = np.random.default_rng(7)
    mpmath.mp.dps = 40
    failures, n = [], 1000
    for i in range(n):
        if i % 10 == 0:
            gamma = float(rng.integers(-4, 4))
        else:
            gamma = float(rng.uniform(-4.0, 3.0))
        A1 = int(rng.integers(1, 200))
        if 1.0 + gamma <= 0.0 and A1 < 2:
            A1 = 2
        A2 = int(rng.integers(A1, 10_001))
        g = mpmath.mpf(gamma)
        if gamma == -1.0:
            exact = mpmath.digamma(A2 + 1) - mpmath.digamma(A1)
        else:
            exact = mpmath.zeta(-g, A1) - mpmath.zeta(-g, A2 + 1)
        enc = power_sum_bounds(gamma, A1, A2)
        if not (mpmath.mpf(enc.lo) <= exact <= mpmath.mpf(enc.hi)):
            failures.append((gamma, A1, A2))
    mpmath.mp.dps = 15
    verdict(12, "power sum enclosure soundness", not failures,
            f"({n - len(failures)}/{n} contained{', first miss ' + str(failures[0]) if failures else ''})")

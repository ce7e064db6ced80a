# Thin supports: offsets 3^l + l with geometric weights.
from cdlattice.kernels import SparseWeight, check_S2, check_thin_support, make_sparse
from cdlattice.operators import apply_L, gamma2
from cdlattice.witnesses import sparse_witness

print("S2 sum, exp weights on 2^l:  ", check_S2(make_sparse("pow2", SparseWeight("exp", delta=1.0))).total)
print("S2 sum, power weights on 2^l:", check_S2(make_sparse("pow2", SparseWeight("power", beta=1.0))).total)

k = make_sparse("pow3_plus_l", SparseWeight("geometric", q=0.5))
rep = check_thin_support(k, 10 ** 6)
print("thin support up to 1e6:", rep.passed, " N =", rep.N_witness, " gap condition:", rep.gap_condition)

for n in (30, 85, 248, 735, 2194):
    sw = sparse_witness(k, n, rep.N_witness)
    L, G2 = apply_L(k, sw.function), gamma2(k, sw.function)
    print(f"n={n:5d} xi={sw.xi}  4 Gamma2/L^2 = {4 * G2.mid / L.mid ** 2:.4f}  bound {(8 * sw.xi + sw.M) / (4 * sw.xi ** 2):.4f}")

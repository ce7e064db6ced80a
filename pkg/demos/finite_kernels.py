# Finite kernels: exact arithmetic on small supports.
import numpy as np

from cdlattice.kernels import make_finite
from cdlattice.operators import LatticeFunction, apply_L, gamma1, gamma2, ly_identity_residual
from cdlattice.witnesses import sharpness_witness, square_witness

lap = make_finite({1: 1.0})
u = LatticeFunction.explicit(start=-10, array=np.arange(-10, 11) ** 2.0)
print("Laplacian, u = j^2:  L =", apply_L(lap, u), " Gamma(3) =", gamma1(lap, u, 3), " Gamma2 =", gamma2(lap, u))

# unit weights on odd offsets: Gamma2 / (Lu)^2 = 1/(2N) exactly
for N in (1, 2, 5, 10):
    k, w = sharpness_witness(N)
    L, G2 = apply_L(k, w), gamma2(k, w)
    print(f"N={N:2d}  L={L.mid:5.1f}  Gamma2={G2.mid:5.1f}  ratio={G2.mid / L.mid ** 2:.4f}")

# the square function turns Gamma2 into (Lu)^2 on any finite kernel
k = make_finite({1: 1.0, 2: 0.5, 5: 0.1})
sq = square_witness()
print("u = j^2 on {1,2,5}:", gamma2(k, sq), "vs", apply_L(k, sq).square())

rng = np.random.default_rng(1)
res = [ly_identity_residual(k, LatticeFunction.explicit(start=-8, array=rng.normal(size=17))) for _ in range(50)]
print("largest identity residual over 50 random functions:", max(res))

"""The limiting inequality: a bump, the psi_k sequence and the b < 0 counterexample."""
from cknlab.liouville import LiouvilleParams
from cknlab.onofri import (bump, constant_sequence_psi, counterexample_gap, onofri_gap, quarter_norm_sq,
                           stereographic_gap)

v = bump(1.0)
for b in (0.0, 0.3, 0.6):
    r = onofri_gap(v, LiouvilleParams(1.0, b))
    print("b=%.1f  lhs=%.6f quad=%.6f mean=%.6f gap=%.6f +- %.1e" % (b, r.lhs, r.quad_term, r.mean_term, r.gap,
                                                                    r.error_bar))
print("stereographic form, b=0: gap=%.6f" % stereographic_gap(v).gap)

for k in range(1, 6):
    q = quarter_norm_sq(constant_sequence_psi(k))
    print("k=%d  quarter norm %.5f  k*norm %.5f" % (k, q, k * q))

for t in (1e-2, 1e-3, 1e-4):
    r = counterexample_gap(-0.5, t)
    print("b=-0.5 t=%.0e  gap=%.4f" % (t, r.gap))

"""Mass and equation residual of the explicit Liouville solutions on a (b, rho) grid."""
from cknlab.liouville import LiouvilleParams, mass, residual

print("%6s %6s %14s %10s %10s %8s" % ("b", "rho", "mass", "rel_err", "residual", "gain"))
for b in (-0.5, 0.0, 0.25, 0.5, 0.75):
    for rho in (0.5, 1.0, 2.0):
        lp = LiouvilleParams(rho, b)
        m = mass(lp)
        r16, r32 = residual(lp), residual(lp, per_decade=32)
        print("%6.2f %6.2f %14.10f %10.2e %10.2e %8.2f" % (b, rho, m.kappa, m.rel_err, r16, r16 / r32))

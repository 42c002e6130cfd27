"""Floquet multipliers of two coupled Stuart-Landau oscillators.

For each coupling strength the anti-phase orbit is found by shooting and
Gear4 is run on two grids. One multiplier is the phase mode and should
equal 1. The period and the largest multiplier grow quickly as delta
approaches the heteroclinic limit at 0.25.
"""

import sys

from floquetms import bench
from floquetms.floquet import match_eigenvalues, solve


def run(delta, p=1024):
    orbit = bench.find_antiphase_orbit(beta=0.5, delta=delta)
    coarse, _ = bench.coupled_stuart_landau(0.5, delta, p, orbit)
    fine, _ = bench.coupled_stuart_landau(0.5, delta, 4 * p, orbit)
    a = solve(coarse, "gear4", k=4).multipliers
    b = solve(fine, "gear4", k=4).multipliers
    print(f"delta={delta:.3f}  T={orbit.period:9.5f}  "
          + "  ".join(f"{abs(v.to_complex()):11.4e}" for v in a)
          + f"   vs 4x grid {match_eigenvalues(a, b):.1e}")


def main(deltas):
    print("|multipliers| sorted by magnitude, Gear4, p=1024")
    for delta in deltas:
        run(delta)


if __name__ == "__main__":
    main([float(x) for x in sys.argv[1:]] or [0.05, 0.1, 0.15, 0.2])

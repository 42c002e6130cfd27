"""Convergence of the dominant Floquet pair on the Stuart-Landau toy model.

Runs BE, Gear2 and Gear3 on 1:2 alternating grids and prints the error
table together with the fitted log-log slopes.
"""

import math

from floquetms import bench


def main():
    exact = bench.stuart_landau_exact(alpha=0.1, beta=0.1)
    print(f"exact dominant multiplier: {math.exp(0.2 * math.pi):.15f}")
    study = bench.run_convergence(exact, ["be", "gear2", "gear3"], [64, 128, 256, 512, 1024])
    print(f"{'scheme':>6} {'p':>5} {'dt_max':>10} {'e_val':>10} {'e_vec':>10}")
    for r in study.records:
        print(f"{r.scheme:>6} {r.p:>5} {r.dt_max:10.3e} {r.e_val:10.3e} {r.e_vec:10.3e}")
    for name, s in study.slopes.items():
        print(f"{name}: slope e_val {s['e_val']:.3f}, e_vec {s['e_vec']:.3f}")


if __name__ == "__main__":
    main()

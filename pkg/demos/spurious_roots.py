"""Spurious multipliers of Gear2 and Gear3 against the parasitic-root prediction."""

from floquetms import bench
from floquetms.floquet import solve
from floquetms.multistep import scheme
from floquetms.spurious import SPURIOUS, scalar_roots


def main():
    exact = bench.stuart_landau_exact(0.1, 0.1)
    for name in ("gear2", "gear3"):
        for p in (64, 128, 256):
            grid = bench.toy_grid(p)
            pred = scalar_roots(scheme(name), grid)
            sol = solve(bench.sample(exact, grid), name)
            got = sorted((v.log10_abs() for v, t in zip(sol.spectrum, sol.spectrum_tags)
                          if t == SPURIOUS), reverse=True)
            want = ", ".join(f"{x:.2f}" for x in pred.predicted_log10_magnitudes)
            print(f"{name} p={p:4d}  predicted log10|nu^p|: {want}")
            print(f"{'':12}computed spurious: {', '.join(f'{x:.2f}' for x in got)}")


if __name__ == "__main__":
    main()

"""Time the numba kernels against their numpy twins.

    python benchmarks/bench_kernels.py [--repeat 3]

Workloads match a 20x20 reference run: the coupling table (400 quadratures),
one TX link vector, and a 1-degree pattern grid over 400 currents.
"""
import argparse
import time

import numpy as np

from risscat import kernels
from risscat.constants import FREQUENCY_HZ, wavelength


def workloads():
    lam = wavelength(FREQUENCY_HZ)
    k = 2 * np.pi / lam
    d = lam / 2
    dm, dn = np.meshgrid(np.arange(20), np.arange(20), indexing="ij")
    rho = np.maximum(dm.ravel() * d, lam / 500)
    dz = (dn.ravel() * d).astype(float)
    h = lam / 8
    rng = np.random.default_rng(0)
    link_rho = 1000 + rng.uniform(0, 0.1, 400)
    link_dz = rng.uniform(-0.1, 0.1, 400)
    az, el = np.meshgrid(np.radians(np.arange(-90, 91)), np.radians(np.arange(-90, 91)))
    dirs = np.stack([np.sin(az) * np.cos(el), np.cos(az) * np.cos(el), np.sin(el)], -1).reshape(-1, 3)
    cur = rng.normal(size=400) + 1j * rng.normal(size=400)
    pos = np.stack([dm.ravel() * d, np.zeros(400), dn.ravel() * d], 1)
    return {
        "coupling table (400 pairs)": lambda b: kernels.mutual_impedance_batch(rho, dz, h, h, k, backend=b),
        "link vector (400 pairs)": lambda b: kernels.mutual_impedance_batch(
            link_rho, link_dz, lam / 4, h, k, backend=b),
        "pattern grid (181x181x400)": lambda b: kernels.array_factor(cur, pos, dirs, k, backend=b),
    }


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = ["numpy"] + (["numba"] if kernels.HAVE_NUMBA else [])
    print(f"{'workload':32s}" + "".join(f"{b:>12s}" for b in backends) + ("   speedup" if len(backends) > 1 else ""))
    for name, fn in workloads().items():
        if "numba" in backends:
            fn("numba")  # compile outside the timing
        t = {b: best_of(lambda: fn(b), args.repeat) for b in backends}
        row = f"{name:32s}" + "".join(f"{t[b] * 1e3:10.1f}ms" for b in backends)
        if len(backends) > 1:
            row += f"  {t['numpy'] / t['numba']:7.1f}x"
        print(row)


if __name__ == "__main__":
    main()

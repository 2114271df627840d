"""Compiled vs pure-Python kernels.

    python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from hydrobc import _pykernels

try:
    from hydrobc import _ckernels
except ImportError:
    _ckernels = None


def cases(rng):
    x = rng.gamma(0.8, 5.0, 20_000)
    u = rng.random(20_000)
    p = rng.gamma(0.7, 4.0, 365 * 20) * (rng.random(365 * 20) > 0.45)
    e = np.full(p.size, 1.5)
    return {
        "gamma_cdf_array (20k)": lambda m: m.gamma_cdf_array(x, 0.8, 5.0),
        "gamma_ppf_array (20k)": lambda m: m.gamma_ppf_array(u, 0.8, 5.0),
        "bucket_run (20 yr)": lambda m: m.bucket_run(p, e, 250.0, 2.0, 0.4, 3.0, 60.0, 125.0, 0.0, 0.0),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation` first")
        return
    print(f"{'kernel':<24}{'python s':>12}{'cython s':>12}{'speed-up':>10}")
    for name, fn in cases(np.random.default_rng(0)).items():
        t_py = min(timeit.repeat(lambda: fn(_pykernels), number=1, repeat=args.repeat))
        t_c = min(timeit.repeat(lambda: fn(_ckernels), number=1, repeat=args.repeat))
        print(f"{name:<24}{t_py:>12.4f}{t_c:>12.5f}{t_py / t_c:>9.0f}x")


if __name__ == "__main__":
    main()

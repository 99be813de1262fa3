"""Compare the compiled kernels with the NumPy fallback.

    python3 benchmarks/bench_kernels.py [--sizes 101 401 801] [--repeat 3]
"""

import argparse
import time

import numpy as np

from anderson_levels import kernels
from anderson_levels.model import DisorderSpec, assemble_hamiltonian, build_cube, sample_potential


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _eigh(mod, a):
    diag, off, q = mod.tridiagonalize(a.copy(), True)
    if mod.tql(diag, off, q, 30 * a.shape[0]) < 0:
        raise RuntimeError("QL did not converge")


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[101, 401, 801])
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    mods = kernels.backends()
    if "cython" not in mods:
        print("compiled extension not built; only the fallback is available")
    spec = DisorderSpec()
    print(f"{'kernel':<28}{'n':>6}" + "".join(f"{name:>12}" for name in mods) + f"{'speedup':>10}")
    for n in args.sizes:
        cube = build_cube(1, (n - 1) // 2)
        H = assemble_hamiltonian(cube, sample_potential(cube, spec, 0))
        a = np.array(H.dense())
        diag = np.ascontiguousarray(H.diagonal)
        xs = np.linspace(-2.0, 6.0, 1000)
        cases = {
            "eigh (vectors)": lambda m: _eigh(m, a),
            "cyclic_count x1000": lambda m: m.cyclic_count(diag, xs),
            "cyclic_bisect [1.9, 2.1]": lambda m: m.cyclic_bisect(diag, 1.9, 2.1, 1e-13),
        }
        for label, fn in cases.items():
            times = {name: _best(lambda: fn(m), args.repeat) for name, m in mods.items()}
            speed = times["python"] / times["cython"] if "cython" in times else float("nan")
            print(f"{label:<28}{n:>6}" + "".join(f"{t:>11.4f}s" for t in times.values()) + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()

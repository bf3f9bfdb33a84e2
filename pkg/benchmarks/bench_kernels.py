"""Compare the compiled and pure-Python pairwise kernels.

Usage::

    python3 benchmarks/bench_kernels.py [--sizes 50 200 800] [--repeat 5]

Prints the median wall time of one right-hand-side evaluation per backend and
model variant, and the throughput of a short RK4 integration.
"""

import argparse
import statistics
import time

import numpy as np

from flockbench import _pykernels
from flockbench.core import Kernel

try:
    from flockbench import _ckernels
except ImportError:
    _ckernels = None


def _time(fn, repeat):
    samples = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def rhs_cases(impl, x, v, pk):
    n = x.shape[0]
    w = np.full(n, 1.0 / n)
    return {
        "symmetric": lambda: impl.alignment(x, v, w, 1.0, *pk),
        "motsch_tadmor": lambda: impl.motsch_tadmor(x, v, 1.0, *pk),
        "bonding": lambda: impl.bonding(x, v, 1.0, 0.5, 1.0, 1.0, False, 1e-10, *pk),
    }


def rk4_run(impl, x, v, pk, steps=20, h=0.01):
    n = x.shape[0]
    w = np.full(n, 1.0 / n)

    def acc(x, v):
        return impl.alignment(x, v, w, 1.0, *pk)

    for _ in range(steps):
        a1 = acc(x, v)
        a2 = acc(x + 0.5 * h * v, v + 0.5 * h * a1)
        a3 = acc(x + 0.5 * h * v, v + 0.5 * h * a2)
        a4 = acc(x + h * v, v + h * a3)
        x = x + h * v
        v = v + h / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
    return x, v


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[50, 200, 800])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--dim", type=int, default=2)
    args = parser.parse_args()

    backends = {"python": _pykernels}
    if _ckernels is not None:
        backends["cython"] = _ckernels
    else:
        print("compiled extension not built; timing the fallback only")

    pk = Kernel.power_plain(1.5).packed()
    rng = np.random.default_rng(0)
    print(f"{'N':>6} {'variant':>14} " + " ".join(f"{b:>12}" for b in backends) + "  speedup")
    for n in args.sizes:
        x = rng.uniform(-5, 5, (n, args.dim))
        v = rng.normal(size=(n, args.dim))
        timings = {b: {k: _time(f, args.repeat) for k, f in rhs_cases(impl, x, v, pk).items()}
                   for b, impl in backends.items()}
        for variant in timings["python"]:
            cells = [timings[b][variant] for b in backends]
            speed = cells[0] / cells[-1] if len(cells) > 1 else float("nan")
            print(f"{n:>6} {variant:>14} " + " ".join(f"{c * 1e3:>10.3f}ms" for c in cells)
                  + f"  {speed:6.1f}x")
        rk = {b: _time(lambda impl=impl: rk4_run(impl, x, v, pk), 1) for b, impl in backends.items()}
        line = " ".join(f"{20 / t:>9.1f}st/s" for t in rk.values())
        print(f"{n:>6} {'rk4 steps/s':>14} {line}")


if __name__ == "__main__":
    main()

"""Compare the compiled and pure-Python delay-search kernels.

    python3 benchmarks/bench_mle.py [--repeat 200] [--sizes 512 1024 4096]

Reports the mean wall time per delay search for each backend, the speed-up,
and the largest disagreement between the two delay estimates.
"""

import argparse
import timeit

import numpy as np

from myograph import _mle_fallback as fallback
from myograph import kernels

FS = 2048.0


def problem(n, seed=0, delay=2.0e-3):
    rng = np.random.default_rng(seed)
    s = rng.standard_normal(n)
    f = np.fft.rfftfreq(n, 1 / FS)
    S = np.fft.rfft(s) * np.exp(-0.5 * ((f - 120) / 40) ** 2)
    X0 = S + 0.1 * np.fft.rfft(rng.standard_normal(n))
    X1 = S * np.exp(-2j * np.pi * f * delay) + 0.1 * np.fft.rfft(rng.standard_normal(n))
    cross = (X1 * np.conj(X0))[1:]
    omega = 2 * np.pi * f[1:]
    return (np.ascontiguousarray(cross.real), np.ascontiguousarray(cross.imag),
            np.ascontiguousarray(omega))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--sizes", type=int, nargs="+", default=[512, 1024, 4096])
    args = ap.parse_args(argv)

    backends = {"python": fallback.search_delay}
    if kernels.compiled is not None:
        backends["cython"] = kernels.compiled.search_delay
    else:
        print("compiled kernel not built; timing the fallback only")

    print(f"{'samples':>8} {'backend':>8} {'us/search':>10} {'speedup':>8} {'max |dtheta| s':>15}")
    for n in args.sizes:
        re, im, om = problem(n)
        call = (re, im, om, 0.008 / 8, 0.008 / 2, 0.25 / FS, 1e-6, 200)
        times, thetas = {}, {}
        for name, fn in backends.items():
            thetas[name] = fn(*call)[0]
            times[name] = min(timeit.repeat(lambda: fn(*call), number=args.repeat,
                                            repeat=3)) / args.repeat
        diff = abs(thetas.get("cython", thetas["python"]) - thetas["python"])
        for name in backends:
            speed = times["python"] / times[name]
            print(f"{n:>8} {name:>8} {times[name] * 1e6:>10.1f} {speed:>8.2f} {diff:>15.2e}")


if __name__ == "__main__":
    main()

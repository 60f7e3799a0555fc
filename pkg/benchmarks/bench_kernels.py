"""Compare the compiled kernels with the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each kernel is run on identical inputs by both backends; the table lists
the best wall time per call and the largest difference of the outputs.
"""
import argparse
import timeit

import numpy as np

from ncfree import _fallback
from ncfree.freeness_oracle import CovarianceMap

try:
    from ncfree import _kernels
except ImportError:  # pragma: no cover - depends on the build
    _kernels = None


def _random_upper(n, rng, shift=1.0):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h = (a + a.conj().T) / 2
    return h + 1j * shift * np.eye(n)


def cases(rng):
    out = []
    for n in (3, 7, 15):
        a = _random_upper(n, rng)
        out.append((f"invert n={n}", "invert", (a,)))
    for n in (3, 7):
        m = rng.normal(size=(n, n))
        eta = CovarianceMap.explicit([m @ m.T / n])
        z = _random_upper(n, rng, shift=0.05)
        w0 = -0.5j * np.eye(n) / 0.05
        data = np.asarray(eta.data, dtype=complex)
        out.append((f"hrs_solve n={n}", "hrs_solve", (z, "list", data, w0, 1e-12, 100000, 1.0, True)))
    for n in (3, 7, 15):
        c = rng.normal(size=(n, n))
        c = (c + c.T).astype(complex)
        z = _random_upper(n, rng, shift=0.1)
        w = np.array([0.5, 0.25, 0.25])
        t = np.array([-2.0, -1.0, 1.0])
        out.append((f"atomic_cauchy n={n}", "atomic_cauchy", (c, w, t, z)))
    return out


def _result(r):
    return r[1] if isinstance(r, tuple) else r


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled kernels are not built; only the fallback is available")
        return 1
    rng = np.random.default_rng(args.seed)
    print(f"{'case':<22}{'compiled [us]':>15}{'fallback [us]':>15}{'speedup':>10}{'max |diff|':>13}")
    for label, name, inputs in cases(rng):
        fast, slow = getattr(_kernels, name), getattr(_fallback, name)
        times = []
        for fn in (fast, slow):
            number = max(1, int(0.2 / max(timeit.timeit(lambda: fn(*inputs), number=1), 1e-6)))
            best = min(timeit.repeat(lambda: fn(*inputs), number=number, repeat=args.repeat)) / number
            times.append(best * 1e6)
        diff = float(np.max(np.abs(_result(fast(*inputs)) - _result(slow(*inputs)))))
        print(f"{label:<22}{times[0]:>15.1f}{times[1]:>15.1f}{times[1] / times[0]:>9.1f}x{diff:>13.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

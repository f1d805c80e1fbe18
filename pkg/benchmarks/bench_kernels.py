"""Time the numba and numpy paths of each hot kernel on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--scale 1.0]

The first numba call per signature compiles (or loads the on-disk cache), so
it is run once before timing.
"""
import argparse
import time

import numpy as np

from resolvent_lab import _kernels


def best_of(fn, args, repeat):
    fn(*args)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(scale, rng):
    def c(n):
        return rng.normal(size=n) + 1j * rng.normal(size=n)

    n_shift = int(2000 * scale)
    n_q = int(20000 * scale)
    for dim in (2, 4, 12):
        a = np.triu(c(dim * dim).reshape(dim, dim))
        yield f"smin_shifted dim={dim} shifts={n_shift}", "smin_shifted", (a, c(n_shift))
    yield (f"min_dist_points q={n_q} pts=500", "min_dist_points", (c(n_q), c(500)))
    v = np.cumsum(c(400)) * 0.05
    yield (f"min_dist_segments q={n_q} segs=399", "min_dist_segments",
           (c(n_q), v[:-1], v[1:]))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--scale", type=float, default=1.0, help="multiply problem sizes")
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    print(f"{'case':<44} {'numpy [s]':>10} {'numba [s]':>10} {'speedup':>8}")
    for label, name, inputs in cases(args.scale, rng):
        slow = getattr(_kernels, f"{name}_numpy")
        fast = getattr(_kernels, f"{name}_numba")
        ref = slow(*inputs)
        if not np.allclose(ref, fast(*inputs), rtol=1e-10, atol=1e-13):
            raise SystemExit(f"{label}: numba and numpy paths disagree")
        t_np = best_of(slow, inputs, args.repeat)
        t_nb = best_of(fast, inputs, args.repeat)
        print(f"{label:<44} {t_np:>10.4f} {t_nb:>10.4f} {t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()

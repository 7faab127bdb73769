"""Compare the compiled attention kernel against the numpy fallback.

Run:  python3 benchmarks/bench_attention.py [--sizes 64,128,256] [--repeats 20]
"""

import argparse
import time

import numpy as np

from cfguide.backends import available_backends
from cfguide.backends import numpy_ops


def _load_cython():
    try:
        from cfguide.backends import _fastops
        return _fastops
    except ImportError:
        return None


def bench(fn, q, k, v, bias, scale, repeats):
    fn(q, k, v, bias, scale)  # warm up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(q, k, v, bias, scale)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--sizes", default="64,128,256,512")
    parser.add_argument("--heads", type=int, default=4)
    parser.add_argument("--head-dim", type=int, default=8)
    parser.add_argument("--repeats", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    fast = _load_cython()
    print(f"available backends: {available_backends()}")
    rng = np.random.default_rng(args.seed)
    print(f"{'n':>6} {'numpy (ms)':>12} {'cython (ms)':>12} {'speedup':>8}")
    for n in (int(s) for s in args.sizes.split(",")):
        q = rng.standard_normal((args.heads, n, args.head_dim))
        k = rng.standard_normal((args.heads, n, args.head_dim))
        v = rng.standard_normal((args.heads, n, args.head_dim))
        bias = rng.standard_normal(n)
        scale = 1.0 / np.sqrt(args.head_dim)
        t_np = bench(numpy_ops.causal_attention, q, k, v, bias, scale, args.repeats)
        if fast is None:
            print(f"{n:>6} {t_np * 1e3:>12.3f} {'n/a':>12} {'n/a':>8}")
            continue
        t_cy = bench(fast.causal_attention, q, k, v, bias, scale, args.repeats)
        out_np, _ = numpy_ops.causal_attention(q, k, v, bias, scale)
        out_cy, _ = fast.causal_attention(q, k, v, bias, scale)
        assert np.allclose(out_np, out_cy, atol=1e-10), "backend outputs disagree"
        print(f"{n:>6} {t_np * 1e3:>12.3f} {t_cy * 1e3:>12.3f} {t_np / t_cy:>8.2f}")


if __name__ == "__main__":
    main()

"""Time the compiled and numpy convolution backends side by side.

    python benchmarks/bench_kernels.py [--repeats N] [--batch B] [--length T]

Shapes default to one training batch of the default TCN on the 92-feature
input. Each timing is the best of ``--repeats`` runs.
"""
import argparse
import time

import numpy as np

from tcnids import kernels
from tcnids.nn import build_model, loss_and_grads, ops
from tcnids.numerics import Rng


def best_of(fn, repeats):
    fn()
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def cases(batch, length):
    rng = np.random.default_rng(0)
    x1 = rng.normal(size=(batch, length, 1))
    x64 = rng.normal(size=(batch, length, 64))
    k1 = rng.normal(size=(3, 1, 64))
    k64 = rng.normal(size=(3, 64, 64))
    bias = np.zeros(64)
    g = rng.normal(size=(batch, length, 64))
    model = build_model("tcn", length, 15, Rng(0))
    X = rng.normal(size=(batch, length, 1))
    y = rng.integers(0, 15, batch)

    def backward(x, k, d):
        _, cache = ops.conv1d_causal_forward(x, k, bias, d)
        return lambda: ops.conv1d_causal_backward(cache, g)

    return [
        ("conv fwd  1->64 d=1", lambda: ops.conv1d_causal_forward(x1, k1, bias, 1)),
        ("conv fwd 64->64 d=4", lambda: ops.conv1d_causal_forward(x64, k64, bias, 4)),
        ("conv bwd 64->64 d=4", backward(x64, k64, 4)),
        ("TCN train step", lambda: loss_and_grads(model, X, y, ops.TRAIN, Rng(1))),
    ]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=20)
    parser.add_argument("--batch", type=int, default=32)
    parser.add_argument("--length", type=int, default=92)
    args = parser.parse_args()

    backends = kernels.available_backends()
    results = {}
    for name in backends:
        previous = kernels.use_backend(name)
        try:
            for label, fn in cases(args.batch, args.length):
                results[label, name] = best_of(fn, args.repeats)
        finally:
            kernels.use_backend(previous)

    labels = [label for label, _ in cases(args.batch, args.length)]
    header = f"{'case':<22}" + "".join(f"{b + ' (ms)':>16}" for b in backends)
    if len(backends) > 1:
        header += f"{'speed-up':>10}"
    print(f"batch {args.batch}, length {args.length}, best of {args.repeats}")
    print(header)
    for label in labels:
        row = f"{label:<22}" + "".join(f"{results[label, b] * 1e3:>16.3f}" for b in backends)
        if "python" in backends and "cython" in backends:
            row += f"{results[label, 'python'] / results[label, 'cython']:>9.2f}x"
        print(row)
    if "cython" not in backends:
        print("compiled backend not built; run `pip install -e .` to compare")


if __name__ == "__main__":
    main()
